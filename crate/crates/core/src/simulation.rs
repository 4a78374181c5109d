//! Data-generating processes and the rejection-rate harness.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::mapper::{CoverMode, MapperConfig};
use crate::nulltest::{run_structured_null_test, PipelineConfig};
use crate::rng::{derive_seed, stream_rng};
use crate::covariance::SamplingStrategy;
use crate::teststat::SplitMode;

/// Distribution families for simulated datasets. Correlation parameters
/// describe a two-block structure: features split into two equal groups
/// (odd p puts the extra feature in group 1), correlated within groups,
/// independent across.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DgpKind {
    Spherical,
    CorrelatedBlock { rho: f64 },
    MultivariateT { df: f64 },
    Skewed,
    AllfeatureMixture { delta: f64, rho: f64 },
    SparseMixture { delta: f64, rho: f64, k_shifted: usize },
    HeteroCovMixture { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub p: usize,
    /// Center and scale each feature after generation. Defaults to the
    /// family convention: on for the skewed and mixture families, off for
    /// the Gaussian and t families.
    #[serde(default)]
    pub standardize: Option<bool>,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 2 {
            return Err(Error::InvalidParameter(format!(
                "dataset shape {}x{} is too small",
                self.n, self.p
            )));
        }
        let check_rho = |rho: f64| -> Result<()> {
            if !rho.is_finite() || !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!(
                    "correlation {rho} must lie in [0, 1)"
                )));
            }
            Ok(())
        };
        match self.kind {
            DgpKind::Spherical | DgpKind::Skewed => Ok(()),
            DgpKind::CorrelatedBlock { rho } | DgpKind::HeteroCovMixture { rho } => check_rho(rho),
            DgpKind::MultivariateT { df } => {
                if !df.is_finite() || df <= 2.0 {
                    return Err(Error::InvalidParameter(format!(
                        "t degrees of freedom {df} must exceed 2"
                    )));
                }
                Ok(())
            }
            DgpKind::AllfeatureMixture { delta, rho } => {
                check_rho(rho)?;
                check_delta(delta)
            }
            DgpKind::SparseMixture {
                delta,
                rho,
                k_shifted,
            } => {
                check_rho(rho)?;
                check_delta(delta)?;
                if k_shifted > self.p {
                    return Err(Error::InvalidParameter(format!(
                        "cannot shift {k_shifted} of {} features",
                        self.p
                    )));
                }
                Ok(())
            }
        }
    }

    /// The family convention when the flag is unset.
    pub fn effective_standardize(&self) -> bool {
        self.standardize.unwrap_or(matches!(
            self.kind,
            DgpKind::Skewed
                | DgpKind::AllfeatureMixture { .. }
                | DgpKind::SparseMixture { .. }
                | DgpKind::HeteroCovMixture { .. }
        ))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mixture separation {delta} must be >= 0"
        )));
    }
    Ok(())
}

/// Feature groups of the two-block covariance: group 1 gets the extra
/// feature when p is odd.
fn block_groups(p: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let g1 = p.div_ceil(2);
    (0..g1, g1..p)
}

/// One row with unit-variance two-block correlation: within each group,
/// X_j = sqrt(rho) * G + sqrt(1 - rho) * Z_j with a group-shared factor G.
fn block_row<R: Rng>(p: usize, rho: f64, rng: &mut R, row: &mut [f64]) {
    let (a, b) = block_groups(p);
    for group in [a, b] {
        if group.is_empty() {
            continue;
        }
        let shared: f64 = rng.sample(StandardNormal);
        for j in group {
            let z: f64 = rng.sample(StandardNormal);
            row[j] = rho.sqrt() * shared + (1.0 - rho).sqrt() * z;
        }
    }
}

/// One row where only the features in `correlated` share a factor with
/// correlation rho; all other features are independent standard normal.
fn subset_equicorrelated_row<R: Rng>(
    p: usize,
    correlated: std::ops::Range<usize>,
    rho: f64,
    rng: &mut R,
    row: &mut [f64],
) {
    let shared: f64 = rng.sample(StandardNormal);
    for j in 0..p {
        let z: f64 = rng.sample(StandardNormal);
        row[j] = if correlated.contains(&j) {
            rho.sqrt() * shared + (1.0 - rho).sqrt() * z
        } else {
            z
        };
    }
}

fn standardize_columns(values: &mut DMatrix<f64>) -> Result<()> {
    let n = values.nrows();
    for j in 0..values.ncols() {
        let mean = values.column(j).sum() / n as f64;
        let var = values
            .column(j)
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::InvalidData(format!(
                "feature {j} is constant; cannot scale"
            )));
        }
        for i in 0..n {
            values[(i, j)] = (values[(i, j)] - mean) / sd;
        }
    }
    Ok(())
}

/// Simulated dataset plus the mixture component of each row (all zeros
/// for the single-component families). Rows consume the stream in order;
/// within a row the order is mixture coin, then t scale variate, then
/// shared factors, then per-feature draws.
pub fn generate_dgp_labeled<R: Rng>(
    spec: &DgpSpec,
    rng: &mut R,
) -> Result<(DataMatrix, Vec<usize>)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut values = DMatrix::zeros(n, p);
    let mut labels = vec![0usize; n];
    let mut row = vec![0.0f64; p];

    for i in 0..n {
        match spec.kind {
            DgpKind::Spherical => {
                for j in 0..p {
                    row[j] = rng.sample(StandardNormal);
                }
            }
            DgpKind::CorrelatedBlock { rho } => block_row(p, rho, rng, &mut row),
            DgpKind::MultivariateT { df } => {
                let chi = ChiSquared::new(df).expect("df > 2 validated");
                let v: f64 = rng.sample(chi);
                block_row(p, 0.5, rng, &mut row);
                let scale = (v / df).sqrt();
                for r in row.iter_mut() {
                    *r /= scale;
                }
            }
            DgpKind::Skewed => {
                block_row(p, 0.5, rng, &mut row);
                for r in row.iter_mut() {
                    *r = (0.5 * *r).exp();
                }
            }
            DgpKind::AllfeatureMixture { delta, rho } => {
                let flip = rng.random::<f64>() < 0.5;
                labels[i] = usize::from(flip);
                let shift = if flip { -delta / 2.0 } else { delta / 2.0 };
                block_row(p, rho, rng, &mut row);
                for r in row.iter_mut() {
                    *r += shift;
                }
            }
            DgpKind::SparseMixture {
                delta,
                rho,
                k_shifted,
            } => {
                let flip = rng.random::<f64>() < 0.5;
                labels[i] = usize::from(flip);
                let shift = if flip { -delta / 2.0 } else { delta / 2.0 };
                block_row(p, rho, rng, &mut row);
                for r in row.iter_mut().take(k_shifted) {
                    *r += shift;
                }
            }
            DgpKind::HeteroCovMixture { rho } => {
                let flip = rng.random::<f64>() < 0.5;
                labels[i] = usize::from(flip);
                let (first, second) = block_groups(p);
                let correlated = if flip { second } else { first };
                subset_equicorrelated_row(p, correlated, rho, rng, &mut row);
            }
        }
        for j in 0..p {
            values[(i, j)] = row[j];
        }
    }

    if spec.effective_standardize() {
        standardize_columns(&mut values)?;
    }
    Ok((DataMatrix::from_values(values)?, labels))
}

/// Simulated dataset without the component labels.
pub fn generate_dgp<R: Rng>(spec: &DgpSpec, rng: &mut R) -> Result<DataMatrix> {
    Ok(generate_dgp_labeled(spec, rng)?.0)
}

/// The fixed pipeline the rejection-rate tables use: Euclidean distances,
/// two equalized PCoA filters at resolution 15 and gain 2.0, 10 histogram
/// bins, odd/even split, ridge sampling, no permutation baseline.
pub fn scenario_pipeline_config(n_replicates: usize, base_seed: u64) -> PipelineConfig {
    PipelineConfig {
        metric: Metric::Euclidean,
        filters: vec![FilterSpec::Pcoa { axis: 1 }, FilterSpec::Pcoa { axis: 2 }],
        mapper: MapperConfig {
            resolutions: vec![15, 15],
            gains: vec![2.0, 2.0],
            cover_mode: CoverMode::Equalized,
            histogram_bins: 10,
        },
        split: SplitMode::OddEven,
        strategy: SamplingStrategy::Ridge,
        n_replicates,
        n_permutations: 0,
        base_seed,
        report_excl_singletons: false,
    }
}

/// Rejection-rate summary over R simulated datasets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub z_values: Vec<f64>,
    /// Fraction of z values above 1.645.
    pub rejection_rate: f64,
    pub mean_z: f64,
    pub r: usize,
    pub b: usize,
    pub runtime_seconds: f64,
}

/// Generates R datasets from the family and runs the structured-null test
/// on each with the fixed pipeline. Dataset r derives its own seed from
/// (base_seed, r), so results do not depend on execution order.
pub fn run_scenario(spec: &DgpSpec, r: usize, b: usize, base_seed: u64) -> Result<ScenarioResult> {
    if r == 0 {
        return Err(Error::InvalidParameter("need at least 1 dataset".into()));
    }
    spec.validate()?;
    let start = std::time::Instant::now();
    let z_values: Vec<f64> = (0..r)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let dgp_seed = derive_seed(base_seed, i as u64);
            let mut rng: ChaCha8Rng = stream_rng(dgp_seed, 0);
            let x = generate_dgp(spec, &mut rng)?;
            let config = scenario_pipeline_config(b, derive_seed(dgp_seed, 1));
            let result =
                run_structured_null_test(&x, &config).map_err(|e| e.at_replicate(i))?;
            result.all.z.ok_or_else(|| {
                Error::DegenerateNull(format!("dataset {i}: null samples have zero spread"))
            })
        })
        .collect::<Result<_>>()?;

    let mean_z = z_values.iter().sum::<f64>() / r as f64;
    let rejections = z_values.iter().filter(|&&z| z > 1.645).count();
    Ok(ScenarioResult {
        rejection_rate: rejections as f64 / r as f64,
        mean_z,
        r,
        b,
        runtime_seconds: start.elapsed().as_secs_f64(),
        z_values,
    })
}
