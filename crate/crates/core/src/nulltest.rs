//! Structured-null Monte Carlo test: rerun the whole Mapper-and-community
//! pipeline on covariance-matched Gaussian replicates and standardize the
//! observed dissociation against them.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{assign_points, louvain, CommunityResult};
use crate::covariance::{ridge_regularize, sample_covariance, sample_gaussian, CovModel, SamplingStrategy};
use crate::data::DataMatrix;
use crate::distance::{distance_matrix, Metric};
use crate::error::{Error, Result};
use crate::filters::{compute_filters, FilterSpec};
use crate::mapper::{build_mapper, MapperConfig, MapperGraph};
use crate::rng::{stream_rng, OBSERVED_STREAM, PERMUTATION_EXCL_STREAM, PERMUTATION_STREAM};
use crate::teststat::{
    dissociation, make_split, mc_pvalue, permutation_null, zscore, DissociationResult,
    FeatureSplit, PermutationNull, SplitMode,
};

/// Everything one test run needs beyond the data itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub metric: Metric,
    pub filters: Vec<FilterSpec>,
    pub mapper: MapperConfig,
    pub split: SplitMode,
    pub strategy: SamplingStrategy,
    /// Null replicate count B.
    pub n_replicates: usize,
    /// Label-permutation count; 0 skips the permutation baseline.
    pub n_permutations: usize,
    pub base_seed: u64,
    /// Also report the singleton-excluded statistic variants.
    pub report_excl_singletons: bool,
}

impl PipelineConfig {
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.n_replicates == 0 {
            return Err(Error::InvalidParameter(
                "need at least 1 null replicate".into(),
            ));
        }
        if self.filters.is_empty() {
            return Err(Error::InvalidParameter("no filters specified".into()));
        }
        for f in &self.filters {
            f.validate(n)?;
        }
        self.mapper.validate(self.filters.len())?;
        if p < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 features, got {p}"
            )));
        }
        Ok(())
    }
}

/// One statistic variant: observed value, its null samples, and the
/// standardized score and Monte Carlo p-value derived from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantResult {
    pub d_obs: f64,
    pub null_samples: Vec<f64>,
    /// `None` when the null samples cannot be standardized (zero spread
    /// or a single replicate).
    pub z: Option<f64>,
    pub p_hat: f64,
}

impl VariantResult {
    fn from_samples(d_obs: f64, null_samples: Vec<f64>) -> Result<Self> {
        let z = match zscore(d_obs, &null_samples) {
            Ok(z) => Some(z),
            Err(Error::DegenerateNull(_)) | Err(Error::InvalidParameter(_)) => None,
            Err(e) => return Err(e),
        };
        let p_hat = mc_pvalue(d_obs, &null_samples)?;
        Ok(Self {
            d_obs,
            null_samples,
            z,
            p_hat,
        })
    }
}

/// The observed pipeline run in full.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedRun {
    pub graph: MapperGraph,
    pub communities: CommunityResult,
    /// Dissociation focused on all nonempty communities.
    pub dissociation: DissociationResult,
    /// Dissociation focused on non-singleton communities; present when
    /// the config asks for singleton-excluded reporting.
    pub dissociation_excl: Option<DissociationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateDiagnostics {
    /// Stream index the replicate drew from (1-based).
    pub stream: u64,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_communities: usize,
    pub sizes: Vec<usize>,
    pub modularity: Option<f64>,
}

/// Statistic values recorded from one null replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateStatistics {
    pub diagnostics: ReplicateDiagnostics,
    pub d: f64,
    pub d_excl: f64,
    pub d_max: f64,
    pub d_max_excl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceDiagnostics {
    /// Total ridge shift added to the sample covariance.
    pub epsilon: f64,
    pub effective_rank: usize,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config: PipelineConfig,
    pub n: usize,
    pub p: usize,
    pub observed_stream: u64,
    pub replicate_streams: Vec<u64>,
    pub permutation_streams: (u64, u64),
}

/// Full outcome of [`run_structured_null_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullTestResult {
    pub all: VariantResult,
    pub excl_singletons: Option<VariantResult>,
    pub d_max: VariantResult,
    pub d_max_excl_singletons: Option<VariantResult>,
    /// Label-permutation baseline over all communities; skipped when not
    /// requested or when the observed run has fewer than 2 communities.
    pub permutation: Option<PermutationNull>,
    /// Singleton-excluded permutation baseline; additionally skipped when
    /// fewer than 2 observed communities have 2 or more points.
    pub permutation_excl_singletons: Option<PermutationNull>,
    pub observed: ObservedRun,
    pub replicates: Vec<ReplicateDiagnostics>,
    pub covariance: CovarianceDiagnostics,
    pub provenance: Provenance,
}

/// One end-to-end pipeline pass on a single dataset: distances, filters,
/// Mapper, Louvain, point assignment, dissociation (both focus sets).
pub fn run_pipeline(
    x: &DataMatrix,
    config: &PipelineConfig,
    split: &FeatureSplit,
    rng: &mut ChaCha8Rng,
) -> Result<ObservedRun> {
    let d = distance_matrix(x, config.metric)?;
    let filters = compute_filters(x, &d, &config.filters, rng)?;
    let graph = build_mapper(x, &d, &filters, &config.mapper)?;
    let partition = louvain(&graph, rng);
    let communities = assign_points(&graph, &partition)?;
    let diss = dissociation(x, &communities.point_community, split, false)?;
    let diss_excl = dissociation(x, &communities.point_community, split, true)?;
    Ok(ObservedRun {
        graph,
        communities,
        dissociation: diss,
        dissociation_excl: Some(diss_excl),
    })
}

/// Fits the covariance model the null replicates are drawn from: the
/// sample covariance of `x`, ridge-repaired under the ridge strategy.
pub fn covariance_model(x: &DataMatrix, strategy: SamplingStrategy) -> Result<CovModel> {
    let model = sample_covariance(x)?;
    Ok(match strategy {
        SamplingStrategy::Ridge => ridge_regularize(model),
        SamplingStrategy::ReducedRank => model,
    })
}

/// Runs one null replicate on its own rng stream and reports the four
/// statistic variants plus graph diagnostics. Deterministic in
/// (model, config, stream), so replicates can run in any order.
pub fn null_replicate_statistics(
    model: &CovModel,
    n: usize,
    config: &PipelineConfig,
    split: &FeatureSplit,
    stream: u64,
) -> Result<ReplicateStatistics> {
    let mut rng = stream_rng(config.base_seed, stream);
    let x_star = sample_gaussian(model, n, config.strategy, &mut rng)?;
    let run = run_pipeline(&x_star, config, split, &mut rng)?;
    let excl = run
        .dissociation_excl
        .as_ref()
        .expect("run_pipeline always fills the exclusive focus");
    Ok(ReplicateStatistics {
        diagnostics: ReplicateDiagnostics {
            stream,
            n_vertices: run.graph.n_vertices(),
            n_edges: run.graph.n_edges(),
            n_communities: run.communities.n_communities,
            sizes: run.communities.sizes.clone(),
            modularity: run.communities.modularity,
        },
        d: run.dissociation.d,
        d_excl: run.dissociation.d_excl_singletons,
        d_max: run.dissociation.d_max,
        d_max_excl: excl.d_max,
    })
}

/// The structured-null Monte Carlo test.
///
/// The observed pipeline runs once on stream 0 of `base_seed`; the sample
/// covariance of the observed data is fitted; B Gaussian replicates are
/// drawn from it on streams 1..=B, each rerun through the identical
/// pipeline; the observed dissociation is standardized against the
/// replicate values. Replicate failures abort the run naming the
/// replicate index. The result is bit-for-bit deterministic in
/// (X, config) regardless of worker count.
pub fn run_structured_null_test(x: &DataMatrix, config: &PipelineConfig) -> Result<NullTestResult> {
    config.validate(x.n(), x.p())?;
    let split = make_split(x.p(), config.split)?;

    let mut rng = stream_rng(config.base_seed, OBSERVED_STREAM);
    let mut observed = run_pipeline(x, config, &split, &mut rng)?;
    if !config.report_excl_singletons {
        observed.dissociation_excl = None;
    }

    let model = covariance_model(x, config.strategy)?;
    let b = config.n_replicates;
    let replicate_streams: Vec<u64> = (1..=b as u64).collect();
    let outcomes: Vec<ReplicateStatistics> = replicate_streams
        .par_iter()
        .map(|&stream| {
            null_replicate_statistics(&model, x.n(), config, &split, stream)
                .map_err(|e| e.at_replicate(stream as usize))
        })
        .collect::<Result<_>>()?;

    let collect = |f: fn(&ReplicateStatistics) -> f64| -> Vec<f64> {
        outcomes.iter().map(f).collect()
    };
    let all = VariantResult::from_samples(observed.dissociation.d, collect(|r| r.d))?;
    let d_max = VariantResult::from_samples(observed.dissociation.d_max, collect(|r| r.d_max))?;
    let (excl, d_max_excl) = if config.report_excl_singletons {
        let excl_focus = observed
            .dissociation_excl
            .as_ref()
            .expect("exclusive focus kept when reporting is on");
        (
            Some(VariantResult::from_samples(
                observed.dissociation.d_excl_singletons,
                collect(|r| r.d_excl),
            )?),
            Some(VariantResult::from_samples(
                excl_focus.d_max,
                collect(|r| r.d_max_excl),
            )?),
        )
    } else {
        (None, None)
    };

    let perm_ready = config.n_permutations >= 2
        && observed.communities.n_communities >= 2
        && observed
            .communities
            .point_community
            .iter()
            .filter(|c| c.is_some())
            .count()
            >= observed.communities.n_communities;
    let permutation = if perm_ready {
        Some(permutation_null(
            x,
            &observed.communities,
            &split,
            false,
            config.n_permutations,
            &mut stream_rng(config.base_seed, PERMUTATION_STREAM),
        )?)
    } else {
        None
    };
    // The singleton-excluded baseline is identically zero unless at least
    // two non-singleton communities exist, so it is skipped rather than
    // reported as degenerate.
    let eligible_excl = observed
        .communities
        .sizes
        .iter()
        .filter(|&&s| s >= 2)
        .count();
    let permutation_excl_singletons =
        if perm_ready && config.report_excl_singletons && eligible_excl >= 2 {
            Some(permutation_null(
                x,
                &observed.communities,
                &split,
                true,
                config.n_permutations,
                &mut stream_rng(config.base_seed, PERMUTATION_EXCL_STREAM),
            )?)
        } else {
            None
        };

    Ok(NullTestResult {
        all,
        excl_singletons: excl,
        d_max,
        d_max_excl_singletons: d_max_excl,
        permutation,
        permutation_excl_singletons,
        covariance: CovarianceDiagnostics {
            epsilon: model.epsilon(),
            effective_rank: model.effective_rank(),
            min_eigenvalue: model.min_eigenvalue(),
        },
        replicates: outcomes.into_iter().map(|o| o.diagnostics).collect(),
        observed,
        provenance: Provenance {
            config: config.clone(),
            n: x.n(),
            p: x.p(),
            observed_stream: OBSERVED_STREAM,
            replicate_streams,
            permutation_streams: (PERMUTATION_STREAM, PERMUTATION_EXCL_STREAM),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::CoverMode;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn base_config() -> PipelineConfig {
        PipelineConfig {
            metric: Metric::Euclidean,
            filters: vec![FilterSpec::Pcoa { axis: 1 }],
            mapper: MapperConfig {
                resolutions: vec![4],
                gains: vec![1.5],
                cover_mode: CoverMode::Equalized,
                histogram_bins: 10,
            },
            split: SplitMode::OddEven,
            strategy: SamplingStrategy::Ridge,
            n_replicates: 12,
            n_permutations: 50,
            base_seed: 91,
            report_excl_singletons: true,
        }
    }

    /// Mildly correlated Gaussian-ish data, deterministic.
    fn test_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = stream_rng(seed, 7);
        let mut vals = DMatrix::zeros(n, p);
        for i in 0..n {
            let shared: f64 = rng.random::<f64>() - 0.5;
            for j in 0..p {
                vals[(i, j)] = shared + (rng.random::<f64>() - 0.5) * 2.0;
            }
        }
        DataMatrix::from_values(vals).unwrap()
    }

    #[test]
    fn result_is_deterministic_and_self_consistent() {
        let x = test_data(40, 4, 3);
        let config = base_config();
        let a = run_structured_null_test(&x, &config).unwrap();
        let b = run_structured_null_test(&x, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );

        assert_eq!(a.all.null_samples.len(), config.n_replicates);
        let z = zscore(a.all.d_obs, &a.all.null_samples).unwrap();
        assert_eq!(Some(z), a.all.z);
        let p = mc_pvalue(a.all.d_obs, &a.all.null_samples).unwrap();
        assert_eq!(p, a.all.p_hat);
        let excl = a.excl_singletons.as_ref().unwrap();
        assert_eq!(excl.null_samples.len(), config.n_replicates);
        assert_eq!(
            mc_pvalue(excl.d_obs, &excl.null_samples).unwrap(),
            excl.p_hat
        );
        assert!(a.d_max_excl_singletons.is_some());
        assert!(a.permutation.is_some());
        assert!(a.permutation_excl_singletons.is_some());
    }

    #[test]
    fn replicate_order_does_not_change_the_sample_multiset() {
        let x = test_data(30, 4, 5);
        let config = base_config();
        let result = run_structured_null_test(&x, &config).unwrap();

        let split = make_split(x.p(), config.split).unwrap();
        let model = covariance_model(&x, config.strategy).unwrap();
        let mut streams: Vec<u64> = (1..=config.n_replicates as u64).collect();
        streams.reverse();
        streams.swap(0, 3);
        let mut permuted: Vec<f64> = streams
            .iter()
            .map(|&s| {
                null_replicate_statistics(&model, x.n(), &config, &split, s)
                    .unwrap()
                    .d
            })
            .collect();
        let mut original = result.all.null_samples.clone();
        permuted.sort_by(f64::total_cmp);
        original.sort_by(f64::total_cmp);
        assert_eq!(permuted, original);
    }

    #[test]
    fn provenance_echoes_the_config_and_streams() {
        let x = test_data(30, 4, 11);
        let config = base_config();
        let r = run_structured_null_test(&x, &config).unwrap();
        assert_eq!(r.provenance.config, config);
        assert_eq!(
            r.provenance.replicate_streams,
            (1..=config.n_replicates as u64).collect::<Vec<_>>()
        );
        assert_eq!(r.provenance.n, 30);
        assert_eq!(r.provenance.p, 4);
        assert_eq!(r.replicates.len(), config.n_replicates);
        for (i, rep) in r.replicates.iter().enumerate() {
            assert_eq!(rep.stream, i as u64 + 1);
        }
    }

    #[test]
    fn absorbed_two_blob_structure_scores_negative_z() {
        // Rows at +-1 across every feature plus small noise: the blob gap
        // inflates the sample covariance, so null replicates spread wider
        // than the observed within-community means.
        let n = 80;
        let p = 5;
        let mut rng = stream_rng(17, 0);
        let mut vals = DMatrix::zeros(n, p);
        for i in 0..n {
            let center = if i % 2 == 0 { 1.0 } else { -1.0 };
            for j in 0..p {
                vals[(i, j)] = center + (rng.random::<f64>() - 0.5) * 0.4;
            }
        }
        let x = DataMatrix::from_values(vals).unwrap();
        let mut config = base_config();
        config.n_replicates = 30;
        config.n_permutations = 0;
        let r = run_structured_null_test(&x, &config).unwrap();
        let z = r.all.z.expect("spread null samples");
        assert!(z < -1.0, "z = {z}");
        assert!(r.all.p_hat > 0.5, "p = {}", r.all.p_hat);
    }

    #[test]
    fn replicate_failures_carry_the_replicate_index() {
        // Identical rows: the observed pipeline works (external filter,
        // all distances zero), but the sample covariance is the zero
        // matrix, so reduced-rank sampling fails at replicate 1.
        let n = 5;
        let vals = DMatrix::from_fn(n, 2, |_, j| j as f64);
        let x = DataMatrix::from_values(vals).unwrap();
        let config = PipelineConfig {
            metric: Metric::Euclidean,
            filters: vec![FilterSpec::External {
                values: (0..n).map(|i| i as f64).collect(),
                jitter_sd: 0.0,
            }],
            mapper: MapperConfig {
                resolutions: vec![2],
                gains: vec![1.0],
                cover_mode: CoverMode::Equalized,
                histogram_bins: 10,
            },
            split: SplitMode::OddEven,
            strategy: SamplingStrategy::ReducedRank,
            n_replicates: 3,
            n_permutations: 0,
            base_seed: 1,
            report_excl_singletons: false,
        };
        let err = run_structured_null_test(&x, &config).unwrap_err();
        match err {
            // All replicates fail here; any index may surface first.
            Error::Replicate { index, .. } => assert!((1..=3).contains(&index)),
            other => panic!("expected a replicate error, got {other}"),
        }
    }

    /// Single covering cell, one resolution-1 filter, no overlap.
    fn one_cell_config(n: usize) -> PipelineConfig {
        let mut config = base_config();
        config.filters = vec![FilterSpec::External {
            values: (0..n).map(|i| i as f64).collect(),
            jitter_sd: 0.0,
        }];
        config.mapper.resolutions = vec![1];
        config.mapper.cover_mode = CoverMode::FixedWidth { overlap: 0.0 };
        config.mapper.gains = vec![1.0];
        config.n_replicates = 4;
        config
    }

    #[test]
    fn single_community_runs_skip_the_permutation_baseline() {
        // Evenly spaced rows: every merge height in the one cell is equal,
        // so no gap splits it and the whole dataset is one community.
        let vals = DMatrix::from_fn(20, 4, |i, j| i as f64 * (j as f64 + 1.0));
        let x = DataMatrix::from_values(vals).unwrap();
        let config = one_cell_config(20);
        let r = run_structured_null_test(&x, &config).unwrap();
        assert_eq!(r.observed.communities.n_communities, 1);
        assert_eq!(r.permutation, None);
        assert_eq!(r.permutation_excl_singletons, None);
        assert_eq!(r.all.d_obs, 0.0);
        assert_eq!(r.all.p_hat, 1.0);
    }

    #[test]
    fn singleton_communities_drop_only_the_excl_baseline() {
        // A tight 19-point blob plus one far outlier in a single cell
        // splits into communities of sizes {19, 1}. The all-communities
        // permutation baseline works, but with singletons excluded only
        // one block remains, so that baseline is skipped, not degenerate.
        let mut vals = DMatrix::zeros(20, 4);
        for i in 0..19 {
            for j in 0..4 {
                vals[(i, j)] =
                    0.01 * i as f64 + 0.002 * (i as f64 * (j as f64 + 1.0)).sin();
            }
        }
        for j in 0..4 {
            vals[(19, j)] = 100.0;
        }
        let x = DataMatrix::from_values(vals).unwrap();
        let config = one_cell_config(20);
        let r = run_structured_null_test(&x, &config).unwrap();
        let mut sizes = r.observed.communities.sizes.clone();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 19]);
        assert!(r.permutation.is_some());
        assert_eq!(r.permutation_excl_singletons, None);
        assert!(r.excl_singletons.is_some());
    }

    #[test]
    fn excl_variants_absent_when_not_requested() {
        let x = test_data(30, 4, 9);
        let mut config = base_config();
        config.report_excl_singletons = false;
        let r = run_structured_null_test(&x, &config).unwrap();
        assert!(r.excl_singletons.is_none());
        assert!(r.d_max_excl_singletons.is_none());
        assert!(r.observed.dissociation_excl.is_none());
        assert!(r.permutation_excl_singletons.is_none());
        assert!(r.permutation.is_some());
    }

    #[test]
    fn config_validation_names_problems() {
        let x = test_data(20, 4, 2);
        let mut config = base_config();
        config.n_replicates = 0;
        assert!(run_structured_null_test(&x, &config).is_err());
        let mut config = base_config();
        config.filters.clear();
        assert!(run_structured_null_test(&x, &config).is_err());
        let mut config = base_config();
        config.mapper.gains = vec![0.5];
        assert!(run_structured_null_test(&x, &config).is_err());
    }

    #[test]
    fn identical_seed_reuses_the_observed_jitter() {
        // External filter with jitter: determinism still holds because the
        // jitter comes from the observed stream.
        let x = test_data(25, 4, 6);
        let mut config = base_config();
        config.filters = vec![FilterSpec::External {
            values: (0..25).map(|i| (i % 5) as f64).collect(),
            jitter_sd: 0.01,
        }];
        config.n_permutations = 0;
        config.n_replicates = 5;
        let a = run_structured_null_test(&x, &config).unwrap();
        let b = run_structured_null_test(&x, &config).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.all.d_obs, b.all.d_obs, epsilon = 0.0);
    }
}
