//! Configuration file formats for the `covmapper` binary.
//!
//! Configs are JSON documents validated strictly before any computation:
//! unknown keys are rejected, filter column references are resolved
//! against the CSV header, and every numeric constraint is checked by the
//! same validators the library uses.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariance::SamplingStrategy;
use crate::csvio::CsvTable;
use crate::data::DataMatrix;
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::mapper::MapperConfig;
use crate::nulltest::PipelineConfig;
use crate::simulation::DgpSpec;
use crate::teststat::SplitMode;

/// One filter entry in a run config. Unlike [`FilterSpec`], the external
/// variant names a CSV column instead of carrying values inline; the
/// referenced column is removed from the feature matrix so it never
/// enters the covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    LinfCentrality,
    Pcoa { axis: usize },
    KnnGeodesicMds { k: usize, axis: usize },
    External {
        column: String,
        #[serde(default)]
        jitter_sd: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitModeName {
    OddEven,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub mode: SplitModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SplitConfig {
    pub fn to_mode(&self) -> Result<SplitMode> {
        match (self.mode, self.seed) {
            (SplitModeName::OddEven, None) => Ok(SplitMode::OddEven),
            (SplitModeName::OddEven, Some(_)) => Err(Error::Config(
                "split.seed is only used with the random mode".into(),
            )),
            (SplitModeName::Random, Some(seed)) => Ok(SplitMode::Random { seed }),
            (SplitModeName::Random, None) => Err(Error::Config(
                "split.mode = random requires split.seed".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullConfig {
    pub n_replicates: usize,
    pub strategy: SamplingStrategy,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PermutationConfig {
    pub n_permutations: usize,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self { n_permutations: 0 }
    }
}

/// Emission controls. The JSON report always carries the full result;
/// these gate the singleton-excluded statistics, the optional SVG, and
/// which diagnostics the console summary prints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Also compute singleton-excluded variants of every statistic.
    pub exclude_singletons: bool,
    /// Print the per-feature maximum variants in the console summary.
    pub d_max: bool,
    /// Print observed and null modularity diagnostics in the console
    /// summary.
    pub null_modularity: bool,
    /// Write a histogram of null samples with the observed value marked.
    pub histogram_svg: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            exclude_singletons: true,
            d_max: true,
            null_modularity: true,
            histogram_svg: false,
        }
    }
}

/// The `test` / `mapper` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV input: header row required, first column holds row ids.
    pub input: PathBuf,
    pub metric: Metric,
    pub filters: Vec<FilterConfig>,
    pub mapper: MapperConfig,
    pub split: SplitConfig,
    pub null: NullConfig,
    #[serde(default)]
    pub permutation: PermutationConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        if config.filters.is_empty() {
            return Err(Error::Config("at least one filter is required".into()));
        }
        Ok(config)
    }

    /// Resolves external-filter column references against a CSV table:
    /// referenced columns become inline filter values and are dropped from
    /// the feature matrix. Returns the feature matrix and the library
    /// pipeline config, fully validated.
    pub fn resolve(&self, table: &CsvTable) -> Result<(DataMatrix, PipelineConfig)> {
        let mut external_columns = Vec::new();
        for f in &self.filters {
            if let FilterConfig::External { column, .. } = f {
                if !table.feature_names.contains(column) {
                    return Err(Error::Config(format!(
                        "external filter references column {column:?}, which is not in the input"
                    )));
                }
                external_columns.push(column.clone());
            }
        }
        let x = table.feature_matrix(&external_columns)?;

        let filters = self
            .filters
            .iter()
            .map(|f| match f {
                FilterConfig::LinfCentrality => Ok(FilterSpec::LinfCentrality),
                FilterConfig::Pcoa { axis } => Ok(FilterSpec::Pcoa { axis: *axis }),
                FilterConfig::KnnGeodesicMds { k, axis } => Ok(FilterSpec::KnnGeodesicMds {
                    k: *k,
                    axis: *axis,
                }),
                FilterConfig::External { column, jitter_sd } => Ok(FilterSpec::External {
                    values: table.column(column)?,
                    jitter_sd: *jitter_sd,
                }),
            })
            .collect::<Result<Vec<_>>>()?;

        let pipeline = PipelineConfig {
            metric: self.metric,
            filters,
            mapper: self.mapper.clone(),
            split: self.split.to_mode()?,
            strategy: self.null.strategy,
            n_replicates: self.null.n_replicates,
            n_permutations: self.permutation.n_permutations,
            base_seed: self.null.base_seed,
            report_excl_singletons: self.report.exclude_singletons,
        };
        pipeline.validate(x.n(), x.p())?;
        Ok((x, pipeline))
    }
}

/// One scenario row of a simulation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Label for the output table; defaults to a rendering of the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub dgp: DgpSpec,
    pub r: usize,
    pub b: usize,
}

/// The `simulate` config file. Scenario i runs on a seed derived from
/// (base_seed, i), so rows are independent of each other and of order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub base_seed: u64,
    pub scenarios: Vec<ScenarioSpec>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ScenarioConfig = serde_json::from_str(&text)?;
        if config.scenarios.is_empty() {
            return Err(Error::Config("at least one scenario is required".into()));
        }
        for (i, s) in config.scenarios.iter().enumerate() {
            if s.r == 0 || s.b == 0 {
                return Err(Error::Config(format!(
                    "scenario {i}: r and b must be at least 1"
                )));
            }
            s.dgp
                .validate()
                .map_err(|e| Error::Config(format!("scenario {i}: {e}")))?;
        }
        Ok(config)
    }
}
