//! Tests whether the community structure of a Mapper graph reflects more
//! than the covariance of the underlying data.
//!
//! The pipeline builds a Mapper graph from a point cloud (filter functions,
//! an overlapping cover, per-cell single-linkage clustering with a
//! first-gap cut), partitions it with Louvain modularity, and summarizes
//! how far apart the communities sit in feature space with the
//! dissociation statistic `D`. The null model redraws datasets from a
//! Gaussian with the sample covariance, reruns the identical pipeline on
//! each draw, and standardizes the observed `D` against that null; a
//! label-permutation baseline is available for contrast.
//!
//! Entry points:
//! - [`nulltest::run_structured_null_test`] runs the full test on a
//!   [`data::DataMatrix`] under a [`nulltest::PipelineConfig`].
//! - [`simulation::run_scenario`] measures rejection rates over simulated
//!   datasets from the families in [`simulation::DgpKind`].
//! - [`theory`] holds numerical checks of the statistic's population
//!   lower bound and the permutation baseline's decay rate.
//! - [`config`], [`csvio`], and [`report`] back the `covmapper` binary.

pub mod community;
pub mod config;
pub mod covariance;
pub mod csvio;
pub mod data;
pub mod distance;
pub mod error;
pub mod filters;
pub mod mapper;
pub mod mds;
pub mod nulltest;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod teststat;
pub mod theory;

pub use community::{assign_points, louvain, modularity, CommunityResult};
pub use covariance::{
    ridge_regularize, sample_covariance, sample_gaussian, CovModel, SamplingStrategy,
};
pub use data::DataMatrix;
pub use distance::{distance_matrix, linf_centrality, DistMatrix, Metric};
pub use error::{Error, Result};
pub use filters::{compute_filters, FilterSpec};
pub use mapper::{build_cover, build_mapper, CoverMode, MapperConfig, MapperGraph};
pub use nulltest::{run_structured_null_test, NullTestResult, PipelineConfig};
pub use simulation::{generate_dgp, run_scenario, DgpKind, DgpSpec, ScenarioResult};
pub use teststat::{
    dissociation, make_split, mc_pvalue, permutation_null, zscore, DissociationResult,
    FeatureSplit, PermutationNull, SplitMode,
};
