//! Entropy, mutual information, PCA binning, compression and silhouette.

mod compress;
mod discrete;
mod estimate;
mod pca;
mod report;
mod silhouette;

use thiserror::Error;

pub use compress::{compression_ratio, pack_ternary, serialize_values, CODEC};
pub use discrete::{conditional_entropy, conditional_mi, discrete_entropy, mutual_information, DiscreteJoint};
pub use estimate::{
    bin_view, nonredundancy_check, normalized_codes_cmi, quantile_bin, view_mi, view_pair_cmi, BinnedView,
    NonRedundancy,
};
pub use pca::{pca_fit, pca_project, pca_project_reduced, Pca};
pub use report::{redundancy_report, RedundancyReport, ReportMetadata, ReportOptions, SILHOUETTE_MAX_ROWS};
pub use silhouette::silhouette;

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("distribution has no mass")]
    EmptyDistribution,
    #[error("invalid joint table: {0}")]
    InvalidJoint(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("k = {k} outside [1, {max}]")]
    InvalidK { k: usize, max: usize },
    #[error("only {available} of {requested} principal directions carry variance")]
    DegenerateRank { requested: usize, available: usize },
    #[error("bins must be ≥ 2, got {0}")]
    InvalidBins(usize),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("silhouette needs at least two classes")]
    SingleClass,
    #[error("no views to report on")]
    NoViews,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[cfg(test)]
mod tests;
