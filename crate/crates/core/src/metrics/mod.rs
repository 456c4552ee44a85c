//! Gold-standard and reference-free taxonomy metrics and a paired
//! significance test.

use thiserror::Error;

use crate::providers::ProviderError;

pub mod gold;
pub mod reference_free;
pub mod report;
pub mod significance;

pub use gold::{compare_taxonomies, drop_cycles, score_predictions, wps, QueryScore, ScoreReport, SliceScores};
pub use reference_free::{csc, nliv, nliv_both, spearman, CscResult, NlivMode, NlivResult};
pub use report::MetricReport;
pub use significance::paired_randomization_test;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("NLI scoring aborted after {scored} of {total} edges: {source}")]
    NlivAborted { scored: usize, total: usize, source: ProviderError },
    #[error(transparent)]
    Taxonomy(#[from] crate::TaxonomyError),
}
