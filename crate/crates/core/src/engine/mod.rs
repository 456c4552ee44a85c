//! Completion of a seed taxonomy and bottom-up generation from concepts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{LlmBackend, NliBackend, ProviderError};
use crate::retrieval::EmbeddingProvider;
use crate::taxonomy::TaxonomyError;

pub mod assertions;
pub mod complete;
pub mod fewshot;
pub mod generate;

pub use assertions::{AssertionViolation, Rule};
pub use fewshot::build_demos;
pub use complete::{complete_all, complete_one, CompletionOutcome, Incident, RunContext, Stage};
pub use generate::{generate, select_insertion_order, GenerationConfig, GenerationOutcome, PendingQueue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Completion,
    Generation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub mode: Mode,
    pub k_context: usize,
    pub max_retries: usize,
    pub few_shot: bool,
    pub nli_enabled: bool,
    pub backtracking_enabled: bool,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            mode: Mode::Completion,
            k_context: crate::retrieval::DEFAULT_K,
            max_retries: 3,
            few_shot: false,
            nli_enabled: true,
            backtracking_enabled: true,
        }
    }
}

/// Backends used by the engine. `nli` is the inference-time model; the
/// metric model is configured separately.
#[derive(Clone, Copy)]
pub struct Providers<'a> {
    pub llm: &'a dyn LlmBackend,
    pub nli: &'a dyn NliBackend,
    pub embedder: &'a dyn EmbeddingProvider,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("no known concepts to generate from")]
    NoConcepts,
}
