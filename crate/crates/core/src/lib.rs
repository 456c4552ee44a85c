//! Taxonomy completion and generation driven by a language model, with
//! natural-language-inference validation of proposed relations and gold and
//! reference-free taxonomy metrics.

pub mod datasets;
pub mod engine;
pub mod metrics;
pub mod par;
pub mod providers;
pub mod retrieval;
pub mod taxonomy;

pub use taxonomy::{CanonicalPaths, Concept, ConceptId, Edge, Placement, PlacementOutcome, Taxonomy, TaxonomyError, TaxonomyStats};
