//! Bottom-up taxonomy generation from a set of known concepts.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::complete::{complete_one, Incident, RunContext};
use super::{CompletionConfig, EngineError, Mode, Providers};
use crate::providers::Describer;
use crate::taxonomy::{Concept, ConceptId, PlacementOutcome, Taxonomy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub completion: CompletionConfig,
    /// Generated concepts allowed per known concept before truncation.
    pub cap_factor: usize,
    /// Ask for a taxonomy description first and show it in parent prompts.
    pub taxonomy_description: bool,
    /// Describe known concepts that arrive without a description.
    pub describe_missing: bool,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            completion: CompletionConfig { mode: Mode::Generation, ..CompletionConfig::default() },
            cap_factor: 4,
            taxonomy_description: true,
            describe_missing: true,
            seed: 0,
        }
    }
}

/// FIFO queue in which every concept is enqueued at most once per run.
#[derive(Debug, Clone, Default)]
pub struct PendingQueue {
    queue: VecDeque<ConceptId>,
    ever: BTreeSet<ConceptId>,
}

impl PendingQueue {
    /// Returns false when the concept was queued before.
    pub fn push(&mut self, id: ConceptId) -> bool {
        if self.ever.insert(id.clone()) {
            self.queue.push_back(id);
            true
        } else {
            false
        }
    }

    pub fn pop(&mut self) -> Option<ConceptId> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn pending(&self) -> BTreeSet<ConceptId> {
        self.queue.iter().cloned().collect()
    }
}

/// Next concept to insert: strictly first-in first-out.
pub fn select_insertion_order(pending: &mut PendingQueue) -> Option<ConceptId> {
    pending.pop()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub taxonomy: Taxonomy,
    pub taxonomy_description: Option<String>,
    /// Order in which concepts were processed.
    pub order: Vec<ConceptId>,
    pub inserted_count: usize,
    pub generated_count: usize,
    pub rejected_cycles: usize,
    pub unplaceable: Vec<ConceptId>,
    /// The generation cap was hit and further invented parents were dropped.
    pub truncated: bool,
    pub incidents: Vec<Incident>,
    pub llm_calls: usize,
}

/// Builds a taxonomy from `known`, inventing parents as needed. Concepts
/// are processed in input order, generated ones after everything queued
/// before them. Sequential by construction: each insertion changes what
/// later queries retrieve.
pub fn generate(known: &[Concept], config: &GenerationConfig, providers: &Providers<'_>) -> Result<GenerationOutcome, EngineError> {
    if known.is_empty() {
        return Err(EngineError::NoConcepts);
    }
    let describer = Describer::new(providers.llm);
    let mut taxonomy = Taxonomy::new();
    let mut pending = PendingQueue::default();
    for c in known {
        let mut c = c.clone();
        if c.description.is_none() && config.describe_missing {
            let d = describer.describe(&c.label)?;
            c = c.with_description(d);
        }
        let id = c.id.clone();
        taxonomy.add_concept(c);
        pending.push(id);
    }
    let known_count = pending.len();
    let cap = config.cap_factor.saturating_mul(known_count);

    let taxonomy_description = if config.taxonomy_description {
        let labels: Vec<String> = taxonomy.concepts().map(|c| c.label.clone()).collect();
        Some(describer.taxonomy_description(&labels, config.seed)?)
    } else {
        None
    };
    let completion = CompletionConfig { mode: Mode::Generation, ..config.completion.clone() };

    let mut out = GenerationOutcome {
        taxonomy: Taxonomy::new(),
        taxonomy_description: taxonomy_description.clone(),
        order: Vec::new(),
        inserted_count: 0,
        generated_count: 0,
        rejected_cycles: 0,
        unplaceable: Vec::new(),
        truncated: false,
        incidents: Vec::new(),
        llm_calls: usize::from(config.taxonomy_description),
    };

    while let Some(qid) = select_insertion_order(&mut pending) {
        let query = taxonomy.concept(&qid).cloned().ok_or_else(|| crate::TaxonomyError::UnknownConcept(qid.clone()))?;
        let run = RunContext {
            taxonomy_description: taxonomy_description.clone(),
            excluded_candidates: pending.pending(),
            ..RunContext::default()
        };
        let result = complete_one(&query, &taxonomy, &completion, providers, &run)?;
        out.order.push(qid.clone());
        out.llm_calls += result.llm_calls;
        out.incidents.extend(result.incidents.iter().cloned());
        if result.unplaceable {
            out.unplaceable.push(qid.clone());
        }

        let mut dropped = BTreeSet::new();
        for label in &result.invented {
            let id = ConceptId::from_label(label);
            if taxonomy.contains(&id) {
                continue;
            }
            if out.generated_count >= cap {
                tracing::warn!(concept = %id, cap, "generation cap reached, dropping invented parent");
                out.truncated = true;
                dropped.insert(id);
                continue;
            }
            let description = describer.describe(label)?;
            taxonomy.add_concept(Concept::new(label)?.with_description(description));
            pending.push(id);
            out.generated_count += 1;
        }

        for placement in result.placements.iter().filter(|p| !dropped.contains(&p.parent)) {
            if let PlacementOutcome::RejectedCycle = taxonomy.apply_placement(placement)? {
                out.rejected_cycles += 1;
                out.incidents.push(Incident {
                    query: qid.clone(),
                    stage: super::Stage::Parents,
                    attempt: 0,
                    kind: "cycle-rejected".into(),
                    detail: placement.to_string(),
                });
            }
        }
        out.inserted_count += 1;
    }
    out.llm_calls += describer.cached();
    out.taxonomy = taxonomy;
    Ok(out)
}
