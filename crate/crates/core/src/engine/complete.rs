//! Placement of a single query: retrieve context, propose parents, select
//! children, verify both with NLI, emit triplets.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::assertions::{check_child_assertions, check_parent_assertions, instructions, AssertionViolation};
use super::{CompletionConfig, EngineError, Mode, Providers};
use crate::providers::nli::{verify_child, verify_parent};
use crate::providers::prompts::{ChildDemo, ChildFeedback, ParentDemo, ParentFeedback};
use crate::providers::{parse_child_output, parse_parent_output, render_child_prompt, render_parent_prompt};
use crate::providers::{ChildSelection, ParentProposal, PromptMode};
use crate::retrieval::{top_k_edges, EdgeContext};
use crate::taxonomy::{Concept, ConceptId, Placement, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Parents,
    Children,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Parents => "parents",
            Stage::Children => "children",
        }
    }
}

/// A logged event: a violated rule, a parse failure or a dropped label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incident {
    pub query: ConceptId,
    pub stage: Stage,
    pub attempt: usize,
    pub kind: String,
    pub detail: String,
}

/// Shared per-run inputs besides the taxonomy itself.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub taxonomy_description: Option<String>,
    pub parent_demos: Vec<ParentDemo>,
    pub child_demos: Vec<ChildDemo>,
    /// Concepts that may not be offered as candidate children, e.g. known
    /// concepts not yet placed during generation.
    pub excluded_candidates: BTreeSet<ConceptId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionOutcome {
    pub query: ConceptId,
    pub placements: BTreeSet<Placement>,
    pub violations: Vec<(Stage, AssertionViolation)>,
    pub incidents: Vec<Incident>,
    /// No parse-valid parent answer, or every proposed parent was dropped.
    pub unplaceable: bool,
    /// Parent labels absent from the taxonomy (generation mode only).
    pub invented: Vec<String>,
    pub llm_calls: usize,
}

impl CompletionOutcome {
    pub fn new(query: ConceptId) -> Self {
        CompletionOutcome {
            query,
            placements: BTreeSet::new(),
            violations: Vec::new(),
            incidents: Vec::new(),
            unplaceable: false,
            invented: Vec::new(),
            llm_calls: 0,
        }
    }

    fn log(&mut self, stage: Stage, attempt: usize, kind: &str, detail: String) {
        self.incidents.push(Incident { query: self.query.clone(), stage, attempt, kind: kind.to_string(), detail });
    }

    fn violation(&mut self, stage: Stage, v: AssertionViolation) {
        self.log(stage, v.attempt, v.rule.as_str(), v.detail.clone());
        self.violations.push((stage, v));
    }
}

struct Checked<T> {
    answer: T,
    valid: Vec<String>,
    verified: BTreeMap<String, bool>,
}

impl<T> Checked<T> {
    fn survivors(&self) -> Vec<String> {
        self.valid.iter().filter(|l| self.verified.get(*l) != Some(&false)).cloned().collect()
    }
}

fn attempts(config: &CompletionConfig) -> usize {
    if config.backtracking_enabled {
        config.max_retries + 1
    } else {
        1
    }
}

fn propose_parents(
    query: &Concept,
    taxonomy: &Taxonomy,
    context: &EdgeContext,
    config: &CompletionConfig,
    providers: &Providers<'_>,
    run: &RunContext,
    out: &mut CompletionOutcome,
) -> Result<Option<Checked<ParentProposal>>, EngineError> {
    let mode = match config.mode {
        Mode::Completion => PromptMode::Completion,
        Mode::Generation => PromptMode::Generation { taxonomy_description: run.taxonomy_description.as_deref() },
    };
    let demos: &[ParentDemo] = if config.few_shot { &run.parent_demos } else { &[] };
    let mut feedback: Option<ParentFeedback> = None;
    let mut best = None;
    for attempt in 0..attempts(config) {
        let prompt = render_parent_prompt(context, query, mode, feedback.as_ref(), demos);
        let raw = providers.llm.complete(&prompt)?;
        out.llm_calls += 1;
        let proposal = match parse_parent_output(&raw) {
            Ok(p) => p,
            Err(e) => {
                out.log(Stage::Parents, attempt, "parse-error", e.to_string());
                feedback = Some(ParentFeedback {
                    reasoning: raw.trim().to_string(),
                    instructions: format!("The answer must follow the described format: {e}."),
                    ..Default::default()
                });
                continue;
            }
        };
        let mut verified = BTreeMap::new();
        if config.nli_enabled {
            let labels = super::assertions::check_parent_labels(&proposal, query, taxonomy, config.mode).valid;
            for label in labels {
                let ok = verify_parent(providers.nli, query, &label)?;
                verified.insert(label, ok);
            }
        }
        let (check, violations) =
            check_parent_assertions(&proposal, query, taxonomy, config.mode, &verified, attempt);
        let done = violations.is_empty();
        if !done {
            feedback = Some(ParentFeedback {
                reasoning: proposal.reasoning.clone(),
                interpretation: proposal.interpretation.clone(),
                parents: proposal.parents_field.clone(),
                instructions: instructions(&violations),
            });
        }
        violations.into_iter().for_each(|v| out.violation(Stage::Parents, v));
        best = Some(Checked { answer: proposal, valid: check.valid, verified });
        if done {
            break;
        }
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn select_children(
    query: &Concept,
    taxonomy: &Taxonomy,
    context: &EdgeContext,
    candidates: &[ConceptId],
    interpretation: &str,
    config: &CompletionConfig,
    providers: &Providers<'_>,
    run: &RunContext,
    out: &mut CompletionOutcome,
) -> Result<Option<Checked<ChildSelection>>, EngineError> {
    let labels: Vec<String> = candidates.iter().map(|c| taxonomy.label(c).to_string()).collect();
    let candidate_set: BTreeSet<ConceptId> = candidates.iter().cloned().collect();
    let demos: &[ChildDemo] = if config.few_shot { &run.child_demos } else { &[] };
    let mut feedback: Option<ChildFeedback> = None;
    let mut best = None;
    for attempt in 0..attempts(config) {
        let prompt = render_child_prompt(context, &labels, query, interpretation, None, feedback.as_ref(), demos);
        let raw = providers.llm.complete(&prompt)?;
        out.llm_calls += 1;
        let selection = match parse_child_output(&raw) {
            Ok(s) => s,
            Err(e) => {
                out.log(Stage::Children, attempt, "parse-error", e.to_string());
                feedback = Some(ChildFeedback {
                    reasoning: raw.trim().to_string(),
                    instructions: format!("The answer must follow the described format: {e}."),
                    ..Default::default()
                });
                continue;
            }
        };
        let mut verified = BTreeMap::new();
        if config.nli_enabled {
            let valid = super::assertions::check_child_labels(&selection, query, taxonomy, &candidate_set).valid;
            for label in valid {
                let id = ConceptId::from_label(&label);
                let child = taxonomy.concept(&id).cloned().ok_or_else(|| crate::TaxonomyError::UnknownConcept(id.clone()))?;
                let ok = verify_child(providers.nli, query, &child)?;
                verified.insert(label, ok);
            }
        }
        let (check, violations) =
            check_child_assertions(&selection, query, taxonomy, &candidate_set, &verified, attempt);
        let done = violations.is_empty();
        if !done {
            feedback = Some(ChildFeedback {
                reasoning: selection.reasoning.clone(),
                leaf: selection.leaf_field.clone(),
                children: selection.children_field.clone(),
                instructions: instructions(&violations),
            });
        }
        violations.into_iter().for_each(|v| out.violation(Stage::Children, v));
        best = Some(Checked { answer: selection, valid: check.valid, verified });
        if done {
            break;
        }
    }
    Ok(best)
}

/// Places one query against `taxonomy`, which is only read. Provider
/// failures are hard errors; invalid model answers never are.
pub fn complete_one(
    query: &Concept,
    taxonomy: &Taxonomy,
    config: &CompletionConfig,
    providers: &Providers<'_>,
    run: &RunContext,
) -> Result<CompletionOutcome, EngineError> {
    let mut out = CompletionOutcome::new(query.id.clone());
    let context = top_k_edges(taxonomy, query, config.k_context, providers.embedder)?;

    let Some(parents) = propose_parents(query, taxonomy, &context, config, providers, run, &mut out)? else {
        out.unplaceable = true;
        return Ok(out);
    };
    let survivors = parents.survivors();
    for (label, ok) in &parents.verified {
        if !ok {
            out.log(Stage::Parents, 0, "nli-rejected", label.clone());
        }
    }
    let mut existing = BTreeSet::new();
    for label in &survivors {
        let id = ConceptId::from_label(label);
        if taxonomy.contains(&id) {
            existing.insert(id);
        } else if !out.invented.iter().any(|l| ConceptId::from_label(l) == id) {
            out.invented.push(label.clone());
        }
    }
    let root = parents.answer.proposes_root;
    if existing.is_empty() && out.invented.is_empty() && !root {
        out.unplaceable = true;
        return Ok(out);
    }
    let mut existing = if existing.is_empty() { existing } else { taxonomy.most_specific(&existing)? };
    if root {
        existing.insert(taxonomy.pseudo_root());
    }

    let mut candidates: Vec<ConceptId> = Vec::new();
    for p in &existing {
        for c in taxonomy.children(p) {
            if c != query.id && !c.is_pseudo() && !run.excluded_candidates.contains(&c) && !candidates.contains(&c) {
                candidates.push(c);
            }
        }
    }

    let mut chosen: BTreeSet<ConceptId> = BTreeSet::new();
    if !candidates.is_empty() {
        let annotated = context.annotated(taxonomy);
        let interpretation = parents.answer.interpretation.clone();
        let selection = select_children(
            query,
            taxonomy,
            &annotated,
            &candidates,
            &interpretation,
            config,
            providers,
            run,
            &mut out,
        )?;
        if let Some(sel) = selection {
            for (label, ok) in &sel.verified {
                if !ok {
                    out.log(Stage::Children, 0, "nli-rejected", label.clone());
                }
            }
            chosen = sel.survivors().iter().map(|l| ConceptId::from_label(l)).collect();
        }
    }

    let leaf = taxonomy.pseudo_leaf();
    for p in &existing {
        let kids: Vec<&ConceptId> = chosen.iter().filter(|c| taxonomy.children(p).contains(c)).collect();
        if kids.is_empty() {
            out.placements.insert(Placement::new(p.clone(), query.id.clone(), leaf.clone())?);
        }
        for c in kids {
            out.placements.insert(Placement::new(p.clone(), query.id.clone(), c.clone())?);
        }
    }
    for label in &out.invented {
        let p = ConceptId::from_label(label);
        out.placements.insert(Placement::new(p, query.id.clone(), leaf.clone())?);
    }
    Ok(out)
}

/// Completes independent queries against a frozen taxonomy, in parallel
/// when the `parallel` feature is on. Results keep query order; the first
/// hard error in that order is returned.
pub fn complete_all(
    queries: &[Concept],
    taxonomy: &Taxonomy,
    config: &CompletionConfig,
    providers: &Providers<'_>,
    run: &RunContext,
) -> Result<Vec<CompletionOutcome>, EngineError> {
    crate::par::map(queries, |q| complete_one(q, taxonomy, config, providers, run)).into_iter().collect()
}
