//! A backend that answers prompts from a hidden gold taxonomy.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LlmBackend, ProviderError};
use crate::taxonomy::{ConceptId, Taxonomy};

/// Answers parent prompts with the query's nearest visible gold ancestors
/// and child prompts with the candidates that are its nearest visible gold
/// descendants. With no visible set every gold concept counts as visible,
/// so answers are the direct gold parents and children.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    gold: Taxonomy,
    visible: Option<BTreeSet<ConceptId>>,
    noise: f64,
    seed: u64,
}

fn last_field<'a>(block: &'a str, name: &str) -> Option<&'a str> {
    let prefix = format!("{name}:");
    block.lines().rev().find_map(|l| l.strip_prefix(prefix.as_str())).map(str::trim)
}

impl OracleBackend {
    pub fn new(gold: Taxonomy, visible: Option<BTreeSet<ConceptId>>) -> Self {
        OracleBackend { gold, visible, noise: 0.0, seed: 0 }
    }

    /// Replaces each answered parent by a random visible concept with
    /// probability `rate`, deterministically per query.
    pub fn with_noise(mut self, rate: f64, seed: u64) -> Self {
        self.noise = rate.clamp(0.0, 1.0);
        self.seed = seed;
        self
    }

    fn is_visible(&self, id: &ConceptId) -> bool {
        self.visible.as_ref().is_none_or(|v| v.contains(id))
    }

    fn nearest(&self, start: &ConceptId, up: bool) -> BTreeSet<ConceptId> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let step = |id: &ConceptId| if up { self.gold.parents(id) } else { self.gold.children(id) };
        let mut queue: VecDeque<ConceptId> = step(start).into();
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if self.is_visible(&n) {
                out.insert(n);
            } else {
                queue.extend(step(&n));
            }
        }
        out
    }

    fn labels(&self, ids: &BTreeSet<ConceptId>) -> Vec<String> {
        ids.iter().map(|i| self.gold.label(i).to_string()).collect()
    }

    fn parents_answer(&self, child: &str) -> String {
        let id = ConceptId::from_label(child);
        let mut parents = self.labels(&self.nearest(&id, true));
        if self.noise > 0.0 && !parents.is_empty() {
            let pool: Vec<&ConceptId> =
                self.gold.concept_ids().filter(|c| !c.is_pseudo() && **c != id && self.is_visible(c)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ crate::retrieval::stable_hash(id.as_str()));
            for p in parents.iter_mut() {
                if rng.gen_bool(self.noise) && !pool.is_empty() {
                    *p = self.gold.label(pool[rng.gen_range(0..pool.len())]).to_string();
                }
            }
            parents.dedup();
        }
        let list = if parents.is_empty() { "None".to_string() } else { parents.join(", ") };
        format!(
            "Reasoning: Let's think step by step in order to find the parents of \"{child}\".\n\nInterpretation: {child} as placed in the gold taxonomy.\n\nParents: {list}"
        )
    }

    fn children_answer(&self, parent: &str, candidates: &str) -> String {
        let gold: BTreeSet<String> =
            self.nearest(&ConceptId::from_label(parent), false).iter().map(|c| c.as_str().to_string()).collect();
        let chosen: Vec<&str> = candidates
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty() && gold.contains(ConceptId::from_label(c).as_str()))
            .collect();
        let leaf = if chosen.is_empty() { "Yes" } else { "No" };
        format!(
            "Reasoning: Let's think step by step in order to select the children of \"{parent}\".\n\nLeaf: {leaf}\n\nChildren: {}",
            chosen.join(", ")
        )
    }

    fn description_answer(&self, label: &str) -> String {
        let id = ConceptId::from_label(label);
        let text = match self.gold.concept(&id).and_then(|c| c.description.clone()) {
            Some(d) => d,
            None => match self.gold.parents(&id).first() {
                Some(p) => format!("{label} is a kind of {}.", self.gold.label(p)),
                None => format!("{label} is a general concept."),
            },
        };
        format!("Reasoning: Let's think step by step in order to describe {label}.\n\nDescription: {text}")
    }
}

impl LlmBackend for OracleBackend {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let block = prompt.rsplit("\n---\n").next().unwrap_or(prompt);
        if let Some(child) = last_field(block, "Child") {
            return Ok(self.parents_answer(child));
        }
        if let Some(parent) = last_field(block, "Parent") {
            let candidates = last_field(block, "Candidates").unwrap_or("");
            return Ok(self.children_answer(parent, candidates));
        }
        if let Some(label) = last_field(block, "Concept") {
            return Ok(self.description_answer(label));
        }
        if last_field(block, "Concepts").is_some() {
            return Ok(format!(
                "Reasoning: Let's think step by step in order to summarize.\n\nTaxonomy Description: A taxonomy of {} concepts.",
                self.gold.node_count()
            ));
        }
        Err(ProviderError::InvalidResponse("oracle cannot recognize the prompt".into()))
    }

    fn name(&self) -> String {
        format!("oracle:noise={}", self.noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{parse_child_output, parse_parent_output};
    use crate::taxonomy::Concept;

    fn chain() -> Taxonomy {
        let mut t = Taxonomy::new();
        for l in ["food", "sweet", "sugar", "candy"] {
            t.add_concept(Concept::new(l).unwrap());
        }
        let id = ConceptId::from_label;
        t.add_edge(&id("food"), &id("sweet")).unwrap();
        t.add_edge(&id("sweet"), &id("sugar")).unwrap();
        t.add_edge(&id("sweet"), &id("candy")).unwrap();
        t
    }

    #[test]
    fn answers_skip_hidden_concepts() {
        let visible: BTreeSet<_> = ["food", "sugar", "candy"].iter().map(|l| ConceptId::from_label(l)).collect();
        let o = OracleBackend::new(chain(), Some(visible));
        let p = parse_parent_output(&o.complete("x\n---\n\nChild: sugar\n\nReasoning: Let's").unwrap()).unwrap();
        assert_eq!(p.parents, vec!["food"]);
        let c = parse_child_output(&o.complete("\n---\n\nCandidates: sugar, candy, food\n\nParent: sweet\n\n").unwrap()).unwrap();
        assert_eq!(c.children, vec!["sugar", "candy"]);
        let r = parse_parent_output(&o.complete("\n---\nChild: food").unwrap()).unwrap();
        assert!(r.proposes_root);
    }

    #[test]
    fn noise_is_deterministic() {
        let o = OracleBackend::new(chain(), None).with_noise(1.0, 7);
        let a = o.complete("\n---\nChild: sugar").unwrap();
        assert_eq!(a, o.complete("\n---\nChild: sugar").unwrap());
        assert!(!a.ends_with("Parents: sweet"));
    }
}
