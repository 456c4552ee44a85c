//! Worked examples for few-shot prompts, built from validation queries.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::Query;
use crate::providers::prompts::{description_text, ChildDemo, ParentDemo};
use crate::providers::ProviderError;
use crate::retrieval::{top_k_edges, EmbeddingProvider};
use crate::taxonomy::{ConceptId, Taxonomy};

pub const DEMO_COUNT: usize = 4;
pub const DEMO_CONTEXT: usize = 5;
const MAX_DEMO_CANDIDATES: usize = 30;

/// Picks `count` scoreable queries with a seeded shuffle and renders their
/// gold answers against `seed_taxonomy`.
pub fn build_demos<P: EmbeddingProvider + ?Sized>(
    seed_taxonomy: &Taxonomy,
    queries: &[Query],
    embedder: &P,
    count: usize,
    seed: u64,
) -> Result<(Vec<ParentDemo>, Vec<ChildDemo>), ProviderError> {
    let mut pool: Vec<&Query> = queries.iter().filter(|q| q.is_scoreable()).collect();
    pool.sort_by(|a, b| a.concept.id.cmp(&b.concept.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.truncate(count);

    let mut parents_out = Vec::new();
    let mut children_out = Vec::new();
    for q in pool {
        let c = &q.concept;
        let context = top_k_edges(seed_taxonomy, c, DEMO_CONTEXT, embedder)?;
        let parents: BTreeSet<ConceptId> = q.gold.iter().map(|p| p.parent.clone()).filter(|p| !p.is_pseudo()).collect();
        let children: BTreeSet<ConceptId> = q.gold.iter().map(|p| p.child.clone()).filter(|p| !p.is_pseudo()).collect();
        let parent_labels: Vec<String> = parents.iter().map(|p| seed_taxonomy.label(p).to_string()).collect();
        let child_labels: Vec<String> = children.iter().map(|p| seed_taxonomy.label(p).to_string()).collect();
        let description = description_text(c);
        let interpretation = if parent_labels.is_empty() {
            format!("\"{}\" is a top-level concept.", c.label)
        } else {
            format!("\"{}\" is a kind of {}.", c.label, parent_labels.join(" and "))
        };
        let parent_reasoning = if parent_labels.is_empty() {
            format!("find the parents of \"{}\". No concept in the taxonomy is more general than it.", c.label)
        } else {
            format!(
                "find the parents of \"{}\". Given its description, \"{}\" is a type of {}.",
                c.label,
                c.label,
                parent_labels.iter().map(|l| format!("\"{l}\"")).collect::<Vec<_>>().join(" and ")
            )
        };
        parents_out.push(ParentDemo {
            context: context.lines.clone(),
            child: c.label.clone(),
            description: description.clone(),
            reasoning: parent_reasoning,
            interpretation: interpretation.clone(),
            parents: parent_labels,
        });

        let mut candidates: Vec<String> = Vec::new();
        for p in &parents {
            for ch in seed_taxonomy.children(p) {
                let l = seed_taxonomy.label(&ch).to_string();
                if !candidates.contains(&l) && candidates.len() < MAX_DEMO_CANDIDATES {
                    candidates.push(l);
                }
            }
        }
        for l in &child_labels {
            if !candidates.contains(l) {
                candidates.push(l.clone());
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let child_reasoning = if child_labels.is_empty() {
            format!("identify the children of \"{}\". None of the candidates is a type of \"{}\".", c.label, c.label)
        } else {
            format!("identify the children of \"{}\". The selected candidates are types of \"{}\".", c.label, c.label)
        };
        children_out.push(ChildDemo {
            context: context.annotated(seed_taxonomy).lines,
            candidates,
            parent: c.label.clone(),
            description,
            interpretation,
            reasoning: child_reasoning,
            leaf: child_labels.is_empty(),
            children: child_labels,
        });
    }
    Ok((parents_out, children_out))
}
