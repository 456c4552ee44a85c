//! Placement precision, recall, F1 and Wu-Palmer similarity against gold
//! positions.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::datasets::PlacementMap;
use crate::taxonomy::{CanonicalPaths, ConceptId, Placement, Taxonomy, TaxonomyError};

/// Wu-Palmer similarity of two concepts on their canonical paths.
pub fn wps(taxonomy: &Taxonomy, a: &ConceptId, b: &ConceptId) -> Result<f64, TaxonomyError> {
    CanonicalPaths::new(taxonomy).wps(a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryScore {
    pub query: ConceptId,
    /// Best similarity between a predicted and a gold parent; 0 without
    /// usable predictions.
    pub wps: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Parent-level matches: predicted triplets whose parent is a gold
    /// parent, and gold triplets whose parent was predicted.
    pub parent_tp_pred: usize,
    pub parent_tp_gold: usize,
    pub predicted: usize,
    pub gold: usize,
    pub is_leaf_gold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SliceScores {
    pub queries: usize,
    pub wps: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl SliceScores {
    fn from(scores: &[&QueryScore]) -> Self {
        let tp: usize = scores.iter().map(|s| s.tp).sum();
        let fp: usize = scores.iter().map(|s| s.fp).sum();
        let fn_: usize = scores.iter().map(|s| s.fn_).sum();
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let wps = if scores.is_empty() { 0.0 } else { scores.iter().map(|s| s.wps).sum::<f64>() / scores.len() as f64 };
        SliceScores { queries: scores.len(), wps, precision, recall, f1: f1(precision, recall), tp, fp, fn_ }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub total: SliceScores,
    pub leaf: SliceScores,
    pub non_leaf: SliceScores,
    pub position_f1: f64,
    pub parent_precision: f64,
    pub parent_recall: f64,
    pub parent_f1: f64,
    pub per_query: Vec<QueryScore>,
    /// Gold queries without any gold position; not scored.
    pub unscoreable: Vec<ConceptId>,
    pub dropped_cycles: usize,
}

/// Removes predictions that would close a cycle in `taxonomy`, i.e. whose
/// child already reaches their parent. Returns the number removed.
pub fn drop_cycles(predicted: &mut PlacementMap, taxonomy: &Taxonomy) -> usize {
    let mut dropped = 0;
    for set in predicted.values_mut() {
        let before = set.len();
        set.retain(|p| {
            let cyclic = !p.parent.is_pseudo()
                && !p.child.is_pseudo()
                && taxonomy.contains(&p.parent)
                && taxonomy.contains(&p.child)
                && (p.parent == p.child || taxonomy.reaches(&p.child, &p.parent));
            if cyclic {
                tracing::info!(placement = %p, "dropping cyclic prediction before scoring");
            }
            !cyclic
        });
        dropped += before - set.len();
    }
    dropped
}

/// Micro-averaged triplet scores with a leaf / non-leaf split. WPS is taken
/// on `taxonomy`, which must contain the gold parents.
pub fn score_predictions(predicted: &PlacementMap, gold: &PlacementMap, taxonomy: &Taxonomy) -> ScoreReport {
    let mut predicted = predicted.clone();
    let dropped_cycles = drop_cycles(&mut predicted, taxonomy);
    let paths = CanonicalPaths::new(taxonomy);
    let empty = BTreeSet::new();

    let mut per_query = Vec::new();
    let mut unscoreable = Vec::new();
    for (q, gold_set) in gold {
        if gold_set.is_empty() {
            tracing::debug!(query = %q, "no gold position, not scored");
            unscoreable.push(q.clone());
            continue;
        }
        let pred = predicted.get(q).unwrap_or(&empty);
        let tp = pred.intersection(gold_set).count();
        let gold_parents: BTreeSet<&ConceptId> = gold_set.iter().map(|p| &p.parent).collect();
        let pred_parents: BTreeSet<&ConceptId> = pred.iter().map(|p| &p.parent).collect();
        let mut best = 0.0f64;
        for p in &pred_parents {
            for g in &gold_parents {
                match paths.wps(p, g) {
                    Ok(v) => best = best.max(v),
                    Err(e) => tracing::debug!(query = %q, error = %e, "skipping pair in WPS"),
                }
            }
        }
        per_query.push(QueryScore {
            query: q.clone(),
            wps: best,
            tp,
            fp: pred.len() - tp,
            fn_: gold_set.len() - tp,
            parent_tp_pred: pred.iter().filter(|p| gold_parents.contains(&p.parent)).count(),
            parent_tp_gold: gold_set.iter().filter(|p| pred_parents.contains(&p.parent)).count(),
            predicted: pred.len(),
            gold: gold_set.len(),
            is_leaf_gold: gold_set.iter().any(|p| p.child.is_pseudo_leaf()),
        });
    }

    let all: Vec<&QueryScore> = per_query.iter().collect();
    let leaf: Vec<&QueryScore> = per_query.iter().filter(|s| s.is_leaf_gold).collect();
    let non_leaf: Vec<&QueryScore> = per_query.iter().filter(|s| !s.is_leaf_gold).collect();
    let total = SliceScores::from(&all);
    let parent_precision = ratio(all.iter().map(|s| s.parent_tp_pred).sum(), all.iter().map(|s| s.predicted).sum());
    let parent_recall = ratio(all.iter().map(|s| s.parent_tp_gold).sum(), all.iter().map(|s| s.gold).sum());
    ScoreReport {
        total,
        leaf: SliceScores::from(&leaf),
        non_leaf: SliceScores::from(&non_leaf),
        position_f1: total.f1,
        parent_precision,
        parent_recall,
        parent_f1: f1(parent_precision, parent_recall),
        per_query,
        unscoreable,
        dropped_cycles,
    }
}

/// Scores a generated taxonomy by the positions its concepts occupy,
/// against the positions of the same concepts in `gold`. Only concepts
/// present in `gold` count.
pub fn compare_taxonomies(generated: &Taxonomy, gold: &Taxonomy) -> ScoreReport {
    let gold_positions = gold.positions();
    let predicted: BTreeMap<ConceptId, BTreeSet<Placement>> =
        generated.positions().into_iter().filter(|(q, _)| gold_positions.contains_key(q)).collect();
    score_predictions(&predicted, &gold_positions, gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::Concept;

    fn id(s: &str) -> ConceptId {
        ConceptId::from_label(s)
    }

    fn pl(p: &str, q: &str, c: &str) -> Placement {
        let f = |s: &str| match s {
            "^" => ConceptId::pseudo_root(),
            "$" => ConceptId::pseudo_leaf(),
            _ => id(s),
        };
        Placement { parent: f(p), query: f(q), child: f(c) }
    }

    fn fixture() -> Taxonomy {
        let mut t = Taxonomy::new();
        for l in ["r", "x", "y", "z"] {
            t.add_concept(Concept::new(l).unwrap());
        }
        t.add_edge(&id("r"), &id("x")).unwrap();
        t.add_edge(&id("x"), &id("y")).unwrap();
        t.add_edge(&id("r"), &id("z")).unwrap();
        t
    }

    #[test]
    fn wps_examples() {
        let t = fixture();
        assert_eq!(wps(&t, &id("y"), &id("y")).unwrap(), 1.0);
        let mut flat = Taxonomy::new();
        flat.add_concept(Concept::new("a").unwrap());
        flat.add_concept(Concept::new("b").unwrap());
        assert_eq!(wps(&flat, &id("a"), &id("b")).unwrap(), 0.5);
        // canonical paths: y = [^, r, x, y], z = [^, r, z]; lca r at depth 2
        assert!((wps(&t, &id("y"), &id("z")).unwrap() - 4.0 / 7.0).abs() < 1e-12);
        let mut chain = Taxonomy::new();
        for l in ["x", "y", "z"] {
            chain.add_concept(Concept::new(l).unwrap());
        }
        chain.add_edge(&id("x"), &id("y")).unwrap();
        assert!((wps(&chain, &id("y"), &id("z")).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn arithmetic() {
        let t = fixture();
        let gold: PlacementMap = [
            (id("q1"), [pl("x", "q1", "$"), pl("z", "q1", "$")].into()),
            (id("q2"), [pl("x", "q2", "y"), pl("r", "q2", "z")].into()),
        ]
        .into();
        let predicted: PlacementMap = [
            (id("q1"), [pl("x", "q1", "$"), pl("y", "q1", "$")].into()),
            (id("q2"), [pl("x", "q2", "y"), pl("r", "q2", "x")].into()),
        ]
        .into();
        let r = score_predictions(&predicted, &gold, &t);
        assert_eq!((r.total.tp, r.total.fp, r.total.fn_), (2, 2, 2));
        assert_eq!((r.total.precision, r.total.recall, r.total.f1), (0.5, 0.5, 0.5));
        assert_eq!(r.total.wps, 1.0);
        assert_eq!(r.leaf.queries, 1);
        assert!(r.parent_f1 >= r.position_f1);
    }

    #[test]
    fn right_parent_wrong_child() {
        let t = fixture();
        let gold: PlacementMap = [(id("q"), [pl("x", "q", "y")].into())].into();
        let predicted: PlacementMap = [(id("q"), [pl("x", "q", "$")].into())].into();
        let r = score_predictions(&predicted, &gold, &t);
        assert_eq!((r.total.tp, r.total.fp, r.total.fn_), (0, 1, 1));
        assert_eq!(r.parent_f1, 1.0);
        assert_eq!(r.position_f1, 0.0);
    }

    #[test]
    fn cycles_are_dropped_and_unscoreable_excluded() {
        let t = fixture();
        let gold: PlacementMap = [(id("q"), [pl("x", "q", "y")].into()), (id("u"), BTreeSet::new())].into();
        let predicted: PlacementMap = [(id("q"), [pl("y", "q", "x"), pl("x", "q", "y")].into())].into();
        let r = score_predictions(&predicted, &gold, &t);
        assert_eq!(r.dropped_cycles, 1);
        assert_eq!(r.total.precision, 1.0);
        assert_eq!(r.unscoreable, vec![id("u")]);
    }

    #[test]
    fn self_comparison_is_perfect() {
        let t = fixture();
        let r = compare_taxonomies(&t, &t);
        assert_eq!(r.position_f1, 1.0);
        assert_eq!(r.total.wps, 1.0);
    }
}
