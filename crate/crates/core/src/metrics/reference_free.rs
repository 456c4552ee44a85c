//! Metrics that need no gold taxonomy: semantic consistency (CSC) and NLI
//! validity of root-to-leaf walks (NLIV).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::MetricError;
use crate::providers::{NliBackend, NliScores};
use crate::retrieval::{cosine, EmbeddingProvider};
use crate::taxonomy::{normalize_label, CanonicalPaths, ConceptId, Taxonomy};

/// Default cap on sampled concept pairs for CSC.
pub const CSC_MAX_PAIRS: usize = 50_000;

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in &idx[i..=j] {
            ranks[*k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation with average ranks for ties. `None` when either
/// series has zero variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CscResult {
    pub value: f64,
    pub pairs: usize,
    /// One of the two series was constant; `value` is then 0.
    pub degenerate: bool,
}

/// Rank correlation between WPS and embedding similarity over concept
/// pairs. All pairs are used when there are at most `max_pairs`, otherwise
/// a seeded sample of distinct pairs.
pub fn csc<P: EmbeddingProvider + ?Sized>(
    taxonomy: &Taxonomy,
    provider: &P,
    max_pairs: usize,
    seed: u64,
) -> Result<CscResult, MetricError> {
    let ids: Vec<ConceptId> = taxonomy.concepts().map(|c| c.id.clone()).collect();
    let n = ids.len();
    if n < 3 {
        return Err(MetricError::TooFew { needed: 3, got: n });
    }
    let total = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= max_pairs {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = BTreeSet::new();
        while seen.len() < max_pairs {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                seen.insert((a.min(b), a.max(b)));
            }
        }
        seen.into_iter().collect()
    };
    let texts: Vec<String> = ids
        .iter()
        .map(|id| {
            let c = taxonomy.concept(id).expect("listed concept");
            c.description.clone().unwrap_or_else(|| c.label.clone())
        })
        .collect();
    let vectors: Result<Vec<Vec<f32>>, _> = crate::par::map(&texts, |t| provider.embed(t)).into_iter().collect();
    let vectors = vectors?;
    let paths = CanonicalPaths::new(taxonomy);
    let scored: Vec<Option<(f64, f64)>> = crate::par::map(&pairs, |&(i, j)| {
        let w = paths.wps(&ids[i], &ids[j]).ok()?;
        Some((w, cosine(&vectors[i], &vectors[j])))
    });
    let (w, s): (Vec<f64>, Vec<f64>) = scored.into_iter().flatten().unzip();
    Ok(match spearman(&w, &s) {
        Some(value) => CscResult { value, pairs: w.len(), degenerate: false },
        None => {
            tracing::warn!("CSC undefined for constant series, reporting 0");
            CscResult { value: 0.0, pairs: w.len(), degenerate: true }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NlivMode {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlivResult {
    pub value: f64,
    /// Leaf walks with at least one scorable edge.
    pub walks: usize,
    pub edges: usize,
}

fn geometric_mean(xs: &[f64]) -> f64 {
    if xs.iter().any(|x| *x <= 0.0) {
        return 0.0;
    }
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}

fn edge_score(s: &NliScores, mode: NlivMode) -> f64 {
    match mode {
        NlivMode::Strong => s.entailment,
        NlivMode::Weak => 1.0 - s.contradiction,
    }
}

/// NLIV in both modes from one pass of backend calls.
pub fn nliv_both<N: NliBackend + ?Sized>(taxonomy: &Taxonomy, nli: &N) -> Result<(NlivResult, NlivResult), MetricError> {
    let paths = CanonicalPaths::new(taxonomy);
    let mut walks: Vec<Vec<(ConceptId, ConceptId)>> = Vec::new();
    for leaf in taxonomy.leaves() {
        let path = paths.path(&leaf)?;
        let edges: Vec<(ConceptId, ConceptId)> = path
            .windows(2)
            .filter(|w| !w[0].is_pseudo() && !w[1].is_pseudo())
            .map(|w| (w[0].clone(), w[1].clone()))
            .collect();
        if !edges.is_empty() {
            walks.push(edges);
        }
    }
    let unique: Vec<(ConceptId, ConceptId)> =
        walks.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let results = crate::par::map(&unique, |(p, c)| {
        let child = taxonomy.concept(c).expect("path node");
        let hypothesis =
            format!("{} is a kind of {}", normalize_label(&child.label), normalize_label(taxonomy.label(p)));
        nli.classify(&child.premise(), &hypothesis)
    });
    let mut scores = BTreeMap::new();
    let total = unique.len();
    for (edge, r) in unique.into_iter().zip(results) {
        match r {
            Ok(s) => {
                scores.insert(edge, s);
            }
            Err(source) => return Err(MetricError::NlivAborted { scored: scores.len(), total, source }),
        }
    }
    let value = |mode| {
        if walks.is_empty() {
            return 0.0;
        }
        let per_walk: Vec<f64> =
            walks.iter().map(|w| geometric_mean(&w.iter().map(|e| edge_score(&scores[e], mode)).collect::<Vec<_>>())).collect();
        per_walk.iter().sum::<f64>() / per_walk.len() as f64
    };
    let mk = |mode| NlivResult { value: value(mode), walks: walks.len(), edges: total };
    Ok((mk(NlivMode::Weak), mk(NlivMode::Strong)))
}

pub fn nliv<N: NliBackend + ?Sized>(taxonomy: &Taxonomy, nli: &N, mode: NlivMode) -> Result<NlivResult, MetricError> {
    let (weak, strong) = nliv_both(taxonomy, nli)?;
    Ok(match mode {
        NlivMode::Weak => weak,
        NlivMode::Strong => strong,
    })
}
