//! Helpers shared by the integration tests: fixtures, scripted backends and
//! brute-force oracles written independently of the library code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxoforge_core::datasets::TaxonomyFiles;
use taxoforge_core::providers::{LlmBackend, ProviderError};
use taxoforge_core::retrieval::EmbeddingProvider;
use taxoforge_core::{Concept, ConceptId, Taxonomy};

pub mod assertions;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn load_fixture(stem: &str) -> Taxonomy {
    TaxonomyFiles::in_dir(&fixture_dir(), stem).load().expect("fixture loads")
}

pub fn id(label: &str) -> ConceptId {
    ConceptId::from_label(label)
}

/// Taxonomy from `(parent, child)` label pairs plus isolated labels.
pub fn taxonomy(edges: &[(&str, &str)], isolated: &[&str]) -> Taxonomy {
    let mut t = Taxonomy::new();
    for (p, c) in edges {
        t.add_concept(Concept::new(p).unwrap());
        t.add_concept(Concept::new(c).unwrap());
    }
    for l in isolated {
        t.add_concept(Concept::new(l).unwrap());
    }
    for (p, c) in edges {
        t.add_edge(&id(p), &id(c)).unwrap();
    }
    t
}

/// Random DAG over `n` nodes named `v00..`: edges only go from lower to
/// higher index, so the graph is acyclic by construction.
pub fn random_dag(rng: &mut impl Rng, n: usize, density: f64) -> Taxonomy {
    let mut t = Taxonomy::new();
    let labels: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
    for l in &labels {
        t.add_concept(Concept::new(l).unwrap().with_description(format!("{l} is a node")));
    }
    for j in 1..n {
        for i in 0..j {
            if rng.gen_bool(density) {
                t.add_edge(&id(&labels[i]), &id(&labels[j])).unwrap();
            }
        }
    }
    t
}

pub fn random_dag_seeded(seed: u64, n: usize, density: f64) -> Taxonomy {
    random_dag(&mut ChaCha8Rng::seed_from_u64(seed), n, density)
}

/// Every path from the pseudo-root to `target`, found by exhaustive DFS
/// over parent links.
pub fn all_root_paths(t: &Taxonomy, target: &ConceptId) -> Vec<Vec<ConceptId>> {
    fn up(t: &Taxonomy, node: &ConceptId, suffix: &mut Vec<ConceptId>, out: &mut Vec<Vec<ConceptId>>) {
        suffix.push(node.clone());
        let parents = t.parents(node);
        if parents.is_empty() {
            let mut p = vec![ConceptId::pseudo_root()];
            p.extend(suffix.iter().rev().cloned());
            out.push(p);
        } else {
            for p in parents {
                up(t, &p, suffix, out);
            }
        }
        suffix.pop();
    }
    let mut out = Vec::new();
    up(t, target, &mut Vec::new(), &mut out);
    out
}

/// Shortest root path; among equally short ones, the one whose nodes read
/// from the target upward have the smallest (label, id) keys.
pub fn oracle_path(t: &Taxonomy, target: &ConceptId) -> Vec<ConceptId> {
    let paths = all_root_paths(t, target);
    let min = paths.iter().map(Vec::len).min().unwrap();
    paths
        .into_iter()
        .filter(|p| p.len() == min)
        .min_by_key(|p| p.iter().rev().map(|n| (t.label(n).to_string(), n.clone())).collect::<Vec<_>>())
        .unwrap()
}

/// WPS from the deepest node shared by the two oracle paths.
pub fn oracle_wps(t: &Taxonomy, a: &ConceptId, b: &ConceptId) -> f64 {
    let pa = oracle_path(t, a);
    let pb = oracle_path(t, b);
    let lca = pa.iter().enumerate().filter(|(_, n)| pb.contains(n)).map(|(i, _)| i + 1).max().unwrap();
    2.0 * lca as f64 / (pa.len() + pb.len()) as f64
}

/// Exact two-sided sign-flip p-value over all 2^n patterns, with the same
/// add-one convention as the sampled test.
pub fn exact_sign_flip_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let obs = (d.iter().sum::<f64>() / n as f64).abs();
    let mut hits = 0usize;
    for mask in 0..(1usize << n) {
        let s: f64 = (0..n).map(|i| if mask >> i & 1 == 1 { -d[i] } else { d[i] }).sum();
        if (s / n as f64).abs() >= obs - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / (1usize << n) as f64
}

/// AHU canonical string of the forest under the pseudo-root; two trees are
/// isomorphic iff their strings are equal.
pub fn canonical_form(t: &Taxonomy) -> String {
    fn enc(t: &Taxonomy, n: &ConceptId) -> String {
        let mut kids: Vec<String> = t.children(n).iter().map(|c| enc(t, c)).collect();
        kids.sort();
        format!("({})", kids.concat())
    }
    let mut roots: Vec<String> = t.roots().iter().map(|r| enc(t, r)).collect();
    roots.sort();
    format!("[{}]", roots.concat())
}

/// Plain label-level edge set.
pub fn label_edges(t: &Taxonomy) -> BTreeSet<(String, String)> {
    t.edges().map(|e| (t.label(&e.parent).to_string(), t.label(&e.child).to_string())).collect()
}

/// LLM stub: the first rule whose needle occurs in the prompt answers,
/// cycling through its responses. Every prompt is logged.
pub struct Scripted {
    rules: Vec<(String, Vec<String>)>,
    counters: Mutex<BTreeMap<usize, usize>>,
    pub prompts: Mutex<Vec<String>>,
}

impl Scripted {
    pub fn new(rules: Vec<(&str, Vec<&str>)>) -> Self {
        Scripted {
            rules: rules.into_iter().map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect())).collect(),
            counters: Mutex::new(BTreeMap::new()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl LlmBackend for Scripted {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        for (i, (needle, answers)) in self.rules.iter().enumerate() {
            if prompt.contains(needle.as_str()) {
                let mut c = self.counters.lock().unwrap();
                let k = c.entry(i).or_insert(0);
                let a = answers[(*k).min(answers.len() - 1)].clone();
                *k += 1;
                return Ok(a);
            }
        }
        Err(ProviderError::InvalidResponse("no scripted answer".into()))
    }
}

/// Maps texts to fixed vectors; unknown texts get the zero vector.
pub struct TableEmbedder(pub BTreeMap<String, Vec<f32>>, pub usize);

impl EmbeddingProvider for TableEmbedder {
    fn dimension(&self) -> usize {
        self.1
    }
    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        Ok(self.0.get(text).cloned().unwrap_or_else(|| vec![0.0; self.1]))
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `n` as a sum of four squares.
pub fn four_squares(n: u64) -> [u64; 4] {
    for a in (0..=isqrt(n)).rev() {
        let ra = n - a * a;
        for b in (0..=isqrt(ra).min(a)).rev() {
            let rb = ra - b * b;
            for c in (0..=isqrt(rb).min(b)).rev() {
                let d = isqrt(rb - c * c);
                if d * d == rb - c * c {
                    return [a, b, c, d];
                }
            }
        }
    }
    unreachable!("every natural number is a sum of four squares")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Embedder whose cosine between two concept descriptions is exactly
/// proportional to their WPS: every pair gets four private shared integer
/// coordinates whose dot product is `L * wps`, and each vector is padded to
/// the same squared norm. All arithmetic stays exact in f32.
pub fn wps_monotone_embedder(t: &Taxonomy) -> TableEmbedder {
    let ids: Vec<ConceptId> = t.concepts().map(|c| c.id.clone()).collect();
    let paths: Vec<Vec<ConceptId>> = ids.iter().map(|i| oracle_path(t, i)).collect();
    let n = ids.len();
    let mut lcm = 1u64;
    for a in 0..n {
        for b in 0..n {
            let s = (paths[a].len() + paths[b].len()) as u64;
            lcm = lcm / gcd(lcm, s) * s;
        }
    }
    let mut weight = vec![vec![0u64; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let lca = paths[a].iter().enumerate().filter(|(_, x)| paths[b].contains(x)).map(|(i, _)| i + 1).max().unwrap();
            let w = 2 * lca as u64 * lcm / (paths[a].len() + paths[b].len()) as u64;
            weight[a][b] = w;
            weight[b][a] = w;
        }
    }
    let norm = (0..n).map(|a| weight[a].iter().sum::<u64>()).max().unwrap() + 1;
    let pairs = n * (n - 1) / 2;
    let dim = 4 * (pairs + n);
    let mut vecs = vec![vec![0f32; dim]; n];
    let mut slot = 0;
    for a in 0..n {
        for b in a + 1..n {
            for (k, v) in four_squares(weight[a][b]).iter().enumerate() {
                vecs[a][slot + k] = *v as f32;
                vecs[b][slot + k] = *v as f32;
            }
            slot += 4;
        }
    }
    for a in 0..n {
        let rest = norm - weight[a].iter().sum::<u64>();
        for (k, v) in four_squares(rest).iter().enumerate() {
            vecs[a][slot + k] = *v as f32;
        }
        slot += 4;
    }
    let mut table = BTreeMap::new();
    for (a, id) in ids.iter().enumerate() {
        let c = t.concept(id).unwrap();
        table.insert(c.description.clone().unwrap_or_else(|| c.label.clone()), vecs[a].clone());
    }
    TableEmbedder(table, dim)
}

pub const SWEETENING_CONTEXT: [&str; 19] = [
    "liqueur, sambuca",
    "sugar, sugarloaf",
    "sweet, hardbake",
    "food, comestible",
    "wine, riesling",
    "liqueur, galliano",
    "irish, poteen",
    "flavorer, sassafras",
    "dish, bitok",
    "wine, sauterne",
    "dish, kishke",
    "starches, bap",
    "condiment, chowchow",
    "liqueur, pernod",
    "wine, dubonnet",
    "feed, eatage",
    "cider, scrumpy",
    "dish, rijsttaffel",
    "wine, tokay",
];

pub const CONDIMENTS: [&str; 18] = [
    "salsa",
    "cranberry sauce",
    "dip",
    "soy sauce",
    "wasabi",
    "vinegar",
    "spread",
    "duck sauce",
    "chutney",
    "marinade",
    "mustard",
    "sauce",
    "mint sauce",
    "green olive",
    "pickle relish",
    "black olive",
    "chowchow",
    "pickle",
];

pub const SWEETENING_INTERPRETATION: &str = "The description of the child concept \"sweetening\" implies that it is an additive that enhances the sweetness of food, which is a type of comestible.";

pub const SWEETENING_PARENTS_OUTPUT: &str = "Reasoning: Let's think step by step in order to find the parents of the child concept \"sweetening\". We can infer that sweetening is related to food and its taste, so we need to find the concepts in the context that are related to food and taste.\n\nInterpretation: The description of the child concept \"sweetening\" implies that it is an additive that enhances the sweetness of food, which is a type of comestible.\n\nParents: flavorer, condiment";

pub const SWEETENING_CHILDREN_OUTPUT: &str = "Reasoning: Let's think step by step in order to identify the children of the concept \"sweetening\". We can see that sweetening is something added to foods to make them taste sweeter, which implies that it is a type of additive or condiment. Therefore, the child concepts should be types of sweetening agents.\n\nLeaf: No\n\nChildren: sugar, salsa, cranberry sauce, dip, soy sauce, wasabi, vinegar, spread, duck sauce, chutney, marinade, mustard, sauce, mint sauce, pickle relish";

pub fn sweetening() -> Concept {
    Concept::new("sweetening").unwrap().with_description("sweetening is something added to foods to make them taste sweeter")
}

/// Seed holding the context edges, `flavorer -> sugar` and the condiments.
pub fn sweetening_seed() -> Taxonomy {
    let mut edges: Vec<(&str, &str)> = SWEETENING_CONTEXT
        .iter()
        .map(|l| l.split_once(", ").unwrap())
        .collect();
    edges.push(("flavorer", "sugar"));
    edges.extend(CONDIMENTS.iter().map(|c| ("condiment", *c)));
    let mut t = taxonomy(&edges, &[]);
    let labels: Vec<String> = t.concepts().map(|c| c.label.clone()).collect();
    for l in labels {
        t.set_description(&id(&l), &format!("{l} is a kind of food")).unwrap();
    }
    t
}

/// Like [`random_dag`] but every node after the first has a parent, so
/// there is a single root.
pub fn rooted_dag(seed: u64, n: usize, density: f64) -> Taxonomy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = random_dag(&mut rng, n, density);
    for j in 1..n {
        let c = id(&format!("v{j:02}"));
        if t.parents(&c).is_empty() {
            let i = rng.gen_range(0..j);
            t.add_edge(&id(&format!("v{i:02}")), &c).unwrap();
        }
    }
    t
}
