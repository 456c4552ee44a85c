//! Benchmark loading, node-exclusion splits and the tab-separated file
//! formats shared by the CLI.
//!
//! Formats (UTF-8, `#` comment lines and blank lines ignored):
//! - edges: `parent_id<TAB>child_id`
//! - labels: `id<TAB>label`
//! - descriptions: `id<TAB>description`
//! - concepts / queries: `id<TAB>label[<TAB>description]`
//! - placements: `query_id<TAB>parent_id<TAB>child_id`

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::taxonomy::{Concept, ConceptId, Placement, Taxonomy, TaxonomyError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("input taxonomy contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Non-comment, non-blank lines split on tabs, with 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

/// Loads a taxonomy from an edge file plus optional label and description
/// files. Without a label file the ids double as labels.
pub fn load_taxonomy(
    edge_file: &Path,
    label_file: Option<&Path>,
    description_file: Option<&Path>,
) -> Result<Taxonomy, DatasetError> {
    let edges = read(edge_file)?;
    let labels = label_file.map(read).transpose()?;
    let descriptions = description_file.map(read).transpose()?;
    parse_taxonomy(&edges, labels.as_deref(), descriptions.as_deref())
}

pub fn parse_taxonomy(edges: &str, labels: Option<&str>, descriptions: Option<&str>) -> Result<Taxonomy, DatasetError> {
    // file id -> label, in first-seen order
    let mut order: Vec<String> = Vec::new();
    let mut label_of: BTreeMap<String, String> = BTreeMap::new();
    if let Some(text) = labels {
        for (line, fields) in records(text) {
            if fields.len() < 2 {
                return Err(parse_err("labels", line, "expected `id<TAB>label`"));
            }
            let (fid, label) = (fields[0].trim().to_string(), fields[1].trim().to_string());
            if label.is_empty() {
                return Err(parse_err("labels", line, "empty label"));
            }
            if label_of.insert(fid.clone(), label).is_none() {
                order.push(fid);
            }
        }
    }

    let mut raw_edges: Vec<(usize, String, String)> = Vec::new();
    for (line, fields) in records(edges) {
        if fields.len() < 2 {
            return Err(parse_err("edges", line, "expected `parent<TAB>child`"));
        }
        let (p, c) = (fields[0].trim().to_string(), fields[1].trim().to_string());
        if p.is_empty() || c.is_empty() {
            return Err(parse_err("edges", line, "empty concept id"));
        }
        for fid in [&p, &c] {
            if !label_of.contains_key(fid) {
                label_of.insert(fid.clone(), fid.clone());
                order.push(fid.clone());
            }
        }
        raw_edges.push((line, p, c));
    }

    let mut desc_of: BTreeMap<String, String> = BTreeMap::new();
    if let Some(text) = descriptions {
        for (line, fields) in records(text) {
            if fields.len() < 2 {
                return Err(parse_err("descriptions", line, "expected `id<TAB>description`"));
            }
            desc_of.insert(fields[0].trim().to_string(), fields[1..].join("\t").trim().to_string());
        }
    }

    let mut taxonomy = Taxonomy::new();
    let mut id_of: BTreeMap<String, ConceptId> = BTreeMap::new();
    for fid in &order {
        let label = &label_of[fid];
        let mut concept = Concept::new(label)?;
        if taxonomy.contains(&concept.id) {
            let unique = ConceptId::from_raw(format!("{} [{}]", concept.id, fid));
            tracing::warn!(file_id = %fid, label = %label, id = %unique, "label collision, disambiguating id");
            concept.id = unique;
        }
        if let Some(d) = desc_of.get(fid).or_else(|| desc_of.get(concept.id.as_str())) {
            concept = concept.with_description(d.clone());
        }
        id_of.insert(fid.clone(), concept.id.clone());
        taxonomy.add_concept(concept);
    }

    let mut seen = BTreeSet::new();
    let mut adjacency: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
    let mut unique_edges = Vec::new();
    for (line, p, c) in raw_edges {
        let (pid, cid) = (id_of[&p].clone(), id_of[&c].clone());
        if pid == cid {
            return Err(DatasetError::Cycle(vec![pid.to_string(), cid.to_string()]));
        }
        if !seen.insert((pid.clone(), cid.clone())) {
            tracing::warn!(line, parent = %p, child = %c, "duplicate edge ignored");
            continue;
        }
        adjacency.entry(pid.clone()).or_default().push(cid.clone());
        unique_edges.push((pid, cid));
    }
    if let Some(cycle) = crate::taxonomy::find_cycle(taxonomy.concept_ids().cloned().collect::<Vec<_>>(), |n| {
        adjacency.get(n).cloned().unwrap_or_default()
    }) {
        return Err(DatasetError::Cycle(cycle.into_iter().map(|c| c.to_string()).collect()));
    }
    for (p, c) in unique_edges {
        taxonomy.add_edge(&p, &c)?;
    }
    Ok(taxonomy)
}

fn parse_err(file: &str, line: usize, message: &str) -> DatasetError {
    DatasetError::Parse { file: file.to_string(), line, message: message.to_string() }
}

/// Paths of the three files that make up a taxonomy on disk.
#[derive(Debug, Clone)]
pub struct TaxonomyFiles {
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub descriptions: PathBuf,
}

impl TaxonomyFiles {
    /// `<dir>/<stem>.edges`, `<dir>/<stem>.labels`, `<dir>/<stem>.desc`.
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        TaxonomyFiles {
            edges: dir.join(format!("{stem}.edges")),
            labels: dir.join(format!("{stem}.labels")),
            descriptions: dir.join(format!("{stem}.desc")),
        }
    }

    pub fn load(&self) -> Result<Taxonomy, DatasetError> {
        let desc = self.descriptions.exists().then_some(self.descriptions.as_path());
        let labels = self.labels.exists().then_some(self.labels.as_path());
        load_taxonomy(&self.edges, labels, desc)
    }

    pub fn save(&self, taxonomy: &Taxonomy) -> Result<(), DatasetError> {
        let mut edges = String::new();
        for e in taxonomy.edges() {
            edges.push_str(&format!("{}\t{}\n", e.parent, e.child));
        }
        let mut labels = String::new();
        let mut desc = String::new();
        for c in taxonomy.concepts() {
            labels.push_str(&format!("{}\t{}\n", c.id, c.label));
            if let Some(d) = &c.description {
                desc.push_str(&format!("{}\t{}\n", c.id, one_line(d)));
            }
        }
        write_file(&self.edges, &edges)?;
        write_file(&self.labels, &labels)?;
        write_file(&self.descriptions, &desc)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn write_file(path: &Path, content: &str) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(content.as_bytes()).map_err(io_err(path))
}

/// Reads `id<TAB>label[<TAB>description]` lines, preserving file order.
pub fn read_concepts(path: &Path) -> Result<Vec<Concept>, DatasetError> {
    parse_concepts(&read(path)?)
}

pub fn parse_concepts(text: &str) -> Result<Vec<Concept>, DatasetError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, fields) in records(text) {
        let label = fields.get(1).copied().unwrap_or(fields[0]);
        let mut c = Concept::new(label).map_err(|e| parse_err("concepts", line, &e.to_string()))?;
        // keep ids that were disambiguated on load; otherwise ids follow labels
        let given = fields[0].trim();
        if fields.len() > 1 && given.starts_with(&format!("{} [", c.id)) {
            c.id = ConceptId::from_raw(given);
        }
        if let Some(d) = fields.get(2) {
            c = c.with_description(*d);
        }
        if seen.insert(c.id.clone()) {
            out.push(c);
        } else {
            tracing::warn!(line, id = %c.id, "duplicate concept ignored");
        }
    }
    Ok(out)
}

pub fn format_concepts<'a>(concepts: impl IntoIterator<Item = &'a Concept>) -> String {
    let mut out = String::new();
    for c in concepts {
        match &c.description {
            Some(d) => out.push_str(&format!("{}\t{}\t{}\n", c.id, c.label, one_line(d))),
            None => out.push_str(&format!("{}\t{}\n", c.id, c.label)),
        }
    }
    out
}

pub type PlacementMap = BTreeMap<ConceptId, BTreeSet<Placement>>;

pub fn read_placements(path: &Path) -> Result<PlacementMap, DatasetError> {
    parse_placements(&read(path)?)
}

pub fn parse_placements(text: &str) -> Result<PlacementMap, DatasetError> {
    let mut out: PlacementMap = BTreeMap::new();
    for (line, fields) in records(text) {
        if fields.len() < 3 {
            return Err(parse_err("placements", line, "expected `query<TAB>parent<TAB>child`"));
        }
        let [q, p, c] = [fields[0], fields[1], fields[2]].map(|s| ConceptId::from_raw(s.trim()));
        let placement = Placement::new(p, q.clone(), c).map_err(|e| parse_err("placements", line, &e.to_string()))?;
        out.entry(q).or_default().insert(placement);
    }
    Ok(out)
}

pub fn format_placements<'a>(placements: impl IntoIterator<Item = &'a Placement>) -> String {
    let mut sorted: Vec<&Placement> = placements.into_iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut out = String::new();
    for p in sorted {
        out.push_str(&format!("{}\t{}\t{}\n", p.query, p.parent, p.child));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Self, DatasetError> {
        for (name, f) in [("train", train_fraction), ("val", val_fraction), ("test", test_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(DatasetError::InvalidSplit(format!("{name} fraction {f} is outside (0, 1)")));
            }
        }
        let sum = train_fraction + val_fraction + test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(SplitSpec { train_fraction, val_fraction, test_fraction, seed })
    }
}

/// A held-out concept and its gold positions in the seed taxonomy. An empty
/// gold set marks the query as unscoreable.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub concept: Concept,
    pub gold: BTreeSet<Placement>,
}

impl Query {
    pub fn is_scoreable(&self) -> bool {
        !self.gold.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub seed_taxonomy: Taxonomy,
    /// Seed plus validation concepts, i.e. the original with test nodes bridged out.
    pub validation_taxonomy: Taxonomy,
    pub val_queries: Vec<Query>,
    pub test_queries: Vec<Query>,
}

impl DatasetBundle {
    pub fn gold_map(queries: &[Query]) -> PlacementMap {
        queries.iter().filter(|q| q.is_scoreable()).map(|q| (q.concept.id.clone(), q.gold.clone())).collect()
    }
}

fn count_for(fraction: f64, total: usize) -> usize {
    (fraction * total as f64 + 1e-9).floor() as usize
}

/// Excludes random non-root concepts into validation and test sets and
/// bridges each excluded concept's parents to its children in the seed.
pub fn split(taxonomy: &Taxonomy, spec: &SplitSpec) -> Result<DatasetBundle, DatasetError> {
    let total = taxonomy.node_count();
    if total <= 10 {
        return Err(DatasetError::InvalidSplit(format!("taxonomy has {total} concepts, need more than 10")));
    }
    let n_val = count_for(spec.val_fraction, total);
    let n_test = count_for(spec.test_fraction, total);
    let mut pool: Vec<ConceptId> = taxonomy.concept_ids().filter(|id| !taxonomy.is_root(id)).cloned().collect();
    if n_val + n_test >= total || pool.len() < n_val + n_test {
        return Err(DatasetError::InvalidSplit(format!(
            "cannot exclude {} of {total} concepts ({} non-root candidates)",
            n_val + n_test,
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pool.shuffle(&mut rng);
    let val: BTreeSet<ConceptId> = pool[..n_val].iter().cloned().collect();
    let test: BTreeSet<ConceptId> = pool[n_val..n_val + n_test].iter().cloned().collect();
    let seed_nodes: BTreeSet<ConceptId> =
        taxonomy.concept_ids().filter(|id| !val.contains(*id) && !test.contains(*id)).cloned().collect();
    let with_val: BTreeSet<ConceptId> = seed_nodes.union(&val).cloned().collect();

    let seed_taxonomy = bridge(taxonomy, &seed_nodes);
    let validation_taxonomy = bridge(taxonomy, &with_val);
    let make = |ids: &BTreeSet<ConceptId>| -> Vec<Query> {
        ids.iter()
            .map(|q| Query {
                concept: taxonomy.concept(q).expect("sampled from taxonomy").clone(),
                gold: gold_positions(taxonomy, q, &seed_nodes),
            })
            .collect()
    };
    Ok(DatasetBundle { val_queries: make(&val), test_queries: make(&test), seed_taxonomy, validation_taxonomy })
}

/// Nearest members of `keep` reached by walking `step` through non-members.
fn nearest_kept<F>(start: &ConceptId, keep: &BTreeSet<ConceptId>, step: F) -> BTreeSet<ConceptId>
where
    F: Fn(&ConceptId) -> Vec<ConceptId>,
{
    let mut found = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = step(start);
    while let Some(n) = stack.pop() {
        if !seen.insert(n.clone()) {
            continue;
        }
        if keep.contains(&n) {
            found.insert(n);
        } else {
            stack.extend(step(&n));
        }
    }
    found
}

/// Restriction of `taxonomy` to `keep` where every path whose interior lies
/// outside `keep` becomes a direct edge.
pub fn bridge(taxonomy: &Taxonomy, keep: &BTreeSet<ConceptId>) -> Taxonomy {
    let mut out = Taxonomy::new();
    for c in taxonomy.concepts().filter(|c| keep.contains(&c.id)) {
        out.add_concept(c.clone());
    }
    for a in keep {
        for b in nearest_kept(a, keep, |n| taxonomy.children(n)) {
            // bridging an acyclic graph cannot create a cycle
            out.add_edge(a, &b).expect("bridged edge between kept concepts");
        }
    }
    out
}

/// Gold placements of an excluded concept relative to the kept set.
pub fn gold_positions(taxonomy: &Taxonomy, query: &ConceptId, keep: &BTreeSet<ConceptId>) -> BTreeSet<Placement> {
    let mut parents: Vec<ConceptId> = nearest_kept(query, keep, |n| taxonomy.parents(n)).into_iter().collect();
    let mut children: Vec<ConceptId> = nearest_kept(query, keep, |n| taxonomy.children(n)).into_iter().collect();
    if parents.is_empty() {
        parents.push(ConceptId::pseudo_root());
    }
    if children.is_empty() {
        children.push(ConceptId::pseudo_leaf());
    }
    parents
        .iter()
        .flat_map(|p| children.iter().map(move |c| Placement { parent: p.clone(), query: query.clone(), child: c.clone() }))
        .collect()
}

/// All non-pseudo concepts without children, descriptions included.
pub fn leaves_only(taxonomy: &Taxonomy) -> Vec<Concept> {
    taxonomy.leaves().iter().filter_map(|id| taxonomy.concept(id)).cloned().collect()
}
