//! Taxonomy graph: concepts, is-a edges and the pseudo-root / pseudo-leaf
//! bookkeeping used by placements.
//!
//! Edges are only ever stored between real concepts. A placement that names
//! the pseudo-root as parent (or the pseudo-leaf as child) attaches nothing on
//! that side; rootness and leafness are derived from in- and out-degree.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved id of the pseudo-root.
pub const PSEUDO_ROOT: &str = "<pseudo-root>";
/// Reserved id of the pseudo-leaf.
pub const PSEUDO_LEAF: &str = "<pseudo-leaf>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(ConceptId),
    #[error("concept label is empty")]
    EmptyLabel,
    #[error("label `{0}` collides with a reserved pseudo-node id")]
    ReservedLabel(String),
    #[error("self edge on `{0}`")]
    SelfEdge(ConceptId),
    #[error("edge {parent} -> {child} touches a pseudo node")]
    PseudoEdge { parent: ConceptId, child: ConceptId },
    #[error("edge {parent} -> {child} would close a cycle")]
    Cycle { parent: ConceptId, child: ConceptId },
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("concept `{0}` is not reachable from the pseudo-root")]
    Unreachable(ConceptId),
}

/// Concept identifier: the label lowercased, trimmed and with internal
/// whitespace collapsed to single spaces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn from_label(label: &str) -> Self {
        ConceptId(normalize_label(label))
    }

    /// Wraps an already-normalized id without touching it.
    pub fn from_raw(id: impl Into<String>) -> Self {
        ConceptId(id.into())
    }

    pub fn pseudo_root() -> Self {
        ConceptId(PSEUDO_ROOT.to_string())
    }

    pub fn pseudo_leaf() -> Self {
        ConceptId(PSEUDO_LEAF.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_pseudo(&self) -> bool {
        self.0 == PSEUDO_ROOT || self.0 == PSEUDO_LEAF
    }

    pub fn is_pseudo_root(&self) -> bool {
        self.0 == PSEUDO_ROOT
    }

    pub fn is_pseudo_leaf(&self) -> bool {
        self.0 == PSEUDO_LEAF
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Number of whitespace-separated words in a label.
pub fn word_count(label: &str) -> usize {
    label.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub label: String,
    pub description: Option<String>,
    pub is_pseudo: bool,
}

impl Concept {
    pub fn new(label: &str) -> Result<Self, TaxonomyError> {
        let trimmed = label.trim();
        if trimmed.is_empty() {
            return Err(TaxonomyError::EmptyLabel);
        }
        let id = ConceptId::from_label(trimmed);
        if id.is_pseudo() {
            return Err(TaxonomyError::ReservedLabel(trimmed.to_string()));
        }
        Ok(Concept { id, label: trimmed.to_string(), description: None, is_pseudo: false })
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        let d = description.into();
        let d = d.trim();
        self.description = if d.is_empty() { None } else { Some(d.to_string()) };
        self
    }

    fn pseudo(id: ConceptId, label: &str) -> Self {
        Concept { id, label: label.to_string(), description: None, is_pseudo: true }
    }

    /// Premise text for NLI: the description, or `"<label>."` when missing.
    pub fn premise(&self) -> String {
        match &self.description {
            Some(d) => d.clone(),
            None => {
                tracing::debug!(concept = %self.id, "no description, using label as premise");
                format!("{}.", self.label)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub parent: ConceptId,
    pub child: ConceptId,
}

/// `(parent, query, child)` triplet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub parent: ConceptId,
    pub query: ConceptId,
    pub child: ConceptId,
}

impl Placement {
    pub fn new(parent: ConceptId, query: ConceptId, child: ConceptId) -> Result<Self, TaxonomyError> {
        if parent == query || child == query {
            return Err(TaxonomyError::InvalidPlacement(format!(
                "({parent}, {query}, {child}) relates the query to itself"
            )));
        }
        if query.is_pseudo() {
            return Err(TaxonomyError::InvalidPlacement("query is a pseudo node".into()));
        }
        if parent.is_pseudo_leaf() || child.is_pseudo_root() {
            return Err(TaxonomyError::InvalidPlacement(format!(
                "({parent}, {query}, {child}) uses a pseudo node on the wrong side"
            )));
        }
        Ok(Placement { parent, query, child })
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.parent, self.query, self.child)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlacementOutcome {
    /// Placement accepted; the count is the number of newly stored edges.
    Applied { new_edges: usize },
    /// Placement would have closed a cycle and was dropped.
    RejectedCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TaxonomyStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub depth: usize,
    pub leaf_count: usize,
    pub leaf_ratio: f64,
    pub branching_factor: f64,
}

/// Directed acyclic is-a graph with pseudo-root and pseudo-leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    concepts: BTreeMap<ConceptId, Concept>,
    children: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    parents: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::new()
    }
}

impl Taxonomy {
    pub fn new() -> Self {
        let mut concepts = BTreeMap::new();
        concepts.insert(ConceptId::pseudo_root(), Concept::pseudo(ConceptId::pseudo_root(), "<root>"));
        concepts.insert(ConceptId::pseudo_leaf(), Concept::pseudo(ConceptId::pseudo_leaf(), "<leaf>"));
        Taxonomy { concepts, children: BTreeMap::new(), parents: BTreeMap::new() }
    }

    pub fn pseudo_root(&self) -> ConceptId {
        ConceptId::pseudo_root()
    }

    pub fn pseudo_leaf(&self) -> ConceptId {
        ConceptId::pseudo_leaf()
    }

    /// Inserts a concept. Returns `false` when the id already exists; in that
    /// case a missing description is filled in from `concept`.
    pub fn add_concept(&mut self, concept: Concept) -> bool {
        match self.concepts.get_mut(&concept.id) {
            Some(existing) => {
                if existing.description.is_none() && concept.description.is_some() {
                    existing.description = concept.description;
                }
                false
            }
            None => {
                self.concepts.insert(concept.id.clone(), concept);
                true
            }
        }
    }

    pub fn set_description(&mut self, id: &ConceptId, description: &str) -> Result<(), TaxonomyError> {
        let c = self.concepts.get_mut(id).ok_or_else(|| TaxonomyError::UnknownConcept(id.clone()))?;
        c.description = Some(description.trim().to_string());
        Ok(())
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.concepts.contains_key(id)
    }

    pub fn concept(&self, id: &ConceptId) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn label<'a>(&'a self, id: &'a ConceptId) -> &'a str {
        self.concepts.get(id).map(|c| c.label.as_str()).unwrap_or(id.as_str())
    }

    /// Non-pseudo concepts in id order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values().filter(|c| !c.is_pseudo)
    }

    pub fn concept_ids(&self) -> impl Iterator<Item = &ConceptId> {
        self.concepts().map(|c| &c.id)
    }

    pub fn node_count(&self) -> usize {
        self.concepts.len() - 2
    }

    pub fn edge_count(&self) -> usize {
        self.children.values().map(BTreeSet::len).sum()
    }

    /// Stored edges in `(parent, child)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.children
            .iter()
            .flat_map(|(p, cs)| cs.iter().map(move |c| Edge { parent: p.clone(), child: c.clone() }))
    }

    pub fn has_edge(&self, parent: &ConceptId, child: &ConceptId) -> bool {
        self.children.get(parent).is_some_and(|cs| cs.contains(child))
    }

    /// Real children of a concept. The pseudo-root's children are the
    /// current root-level concepts.
    pub fn children(&self, id: &ConceptId) -> Vec<ConceptId> {
        if id.is_pseudo_root() {
            return self.roots();
        }
        self.children.get(id).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }

    pub fn parents(&self, id: &ConceptId) -> Vec<ConceptId> {
        self.parents.get(id).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }

    pub fn is_leaf(&self, id: &ConceptId) -> bool {
        !id.is_pseudo() && self.children.get(id).is_none_or(BTreeSet::is_empty)
    }

    pub fn is_root(&self, id: &ConceptId) -> bool {
        !id.is_pseudo() && self.parents.get(id).is_none_or(BTreeSet::is_empty)
    }

    pub fn roots(&self) -> Vec<ConceptId> {
        self.concept_ids().filter(|id| self.is_root(id)).cloned().collect()
    }

    pub fn leaves(&self) -> Vec<ConceptId> {
        self.concept_ids().filter(|id| self.is_leaf(id)).cloned().collect()
    }

    fn require(&self, id: &ConceptId) -> Result<(), TaxonomyError> {
        if self.concepts.contains_key(id) {
            Ok(())
        } else {
            Err(TaxonomyError::UnknownConcept(id.clone()))
        }
    }

    /// True when `to` is reachable from `from` following child edges
    /// (a node reaches itself).
    pub fn reaches(&self, from: &ConceptId, to: &ConceptId) -> bool {
        if from == to {
            return true;
        }
        if from.is_pseudo_root() {
            return !to.is_pseudo();
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if let Some(cs) = self.children.get(n) {
                for c in cs {
                    if c == to {
                        return true;
                    }
                    if seen.insert(c) {
                        stack.push(c);
                    }
                }
            }
        }
        false
    }

    /// Strict ancestors (excluding the pseudo-root).
    pub fn ancestors(&self, id: &ConceptId) -> BTreeSet<ConceptId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id.clone()];
        while let Some(n) = stack.pop() {
            for p in self.parents(&n) {
                if out.insert(p.clone()) {
                    stack.push(p);
                }
            }
        }
        out
    }

    /// Strict descendants.
    pub fn descendants(&self, id: &ConceptId) -> BTreeSet<ConceptId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id.clone()];
        while let Some(n) = stack.pop() {
            if let Some(cs) = self.children.get(&n) {
                for c in cs {
                    if out.insert(c.clone()) {
                        stack.push(c.clone());
                    }
                }
            }
        }
        out
    }

    /// Adds a single edge between real concepts. Returns whether the edge was
    /// new; a cycle leaves the graph untouched and is reported as an error.
    pub fn add_edge(&mut self, parent: &ConceptId, child: &ConceptId) -> Result<bool, TaxonomyError> {
        self.require(parent)?;
        self.require(child)?;
        if parent == child {
            return Err(TaxonomyError::SelfEdge(parent.clone()));
        }
        if parent.is_pseudo() || child.is_pseudo() {
            return Err(TaxonomyError::PseudoEdge { parent: parent.clone(), child: child.clone() });
        }
        if self.has_edge(parent, child) {
            return Ok(false);
        }
        if self.reaches(child, parent) {
            return Err(TaxonomyError::Cycle { parent: parent.clone(), child: child.clone() });
        }
        self.insert_edge_unchecked(parent, child);
        Ok(true)
    }

    fn insert_edge_unchecked(&mut self, parent: &ConceptId, child: &ConceptId) -> bool {
        let new = self.children.entry(parent.clone()).or_default().insert(child.clone());
        self.parents.entry(child.clone()).or_default().insert(parent.clone());
        new
    }

    pub fn remove_edge(&mut self, parent: &ConceptId, child: &ConceptId) -> bool {
        let removed = self.children.get_mut(parent).is_some_and(|cs| cs.remove(child));
        if removed {
            if let Some(ps) = self.parents.get_mut(child) {
                ps.remove(parent);
            }
        }
        removed
    }

    /// Inserts `parent -> query -> child`. Pseudo endpoints store no edge.
    /// If either edge would close a cycle the whole placement is rejected and
    /// the taxonomy is left unchanged.
    pub fn apply_placement(&mut self, placement: &Placement) -> Result<PlacementOutcome, TaxonomyError> {
        let Placement { parent, query, child } = placement;
        self.require(parent)?;
        self.require(query)?;
        self.require(child)?;
        if parent == query || child == query {
            return Err(TaxonomyError::InvalidPlacement(placement.to_string()));
        }
        if parent.is_pseudo_leaf() || child.is_pseudo_root() || query.is_pseudo() {
            return Err(TaxonomyError::InvalidPlacement(placement.to_string()));
        }

        let upper = (!parent.is_pseudo()).then(|| (parent.clone(), query.clone()));
        let lower = (!child.is_pseudo()).then(|| (query.clone(), child.clone()));

        // A fresh cycle must run through the query, since the graph was acyclic.
        let closes_cycle = match (&upper, &lower) {
            (Some((p, _)), Some((_, c))) => self.reaches(query, p) || self.reaches(c, query) || self.reaches(c, p),
            (Some((p, _)), None) => self.reaches(query, p),
            (None, Some((_, c))) => self.reaches(c, query),
            (None, None) => false,
        };
        if closes_cycle {
            tracing::info!(%placement, "dropping placement that would create a cycle");
            return Ok(PlacementOutcome::RejectedCycle);
        }

        let mut new_edges = 0;
        for (p, c) in upper.iter().chain(lower.iter()) {
            if self.insert_edge_unchecked(p, c) {
                new_edges += 1;
            }
        }
        Ok(PlacementOutcome::Applied { new_edges })
    }

    /// Canonical root-to-concept path, pseudo-root first. Shortest path; ties
    /// go to the parent with the smallest label.
    pub fn path_to_root(&self, id: &ConceptId) -> Result<Vec<ConceptId>, TaxonomyError> {
        CanonicalPaths::new(self).path(id)
    }

    /// Depth (node count along the canonical path) of the deepest common
    /// ancestor of `a` and `b`; the pseudo-root has depth 1.
    pub fn lca_depth(&self, a: &ConceptId, b: &ConceptId) -> Result<usize, TaxonomyError> {
        CanonicalPaths::new(self).lca_depth(a, b)
    }

    /// Removes every candidate that is a strict ancestor of another candidate.
    pub fn most_specific(&self, candidates: &BTreeSet<ConceptId>) -> Result<BTreeSet<ConceptId>, TaxonomyError> {
        for c in candidates {
            self.require(c)?;
        }
        Ok(candidates
            .iter()
            .filter(|a| !candidates.iter().any(|b| *a != b && self.reaches(a, b)))
            .cloned()
            .collect())
    }

    pub fn stats(&self) -> TaxonomyStats {
        let node_count = self.node_count();
        if node_count == 0 {
            return TaxonomyStats::default();
        }
        let edge_count = self.edge_count();
        let leaf_count = self.leaves().len();
        let paths = CanonicalPaths::new(self);
        let depth = self.concept_ids().filter_map(|id| paths.depth(id)).max().unwrap_or(1) - 1;
        let inner = node_count - leaf_count;
        TaxonomyStats {
            node_count,
            edge_count,
            depth,
            leaf_count,
            leaf_ratio: leaf_count as f64 / node_count as f64,
            branching_factor: if inner == 0 { 0.0 } else { edge_count as f64 / inner as f64 },
        }
    }

    /// Copy restricted to the given concepts; edges with a dropped endpoint
    /// are discarded.
    pub fn restricted_to(&self, keep: &BTreeSet<ConceptId>) -> Taxonomy {
        let mut t = Taxonomy::new();
        for c in self.concepts().filter(|c| keep.contains(&c.id)) {
            t.add_concept(c.clone());
        }
        for e in self.edges() {
            if keep.contains(&e.parent) && keep.contains(&e.child) {
                t.insert_edge_unchecked(&e.parent, &e.child);
            }
        }
        t
    }

    /// All positions currently occupied by each concept: its parents (or the
    /// pseudo-root) crossed with its children (or the pseudo-leaf).
    pub fn positions(&self) -> BTreeMap<ConceptId, BTreeSet<Placement>> {
        let mut out = BTreeMap::new();
        for q in self.concept_ids() {
            let mut ps = self.parents(q);
            if ps.is_empty() {
                ps.push(ConceptId::pseudo_root());
            }
            let mut cs = self.children(q);
            if cs.is_empty() {
                cs.push(ConceptId::pseudo_leaf());
            }
            let set = ps
                .iter()
                .flat_map(|p| {
                    cs.iter().map(move |c| Placement { parent: p.clone(), query: q.clone(), child: c.clone() })
                })
                .collect();
            out.insert(q.clone(), set);
        }
        out
    }

    /// Returns one directed cycle if the stored edges contain any.
    pub fn find_cycle(&self) -> Option<Vec<ConceptId>> {
        find_cycle(self.concept_ids().cloned(), |n| self.children(n))
    }
}

/// Depth-first cycle search over an arbitrary adjacency function.
pub(crate) fn find_cycle<I, F>(nodes: I, succ: F) -> Option<Vec<ConceptId>>
where
    I: IntoIterator<Item = ConceptId>,
    F: Fn(&ConceptId) -> Vec<ConceptId>,
{
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<ConceptId, Mark> = BTreeMap::new();
    for start in nodes {
        if marks.contains_key(&start) {
            continue;
        }
        let mut stack: Vec<(ConceptId, Vec<ConceptId>)> = vec![(start.clone(), succ(&start))];
        let mut trail = vec![start.clone()];
        marks.insert(start, Mark::Open);
        while let Some((node, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(next) => match marks.get(&next) {
                    Some(Mark::Open) => {
                        let from = trail.iter().position(|n| *n == next).unwrap_or(0);
                        let mut cycle = trail[from..].to_vec();
                        cycle.push(next);
                        return Some(cycle);
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next.clone(), Mark::Open);
                        trail.push(next.clone());
                        let s = succ(&next);
                        stack.push((next, s));
                    }
                },
                None => {
                    marks.insert(node.clone(), Mark::Done);
                    trail.pop();
                    stack.pop();
                }
            }
        }
    }
    None
}

/// Precomputed canonical paths for repeated path / LCA queries over a fixed
/// taxonomy.
#[derive(Debug, Clone)]
pub struct CanonicalPaths {
    // depth counts nodes on the path, pseudo-root = 1
    depth: BTreeMap<ConceptId, usize>,
    parent: BTreeMap<ConceptId, ConceptId>,
}

impl CanonicalPaths {
    pub fn new(taxonomy: &Taxonomy) -> Self {
        let root = ConceptId::pseudo_root();
        let mut depth = BTreeMap::new();
        let mut parent = BTreeMap::new();
        depth.insert(root.clone(), 1usize);
        let mut queue: VecDeque<ConceptId> = VecDeque::new();
        for r in taxonomy.roots() {
            depth.insert(r.clone(), 2);
            parent.insert(r.clone(), root.clone());
            queue.push_back(r);
        }
        // BFS gives shortest distances; parents are chosen afterwards so the
        // label tie-break does not depend on visiting order.
        while let Some(n) = queue.pop_front() {
            let d = depth[&n];
            for c in taxonomy.children(&n) {
                if !depth.contains_key(&c) {
                    depth.insert(c.clone(), d + 1);
                    queue.push_back(c);
                }
            }
        }
        for (id, d) in &depth {
            if id.is_pseudo_root() || *d == 2 {
                continue;
            }
            let best = taxonomy
                .parents(id)
                .into_iter()
                .filter(|p| depth.get(p) == Some(&(d - 1)))
                .min_by(|a, b| taxonomy.label(a).cmp(taxonomy.label(b)).then_with(|| a.cmp(b)));
            if let Some(p) = best {
                parent.insert(id.clone(), p);
            }
        }
        CanonicalPaths { depth, parent }
    }

    /// Node count of the canonical path, or `None` when unreachable.
    pub fn depth(&self, id: &ConceptId) -> Option<usize> {
        self.depth.get(id).copied()
    }

    pub fn path(&self, id: &ConceptId) -> Result<Vec<ConceptId>, TaxonomyError> {
        if !self.depth.contains_key(id) {
            return Err(TaxonomyError::Unreachable(id.clone()));
        }
        let mut out = vec![id.clone()];
        let mut cur = id;
        while let Some(p) = self.parent.get(cur) {
            out.push(p.clone());
            cur = p;
        }
        out.reverse();
        Ok(out)
    }

    pub fn lca_depth(&self, a: &ConceptId, b: &ConceptId) -> Result<usize, TaxonomyError> {
        let pa = self.path(a)?;
        let pb = self.path(b)?;
        // canonical paths are prefix-closed, so common ancestors form a prefix
        Ok(pa.iter().zip(pb.iter()).take_while(|(x, y)| x == y).count())
    }

    /// Wu-Palmer similarity of two concepts over canonical paths.
    pub fn wps(&self, a: &ConceptId, b: &ConceptId) -> Result<f64, TaxonomyError> {
        let lca = self.lca_depth(a, b)?;
        let da = self.depth[a];
        let db = self.depth[b];
        Ok(2.0 * lca as f64 / (da + db) as f64)
    }
}
