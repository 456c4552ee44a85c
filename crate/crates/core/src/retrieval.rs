//! Embedding providers and k-nearest edge retrieval for prompt context.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use crate::providers::ProviderError;
use crate::taxonomy::{normalize_label, Concept, Edge, Taxonomy};

/// Default number of retrieved context edges.
pub const DEFAULT_K: usize = 20;

/// Maps text to a fixed-length vector. Implementations must be deterministic.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        (**self).embed(text)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        (**self).embed(text)
    }
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Word vectors loaded from a text file: optional `<count> <dim>` header,
/// then `token v1 ... vdim` per line. Text is embedded as the mean of its
/// token vectors; unknown tokens contribute nothing and an all-unknown text
/// maps to the zero vector.
#[derive(Debug, Clone)]
pub struct WordVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl WordVectors {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let f = std::fs::File::open(path)
            .map_err(|e| ProviderError::Config(format!("cannot open word vectors {}: {e}", path.display())))?;
        Self::from_reader(BufReader::new(f))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, ProviderError> {
        let mut dim = 0usize;
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ProviderError::InvalidResponse(format!("word vectors: {e}")))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.is_empty() {
                continue;
            }
            if i == 0 && parts.len() == 2 && parts.iter().all(|p| p.parse::<usize>().is_ok()) {
                dim = parts[1].parse().unwrap_or(0);
                continue;
            }
            let values: Result<Vec<f32>, _> = parts[1..].iter().map(|v| v.parse::<f32>()).collect();
            let values =
                values.map_err(|e| ProviderError::InvalidResponse(format!("word vectors line {}: {e}", i + 1)))?;
            if dim == 0 {
                dim = values.len();
            }
            if values.len() != dim {
                return Err(ProviderError::InvalidResponse(format!(
                    "word vectors line {}: expected {dim} values, found {}",
                    i + 1,
                    values.len()
                )));
            }
            vectors.insert(parts[0].to_lowercase(), values);
        }
        if dim == 0 {
            return Err(ProviderError::InvalidResponse("word vector file is empty".into()));
        }
        Ok(WordVectors { dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '-'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EmbeddingProvider for WordVectors {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let phrase = normalize_label(text).replace(' ', "_");
        if let Some(v) = self.vectors.get(&phrase) {
            return Ok(v.clone());
        }
        let mut sum = vec![0.0f32; self.dim];
        let mut n = 0usize;
        for t in tokens(text) {
            if let Some(v) = self.vectors.get(&t) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                n += 1;
            }
        }
        if n > 0 {
            sum.iter_mut().for_each(|s| *s /= n as f32);
        }
        Ok(sum)
    }
}

/// Hashed character trigram embedder. Needs no model file, so it serves as
/// the fallback retriever and as a deterministic test provider.
#[derive(Debug, Clone, Copy)]
pub struct NgramHasher {
    dim: usize,
}

impl NgramHasher {
    pub fn new(dim: usize) -> Self {
        NgramHasher { dim: dim.max(1) }
    }
}

impl Default for NgramHasher {
    fn default() -> Self {
        NgramHasher::new(256)
    }
}

/// FNV-1a hash; stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl EmbeddingProvider for NgramHasher {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let mut v = vec![0.0f32; self.dim];
        for t in tokens(text) {
            let padded: Vec<char> = format!("<{t}>").chars().collect();
            for w in padded.windows(3.min(padded.len())) {
                let s: String = w.iter().collect();
                let h = stable_hash(&s);
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[(h % self.dim as u64) as usize] += sign;
            }
        }
        Ok(v)
    }
}

/// Embedding service over HTTP: `POST {"text": ...}` answered by either a
/// bare float array or `{"embedding": [...]}`.
pub struct HttpEmbedder {
    url: String,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        HttpEmbedder { url: url.into(), dim, agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let resp = self
            .agent
            .post(&self.url)
            .send_json(serde_json::json!({ "text": text }))
            .map_err(ProviderError::from_ureq)?;
        let value: serde_json::Value =
            resp.into_json().map_err(|e| ProviderError::InvalidResponse(format!("embedding body: {e}")))?;
        let array = value.get("embedding").unwrap_or(&value);
        let v: Vec<f32> = serde_json::from_value(array.clone())
            .map_err(|e| ProviderError::InvalidResponse(format!("embedding is not a float array: {e}")))?;
        if v.len() != self.dim {
            return Err(ProviderError::InvalidResponse(format!("expected {} dims, got {}", self.dim, v.len())));
        }
        Ok(v)
    }
}

/// Memoizing wrapper keyed by normalized text. Concurrent inserts of the
/// same key are harmless since providers are deterministic.
pub struct CachedEmbedder<P> {
    inner: P,
    cache: RwLock<HashMap<String, Arc<Vec<f32>>>>,
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn new(inner: P) -> Self {
        CachedEmbedder { inner, cache: RwLock::new(HashMap::new()) }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    pub fn embed_shared(&self, text: &str) -> Result<Arc<Vec<f32>>, ProviderError> {
        let key = normalize_label(text);
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(v);
        }
        let v = Arc::new(self.inner.embed(text)?);
        if let Ok(mut c) = self.cache.write() {
            c.entry(key).or_insert_with(|| v.clone());
        }
        Ok(v)
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        self.embed_shared(text).map(|v| (*v).clone())
    }
}

/// Rendered context edges for a prompt.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeContext {
    pub edges: Vec<Edge>,
    pub lines: Vec<String>,
    pub k: usize,
}

impl EdgeContext {
    pub fn from_edges(taxonomy: &Taxonomy, edges: Vec<Edge>, k: usize, annotate_leaves: bool) -> Self {
        let mut seen = BTreeSet::new();
        let mut kept = Vec::new();
        let mut lines = Vec::new();
        for e in edges {
            if kept.len() == k {
                break;
            }
            if let Some(line) = encode_edge(taxonomy, &e, annotate_leaves) {
                if seen.insert(line.clone()) {
                    lines.push(line);
                    kept.push(e);
                }
            }
        }
        EdgeContext { edges: kept, lines, k }
    }

    /// Literal lines, e.g. from a stored example.
    pub fn from_lines<S: Into<String>>(lines: impl IntoIterator<Item = S>) -> Self {
        let lines: Vec<String> = lines.into_iter().map(Into::into).collect();
        EdgeContext { edges: Vec::new(), k: lines.len(), lines }
    }

    /// Same edges rendered with leaf annotations against `taxonomy`.
    pub fn annotated(&self, taxonomy: &Taxonomy) -> EdgeContext {
        EdgeContext::from_edges(taxonomy, self.edges.clone(), self.k, true)
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// `parent, child`, or `parent (Non-Leaf), child (Leaf|Non-Leaf)` when
/// annotating. Edges touching pseudo nodes are never rendered.
pub fn encode_edge(taxonomy: &Taxonomy, edge: &Edge, annotate_leaves: bool) -> Option<String> {
    if edge.parent.is_pseudo() || edge.child.is_pseudo() {
        return None;
    }
    let p = taxonomy.label(&edge.parent);
    let c = taxonomy.label(&edge.child);
    if !annotate_leaves {
        return Some(format!("{p}, {c}"));
    }
    let tag = |id| if taxonomy.is_leaf(id) { "Leaf" } else { "Non-Leaf" };
    Some(format!("{p} ({}), {c} ({})", tag(&edge.parent), tag(&edge.child)))
}

/// Text used to embed a query: its label, followed by the description when
/// one exists.
pub fn query_text(concept: &Concept) -> String {
    match &concept.description {
        Some(d) => format!("{} {}", concept.label, d),
        None => concept.label.clone(),
    }
}

/// All stored edges with their cosine similarity to the query, best first;
/// ties are broken by edge order.
pub fn rank_edges<P: EmbeddingProvider + ?Sized>(
    taxonomy: &Taxonomy,
    query: &Concept,
    provider: &P,
) -> Result<Vec<(Edge, f64)>, ProviderError> {
    let edges: Vec<Edge> = taxonomy.edges().collect();
    if edges.is_empty() {
        return Ok(Vec::new());
    }
    let q = provider.embed(&query_text(query))?;
    let scored = crate::par::map(&edges, |e| {
        let text = encode_edge(taxonomy, e, false).unwrap_or_default();
        provider.embed(&text).map(|v| cosine(&q, &v))
    });
    let mut out = Vec::with_capacity(edges.len());
    for (e, s) in edges.into_iter().zip(scored) {
        out.push((e, s?));
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// The `k` stored edges most similar to the query, rendered without leaf
/// annotations. An edgeless taxonomy yields an empty context.
pub fn top_k_edges<P: EmbeddingProvider + ?Sized>(
    taxonomy: &Taxonomy,
    query: &Concept,
    k: usize,
    provider: &P,
) -> Result<EdgeContext, ProviderError> {
    let ranked = rank_edges(taxonomy, query, provider)?;
    Ok(EdgeContext::from_edges(taxonomy, ranked.into_iter().map(|(e, _)| e).collect(), k.max(1), false))
}

/// Deterministic fingerprint of a provider's output for a text; used in run
/// manifests.
pub fn fingerprint<P: EmbeddingProvider + ?Sized>(provider: &P, text: &str) -> Result<u64, ProviderError> {
    let v = provider.embed(text)?;
    let bits: Vec<String> = v.iter().map(|x| format!("{:08x}", x.to_bits())).collect();
    Ok(stable_hash(&bits.concat()))
}
