//! NLI transports and the parent/child verification gates.

use std::time::Duration;

use super::{with_retries, NliBackend, NliClass, NliScores, ProviderError};
use crate::taxonomy::{normalize_label, Concept};

/// `POST {"premise", "hypothesis"}` answered by
/// `{"entailment", "neutral", "contradiction"}`.
pub struct HttpNli {
    url: String,
    retries: usize,
    agent: ureq::Agent,
}

impl HttpNli {
    pub fn new(url: impl Into<String>, timeout: Duration, retries: usize) -> Result<Self, ProviderError> {
        let url = url.into();
        if url.trim().is_empty() {
            return Err(ProviderError::Config("NLI endpoint URL is not set".into()));
        }
        Ok(HttpNli { url, retries, agent: ureq::AgentBuilder::new().timeout(timeout).build() })
    }

    fn call_once(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        let resp = self
            .agent
            .post(&self.url)
            .send_json(serde_json::json!({ "premise": premise, "hypothesis": hypothesis }))
            .map_err(ProviderError::from_ureq)?;
        let scores: NliScores =
            resp.into_json().map_err(|e| ProviderError::InvalidResponse(format!("NLI body: {e}")))?;
        scores.validate()?;
        Ok(scores)
    }
}

impl NliBackend for HttpNli {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        with_retries(self.retries, 500, || self.call_once(premise, hypothesis))
    }

    fn name(&self) -> String {
        format!("http:{}", self.url)
    }
}

/// Returns the same scores for every pair.
#[derive(Debug, Clone, Copy)]
pub struct FixedNli(pub NliScores);

impl FixedNli {
    pub fn always_entail() -> Self {
        FixedNli(NliScores { entailment: 1.0, neutral: 0.0, contradiction: 0.0 })
    }
}

impl NliBackend for FixedNli {
    fn classify(&self, _premise: &str, _hypothesis: &str) -> Result<NliScores, ProviderError> {
        Ok(self.0)
    }

    fn name(&self) -> String {
        let s = self.0;
        format!("fixed:{}/{}/{}", s.entailment, s.neutral, s.contradiction)
    }
}

/// Closure-backed NLI, mostly for tests.
pub struct NliFn<F>(pub F);

impl<F> NliBackend for NliFn<F>
where
    F: Fn(&str, &str) -> NliScores + Send + Sync,
{
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        let s = (self.0)(premise, hypothesis);
        s.validate()?;
        Ok(s)
    }

    fn name(&self) -> String {
        "fn".into()
    }
}

pub fn is_root_marker(label: &str) -> bool {
    let n = normalize_label(label);
    n == "none" || n == crate::taxonomy::ConceptId::pseudo_root().as_str()
}

/// `"<query> is a <parent>"` on normalized labels.
pub fn parent_hypothesis(query: &Concept, parent_label: &str) -> String {
    format!("{} is a {}", normalize_label(&query.label), normalize_label(parent_label))
}

pub fn child_hypothesis(query: &Concept, child: &Concept) -> String {
    format!("{} is a {}", normalize_label(&child.label), normalize_label(&query.label))
}

/// Lenient gate: accepted unless contradiction is the most probable class.
/// A top-level proposal is accepted without a call.
pub fn verify_parent<N: NliBackend + ?Sized>(nli: &N, query: &Concept, parent_label: &str) -> Result<bool, ProviderError> {
    if is_root_marker(parent_label) {
        return Ok(true);
    }
    let s = nli.classify(&query.premise(), &parent_hypothesis(query, parent_label))?;
    Ok(s.argmax() != NliClass::Contradiction)
}

/// Strict gate: accepted only when entailment is the most probable class.
/// The premise is the child's description.
pub fn verify_child<N: NliBackend + ?Sized>(nli: &N, query: &Concept, child: &Concept) -> Result<bool, ProviderError> {
    if child.id.is_pseudo_leaf() {
        return Ok(true);
    }
    let s = nli.classify(&child.premise(), &child_hypothesis(query, child))?;
    Ok(s.argmax() == NliClass::Entailment)
}
