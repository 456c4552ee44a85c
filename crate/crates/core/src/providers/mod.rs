//! Language-model and NLI backends, prompt rendering and output parsing.

use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod describe;
pub mod llm;
pub mod nli;
pub mod oracle;
pub mod parse;
pub mod prompts;

pub use describe::Describer;
pub use llm::{HttpLlm, LlmConfig, RecordingBackend, ReplayBackend};
pub use nli::{verify_child, verify_parent, FixedNli, HttpNli, NliFn};
pub use oracle::OracleBackend;
pub use parse::{parse_child_output, parse_fielded_output, parse_parent_output, ChildSelection, ParentProposal, ParseError};
pub use prompts::{render_child_prompt, render_parent_prompt, PromptMode, COT_TRIGGER};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("no recorded response for prompt hash {key}")]
    ReplayMiss { key: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl ProviderError {
    /// Transport failures, rate limits and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    pub(crate) fn from_ureq(e: ureq::Error) -> Self {
        match e {
            ureq::Error::Status(status, resp) => {
                let body = resp.into_string().unwrap_or_default();
                ProviderError::Status { status, body: body.chars().take(500).collect() }
            }
            ureq::Error::Transport(t) => ProviderError::Transport(t.to_string()),
        }
    }
}

/// Runs `f` up to `1 + retries` times while it fails with a retryable error,
/// sleeping `backoff_ms * 2^attempt` between tries.
pub(crate) fn with_retries<T>(
    retries: usize,
    backoff_ms: u64,
    mut f: impl FnMut() -> Result<T, ProviderError>,
) -> Result<T, ProviderError> {
    let mut attempt = 0;
    loop {
        match f() {
            Err(e) if e.is_retryable() && attempt < retries => {
                tracing::warn!(error = %e, attempt, "retrying backend call");
                std::thread::sleep(std::time::Duration::from_millis(backoff_ms << attempt.min(10)));
                attempt += 1;
            }
            r => return r,
        }
    }
}

/// A text-completion backend. Calls are independent and may be issued
/// concurrently.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;

    /// Short identifier recorded in run manifests.
    fn name(&self) -> String {
        "llm".into()
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Arc<B> {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).complete(prompt)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).complete(prompt)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).complete(prompt)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Three-way NLI class probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliScores {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NliClass {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliScores {
    pub fn new(entailment: f64, neutral: f64, contradiction: f64) -> Result<Self, ProviderError> {
        let s = NliScores { entailment, neutral, contradiction };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let parts = [self.entailment, self.neutral, self.contradiction];
        if parts.iter().any(|p| !p.is_finite() || *p < -1e-9 || *p > 1.0 + 1e-9) {
            return Err(ProviderError::InvalidResponse(format!("NLI probabilities out of range: {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ProviderError::InvalidResponse(format!("NLI probabilities sum to {sum}")));
        }
        Ok(())
    }

    /// Most probable class; ties resolve toward entailment, then neutral.
    pub fn argmax(&self) -> NliClass {
        if self.entailment >= self.neutral && self.entailment >= self.contradiction {
            NliClass::Entailment
        } else if self.neutral >= self.contradiction {
            NliClass::Neutral
        } else {
            NliClass::Contradiction
        }
    }
}

pub trait NliBackend: Send + Sync {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError>;

    fn name(&self) -> String {
        "nli".into()
    }
}

impl<B: NliBackend + ?Sized> NliBackend for Arc<B> {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        (**self).classify(premise, hypothesis)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: NliBackend + ?Sized> NliBackend for Box<B> {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        (**self).classify(premise, hypothesis)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: NliBackend + ?Sized> NliBackend for &B {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        (**self).classify(premise, hypothesis)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Counting semaphore bounding in-flight backend calls.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore { permits: Mutex::new(permits.max(1)), cv: Condvar::new() }
    }

    pub fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut p = self.permits.lock().unwrap_or_else(|e| e.into_inner());
            while *p == 0 {
                p = self.cv.wait(p).unwrap_or_else(|e| e.into_inner());
            }
            *p -= 1;
        }
        struct Release<'a>(&'a Semaphore);
        impl Drop for Release<'_> {
            fn drop(&mut self) {
                let mut p = self.0.permits.lock().unwrap_or_else(|e| e.into_inner());
                *p += 1;
                self.0.cv.notify_one();
            }
        }
        let _guard = Release(self);
        f()
    }
}

/// Wraps a backend so that at most `limit` calls run at once.
pub struct Bounded<B> {
    inner: B,
    sem: Semaphore,
}

impl<B> Bounded<B> {
    pub fn new(inner: B, limit: usize) -> Self {
        Bounded { inner, sem: Semaphore::new(limit) }
    }
}

impl<B: LlmBackend> LlmBackend for Bounded<B> {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self.sem.run(|| self.inner.complete(prompt))
    }
    fn name(&self) -> String {
        self.inner.name()
    }
}

impl<B: NliBackend> NliBackend for Bounded<B> {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        self.sem.run(|| self.inner.classify(premise, hypothesis))
    }
    fn name(&self) -> String {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn scores_must_sum_to_one() {
        assert!(NliScores::new(0.1, 0.8, 0.1).is_ok());
        assert!(NliScores::new(0.5, 0.5, 0.5).is_err());
        assert_eq!(NliScores::new(0.05, 0.05, 0.9).unwrap().argmax(), NliClass::Contradiction);
    }

    #[test]
    fn semaphore_bounds_concurrency() {
        let sem = Arc::new(Semaphore::new(2));
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (sem, live, peak) = (sem.clone(), live.clone(), peak.clone());
                std::thread::spawn(move || {
                    sem.run(|| {
                        let n = live.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(n, Ordering::SeqCst);
                        std::thread::sleep(std::time::Duration::from_millis(5));
                        live.fetch_sub(1, Ordering::SeqCst);
                    })
                })
            })
            .collect();
        handles.into_iter().for_each(|h| h.join().unwrap());
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn retries_only_retryable_errors() {
        let calls = AtomicUsize::new(0);
        let r: Result<(), _> = with_retries(3, 0, || {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(ProviderError::Transport("down".into()))
        });
        assert!(r.is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 4);
        calls.store(0, Ordering::SeqCst);
        let _: Result<(), _> = with_retries(3, 0, || {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(ProviderError::Status { status: 400, body: String::new() })
        });
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }
}
