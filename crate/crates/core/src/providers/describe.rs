//! Generated concept and taxonomy descriptions.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::parse::parse_fielded_output;
use super::prompts::{render_describe_prompt, render_taxonomy_description_prompt};
use super::{LlmBackend, ProviderError};
use crate::taxonomy::normalize_label;

/// Number of concepts shown when asking for a taxonomy description.
pub const TAXONOMY_SAMPLE: usize = 100;

/// Caches one description per normalized label.
pub struct Describer<'a> {
    llm: &'a dyn LlmBackend,
    cache: RwLock<HashMap<String, String>>,
}

fn first_sentences(text: &str, n: usize) -> String {
    let mut out = String::new();
    let mut count = 0;
    for (i, ch) in text.char_indices() {
        out.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            let next = text[i + ch.len_utf8()..].chars().next();
            if next.is_none_or(char::is_whitespace) {
                count += 1;
                if count == n {
                    break;
                }
            }
        }
    }
    out.trim().to_string()
}

impl<'a> Describer<'a> {
    pub fn new(llm: &'a dyn LlmBackend) -> Self {
        Describer { llm, cache: RwLock::new(HashMap::new()) }
    }

    /// One to three sentences beginning with the label.
    pub fn describe(&self, label: &str) -> Result<String, ProviderError> {
        let label = label.trim();
        if label.is_empty() {
            return Err(ProviderError::Precondition("cannot describe an empty label".into()));
        }
        let key = normalize_label(label);
        if let Some(d) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(d);
        }
        let raw = self.llm.complete(&render_describe_prompt(label))?;
        let fields = parse_fielded_output(&raw, &["Reasoning", "Description"]);
        let text = fields
            .get("Description")
            .filter(|d| !d.is_empty())
            .ok_or_else(|| ProviderError::InvalidResponse(format!("no Description field for `{label}`")))?;
        let text = first_sentences(&text.split_whitespace().collect::<Vec<_>>().join(" "), 3);
        let text = if normalize_label(&text).starts_with(&key) { text } else { format!("{label} is {text}") };
        if let Ok(mut c) = self.cache.write() {
            c.entry(key).or_insert_with(|| text.clone());
        }
        Ok(text)
    }

    pub fn cached(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// Describes a taxonomy that could hold the given concepts, shown as a
    /// seeded sample of at most [`TAXONOMY_SAMPLE`] labels.
    pub fn taxonomy_description(&self, labels: &[String], seed: u64) -> Result<String, ProviderError> {
        let mut sample: Vec<String> = labels.to_vec();
        if sample.len() > TAXONOMY_SAMPLE {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample.shuffle(&mut rng);
            sample.truncate(TAXONOMY_SAMPLE);
        }
        let raw = self.llm.complete(&render_taxonomy_description_prompt(&sample))?;
        let fields = parse_fielded_output(&raw, &["Reasoning", "Taxonomy Description"]);
        fields
            .get("Taxonomy Description")
            .filter(|d| !d.is_empty())
            .map(|d| d.split_whitespace().collect::<Vec<_>>().join(" "))
            .ok_or_else(|| ProviderError::InvalidResponse("no Taxonomy Description field".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Stub(AtomicUsize);
    impl LlmBackend for Stub {
        fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            if prompt.contains("Concept: sweetening") {
                Ok("Reasoning: describe it.\n\nDescription: sweetening is something added to foods to make them taste sweeter".into())
            } else if prompt.contains("Concept: salt") {
                Ok("Description: A mineral. Used for seasoning. Very common. Also old.".into())
            } else {
                Ok("Taxonomy Description: A taxonomy of foods.".into())
            }
        }
    }

    #[test]
    fn describes_and_caches() {
        let stub = Stub(AtomicUsize::new(0));
        let d = Describer::new(&stub);
        let text = d.describe("sweetening").unwrap();
        assert_eq!(text, "sweetening is something added to foods to make them taste sweeter");
        assert_eq!(d.describe("Sweetening ").unwrap(), text);
        assert_eq!(stub.0.load(Ordering::SeqCst), 1);
        assert_eq!(d.describe("salt").unwrap(), "salt is A mineral. Used for seasoning. Very common.");
        assert!(matches!(d.describe("  "), Err(ProviderError::Precondition(_))));
    }

    #[test]
    fn taxonomy_description_samples() {
        let stub = Stub(AtomicUsize::new(0));
        let labels: Vec<String> = (0..300).map(|i| format!("c{i}")).collect();
        assert_eq!(Describer::new(&stub).taxonomy_description(&labels, 1).unwrap(), "A taxonomy of foods.");
    }
}
