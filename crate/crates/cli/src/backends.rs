//! Construction of the model backends named in a [`RunConfig`].

use std::collections::BTreeSet;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use taxoforge_core::datasets::TaxonomyFiles;
use taxoforge_core::providers::nli::FixedNli;
use taxoforge_core::providers::{
    Bounded, HttpLlm, HttpNli, LlmBackend, LlmConfig, NliBackend, OracleBackend, RecordingBackend, ReplayBackend,
};
use taxoforge_core::retrieval::{fingerprint, CachedEmbedder, EmbeddingProvider, HttpEmbedder, NgramHasher, WordVectors};
use taxoforge_core::ConceptId;

use crate::config::{EmbedderKind, LlmKind, NliKind, NliSettings, RunConfig};

/// Fails fast on settings that cannot work, before any data is read.
pub fn check_llm(cfg: &RunConfig) -> Result<()> {
    match cfg.llm.backend {
        LlmKind::Http if cfg.llm.url.trim().is_empty() => {
            bail!("LLM endpoint is not configured (set llm.url, --llm-url or TAXOFORGE_LLM_URL)")
        }
        LlmKind::Http if cfg.llm.model.trim().is_empty() => {
            bail!("LLM model is not configured (set llm.model, --llm-model or TAXOFORGE_LLM_MODEL)")
        }
        LlmKind::Replay if cfg.llm.replay_dir.is_none() => bail!("the replay backend needs --replay-dir"),
        LlmKind::Oracle if cfg.llm.oracle_taxonomy.is_none() => bail!("the oracle backend needs --oracle-taxonomy"),
        _ => Ok(()),
    }
}

pub fn check_nli(settings: &NliSettings, what: &str) -> Result<()> {
    if settings.backend == NliKind::Http && settings.url.trim().is_empty() {
        bail!("{what} endpoint is not configured");
    }
    Ok(())
}

pub fn check_embedder(cfg: &RunConfig) -> Result<()> {
    match cfg.embedder.backend {
        EmbedderKind::WordVectors if cfg.embedder.path.is_none() => bail!("word-vectors embedder needs a path"),
        EmbedderKind::Http if cfg.embedder.url.trim().is_empty() => bail!("http embedder needs a url"),
        _ => Ok(()),
    }
}

/// `visible` restricts what an oracle may answer with, e.g. to the
/// concepts of a seed taxonomy.
pub fn llm(cfg: &RunConfig, visible: Option<BTreeSet<ConceptId>>) -> Result<Box<dyn LlmBackend>> {
    check_llm(cfg)?;
    let s = &cfg.llm;
    let base: Box<dyn LlmBackend> = match s.backend {
        LlmKind::Http => Box::new(HttpLlm::new(LlmConfig {
            url: s.url.clone(),
            model: s.model.clone(),
            temperature: s.temperature,
            max_tokens: s.max_tokens,
            timeout_secs: s.timeout_secs,
            retries: s.retries,
            ..LlmConfig::default()
        })?),
        LlmKind::Replay => Box::new(ReplayBackend::new(s.replay_dir.clone().expect("checked"))?),
        LlmKind::Oracle => {
            let stem = s.oracle_taxonomy.as_ref().expect("checked");
            let gold = load_stem(stem)?;
            Box::new(OracleBackend::new(gold, visible).with_noise(s.oracle_noise, cfg.seed))
        }
    };
    let base: Box<dyn LlmBackend> = match &s.record_dir {
        Some(dir) => Box::new(RecordingBackend::new(base, dir)?),
        None => base,
    };
    Ok(Box::new(Bounded::new(base, s.max_in_flight.max(1))))
}

pub fn nli(settings: &NliSettings, what: &str) -> Result<Box<dyn NliBackend>> {
    check_nli(settings, what)?;
    Ok(match settings.backend {
        NliKind::Http => Box::new(HttpNli::new(&settings.url, Duration::from_secs(settings.timeout_secs), settings.retries)?),
        NliKind::Entail => Box::new(FixedNli::always_entail()),
    })
}

pub fn embedder(cfg: &RunConfig) -> Result<CachedEmbedder<Box<dyn EmbeddingProvider>>> {
    check_embedder(cfg)?;
    let e = &cfg.embedder;
    let inner: Box<dyn EmbeddingProvider> = match e.backend {
        EmbedderKind::Ngram => Box::new(NgramHasher::new(e.dim)),
        EmbedderKind::WordVectors => Box::new(WordVectors::load(e.path.as_ref().expect("checked"))?),
        EmbedderKind::Http => Box::new(HttpEmbedder::new(&e.url, e.dim, Duration::from_secs(60))),
    };
    Ok(CachedEmbedder::new(inner))
}

/// Short identity of an embedder for manifests.
pub fn embedder_identity<P: EmbeddingProvider + ?Sized>(cfg: &RunConfig, p: &P) -> Result<String> {
    let fp = fingerprint(p, "taxonomy fingerprint probe")?;
    let kind = serde_json::to_value(cfg.embedder.backend)?;
    Ok(format!("{}:{}:{fp:016x}", kind.as_str().unwrap_or("?"), p.dimension()))
}

/// Loads `<stem>.edges` with optional `.labels` and `.desc` next to it. A
/// path ending in `.edges` is accepted as well.
pub fn load_stem(stem: &std::path::Path) -> Result<taxoforge_core::Taxonomy> {
    let files = stem_files(stem);
    files.load().with_context(|| format!("loading taxonomy {}", files.edges.display()))
}

pub fn stem_files(stem: &std::path::Path) -> TaxonomyFiles {
    let stem = if stem.extension().is_some_and(|e| e == "edges") { stem.with_extension("") } else { stem.to_path_buf() };
    let dir = stem.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    let name = stem.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    TaxonomyFiles::in_dir(&dir, &name)
}
