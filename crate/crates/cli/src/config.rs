//! Run settings layered as flags > config file > environment > defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// One settings layer; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Layer {
    pub seed: Option<u64>,
    pub k_context: Option<usize>,
    pub max_retries: Option<usize>,
    pub few_shot: Option<bool>,
    pub nli: Option<bool>,
    pub backtracking: Option<bool>,
    pub parallel: Option<usize>,
    pub cap_factor: Option<usize>,
    pub taxonomy_description: Option<bool>,
    pub llm: LlmLayer,
    pub nli_model: NliLayer,
    pub metric_nli: NliLayer,
    pub embedder: EmbedderLayer,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmLayer {
    pub backend: Option<String>,
    pub url: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<usize>,
    pub replay_dir: Option<PathBuf>,
    pub record_dir: Option<PathBuf>,
    pub oracle_taxonomy: Option<PathBuf>,
    pub oracle_noise: Option<f64>,
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NliLayer {
    pub backend: Option<String>,
    pub url: Option<String>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderLayer {
    pub backend: Option<String>,
    pub dim: Option<usize>,
    pub path: Option<PathBuf>,
    pub url: Option<String>,
}

macro_rules! pick {
    ($dst:expr, $src:expr; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl Layer {
    /// Fields set in `higher` win.
    pub fn overlay(mut self, higher: Layer) -> Layer {
        pick!(self, higher; seed, k_context, max_retries, few_shot, nli, backtracking, parallel, cap_factor, taxonomy_description);
        let l = higher.llm;
        pick!(self.llm, l; backend, url, model, temperature, max_tokens, timeout_secs, retries, replay_dir, record_dir, oracle_taxonomy, oracle_noise, max_in_flight);
        let n = higher.nli_model;
        pick!(self.nli_model, n; backend, url, timeout_secs, retries);
        let m = higher.metric_nli;
        pick!(self.metric_nli, m; backend, url, timeout_secs, retries);
        let e = higher.embedder;
        pick!(self.embedder, e; backend, dim, path, url);
        self
    }

    pub fn from_file(path: &Path) -> Result<Layer> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Reads `TAXOFORGE_*` variables through `get`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Layer> {
        fn parse<T: std::str::FromStr>(get: &impl Fn(&str) -> Option<String>, key: &str) -> Result<Option<T>> {
            match get(key) {
                None => Ok(None),
                Some(v) if v.is_empty() => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| anyhow::anyhow!("environment variable {key}={v:?} is not valid")),
            }
        }
        let text = |k: &str| get(k).filter(|v| !v.is_empty());
        Ok(Layer {
            seed: parse(&get, "TAXOFORGE_SEED")?,
            parallel: parse(&get, "TAXOFORGE_PARALLEL")?,
            llm: LlmLayer {
                backend: text("TAXOFORGE_LLM_BACKEND"),
                url: text("TAXOFORGE_LLM_URL"),
                model: text("TAXOFORGE_LLM_MODEL"),
                replay_dir: text("TAXOFORGE_REPLAY_DIR").map(PathBuf::from),
                ..LlmLayer::default()
            },
            nli_model: NliLayer { backend: text("TAXOFORGE_NLI_BACKEND"), url: text("TAXOFORGE_NLI_URL"), ..NliLayer::default() },
            metric_nli: NliLayer {
                backend: text("TAXOFORGE_METRIC_NLI_BACKEND"),
                url: text("TAXOFORGE_METRIC_NLI_URL"),
                ..NliLayer::default()
            },
            embedder: EmbedderLayer {
                backend: text("TAXOFORGE_EMBED_BACKEND"),
                url: text("TAXOFORGE_EMBED_URL"),
                path: text("TAXOFORGE_EMBED_PATH").map(PathBuf::from),
                ..EmbedderLayer::default()
            },
            ..Layer::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    Http,
    Replay,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliKind {
    Http,
    /// Accepts every pair; for dry runs and oracle experiments.
    Entail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    Ngram,
    WordVectors,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmSettings {
    pub backend: LlmKind,
    pub url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: usize,
    pub replay_dir: Option<PathBuf>,
    pub record_dir: Option<PathBuf>,
    pub oracle_taxonomy: Option<PathBuf>,
    pub oracle_noise: f64,
    pub max_in_flight: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NliSettings {
    pub backend: NliKind,
    pub url: String,
    pub timeout_secs: u64,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedderSettings {
    pub backend: EmbedderKind,
    pub dim: usize,
    pub path: Option<PathBuf>,
    pub url: String,
}

/// Fully resolved settings, recorded in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub k_context: usize,
    pub max_retries: usize,
    pub few_shot: bool,
    pub nli: bool,
    pub backtracking: bool,
    /// Worker threads; 0 means one per core.
    pub parallel: usize,
    pub cap_factor: usize,
    pub taxonomy_description: bool,
    pub llm: LlmSettings,
    pub nli_model: NliSettings,
    pub metric_nli: NliSettings,
    pub embedder: EmbedderSettings,
}

fn llm_kind(s: &str) -> Result<LlmKind> {
    Ok(match s {
        "http" => LlmKind::Http,
        "replay" => LlmKind::Replay,
        "oracle" => LlmKind::Oracle,
        other => bail!("unknown LLM backend `{other}` (expected http, replay or oracle)"),
    })
}

fn nli_kind(s: &str) -> Result<NliKind> {
    Ok(match s {
        "http" => NliKind::Http,
        "entail" => NliKind::Entail,
        other => bail!("unknown NLI backend `{other}` (expected http or entail)"),
    })
}

fn embedder_kind(s: &str) -> Result<EmbedderKind> {
    Ok(match s {
        "ngram" => EmbedderKind::Ngram,
        "word-vectors" => EmbedderKind::WordVectors,
        "http" => EmbedderKind::Http,
        other => bail!("unknown embedder `{other}` (expected ngram, word-vectors or http)"),
    })
}

fn nli_settings(l: NliLayer) -> Result<NliSettings> {
    Ok(NliSettings {
        backend: nli_kind(l.backend.as_deref().unwrap_or("http"))?,
        url: l.url.unwrap_or_default(),
        timeout_secs: l.timeout_secs.unwrap_or(60),
        retries: l.retries.unwrap_or(3),
    })
}

impl RunConfig {
    /// Applies defaults to the merged layer and checks that every
    /// referenced path exists.
    pub fn resolve(layer: Layer) -> Result<RunConfig> {
        let l = layer.llm;
        let llm = LlmSettings {
            backend: llm_kind(l.backend.as_deref().unwrap_or("http"))?,
            url: l.url.unwrap_or_default(),
            model: l.model.unwrap_or_default(),
            temperature: l.temperature.unwrap_or(0.0),
            max_tokens: l.max_tokens.unwrap_or(1024),
            timeout_secs: l.timeout_secs.unwrap_or(120),
            retries: l.retries.unwrap_or(3),
            replay_dir: l.replay_dir,
            record_dir: l.record_dir,
            oracle_taxonomy: l.oracle_taxonomy,
            oracle_noise: l.oracle_noise.unwrap_or(0.0),
            max_in_flight: l.max_in_flight.unwrap_or(8),
        };
        if !(0.0..=1.0).contains(&llm.oracle_noise) {
            bail!("oracle_noise must be within [0, 1], got {}", llm.oracle_noise);
        }
        let e = layer.embedder;
        let embedder = EmbedderSettings {
            backend: embedder_kind(e.backend.as_deref().unwrap_or("ngram"))?,
            dim: e.dim.unwrap_or(256),
            path: e.path,
            url: e.url.unwrap_or_default(),
        };
        let cfg = RunConfig {
            seed: layer.seed.unwrap_or(0),
            k_context: layer.k_context.unwrap_or(taxoforge_core::retrieval::DEFAULT_K),
            max_retries: layer.max_retries.unwrap_or(3),
            few_shot: layer.few_shot.unwrap_or(false),
            nli: layer.nli.unwrap_or(true),
            backtracking: layer.backtracking.unwrap_or(true),
            parallel: layer.parallel.unwrap_or(0),
            cap_factor: layer.cap_factor.unwrap_or(4),
            taxonomy_description: layer.taxonomy_description.unwrap_or(true),
            llm,
            nli_model: nli_settings(layer.nli_model)?,
            metric_nli: nli_settings(layer.metric_nli)?,
            embedder,
        };
        if cfg.k_context == 0 {
            bail!("k_context must be at least 1");
        }
        for (what, p) in [
            ("replay_dir", &cfg.llm.replay_dir),
            ("oracle_taxonomy", &cfg.llm.oracle_taxonomy.as_ref().map(|p| p.with_extension("edges"))),
            ("embedder.path", &cfg.embedder.path),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("{what}: {} does not exist", p.display());
                }
            }
        }
        Ok(cfg)
    }
}
