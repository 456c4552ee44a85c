//! Subcommand definitions and their implementations.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use taxoforge_core::datasets::{
    format_concepts, format_placements, read_concepts, read_placements, split, write_file, PlacementMap, Query,
    SplitSpec,
};
use taxoforge_core::engine::{
    build_demos, complete_all, fewshot, generate, CompletionConfig, GenerationConfig, Incident, Mode, Providers,
    RunContext,
};
use taxoforge_core::metrics::{
    compare_taxonomies, csc, nliv_both, paired_randomization_test, reference_free::CSC_MAX_PAIRS,
    significance::DEFAULT_RESAMPLES, MetricReport, QueryScore, ScoreReport,
};
use taxoforge_core::{ConceptId, Taxonomy, TaxonomyStats};

use crate::backends;
use crate::config::{EmbedderLayer, Layer, LlmLayer, NliLayer, RunConfig};
use crate::manifest::Manifest;
use crate::usage;

#[derive(Debug, Parser)]
#[command(name = "taxoforge", version, about = "Taxonomy completion and generation with language models")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Seed for splits, samples and resampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Context edges retrieved per query.
    #[arg(long, global = true)]
    pub k_context: Option<usize>,
    #[arg(long, global = true)]
    pub few_shot: bool,
    #[arg(long, global = true)]
    pub no_nli: bool,
    #[arg(long, global = true)]
    pub no_backtracking: bool,
    #[arg(long, global = true)]
    pub max_retries: Option<usize>,
    /// Worker threads for completion; 0 uses every core.
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    /// Generated concepts allowed per known concept.
    #[arg(long, global = true)]
    pub cap_factor: Option<usize>,
    #[arg(long, global = true)]
    pub no_taxonomy_description: bool,

    /// Language model backend: http, replay or oracle.
    #[arg(long, global = true)]
    pub llm: Option<String>,
    #[arg(long, global = true)]
    pub llm_url: Option<String>,
    #[arg(long, global = true)]
    pub llm_model: Option<String>,
    #[arg(long, global = true)]
    pub replay_dir: Option<PathBuf>,
    /// Store every exchange for later replay.
    #[arg(long, global = true)]
    pub record_dir: Option<PathBuf>,
    /// Gold taxonomy the oracle backend answers from.
    #[arg(long, global = true)]
    pub oracle_taxonomy: Option<PathBuf>,
    /// Share of oracle parent answers replaced by a wrong concept.
    #[arg(long, global = true)]
    pub oracle_noise: Option<f64>,
    /// NLI backend used while placing concepts: http or entail.
    #[arg(long, global = true)]
    pub nli_backend: Option<String>,
    #[arg(long, global = true)]
    pub nli_url: Option<String>,
    /// NLI backend used by the NLIV metric.
    #[arg(long, global = true)]
    pub metric_nli_backend: Option<String>,
    #[arg(long, global = true)]
    pub metric_nli_url: Option<String>,
    /// Embedder: ngram, word-vectors or http.
    #[arg(long, global = true)]
    pub embedder: Option<String>,
    #[arg(long, global = true)]
    pub embedder_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub embedder_url: Option<String>,
    #[arg(long, global = true)]
    pub embedder_dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print node, edge, depth, leaf and branching statistics.
    Stats {
        /// Taxonomy stem: `<stem>.edges` plus optional `.labels` and `.desc`.
        taxonomy: PathBuf,
    },
    /// Hold out validation and test concepts and write the seed taxonomy.
    Split {
        taxonomy: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        val: f64,
        #[arg(long, default_value_t = 0.1)]
        test: f64,
    },
    /// Place query concepts into a seed taxonomy.
    Complete {
        #[arg(long)]
        taxonomy: PathBuf,
        /// Concept file: `id<TAB>label<TAB>description` per line.
        #[arg(long)]
        queries: PathBuf,
        /// Concepts whose gold placements feed the few-shot demonstrations.
        #[arg(long, requires = "demo_gold")]
        demo_queries: Option<PathBuf>,
        #[arg(long, requires = "demo_queries")]
        demo_gold: Option<PathBuf>,
    },
    /// Build a taxonomy from a list of known concepts.
    Generate {
        #[arg(long)]
        concepts: PathBuf,
    },
    /// Score predictions or a generated taxonomy.
    Evaluate {
        /// Placement file from `complete`.
        #[arg(long, requires_all = ["gold", "taxonomy"])]
        predicted: Option<PathBuf>,
        /// Gold placement file.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Seed taxonomy the placements refer to.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Taxonomy stem from `generate`.
        #[arg(long, conflicts_with = "predicted")]
        generated: Option<PathBuf>,
        #[arg(long, requires = "generated")]
        gold_taxonomy: Option<PathBuf>,
        /// Also compute CSC and NLIV on the evaluated taxonomy.
        #[arg(long)]
        reference_free: bool,
        /// Competing placement file (or taxonomy stem with --generated)
        /// for the paired randomization test.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
    },
}

impl GlobalArgs {
    fn layer(&self) -> Layer {
        let flag = |b: bool| b.then_some(false);
        Layer {
            seed: self.seed,
            k_context: self.k_context,
            max_retries: self.max_retries,
            few_shot: self.few_shot.then_some(true),
            nli: flag(self.no_nli),
            backtracking: flag(self.no_backtracking),
            parallel: self.parallel,
            cap_factor: self.cap_factor,
            taxonomy_description: flag(self.no_taxonomy_description),
            llm: LlmLayer {
                backend: self.llm.clone(),
                url: self.llm_url.clone(),
                model: self.llm_model.clone(),
                replay_dir: self.replay_dir.clone(),
                record_dir: self.record_dir.clone(),
                oracle_taxonomy: self.oracle_taxonomy.clone(),
                oracle_noise: self.oracle_noise,
                ..LlmLayer::default()
            },
            nli_model: NliLayer { backend: self.nli_backend.clone(), url: self.nli_url.clone(), ..NliLayer::default() },
            metric_nli: NliLayer {
                backend: self.metric_nli_backend.clone(),
                url: self.metric_nli_url.clone(),
                ..NliLayer::default()
            },
            embedder: EmbedderLayer {
                backend: self.embedder.clone(),
                dim: self.embedder_dim,
                path: self.embedder_path.clone(),
                url: self.embedder_url.clone(),
            },
        }
    }

    /// defaults < environment < config file < flags
    pub fn resolve(&self) -> Result<RunConfig> {
        let env = Layer::from_env(|k| std::env::var(k).ok()).map_err(|e| usage(format!("{e:#}")))?;
        let mut layer = Layer::default().overlay(env);
        if let Some(path) = &self.config {
            layer = layer.overlay(Layer::from_file(path).map_err(|e| usage(format!("{e:#}")))?);
        }
        RunConfig::resolve(layer.overlay(self.layer())).map_err(|e| usage(format!("{e:#}")))
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self.out.as_deref().ok_or_else(|| usage("this command needs --out DIR"))?;
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = cli.global.resolve()?;
    let g = &cli.global;
    match &cli.command {
        Command::Stats { taxonomy } => cmd_stats(g, &cfg, taxonomy),
        Command::Split { taxonomy, train, val, test } => cmd_split(g, &cfg, taxonomy, *train, *val, *test),
        Command::Complete { taxonomy, queries, demo_queries, demo_gold } => {
            let demos = demo_queries.as_deref().zip(demo_gold.as_deref());
            cmd_complete(g, &cfg, taxonomy, queries, demos)
        }
        Command::Generate { concepts } => cmd_generate(g, cfg, concepts),
        Command::Evaluate { predicted, gold, taxonomy, generated, gold_taxonomy, reference_free, baseline, resamples } => {
            let target = match (predicted, generated) {
                (Some(p), None) => Target::Placements {
                    predicted: p.clone(),
                    gold: gold.clone().expect("required by clap"),
                    taxonomy: taxonomy.clone().expect("required by clap"),
                },
                (None, Some(t)) => Target::Generated { generated: t.clone(), gold: gold_taxonomy.clone() },
                (None, None) => match taxonomy {
                    Some(t) if *reference_free => Target::Taxonomy(t.clone()),
                    _ => return Err(usage("evaluate needs --predicted, --generated or --taxonomy with --reference-free")),
                },
                (Some(_), Some(_)) => unreachable!("rejected by clap"),
            };
            cmd_evaluate(g, &cfg, target, *reference_free, baseline.as_deref(), *resamples)
        }
    }
}

fn stats_tsv(s: &TaxonomyStats) -> String {
    format!(
        "nodes\tedges\tdepth\tleaves\tleaf_ratio\tbranching\n{}\t{}\t{}\t{}\t{:.4}\t{:.2}\n",
        s.node_count, s.edge_count, s.depth, s.leaf_count, s.leaf_ratio, s.branching_factor
    )
}

fn cmd_stats(g: &GlobalArgs, cfg: &RunConfig, stem: &Path) -> Result<()> {
    let taxonomy = backends::load_stem(stem)?;
    if taxonomy.node_count() == 0 {
        eprintln!("warning: {} holds no concepts", backends::stem_files(stem).edges.display());
    }
    let stats = taxonomy.stats();
    let table = stats_tsv(&stats);
    print!("{table}");
    if g.out.is_some() {
        let dir = g.out_dir()?;
        write_file(&dir.join("stats.tsv"), &table)?;
        let mut m = Manifest::new("stats", cfg);
        m.input("taxonomy", &backends::stem_files(stem).edges)?;
        m.summary("stats", stats);
        m.write(dir, &["stats.tsv"])?;
    }
    Ok(())
}

fn cmd_split(g: &GlobalArgs, cfg: &RunConfig, stem: &Path, train: f64, val: f64, test: f64) -> Result<()> {
    let spec = SplitSpec::new(train, val, test, cfg.seed).map_err(|e| usage(e.to_string()))?;
    let dir = g.out_dir()?;
    let taxonomy = backends::load_stem(stem)?;
    let bundle = split(&taxonomy, &spec)?;

    backends::stem_files(&dir.join("seed")).save(&bundle.seed_taxonomy)?;
    backends::stem_files(&dir.join("validation")).save(&bundle.validation_taxonomy)?;
    for (name, queries) in [("val", &bundle.val_queries), ("test", &bundle.test_queries)] {
        write_file(&dir.join(format!("{name}.queries")), &format_concepts(queries.iter().map(|q| &q.concept)))?;
        write_file(&dir.join(format!("{name}.gold")), &format_placements(queries.iter().flat_map(|q| &q.gold)))?;
    }
    let (n_seed, n_val, n_test) =
        (bundle.seed_taxonomy.node_count(), bundle.val_queries.len(), bundle.test_queries.len());
    println!("seed\t{n_seed}\nval\t{n_val}\ntest\t{n_test}");

    let mut m = Manifest::new("split", cfg);
    m.input("taxonomy", &backends::stem_files(stem).edges)?;
    m.summary("fractions", [train, val, test]);
    m.summary("seed_nodes", n_seed);
    m.summary("val_queries", n_val);
    m.summary("test_queries", n_test);
    m.summary(
        "unscoreable",
        bundle.val_queries.iter().chain(&bundle.test_queries).filter(|q| !q.is_scoreable()).count(),
    );
    m.write(
        dir,
        &[
            "seed.edges",
            "seed.labels",
            "seed.desc",
            "validation.edges",
            "validation.labels",
            "validation.desc",
            "val.queries",
            "val.gold",
            "test.queries",
            "test.gold",
        ],
    )
}

fn completion_config(cfg: &RunConfig, mode: Mode) -> CompletionConfig {
    CompletionConfig {
        mode,
        k_context: cfg.k_context,
        max_retries: cfg.max_retries,
        few_shot: cfg.few_shot,
        nli_enabled: cfg.nli,
        backtracking_enabled: cfg.backtracking,
    }
}

fn incidents_tsv(incidents: &[Incident]) -> String {
    let mut out = String::from("query\tstage\tattempt\tkind\tdetail\n");
    for i in incidents {
        let detail = i.detail.replace(['\t', '\n'], " ");
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", i.query, i.stage.as_str(), i.attempt, i.kind, detail));
    }
    out
}

fn demo_queries(concepts: &Path, gold: &Path) -> Result<Vec<Query>> {
    let gold = read_placements(gold)?;
    Ok(read_concepts(concepts)?
        .into_iter()
        .map(|c| {
            let g = gold.get(&c.id).cloned().unwrap_or_default();
            Query { concept: c, gold: g }
        })
        .collect())
}

fn cmd_complete(
    g: &GlobalArgs,
    cfg: &RunConfig,
    stem: &Path,
    queries_path: &Path,
    demos: Option<(&Path, &Path)>,
) -> Result<()> {
    // settings are checked before any input is read
    backends::check_llm(cfg).map_err(|e| usage(format!("{e:#}")))?;
    if cfg.nli {
        backends::check_nli(&cfg.nli_model, "NLI").map_err(|e| usage(format!("{e:#}")))?;
    }
    backends::check_embedder(cfg).map_err(|e| usage(format!("{e:#}")))?;
    let dir = g.out_dir()?;

    let taxonomy = backends::load_stem(stem)?;
    let queries = read_concepts(queries_path)?;
    let visible: BTreeSet<ConceptId> = taxonomy.concept_ids().cloned().collect();
    let llm = backends::llm(cfg, Some(visible))?;
    let nli = backends::nli(&cfg.nli_model, "NLI")?;
    let embedder = backends::embedder(cfg)?;
    let providers = Providers { llm: llm.as_ref(), nli: nli.as_ref(), embedder: &embedder };

    let mut run = RunContext::default();
    if cfg.few_shot {
        let Some((dq, dg)) = demos else {
            return Err(usage("--few-shot needs --demo-queries and --demo-gold"));
        };
        let (p, c) = build_demos(&taxonomy, &demo_queries(dq, dg)?, &embedder, fewshot::DEMO_COUNT, cfg.seed)?;
        run.parent_demos = p;
        run.child_demos = c;
    }
    let config = completion_config(cfg, Mode::Completion);
    let outcomes = taxoforge_core::par::with_threads(cfg.parallel, || {
        complete_all(&queries, &taxonomy, &config, &providers, &run)
    })?;

    let placements = format_placements(outcomes.iter().flat_map(|o| &o.placements));
    let incidents: Vec<Incident> = outcomes.iter().flat_map(|o| o.incidents.iter().cloned()).collect();
    write_file(&dir.join("placements.tsv"), &placements)?;
    write_file(&dir.join("violations.tsv"), &incidents_tsv(&incidents))?;

    let unplaceable: Vec<&ConceptId> = outcomes.iter().filter(|o| o.unplaceable).map(|o| &o.query).collect();
    let mut m = Manifest::new("complete", cfg);
    m.input("taxonomy", &backends::stem_files(stem).edges)?;
    m.input("queries", queries_path)?;
    if let Some((dq, dg)) = demos {
        m.input("demo_queries", dq)?;
        m.input("demo_gold", dg)?;
    }
    m.backends.insert("embedder".into(), backends::embedder_identity(cfg, &embedder)?);
    m.summary("queries", queries.len());
    m.summary("placements", outcomes.iter().map(|o| o.placements.len()).sum::<usize>());
    m.summary("violations", outcomes.iter().map(|o| o.violations.len()).sum::<usize>());
    m.summary("incidents", incidents.len());
    m.summary("unplaceable", unplaceable);
    m.summary("llm_calls", outcomes.iter().map(|o| o.llm_calls).sum::<usize>());
    m.write(dir, &["placements.tsv", "violations.tsv"])?;
    println!("{} placements for {} queries written to {}", outcomes.iter().map(|o| o.placements.len()).sum::<usize>(), queries.len(), dir.display());
    Ok(())
}

fn cmd_generate(g: &GlobalArgs, mut cfg: RunConfig, concepts_path: &Path) -> Result<()> {
    // insertion order matters, so generation always runs on one worker
    cfg.parallel = 1;
    backends::check_llm(&cfg).map_err(|e| usage(format!("{e:#}")))?;
    if cfg.nli {
        backends::check_nli(&cfg.nli_model, "NLI").map_err(|e| usage(format!("{e:#}")))?;
    }
    backends::check_embedder(&cfg).map_err(|e| usage(format!("{e:#}")))?;
    let dir = g.out_dir()?;

    let known = read_concepts(concepts_path)?;
    if known.is_empty() {
        bail!("{} lists no concepts", concepts_path.display());
    }
    let llm = backends::llm(&cfg, None)?;
    let nli = backends::nli(&cfg.nli_model, "NLI")?;
    let embedder = backends::embedder(&cfg)?;
    let providers = Providers { llm: llm.as_ref(), nli: nli.as_ref(), embedder: &embedder };
    let config = GenerationConfig {
        completion: completion_config(&cfg, Mode::Generation),
        cap_factor: cfg.cap_factor,
        taxonomy_description: cfg.taxonomy_description,
        describe_missing: true,
        seed: cfg.seed,
    };
    let outcome = taxoforge_core::par::with_threads(1, || generate(&known, &config, &providers))?;

    backends::stem_files(&dir.join("generated")).save(&outcome.taxonomy)?;
    write_file(&dir.join("incidents.tsv"), &incidents_tsv(&outcome.incidents))?;
    let mut m = Manifest::new("generate", &cfg);
    m.input("concepts", concepts_path)?;
    m.backends.insert("embedder".into(), backends::embedder_identity(&cfg, &embedder)?);
    m.summary("known", known.len());
    m.summary("inserted", outcome.inserted_count);
    m.summary("generated", outcome.generated_count);
    m.summary("rejected_cycles", outcome.rejected_cycles);
    m.summary("unplaceable", &outcome.unplaceable);
    m.summary("truncated", outcome.truncated);
    m.summary("taxonomy_description", &outcome.taxonomy_description);
    m.summary("llm_calls", outcome.llm_calls);
    m.summary("stats", outcome.taxonomy.stats());
    m.write(dir, &["generated.edges", "generated.labels", "generated.desc", "incidents.tsv"])?;
    if outcome.truncated {
        eprintln!("warning: generation cap reached, some invented parents were dropped");
    }
    println!(
        "{} concepts, {} edges written to {}",
        outcome.taxonomy.node_count(),
        outcome.taxonomy.edge_count(),
        dir.display()
    );
    Ok(())
}

pub enum Target {
    Placements { predicted: PathBuf, gold: PathBuf, taxonomy: PathBuf },
    Generated { generated: PathBuf, gold: Option<PathBuf> },
    Taxonomy(PathBuf),
}

fn query_f1(s: &QueryScore) -> f64 {
    let p = if s.tp + s.fp == 0 { 0.0 } else { s.tp as f64 / (s.tp + s.fp) as f64 };
    let r = if s.tp + s.fn_ == 0 { 0.0 } else { s.tp as f64 / (s.tp + s.fn_) as f64 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// p-values for per-query WPS and F1 of `a` against `b`, paired by query.
fn compare_reports(a: &ScoreReport, b: &ScoreReport, resamples: usize, seed: u64) -> Result<Vec<(String, f64)>> {
    let ids = |r: &ScoreReport| r.per_query.iter().map(|q| q.query.clone()).collect::<Vec<_>>();
    if ids(a) != ids(b) {
        bail!("prediction and baseline are scored on different query sets");
    }
    let mut out = Vec::new();
    for (name, f) in [("wps", (|s: &QueryScore| s.wps) as fn(&QueryScore) -> f64), ("f1", query_f1)] {
        let xa: Vec<f64> = a.per_query.iter().map(f).collect();
        let xb: Vec<f64> = b.per_query.iter().map(f).collect();
        out.push((name.to_string(), paired_randomization_test(&xa, &xb, resamples, seed)?));
    }
    Ok(out)
}

fn score_files(predicted: &Path, gold: &PlacementMap, taxonomy: &Taxonomy) -> Result<ScoreReport> {
    let predicted = read_placements(predicted)?;
    Ok(taxoforge_core::metrics::score_predictions(&predicted, gold, taxonomy))
}

fn cmd_evaluate(
    g: &GlobalArgs,
    cfg: &RunConfig,
    target: Target,
    reference_free: bool,
    baseline: Option<&Path>,
    resamples: usize,
) -> Result<()> {
    if reference_free {
        backends::check_nli(&cfg.metric_nli, "metric NLI").map_err(|e| usage(format!("{e:#}")))?;
        backends::check_embedder(cfg).map_err(|e| usage(format!("{e:#}")))?;
    }
    let mut report = MetricReport::default();
    let mut m = Manifest::new("evaluate", cfg);
    let evaluated: Option<Taxonomy> = match &target {
        Target::Placements { predicted, gold, taxonomy } => {
            let seed = backends::load_stem(taxonomy)?;
            let gold_map = read_placements(gold)?;
            let scores = score_files(predicted, &gold_map, &seed)?;
            if let Some(b) = baseline {
                m.input("baseline", b)?;
                let base = score_files(b, &gold_map, &seed)?;
                report.p_values = compare_reports(&scores, &base, resamples, cfg.seed)?;
            }
            report.gold = Some(scores);
            m.input("predicted", predicted)?;
            m.input("gold", gold)?;
            m.input("taxonomy", &backends::stem_files(taxonomy).edges)?;
            Some(seed)
        }
        Target::Generated { generated, gold } => {
            let gen = backends::load_stem(generated)?;
            m.input("generated", &backends::stem_files(generated).edges)?;
            if let Some(gold) = gold {
                let gold_tax = backends::load_stem(gold)?;
                m.input("gold_taxonomy", &backends::stem_files(gold).edges)?;
                let scores = compare_taxonomies(&gen, &gold_tax);
                if let Some(b) = baseline {
                    m.input("baseline", &backends::stem_files(b).edges)?;
                    let base = compare_taxonomies(&backends::load_stem(b)?, &gold_tax);
                    report.p_values = compare_reports(&scores, &base, resamples, cfg.seed)?;
                }
                report.gold = Some(scores);
            } else if baseline.is_some() {
                return Err(usage("--baseline needs --gold-taxonomy"));
            } else if !reference_free {
                return Err(usage("nothing to evaluate: pass --gold-taxonomy or --reference-free"));
            }
            Some(gen)
        }
        Target::Taxonomy(stem) => {
            m.input("taxonomy", &backends::stem_files(stem).edges)?;
            Some(backends::load_stem(stem)?)
        }
    };

    if reference_free {
        let taxonomy = evaluated.expect("every target yields a taxonomy");
        let nli = backends::nli(&cfg.metric_nli, "metric NLI")?;
        let embedder = backends::embedder(cfg)?;
        let (w, s) =
            taxoforge_core::par::with_threads(cfg.parallel, || nliv_both(&taxonomy, nli.as_ref()))?;
        report.nliv_weak = Some(w);
        report.nliv_strong = Some(s);
        report.csc = Some(taxoforge_core::par::with_threads(cfg.parallel, || {
            csc(&taxonomy, &embedder, CSC_MAX_PAIRS, cfg.seed)
        })?);
        m.backends.insert("embedder".into(), backends::embedder_identity(cfg, &embedder)?);
    }

    let table = report.to_table();
    print!("{table}");
    if g.out.is_some() {
        let dir = g.out_dir()?;
        write_file(&dir.join("report.tsv"), &report.to_tsv())?;
        write_file(&dir.join("report.txt"), &table)?;
        m.summary("resamples", resamples);
        m.summary("metrics", report.rows().into_iter().map(|(n, s, v)| format!("{n}/{s}={v}")).collect::<Vec<_>>());
        m.write(dir, &["report.tsv", "report.txt"])?;
    }
    Ok(())
}

