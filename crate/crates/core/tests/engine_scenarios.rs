mod common;

use std::collections::BTreeSet;

use common::*;
use taxoforge_core::datasets::{leaves_only, split, DatasetBundle, SplitSpec};
use taxoforge_core::engine::{
    complete_all, complete_one, generate, CompletionConfig, GenerationConfig, Mode, Providers, Rule, RunContext, Stage,
};
use taxoforge_core::metrics::score_predictions;
use taxoforge_core::providers::{FixedNli, NliFn, NliScores, OracleBackend};
use taxoforge_core::retrieval::NgramHasher;
use taxoforge_core::{Concept, ConceptId, Placement};

fn entail() -> NliScores {
    NliScores { entailment: 0.9, neutral: 0.05, contradiction: 0.05 }
}
fn neutral() -> NliScores {
    NliScores { entailment: 0.1, neutral: 0.8, contradiction: 0.1 }
}
fn contradict() -> NliScores {
    NliScores { entailment: 0.05, neutral: 0.05, contradiction: 0.9 }
}

fn pl(p: &str, q: &str, c: &str) -> Placement {
    let c = if c == "<leaf>" { ConceptId::pseudo_leaf() } else { id(c) };
    let p = if p == "<root>" { ConceptId::pseudo_root() } else { id(p) };
    Placement::new(p, id(q), c).unwrap()
}

#[test]
fn sweetening_replay_places_sugar_under_flavorer() {
    let seed = sweetening_seed();
    let llm = Scripted::new(vec![
        ("\n\nChild: sweetening", vec![SWEETENING_PARENTS_OUTPUT]),
        ("\n\nParent: sweetening", vec![SWEETENING_CHILDREN_OUTPUT]),
    ]);
    let nli = NliFn(|_p: &str, h: &str| match h {
        "sugar is a sweetening" => entail(),
        h if h.starts_with("sweetening is a ") => neutral(),
        _ => contradict(),
    });
    let emb = NgramHasher::new(256);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let out = complete_one(&sweetening(), &seed, &CompletionConfig::default(), &providers, &RunContext::default()).unwrap();

    let expected: BTreeSet<Placement> =
        [pl("flavorer", "sweetening", "sugar"), pl("condiment", "sweetening", "<leaf>")].into();
    assert_eq!(out.placements, expected);
    assert!(out.violations.is_empty(), "{:?}", out.violations);
    assert_eq!(out.llm_calls, 2);
    assert!(!out.unplaceable);
    let rejected: BTreeSet<&str> =
        out.incidents.iter().filter(|i| i.kind == "nli-rejected").map(|i| i.detail.as_str()).collect();
    assert_eq!(rejected.len(), 14);
    assert!(!rejected.contains("sugar"));

    let prompts = llm.prompts();
    // the child prompt lists children of both parents, never the query
    let child_prompt = &prompts[1];
    let candidates = child_prompt.lines().rev().find(|l| l.starts_with("Candidates: ")).unwrap();
    for c in CONDIMENTS.iter().chain(["sugar", "sassafras"].iter()) {
        assert!(candidates.contains(c), "{c} missing from {candidates}");
    }
    assert!(child_prompt.contains(&format!("Interpretation: {SWEETENING_INTERPRETATION}")));
    assert!(child_prompt.contains("(Non-Leaf)") || child_prompt.contains("(Leaf)"));
    // retrieval context holds k edges at most, none annotated in the parent prompt
    let ctx = prompts[0].rsplit("Context:\n```").next().unwrap().split("```").next().unwrap();
    assert!(ctx.lines().count() <= 20 && !ctx.contains("(Leaf)"));
}

fn honey_seed() -> taxoforge_core::Taxonomy {
    let mut t = taxonomy(&[("food", "sweet"), ("food", "fruit"), ("sweet", "sugar"), ("sweet", "candy"), ("fruit", "apple")], &[]);
    for l in ["food", "sweet", "fruit", "sugar", "candy", "apple"] {
        t.set_description(&id(l), &format!("{l} is a kind of food")).unwrap();
    }
    t
}

fn honey() -> Concept {
    Concept::new("honey").unwrap().with_description("honey is a sweet liquid made by bees")
}

fn parents(list: &str) -> String {
    format!("Reasoning: Let's think step by step in order to place honey.\n\nInterpretation: A sweet food.\n\nParents: {list}")
}

fn children(leaf: &str, list: &str) -> String {
    format!("Reasoning: Let's think step by step in order to choose.\n\nLeaf: {leaf}\n\nChildren: {list}")
}

#[test]
fn completion_root_answer_is_a_violation_then_a_last_resort() {
    let t = honey_seed();
    let p = parents("None");
    let c = children("Yes", "");
    let llm = Scripted::new(vec![("\n\nChild: honey", vec![&p]), ("\n\nParent: honey", vec![&c])]);
    let emb = NgramHasher::new(64);
    let nli = FixedNli::always_entail();
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let out = complete_one(&honey(), &t, &CompletionConfig::default(), &providers, &RunContext::default()).unwrap();
    assert_eq!(out.violations.len(), 4);
    assert!(out.violations.iter().all(|(s, v)| *s == Stage::Parents && v.rule == Rule::NonexistentParent));
    assert_eq!(out.violations[0].1.detail, "None is not a valid parent.");
    assert_eq!(out.placements, [pl("<root>", "honey", "<leaf>")].into());
    let prompts = llm.prompts();
    assert!(prompts[1].contains("Previous Parents: None\n\nInstructions: None is not a valid parent."));
    // the roots of the seed are offered as children of a new top concept
    assert!(prompts.last().unwrap().contains("Candidates: food\n"));
}

#[test]
fn root_answer_in_generation_puts_query_on_top() {
    let t = honey_seed();
    let p = parents("None");
    let c = children("No", "food");
    let llm = Scripted::new(vec![("\n\nChild: honey", vec![&p]), ("\n\nParent: honey", vec![&c])]);
    let emb = NgramHasher::new(64);
    let nli = FixedNli::always_entail();
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let config = CompletionConfig { mode: Mode::Generation, ..CompletionConfig::default() };
    let out = complete_one(&honey(), &t, &config, &providers, &RunContext::default()).unwrap();
    assert!(out.violations.is_empty());
    assert_eq!(out.placements, [pl("<root>", "honey", "food")].into());
}

#[test]
fn backtracking_off_drops_invalid_labels() {
    let t = honey_seed();
    let p = parents("sweet, nectar stuff");
    let c = children("No", "sugar, maple thing");
    let llm = Scripted::new(vec![("\n\nChild: honey", vec![&p]), ("\n\nParent: honey", vec![&c])]);
    let emb = NgramHasher::new(64);
    let nli = FixedNli::always_entail();
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let config = CompletionConfig { backtracking_enabled: false, ..CompletionConfig::default() };
    let out = complete_one(&honey(), &t, &config, &providers, &RunContext::default()).unwrap();
    assert_eq!(out.llm_calls, 2);
    assert_eq!(out.placements, [pl("sweet", "honey", "sugar")].into());
    let rules: Vec<Rule> = out.violations.iter().map(|(_, v)| v.rule).collect();
    assert_eq!(rules, vec![Rule::NonexistentParent, Rule::NonexistentChild]);
}

#[test]
fn nli_disabled_keeps_contradicted_labels() {
    let t = honey_seed();
    let p = parents("fruit");
    let llm = Scripted::new(vec![("\n\nChild: honey", vec![&p]), ("\n\nParent: honey", vec!["Leaf: Yes"])]);
    let emb = NgramHasher::new(64);
    let nli = NliFn(|_: &str, _: &str| contradict());
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let off = CompletionConfig { nli_enabled: false, ..CompletionConfig::default() };
    let out = complete_one(&honey(), &t, &off, &providers, &RunContext::default()).unwrap();
    assert_eq!(out.placements, [pl("fruit", "honey", "<leaf>")].into());
    let on = complete_one(&honey(), &t, &CompletionConfig::default(), &providers, &RunContext::default()).unwrap();
    assert!(on.unplaceable);
    assert!(on.violations.iter().all(|(_, v)| v.rule == Rule::NoVerifiedParent));
}

#[test]
fn unparseable_answers_leave_query_unplaceable() {
    let t = honey_seed();
    let llm = Scripted::new(vec![("\n\nChild: honey", vec!["I cannot answer that."])]);
    let emb = NgramHasher::new(64);
    let nli = FixedNli::always_entail();
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let out = complete_one(&honey(), &t, &CompletionConfig::default(), &providers, &RunContext::default()).unwrap();
    assert!(out.unplaceable);
    assert!(out.placements.is_empty());
    assert_eq!(out.llm_calls, 4);
    assert_eq!(out.incidents.iter().filter(|i| i.kind == "parse-error").count(), 4);
}

fn oracle_run(stem: &str, seed: u64, noise: f64) -> taxoforge_core::metrics::ScoreReport {
    oracle_run_with(stem, seed, noise, &CompletionConfig::default())
}

fn oracle_run_with(stem: &str, seed: u64, noise: f64, config: &CompletionConfig) -> taxoforge_core::metrics::ScoreReport {
    let gold = load_fixture(stem);
    let bundle = split(&gold, &SplitSpec::new(0.8, 0.1, 0.1, seed).unwrap()).unwrap();
    let visible: BTreeSet<ConceptId> = bundle.seed_taxonomy.concept_ids().cloned().collect();
    let llm = OracleBackend::new(gold.clone(), Some(visible)).with_noise(noise, seed);
    let nli = FixedNli::always_entail();
    let emb = NgramHasher::new(128);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let queries: Vec<Concept> = bundle.test_queries.iter().map(|q| q.concept.clone()).collect();
    let outs = complete_all(&queries, &bundle.seed_taxonomy, config, &providers, &RunContext::default()).unwrap();
    let pred = outs.into_iter().map(|o| (o.query, o.placements)).collect();
    score_predictions(&pred, &DatasetBundle::gold_map(&bundle.test_queries), &bundle.seed_taxonomy)
}

#[test]
fn oracle_completion_recovers_gold_positions() {
    for seed in 0..5 {
        let r = oracle_run("tree50", seed, 0.0);
        assert_eq!(r.position_f1, 1.0, "seed {seed}");
        assert_eq!(r.total.wps, 1.0, "seed {seed}");
        assert_eq!(r.total.queries, 5);
    }
}

#[test]
fn oracle_completion_without_nli_recovers_gold_positions() {
    let config = CompletionConfig { nli_enabled: false, ..CompletionConfig::default() };
    for seed in 0..5 {
        assert_eq!(oracle_run_with("tree50", seed, 0.0, &config).position_f1, 1.0, "seed {seed}");
    }
}

#[test]
fn noisy_oracle_keeps_parent_f1_above_position_f1() {
    let mut imperfect = 0;
    for seed in 0..10 {
        let r = oracle_run("tree50", seed, 0.2);
        assert!(r.parent_f1 >= r.position_f1, "seed {seed}: {} < {}", r.parent_f1, r.position_f1);
        if r.position_f1 < 1.0 {
            imperfect += 1;
        }
    }
    assert!(imperfect > 0, "noise never changed an answer");
}

fn oracle_generate(stem: &str) -> (taxoforge_core::Taxonomy, taxoforge_core::engine::GenerationOutcome) {
    let gold = load_fixture(stem);
    let llm = OracleBackend::new(gold.clone(), None);
    let nli = FixedNli::always_entail();
    let emb = NgramHasher::new(128);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let out = generate(&leaves_only(&gold), &GenerationConfig::default(), &providers).unwrap();
    (gold, out)
}

#[test]
fn oracle_generation_rebuilds_binary_trees() {
    for stem in ["binary7", "binary31"] {
        let (gold, out) = oracle_generate(stem);
        assert_eq!(canonical_form(&out.taxonomy), canonical_form(&gold), "{stem}");
        assert_eq!(label_edges(&out.taxonomy), label_edges(&gold), "{stem}");
        assert_eq!(out.generated_count, gold.node_count() - gold.leaves().len());
        assert!(!out.truncated && out.unplaceable.is_empty() && out.rejected_cycles == 0);
    }
}

#[test]
fn always_root_model_yields_flat_taxonomy() {
    let llm = Scripted::new(vec![
        ("\n\nConcepts: ", vec!["Taxonomy Description: Foods."]),
        ("\n\nConcept: ", vec!["Description: a food"]),
        ("\n\nChild: ", vec!["Interpretation: x\n\nParents: None"]),
        ("\n\nParent: ", vec!["Leaf: Yes\n\nChildren:"]),
    ]);
    let nli = FixedNli::always_entail();
    let emb = NgramHasher::new(64);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let known: Vec<Concept> = ["apple", "pear", "plum", "kiwi"].iter().map(|l| Concept::new(l).unwrap()).collect();
    let out = generate(&known, &GenerationConfig::default(), &providers).unwrap();
    assert_eq!(out.taxonomy.node_count(), 4);
    assert_eq!(out.taxonomy.edge_count(), 0);
    assert_eq!(out.taxonomy.roots().len(), 4);
    assert_eq!(out.generated_count, 0);
    assert_eq!(out.inserted_count, 4);
}

fn fruit_llm() -> Scripted {
    Scripted::new(vec![
        ("\n\nConcepts: ", vec!["Taxonomy Description: Fruit."]),
        ("\n\nConcept: fruit", vec!["Description: fruit is the sweet part of a plant"]),
        ("\n\nConcept: ", vec!["Description: a fruit"]),
        ("\n\nChild: apple", vec!["Interpretation: x\n\nParents: fruit"]),
        ("\n\nChild: pear", vec!["Interpretation: x\n\nParents: fruit"]),
        ("\n\nChild: fruit", vec!["Interpretation: x\n\nParents: None"]),
        ("\n\nParent: ", vec!["Leaf: Yes\n\nChildren:"]),
    ])
}

#[test]
fn invented_parent_is_queued_once() {
    let llm = fruit_llm();
    let nli = FixedNli::always_entail();
    let emb = NgramHasher::new(64);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let known: Vec<Concept> = ["apple", "pear"].iter().map(|l| Concept::new(l).unwrap()).collect();
    let out = generate(&known, &GenerationConfig::default(), &providers).unwrap();
    assert_eq!(out.generated_count, 1);
    assert_eq!(out.order, vec![id("apple"), id("pear"), id("fruit")]);
    assert_eq!(
        label_edges(&out.taxonomy),
        [("fruit".to_string(), "apple".to_string()), ("fruit".to_string(), "pear".to_string())].into()
    );
    assert_eq!(
        out.taxonomy.concept(&id("fruit")).unwrap().description.as_deref(),
        Some("fruit is the sweet part of a plant")
    );
    assert_eq!(llm.prompts().iter().filter(|p| p.contains("\n\nChild: fruit")).count(), 1);
}

#[test]
fn generation_cap_truncates_invented_parents() {
    let llm = fruit_llm();
    let nli = FixedNli::always_entail();
    let emb = NgramHasher::new(64);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let known: Vec<Concept> = ["apple", "pear"].iter().map(|l| Concept::new(l).unwrap()).collect();
    let config = GenerationConfig { cap_factor: 0, ..GenerationConfig::default() };
    let out = generate(&known, &config, &providers).unwrap();
    assert!(out.truncated);
    assert_eq!(out.generated_count, 0);
    assert_eq!(out.taxonomy.node_count(), 2);
    assert_eq!(out.taxonomy.edge_count(), 0);
}

#[test]
fn parallel_and_single_thread_completion_agree() {
    let gold = load_fixture("tree50");
    let bundle = split(&gold, &SplitSpec::new(0.6, 0.2, 0.2, 3).unwrap()).unwrap();
    let llm = OracleBackend::new(gold.clone(), None).with_noise(0.3, 1);
    let nli = FixedNli::always_entail();
    let emb = NgramHasher::new(128);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let queries: Vec<Concept> = bundle.test_queries.iter().map(|q| q.concept.clone()).collect();
    let run = || complete_all(&queries, &bundle.seed_taxonomy, &CompletionConfig::default(), &providers, &RunContext::default()).unwrap();
    let many = run();
    let one = taxoforge_core::par::with_threads(1, run);
    assert_eq!(many, one);
}
