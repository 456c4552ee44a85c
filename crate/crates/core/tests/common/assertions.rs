//! The seven output rules, each with an answer that breaks exactly that
//! rule followed by a valid answer.

use taxoforge_core::engine::{complete_one, CompletionConfig, Providers, Rule, RunContext, Stage};
use taxoforge_core::providers::{NliFn, NliScores};
use taxoforge_core::retrieval::NgramHasher;
use taxoforge_core::{Concept, Taxonomy};

use super::{id, taxonomy, Scripted};

pub fn seed() -> Taxonomy {
    let mut t = taxonomy(&[("food", "sweet"), ("food", "fruit"), ("sweet", "sugar"), ("sweet", "candy"), ("fruit", "apple")], &[]);
    for l in ["food", "sweet", "fruit", "sugar", "candy", "apple"] {
        t.set_description(&id(l), &format!("{l} is a kind of food")).unwrap();
    }
    t
}

pub fn honey() -> Concept {
    Concept::new("honey").unwrap().with_description("honey is a sweet liquid made by bees")
}

pub fn nli(_premise: &str, hypothesis: &str) -> NliScores {
    match hypothesis {
        "honey is a fruit" => NliScores { entailment: 0.0, neutral: 0.1, contradiction: 0.9 },
        "sugar is a honey" => NliScores { entailment: 0.8, neutral: 0.1, contradiction: 0.1 },
        _ => NliScores { entailment: 0.2, neutral: 0.7, contradiction: 0.1 },
    }
}

pub fn parents(list: &str) -> String {
    format!("Reasoning: Let's think step by step in order to place honey. Bees make it.\n\nInterpretation: A sweet food.\n\nParents: {list}")
}

pub fn children(list: &str) -> String {
    format!("Reasoning: Let's think step by step in order to choose. Sweet things.\n\nLeaf: No\n\nChildren: {list}")
}

pub struct Case {
    pub stage: Stage,
    pub rule: Rule,
    pub first: String,
    pub detail: &'static str,
}

pub fn cases() -> Vec<Case> {
    vec![
        Case {
            stage: Stage::Parents,
            rule: Rule::SelfRelation,
            first: parents("honey, sweet"),
            detail: "honey cannot be its own parent.",
        },
        Case {
            stage: Stage::Parents,
            rule: Rule::NonexistentParent,
            first: parents("sweet, nectar"),
            detail: "nectar is not a valid parent.",
        },
        Case {
            stage: Stage::Parents,
            rule: Rule::TooLongConcept,
            first: parents("sweet, thick golden syrup made by bees"),
            detail: "thick golden syrup made by bees is too long, concepts must have fewer than six words.",
        },
        Case {
            stage: Stage::Parents,
            rule: Rule::NoVerifiedParent,
            first: parents("fruit"),
            detail: "None of the parents fruit is a supertype of honey according to its description.",
        },
        Case {
            stage: Stage::Children,
            rule: Rule::NonexistentChild,
            first: children("sugar, mead"),
            detail: "mead are not valid children, since they do not exist in the taxonomy.",
        },
        Case {
            stage: Stage::Children,
            rule: Rule::ChildNotInCandidates,
            first: children("sugar, apple"),
            detail: "apple are not valid children, since they are not in the candidates.",
        },
        Case {
            stage: Stage::Children,
            rule: Rule::NoVerifiedChild,
            first: children("candy"),
            detail: "None of the children candy is a subtype of honey according to their descriptions.",
        },
    ]
}

/// Runs one case through `complete_one` and checks the single violation,
/// the final placement and the feedback blocks of the retry prompt.
pub fn check_case(case: &Case) -> Result<(), String> {
    let t = seed();
    let emb = NgramHasher::new(64);
    let nli = NliFn(nli);
    let good_parents = parents("sweet");
    let good_children = children("sugar");
    let (p_answers, c_answers) = match case.stage {
        Stage::Parents => (vec![case.first.as_str(), good_parents.as_str()], vec![good_children.as_str()]),
        Stage::Children => (vec![good_parents.as_str()], vec![case.first.as_str(), good_children.as_str()]),
    };
    let llm = Scripted::new(vec![("\n\nChild: honey", p_answers), ("\n\nParent: honey", c_answers)]);
    let providers = Providers { llm: &llm, nli: &nli, embedder: &emb };
    let out = complete_one(&honey(), &t, &CompletionConfig::default(), &providers, &RunContext::default())
        .map_err(|e| e.to_string())?;

    let ensure = |ok: bool, what: String| if ok { Ok(()) } else { Err(format!("{}: {what}", case.rule)) };
    ensure(out.violations.len() == 1, format!("expected one violation, got {:?}", out.violations))?;
    let (stage, v) = &out.violations[0];
    ensure((*stage, v.rule, v.attempt) == (case.stage, case.rule, 0), format!("got {stage:?} {} at {}", v.rule, v.attempt))?;
    ensure(v.detail == case.detail, format!("message {:?}", v.detail))?;
    let expected = taxoforge_core::Placement::new(id("sweet"), id("honey"), id("sugar")).unwrap();
    ensure(out.placements == [expected].into(), format!("placements {:?}", out.placements))?;

    let prompts = llm.prompts();
    ensure(prompts.len() == 3, format!("{} prompts", prompts.len()))?;
    let retry = match case.stage {
        Stage::Parents => &prompts[1],
        Stage::Children => &prompts[2],
    };
    let (kind, field) = match case.stage {
        Stage::Parents => ("Parents", "Previous Interpretation: A sweet food.\n\n"),
        Stage::Children => ("Children", "Previous Leaf: No\n\n"),
    };
    let answered = case.first.rsplit(&format!("{kind}: ")).next().unwrap();
    ensure(retry.contains("Previous Reasoning: Let's think step by step in order to"), "no previous reasoning".into())?;
    ensure(retry.contains(field), format!("no {field:?}"))?;
    let block = format!("Previous {kind}: {answered}\n\nInstructions: {}\n\n", case.detail);
    ensure(retry.contains(&block), format!("no feedback block {block:?}"))?;
    ensure(retry.contains(&format!("\n\nPrevious {kind}: past {kind}: with errors")), "format section lacks feedback fields".into())?;
    ensure(retry.ends_with("Reasoning: Let's think step by step in order to"), "retry prompt does not end with the trigger".into())
}
