//! Output constraints checked after every parent and child answer. A
//! violated constraint becomes feedback for the next attempt.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::providers::{ChildSelection, ParentProposal};
use crate::taxonomy::{word_count, Concept, ConceptId, Taxonomy};

/// Word count from which a concept label is rejected.
pub const MAX_WORDS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    SelfRelation,
    NonexistentParent,
    NonexistentChild,
    NoVerifiedParent,
    NoVerifiedChild,
    TooLongConcept,
    ChildNotInCandidates,
}

impl Rule {
    pub const ALL: [Rule; 7] = [
        Rule::SelfRelation,
        Rule::NonexistentParent,
        Rule::NonexistentChild,
        Rule::NoVerifiedParent,
        Rule::NoVerifiedChild,
        Rule::TooLongConcept,
        Rule::ChildNotInCandidates,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::SelfRelation => "self-relation",
            Rule::NonexistentParent => "nonexistent-parent",
            Rule::NonexistentChild => "nonexistent-child",
            Rule::NoVerifiedParent => "no-verified-parent",
            Rule::NoVerifiedChild => "no-verified-child",
            Rule::TooLongConcept => "too-long-concept",
            Rule::ChildNotInCandidates => "child-not-in-candidates",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One broken rule; `detail` is the instruction sent back to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionViolation {
    pub rule: Rule,
    pub detail: String,
    pub attempt: usize,
}

/// Result of the label-level checks: the violating labels per rule and the
/// labels that passed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelCheck {
    pub offending: BTreeMap<Rule, Vec<String>>,
    pub valid: Vec<String>,
}

fn is_are(n: usize) -> &'static str {
    if n == 1 {
        "is"
    } else {
        "are"
    }
}

/// Parent labels sorted into violations and valid entries. The `None`
/// answer counts as a nonexistent parent in completion mode.
pub fn check_parent_labels(proposal: &ParentProposal, query: &Concept, taxonomy: &Taxonomy, mode: Mode) -> LabelCheck {
    let mut out = LabelCheck::default();
    if proposal.proposes_root && mode == Mode::Completion {
        out.offending.entry(Rule::NonexistentParent).or_default().push(proposal.parents_field.clone());
    }
    for label in &proposal.parents {
        let id = ConceptId::from_label(label);
        let rule = if id == query.id {
            Some(Rule::SelfRelation)
        } else if word_count(label) >= MAX_WORDS {
            Some(Rule::TooLongConcept)
        } else if mode == Mode::Completion && (id.is_pseudo() || !taxonomy.contains(&id)) {
            Some(Rule::NonexistentParent)
        } else {
            None
        };
        match rule {
            Some(r) => out.offending.entry(r).or_default().push(label.clone()),
            None => out.valid.push(label.clone()),
        }
    }
    out
}

pub fn check_child_labels(
    selection: &ChildSelection,
    query: &Concept,
    taxonomy: &Taxonomy,
    candidates: &BTreeSet<ConceptId>,
) -> LabelCheck {
    let mut out = LabelCheck::default();
    for label in &selection.children {
        let id = ConceptId::from_label(label);
        let rule = if id == query.id {
            Some(Rule::SelfRelation)
        } else if word_count(label) >= MAX_WORDS {
            Some(Rule::TooLongConcept)
        } else if id.is_pseudo() || !taxonomy.contains(&id) {
            Some(Rule::NonexistentChild)
        } else if !candidates.contains(&id) {
            Some(Rule::ChildNotInCandidates)
        } else {
            None
        };
        match rule {
            Some(r) => out.offending.entry(r).or_default().push(label.clone()),
            None => out.valid.push(label.clone()),
        }
    }
    out
}

fn parent_message(rule: Rule, labels: &[String], query: &Concept) -> String {
    let list = labels.join(", ");
    let n = labels.len();
    match rule {
        Rule::SelfRelation => format!("{} cannot be its own parent.", query.label),
        Rule::NonexistentParent if n == 1 => format!("{list} is not a valid parent."),
        Rule::NonexistentParent => format!("{list} are not valid parents."),
        Rule::TooLongConcept => format!("{list} {} too long, concepts must have fewer than six words.", is_are(n)),
        Rule::NoVerifiedParent => {
            format!("None of the parents {list} is a supertype of {} according to its description.", query.label)
        }
        _ => format!("{list} violate {rule}."),
    }
}

fn child_message(rule: Rule, labels: &[String], query: &Concept) -> String {
    let list = labels.join(", ");
    match rule {
        Rule::SelfRelation => format!("{} cannot be its own child.", query.label),
        Rule::NonexistentChild => format!("{list} are not valid children, since they do not exist in the taxonomy."),
        Rule::ChildNotInCandidates => format!("{list} are not valid children, since they are not in the candidates."),
        Rule::TooLongConcept => {
            format!("{list} {} too long, concepts must have fewer than six words.", is_are(labels.len()))
        }
        Rule::NoVerifiedChild => {
            format!("None of the children {list} is a subtype of {} according to their descriptions.", query.label)
        }
        _ => format!("{list} violate {rule}."),
    }
}

/// All parent-side violations. `verified` holds the NLI decision for each
/// valid label that was checked; an empty map means NLI was not run.
pub fn check_parent_assertions(
    proposal: &ParentProposal,
    query: &Concept,
    taxonomy: &Taxonomy,
    mode: Mode,
    verified: &BTreeMap<String, bool>,
    attempt: usize,
) -> (LabelCheck, Vec<AssertionViolation>) {
    let check = check_parent_labels(proposal, query, taxonomy, mode);
    let mut out: Vec<AssertionViolation> = check
        .offending
        .iter()
        .map(|(rule, labels)| AssertionViolation { rule: *rule, detail: parent_message(*rule, labels, query), attempt })
        .collect();
    if !proposal.proposes_root
        && !check.valid.is_empty()
        && !verified.is_empty()
        && check.valid.iter().all(|l| verified.get(l) == Some(&false))
    {
        out.push(AssertionViolation {
            rule: Rule::NoVerifiedParent,
            detail: parent_message(Rule::NoVerifiedParent, &check.valid, query),
            attempt,
        });
    }
    (check, out)
}

pub fn check_child_assertions(
    selection: &ChildSelection,
    query: &Concept,
    taxonomy: &Taxonomy,
    candidates: &BTreeSet<ConceptId>,
    verified: &BTreeMap<String, bool>,
    attempt: usize,
) -> (LabelCheck, Vec<AssertionViolation>) {
    let check = check_child_labels(selection, query, taxonomy, candidates);
    let mut out: Vec<AssertionViolation> = check
        .offending
        .iter()
        .map(|(rule, labels)| AssertionViolation { rule: *rule, detail: child_message(*rule, labels, query), attempt })
        .collect();
    if !selection.is_leaf
        && !check.valid.is_empty()
        && !verified.is_empty()
        && check.valid.iter().all(|l| verified.get(l) == Some(&false))
    {
        out.push(AssertionViolation {
            rule: Rule::NoVerifiedChild,
            detail: child_message(Rule::NoVerifiedChild, &check.valid, query),
            attempt,
        });
    }
    (check, out)
}

/// Feedback instructions for the next attempt.
pub fn instructions(violations: &[AssertionViolation]) -> String {
    violations.iter().map(|v| v.detail.as_str()).collect::<Vec<_>>().join(" ")
}
