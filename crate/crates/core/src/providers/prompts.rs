//! Fielded chain-of-thought prompt templates.
//!
//! Every prompt has the same layout: instruction lines, `---`, the input
//! field descriptions, `---`, the output format, `---`, optional worked
//! demonstrations each followed by `---`, and finally the filled input
//! fields and the reasoning trigger.

use crate::retrieval::EdgeContext;
use crate::taxonomy::Concept;

pub const COT_TRIGGER: &str = "Reasoning: Let's think step by step in order to";

const SEP: &str = "\n\n---\n\n";

const PARENT_INSTRUCTIONS: &str = "Which are the most specific parent concepts of the given child concept in a taxonomy considering the context?
In your reasoning, state how the parent concepts are a supertype of the child concept.
Do not add additional comments or information, only return the output in the described format.";

const CHILD_INSTRUCTIONS: &str = "Which of the candidates are child concepts (subtypes) of the given parent concept (supertype) in a taxonomy?
The context shows existing parent and child concepts and whether the children are leaves.
In your reasoning, state how the parent concept is a supertype of the selected child concepts.
Do not add additional comments or information, only return the output in the described format.";

const DESCRIBE_INSTRUCTIONS: &str = "Describe the given concept in one to three sentences.
Begin the description with the concept itself and state what kind of thing it is.
Do not add additional comments or information, only return the output in the described format.";

const TAXONOMY_INSTRUCTIONS: &str = "Given a sample of concepts, describe what a taxonomy containing them could look like.
State the likely topic of the taxonomy and its rough structure of categories.
Do not add additional comments or information, only return the output in the described format.";

const CONTEXT_DESC: &str = "List of existing parent-child (supertype-subtype) relations in the taxonomy.";
const TAXONOMY_DESC: &str = "Description of the taxonomy";
const INSTRUCTIONS_DESC: &str = "Some instructions you must satisfy";

const INTERPRETATION_OUT: &str =
    "Description of the child concept in relation to the context taxonomy. Infer what is meant by the child concept from the context.";
const PARENTS_OUT_COMPLETION: &str = "Comma separated list of one or more parents of the child concept. Valid parents are in the context. If there are no suitable parents, return None.";
const PARENTS_OUT_GENERATION: &str = "Comma separated list of one or more parents (supertypes) of the child concept. A parent concept must be a more general type of the child concept. If there are no suitable existing parents, invent them.";
const LEAF_OUT: &str =
    "Whether the parent concept should be added as a leaf (has no children). Answer with Yes or No.";
const CHILDREN_OUT: &str = "Comma separated list of candidates that are children of the parent concept in a taxonomy.A child concept must be a type of the parent concept.Separate with commas.";

/// Whether parents must already exist (completion) or may be invented
/// (generation, usually with a taxonomy description).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode<'a> {
    Completion,
    Generation { taxonomy_description: Option<&'a str> },
}

/// The previous parent answer plus violation instructions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParentFeedback {
    pub reasoning: String,
    pub interpretation: String,
    pub parents: String,
    pub instructions: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChildFeedback {
    pub reasoning: String,
    pub leaf: String,
    pub children: String,
    pub instructions: String,
}

/// A solved parent example shown before the query.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentDemo {
    pub context: Vec<String>,
    pub child: String,
    pub description: String,
    pub reasoning: String,
    pub interpretation: String,
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChildDemo {
    pub context: Vec<String>,
    pub candidates: Vec<String>,
    pub parent: String,
    pub description: String,
    pub interpretation: String,
    pub reasoning: String,
    pub leaf: bool,
    pub children: Vec<String>,
}

struct Template<'a> {
    instructions: &'a str,
    inputs: Vec<(&'a str, &'a str)>,
    task: &'a str,
    outputs: Vec<(&'a str, &'a str)>,
}

impl Template<'_> {
    fn render(&self, demos: &[String], filled: &[(&str, String)]) -> String {
        let mut s = String::from(self.instructions);
        s.push_str(SEP);
        s.push_str("Input description.");
        for (name, desc) in &self.inputs {
            s.push_str(&format!("\n\n{name}: {desc}"));
        }
        s.push_str(SEP);
        s.push_str("Follow the following format.\n\n");
        s.push_str(&format!("{COT_TRIGGER} ${{{}}}. We ...", self.task));
        for (name, desc) in &self.outputs {
            s.push_str(&format!("\n\n{name}: {desc}"));
        }
        s.push_str(SEP);
        for d in demos {
            s.push_str(d);
            s.push_str(SEP);
        }
        for (name, value) in filled {
            s.push_str(&field(name, value));
            s.push_str("\n\n");
        }
        s.push_str(COT_TRIGGER);
        s
    }
}

fn field(name: &str, value: &str) -> String {
    if value.starts_with("```") || value.is_empty() {
        format!("{name}:{}{value}", if value.is_empty() { "" } else { "\n" })
    } else {
        format!("{name}: {value}")
    }
}

/// Context block as fenced lines; an empty context is an empty fence.
pub fn render_context(lines: &[String]) -> String {
    if lines.is_empty() {
        "```\n```".to_string()
    } else {
        format!("```{}```", lines.join("\n"))
    }
}

/// Description field value: the description, or the label when missing.
pub fn description_text(concept: &Concept) -> String {
    concept.description.clone().unwrap_or_else(|| concept.label.clone())
}

fn parent_template(mode: PromptMode<'_>, feedback: bool) -> Template<'static> {
    let mut inputs = vec![
        ("Context", CONTEXT_DESC),
        ("Child", "Child concept (subtype) that you need to place in a taxonomy."),
        ("Description", "Description of the child concept."),
    ];
    if matches!(mode, PromptMode::Generation { taxonomy_description: Some(_) }) {
        inputs.push(("Taxonomy Description", TAXONOMY_DESC));
    }
    if feedback {
        inputs.extend([
            ("Previous Reasoning", "past Reasoning: with errors"),
            ("Previous Interpretation", "past Interpretation: with errors"),
            ("Previous Parents", "past Parents: with errors"),
            ("Instructions", INSTRUCTIONS_DESC),
        ]);
    }
    let parents = match mode {
        PromptMode::Completion => PARENTS_OUT_COMPLETION,
        PromptMode::Generation { .. } => PARENTS_OUT_GENERATION,
    };
    Template {
        instructions: PARENT_INSTRUCTIONS,
        inputs,
        task: "produce the parents",
        outputs: vec![("Interpretation", INTERPRETATION_OUT), ("Parents", parents)],
    }
}

fn child_template(taxonomy_description: bool, feedback: bool) -> Template<'static> {
    let mut inputs = vec![
        ("Context", CONTEXT_DESC),
        ("Candidates", "Candidate children of the concept separated by commas to select from."),
        ("Parent", "Parent concept that you need to place in a taxonomy."),
        ("Description", "Description of the parent concept."),
        ("Interpretation", "Description of the child concept in relation to the taxonomy."),
    ];
    if taxonomy_description {
        inputs.push(("Taxonomy Description", TAXONOMY_DESC));
    }
    if feedback {
        inputs.extend([
            ("Previous Reasoning", "past Reasoning: with errors"),
            ("Previous Leaf", "past Leaf: with errors"),
            ("Previous Children", "past Children: with errors"),
            ("Instructions", INSTRUCTIONS_DESC),
        ]);
    }
    Template {
        instructions: CHILD_INSTRUCTIONS,
        inputs,
        task: "produce the children",
        outputs: vec![("Leaf", LEAF_OUT), ("Children", CHILDREN_OUT)],
    }
}

fn join_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "None".to_string()
    } else {
        items.join(", ")
    }
}

fn render_parent_demo(d: &ParentDemo) -> String {
    [
        field("Context", &render_context(&d.context)),
        field("Child", &d.child),
        field("Description", &d.description),
        format!("{COT_TRIGGER} {}", d.reasoning),
        field("Interpretation", &d.interpretation),
        field("Parents", &join_or_none(&d.parents)),
    ]
    .join("\n\n")
}

fn render_child_demo(d: &ChildDemo) -> String {
    [
        field("Context", &render_context(&d.context)),
        field("Candidates", &d.candidates.join(", ")),
        field("Parent", &d.parent),
        field("Description", &d.description),
        field("Interpretation", &d.interpretation),
        format!("{COT_TRIGGER} {}", d.reasoning),
        field("Leaf", if d.leaf { "Yes" } else { "No" }),
        field("Children", &d.children.join(", ")),
    ]
    .join("\n\n")
}

pub fn render_parent_prompt(
    context: &EdgeContext,
    query: &Concept,
    mode: PromptMode<'_>,
    feedback: Option<&ParentFeedback>,
    demos: &[ParentDemo],
) -> String {
    let mut filled = vec![
        ("Context", render_context(&context.lines)),
        ("Child", query.label.clone()),
        ("Description", description_text(query)),
    ];
    if let PromptMode::Generation { taxonomy_description: Some(taxonomy_description) } = mode {
        filled.push(("Taxonomy Description", taxonomy_description.to_string()));
    }
    if let Some(f) = feedback {
        filled.extend([
            ("Previous Reasoning", f.reasoning.clone()),
            ("Previous Interpretation", f.interpretation.clone()),
            ("Previous Parents", f.parents.clone()),
            ("Instructions", f.instructions.clone()),
        ]);
    }
    let demos: Vec<String> = demos.iter().map(render_parent_demo).collect();
    parent_template(mode, feedback.is_some()).render(&demos, &filled)
}

/// `context` should be rendered with leaf annotations. The query plays the
/// parent role here.
pub fn render_child_prompt(
    context: &EdgeContext,
    candidates: &[String],
    query: &Concept,
    interpretation: &str,
    taxonomy_description: Option<&str>,
    feedback: Option<&ChildFeedback>,
    demos: &[ChildDemo],
) -> String {
    let mut filled = vec![
        ("Context", render_context(&context.lines)),
        ("Candidates", candidates.join(", ")),
        ("Parent", query.label.clone()),
        ("Description", description_text(query)),
        ("Interpretation", interpretation.to_string()),
    ];
    if let Some(t) = taxonomy_description {
        filled.push(("Taxonomy Description", t.to_string()));
    }
    if let Some(f) = feedback {
        filled.extend([
            ("Previous Reasoning", f.reasoning.clone()),
            ("Previous Leaf", f.leaf.clone()),
            ("Previous Children", f.children.clone()),
            ("Instructions", f.instructions.clone()),
        ]);
    }
    let demos: Vec<String> = demos.iter().map(render_child_demo).collect();
    child_template(taxonomy_description.is_some(), feedback.is_some()).render(&demos, &filled)
}

pub fn render_describe_prompt(label: &str) -> String {
    Template {
        instructions: DESCRIBE_INSTRUCTIONS,
        inputs: vec![("Concept", "Concept that needs a description.")],
        task: "produce the description",
        outputs: vec![("Description", "One to three sentences describing the concept, starting with the concept.")],
    }
    .render(&[], &[("Concept", label.to_string())])
}

pub fn render_taxonomy_description_prompt(labels: &[String]) -> String {
    Template {
        instructions: TAXONOMY_INSTRUCTIONS,
        inputs: vec![("Concepts", "Comma separated sample of concepts that belong to the taxonomy.")],
        task: "produce the taxonomy description",
        outputs: vec![(
            "Taxonomy Description",
            "A paragraph describing the topic and the rough structure of the taxonomy.",
        )],
    }
    .render(&[], &[("Concepts", labels.join(", "))])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweetening() -> Concept {
        Concept::new("sweetening").unwrap().with_description("sweetening is something added to foods to make them taste sweeter")
    }

    #[test]
    fn every_prompt_ends_with_trigger() {
        let ctx = EdgeContext::from_lines(["liqueur, sambuca"]);
        let q = sweetening();
        let fb = ParentFeedback { parents: "None".into(), instructions: "None is not a valid parent.".into(), ..Default::default() };
        let prompts = [
            render_parent_prompt(&ctx, &q, PromptMode::Completion, None, &[]),
            render_parent_prompt(&ctx, &q, PromptMode::Generation { taxonomy_description: Some("food") }, Some(&fb), &[]),
            render_child_prompt(&ctx, &["salsa".into()], &q, "x", None, None, &[]),
            render_describe_prompt("sweetening"),
            render_taxonomy_description_prompt(&["a".into(), "b".into()]),
        ];
        for p in prompts {
            assert!(p.ends_with(COT_TRIGGER), "{p}");
        }
    }

    #[test]
    fn generation_mode_adds_taxonomy_description() {
        let ctx = EdgeContext::default();
        let p = render_parent_prompt(&ctx, &sweetening(), PromptMode::Generation { taxonomy_description: Some("About food.") }, None, &[]);
        assert!(p.contains("\n\nTaxonomy Description: Description of the taxonomy\n\n"));
        assert!(p.contains("\n\nTaxonomy Description: About food.\n\n"));
        assert!(p.contains("If there are no suitable existing parents, invent them."));
        assert!(p.contains("Context:\n```\n```"));
    }

    #[test]
    fn empty_candidates_render_an_empty_line() {
        let p = render_child_prompt(&EdgeContext::default(), &[], &sweetening(), "i", None, None, &[]);
        assert!(p.contains("\n\nCandidates:\n\nParent: sweetening\n\n"));
    }

    #[test]
    fn demos_precede_the_query() {
        let demo = ParentDemo {
            context: vec!["sugar, brown sugar".into()],
            child: "granulated sugar".into(),
            description: "granulated sugar is sugar in the form of small grains".into(),
            reasoning: "find the parents of granulated sugar.".into(),
            interpretation: "A sugar.".into(),
            parents: vec!["sugar".into()],
        };
        let p = render_parent_prompt(&EdgeContext::default(), &sweetening(), PromptMode::Completion, None, &[demo]);
        let demo_at = p.find("Child: granulated sugar").unwrap();
        let query_at = p.find("Child: sweetening").unwrap();
        assert!(demo_at < query_at);
        assert!(p.contains("Context:\n```sugar, brown sugar```\n\nChild: granulated sugar"));
        assert!(p.contains("Parents: sugar\n\n---\n\nContext:"));
    }
}
