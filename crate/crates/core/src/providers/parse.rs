//! Parsing of fielded model outputs.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` has invalid value `{value}`")]
    InvalidValue { field: String, value: String },
}

/// Splits `raw` into fields. A marker is recognized only at the start of a
/// line (`Name:`, case-insensitive). Text before the first marker is
/// credited to the first field, which is how the reasoning continues the
/// trigger line. When a marker repeats, the first occurrence wins.
pub fn parse_fielded_output(raw: &str, fields: &[&str]) -> BTreeMap<String, String> {
    let marker = |line: &str| {
        fields.iter().copied().find(|f| {
            line.get(..f.len()).is_some_and(|head| head.eq_ignore_ascii_case(f)) && line[f.len()..].starts_with(':')
        })
    };
    let mut segments: Vec<(Option<&str>, String)> = vec![(None, String::new())];
    for line in raw.lines() {
        match marker(line) {
            Some(f) => segments.push((Some(f), line[f.len() + 1..].to_string())),
            None => {
                let last = &mut segments.last_mut().expect("non-empty").1;
                last.push('\n');
                last.push_str(line);
            }
        }
    }
    let mut out = BTreeMap::new();
    for (name, text) in segments {
        let name = match (name, fields.first()) {
            (Some(n), _) => n,
            (None, Some(first)) if !text.trim().is_empty() => first,
            _ => continue,
        };
        out.entry(name.to_string()).or_insert_with(|| text.trim().to_string());
    }
    out
}

/// Comma list; `None` (any case) or an empty value is the empty list.
/// Items lose surrounding quotes and a trailing period.
pub fn parse_list(value: &str) -> Vec<String> {
    let v = value.trim().trim_end_matches('.').trim();
    if v.is_empty() || v.eq_ignore_ascii_case("none") {
        return Vec::new();
    }
    let mut out: Vec<String> = Vec::new();
    for item in v.split(',') {
        let t = item.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim().trim_end_matches('.').trim();
        if !t.is_empty() && !out.iter().any(|o| o.eq_ignore_ascii_case(t)) {
            out.push(t.to_string());
        }
    }
    out
}

pub fn parse_yes_no(field: &str, value: &str) -> Result<bool, ParseError> {
    let v = value.trim().trim_end_matches('.').trim();
    if v.eq_ignore_ascii_case("yes") {
        Ok(true)
    } else if v.eq_ignore_ascii_case("no") {
        Ok(false)
    } else {
        Err(ParseError::InvalidValue { field: field.into(), value: v.into() })
    }
}

/// Literal marker a model may use for "no parent".
pub const ROOT_MARKER: &str = "None";

#[derive(Debug, Clone, PartialEq)]
pub struct ParentProposal {
    pub reasoning: String,
    pub interpretation: String,
    pub parents: Vec<String>,
    /// The model answered `None`, i.e. the query belongs at the top level.
    pub proposes_root: bool,
    /// The raw `Parents:` field, replayed as feedback.
    pub parents_field: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChildSelection {
    pub reasoning: String,
    pub is_leaf: bool,
    pub children: Vec<String>,
    pub leaf_field: String,
    pub children_field: String,
    pub raw: String,
}

pub const PARENT_FIELDS: [&str; 3] = ["Reasoning", "Interpretation", "Parents"];
pub const CHILD_FIELDS: [&str; 3] = ["Reasoning", "Leaf", "Children"];

pub fn parse_parent_output(raw: &str) -> Result<ParentProposal, ParseError> {
    let f = parse_fielded_output(raw, &PARENT_FIELDS);
    let parents_field = f.get("Parents").ok_or_else(|| ParseError::MissingField("Parents".into()))?.clone();
    let parents = parse_list(&parents_field);
    let proposes_root = parents.is_empty();
    Ok(ParentProposal {
        reasoning: f.get("Reasoning").cloned().unwrap_or_default(),
        interpretation: f.get("Interpretation").cloned().unwrap_or_default(),
        parents,
        proposes_root,
        parents_field: if parents_field.is_empty() { ROOT_MARKER.into() } else { parents_field },
        raw: raw.to_string(),
    })
}

pub fn parse_child_output(raw: &str) -> Result<ChildSelection, ParseError> {
    let f = parse_fielded_output(raw, &CHILD_FIELDS);
    let leaf_field = f.get("Leaf").ok_or_else(|| ParseError::MissingField("Leaf".into()))?.clone();
    let is_leaf = parse_yes_no("Leaf", &leaf_field)?;
    let children_field = match f.get("Children") {
        Some(c) => c.clone(),
        None if is_leaf => String::new(),
        None => return Err(ParseError::MissingField("Children".into())),
    };
    let children = if is_leaf { Vec::new() } else { parse_list(&children_field) };
    Ok(ChildSelection {
        reasoning: f.get("Reasoning").cloned().unwrap_or_default(),
        is_leaf,
        children,
        leaf_field,
        children_field,
        raw: raw.to_string(),
    })
}
