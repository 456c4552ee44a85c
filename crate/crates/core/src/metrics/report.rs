//! Metric report serialization: `name<TAB>slice<TAB>value` lines and a
//! human-readable table.

use std::fmt::Write;

use serde::Serialize;

use super::{CscResult, NlivResult, ScoreReport, SliceScores};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub gold: Option<ScoreReport>,
    pub csc: Option<CscResult>,
    pub nliv_weak: Option<NlivResult>,
    pub nliv_strong: Option<NlivResult>,
    /// Named p-values from paired randomization tests.
    pub p_values: Vec<(String, f64)>,
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

impl MetricReport {
    /// `(name, slice, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(String, String, String)> {
        let mut rows = Vec::new();
        let mut push = |n: &str, s: &str, v: String| rows.push((n.to_string(), s.to_string(), v));
        if let Some(g) = &self.gold {
            for (slice, s) in [("total", &g.total), ("non-leaf", &g.non_leaf), ("leaf", &g.leaf)] {
                push("wps", slice, fmt4(s.wps));
                push("f1", slice, fmt4(s.f1));
                push("precision", slice, fmt4(s.precision));
                push("recall", slice, fmt4(s.recall));
                push("queries", slice, s.queries.to_string());
            }
            push("position_f1", "total", fmt4(g.position_f1));
            push("parent_f1", "total", fmt4(g.parent_f1));
            push("unscoreable", "total", g.unscoreable.len().to_string());
            push("dropped_cycles", "total", g.dropped_cycles.to_string());
        }
        if let Some(n) = &self.nliv_weak {
            push("nliv_w", "total", fmt4(n.value));
        }
        if let Some(n) = &self.nliv_strong {
            push("nliv_s", "total", fmt4(n.value));
        }
        if let Some(c) = &self.csc {
            push("csc", "total", fmt4(c.value));
            if c.degenerate {
                push("csc_degenerate", "total", "1".into());
            }
        }
        for (name, p) in &self.p_values {
            push("p_value", name, fmt4(*p));
        }
        rows
    }

    pub fn to_tsv(&self) -> String {
        self.rows().into_iter().map(|(n, s, v)| format!("{n}\t{s}\t{v}\n")).collect()
    }

    /// Total / Non-Leaf / Leaf blocks of WPS, F1, P, R, followed by the
    /// taxonomy-level scores that are present.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if let Some(g) = &self.gold {
            let cells = |s: &SliceScores| format!("{} {} {} {}", fmt4(s.wps), fmt4(s.f1), fmt4(s.precision), fmt4(s.recall));
            let _ = writeln!(out, "{:<27} | {:<27} | {:<27}", "Total", "Non-Leaf", "Leaf");
            let h = format!("{:<6} {:<6} {:<6} {:<6}", "WPS", "F1", "P", "R");
            let _ = writeln!(out, "{h:<27} | {h:<27} | {h:<27}");
            let _ = writeln!(out, "{:<27} | {:<27} | {:<27}", cells(&g.total), cells(&g.non_leaf), cells(&g.leaf));
            let _ = writeln!(out, "Position-F1 {}  Parent-F1 {}", fmt4(g.position_f1), fmt4(g.parent_f1));
        }
        let mut extra = Vec::new();
        if let Some(n) = &self.nliv_weak {
            extra.push(format!("NLIV-W {}", fmt4(n.value)));
        }
        if let Some(n) = &self.nliv_strong {
            extra.push(format!("NLIV-S {}", fmt4(n.value)));
        }
        if let Some(c) = &self.csc {
            extra.push(format!("CSC {}{}", fmt4(c.value), if c.degenerate { " (degenerate)" } else { "" }));
        }
        if !extra.is_empty() {
            let _ = writeln!(out, "{}", extra.join("  "));
        }
        for (name, p) in &self.p_values {
            let _ = writeln!(out, "p-value {name}: {}", fmt4(*p));
        }
        out
    }
}
