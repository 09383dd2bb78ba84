use std::collections::{HashMap, HashSet};
use std::fmt::Write;
use std::hash::Hash;

use serde::Serialize;

use crate::corpus::{Document, SidecarRecord, SpanKey};

const DEMONSTRATIVE: [&str; 5] = ["this", "that", "it", "these", "those"];
const PERSONAL: [&str; 6] = ["she", "he", "they", "me", "you", "we"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Slice {
    #[serde(rename = "PRP (dem.)")]
    Demonstrative,
    #[serde(rename = "PRP (pers.)")]
    Personal,
    #[serde(rename = "NP (len = 1)")]
    Np1,
    #[serde(rename = "NP (len = 2)")]
    Np2,
    #[serde(rename = "NP (len > 2)")]
    NpLong,
}

impl Slice {
    pub const ALL: [Slice; 5] = [Slice::Demonstrative, Slice::Personal, Slice::Np1, Slice::Np2, Slice::NpLong];

    pub fn name(self) -> &'static str {
        match self {
            Slice::Demonstrative => "PRP (dem.)",
            Slice::Personal => "PRP (pers.)",
            Slice::Np1 => "NP (len = 1)",
            Slice::Np2 => "NP (len = 2)",
            Slice::NpLong => "NP (len > 2)",
        }
    }
}

pub fn slice_of(tokens: &[String]) -> Slice {
    if let [only] = tokens {
        let lower = only.to_lowercase();
        if DEMONSTRATIVE.contains(&lower.as_str()) {
            return Slice::Demonstrative;
        }
        if PERSONAL.contains(&lower.as_str()) {
            return Slice::Personal;
        }
    }
    match tokens.len() {
        0 | 1 => Slice::Np1,
        2 => Slice::Np2,
        _ => Slice::NpLong,
    }
}

/// Unweighted mean of per-label F1 over labels seen in either sequence.
pub fn macro_f1<T: Eq + Hash>(gold: &[T], predicted: &[T]) -> f64 {
    let labels: HashSet<&T> = gold.iter().chain(predicted).collect();
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .map(|&l| {
            let mut tp = 0usize;
            let mut wrong = 0usize;
            for (g, p) in gold.iter().zip(predicted) {
                match (g == l, p == l) {
                    (true, true) => tp += 1,
                    (true, false) | (false, true) => wrong += 1,
                    _ => {}
                }
            }
            2.0 * tp as f64 / (2 * tp + wrong) as f64
        })
        .sum();
    total / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceScore {
    pub samples: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl SliceScore {
    fn of(pairs: &[(&str, Option<&str>)]) -> Self {
        let gold: Vec<Option<&str>> = pairs.iter().map(|p| Some(p.0)).collect();
        let pred: Vec<Option<&str>> = pairs.iter().map(|p| p.1).collect();
        let correct = pairs.iter().filter(|p| Some(p.0) == p.1).count();
        Self {
            samples: pairs.len(),
            accuracy: if pairs.is_empty() { 0.0 } else { correct as f64 / pairs.len() as f64 },
            macro_f1: macro_f1(&gold, &pred),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypePredReport {
    pub overall: SliceScore,
    pub slices: Vec<(Slice, SliceScore)>,
    /// Gold-typed mentions with no prediction; scored as wrong.
    pub missing: usize,
}

impl TypePredReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<14} {:>8} {:>9} {:>8}\n", "", "samples", "accuracy", "macro F1");
        let mut row = |name: &str, s: &SliceScore| {
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>9.2} {:>8.2}",
                name,
                s.samples,
                100.0 * s.accuracy,
                100.0 * s.macro_f1
            );
        };
        row("all", &self.overall);
        for (slice, s) in &self.slices {
            row(slice.name(), s);
        }
        out
    }
}

/// Scores predictions for every gold-typed mention, overall and per slice.
/// Untyped gold mentions are skipped.
pub fn evaluate_typepred(gold: &[Document], predicted: &[SidecarRecord]) -> TypePredReport {
    let lookup: HashMap<(&str, SpanKey), &str> = predicted
        .iter()
        .map(|r| {
            let key = SpanKey { sentence_index: r.sentence_index, start: r.start, end: r.end };
            ((r.doc_id.as_str(), key), r.entity_type.as_str())
        })
        .collect();
    let mut rows: Vec<(Slice, &str, Option<&str>)> = Vec::new();
    for d in gold {
        for m in &d.mentions {
            if let Some(t) = m.entity_type.as_deref() {
                let p = lookup.get(&(d.doc_id.as_str(), m.key())).copied();
                rows.push((slice_of(d.mention_tokens(m)), t, p));
            }
        }
    }
    let all: Vec<(&str, Option<&str>)> = rows.iter().map(|r| (r.1, r.2)).collect();
    let slices = Slice::ALL
        .into_iter()
        .map(|s| {
            let part: Vec<(&str, Option<&str>)> = rows.iter().filter(|r| r.0 == s).map(|r| (r.1, r.2)).collect();
            (s, SliceScore::of(&part))
        })
        .collect();
    TypePredReport {
        overall: SliceScore::of(&all),
        slices,
        missing: all.iter().filter(|p| p.1.is_none()).count(),
    }
}
