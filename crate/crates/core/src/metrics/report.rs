use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::Serialize;

use super::{b_cubed_counts, ceaf_e_counts, impure_clusters, muc_counts, Counts, Prf};
use crate::corpus::{Document, SpanKey};
use crate::error::{Error, Result};

/// Raw per-document scorer counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DocScores {
    pub doc_id: String,
    pub muc: Counts,
    pub b_cubed: Counts,
    pub ceaf_e: Counts,
    pub impure_clusters: usize,
}

impl DocScores {
    pub fn avg_f1(&self) -> f64 {
        (self.muc.prf().f1 + self.b_cubed.prf().f1 + self.ceaf_e.prf().f1) / 3.0
    }
}

fn clusters_of(doc: &Document) -> Vec<Vec<SpanKey>> {
    doc.clusters
        .values()
        .map(|members| members.iter().map(|&i| doc.mentions[i].key()).collect())
        .collect()
}

/// Scores `response` against `key`; impurity uses the response's mention
/// types (untyped counts as its own value).
pub fn doc_scores(key: &Document, response: &Document) -> DocScores {
    let (k, r) = (clusters_of(key), clusters_of(response));
    let types: Vec<Vec<Option<&str>>> = response
        .clusters
        .values()
        .map(|members| members.iter().map(|&i| response.mentions[i].entity_type.as_deref()).collect())
        .collect();
    DocScores {
        doc_id: key.doc_id.clone(),
        muc: muc_counts(&k, &r),
        b_cubed: b_cubed_counts(&k, &r),
        ceaf_e: ceaf_e_counts(&k, &r),
        impure_clusters: impure_clusters(&types),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore {
    #[serde(flatten)]
    pub report: ScoreReport,
    /// Share of typed key mentions per type, OTHER left out of the listing.
    pub type_ratios: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    pub avg_f1: f64,
    pub impure_clusters: usize,
    pub documents: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub genres: BTreeMap<String, GroupScore>,
}

/// Pairs each key document with the response of the same id.
fn pair_up<'a>(keys: &'a [Document], responses: &'a [Document]) -> Result<Vec<(&'a Document, &'a Document)>> {
    let by_id: HashMap<&str, &Document> = responses.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    if by_id.len() != responses.len() {
        return Err(Error::invalid("response contains duplicate document ids"));
    }
    let pairs = keys
        .iter()
        .map(|k| {
            by_id
                .get(k.doc_id.as_str())
                .map(|r| (k, *r))
                .ok_or_else(|| Error::UnknownDocument(k.doc_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = responses.iter().find(|r| !keys.iter().any(|k| k.doc_id == r.doc_id)) {
        return Err(Error::UnknownDocument(extra.doc_id.clone()));
    }
    Ok(pairs)
}

impl ScoreReport {
    /// Corpus-level scores from summed counts.
    pub fn from_doc_scores(scores: &[DocScores]) -> Self {
        let mut totals = [Counts::default(); 3];
        for s in scores {
            totals[0].add(&s.muc);
            totals[1].add(&s.b_cubed);
            totals[2].add(&s.ceaf_e);
        }
        let [muc, b_cubed, ceaf_e] = totals.map(|c| c.prf());
        Self {
            muc,
            b_cubed,
            ceaf_e,
            avg_f1: (muc.f1 + b_cubed.f1 + ceaf_e.f1) / 3.0,
            impure_clusters: scores.iter().map(|s| s.impure_clusters).sum(),
            documents: scores.len(),
            genres: BTreeMap::new(),
        }
    }

    /// Every key document must have exactly one response of the same id.
    pub fn score(keys: &[Document], responses: &[Document]) -> Result<Self> {
        Ok(Self::from_doc_scores(&per_document(keys, responses)?))
    }

    /// Fixed-width table in the order B³, MUC, CEAFE, Avg. F1, #IC; values
    /// scaled to percentages with two decimals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>6} {:>6}\n",
            "", "B3", "MUC", "CEAFE", "Avg. F1", "#IC", "docs"
        );
        let mut row = |name: &str, r: &ScoreReport| {
            let _ = writeln!(
                out,
                "{:<10} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>6} {:>6}",
                name,
                100.0 * r.b_cubed.f1,
                100.0 * r.muc.f1,
                100.0 * r.ceaf_e.f1,
                100.0 * r.avg_f1,
                r.impure_clusters,
                r.documents
            );
        };
        row("all", self);
        for (genre, g) in &self.genres {
            row(genre, &g.report);
        }
        out
    }
}

pub fn per_document(keys: &[Document], responses: &[Document]) -> Result<Vec<DocScores>> {
    Ok(pair_up(keys, responses)?
        .into_iter()
        .map(|(k, r)| doc_scores(k, r))
        .collect())
}

fn type_ratios<'a>(docs: impl Iterator<Item = &'a Document>) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut typed = 0usize;
    for d in docs {
        for t in d.mentions.iter().filter_map(|m| m.entity_type.as_deref()) {
            typed += 1;
            if t != "OTHER" {
                *counts.entry(t.to_string()).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 / typed as f64))
        .collect()
}

/// One report per group, with the type distribution of the group's key
/// mentions.
pub fn score_by_group(
    keys: &[Document],
    responses: &[Document],
    key_fn: impl Fn(&Document) -> String,
) -> Result<BTreeMap<String, GroupScore>> {
    let pairs = pair_up(keys, responses)?;
    let mut groups: BTreeMap<String, Vec<(&Document, &Document)>> = BTreeMap::new();
    for (k, r) in pairs {
        groups.entry(key_fn(k)).or_default().push((k, r));
    }
    Ok(groups
        .into_iter()
        .map(|(name, members)| {
            let scores: Vec<DocScores> = members.iter().map(|(k, r)| doc_scores(k, r)).collect();
            let score = GroupScore {
                report: ScoreReport::from_doc_scores(&scores),
                type_ratios: type_ratios(members.iter().map(|(k, _)| *k)),
            };
            (name, score)
        })
        .collect())
}
