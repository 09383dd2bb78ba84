//! MUC, B³ and CEAFe over mention partitions, impure-cluster counts,
//! corpus reports and paired bootstrap tests.

mod assignment;
mod bootstrap;
mod report;

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::Serialize;

pub use assignment::max_weight_matching;
pub use bootstrap::{bootstrap_significance, DEFAULT_RESAMPLES};
pub use report::{doc_scores, per_document, score_by_group, DocScores, GroupScore, ScoreReport};

/// Precision, recall and F1. A zero denominator yields 0 and sets the
/// matching flag.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
}

/// Numerators and denominators, summed across documents for corpus scores.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl Counts {
    pub fn add(&mut self, other: &Counts) {
        self.recall_num += other.recall_num;
        self.recall_den += other.recall_den;
        self.precision_num += other.precision_num;
        self.precision_den += other.precision_den;
    }

    pub fn prf(&self) -> Prf {
        let ratio = |n: f64, d: f64| if d == 0.0 { 0.0 } else { n / d };
        let recall = ratio(self.recall_num, self.recall_den);
        let precision = ratio(self.precision_num, self.precision_den);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            precision_undefined: self.precision_den == 0.0,
            recall_undefined: self.recall_den == 0.0,
        }
    }
}

fn membership<M: Eq + Hash>(clusters: &[Vec<M>]) -> HashMap<&M, usize> {
    clusters
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |m| (m, i)))
        .collect()
}

/// Σ(|K| − |p(K)|) and Σ(|K| − 1); mentions of K absent from `other` are
/// their own parts.
fn muc_side<M: Eq + Hash>(clusters: &[Vec<M>], other: &[Vec<M>]) -> (f64, f64) {
    let owner = membership(other);
    let (mut num, mut den) = (0.0, 0.0);
    for k in clusters {
        let mut parts = HashSet::new();
        let mut loose = 0usize;
        for m in k {
            match owner.get(m) {
                Some(&r) => {
                    parts.insert(r);
                }
                None => loose += 1,
            }
        }
        num += (k.len() - parts.len() - loose) as f64;
        den += k.len().saturating_sub(1) as f64;
    }
    (num, den)
}

pub fn muc_counts<M: Eq + Hash>(key: &[Vec<M>], response: &[Vec<M>]) -> Counts {
    let (recall_num, recall_den) = muc_side(key, response);
    let (precision_num, precision_den) = muc_side(response, key);
    Counts { recall_num, recall_den, precision_num, precision_den }
}

pub fn muc<M: Eq + Hash>(key: &[Vec<M>], response: &[Vec<M>]) -> Prf {
    muc_counts(key, response).prf()
}

/// Σ over clusters C of Σ over other-side clusters D of |C∩D|²/|C|.
fn b_cubed_side<M: Eq + Hash>(clusters: &[Vec<M>], other: &[Vec<M>]) -> (f64, f64) {
    let owner = membership(other);
    let (mut num, mut den) = (0.0, 0.0);
    for c in clusters {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for m in c {
            if let Some(&d) = owner.get(m) {
                *overlap.entry(d).or_default() += 1;
            }
        }
        let n = c.len() as f64;
        num += overlap.values().map(|&o| (o * o) as f64 / n).sum::<f64>();
        den += n;
    }
    (num, den)
}

pub fn b_cubed_counts<M: Eq + Hash>(key: &[Vec<M>], response: &[Vec<M>]) -> Counts {
    let (recall_num, recall_den) = b_cubed_side(key, response);
    let (precision_num, precision_den) = b_cubed_side(response, key);
    Counts { recall_num, recall_den, precision_num, precision_den }
}

pub fn b_cubed<M: Eq + Hash>(key: &[Vec<M>], response: &[Vec<M>]) -> Prf {
    b_cubed_counts(key, response).prf()
}

/// 2|K∩R| / (|K| + |R|).
pub fn phi4<M: Eq + Hash>(k: &[M], r: &[M]) -> f64 {
    if k.is_empty() && r.is_empty() {
        return 0.0;
    }
    let rs: HashSet<&M> = r.iter().collect();
    let common = k.iter().filter(|m| rs.contains(m)).count();
    2.0 * common as f64 / (k.len() + r.len()) as f64
}

pub fn ceaf_e_counts<M: Eq + Hash>(key: &[Vec<M>], response: &[Vec<M>]) -> Counts {
    let sim: Vec<Vec<f64>> = key
        .iter()
        .map(|k| response.iter().map(|r| phi4(k, r)).collect())
        .collect();
    let (total, _) = max_weight_matching(&sim);
    Counts {
        recall_num: total,
        recall_den: key.len() as f64,
        precision_num: total,
        precision_den: response.len() as f64,
    }
}

pub fn ceaf_e<M: Eq + Hash>(key: &[Vec<M>], response: &[Vec<M>]) -> Prf {
    ceaf_e_counts(key, response).prf()
}

/// Clusters whose members carry two or more distinct type values; each
/// inner vector lists the member types of one cluster.
pub fn impure_clusters<T: Eq + Hash>(cluster_types: &[Vec<T>]) -> usize {
    cluster_types
        .iter()
        .filter(|c| c.iter().collect::<HashSet<_>>().len() > 1)
        .count()
}
