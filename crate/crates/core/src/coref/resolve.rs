use super::model::{AntecedentScores, CorefModel};
use crate::corpus::Document;
use crate::error::Result;
use crate::neural::Matrix;
use crate::neural::softmax_in_place;

/// Mention indices per predicted entity.
pub type ClusterSet = Vec<Vec<usize>>;

/// Highest-scoring candidate if its score beats the dummy antecedent (0).
/// Equal scores go to the most recent candidate; candidates are ordered
/// nearest last.
pub fn choose_antecedent(candidates: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(j, s) in candidates {
        if s > 0.0 && best.is_none_or(|(_, b)| s >= b) {
            best = Some((j, s));
        }
    }
    best.map(|(j, _)| j)
}

/// Softmax over the candidate scores followed by the dummy score 0; the
/// dummy probability is last.
pub fn antecedent_distribution(scores: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = scores.iter().copied().chain([0.0]).collect();
    softmax_in_place(&mut p);
    p
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Links every mention to its chosen antecedent and returns the transitive
/// closure. Clusters are listed by their first mention in reading order.
pub fn resolve(scores: &AntecedentScores, keep_singletons: bool) -> ClusterSet {
    let n = scores.order.iter().max().map_or(0, |&m| m + 1);
    let mut parent: Vec<usize> = (0..n).collect();
    let mut linked = vec![false; n];
    for (k_ord, cands) in scores.candidates.iter().enumerate() {
        if let Some(j) = choose_antecedent(cands) {
            let k = scores.order[k_ord];
            linked[j] = true;
            linked[k] = true;
            let (a, b) = (find(&mut parent, j), find(&mut parent, k));
            parent[b.max(a)] = a.min(b);
        }
    }
    let mut root_slot = vec![usize::MAX; n];
    let mut clusters: ClusterSet = Vec::new();
    for &m in &scores.order {
        if !keep_singletons && !linked[m] {
            continue;
        }
        let r = find(&mut parent, m);
        if root_slot[r] == usize::MAX {
            root_slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[root_slot[r]].push(m);
    }
    clusters
}

/// Document carrying `doc`'s text and the predicted clusters; mention types
/// are copied from `doc`.
pub fn clusters_to_document(doc: &Document, clusters: &ClusterSet) -> Document {
    let spans = clusters
        .iter()
        .map(|c| c.iter().map(|&m| doc.mentions[m].clone()).collect())
        .collect();
    Document::with_clusters(doc.doc_id.clone(), doc.sentences.clone(), spans)
}

impl CorefModel {
    /// Predicted clusters for `doc` as a document.
    pub fn predict(&self, doc: &Document, embeddings: &Matrix) -> Result<Document> {
        let scores = self.score_document(doc, embeddings)?;
        Ok(clusters_to_document(doc, &resolve(&scores, self.config.keep_singletons)))
    }
}
