use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::classifier::{TypeClassifier, TypePrediction};
use super::mention_key;
use crate::config::TypePredConfig;
use crate::corpus::{Document, SidecarRecord, TypeScheme};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};

/// Source of one pooled vector per mention key.
pub trait PooledVectors: Sync {
    fn pooled(&self, key: &str) -> Result<Option<Vec<f64>>>;
}

impl PooledVectors for EmbeddingStore {
    fn pooled(&self, key: &str) -> Result<Option<Vec<f64>>> {
        if self.contains(key) {
            self.fetch_mean(key).map(Some)
        } else {
            Ok(None)
        }
    }
}

impl PooledVectors for HashMap<String, Vec<f64>> {
    fn pooled(&self, key: &str) -> Result<Option<Vec<f64>>> {
        Ok(self.get(key).cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedMention {
    pub key: String,
    pub doc_id: String,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    /// Fold whose model made this prediction (the mention's test fold).
    pub fold: usize,
    pub prediction: TypePrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalOutput {
    pub predictions: Vec<PredictedMention>,
    /// Test fold of each input document.
    pub folds: Vec<usize>,
    /// Per fold, the documents its model trained or early-stopped on.
    pub seen: Vec<Vec<usize>>,
}

impl CrossvalOutput {
    pub fn sidecar(&self) -> Vec<SidecarRecord> {
        self.predictions
            .iter()
            .map(|p| SidecarRecord {
                doc_id: p.doc_id.clone(),
                sentence_index: p.sentence_index,
                start: p.start,
                end: p.end,
                entity_type: p.prediction.label.clone(),
            })
            .collect()
    }
}

/// Document-level fold ids: a seeded shuffle dealt round-robin.
pub fn assign_folds(doc_count: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || doc_count < k {
        return Err(Error::invalid(format!("cannot split {doc_count} documents into {k} folds")));
    }
    let mut order: Vec<usize> = (0..doc_count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; doc_count];
    for (pos, &doc) in order.iter().enumerate() {
        folds[doc] = pos % k;
    }
    Ok(folds)
}

struct Sample {
    doc: usize,
    vector: Vec<f64>,
    class: Option<usize>,
}

/// Documents the fold trained on, and (document, mention, prediction)
/// for its held-out mentions.
type FoldOutput = (Vec<usize>, Vec<(usize, usize, TypePrediction)>);

/// Predicts a type for every mention with a model trained on the other
/// folds. Untyped mentions are predicted but never trained on.
pub fn crossval_predict(
    docs: &[Document],
    vectors: &dyn PooledVectors,
    scheme: &TypeScheme,
    config: &TypePredConfig,
) -> Result<CrossvalOutput> {
    config.validate()?;
    let mut samples: Vec<Vec<Sample>> = Vec::with_capacity(docs.len());
    let mut missing = Vec::new();
    let mut dim = None;
    for (i, d) in docs.iter().enumerate() {
        let mut row = Vec::with_capacity(d.mentions.len());
        for m in &d.mentions {
            let key = mention_key(&d.doc_id, m);
            let Some(vector) = vectors.pooled(&key)? else {
                missing.push(key);
                continue;
            };
            if *dim.get_or_insert(vector.len()) != vector.len() {
                return Err(Error::shape(format!("pooled vector for `{key}` has width {}", vector.len())));
            }
            row.push(Sample { doc: i, vector, class: scheme.class_index(m.entity_type.as_deref())? });
        }
        samples.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::MissingVectors(missing));
    }

    let folds = assign_folds(docs.len(), config.folds, config.seed)?;
    let labels: Vec<String> = scheme.class_labels().into_iter().map(String::from).collect();
    let per_fold = (0..config.folds)
        .into_par_iter()
        .map(|f| -> Result<FoldOutput> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(f as u64 + 1);
            let mut train_docs: Vec<usize> = (0..docs.len()).filter(|&i| folds[i] != f).collect();
            train_docs.shuffle(&mut rng);
            let dev_n = ((config.dev_fraction * train_docs.len() as f64).round() as usize)
                .min(train_docs.len() - 1);
            let collect = |ids: &[usize]| -> Vec<(Vec<f64>, usize)> {
                ids.iter()
                    .flat_map(|&i| &samples[i])
                    .filter_map(|s| s.class.map(|c| (s.vector.clone(), c)))
                    .collect()
            };
            let dev = collect(&train_docs[..dev_n]);
            let train = collect(&train_docs[dev_n..]);
            if train.is_empty() {
                return Err(Error::invalid(format!("fold {f} has no typed training mentions")));
            }
            let model = TypeClassifier::fit(labels.clone(), &train, &dev, config, rng.next_u64())?;
            let mut out = Vec::new();
            for (i, row) in samples.iter().enumerate().filter(|(i, _)| folds[*i] == f) {
                for (m, s) in row.iter().enumerate() {
                    debug_assert_eq!(s.doc, i);
                    out.push((i, m, model.classify(&s.vector)?));
                }
            }
            train_docs.sort_unstable();
            Ok((train_docs, out))
        })
        .collect::<Result<Vec<_>>>()?;
    let (seen, per_fold): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();

    let mut by_doc: Vec<Vec<(usize, TypePrediction)>> = vec![Vec::new(); docs.len()];
    for (i, m, p) in per_fold.into_iter().flatten() {
        by_doc[i].push((m, p));
    }
    let mut predictions = Vec::new();
    for (i, mut row) in by_doc.into_iter().enumerate() {
        row.sort_by_key(|(m, _)| *m);
        let d = &docs[i];
        for (m, prediction) in row {
            let span = &d.mentions[m];
            predictions.push(PredictedMention {
                key: mention_key(&d.doc_id, span),
                doc_id: d.doc_id.clone(),
                sentence_index: span.sentence_index,
                start: span.start,
                end: span.end,
                fold: folds[i],
                prediction,
            });
        }
    }
    Ok(CrossvalOutput { predictions, folds, seen })
}
