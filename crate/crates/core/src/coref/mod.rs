//! Mention-ranking coreference with optional entity-type information.
//!
//! A mention is `[x_start; x_end; attention; width; quote]`, optionally
//! followed by its type embedding (ET-self). A pair is scored by a
//! feed-forward net over `[m_j; m_k; m_j*m_k; distance; nested]`, optionally
//! followed by an embedded type-consistency flag (ET-cross).

mod features;
mod model;
mod resolve;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::embeddings::{synth_embeddings, EmbeddingStore};
use crate::error::{Error, Result};
use crate::neural::Matrix;

pub use features::{bucket, quote_flags, type_consistency, PairFeatures, BUCKETS};
pub use model::{AntecedentScores, CorefModel, MentionLayout, MentionRepresentation, PairLayout};
pub use resolve::{antecedent_distribution, choose_antecedent, clusters_to_document, resolve, ClusterSet};
pub use train::{train, train_step, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Baseline,
    EtSelf,
    EtCross,
    EtFull,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Baseline,
        ModelVariant::EtSelf,
        ModelVariant::EtCross,
        ModelVariant::EtFull,
    ];

    /// Type embedding appended to the mention representation.
    pub fn uses_self(self) -> bool {
        matches!(self, ModelVariant::EtSelf | ModelVariant::EtFull)
    }

    /// Type-consistency feature in the pair scorer.
    pub fn uses_cross(self) -> bool {
        matches!(self, ModelVariant::EtCross | ModelVariant::EtFull)
    }

    pub fn uses_types(self) -> bool {
        self.uses_self() || self.uses_cross()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Baseline => "baseline",
            ModelVariant::EtSelf => "et_self",
            ModelVariant::EtCross => "et_cross",
            ModelVariant::EtFull => "et_full",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model variant `{s}`")))
    }
}

/// Source of per-token contextual embeddings for a document.
pub trait TokenEmbeddings: Sync {
    fn embed(&self, doc: &Document) -> Result<Matrix>;
    fn dim(&self) -> Option<usize>;
}

impl TokenEmbeddings for EmbeddingStore {
    fn embed(&self, doc: &Document) -> Result<Matrix> {
        let m = self.fetch(&doc.doc_id)?;
        if m.rows() != doc.token_count() {
            return Err(Error::shape(format!(
                "document `{}` has {} tokens but {} stored embedding rows",
                doc.doc_id,
                doc.token_count(),
                m.rows()
            )));
        }
        Ok(m)
    }

    fn dim(&self) -> Option<usize> {
        EmbeddingStore::dim(self)
    }
}

/// Hermetic embeddings from [`synth_embeddings`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl TokenEmbeddings for SynthEmbedder {
    fn embed(&self, doc: &Document) -> Result<Matrix> {
        Ok(synth_embeddings(doc, self.dim, self.seed))
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}
