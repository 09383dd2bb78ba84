//! Documents, CoNLL-2012 I/O, type schemes and typed-mention sidecars.

mod conll;
mod propagate;
mod schemes;
mod sidecar;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conll::{emit_conll, parse_conll};
pub use propagate::propagate_cluster_types;
pub use schemes::{map_doc_to_common, map_to_common, TypeScheme, COMMON_SCHEME, NA};
pub use sidecar::{
    attach_types, load_type_sidecar, read_sidecar, write_sidecar, SidecarRecord, SidecarWarning,
};

/// A mention span inside one sentence. `end` is inclusive.
///
/// `entity_type == None` is the NA type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MentionSpan {
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
}

impl MentionSpan {
    pub fn new(sentence_index: usize, start: usize, end: usize) -> Self {
        Self {
            sentence_index,
            start,
            end,
            entity_type: None,
        }
    }

    pub fn typed(mut self, label: &str) -> Self {
        self.entity_type = Some(label.to_string());
        self
    }

    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }

    /// Position key used to match mentions across documents.
    pub fn key(&self) -> SpanKey {
        SpanKey {
            sentence_index: self.sentence_index,
            start: self.start,
            end: self.end,
        }
    }

    /// True if one of the two spans contains the other in the same sentence.
    pub fn nests_with(&self, other: &MentionSpan) -> bool {
        self.sentence_index == other.sentence_index
            && ((self.start <= other.start && other.end <= self.end)
                || (other.start <= self.start && self.end <= other.end))
    }
}

/// Type-free span identity: (sentence, start, end).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanKey {
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Vec<String>>,
    pub mentions: Vec<MentionSpan>,
    pub clusters: BTreeMap<u32, Vec<usize>>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, sentences: Vec<Vec<String>>) -> Self {
        Self {
            doc_id: doc_id.into(),
            sentences,
            ..Default::default()
        }
    }

    /// Builds a document from mentions grouped into clusters, numbering
    /// clusters in the given order.
    pub fn with_clusters(
        doc_id: impl Into<String>,
        sentences: Vec<Vec<String>>,
        clusters: Vec<Vec<MentionSpan>>,
    ) -> Self {
        let mut doc = Self::new(doc_id, sentences);
        for (cid, members) in clusters.into_iter().enumerate() {
            let ids = members
                .into_iter()
                .map(|m| {
                    doc.mentions.push(m);
                    doc.mentions.len() - 1
                })
                .collect();
            doc.clusters.insert(cid as u32, ids);
        }
        doc.canonicalize();
        doc
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Offset of the first token of each sentence in the flattened token list.
    pub fn sentence_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sentences.len());
        let mut acc = 0;
        for s in &self.sentences {
            offsets.push(acc);
            acc += s.len();
        }
        offsets
    }

    /// Flattened token positions of a mention, inclusive.
    pub fn global_span(&self, mention: &MentionSpan) -> (usize, usize) {
        let offset: usize = self.sentences[..mention.sentence_index]
            .iter()
            .map(Vec::len)
            .sum();
        (offset + mention.start, offset + mention.end)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    pub fn mention_tokens(&self, mention: &MentionSpan) -> &[String] {
        &self.sentences[mention.sentence_index][mention.start..=mention.end]
    }

    /// Genre key from the document id prefix, e.g. `bc` for `bc/cctv/00/cctv_0000`.
    pub fn genre(&self) -> &'static str {
        const GENRES: [&str; 7] = ["tc", "bc", "nw", "pt", "bn", "wb", "mz"];
        let id = self.doc_id.trim_start_matches('(');
        let prefix = id.split('/').next().unwrap_or("");
        GENRES
            .iter()
            .copied()
            .find(|g| *g == prefix)
            .unwrap_or("other")
    }

    /// Cluster id of every mention, indexed by mention.
    pub fn mention_clusters(&self) -> Vec<Option<u32>> {
        let mut out = vec![None; self.mentions.len()];
        for (&cid, members) in &self.clusters {
            for &m in members {
                if m < out.len() {
                    out[m] = Some(cid);
                }
            }
        }
        out
    }

    /// Gold partition as lists of mention indices, in cluster-id order.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        self.clusters.values().cloned().collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("document `{}`: {msg}", self.doc_id)));
        for (si, sentence) in self.sentences.iter().enumerate() {
            if sentence.is_empty() {
                return bad(format!("sentence {si} is empty"));
            }
            if let Some(t) = sentence
                .iter()
                .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
            {
                return bad(format!("token {t:?} in sentence {si} is empty or has whitespace"));
            }
        }
        for (i, m) in self.mentions.iter().enumerate() {
            if m.start > m.end {
                return bad(format!("mention {i} has start > end"));
            }
            match self.sentences.get(m.sentence_index) {
                Some(s) if m.end < s.len() => {}
                _ => return bad(format!("mention {i} lies outside its sentence")),
            }
        }
        let mut seen = BTreeSet::new();
        for members in self.clusters.values() {
            for &m in members {
                if m >= self.mentions.len() {
                    return bad(format!("cluster refers to missing mention {m}"));
                }
                if !seen.insert(m) {
                    return bad(format!("mention {m} appears in more than one cluster"));
                }
            }
        }
        if seen.len() != self.mentions.len() {
            return bad("some mentions belong to no cluster".into());
        }
        Ok(())
    }

    /// Sorts mentions by position (then cluster id) and cluster member lists
    /// ascending. Parsing always yields canonical documents.
    pub fn canonicalize(&mut self) {
        let owner = self.mention_clusters();
        let mut order: Vec<usize> = (0..self.mentions.len()).collect();
        order.sort_by_key(|&i| (self.mentions[i].key(), owner[i]));
        let mut remap = vec![0usize; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        self.mentions = order.iter().map(|&i| self.mentions[i].clone()).collect();
        for members in self.clusters.values_mut() {
            for m in members.iter_mut() {
                *m = remap[*m];
            }
            members.sort_unstable();
        }
        self.clusters.retain(|_, members| !members.is_empty());
    }

    /// Copy of the document without clusters of size one (and their mentions).
    pub fn without_singletons(&self) -> Document {
        let keep: BTreeMap<u32, Vec<usize>> = self
            .clusters
            .iter()
            .filter(|(_, m)| m.len() > 1)
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        let mut remap = BTreeMap::new();
        let mut mentions = Vec::new();
        for (i, m) in self.mentions.iter().enumerate() {
            if keep.values().any(|members| members.contains(&i)) {
                remap.insert(i, mentions.len());
                mentions.push(m.clone());
            }
        }
        let clusters = keep
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().map(|i| remap[&i]).collect()))
            .collect();
        Document {
            doc_id: self.doc_id.clone(),
            sentences: self.sentences.clone(),
            mentions,
            clusters,
        }
    }
}
