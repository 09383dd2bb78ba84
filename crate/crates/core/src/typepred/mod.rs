//! Mention type prediction from marker-augmented sentences: sequence
//! building, a linear softmax head over pooled vectors, document-level
//! k-fold cross-validation and sliced evaluation.

mod classifier;
mod crossval;
mod evaluate;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, MentionSpan};
use crate::error::{Error, Result};

pub use classifier::{TypeClassifier, TypePrediction};
pub use crossval::{assign_folds, crossval_predict, CrossvalOutput, PooledVectors, PredictedMention};
pub use evaluate::{evaluate_typepred, macro_f1, slice_of, SliceScore, Slice, TypePredReport};

pub const ENT_START: &str = "<ENT_START>";
pub const ENT_END: &str = "<ENT_END>";
pub const MAX_SEQUENCE: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSequence {
    pub tokens: Vec<String>,
    pub truncated: bool,
}

/// Wraps tokens `start..=end` in entity markers, trimming context evenly on
/// both sides when the result would exceed [`MAX_SEQUENCE`] tokens.
pub fn build_marked_sequence(sentence: &[String], start: usize, end: usize) -> Result<MarkedSequence> {
    if start > end || end >= sentence.len() {
        return Err(Error::invalid(format!(
            "span {start}..={end} outside a sentence of {} tokens",
            sentence.len()
        )));
    }
    let width = end - start + 1;
    if width + 2 > MAX_SEQUENCE {
        return Err(Error::invalid(format!(
            "mention of {width} tokens does not fit a {MAX_SEQUENCE}-token sequence"
        )));
    }
    let budget = MAX_SEQUENCE - width - 2;
    let right_avail = sentence.len() - 1 - end;
    let (mut left, mut right) = (start, right_avail);
    let truncated = left + right > budget;
    if truncated {
        left = start.min(budget / 2);
        right = right_avail.min(budget - left);
        left = start.min(budget - right);
    }
    let mut tokens = Vec::with_capacity(left + right + width + 2);
    tokens.extend_from_slice(&sentence[start - left..start]);
    tokens.push(ENT_START.to_string());
    tokens.extend_from_slice(&sentence[start..=end]);
    tokens.push(ENT_END.to_string());
    tokens.extend_from_slice(&sentence[end + 1..end + 1 + right]);
    Ok(MarkedSequence { tokens, truncated })
}

/// Store key of a mention's pooled vector.
pub fn mention_key(doc_id: &str, m: &MentionSpan) -> String {
    format!("{doc_id}#{}:{}:{}", m.sentence_index, m.start, m.end)
}

/// One line of the marked-sequence request file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedRequest {
    pub key: String,
    pub tokens: Vec<String>,
}

/// Requests for every mention, in document order.
pub fn marked_requests(docs: &[Document]) -> Result<Vec<MarkedRequest>> {
    let mut out = Vec::new();
    for d in docs {
        for m in &d.mentions {
            let seq = build_marked_sequence(&d.sentences[m.sentence_index], m.start, m.end)?;
            out.push(MarkedRequest { key: mention_key(&d.doc_id, m), tokens: seq.tokens });
        }
    }
    Ok(out)
}

pub fn write_requests(requests: &[MarkedRequest], mut out: impl Write) -> Result<()> {
    for r in requests {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
