//! JSON-lines type annotations, one record per typed mention.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{Document, SpanKey, TypeScheme, NA};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarRecord {
    pub doc_id: String,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub entity_type: String,
}

/// A record that did not match any mention. Not fatal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SidecarWarning {
    pub record: SidecarRecord,
    pub reason: String,
}

pub fn read_sidecar(reader: impl BufRead) -> Result<Vec<SidecarRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("bad sidecar record: {e}"),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Sets `entity_type` on every mention matched by a record. Records whose
/// type is outside `scheme` are errors; records that match nothing come back
/// as warnings. Mentions without a record are left as they are.
pub fn attach_types(
    docs: &mut [Document],
    records: &[SidecarRecord],
    scheme: &TypeScheme,
) -> Result<Vec<SidecarWarning>> {
    let by_id: HashMap<String, usize> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_id.clone(), i))
        .collect();
    let mut warnings = Vec::new();
    for record in records {
        let label = scheme.canonical(&record.entity_type)?;
        let label = (label != NA).then(|| label.to_string());
        let Some(&di) = by_id.get(&record.doc_id) else {
            warnings.push(SidecarWarning {
                record: record.clone(),
                reason: "unknown document".into(),
            });
            continue;
        };
        let key = SpanKey {
            sentence_index: record.sentence_index,
            start: record.start,
            end: record.end,
        };
        let mut matched = false;
        for m in docs[di].mentions.iter_mut().filter(|m| m.key() == key) {
            m.entity_type = label.clone();
            matched = true;
        }
        if !matched {
            warnings.push(SidecarWarning {
                record: record.clone(),
                reason: "no mention with this span".into(),
            });
        }
    }
    Ok(warnings)
}

/// Single-document form of [`attach_types`]; records for other documents are
/// skipped silently.
pub fn load_type_sidecar(
    doc: &Document,
    sidecar: impl BufRead,
    scheme: &TypeScheme,
) -> Result<(Document, Vec<SidecarWarning>)> {
    let records: Vec<SidecarRecord> = read_sidecar(sidecar)?
        .into_iter()
        .filter(|r| r.doc_id == doc.doc_id)
        .collect();
    let mut docs = [doc.clone()];
    let warnings = attach_types(&mut docs, &records, scheme)?;
    let [doc] = docs;
    Ok((doc, warnings))
}

/// One record per typed mention, in document then mention order.
pub fn write_sidecar(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        for m in &doc.mentions {
            if let Some(t) = &m.entity_type {
                let record = SidecarRecord {
                    doc_id: doc.doc_id.clone(),
                    sentence_index: m.sentence_index,
                    start: m.start,
                    end: m.end,
                    entity_type: t.clone(),
                };
                out.push_str(&serde_json::to_string(&record).expect("record serializes"));
                out.push('\n');
            }
        }
    }
    out
}
