//! CoNLL-2012 coreference files: whitespace-separated columns, the word in
//! column 3 and the coreference brackets in the last column.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use super::{Document, MentionSpan};
use crate::error::{Error, Result};

const BEGIN: &str = "#begin document";
const END: &str = "#end document";
const MIN_COLUMNS: usize = 5;
const WORD_COLUMN: usize = 3;

enum Bracket {
    Open(u32),
    Close(u32),
    Single(u32),
}

fn parse_cell(cell: &str, line: usize) -> Result<Vec<Bracket>> {
    if cell == "-" || cell == "_" {
        return Ok(Vec::new());
    }
    let bad = || Error::Parse {
        line,
        message: format!("malformed coreference cell `{cell}`"),
    };
    cell.split('|')
        .map(|part| {
            let open = part.starts_with('(');
            let close = part.ends_with(')');
            let digits = part.trim_start_matches('(').trim_end_matches(')');
            let id: u32 = digits.parse().map_err(|_| bad())?;
            Ok(match (open, close) {
                (true, true) => Bracket::Single(id),
                (true, false) => Bracket::Open(id),
                (false, true) => Bracket::Close(id),
                (false, false) => return Err(bad()),
            })
        })
        .collect()
}

struct Builder {
    doc: Document,
    begin_line: usize,
    current: Vec<String>,
    // cluster -> stack of (token index within sentence, line)
    open: BTreeMap<u32, Vec<(usize, usize)>>,
    starts: HashSet<(u32, usize, usize)>,
    spans: Vec<(MentionSpan, u32)>,
}

impl Builder {
    fn new(doc_id: &str, line: usize) -> Self {
        Self {
            doc: Document::new(doc_id, Vec::new()),
            begin_line: line,
            current: Vec::new(),
            open: BTreeMap::new(),
            starts: HashSet::new(),
            spans: Vec::new(),
        }
    }

    fn end_sentence(&mut self, line: usize) -> Result<()> {
        if self.current.is_empty() {
            return Ok(());
        }
        if let Some((cid, (_, open_line))) = self
            .open
            .iter()
            .find_map(|(cid, stack)| stack.last().map(|top| (*cid, *top)))
        {
            return Err(Error::Parse {
                line: open_line,
                message: format!(
                    "unbalanced span: cluster {cid} is still open at the sentence break on line {line}"
                ),
            });
        }
        self.doc.sentences.push(std::mem::take(&mut self.current));
        Ok(())
    }

    fn token(&mut self, cols: &[&str], line: usize) -> Result<()> {
        let sentence = self.doc.sentences.len();
        let pos = self.current.len();
        self.current.push(cols[WORD_COLUMN].to_string());
        for bracket in parse_cell(cols[cols.len() - 1], line)? {
            match bracket {
                Bracket::Open(id) | Bracket::Single(id) => {
                    if !self.starts.insert((id, sentence, pos)) {
                        return Err(Error::Parse {
                            line,
                            message: format!("duplicate open bracket for cluster {id}"),
                        });
                    }
                    if let Bracket::Single(_) = bracket {
                        self.spans.push((MentionSpan::new(sentence, pos, pos), id));
                    } else {
                        self.open.entry(id).or_default().push((pos, line));
                    }
                }
                Bracket::Close(id) => {
                    let Some((start, _)) = self.open.get_mut(&id).and_then(Vec::pop) else {
                        return Err(Error::Parse {
                            line,
                            message: format!("unbalanced span: cluster {id} closed but never opened"),
                        });
                    };
                    self.spans.push((MentionSpan::new(sentence, start, pos), id));
                }
            }
        }
        Ok(())
    }

    fn finish(mut self, line: usize) -> Result<Document> {
        self.end_sentence(line)?;
        let mut doc = self.doc;
        for (span, cid) in self.spans {
            doc.mentions.push(span);
            doc.clusters
                .entry(cid)
                .or_default()
                .push(doc.mentions.len() - 1);
        }
        doc.canonicalize();
        Ok(doc)
    }
}

/// Parses every `#begin document` block of a CoNLL-2012 file.
pub fn parse_conll(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut builder: Option<Builder> = None;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix(BEGIN) {
            if let Some(open) = &builder {
                return Err(Error::Parse {
                    line,
                    message: format!("document opened on line {} was never ended", open.begin_line),
                });
            }
            builder = Some(Builder::new(rest.trim(), line));
        } else if trimmed.starts_with(END) {
            let b = builder.take().ok_or_else(|| Error::Parse {
                line,
                message: "#end document without #begin document".into(),
            })?;
            docs.push(b.finish(line)?);
        } else if trimmed.is_empty() {
            if let Some(b) = builder.as_mut() {
                b.end_sentence(line)?;
            }
        } else if trimmed.starts_with('#') {
            continue;
        } else {
            let b = builder.as_mut().ok_or_else(|| Error::Parse {
                line,
                message: "token line outside of a document".into(),
            })?;
            let cols: Vec<&str> = trimmed.split_whitespace().collect();
            if cols.len() < MIN_COLUMNS {
                return Err(Error::Parse {
                    line,
                    message: format!("expected at least {MIN_COLUMNS} columns, found {}", cols.len()),
                });
            }
            b.token(&cols, line)?;
        }
    }
    if let Some(b) = builder {
        return Err(Error::Parse {
            line: last_line,
            message: format!("document opened on line {} was never ended", b.begin_line),
        });
    }
    Ok(docs)
}

fn key_columns(doc_id: &str) -> (String, String) {
    // "(bc/cctv/00/cctv_0000); part 000" -> ("bc/cctv/00/cctv_0000", "0")
    if let Some((name, part)) = doc_id.split_once("); part ") {
        if let (Some(name), Ok(part)) = (name.strip_prefix('('), part.trim().parse::<u32>()) {
            return (name.to_string(), part.to_string());
        }
    }
    let name: String = doc_id
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    let name = if name.is_empty() { "-".to_string() } else { name };
    (name, "0".to_string())
}

/// Writes documents in the layout `parse_conll` reads. Entity types are not
/// part of CoNLL output; use `write_sidecar` for those.
pub fn emit_conll(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        let (name, part) = key_columns(&doc.doc_id);
        let owner = doc.mention_clusters();
        // per (sentence, token): closes, singles, opens
        let mut cells: BTreeMap<(usize, usize), [Vec<String>; 3]> = BTreeMap::new();
        for (i, m) in doc.mentions.iter().enumerate() {
            let Some(cid) = owner[i] else { continue };
            if m.start == m.end {
                cells.entry((m.sentence_index, m.start)).or_default()[1].push(format!("({cid})"));
            } else {
                cells.entry((m.sentence_index, m.start)).or_default()[2].push(format!("({cid}"));
                cells.entry((m.sentence_index, m.end)).or_default()[0].push(format!("{cid})"));
            }
        }
        writeln!(out, "{BEGIN} {}", doc.doc_id).unwrap();
        for (si, sentence) in doc.sentences.iter().enumerate() {
            for (ti, word) in sentence.iter().enumerate() {
                let coref = match cells.get(&(si, ti)) {
                    Some(groups) => groups.concat().join("|"),
                    None => "-".to_string(),
                };
                writeln!(
                    out,
                    "{name}\t{part}\t{ti}\t{word}\t-\t-\t-\t-\t-\t-\t*\t{coref}"
                )
                .unwrap();
            }
            out.push('\n');
        }
        out.push_str(END);
        out.push('\n');
    }
    out
}
