//! CTE1 contextual token embedding stores.
//!
//! Layout: magic `CTE1`, then records of
//! `[u32 id_len][id bytes][u32 token_count][u32 dim][token_count*dim f32]`,
//! all integers and floats little-endian. There is no footer; the index is
//! built by one sequential scan on open.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::neural::Matrix;

pub const MAGIC: &[u8; 4] = b"CTE1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    offset: usize,
    token_count: usize,
}

/// Immutable after open; `fetch` only reads, so the store can be shared
/// across threads.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    bytes: Vec<u8>,
    index: HashMap<String, Entry>,
    order: Vec<String>,
    dim: Option<usize>,
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            offset: at as u64,
            message: format!("truncated record: missing {what}"),
        })
}

impl EmbeddingStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic, expected CTE1".into(),
            });
        }
        let mut index = HashMap::new();
        let mut order = Vec::new();
        let mut dim = None;
        let mut at = 4;
        while at < bytes.len() {
            let record_start = at;
            let id_len = read_u32(&bytes, at, "id length")? as usize;
            at += 4;
            let id = bytes.get(at..at + id_len).ok_or_else(|| Error::Format {
                offset: at as u64,
                message: "truncated record: id bytes".into(),
            })?;
            let id = std::str::from_utf8(id)
                .map_err(|_| Error::Format {
                    offset: at as u64,
                    message: "document id is not UTF-8".into(),
                })?
                .to_string();
            at += id_len;
            let token_count = read_u32(&bytes, at, "token count")? as usize;
            at += 4;
            let record_dim = read_u32(&bytes, at, "dim")? as usize;
            at += 4;
            if record_dim == 0 {
                return Err(Error::Format {
                    offset: (at - 4) as u64,
                    message: "dim must be positive".into(),
                });
            }
            match dim {
                None => dim = Some(record_dim),
                Some(d) if d != record_dim => {
                    return Err(Error::Format {
                        offset: (at - 4) as u64,
                        message: format!("dim {record_dim} differs from store dim {d}"),
                    })
                }
                _ => {}
            }
            let payload = token_count * record_dim * 4;
            if at + payload > bytes.len() {
                return Err(Error::Format {
                    offset: record_start as u64,
                    message: format!("truncated record for `{id}`"),
                });
            }
            if index.contains_key(&id) {
                return Err(Error::Format {
                    offset: record_start as u64,
                    message: format!("duplicate record for `{id}`"),
                });
            }
            index.insert(id.clone(), Entry { offset: at, token_count });
            order.push(id);
            at += payload;
        }
        Ok(Self {
            bytes,
            index,
            order,
            dim,
        })
    }

    /// Embedding width; `None` for an empty store.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.index.contains_key(doc_id)
    }

    /// Document ids in file order.
    pub fn ids(&self) -> &[String] {
        &self.order
    }

    pub fn token_count(&self, doc_id: &str) -> Option<usize> {
        self.index.get(doc_id).map(|e| e.token_count)
    }

    /// Rows as stored, widened to f64 (exact).
    pub fn fetch(&self, doc_id: &str) -> Result<Matrix> {
        let rows = self.fetch_f32(doc_id)?;
        let dim = self.dim.unwrap_or(0);
        Ok(Matrix::from_vec(
            rows.len() / dim.max(1),
            dim,
            rows.into_iter().map(f64::from).collect(),
        ))
    }

    pub fn fetch_f32(&self, doc_id: &str) -> Result<Vec<f32>> {
        let entry = self
            .index
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        let n = entry.token_count * self.dim.unwrap_or(0);
        let raw = &self.bytes[entry.offset..entry.offset + 4 * n];
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    /// Arithmetic mean of the stored rows.
    pub fn fetch_mean(&self, key: &str) -> Result<Vec<f64>> {
        Ok(self.fetch(key)?.mean_rows())
    }
}

/// Streams records in CTE1 layout.
pub struct StoreWriter<W: Write> {
    out: W,
    dim: Option<usize>,
}

impl<W: Write> StoreWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        out.write_all(MAGIC)?;
        Ok(Self { out, dim: None })
    }

    pub fn write(&mut self, id: &str, token_count: usize, dim: usize, values: &[f32]) -> Result<()> {
        if dim == 0 || values.len() != token_count * dim {
            return Err(Error::shape(format!(
                "record `{id}`: {} values for {token_count}x{dim}",
                values.len()
            )));
        }
        if let Some(d) = self.dim {
            if d != dim {
                return Err(Error::shape(format!("record `{id}` has dim {dim}, store has {d}")));
            }
        }
        self.dim = Some(dim);
        let out = &mut self.out;
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
        out.write_all(&(token_count as u32).to_le_bytes())?;
        out.write_all(&(dim as u32).to_le_bytes())?;
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_matrix(&mut self, id: &str, m: &Matrix) -> Result<()> {
        let values: Vec<f32> = m.data().iter().map(|&v| v as f32).collect();
        self.write(id, m.rows(), m.cols(), &values)
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn hashed_row(key: u64, dim: usize) -> impl Iterator<Item = f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    (0..dim).map(move |_| rng.gen_range(-1.0f32..=1.0))
}

/// Deterministic stand-in for the frozen encoder. Each row mixes a
/// token-identity vector (weight 0.8) with a position vector (weight 0.2),
/// so values stay in [-1, 1] and repeated words look alike.
pub fn synth_embeddings(doc: &Document, dim: usize, seed: u64) -> Matrix {
    synth_token_embeddings(doc.tokens(), dim, seed)
}

pub fn synth_token_embeddings<'a>(
    tokens: impl IntoIterator<Item = &'a str>,
    dim: usize,
    seed: u64,
) -> Matrix {
    assert!(dim > 0, "embedding dim must be positive");
    let seed_key = fnv1a(&seed.to_le_bytes());
    let mut data = Vec::new();
    let mut rows = 0;
    for (position, token) in tokens.into_iter().enumerate() {
        let token_key = fnv1a(token.as_bytes()) ^ seed_key.rotate_left(17);
        let pos_key = (position as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ seed_key;
        data.extend(
            hashed_row(token_key, dim)
                .zip(hashed_row(pos_key, dim))
                .map(|(t, p)| f64::from((0.8 * t + 0.2 * p).clamp(-1.0, 1.0))),
        );
        rows += 1;
    }
    Matrix::from_vec(rows, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_bytes(records: &[(&str, usize, usize, Vec<f32>)]) -> Vec<u8> {
        let mut w = StoreWriter::new(Vec::new()).unwrap();
        for (id, t, d, v) in records {
            w.write(id, *t, *d, v).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn empty_store() {
        let store = EmbeddingStore::from_bytes(MAGIC.to_vec()).unwrap();
        assert!(store.is_empty());
        assert_eq!(store.dim(), None);
    }

    #[test]
    fn bad_magic() {
        let err = EmbeddingStore::from_bytes(b"XXXX".to_vec()).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
    }

    #[test]
    fn two_documents_round_trip() {
        let a: Vec<f32> = (0..12).map(|i| i as f32 * 0.25 - 1.0).collect();
        let b: Vec<f32> = (0..20).map(|i| (i as f32).sin()).collect();
        let bytes = store_bytes(&[("a", 3, 4, a.clone()), ("b", 5, 4, b.clone())]);
        let store = EmbeddingStore::from_bytes(bytes).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.dim(), Some(4));
        assert_eq!(store.fetch_f32("a").unwrap(), a);
        let fb = store.fetch_f32("b").unwrap();
        assert!(fb.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(store.fetch("b").unwrap().rows(), 5);
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut bytes = store_bytes(&[("a", 3, 4, vec![0.5; 12])]);
        bytes.truncate(bytes.len() - 3);
        match EmbeddingStore::from_bytes(bytes).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 4),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_id_and_zero_tokens() {
        let store = EmbeddingStore::from_bytes(store_bytes(&[("z", 0, 3, vec![])])).unwrap();
        assert!(matches!(store.fetch("q"), Err(Error::UnknownDocument(_))));
        let m = store.fetch("z").unwrap();
        assert_eq!((m.rows(), m.cols()), (0, 3));
    }

    #[test]
    fn mean_pooling() {
        let store = EmbeddingStore::from_bytes(store_bytes(&[("k", 2, 2, vec![1.0, 2.0, 3.0, 6.0])])).unwrap();
        assert_eq!(store.fetch_mean("k").unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let doc = Document::new("d", vec![vec!["a".into(), "b".into(), "a".into()]]);
        let x = synth_embeddings(&doc, 8, 1);
        let y = synth_embeddings(&doc, 8, 1);
        assert_eq!(x, y);
        assert_eq!(x.rows(), 3);
        assert!(x.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_ne!(x, synth_embeddings(&doc, 8, 2));
        // same word at different positions stays close
        let same: f64 = (0..8).map(|j| (x.get(0, j) - x.get(2, j)).abs()).sum();
        let diff: f64 = (0..8).map(|j| (x.get(0, j) - x.get(1, j)).abs()).sum();
        assert!(same < diff);
    }
}
