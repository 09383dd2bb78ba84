use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 4] = b"ETCK";
const CHECKPOINT_VERSION: u32 = 1;
pub const INIT_RANGE: f32 = 0.1;

/// A named f32 tensor (always 2-D; vectors are 1×n).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Named trainable tensors with shapes fixed at construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parameters {
    tensors: BTreeMap<String, Tensor>,
}

impl Parameters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    /// Declares a zero tensor; call [`Parameters::init_uniform`] afterwards.
    pub fn declare(&mut self, name: impl Into<String>, rows: usize, cols: usize) {
        self.insert(name, Tensor::zeros(rows, cols));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::shape(format!("no parameter named `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::shape(format!("no parameter named `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Fills every tensor uniformly in [-0.1, 0.1], visiting names in order.
    pub fn init_uniform(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for tensor in self.tensors.values_mut() {
            for v in &mut tensor.data {
                *v = rng.gen_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
    }

    pub fn fill(&mut self, value: f32) {
        for tensor in self.tensors.values_mut() {
            tensor.data.iter_mut().for_each(|v| *v = value);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors
            .values()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Writes a checkpoint: magic, version, metadata blob, then every tensor
    /// as `[name][rows][cols][f32 LE values]`.
    pub fn write_checkpoint(&self, mut out: impl Write, metadata: &[u8]) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(metadata.len() as u32).to_le_bytes())?;
        out.write_all(metadata)?;
        out.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(t.rows as u32).to_le_bytes())?;
            out.write_all(&(t.cols as u32).to_le_bytes())?;
            for v in &t.data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a checkpoint and returns the parameters with the metadata blob.
    pub fn read_checkpoint(mut input: impl Read) -> Result<(Self, Vec<u8>)> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut at = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            let slice = bytes.get(at..at + n).ok_or_else(|| Error::Format {
                offset: at as u64,
                message: format!("truncated checkpoint: {what}"),
            })?;
            at += n;
            Ok(slice)
        };
        if take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad checkpoint magic".into(),
            });
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let version = u32_at(take(4, "version")?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported checkpoint version {version}"),
            });
        }
        let meta_len = u32_at(take(4, "metadata length")?) as usize;
        let metadata = take(meta_len, "metadata")?.to_vec();
        let count = u32_at(take(4, "tensor count")?) as usize;
        let mut params = Parameters::new();
        for _ in 0..count {
            let name_len = u32_at(take(4, "name length")?) as usize;
            let name = String::from_utf8(take(name_len, "name")?.to_vec()).map_err(|_| {
                Error::Format {
                    offset: 0,
                    message: "tensor name is not UTF-8".into(),
                }
            })?;
            let rows = u32_at(take(4, "rows")?) as usize;
            let cols = u32_at(take(4, "cols")?) as usize;
            let data = take(rows * cols * 4, "tensor data")?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            params.insert(name, Tensor { rows, cols, data });
        }
        Ok((params, metadata))
    }
}

/// Gradients keyed like [`Parameters`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    grads: BTreeMap<String, Matrix>,
}

impl Gradients {
    pub fn zeros_like(params: &Parameters) -> Self {
        Self {
            grads: params
                .iter()
                .map(|(n, t)| (n.to_string(), Matrix::zeros(t.rows, t.cols)))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.grads.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.grads.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn accumulate(&mut self, name: &str, g: &Matrix) {
        if let Some(acc) = self.grads.get_mut(name) {
            acc.add_assign(g);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}
