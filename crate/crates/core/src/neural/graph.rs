//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! Every operation appends a node; `backward` walks the tape in reverse.
//! Parameter leaves are tied to names in a [`Parameters`] set so gradients
//! come back keyed the same way.

use std::collections::HashMap;

use rand::Rng;

use super::{Gradients, Matrix, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// One anaphor in the antecedent-ranking loss. Indices point into the score
/// column. An empty `gold` list makes the dummy antecedent the gold choice.
#[derive(Debug, Clone, PartialEq)]
pub struct RankGroup {
    pub candidates: Vec<usize>,
    pub gold: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Rows(Var, Vec<usize>),
    Cols(Var, usize),
    Transpose(Var),
    SoftmaxRows(Var),
    SumAll(Var),
    MeanRows(Var),
    RankingLoss(Var, Vec<RankGroup>),
    SoftmaxXent(Var, Vec<usize>),
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.get(0, 0)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf for a named parameter; repeated calls return the same node.
    pub fn param(&mut self, params: &Parameters, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = params.get(name)?.to_matrix();
        let v = self.push(value, Op::Leaf);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    fn check(&self, ok: bool, what: impl FnOnce() -> String) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::shape(what()))
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        self.check(sa.1 == sb.0, || format!("matmul {sa:?} x {sb:?}"))?;
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        self.check(sa == sb, || format!("add {sa:?} + {sb:?}"))?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds a 1×m row to every row of an n×m matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        self.check(sr.0 == 1 && sr.1 == sa.1, || format!("add_row {sa:?} + {sr:?}"))?;
        let mut value = self.value(a).clone();
        let r = self.value(row).row(0).to_vec();
        for i in 0..sa.0 {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r) {
                *v += b;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        self.check(sa == sb, || format!("mul {sa:?} * {sb:?}"))?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Matrix::from_vec(sa.0, sa.1, data), Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|v| v * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        self.check(parts.iter().all(|&p| self.shape(p).0 == rows), || {
            "concat_cols: row counts differ".into()
        })?;
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut at = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                value.row_mut(r)[at..at + src.len()].copy_from_slice(src);
                at += src.len();
            }
        }
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        self.check(parts.iter().all(|&p| self.shape(p).1 == cols), || {
            "concat_rows: column counts differ".into()
        })?;
        let rows: usize = parts.iter().map(|&p| self.shape(p).0).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec())))
    }

    /// Gathers rows by index (repeats allowed).
    pub fn rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let (n, cols) = self.shape(a);
        self.check(index.iter().all(|&i| i < n), || {
            format!("rows: index out of range for {n} rows")
        })?;
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index {
            data.extend_from_slice(self.value(a).row(i));
        }
        Ok(self.push(Matrix::from_vec(index.len(), cols, data), Op::Rows(a, index.to_vec())))
    }

    /// Column slice `[start, start + len)`.
    pub fn cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        self.check(start + len <= cols, || {
            format!("cols: {start}+{len} exceeds {cols}")
        })?;
        let mut value = Matrix::zeros(rows, len);
        for r in 0..rows {
            value
                .row_mut(r)
                .copy_from_slice(&self.value(a).row(r)[start..start + len]);
        }
        Ok(self.push(value, Op::Cols(a, start)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).data().iter().sum();
        self.push(Matrix::from_vec(1, 1, vec![s]), Op::SumAll(a))
    }

    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        self.check(self.shape(a).0 > 0, || "mean_rows of an empty matrix".into())?;
        let value = Matrix::row_vector(self.value(a).mean_rows());
        Ok(self.push(value, Op::MeanRows(a)))
    }

    /// Multiplies by a fresh inverted-dropout mask. Identity when `rate` is 0.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut impl Rng) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(a);
        }
        let (r, c) = self.shape(a);
        let keep = 1.0 - rate;
        let mask = (0..r * c)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mask = self.constant(Matrix::from_vec(r, c, mask));
        self.mul(a, mask)
    }

    /// Summed negative log marginal likelihood of gold antecedents, with the
    /// dummy antecedent scored 0 in every group.
    pub fn ranking_loss(&mut self, scores: Var, groups: Vec<RankGroup>) -> Result<Var> {
        let (n, c) = self.shape(scores);
        self.check(c == 1, || "ranking_loss expects a score column".into())?;
        self.check(
            groups
                .iter()
                .all(|g| g.candidates.iter().chain(&g.gold).all(|&i| i < n)),
            || "ranking_loss index out of range".into(),
        )?;
        let s = self.value(scores).data();
        let mut total = 0.0;
        for g in &groups {
            let all = logsumexp(g.candidates.iter().map(|&i| s[i]).chain(std::iter::once(0.0)));
            let gold = if g.gold.is_empty() {
                0.0
            } else {
                logsumexp(g.gold.iter().map(|&i| s[i]))
            };
            total += all - gold;
        }
        Ok(self.push(Matrix::from_vec(1, 1, vec![total]), Op::RankingLoss(scores, groups)))
    }

    /// Mean cross-entropy of row-wise softmax against class targets.
    pub fn softmax_xent(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (n, c) = self.shape(logits);
        self.check(n == targets.len() && n > 0, || {
            format!("softmax_xent: {n} rows, {} targets", targets.len())
        })?;
        self.check(targets.iter().all(|&t| t < c), || "softmax_xent: target out of range".into())?;
        let value = self.value(logits);
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = value.row(r);
            total += logsumexp(row.iter().copied()) - row[t];
        }
        let loss = total / n as f64;
        Ok(self.push(Matrix::from_vec(1, 1, vec![loss]), Op::SoftmaxXent(logits, targets.to_vec())))
    }

    /// Gradients of the scalar `loss` for every tensor in `params`; tensors
    /// the tape never touched get zeros.
    pub fn backward(&self, loss: Var, params: &Parameters) -> Result<Gradients> {
        self.check(self.shape(loss) == (1, 1), || "backward needs a scalar loss".into())?;
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));

        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(gout) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(gout);
                }
                Op::MatMul(a, b) => {
                    let ga = gout.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&gout);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, gout.clone());
                    acc(&mut grads, *b, gout);
                }
                Op::AddRow(a, row) => {
                    let gr = Matrix::row_vector(
                        (0..gout.cols())
                            .map(|j| (0..gout.rows()).map(|i| gout.get(i, j)).sum())
                            .collect(),
                    );
                    acc(&mut grads, *a, gout);
                    acc(&mut grads, *row, gr);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let (r, c) = gout.shape();
                    let ga = gout.data().iter().zip(vb.data()).map(|(g, y)| g * y).collect();
                    let gb = gout.data().iter().zip(va.data()).map(|(g, x)| g * x).collect();
                    acc(&mut grads, *a, Matrix::from_vec(r, c, ga));
                    acc(&mut grads, *b, Matrix::from_vec(r, c, gb));
                }
                Op::Scale(a, f) => acc(&mut grads, *a, gout.map(|g| g * f)),
                Op::Tanh(a) => {
                    let g = elementwise(&gout, &node.value, |g, y| g * (1.0 - y * y));
                    acc(&mut grads, *a, g);
                }
                Op::Sigmoid(a) => {
                    let g = elementwise(&gout, &node.value, |g, y| g * y * (1.0 - y));
                    acc(&mut grads, *a, g);
                }
                Op::Relu(a) => {
                    let g = elementwise(&gout, &node.value, |g, y| if y > 0.0 { g } else { 0.0 });
                    acc(&mut grads, *a, g);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let mut g = Matrix::zeros(rows, cols);
                        for r in 0..rows {
                            g.row_mut(r).copy_from_slice(&gout.row(r)[at..at + cols]);
                        }
                        at += cols;
                        acc(&mut grads, p, g);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let g = Matrix::from_vec(
                            rows,
                            cols,
                            gout.data()[at * cols..(at + rows) * cols].to_vec(),
                        );
                        at += rows;
                        acc(&mut grads, p, g);
                    }
                }
                Op::Rows(a, index) => {
                    let (rows, cols) = self.shape(*a);
                    let mut g = Matrix::zeros(rows, cols);
                    for (k, &i) in index.iter().enumerate() {
                        for (d, s) in g.row_mut(i).iter_mut().zip(gout.row(k)) {
                            *d += s;
                        }
                    }
                    acc(&mut grads, *a, g);
                }
                Op::Cols(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut g = Matrix::zeros(rows, cols);
                    let len = gout.cols();
                    for r in 0..rows {
                        g.row_mut(r)[*start..start + len].copy_from_slice(gout.row(r));
                    }
                    acc(&mut grads, *a, g);
                }
                Op::Transpose(a) => acc(&mut grads, *a, gout.transpose()),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut g = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = gout.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                        for ((d, gy), yv) in g.row_mut(r).iter_mut().zip(gout.row(r)).zip(y.row(r)) {
                            *d = yv * (gy - dot);
                        }
                    }
                    acc(&mut grads, *a, g);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, Matrix::from_vec(r, c, vec![gout.get(0, 0); r * c]));
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.shape(*a);
                    let mut g = Matrix::zeros(r, c);
                    for i in 0..r {
                        for (d, s) in g.row_mut(i).iter_mut().zip(gout.row(0)) {
                            *d = s / r as f64;
                        }
                    }
                    acc(&mut grads, *a, g);
                }
                Op::RankingLoss(scores, groups) => {
                    let upstream = gout.get(0, 0);
                    let s = self.value(*scores).data();
                    let mut g = Matrix::zeros(s.len(), 1);
                    for grp in groups {
                        let all = logsumexp(
                            grp.candidates.iter().map(|&i| s[i]).chain(std::iter::once(0.0)),
                        );
                        for &i in &grp.candidates {
                            g.data_mut()[i] += upstream * (s[i] - all).exp();
                        }
                        if !grp.gold.is_empty() {
                            let gold = logsumexp(grp.gold.iter().map(|&i| s[i]));
                            for &i in &grp.gold {
                                g.data_mut()[i] -= upstream * (s[i] - gold).exp();
                            }
                        }
                    }
                    acc(&mut grads, *scores, g);
                }
                Op::SoftmaxXent(logits, targets) => {
                    let upstream = gout.get(0, 0);
                    let mut p = self.value(*logits).clone();
                    let n = targets.len() as f64;
                    for (r, &t) in targets.iter().enumerate() {
                        let row = p.row_mut(r);
                        softmax_in_place(row);
                        row[t] -= 1.0;
                        row.iter_mut().for_each(|v| *v *= upstream / n);
                    }
                    acc(&mut grads, *logits, p);
                }
            }
        }

        let mut out = Gradients::zeros_like(params);
        for (name, &v) in &self.params {
            if let Some(g) = grads.get(v.0).and_then(Option::as_ref) {
                out.accumulate(name, g);
            }
        }
        Ok(out)
    }
}

fn elementwise(g: &Matrix, y: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = g.data().iter().zip(y.data()).map(|(&a, &b)| f(a, b)).collect();
    Matrix::from_vec(g.rows(), g.cols(), data)
}
