//! BiLSTM, span attention, feed-forward scorers and linear heads built on
//! the tape. Each layer owns a name prefix inside a [`Parameters`] set.

use rand_chacha::ChaCha8Rng;

use super::{Graph, Matrix, Parameters, Var};
use crate::error::{Error, Result};

/// Training mode carries the dropout rate and the run's random stream.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut ChaCha8Rng },
}

impl Mode<'_> {
    pub fn dropout(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        match self {
            Mode::Eval => Ok(x),
            Mode::Train { dropout, rng } => g.dropout(x, *dropout, *rng),
        }
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

fn name(prefix: &str, leaf: &str) -> String {
    format!("{prefix}.{leaf}")
}

pub fn declare_linear(params: &mut Parameters, prefix: &str, input: usize, output: usize) {
    params.declare(name(prefix, "w"), input, output);
    params.declare(name(prefix, "b"), 1, output);
}

pub fn linear(g: &mut Graph, params: &Parameters, prefix: &str, x: Var) -> Result<Var> {
    let w = g.param(params, &name(prefix, "w"))?;
    let b = g.param(params, &name(prefix, "b"))?;
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

/// Gate layout per direction is (input, forget, cell, output), one fused
/// bias per direction.
pub fn declare_bilstm(params: &mut Parameters, prefix: &str, input: usize, hidden: usize) {
    for dir in ["fwd", "bwd"] {
        params.declare(format!("{prefix}.{dir}.w_ih"), input, 4 * hidden);
        params.declare(format!("{prefix}.{dir}.w_hh"), hidden, 4 * hidden);
        params.declare(format!("{prefix}.{dir}.b"), 1, 4 * hidden);
    }
}

fn lstm_direction(
    g: &mut Graph,
    params: &Parameters,
    prefix: &str,
    x: Var,
    reverse: bool,
) -> Result<Vec<Var>> {
    let w_ih = g.param(params, &format!("{prefix}.w_ih"))?;
    let w_hh = g.param(params, &format!("{prefix}.w_hh"))?;
    let b = g.param(params, &format!("{prefix}.b"))?;
    let hidden = g.shape(w_hh).0;
    let steps = g.shape(x).0;
    let projected = g.matmul(x, w_ih)?;
    let projected = g.add_row(projected, b)?;

    let mut h = g.constant(Matrix::zeros(1, hidden));
    let mut c = g.constant(Matrix::zeros(1, hidden));
    let mut out = vec![h; steps];
    let order: Vec<usize> = if reverse {
        (0..steps).rev().collect()
    } else {
        (0..steps).collect()
    };
    for t in order {
        let xt = g.rows(projected, &[t])?;
        let ht = g.matmul(h, w_hh)?;
        let gates = g.add(xt, ht)?;
        let i = g.cols(gates, 0, hidden)?;
        let i = g.sigmoid(i);
        let f = g.cols(gates, hidden, hidden)?;
        let f = g.sigmoid(f);
        let cand = g.cols(gates, 2 * hidden, hidden)?;
        let cand = g.tanh(cand);
        let o = g.cols(gates, 3 * hidden, hidden)?;
        let o = g.sigmoid(o);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        c = g.add(keep, write)?;
        let squashed = g.tanh(c);
        h = g.mul(o, squashed)?;
        out[t] = h;
    }
    Ok(out)
}

/// Row i of the result is `[forward_i; backward_i]`.
pub fn bilstm_forward(g: &mut Graph, params: &Parameters, prefix: &str, x: Var) -> Result<Var> {
    let fwd = format!("{prefix}.fwd");
    let bwd = format!("{prefix}.bwd");
    let w_ih = params.get(&format!("{fwd}.w_ih"))?;
    let (steps, input) = g.shape(x);
    if input != w_ih.rows {
        return Err(Error::shape(format!(
            "bilstm input width {input}, weights expect {}",
            w_ih.rows
        )));
    }
    let hidden = params.get(&format!("{fwd}.w_hh"))?.rows;
    if steps == 0 {
        return Ok(g.constant(Matrix::zeros(0, 2 * hidden)));
    }
    let forward = lstm_direction(g, params, &fwd, x, false)?;
    let backward = lstm_direction(g, params, &bwd, x, true)?;
    let f = g.concat_rows(&forward)?;
    let b = g.concat_rows(&backward)?;
    g.concat_cols(&[f, b])
}

/// Graph-free BiLSTM over a T×D token matrix.
pub fn bilstm(tokens: &Matrix, params: &Parameters, prefix: &str) -> Result<Matrix> {
    let mut g = Graph::new();
    let x = g.constant(tokens.clone());
    let out = bilstm_forward(&mut g, params, prefix, x)?;
    Ok(g.value(out).clone())
}

pub fn declare_attention(params: &mut Parameters, prefix: &str, dim: usize) {
    declare_linear(params, prefix, dim, 1);
}

/// One scalar score per row of `states`.
pub fn attention_scores(g: &mut Graph, params: &Parameters, prefix: &str, states: Var) -> Result<Var> {
    linear(g, params, prefix, states)
}

/// Softmax-weighted sum of rows `start..=end` of `states`, using the
/// precomputed per-row scores.
pub fn span_attention(g: &mut Graph, states: Var, scores: Var, start: usize, end: usize) -> Result<Var> {
    if end < start {
        return Err(Error::invalid(format!("empty span {start}..={end}")));
    }
    let idx: Vec<usize> = (start..=end).collect();
    let span_scores = g.rows(scores, &idx)?;
    let row = g.transpose(span_scores);
    let weights = g.softmax_rows(row);
    let span_states = g.rows(states, &idx)?;
    g.matmul(weights, span_states)
}

/// Graph-free span attention vector; also returns the attention weights.
pub fn span_attention_value(
    states: &Matrix,
    start: usize,
    end: usize,
    params: &Parameters,
    prefix: &str,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g = Graph::new();
    let x = g.constant(states.clone());
    let scores = attention_scores(&mut g, params, prefix, x)?;
    let att = span_attention(&mut g, x, scores, start, end)?;
    let span_scores: Vec<f64> = (start..=end).map(|i| g.value(scores).get(i, 0)).collect();
    let mut weights = span_scores;
    super::softmax_in_place(&mut weights);
    Ok((g.value(att).row(0).to_vec(), weights))
}

/// Hidden layers `prefix.0 .. prefix.{n-1}` with ReLU, then `prefix.out`.
pub fn declare_ffnn(params: &mut Parameters, prefix: &str, input: usize, hidden: &[usize]) {
    let mut width = input;
    for (i, &h) in hidden.iter().enumerate() {
        declare_linear(params, &format!("{prefix}.{i}"), width, h);
        width = h;
    }
    declare_linear(params, &format!("{prefix}.out"), width, 1);
}

pub fn ffnn_forward(
    g: &mut Graph,
    params: &Parameters,
    prefix: &str,
    x: Var,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let mut h = x;
    let mut i = 0;
    while params.contains(&format!("{prefix}.{i}.w")) {
        let expected = params.get(&format!("{prefix}.{i}.w"))?.rows;
        if g.shape(h).1 != expected {
            return Err(Error::shape(format!(
                "{prefix}.{i} expects width {expected}, got {}",
                g.shape(h).1
            )));
        }
        h = linear(g, params, &format!("{prefix}.{i}"), h)?;
        h = g.relu(h);
        h = mode.dropout(g, h)?;
        i += 1;
    }
    linear(g, params, &format!("{prefix}.out"), h)
}

/// Graph-free scalar score of one input vector.
pub fn ffnn_score(input: &[f64], params: &Parameters, prefix: &str) -> Result<f64> {
    let mut g = Graph::new();
    let x = g.constant(Matrix::row_vector(input.to_vec()));
    let s = ffnn_forward(&mut g, params, prefix, x, &mut Mode::Eval)?;
    Ok(g.scalar(s))
}
