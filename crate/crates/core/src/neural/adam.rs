use std::collections::BTreeMap;

use super::{Gradients, Parameters};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update. Gradients are checked for non-finite values before any
/// parameter changes.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    for (name, g) in grads.iter() {
        if !g.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        let t = params.get(name)?;
        if (t.rows, t.cols) != g.shape() {
            return Err(Error::shape(format!(
                "gradient for `{name}` is {:?}, parameter is {:?}",
                g.shape(),
                (t.rows, t.cols)
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (name, g) in grads.iter() {
        let tensor = params.get_mut(name)?;
        let m = state
            .m
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; g.data().len()]);
        let v = state
            .v
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; g.data().len()]);
        for (((p, &gi), mi), vi) in tensor.data.iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
            *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
            let update = lr * (*mi / c1) / ((*vi / c2).sqrt() + EPSILON);
            *p = (f64::from(*p) - update) as f32;
        }
    }
    Ok(())
}
