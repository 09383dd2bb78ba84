use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::evaluate::macro_f1;
use crate::config::TypePredConfig;
use crate::error::{Error, Result};
use crate::neural::layers::{declare_linear, linear};
use crate::neural::{adam_step, softmax_in_place, AdamState, Gradients, Graph, Matrix, Parameters};

const HEAD: &str = "clf";

#[derive(Debug, Clone, PartialEq)]
pub struct TypePrediction {
    /// Probability per class label, in label order.
    pub distribution: Vec<f64>,
    pub label: String,
}

/// Fully-connected softmax head over pooled vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeClassifier {
    pub labels: Vec<String>,
    pub dim: usize,
    pub params: Parameters,
}

impl TypeClassifier {
    pub fn new(labels: Vec<String>, dim: usize, seed: u64) -> Result<Self> {
        if labels.is_empty() || dim == 0 {
            return Err(Error::invalid("classifier needs at least one label and a positive width"));
        }
        let mut params = Parameters::new();
        declare_linear(&mut params, HEAD, dim, labels.len());
        params.init_uniform(seed);
        Ok(Self { labels, dim, params })
    }

    fn check(&self, xs: &Matrix) -> Result<()> {
        if xs.cols() != self.dim {
            return Err(Error::shape(format!(
                "pooled vectors have width {}, classifier expects {}",
                xs.cols(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn logits(&self, xs: &Matrix) -> Result<Matrix> {
        self.check(xs)?;
        let mut g = Graph::new();
        let x = g.constant(xs.clone());
        let out = linear(&mut g, &self.params, HEAD, x)?;
        Ok(g.value(out).clone())
    }

    pub fn classify(&self, pooled: &[f64]) -> Result<TypePrediction> {
        let logits = self.logits(&Matrix::row_vector(pooled.to_vec()))?;
        let mut distribution = logits.row(0).to_vec();
        softmax_in_place(&mut distribution);
        let best = argmax(&distribution);
        Ok(TypePrediction { label: self.labels[best].clone(), distribution })
    }

    pub fn predict_indices(&self, xs: &Matrix) -> Result<Vec<usize>> {
        let logits = self.logits(xs)?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }

    /// Mean cross-entropy of `targets` with gradients.
    pub fn loss_and_gradients(&self, xs: &Matrix, targets: &[usize]) -> Result<(f64, Gradients)> {
        self.check(xs)?;
        let mut g = Graph::new();
        let x = g.constant(xs.clone());
        let logits = linear(&mut g, &self.params, HEAD, x)?;
        let loss = g.softmax_xent(logits, targets)?;
        Ok((g.scalar(loss), g.backward(loss, &self.params)?))
    }

    pub fn loss(&self, xs: &Matrix, targets: &[usize]) -> Result<f64> {
        Ok(self.loss_and_gradients(xs, targets)?.0)
    }

    /// Minibatch Adam with early stopping on dev Macro F1, dev loss breaking
    /// ties; the best epoch's weights are kept. Without dev data the
    /// training set is used.
    pub fn fit(
        labels: Vec<String>,
        train: &[(Vec<f64>, usize)],
        dev: &[(Vec<f64>, usize)],
        config: &TypePredConfig,
        seed: u64,
    ) -> Result<Self> {
        let dim = train
            .first()
            .map(|(x, _)| x.len())
            .ok_or_else(|| Error::invalid("no typed training mentions"))?;
        let mut model = Self::new(labels, dim, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = AdamState::default();
        let select = if dev.is_empty() { train } else { dev };
        let (select_x, select_y) = stack(select);
        let mut best = (f64::NEG_INFINITY, f64::INFINITY, model.params.clone());
        let mut stale = 0;
        let mut order: Vec<usize> = (0..train.len()).collect();
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let rows: Vec<(Vec<f64>, usize)> = batch.iter().map(|&i| train[i].clone()).collect();
                let (x, y) = stack(&rows);
                let (_, grads) = model.loss_and_gradients(&x, &y)?;
                adam_step(&mut model.params, &grads, &mut state, config.learning_rate)?;
            }
            let f1 = macro_f1(&select_y, &model.predict_indices(&select_x)?);
            let loss = model.loss(&select_x, &select_y)?;
            if f1 > best.0 || (f1 == best.0 && loss < best.1) {
                best = (f1, loss, model.params.clone());
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
        model.params = best.2;
        Ok(model)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn stack(rows: &[(Vec<f64>, usize)]) -> (Matrix, Vec<usize>) {
    let x = Matrix::from_rows(&rows.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>());
    (x, rows.iter().map(|(_, y)| *y).collect())
}
