use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::CorefModel;
use super::{ModelVariant, TokenEmbeddings};
use crate::config::Config;
use crate::corpus::{Document, TypeScheme};
use crate::error::{Error, Result};
use crate::neural::{adam_step, AdamState, Graph, Matrix, Mode};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean document loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// One Adam update on one document. Returns the loss before the update, or
/// `None` when the document has no candidate pairs.
pub fn train_step(
    model: &mut CorefModel,
    state: &mut AdamState,
    doc: &Document,
    embeddings: &Matrix,
    rng: &mut ChaCha8Rng,
) -> Result<Option<f64>> {
    let mut g = Graph::new();
    let dropout = model.config.dropout;
    let mut mode = Mode::Train { dropout, rng };
    let Some(loss) = model.loss_node(&mut g, doc, embeddings, &mut mode)? else {
        return Ok(None);
    };
    let value = g.scalar(loss);
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss on document `{}`", doc.doc_id)));
    }
    let grads = g.backward(loss, &model.params)?;
    adam_step(&mut model.params, &grads, state, model.config.learning_rate)?;
    Ok(Some(value))
}

/// Trains a fresh model, one document per update, shuffling documents each
/// epoch with a stream seeded from `config.seed`.
pub fn train(
    docs: &[Document],
    embedder: &dyn TokenEmbeddings,
    variant: ModelVariant,
    scheme: &TypeScheme,
    config: Config,
) -> Result<(CorefModel, TrainReport)> {
    if docs.is_empty() {
        return Err(Error::invalid("no training documents"));
    }
    for d in docs {
        d.validate()?;
    }
    if variant.uses_types() && docs.iter().all(|d| d.mentions.iter().all(|m| m.entity_type.is_none())) {
        return Err(Error::invalid(format!(
            "variant {variant} needs typed mentions but the training data has none"
        )));
    }
    let embeddings = docs.iter().map(|d| embedder.embed(d)).collect::<Result<Vec<_>>>()?;
    let dim = embeddings[0].cols();
    if let Some(bad) = embeddings.iter().zip(docs).find(|(e, _)| e.cols() != dim) {
        return Err(Error::shape(format!(
            "document `{}` has embedding width {}, expected {dim}",
            bad.1.doc_id,
            bad.0.cols()
        )));
    }

    let epochs = config.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = CorefModel::new(config, variant, scheme, dim)?;
    let mut state = AdamState::default();
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..docs.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let (mut total, mut counted) = (0.0, 0usize);
        for &i in &order {
            if let Some(l) = train_step(&mut model, &mut state, &docs[i], &embeddings[i], &mut rng)? {
                total += l;
                counted += 1;
            }
        }
        report.epoch_losses.push(if counted == 0 { 0.0 } else { total / counted as f64 });
    }
    report.steps = state.step_count();
    Ok((model, report))
}
