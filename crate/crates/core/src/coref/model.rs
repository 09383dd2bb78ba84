use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{bucket, quote_flags, PairFeatures, BUCKETS};
use super::ModelVariant;
use crate::config::Config;
use crate::corpus::{Document, TypeScheme};
use crate::error::{Error, Result};
use crate::neural::layers::{self, Mode};
use crate::neural::{Gradients, Graph, Matrix, Parameters, RankGroup, Var};

const LSTM: &str = "lstm";
const ATTENTION: &str = "attn";
const PAIR: &str = "pair";
const EMB_WIDTH: &str = "emb.width";
const EMB_QUOTE: &str = "emb.quote";
const EMB_DISTANCE: &str = "emb.distance";
const EMB_NESTED: &str = "emb.nested";
const EMB_CONSISTENCY: &str = "emb.tc";
const EMB_TYPE: &str = "emb.type";

/// Segment offsets of a mention vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MentionLayout {
    pub span_dim: usize,
    pub feature_dim: usize,
    pub type_dim: Option<usize>,
}

impl MentionLayout {
    pub fn start(&self) -> Range<usize> {
        0..self.span_dim
    }

    pub fn end(&self) -> Range<usize> {
        self.span_dim..2 * self.span_dim
    }

    pub fn attention(&self) -> Range<usize> {
        2 * self.span_dim..3 * self.span_dim
    }

    pub fn width(&self) -> Range<usize> {
        let at = 3 * self.span_dim;
        at..at + self.feature_dim
    }

    pub fn quote(&self) -> Range<usize> {
        let at = 3 * self.span_dim + self.feature_dim;
        at..at + self.feature_dim
    }

    pub fn entity_type(&self) -> Option<Range<usize>> {
        let at = 3 * self.span_dim + 2 * self.feature_dim;
        self.type_dim.map(|t| at..at + t)
    }

    pub fn len(&self) -> usize {
        3 * self.span_dim + 2 * self.feature_dim + self.type_dim.unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Segment offsets of a pair-scorer input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairLayout {
    pub mention_dim: usize,
    pub feature_dim: usize,
    pub with_consistency: bool,
}

impl PairLayout {
    pub fn antecedent(&self) -> Range<usize> {
        0..self.mention_dim
    }

    pub fn anaphor(&self) -> Range<usize> {
        self.mention_dim..2 * self.mention_dim
    }

    pub fn product(&self) -> Range<usize> {
        2 * self.mention_dim..3 * self.mention_dim
    }

    pub fn distance(&self) -> Range<usize> {
        let at = 3 * self.mention_dim;
        at..at + self.feature_dim
    }

    pub fn nested(&self) -> Range<usize> {
        let at = 3 * self.mention_dim + self.feature_dim;
        at..at + self.feature_dim
    }

    pub fn consistency(&self) -> Option<Range<usize>> {
        let at = 3 * self.mention_dim + 2 * self.feature_dim;
        self.with_consistency.then(|| at..at + self.feature_dim)
    }

    pub fn len(&self) -> usize {
        3 * self.mention_dim + (2 + usize::from(self.with_consistency)) * self.feature_dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MentionRepresentation {
    pub vector: Vec<f64>,
    pub layout: MentionLayout,
    pub width_bucket: usize,
    pub quoted: bool,
    /// Position among the document's mentions in reading order.
    pub ordinal: usize,
}

impl MentionRepresentation {
    pub fn segment(&self, range: Range<usize>) -> &[f64] {
        &self.vector[range]
    }
}

/// Candidate antecedent scores for every mention, in reading order.
#[derive(Debug, Clone, PartialEq)]
pub struct AntecedentScores {
    /// Mention index at each ordinal.
    pub order: Vec<usize>,
    /// Per ordinal: (candidate mention index, score), nearest candidate last.
    pub candidates: Vec<Vec<(usize, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    variant: ModelVariant,
    scheme: String,
    input_dim: usize,
    config: Config,
}

pub(crate) struct Encoded {
    pub mentions: Var,
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorefModel {
    pub config: Config,
    pub variant: ModelVariant,
    scheme: String,
    pub input_dim: usize,
    pub params: Parameters,
}

/// Mention indices sorted into reading order.
pub(crate) fn reading_order(doc: &Document) -> Vec<usize> {
    let mut order: Vec<usize> = (0..doc.mentions.len()).collect();
    order.sort_by_key(|&i| doc.mentions[i].key());
    order
}

impl CorefModel {
    /// Declares every tensor the variant needs and initializes them from
    /// `config.seed`.
    pub fn new(config: Config, variant: ModelVariant, scheme: &TypeScheme, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::invalid("input embedding width must be positive"));
        }
        let mut model = Self {
            config,
            variant,
            scheme: scheme.name().to_string(),
            input_dim,
            params: Parameters::new(),
        };
        let (h, f) = (model.config.bilstm_hidden, model.config.feature_embedding_dim);
        let params = &mut model.params;
        layers::declare_bilstm(params, LSTM, input_dim, h);
        layers::declare_attention(params, ATTENTION, 2 * h);
        params.declare(EMB_WIDTH, BUCKETS, f);
        params.declare(EMB_QUOTE, 2, f);
        params.declare(EMB_DISTANCE, BUCKETS, f);
        params.declare(EMB_NESTED, 2, f);
        if variant.uses_cross() {
            params.declare(EMB_CONSISTENCY, 2, f);
        }
        if variant.uses_self() {
            params.declare(EMB_TYPE, scheme.embedding_rows(), model.config.type_embedding_dim);
        }
        let pair_in = model.pair_layout().len();
        let fc = model.config.fc_sizes.clone();
        layers::declare_ffnn(&mut model.params, PAIR, pair_in, &fc);
        model.params.init_uniform(model.config.seed);
        Ok(model)
    }

    pub fn scheme(&self) -> &'static TypeScheme {
        TypeScheme::by_name(&self.scheme).expect("scheme checked at construction")
    }

    pub fn mention_layout(&self) -> MentionLayout {
        MentionLayout {
            span_dim: 2 * self.config.bilstm_hidden,
            feature_dim: self.config.feature_embedding_dim,
            type_dim: self.variant.uses_self().then_some(self.config.type_embedding_dim),
        }
    }

    pub fn pair_layout(&self) -> PairLayout {
        PairLayout {
            mention_dim: self.mention_layout().len(),
            feature_dim: self.config.feature_embedding_dim,
            with_consistency: self.variant.uses_cross(),
        }
    }

    fn check_embeddings(&self, doc: &Document, embeddings: &Matrix) -> Result<()> {
        if embeddings.rows() != doc.token_count() || embeddings.cols() != self.input_dim {
            return Err(Error::shape(format!(
                "document `{}`: embeddings are {:?}, expected {}x{}",
                doc.doc_id,
                embeddings.shape(),
                doc.token_count(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn mention_block(
        &self,
        g: &mut Graph,
        states: Var,
        doc: &Document,
        order: &[usize],
    ) -> Result<Var> {
        let flags = quote_flags(doc);
        let spans: Vec<(usize, usize)> = order.iter().map(|&i| doc.global_span(&doc.mentions[i])).collect();
        let starts: Vec<usize> = spans.iter().map(|s| s.0).collect();
        let ends: Vec<usize> = spans.iter().map(|s| s.1).collect();

        let scores = layers::attention_scores(g, &self.params, ATTENTION, states)?;
        let xs = g.rows(states, &starts)?;
        let xe = g.rows(states, &ends)?;
        let atts = spans
            .iter()
            .map(|&(s, e)| layers::span_attention(g, states, scores, s, e))
            .collect::<Result<Vec<_>>>()?;
        let att = g.concat_rows(&atts)?;

        let widths: Vec<usize> = order.iter().map(|&i| bucket(doc.mentions[i].width())).collect();
        let quoted: Vec<usize> = starts.iter().map(|&s| usize::from(flags[s])).collect();
        let width_table = g.param(&self.params, EMB_WIDTH)?;
        let quote_table = g.param(&self.params, EMB_QUOTE)?;
        let w = g.rows(width_table, &widths)?;
        let q = g.rows(quote_table, &quoted)?;
        let mut parts = vec![xs, xe, att, w, q];
        if self.variant.uses_self() {
            let scheme = self.scheme();
            let idx = order
                .iter()
                .map(|&i| scheme.type_index(doc.mentions[i].entity_type.as_deref()))
                .collect::<Result<Vec<_>>>()?;
            let type_table = g.param(&self.params, EMB_TYPE)?;
            parts.push(g.rows(type_table, &idx)?);
        }
        g.concat_cols(&parts)
    }

    pub(crate) fn encode(
        &self,
        g: &mut Graph,
        doc: &Document,
        embeddings: &Matrix,
        mode: &mut Mode<'_>,
    ) -> Result<Option<Encoded>> {
        self.check_embeddings(doc, embeddings)?;
        let order = reading_order(doc);
        if order.is_empty() {
            return Ok(None);
        }
        let x = g.constant(embeddings.clone());
        let states = layers::bilstm_forward(g, &self.params, LSTM, x)?;
        let states = mode.dropout(g, states)?;
        let mentions = self.mention_block(g, states, doc, &order)?;
        Ok(Some(Encoded { mentions, order }))
    }

    /// (antecedent ordinal, anaphor ordinal) pairs within the candidate window.
    pub(crate) fn candidate_pairs(&self, count: usize) -> Vec<(usize, usize)> {
        (0..count)
            .flat_map(|k| (k.saturating_sub(self.config.max_antecedents)..k).map(move |j| (j, k)))
            .collect()
    }

    pub(crate) fn pair_block(
        &self,
        g: &mut Graph,
        doc: &Document,
        enc: &Encoded,
        pairs: &[(usize, usize)],
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let js: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let ks: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let features: Vec<PairFeatures> = pairs
            .iter()
            .map(|&(j, k)| {
                PairFeatures::between(doc, j, enc.order[j], k, enc.order[k], self.variant.uses_cross())
            })
            .collect();
        let mj = g.rows(enc.mentions, &js)?;
        let mk = g.rows(enc.mentions, &ks)?;
        let prod = g.mul(mj, mk)?;
        let dist_table = g.param(&self.params, EMB_DISTANCE)?;
        let nest_table = g.param(&self.params, EMB_NESTED)?;
        let d = g.rows(dist_table, &features.iter().map(|f| f.distance_bucket).collect::<Vec<_>>())?;
        let n = g.rows(nest_table, &features.iter().map(|f| usize::from(f.nested)).collect::<Vec<_>>())?;
        let mut parts = vec![mj, mk, prod, d, n];
        if self.variant.uses_cross() {
            let tc_table = g.param(&self.params, EMB_CONSISTENCY)?;
            let idx: Vec<usize> = features
                .iter()
                .map(|f| usize::from(f.type_consistency.unwrap_or(0)))
                .collect();
            parts.push(g.rows(tc_table, &idx)?);
        }
        let input = g.concat_cols(&parts)?;
        layers::ffnn_forward(g, &self.params, PAIR, input, mode)
    }

    /// Antecedent-ranking loss node for one document, or `None` when the
    /// document has no candidate pairs.
    pub(crate) fn loss_node(
        &self,
        g: &mut Graph,
        doc: &Document,
        embeddings: &Matrix,
        mode: &mut Mode<'_>,
    ) -> Result<Option<Var>> {
        let Some(enc) = self.encode(g, doc, embeddings, mode)? else {
            return Ok(None);
        };
        let pairs = self.candidate_pairs(enc.order.len());
        if pairs.is_empty() {
            return Ok(None);
        }
        let scores = self.pair_block(g, doc, &enc, &pairs, mode)?;
        let owner = doc.mention_clusters();
        let mut groups: Vec<RankGroup> = (0..enc.order.len())
            .map(|_| RankGroup { candidates: Vec::new(), gold: Vec::new() })
            .collect();
        for (p, &(j, k)) in pairs.iter().enumerate() {
            let group = &mut groups[k];
            group.candidates.push(p);
            let (cj, ck) = (owner[enc.order[j]], owner[enc.order[k]]);
            if cj.is_some() && cj == ck {
                group.gold.push(p);
            }
        }
        groups.retain(|grp| !grp.candidates.is_empty());
        g.ranking_loss(scores, groups).map(Some)
    }

    /// Evaluation-mode loss (no dropout).
    pub fn document_loss(&self, doc: &Document, embeddings: &Matrix) -> Result<f64> {
        let mut g = Graph::new();
        Ok(self
            .loss_node(&mut g, doc, embeddings, &mut Mode::Eval)?
            .map_or(0.0, |l| g.scalar(l)))
    }

    /// Evaluation-mode loss with gradients for every parameter.
    pub fn document_gradients(&self, doc: &Document, embeddings: &Matrix) -> Result<(f64, Gradients)> {
        let mut g = Graph::new();
        match self.loss_node(&mut g, doc, embeddings, &mut Mode::Eval)? {
            Some(l) => Ok((g.scalar(l), g.backward(l, &self.params)?)),
            None => Ok((0.0, Gradients::zeros_like(&self.params))),
        }
    }

    /// Inference scores for every candidate pair.
    pub fn score_document(&self, doc: &Document, embeddings: &Matrix) -> Result<AntecedentScores> {
        let mut g = Graph::new();
        let Some(enc) = self.encode(&mut g, doc, embeddings, &mut Mode::Eval)? else {
            return Ok(AntecedentScores { order: Vec::new(), candidates: Vec::new() });
        };
        let pairs = self.candidate_pairs(enc.order.len());
        let mut candidates = vec![Vec::new(); enc.order.len()];
        if !pairs.is_empty() {
            let scores = self.pair_block(&mut g, doc, &enc, &pairs, &mut Mode::Eval)?;
            let values = g.value(scores);
            for (p, &(j, k)) in pairs.iter().enumerate() {
                candidates[k].push((enc.order[j], values.get(p, 0)));
            }
        }
        Ok(AntecedentScores { order: enc.order, candidates })
    }

    /// BiLSTM states (T × 2H) for a document's embeddings.
    pub fn bilstm_states(&self, embeddings: &Matrix) -> Result<Matrix> {
        layers::bilstm(embeddings, &self.params, LSTM)
    }

    /// Representation of one mention from precomputed BiLSTM states.
    pub fn encode_mention(&self, doc: &Document, states: &Matrix, mention: usize) -> Result<MentionRepresentation> {
        let span = doc
            .mentions
            .get(mention)
            .ok_or_else(|| Error::invalid(format!("mention {mention} does not exist")))?;
        if doc.sentences.get(span.sentence_index).is_none_or(|s| span.end >= s.len()) || span.start > span.end {
            return Err(Error::invalid(format!("mention {mention} lies outside the document")));
        }
        if states.rows() != doc.token_count() || states.cols() != 2 * self.config.bilstm_hidden {
            return Err(Error::shape(format!(
                "states are {:?}, expected {}x{}",
                states.shape(),
                doc.token_count(),
                2 * self.config.bilstm_hidden
            )));
        }
        let mut g = Graph::new();
        let s = g.constant(states.clone());
        let m = self.mention_block(&mut g, s, doc, &[mention])?;
        let (gs, _) = doc.global_span(span);
        Ok(MentionRepresentation {
            vector: g.value(m).row(0).to_vec(),
            layout: self.mention_layout(),
            width_bucket: bucket(span.width()),
            quoted: quote_flags(doc)[gs],
            ordinal: reading_order(doc).iter().position(|&i| i == mention).unwrap(),
        })
    }

    /// Pair features for two mentions of `doc`, ordered by reading order.
    pub fn pair_features(&self, doc: &Document, antecedent: usize, anaphor: usize) -> PairFeatures {
        let order = reading_order(doc);
        let pos = |m: usize| order.iter().position(|&i| i == m).unwrap();
        PairFeatures::between(doc, pos(antecedent), antecedent, pos(anaphor), anaphor, self.variant.uses_cross())
    }

    /// Score of antecedent `mj` for anaphor `mk`.
    pub fn pair_score(
        &self,
        mj: &MentionRepresentation,
        mk: &MentionRepresentation,
        features: &PairFeatures,
    ) -> Result<f64> {
        if features.type_consistency.is_some() != self.variant.uses_cross() {
            return Err(Error::invalid(format!(
                "variant {} {} a type-consistency feature",
                self.variant,
                if self.variant.uses_cross() { "needs" } else { "does not take" }
            )));
        }
        let layout = self.mention_layout();
        if mj.vector.len() != layout.len() || mk.vector.len() != layout.len() {
            return Err(Error::shape("mention vectors do not match this model's layout"));
        }
        let row = |name: &str, i: usize| -> Result<Vec<f64>> {
            let t = self.params.get(name)?;
            Ok(t.data[i * t.cols..(i + 1) * t.cols].iter().map(|&v| f64::from(v)).collect())
        };
        let mut input = Vec::with_capacity(self.pair_layout().len());
        input.extend_from_slice(&mj.vector);
        input.extend_from_slice(&mk.vector);
        input.extend(mj.vector.iter().zip(&mk.vector).map(|(a, b)| a * b));
        input.extend(row(EMB_DISTANCE, features.distance_bucket)?);
        input.extend(row(EMB_NESTED, usize::from(features.nested))?);
        if let Some(tc) = features.type_consistency {
            input.extend(row(EMB_CONSISTENCY, usize::from(tc))?);
        }
        layers::ffnn_score(&input, &self.params, PAIR)
    }

    fn metadata(&self) -> Vec<u8> {
        serde_json::to_vec(&ModelMeta {
            variant: self.variant,
            scheme: self.scheme.clone(),
            input_dim: self.input_dim,
            config: self.config.clone(),
        })
        .expect("metadata serializes")
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.params
            .write_checkpoint(&mut out, &self.metadata())
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let (params, meta) = Parameters::read_checkpoint(bytes)?;
        let meta: ModelMeta = serde_json::from_slice(&meta)?;
        let scheme = TypeScheme::by_name(&meta.scheme)?;
        let mut model = Self::new(meta.config, meta.variant, scheme, meta.input_dim)?;
        for (name, t) in model.params.iter_mut() {
            let loaded = params.get(name)?;
            if (loaded.rows, loaded.cols) != (t.rows, t.cols) {
                return Err(Error::shape(format!("checkpoint tensor `{name}` has the wrong shape")));
            }
            t.data.clone_from(&loaded.data);
        }
        if params.names().count() != model.params.names().count() {
            return Err(Error::shape("checkpoint has tensors this model does not declare"));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_bytes(&std::fs::read(path)?)
    }
}
