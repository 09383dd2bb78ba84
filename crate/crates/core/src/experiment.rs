//! Single runs, the variant × replicate grid, and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::coref::{train, CorefModel, ModelVariant, TokenEmbeddings, TrainReport};
use crate::corpus::{Document, TypeScheme};
use crate::error::{Error, Result};
use crate::metrics::{bootstrap_significance, per_document, DocScores, ScoreReport, DEFAULT_RESAMPLES};
use crate::typepred::assign_folds;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: ModelVariant,
    pub seed: u64,
    pub train: TrainReport,
    pub report: ScoreReport,
    pub doc_scores: Vec<DocScores>,
}

/// Trains on `train_docs` and scores predictions on `test_docs`.
pub fn run_single(
    train_docs: &[Document],
    test_docs: &[Document],
    embedder: &dyn TokenEmbeddings,
    variant: ModelVariant,
    scheme: &TypeScheme,
    config: &Config,
) -> Result<(CorefModel, RunResult)> {
    let (model, train_report) = train(train_docs, embedder, variant, scheme, config.clone())?;
    let predicted = predict_all(&model, test_docs, embedder)?;
    let doc_scores = per_document(test_docs, &predicted)?;
    let result = RunResult {
        variant,
        seed: config.seed,
        train: train_report,
        report: ScoreReport::from_doc_scores(&doc_scores),
        doc_scores,
    };
    Ok((model, result))
}

pub fn predict_all(model: &CorefModel, docs: &[Document], embedder: &dyn TokenEmbeddings) -> Result<Vec<Document>> {
    docs.par_iter()
        .map(|d| model.predict(d, &embedder.embed(d)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeSource {
    Gold,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    Orig,
    Common,
}

/// Variants crossed with either seeds or cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub variants: Vec<ModelVariant>,
    #[serde(default = "gold")]
    pub type_source: TypeSource,
    #[serde(default = "orig")]
    pub scheme: SchemeChoice,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default)]
    pub predicted_sidecar: Option<PathBuf>,
}

fn gold() -> TypeSource {
    TypeSource::Gold
}

fn orig() -> SchemeChoice {
    SchemeChoice::Orig
}

impl ExperimentGrid {
    /// TOML, or JSON when the file name ends in `.json`.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let grid: ExperimentGrid = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::invalid(format!("grid: {e}")))?
        };
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::invalid("grid: no variants"));
        }
        match (&self.seeds, self.folds) {
            (Some(_), Some(_)) => return Err(Error::invalid("grid: seeds and folds are mutually exclusive")),
            (None, None) => return Err(Error::invalid("grid: give either seeds or folds")),
            (Some(s), None) if s.is_empty() => return Err(Error::invalid("grid: empty seed list")),
            (None, Some(k)) if k < 2 => return Err(Error::invalid("grid: folds must be at least 2")),
            _ => {}
        }
        if self.type_source == TypeSource::Predicted {
            match &self.predicted_sidecar {
                Some(p) if p.exists() => {}
                Some(p) => {
                    return Err(Error::invalid(format!("grid: predicted sidecar {} does not exist", p.display())))
                }
                None => return Err(Error::invalid("grid: predicted type source needs predicted_sidecar")),
            }
        }
        Ok(())
    }
}

/// One finished (variant, replicate) job.
#[derive(Debug, Clone, Serialize)]
pub struct GridRun {
    pub variant: ModelVariant,
    pub replicate: usize,
    pub seed: u64,
    pub report: ScoreReport,
    #[serde(skip)]
    pub doc_scores: Vec<DocScores>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub variant: ModelVariant,
    pub replicates: usize,
    pub b_cubed_f1: f64,
    pub muc_f1: f64,
    pub ceaf_e_f1: f64,
    pub avg_f1: f64,
    pub impure_clusters: f64,
    /// Paired bootstrap p-value against the first variant; `None` for it.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub rows: Vec<GridRow>,
    pub runs: Vec<GridRun>,
}

impl GridSummary {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "variant", "n", "B3", "MUC", "CEAFE", "Avg. F1", "#IC", "p"
        );
        for r in &self.rows {
            let p = r.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
            let _ = writeln!(
                out,
                "{:<10} {:>4} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.1} {:>8}",
                r.variant.as_str(),
                r.replicates,
                100.0 * r.b_cubed_f1,
                100.0 * r.muc_f1,
                100.0 * r.ceaf_e_f1,
                100.0 * r.avg_f1,
                r.impure_clusters,
                p
            );
        }
        out
    }
}

/// Mean per-document Avg F1 across the replicates that tested each document.
fn per_doc_means(runs: &[&GridRun]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in runs {
        for d in &r.doc_scores {
            let e = sums.entry(d.doc_id.clone()).or_default();
            e.0 += d.avg_f1();
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Variant, replicate index, seed, training split, test split.
type Job = (ModelVariant, usize, u64, Vec<Document>, Vec<Document>);

/// Runs every job on `workers` threads. Seed mode trains on `train_docs` and
/// tests on `test_docs`; fold mode splits `train_docs` and ignores
/// `test_docs`.
pub fn run_grid(
    grid: &ExperimentGrid,
    train_docs: &[Document],
    test_docs: &[Document],
    embedder: &dyn TokenEmbeddings,
    scheme: &TypeScheme,
    config: &Config,
    workers: usize,
) -> Result<GridSummary> {
    grid.validate()?;
    let mut jobs: Vec<Job> = Vec::new();
    match (&grid.seeds, grid.folds) {
        (Some(seeds), _) => {
            if test_docs.is_empty() {
                return Err(Error::invalid("grid: seed mode needs test documents"));
            }
            for &v in &grid.variants {
                for (r, &s) in seeds.iter().enumerate() {
                    jobs.push((v, r, s, train_docs.to_vec(), test_docs.to_vec()));
                }
            }
        }
        (None, Some(k)) => {
            let folds = assign_folds(train_docs.len(), k, config.seed)?;
            for &v in &grid.variants {
                for f in 0..k {
                    let split = |test: bool| -> Vec<Document> {
                        train_docs
                            .iter()
                            .zip(&folds)
                            .filter(|(_, &x)| (x == f) == test)
                            .map(|(d, _)| d.clone())
                            .collect()
                    };
                    jobs.push((v, f, config.seed, split(false), split(true)));
                }
            }
        }
        (None, None) => unreachable!("validated"),
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|(v, r, seed, train_set, test_set)| {
                let cfg = Config { seed: *seed, ..config.clone() };
                let (_, res) = run_single(train_set, test_set, embedder, *v, scheme, &cfg)?;
                Ok(GridRun {
                    variant: *v,
                    replicate: *r,
                    seed: *seed,
                    report: res.report,
                    doc_scores: res.doc_scores,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    let mut reference: Option<BTreeMap<String, f64>> = None;
    for &v in &grid.variants {
        let mine: Vec<&GridRun> = runs.iter().filter(|r| r.variant == v).collect();
        let n = mine.len() as f64;
        let mean = |f: &dyn Fn(&ScoreReport) -> f64| mine.iter().map(|r| f(&r.report)).sum::<f64>() / n;
        let docs = per_doc_means(&mine);
        let p_value = match &reference {
            None => {
                reference = Some(docs);
                None
            }
            Some(base) => {
                let a: Vec<f64> = docs.values().copied().collect();
                let b: Vec<f64> = base.values().copied().collect();
                if a.len() >= 2 {
                    Some(bootstrap_significance(&a, &b, DEFAULT_RESAMPLES, config.seed)?)
                } else {
                    None
                }
            }
        };
        rows.push(GridRow {
            variant: v,
            replicates: mine.len(),
            b_cubed_f1: mean(&|r| r.b_cubed.f1),
            muc_f1: mean(&|r| r.muc.f1),
            ceaf_e_f1: mean(&|r| r.ceaf_e.f1),
            avg_f1: mean(&|r| r.avg_f1),
            impure_clusters: mean(&|r| r.impure_clusters as f64),
            p_value,
        });
    }
    Ok(GridSummary { rows, runs })
}

/// Everything needed to repeat a `train` run byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub variant: ModelVariant,
    pub scheme: String,
    pub config: Config,
    pub seed: u64,
    pub train_corpus: PathBuf,
    #[serde(default)]
    pub type_sidecar: Option<PathBuf>,
    #[serde(default)]
    pub map_common: bool,
    #[serde(default)]
    pub propagate_types: bool,
    /// CTE1 store; when absent, hashed synthetic embeddings of `synth_dim`.
    #[serde(default)]
    pub embedding_store: Option<PathBuf>,
    #[serde(default)]
    pub synth_dim: Option<usize>,
    pub checkpoint: PathBuf,
    pub crate_version: String,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
