//! `etcoref`: corpus conversion, training, resolution, scoring, type
//! prediction and experiment grids.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use etcoref::config::{Config, TypePredConfig};
use etcoref::coref::{CorefModel, ModelVariant, SynthEmbedder, TokenEmbeddings};
use etcoref::corpus::{
    attach_types, emit_conll, map_doc_to_common, parse_conll, propagate_cluster_types, read_sidecar,
    write_sidecar, Document, TypeScheme,
};
use etcoref::embeddings::{synth_embeddings, synth_token_embeddings, EmbeddingStore, StoreWriter};
use etcoref::experiment::{predict_all, run_grid, ExperimentGrid, RunManifest, SchemeChoice, TypeSource};
use etcoref::metrics::{score_by_group, ScoreReport};
use etcoref::synthetic::{synthetic_corpus, SynthSpec};
use etcoref::typepred::{crossval_predict, evaluate_typepred, marked_requests, write_requests};

/// Hashed stand-in embeddings always use this seed so that a corpus embeds
/// the same way in every command.
const SYNTH_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "etcoref", version, about = "Type-aware mention-ranking coreference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between CoNLL and JSON-lines documents, attaching and rewriting types.
    Convert(ConvertArgs),
    /// Train one model and write a checkpoint plus a run manifest.
    Train(TrainArgs),
    /// Cluster the mentions of a corpus with a trained model.
    Resolve(ResolveArgs),
    /// Score a response corpus against a key corpus.
    Score(ScoreArgs),
    /// Cross-validated entity type prediction from pooled marked-sequence vectors.
    PredictTypes(PredictTypesArgs),
    /// Run a variant × seed (or × fold) grid.
    Grid(GridArgs),
    /// Write marked-sequence requests for every mention as JSON lines.
    Mark(MarkArgs),
    /// Generate a typed synthetic corpus.
    SynthCorpus(SynthCorpusArgs),
    /// Write a CTE1 store of hashed stand-in embeddings.
    SynthStore(SynthStoreArgs),
}

/// How a corpus is read and typed before use.
#[derive(Args, Clone)]
struct CorpusArgs {
    /// Type scheme of the input labels.
    #[arg(long, default_value = "common")]
    scheme: String,
    /// JSON-lines type sidecar to attach.
    #[arg(long)]
    types: Option<PathBuf>,
    /// Rewrite types into the common scheme.
    #[arg(long)]
    map_common: bool,
    /// Give untyped cluster members their cluster's majority type.
    #[arg(long)]
    propagate_types: bool,
}

#[derive(Args, Clone)]
struct EmbeddingArgs {
    /// CTE1 token embedding store keyed by document id.
    #[arg(long, conflicts_with = "synth_dim")]
    store: Option<PathBuf>,
    /// Use hashed stand-in embeddings of this width instead of a store.
    #[arg(long)]
    synth_dim: Option<usize>,
}

#[derive(Args)]
struct ConvertArgs {
    input: PathBuf,
    /// Output path; `.jsonl` or `.json` writes JSON lines, anything else CoNLL.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Also write the (rewritten) types as a sidecar.
    #[arg(long)]
    sidecar_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus (CoNLL or JSON lines).
    #[arg(long, required_unless_present = "replay")]
    train: Option<PathBuf>,
    #[arg(long, default_value = "et_full")]
    variant: ModelVariant,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    /// TOML file of model and training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, required_unless_present = "replay")]
    checkpoint: Option<PathBuf>,
    /// Defaults to the checkpoint path with `.manifest.json` appended.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Repeat the run described by a manifest; `--checkpoint` redirects its output.
    #[arg(long, conflicts_with_all = ["train", "config", "seed", "store", "synth_dim", "types"])]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct ResolveArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    corpus: PathBuf,
    #[command(flatten)]
    typing: CorpusArgs,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    /// Response CoNLL path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    response: PathBuf,
    /// Sidecar typing the response mentions, used for #IC and genre type ratios.
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long, default_value = "common")]
    scheme: String,
    /// Add one row per genre.
    #[arg(long)]
    by_genre: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PredictTypesArgs {
    /// Corpus with gold types (directly or through `--types`).
    corpus: PathBuf,
    #[command(flatten)]
    typing: CorpusArgs,
    /// CTE1 store of marked-sequence embeddings keyed by mention.
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 1e-2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Predicted-type sidecar.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Grid description, TOML or `.json`.
    grid: PathBuf,
    #[arg(long)]
    train: PathBuf,
    /// Test corpus; required in seed mode, unused in fold mode.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "ETCOREF_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MarkArgs {
    corpus: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthCorpusArgs {
    #[arg(long, default_value_t = 60)]
    documents: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CoNLL output; types go to `--types-out`.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    types_out: PathBuf,
}

#[derive(Args)]
struct SynthStoreArgs {
    corpus: PathBuf,
    #[arg(long)]
    dim: usize,
    /// Embed marked sequences keyed by mention instead of documents.
    #[arg(long)]
    marked: bool,
    #[arg(short, long)]
    output: PathBuf,
}

/// Writes through a sibling temporary file so a failed run leaves no
/// partial output behind.
fn write_output(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl" || e == "json")
}

fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let docs = if is_jsonl(path) {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
            .collect::<Result<Vec<Document>>>()?
    } else {
        parse_conll(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    for d in &docs {
        d.validate().with_context(|| format!("{}: document `{}`", path.display(), d.doc_id))?;
    }
    Ok(docs)
}

fn render_documents(docs: &[Document], path: &Path) -> String {
    if is_jsonl(path) {
        docs.iter()
            .map(|d| serde_json::to_string(d).expect("document serializes") + "\n")
            .collect()
    } else {
        emit_conll(docs)
    }
}

fn attach_sidecar(docs: &mut [Document], path: &Path, scheme: &TypeScheme) -> Result<()> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let records = read_sidecar(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    let warnings = attach_types(docs, &records, scheme).with_context(|| format!("attaching {}", path.display()))?;
    for w in &warnings {
        eprintln!(
            "warning: {}: {} sentence {} [{}, {}]: {}",
            path.display(),
            w.record.doc_id,
            w.record.sentence_index,
            w.record.start,
            w.record.end,
            w.reason
        );
    }
    Ok(())
}

impl CorpusArgs {
    fn source_scheme(&self) -> Result<&'static TypeScheme> {
        Ok(TypeScheme::by_name(&self.scheme)?)
    }

    /// Scheme the loaded documents end up in.
    fn target_scheme(&self) -> Result<&'static TypeScheme> {
        if self.map_common {
            Ok(TypeScheme::common())
        } else {
            self.source_scheme()
        }
    }

    fn load(&self, path: &Path) -> Result<Vec<Document>> {
        let docs = read_documents(path)?;
        self.prepare(docs)
    }

    fn prepare(&self, mut docs: Vec<Document>) -> Result<Vec<Document>> {
        let scheme = self.source_scheme()?;
        if let Some(types) = &self.types {
            attach_sidecar(&mut docs, types, scheme)?;
        }
        for d in &docs {
            for t in d.mentions.iter().filter_map(|m| m.entity_type.as_deref()) {
                scheme.canonical(t).with_context(|| format!("document `{}`", d.doc_id))?;
            }
        }
        if self.map_common {
            docs = docs
                .iter()
                .map(|d| map_doc_to_common(d, scheme))
                .collect::<etcoref::Result<_>>()?;
        }
        if self.propagate_types {
            docs = docs.iter().map(propagate_cluster_types).collect();
        }
        Ok(docs)
    }
}

enum Embedder {
    Store(EmbeddingStore),
    Synth(SynthEmbedder),
}

impl Embedder {
    fn as_dyn(&self) -> &dyn TokenEmbeddings {
        match self {
            Embedder::Store(s) => s,
            Embedder::Synth(s) => s,
        }
    }
}

impl EmbeddingArgs {
    fn open(&self) -> Result<Embedder> {
        open_embedder(self.store.as_deref(), self.synth_dim)
    }
}

fn open_embedder(store: Option<&Path>, synth_dim: Option<usize>) -> Result<Embedder> {
    match (store, synth_dim) {
        (Some(p), None) => Ok(Embedder::Store(
            EmbeddingStore::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        (None, Some(0)) => bail!("--synth-dim must be positive"),
        (None, Some(dim)) => Ok(Embedder::Synth(SynthEmbedder { dim, seed: SYNTH_SEED })),
        (None, None) => bail!("give an embedding store (--store) or --synth-dim"),
        (Some(_), Some(_)) => bail!("--store and --synth-dim are mutually exclusive"),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::from_file(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn manifest_path(checkpoint: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut p = checkpoint.as_os_str().to_owned();
        p.push(".manifest.json");
        PathBuf::from(p)
    })
}

fn convert(args: ConvertArgs) -> Result<()> {
    let docs = args.corpus.load(&args.input)?;
    write_output(&args.output, render_documents(&docs, &args.output))?;
    if let Some(p) = &args.sidecar_out {
        write_output(p, write_sidecar(&docs))?;
    }
    Ok(())
}

fn execute_manifest(manifest: &RunManifest) -> Result<()> {
    let corpus = CorpusArgs {
        scheme: manifest.scheme.clone(),
        types: manifest.type_sidecar.clone(),
        map_common: manifest.map_common,
        propagate_types: manifest.propagate_types,
    };
    let docs = corpus.load(&manifest.train_corpus)?;
    let embedder = open_embedder(manifest.embedding_store.as_deref(), manifest.synth_dim)?;
    let scheme = corpus.target_scheme()?;
    let (model, report) = etcoref::coref::train(&docs, embedder.as_dyn(), manifest.variant, scheme, manifest.config.clone())?;
    write_output(&manifest.checkpoint, model.to_checkpoint_bytes())?;
    if let Some(last) = report.epoch_losses.last() {
        eprintln!("trained {} for {} steps, final epoch loss {last:.4}", manifest.variant, report.steps);
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let manifest = match &args.replay {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut m = RunManifest::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
            if let Some(c) = &args.checkpoint {
                m.checkpoint = c.clone();
            }
            m
        }
        None => {
            let mut config = load_config(args.config.as_deref())?;
            if let Some(s) = args.seed {
                config.seed = s;
            }
            config.validate()?;
            RunManifest {
                variant: args.variant,
                scheme: args.corpus.scheme.clone(),
                seed: config.seed,
                config,
                train_corpus: args.train.clone().expect("required by clap"),
                type_sidecar: args.corpus.types.clone(),
                map_common: args.corpus.map_common,
                propagate_types: args.corpus.propagate_types,
                embedding_store: args.embeddings.store.clone(),
                synth_dim: args.embeddings.synth_dim,
                checkpoint: args.checkpoint.clone().expect("required by clap"),
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
            }
        }
    };
    if manifest.seed != manifest.config.seed {
        bail!("manifest seed {} disagrees with config seed {}", manifest.seed, manifest.config.seed);
    }
    execute_manifest(&manifest)?;
    let out = manifest_path(&manifest.checkpoint, args.manifest.as_deref());
    write_output(&out, manifest.to_json() + "\n")
}

fn resolve_cmd(args: ResolveArgs) -> Result<()> {
    let model = CorefModel::load(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let docs = args.typing.load(&args.corpus)?;
    let target = args.typing.target_scheme()?;
    if model.variant.uses_types() && target.name() != model.scheme().name() {
        bail!(
            "checkpoint was trained on scheme `{}` but the corpus is typed in `{}`",
            model.scheme().name(),
            target.name()
        );
    }
    let embedder = args.embeddings.open()?;
    let response = predict_all(&model, &docs, embedder.as_dyn())?;
    write_output(&args.output, emit_conll(&response))
}

fn score_cmd(args: ScoreArgs) -> Result<()> {
    let scheme = TypeScheme::by_name(&args.scheme)?;
    let mut keys = read_documents(&args.key)?;
    let mut responses = read_documents(&args.response)?;
    if let Some(t) = &args.types {
        attach_sidecar(&mut responses, t, scheme)?;
        attach_sidecar(&mut keys, t, scheme)?;
    }
    let mut report = ScoreReport::score(&keys, &responses)?;
    if args.by_genre {
        report.genres = score_by_group(&keys, &responses, |d| d.genre().to_string())?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn predict_types_cmd(args: PredictTypesArgs) -> Result<()> {
    let docs = args.typing.load(&args.corpus)?;
    let scheme = args.typing.target_scheme()?;
    let vectors = EmbeddingStore::open(&args.vectors).with_context(|| format!("opening {}", args.vectors.display()))?;
    let config = TypePredConfig {
        folds: args.folds,
        epochs: args.epochs,
        patience: args.patience,
        learning_rate: args.learning_rate,
        seed: args.seed,
        ..TypePredConfig::default()
    };
    let out = crossval_predict(&docs, &vectors, scheme, &config)?;
    let records = out.sidecar();
    let text: String = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect();
    let report = evaluate_typepred(&docs, &records);
    write_output(&args.output, text)?;
    if let Some(p) = &args.report {
        write_output(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn grid_cmd(args: GridArgs) -> Result<()> {
    let grid = ExperimentGrid::from_file(&args.grid).with_context(|| format!("reading {}", args.grid.display()))?;
    grid.validate()?;
    let mut corpus = args.corpus.clone();
    if grid.scheme == SchemeChoice::Common {
        corpus.map_common = true;
    }
    if grid.type_source == TypeSource::Predicted {
        // predicted labels replace gold ones and are already in the grid's scheme
        corpus.types = None;
    }
    let load = |path: &Path| -> Result<Vec<Document>> {
        let mut docs = corpus.load(path)?;
        if let Some(p) = &grid.predicted_sidecar {
            if grid.type_source == TypeSource::Predicted {
                docs.iter_mut().flat_map(|d| &mut d.mentions).for_each(|m| m.entity_type = None);
                attach_sidecar(&mut docs, p, corpus.target_scheme()?)?;
            }
        }
        Ok(docs)
    };
    let train_docs = load(&args.train)?;
    let test_docs = match (&args.test, grid.seeds.is_some()) {
        (Some(p), _) => load(p)?,
        (None, true) => bail!("seed-mode grids need --test"),
        (None, false) => Vec::new(),
    };
    let config = load_config(args.config.as_deref())?;
    let embedder = args.embeddings.open()?;
    let summary = run_grid(
        &grid,
        &train_docs,
        &test_docs,
        embedder.as_dyn(),
        corpus.target_scheme()?,
        &config,
        args.workers,
    )?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print!("{}", summary.to_table());
    }
    Ok(())
}

fn mark_cmd(args: MarkArgs) -> Result<()> {
    let docs = read_documents(&args.corpus)?;
    let mut out = Vec::new();
    write_requests(&marked_requests(&docs)?, &mut out)?;
    write_output(&args.output, out)
}

fn synth_corpus_cmd(args: SynthCorpusArgs) -> Result<()> {
    let spec = SynthSpec {
        documents: args.documents,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let docs = synthetic_corpus(&spec);
    write_output(&args.output, render_documents(&docs, &args.output))?;
    write_output(&args.types_out, write_sidecar(&docs))
}

fn synth_store_cmd(args: SynthStoreArgs) -> Result<()> {
    if args.dim == 0 {
        bail!("--dim must be positive");
    }
    let docs = read_documents(&args.corpus)?;
    let mut w = StoreWriter::new(Vec::new())?;
    if args.marked {
        for r in marked_requests(&docs)? {
            let m = synth_token_embeddings(r.tokens.iter().map(String::as_str), args.dim, SYNTH_SEED);
            w.write_matrix(&r.key, &m)?;
        }
    } else {
        for d in &docs {
            w.write_matrix(&d.doc_id, &synth_embeddings(d, args.dim, SYNTH_SEED))?;
        }
    }
    write_output(&args.output, w.finish()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert(a) => convert(a),
        Command::Train(a) => train_cmd(a),
        Command::Resolve(a) => resolve_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::PredictTypes(a) => predict_types_cmd(a),
        Command::Grid(a) => grid_cmd(a),
        Command::Mark(a) => mark_cmd(a),
        Command::SynthCorpus(a) => synth_corpus_cmd(a),
        Command::SynthStore(a) => synth_store_cmd(a),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use etcoref::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse { .. } => "parse",
                E::Scheme { .. } | E::UnknownScheme(_) => "scheme",
                E::Format { .. } => "store_format",
                E::UnknownDocument(_) => "unknown_document",
                E::Shape(_) => "shape",
                E::NonFinite(_) => "non_finite",
                E::MissingVectors(_) => "missing_vectors",
                E::Invalid(_) => "invalid_input",
                E::Io(_) => "io",
                E::Json(_) => "json",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "json";
        }
    }
    "invalid_input"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
            eprintln!("{}", json!({ "error": { "kind": error_kind(&e), "message": message } }));
            ExitCode::FAILURE
        }
    }
}
