use std::fs::{self, File};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelwise_core::agreement::{agreement_report, pair_confusion};
use labelwise_core::campaign::RoundKind;
use labelwise_core::corpus::{Annotator, Posting};
use labelwise_core::flagging::{flag_forums, ScoreBook, ScoreRecord, DEFAULT_TAU_FORUM, DEFAULT_TAU_POST};
use labelwise_core::label::Scale;
use labelwise_core::ordinal::{cross_validate, evaluate, grad_check, train, Model, ModelKind, TrainConfig};
use labelwise_core::resolve::{stratified_folds, BinaryRule, GoldRecord, Strategy, StratifyOn};
use labelwise_core::sampling::DEFAULT_BOUNDARY_EPSILON;

use crate::api::{self, ServerConfig};
use crate::batch::{export_batch, read_batch};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::{gold_of, FeatureSource};
use crate::files::{read_json, read_jsonl, to_jsonl, write_atomic, write_json_pretty};
use crate::report;
use crate::store::{unix_now, RoundRequest, SamplerMode, SamplerSpec, Store};
use crate::training_set::{export_training_set, Format};

#[derive(Debug, Parser)]
#[command(name = "labelwise", version, about = "Annotation campaigns, agreement statistics and ordinal classifiers")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = api::ENV_STORE, default_value = "store")]
    pub store: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add postings, annotators or classifier scores from a JSON-lines file.
    Ingest(IngestArgs),
    /// Draw unassigned postings and print their ids.
    Sample(SampleArgs),
    /// Create an annotation round.
    RoundCreate(RoundCreateArgs),
    /// Write the CSV batch of one annotator in one round.
    BatchExport(BatchExportArgs),
    /// Store the labels of a filled-in batch file.
    BatchImport(BatchImportArgs),
    /// Agreement statistics over the stored annotations.
    Stats(StatsArgs),
    /// Resolve gold labels and write them as JSON lines.
    Resolve(ResolveArgs),
    /// Plan stratified folds and write per-fold training files.
    Folds(FoldsArgs),
    /// Train a model and write a checkpoint plus loss history.
    Train(TrainArgs),
    /// Score a checkpoint, or cross-validate one or more model kinds.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with central finite differences.
    GradCheck(GradCheckArgs),
    /// Per-forum positive rates and flags.
    Flag(FlagArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IngestKind {
    Postings,
    Annotators,
    Scores,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "postings")]
    pub kind: IngestKind,
    /// Reject postings whose id already exists instead of skipping them.
    #[arg(long)]
    pub no_dedupe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMode {
    Random,
    TopPositive,
    NearBoundary,
}

impl From<SampleMode> for SamplerMode {
    fn from(m: SampleMode) -> Self {
        match m {
            SampleMode::Random => SamplerMode::Random,
            SampleMode::TopPositive => SamplerMode::TopPositive,
            SampleMode::NearBoundary => SamplerMode::NearBoundary,
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "random")]
    pub mode: SampleMode,
    /// Band half-width around 0.5 for near-boundary sampling.
    #[arg(long, default_value_t = DEFAULT_BOUNDARY_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Calibration,
    Regular,
}

#[derive(Debug, Args)]
pub struct RoundCreateArgs {
    #[arg(long, value_enum, default_value = "regular")]
    pub kind: KindArg,
    #[arg(long)]
    pub id: Option<String>,
    /// File with one posting id per line.
    #[arg(long, conflicts_with = "sample")]
    pub postings: Option<PathBuf>,
    /// Sample this many unassigned postings instead.
    #[arg(long, required_unless_present = "postings")]
    pub sample: Option<usize>,
    #[arg(long, value_enum, default_value = "random")]
    pub mode: SampleMode,
    #[arg(long, default_value_t = DEFAULT_BOUNDARY_EPSILON)]
    pub epsilon: f64,
    /// Annotators per regular round.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BatchExportArgs {
    #[arg(long)]
    pub round: String,
    #[arg(long)]
    pub annotator: String,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchImportArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub round: String,
    #[arg(long)]
    pub annotator: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_enum, default_value = "text")]
    pub format: StatsFormat,
    /// Restrict to one round.
    #[arg(long)]
    pub round: Option<String>,
    /// Also write the relative pair table as CSV.
    #[arg(long)]
    pub pair_table: Option<PathBuf>,
    /// Binarize the exported pair table.
    #[arg(long)]
    pub binary: bool,
    /// Check referential integrity; exits 1 when problems are found.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    MostFrequent,
    Max,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::MostFrequent => Strategy::MostFrequent,
            StrategyArg::Max => Strategy::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BinaryRuleArg {
    Majority,
    BinarizeResolved,
}

impl From<BinaryRuleArg> for BinaryRule {
    fn from(r: BinaryRuleArg) -> Self {
        match r {
            BinaryRuleArg::Majority => BinaryRule::MajorityOfBinarized,
            BinaryRuleArg::BinarizeResolved => BinaryRule::BinarizeResolved,
        }
    }
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[arg(long, value_enum, default_value = "most-frequent")]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "majority")]
    pub binary_rule: BinaryRuleArg,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StratifyArg {
    Label,
    Binary,
}

impl From<StratifyArg> for StratifyOn {
    fn from(s: StratifyArg) -> Self {
        match s {
            StratifyArg::Label => StratifyOn::Label,
            StratifyArg::Binary => StratifyOn::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct FoldArgs {
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dev_frac: f64,
    #[arg(long, value_enum, default_value = "label")]
    pub stratify: StratifyArg,
}

#[derive(Debug, Args)]
pub struct FoldsArgs {
    /// Gold records as JSON lines; resolved from the store when absent.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "most-frequent")]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub folds: FoldArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: FileFormat,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// `synth-ordinal`, `synth-binary` or a feature file (.jsonl or .tsv).
    #[arg(long)]
    pub features: String,
    /// Gold records as JSON lines, required with a feature file.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Number of synthetic examples.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<Vec<labelwise_core::ordinal::Example>> {
        let gold = self.gold.as_deref().map(read_gold).transpose()?;
        FeatureSource::parse(&self.features).load(gold.as_deref(), self.n, seed)
    }
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON training configuration; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub lambda_bin: Option<f64>,
    #[arg(long)]
    pub lambda_ordinal: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ConfigArgs {
    fn build(&self) -> Result<TrainConfig> {
        let mut c: TrainConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => TrainConfig::default(),
        };
        c.seed = self.seed;
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { c.$field = v; })* };
        }
        set!(epochs, learning_rate, batch_size, warmup_steps, weight_decay, hidden_dim, lambda_bin, lambda_ordinal);
        Ok(c)
    }
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model kind {s:?}; expected bin, multi, coral, bin_multi or bin_coral"))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: ModelKind,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Directory for checkpoint.json and history.tsv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Evaluate this checkpoint on the data.
    #[arg(long, conflicts_with = "kind")]
    pub checkpoint: Option<PathBuf>,
    /// Cross-validate these model kinds (repeatable).
    #[arg(long, value_parser = parse_kind, required_unless_present = "checkpoint")]
    pub kind: Vec<ModelKind>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub folds: FoldArgs,
    /// Write the cross-validation table here as well as to standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: ModelKind,
    /// `synth-ordinal` or `synth-binary`.
    #[arg(long, default_value = "synth-binary")]
    pub features: String,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Largest acceptable relative error; exits 1 above it.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlagFormat {
    Json,
    Tsv,
}

#[derive(Debug, Args)]
pub struct FlagArgs {
    /// Score file (JSON lines); the store's scores are used when absent.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAU_POST)]
    pub tau_post: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_FORUM)]
    pub tau_forum: f64,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: FlagFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = api::ENV_ADDR, default_value = api::DEFAULT_ADDR)]
    pub addr: SocketAddr,
    /// JSON object mapping bearer tokens to {annotator_id, role}.
    #[arg(long, env = api::ENV_TOKENS)]
    pub tokens: PathBuf,
    /// Built web UI bundle served at `/`.
    #[arg(long = "static", env = api::ENV_STATIC)]
    pub static_dir: Option<PathBuf>,
}

fn read_gold(path: &Path) -> Result<Vec<GoldRecord>> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, g)| g).collect())
}

fn read_postings(path: &Path) -> Result<Vec<Posting>> {
    let name = path.display().to_string();
    read_jsonl::<Posting>(path)?
        .into_iter()
        .map(|(line, p)| {
            p.validate().map_err(|e| Error::record(&name, format!("line {line}"), e))?;
            Ok(p)
        })
        .collect()
}

fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let name = path.display().to_string();
    read_jsonl::<ScoreRecord>(path)?
        .into_iter()
        .map(|(line, s)| {
            s.validate().map_err(|e| Error::record(&name, format!("line {line}"), e))?;
            Ok(s)
        })
        .collect()
}

/// Writes to `path` atomically, or to `out` when no path is given.
fn emit(out: &mut dyn Write, path: Option<&Path>, content: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, content),
        None => out.write_all(content).map_err(|e| Error::io("stdout", e)),
    }
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("stdout", e))
}

fn check_threshold(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let store_dir = cli.store;
    match cli.command {
        Command::Ingest(a) => {
            let mut store = Store::init(&store_dir)?;
            let n = match a.kind {
                IngestKind::Postings => store.ingest_postings(read_postings(&a.file)?, !a.no_dedupe)?,
                IngestKind::Annotators => {
                    let rows: Vec<Annotator> = read_jsonl(&a.file)?.into_iter().map(|(_, r)| r).collect();
                    store.upsert_annotators(rows)?
                }
                IngestKind::Scores => store.ingest_scores(read_scores(&a.file)?)?,
            };
            say(out, format_args!("ingested {n}"))
        }
        Command::Sample(a) => {
            let store = Store::open(&store_dir)?;
            let spec = SamplerSpec {
                mode: a.mode.into(),
                n: a.n,
                epsilon: Some(a.epsilon),
            };
            for id in store.state().sample(&spec, a.seed)? {
                say(out, id)?;
            }
            Ok(())
        }
        Command::RoundCreate(a) => {
            let mut store = Store::open(&store_dir)?;
            let posting_ids = match &a.postings {
                Some(path) => Some(
                    fs::read_to_string(path)
                        .map_err(|e| Error::io(path, e))?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(String::from)
                        .collect(),
                ),
                None => None,
            };
            let sampler = a.sample.map(|n| SamplerSpec {
                mode: a.mode.into(),
                n,
                epsilon: Some(a.epsilon),
            });
            let round = store.create_round(RoundRequest {
                id: a.id,
                kind: match a.kind {
                    KindArg::Calibration => RoundKind::Calibration,
                    KindArg::Regular => RoundKind::Regular,
                },
                posting_ids,
                sampler,
                k: a.k,
                seed: a.seed,
            })?;
            say(out, serde_json::to_string_pretty(&round).expect("round serializes"))
        }
        Command::BatchExport(a) => {
            let store = Store::open(&store_dir)?;
            let mut buf = Vec::new();
            export_batch(store.state(), &a.round, &a.annotator, &mut buf)?;
            emit(out, a.out.as_deref(), &buf)
        }
        Command::BatchImport(a) => {
            let mut store = Store::open(&store_dir)?;
            let file = File::open(&a.file).map_err(|e| Error::io(&a.file, e))?;
            let rows = read_batch(file, &a.file.display().to_string())?;
            let stored = store.import_batch(&a.round, &a.annotator, &rows, unix_now())?;
            say(out, format_args!("imported {} annotations", stored.len()))
        }
        Command::Stats(a) => {
            let store = Store::open(&store_dir)?;
            let state = store.state();
            let matrix = state.annotation_matrix(a.round.as_deref())?;
            let report = agreement_report(&matrix);
            let text = match a.format {
                StatsFormat::Json => report::agreement_json(&report),
                StatsFormat::Text => report::agreement_text(&report),
            };
            emit(out, None, text.as_bytes())?;
            if let Some(path) = &a.pair_table {
                let table = pair_confusion(&matrix, Scale::from_binarized(a.binary))?;
                write_atomic(path, report::pair_table_csv(&table).as_bytes())?;
            }
            if a.audit {
                let problems = state.audit();
                for p in &problems {
                    eprintln!("audit: {p}");
                }
                if !problems.is_empty() {
                    return Err(Error::Invalid(format!("audit found {} problems", problems.len())));
                }
            }
            Ok(())
        }
        Command::Resolve(a) => {
            let store = Store::open(&store_dir)?;
            let gold = store.state().resolve(a.strategy.into(), a.binary_rule.into())?;
            emit(out, a.out.as_deref(), &to_jsonl(&gold))
        }
        Command::Folds(a) => {
            let store = Store::open(&store_dir)?;
            let gold = match &a.gold {
                Some(path) => read_gold(path)?,
                None => store.state().resolve(a.strategy.into(), BinaryRule::default())?,
            };
            let plan = stratified_folds(&gold, a.folds.k, a.folds.dev_frac, a.seed, a.folds.stratify.into())?;
            for w in &plan.warnings {
                eprintln!("warning: {w}");
            }
            let format = match a.format {
                FileFormat::Tsv => Format::Tsv,
                FileFormat::Jsonl => Format::Jsonl,
            };
            let state = store.state();
            let files = export_training_set(
                &gold,
                &plan,
                |id| state.posting(id).map(|p| p.text.clone()),
                format,
                &a.out_dir,
            )?;
            write_json_pretty(&a.out_dir.join("folds.json"), &plan)?;
            say(out, format_args!("wrote {} files to {}", files.len() + 1, a.out_dir.display()))
        }
        Command::Train(a) => {
            let config = a.config.build()?;
            let data = a.data.load(config.seed)?;
            let trained = train(&data, a.kind, &config)?;
            fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let mut history = String::from("epoch\tloss\n");
            for (i, loss) in trained.history.iter().enumerate() {
                history.push_str(&format!("{}\t{loss}\n", i + 1));
            }
            write_atomic(&a.out.join("history.tsv"), history.as_bytes())?;
            let ck = Checkpoint::new(trained.model, config, trained.history);
            ck.save(&a.out.join("checkpoint.json"))?;
            say(
                out,
                format_args!(
                    "trained {} for {} epochs, final loss {}",
                    a.kind.name(),
                    ck.history.len(),
                    ck.history.last().copied().unwrap_or(f64::NAN)
                ),
            )
        }
        Command::Evaluate(a) => {
            let config = a.config.build()?;
            let data = a.data.load(config.seed)?;
            if let Some(path) = &a.checkpoint {
                let ck = Checkpoint::load(path)?;
                let mut text = String::from("head\taccuracy\tf1_macro\n");
                for s in evaluate(&ck.model, &data)? {
                    text.push_str(&format!("{}\t{}\t{}\n", s.head.name(), s.accuracy, s.f1_macro));
                }
                return emit(out, a.report.as_deref(), text.as_bytes());
            }
            let plan = stratified_folds(&gold_of(&data), a.folds.k, a.folds.dev_frac, config.seed, a.folds.stratify.into())?;
            let reports = a
                .kind
                .iter()
                .map(|&kind| cross_validate(&data, kind, &config, &plan))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let table = report::cv_tsv(&reports);
            if let Some(path) = &a.report {
                write_atomic(path, table.as_bytes())?;
            }
            emit(out, None, table.as_bytes())
        }
        Command::GradCheck(a) => {
            let source = FeatureSource::parse(&a.features);
            if matches!(source, FeatureSource::File(_)) {
                return Err(Error::Invalid("grad-check takes synth-ordinal or synth-binary".into()));
            }
            let sample = source.load(None, a.n, a.seed)?;
            let dim = sample.first().map(|e| e.features.len()).unwrap_or(1);
            let model = Model::random(a.kind, dim, a.hidden_dim, a.seed);
            let g = grad_check(&model, &sample, a.h)?;
            say(
                out,
                format_args!(
                    "{}: {} parameters, max abs error {:e}, max rel error {:e}",
                    a.kind.name(),
                    g.params_checked,
                    g.max_abs_error,
                    g.max_rel_error
                ),
            )?;
            if g.max_rel_error > a.tolerance {
                return Err(Error::Invalid(format!(
                    "relative error {:e} exceeds tolerance {:e}",
                    g.max_rel_error, a.tolerance
                )));
            }
            Ok(())
        }
        Command::Flag(a) => {
            check_threshold("tau_post", a.tau_post)?;
            check_threshold("tau_forum", a.tau_forum)?;
            let reports = match &a.scores {
                Some(path) => {
                    let mut book = ScoreBook::new();
                    book.ingest(read_scores(path)?)?;
                    flag_forums(&book.forum_rates(a.tau_post), a.tau_post, a.tau_forum)
                }
                None => Store::open(&store_dir)?.state().flag_report(a.tau_post, a.tau_forum),
            };
            let text = match a.format {
                FlagFormat::Json => report::forum_json(&reports),
                FlagFormat::Tsv => report::forum_tsv(&reports),
            };
            emit(out, a.out.as_deref(), text.as_bytes())
        }
        Command::Serve(a) => {
            let config = ServerConfig {
                addr: a.addr,
                store_dir,
                tokens: a.tokens,
                static_dir: a.static_dir,
            };
            tokio::runtime::Runtime::new()
                .map_err(|e| Error::io("tokio runtime", e))?
                .block_on(api::serve(config))
        }
    }
}
