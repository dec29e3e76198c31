//! The `vocab-compat` command line.
//!
//! Every subcommand accepts `--config <file.toml>` whose keys (top level, or
//! in a section named after the subcommand) supply defaults for flags not
//! given on the command line. For `grid run` the config is the grid config.

use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::compression::{format_selection, select_sizes, CompressionProfile, CurveReport};
use crate::corpus::{self, align, fake_tsv_file_contents, load_corpus_with, LoadOptions, DEFAULT_FAKE_MARKER};
use crate::embeddings::{train_embeddings, EmbedConfig, EmbeddingMatrix};
use crate::error::{Error, ErrorKind, Result};
use crate::grid::{self, export_grid, CompatGrid, ExportFormat, GridConfig};
use crate::manifest::ManifestBuilder;
use crate::spectral::{correlate, parse_records_csv, singular_values, svg, DEFAULT_SVG_K};
use crate::wordpiece::{self, Pretokenizer, TrainerConfig, Vocabulary};

/// Bundled transcription of the XNLI / compression-rate correlation table.
pub const TABLE7_CSV: &str = include_str!("../data/table7.csv");

#[derive(Debug, Parser)]
#[command(name = "vocab-compat", version, about = "Tokenization compatibility across languages")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the compression curve, fit beta and select vocabulary sizes.
    Curve(CurveArgs),
    /// Print the size selection of an existing curve.json.
    SelectSizes(SelectSizesArgs),
    /// Train a WordPiece vocabulary.
    TrainTokenizer(TrainTokenizerArgs),
    /// Segment text with a vocabulary.
    Tokenize(TokenizeArgs),
    /// Absolute and relative compression rates at given sizes.
    Compress(CompressArgs),
    /// Train subword embeddings.
    Embed(EmbedArgs),
    /// Singular value gap between two embedding files.
    Svg(SvgArgs),
    /// Vocabulary-size grids.
    #[command(subcommand)]
    Grid(GridCommand),
    /// Correlate compatibility ratios with downstream scores.
    Correlate(CorrelateArgs),
    /// Convert a corpus file to its fake language, or back.
    Fake(FakeArgs),
    /// Split an aligned corpus pair into train, dev and test.
    Split(SplitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// `unit_id<TAB>text` file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Language id; defaults to the file stem.
    #[arg(long)]
    pub language: Option<String>,
    /// Apply NFC normalization on load.
    #[arg(long)]
    pub nfc: bool,
}

impl CorpusArgs {
    fn language_id(&self) -> String {
        self.language.clone().unwrap_or_else(|| {
            self.corpus
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "unknown".into())
        })
    }

    fn load(&self) -> Result<corpus::Corpus> {
        load_corpus_with(&self.corpus, &self.language_id(), LoadOptions { nfc: self.nfc })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Number of sampled sizes.
    #[arg(long, default_value_t = crate::compression::DEFAULT_SAMPLE_COUNT)]
    pub k: usize,
    #[arg(long, default_value_t = crate::compression::DEFAULT_N_MAX)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lowest rate to select; defaults to the asymptote.
    #[arg(long)]
    pub floor_rate: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub min_frequency: u64,
    /// Output directory for curve.json and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectSizesArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long)]
    pub floor_rate: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainTokenizerArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub min_frequency: u64,
    /// Vocabulary file to write (one token per line).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TokenizeArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Isolate punctuation characters before segmentation.
    #[arg(long)]
    pub split_punctuation: bool,
    /// Text to segment; otherwise lines are read from --input or stdin.
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long, conflicts_with = "text")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompressArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Comma-separated vocabulary sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_frequency: u64,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Matrix file to write; metadata goes to `<stem>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub subsample: f64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Force single-threaded, reproducible training.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SvgArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SVG_K)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum GridCommand {
    /// Run a grid described by a TOML config.
    Run(GridRunArgs),
    /// Convert grid.json to csv, json or a PGM heatmap.
    Export(GridExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GridRunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker pool size; overrides the config.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// One worker and single-threaded embedding training.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum FormatArg {
    Json,
    Csv,
    Pgm,
}

#[derive(Debug, Args, Serialize)]
pub struct GridExportArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, value_enum)]
    pub format: FormatArg,
    /// Defaults to the grid path with the format's extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum Fixture {
    Table7,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Bundled records.
    #[arg(long, value_enum, required_unless_present = "input")]
    pub fixture: Option<Fixture>,
    /// CSV with language_id,score,r_abs,r_rel[,ratio_abs,ratio_rel].
    #[arg(long, conflicts_with = "fixture")]
    pub input: Option<PathBuf>,
    /// Reference language for records without ratio columns.
    #[arg(long)]
    pub reference: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct FakeArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = DEFAULT_FAKE_MARKER)]
    pub marker: String,
    /// Strip the marker instead of adding it.
    #[arg(long)]
    pub invert: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub dev: usize,
    #[arg(long, default_value_t = 2500)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn subcommand_name(args: &[String]) -> Option<&str> {
    args.iter().skip(1).map(String::as_str).find(|a| !a.starts_with('-'))
}

fn config_value(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Appends flags from the `--config` file that are not already present.
pub fn apply_config_defaults(args: Vec<String>) -> Result<Vec<String>> {
    let Some(sub) = subcommand_name(&args).map(str::to_string) else {
        return Ok(args);
    };
    if sub == "grid" {
        return Ok(args);
    }
    let Some(path) = config_value(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let section = match doc.get(&sub) {
        Some(toml::Value::Table(t)) => t.clone(),
        _ => doc.into_iter().filter(|(_, v)| !v.is_table()).collect(),
    };
    let known: Vec<String> = Cli::command()
        .find_subcommand(&sub)
        .map(|c| c.get_arguments().filter_map(|a| a.get_long()).map(str::to_string).collect())
        .unwrap_or_default();
    let mut out = args;
    for (key, value) in section {
        let long = key.replace('_', "-");
        if !known.contains(&long) {
            log::debug!("config key {key} does not apply to {sub}");
            continue;
        }
        let flag = format!("--{long}");
        if out.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        let scalar = |v: &toml::Value| -> Result<String> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                other => Err(Error::InvalidArgument(format!("config key {key}: unsupported value {other}"))),
            }
        };
        match &value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let joined = items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(",");
                out.push(flag);
                out.push(joined);
            }
            v => {
                out.push(flag);
                out.push(scalar(v)?);
            }
        }
    }
    Ok(out)
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Usage => "usage",
        ErrorKind::Data => "data",
        ErrorKind::Numeric => "numeric",
    }
}

fn report_error(kind: &str, code: u8, message: &str) {
    eprintln!("error: {message}");
    let json = serde_json::json!({"error": {"kind": kind, "exit_code": code, "message": message}});
    eprintln!("{json}");
}

/// Parses `args` (program name first), runs the command and maps the
/// outcome to an exit code.
pub fn run_from_args(args: Vec<String>) -> ExitCode {
    let args = match apply_config_defaults(args) {
        Ok(a) => a,
        Err(e) => {
            let code = exit_code(ErrorKind::Usage);
            report_error("usage", code, &e.to_string());
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let msg = e.kind().as_str().unwrap_or("invalid arguments").to_string();
            report_error("usage", 2, &msg);
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(cli.command, args[1..].to_vec()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let code = exit_code(kind);
            report_error(kind_name(kind), code, &e.to_string());
            ExitCode::from(code)
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn trainer_config(min_frequency: u64) -> TrainerConfig {
    TrainerConfig {
        min_frequency,
        ..TrainerConfig::default()
    }
}

pub fn run(command: Command, args: Vec<String>) -> Result<()> {
    match command {
        Command::Curve(a) => cmd_curve(&a, args),
        Command::SelectSizes(a) => cmd_select_sizes(&a),
        Command::TrainTokenizer(a) => cmd_train_tokenizer(&a, args),
        Command::Tokenize(a) => cmd_tokenize(&a),
        Command::Compress(a) => cmd_compress(&a, args),
        Command::Embed(a) => cmd_embed(&a, args),
        Command::Svg(a) => cmd_svg(&a),
        Command::Grid(GridCommand::Run(a)) => cmd_grid_run(&a, args),
        Command::Grid(GridCommand::Export(a)) => cmd_grid_export(&a),
        Command::Correlate(a) => cmd_correlate(&a),
        Command::Fake(a) => cmd_fake(&a, args),
        Command::Split(a) => cmd_split(&a, args),
    }
}

pub fn cmd_curve(a: &CurveArgs, args: Vec<String>) -> Result<()> {
    if a.k < 2 {
        return Err(Error::InvalidArgument(format!("k = {} leaves nothing to regress; use k >= 2", a.k)));
    }
    let mut m = ManifestBuilder::new("curve", args, a, Some(a.seed));
    m.input(&a.input.corpus)?;
    m.stage("load");
    let corpus = a.input.load()?;
    m.stage("train");
    let profile = CompressionProfile::build(&corpus, a.n_max, &trainer_config(a.min_frequency))?;
    m.stage("fit");
    let curve = profile.fit_curve(a.k, a.n_max, a.seed)?;
    let selected = select_sizes(&curve, a.floor_rate)?;
    print!("{}", format_selection(&selected));
    let report = CurveReport::new(curve, selected);
    let path = a.out.join("curve.json");
    let json = serde_json::to_string_pretty(&report).expect("curve serializes");
    grid::write_atomic(&path, json.as_bytes())?;
    m.output(&path);
    m.write(&a.out.join("manifest.json"))?;
    Ok(())
}

pub fn cmd_select_sizes(a: &SelectSizesArgs) -> Result<()> {
    let text = fs::read_to_string(&a.curve).map_err(|e| Error::io(&a.curve, e))?;
    let report: CurveReport = serde_json::from_str(&text).map_err(|e| Error::parse(a.curve.display().to_string(), e))?;
    let selected = select_sizes(&report.curve, a.floor_rate)?;
    print!("{}", format_selection(&selected));
    Ok(())
}

pub fn cmd_train_tokenizer(a: &TrainTokenizerArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("train-tokenizer", args, a, None);
    m.input(&a.input.corpus)?;
    m.stage("load");
    let corpus = a.input.load()?;
    m.stage("train");
    let vocab = wordpiece::train(&corpus, a.size, &trainer_config(a.min_frequency))?;
    vocab.save(&a.out)?;
    m.output(&a.out);
    m.write(&sidecar(&a.out))?;
    println!("{} tokens", vocab.len());
    Ok(())
}

pub fn cmd_tokenize(a: &TokenizeArgs) -> Result<()> {
    let mut vocab = Vocabulary::load(&a.vocab)?;
    if a.split_punctuation {
        vocab = vocab.with_pretokenizer(Pretokenizer::WhitespacePunctuation);
    }
    let text = match (&a.text, &a.input) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        (None, None) => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Error::io("<stdin>", e))?;
            s
        }
    };
    for line in text.lines() {
        println!("{}", vocab.tokenize(line).join(" "));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompressRow {
    n: usize,
    vocab_size: usize,
    acr: f64,
    rcr: f64,
}

#[derive(Debug, Serialize)]
struct CompressReport {
    language_id: String,
    n_min: usize,
    a: f64,
    floor_tokens: u64,
    rows: Vec<CompressRow>,
}

pub fn cmd_compress(a: &CompressArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("compress", args, a, None);
    m.input(&a.input.corpus)?;
    let corpus = a.input.load()?;
    let n_max = a.sizes.iter().copied().max().unwrap_or(0);
    let profile = CompressionProfile::build(&corpus, n_max, &trainer_config(a.min_frequency))?;
    let rows = a
        .sizes
        .iter()
        .map(|&n| {
            Ok(CompressRow {
                n,
                vocab_size: n.min(profile.n_trained()),
                acr: profile.acr(n)?,
                rcr: profile.rcr(n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = CompressReport {
        language_id: profile.language_id().to_string(),
        n_min: profile.n_min(),
        a: profile.asymptote(),
        floor_tokens: profile.floor_tokens(),
        rows,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    if let Some(out) = &a.out {
        grid::write_atomic(out, json.as_bytes())?;
        m.output(out);
        m.write(&sidecar(out))?;
    }
    Ok(())
}

pub fn cmd_embed(a: &EmbedArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("embed", args, a, Some(a.seed));
    m.input(&a.input.corpus)?;
    m.input(&a.vocab)?;
    let corpus = a.input.load()?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let config = EmbedConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        subsample: a.subsample,
        threads: if a.deterministic { 1 } else { a.threads },
    };
    m.stage("train");
    let trained = train_embeddings(&corpus, &vocab, &config, a.seed)?;
    trained.matrix.save(&a.out, &vocab.content_hash())?;
    m.output(&a.out);
    m.output(&EmbeddingMatrix::meta_path(&a.out));
    m.write(&sidecar(&a.out))?;
    for (i, l) in trained.epoch_loss.iter().enumerate() {
        println!("epoch {} loss {l:.6}", i + 1);
    }
    Ok(())
}

pub fn cmd_svg(a: &SvgArgs) -> Result<()> {
    let (left, _) = EmbeddingMatrix::load(&a.left)?;
    let (right, _) = EmbeddingMatrix::load(&a.right)?;
    let value = svg(&singular_values(&left)?, &singular_values(&right)?, a.k)?;
    println!("{value}");
    Ok(())
}

pub fn cmd_grid_run(a: &GridRunArgs, args: Vec<String>) -> Result<()> {
    let mut cfg = GridConfig::load(&a.config)?;
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out_dir {
        cfg.out_dir = o.clone();
    }
    if a.deterministic {
        cfg.jobs = 1;
        cfg.embed.threads = 1;
    }
    let mut m = ManifestBuilder::new("grid run", args, &cfg, Some(cfg.seed));
    m.input(&a.config)?;
    m.input(&cfg.left.corpus)?;
    m.input(&cfg.right.corpus)?;
    m.stage("grid");
    let run = grid::run_grid(&cfg)?;
    let path = cfg.out_dir.join("grid.json");
    export_grid(&run.grid, ExportFormat::Json, &path)?;
    m.output(&path);
    m.write(&cfg.out_dir.join("manifest.json"))?;
    println!(
        "{} x {} cells, {} trainings, {} cache hits",
        run.grid.left.sizes.len(),
        run.grid.right.sizes.len(),
        run.trainings,
        run.cache_hits
    );
    Ok(())
}

pub fn cmd_grid_export(a: &GridExportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.grid).map_err(|e| Error::io(&a.grid, e))?;
    let g = CompatGrid::from_json(&text)?;
    let (format, ext) = match a.format {
        FormatArg::Json => (ExportFormat::Json, "json"),
        FormatArg::Csv => (ExportFormat::Csv, "csv"),
        FormatArg::Pgm => (ExportFormat::Pgm, "pgm"),
    };
    let out = a.out.clone().unwrap_or_else(|| a.grid.with_extension(ext));
    export_grid(&g, format, &out)?;
    println!("{}", out.display());
    Ok(())
}

pub fn cmd_correlate(a: &CorrelateArgs) -> Result<()> {
    let text = match (&a.fixture, &a.input) {
        (Some(Fixture::Table7), _) => TABLE7_CSV.to_string(),
        (None, Some(p)) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        (None, None) => return Err(Error::InvalidArgument("give --fixture or --input".into())),
    };
    let records = parse_records_csv(&text)?;
    let r = correlate(&records, a.reference.as_deref())?;
    println!("n {}", r.n);
    println!("pearson_abs {:.4}", r.pearson_abs);
    println!("pearson_rel {:.4}", r.pearson_rel);
    Ok(())
}

pub fn cmd_fake(a: &FakeArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("fake", args, a, None);
    m.input(&a.input)?;
    let bytes = fs::read(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        Error::InvalidUtf8 { line: line + 1 }
    })?;
    let converted = fake_tsv_file_contents(&text, &a.marker, a.invert)?;
    grid::write_atomic(&a.output, converted.as_bytes())?;
    m.output(&a.output);
    m.write(&sidecar(&a.output))?;
    Ok(())
}

pub fn cmd_split(a: &SplitArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("split", args, a, Some(a.seed));
    m.input(&a.left)?;
    m.input(&a.right)?;
    let lang = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let left = corpus::load_corpus(&a.left, &lang(&a.left))?;
    let right = corpus::load_corpus(&a.right, &lang(&a.right))?;
    let pair = align(&left, &right)?;
    let s = corpus::split(&pair, a.dev, a.test, a.seed)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    for (split, src) in [(&s.left, &a.left), (&s.right, &a.right)] {
        let base = a.out_dir.join(src.file_name().unwrap_or_default());
        for p in split.write(&base)? {
            m.output(&p);
        }
    }
    m.write(&a.out_dir.join("manifest.json"))?;
    println!(
        "common {} train {} dev {} test {}",
        pair.common_ids.len(),
        s.left.train.len(),
        s.left.dev.len(),
        s.left.test.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn config_supplies_missing_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 3\n[curve]\nk = 50\nseed = 9\nnfc = true\n").unwrap();
        let p = path.to_str().unwrap();
        let out = apply_config_defaults(args(&["vc", "curve", "--config", p, "--k", "10"])).unwrap();
        assert_eq!(out[6..], args(&["--nfc", "--seed", "9"]));
        let out = apply_config_defaults(args(&["vc", "embed", "--config", p])).unwrap();
        assert_eq!(out[4..], args(&["--seed", "3"]));
        let out = apply_config_defaults(args(&["vc", "svg", "--config", p])).unwrap();
        assert_eq!(out.len(), 4);
        let grid = args(&["vc", "grid", "run", "--config", p]);
        assert_eq!(apply_config_defaults(grid.clone()).unwrap(), grid);
    }

    #[test]
    fn table7_fixture_correlation() {
        let r = correlate(&parse_records_csv(TABLE7_CSV).unwrap(), None).unwrap();
        assert_eq!(r.n, 15);
        assert!((r.pearson_abs - 0.40).abs() <= 0.01);
        assert!((r.pearson_rel - 0.34).abs() <= 0.01);
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(exit_code(ErrorKind::Usage), 2);
        assert_eq!(exit_code(ErrorKind::Data), 3);
        assert_eq!(exit_code(ErrorKind::Numeric), 4);
    }
}
