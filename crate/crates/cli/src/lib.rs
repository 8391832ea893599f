//! Subcommands of the `lda-search` binary.
//!
//! Options are layered: command-line flags override a JSON config file,
//! which overrides built-in defaults. All artifacts go to files; stdout only
//! carries progress lines.

pub mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lda_core::ingest::{parse_hmda_csv, DropReason, LarParse, SchemaConfig};
use lda_core::models::{Hyperparams, ModelFamily};
use lda_core::search::SearchConfig;
use lda_core::sim::Cents;
use lda_core::summary::{summarize_dataset, DatasetSummary};
use lda_core::{report, run_horizontal_search, FeatureConfig};
use serde::{Deserialize, Serialize};

pub use synth::SynthConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] lda_core::Error),
    #[error("all {0} candidates failed")]
    AllCandidatesFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::AllCandidatesFailed(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(
    name = "lda-search",
    version,
    about = "Horizontal search for less discriminatory lending models"
)]
pub struct Cli {
    /// JSON file with option values; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Race shares, outcome shares and mean loan terms of an input file.
    Summarize(CommonArgs),
    /// Evaluate every family and feature configuration and write a report directory.
    Search(SearchArgs),
    /// Write a seeded synthetic HMDA-schema CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// HMDA-schema CSV to read.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Column-name overrides as a JSON object, inline or as a file path.
    #[arg(long)]
    pub schema: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SearchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Required; fixes every split and model.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Records sampled per resample; defaults to min(100000, available).
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Training share of each sample [default: 0.8].
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Comma list of LR, KNN, CART, NB, RF.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Comma list of race_aware, race_blind.
    #[arg(long, value_delimiter = ',')]
    pub configs: Option<Vec<String>>,
    /// Lender budget in currency units [default: 1000000000].
    #[arg(long)]
    pub cap: Option<String>,
    /// Uniform interest rate applied to every approved loan [default: 0].
    #[arg(long)]
    pub rate: Option<f64>,
    /// Number of train/test resamples [default: 10].
    #[arg(long)]
    pub resamples: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    /// CSV file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: 10000]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Planted disparity strength in [0, 1] [default: 0.5].
    #[arg(long)]
    pub strength: Option<f64>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub schema: Option<SchemaConfig>,
    pub seed: Option<u64>,
    pub sample_size: Option<usize>,
    pub train_frac: Option<f64>,
    pub families: Option<Vec<String>>,
    pub configs: Option<Vec<String>>,
    pub cap: Option<Cents>,
    pub rate: Option<f64>,
    pub resamples: Option<usize>,
    pub hyperparams: Option<BTreeMap<ModelFamily, Hyperparams>>,
    pub rows: Option<usize>,
    pub strength: Option<f64>,
    pub group_shares: Option<BTreeMap<lda_core::RaceCategory, f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

fn load_schema(arg: Option<&str>, file: Option<&SchemaConfig>) -> CliResult<SchemaConfig> {
    let Some(arg) = arg else {
        return Ok(file.cloned().unwrap_or_default());
    };
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg)
            .map_err(|e| CliError::Usage(format!("cannot read schema {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid schema mapping: {e}")))
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> CliResult<T> {
    match flag.or(file) {
        Some(v) => Ok(v),
        None => usage(format!("--{name} is required")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub input: PathBuf,
    pub out: PathBuf,
    pub schema: SchemaConfig,
}

impl IngestOptions {
    fn resolve(a: CommonArgs, f: &FileConfig) -> CliResult<Self> {
        Ok(IngestOptions {
            schema: load_schema(a.schema.as_deref(), f.schema.as_ref())?,
            input: required(a.input, f.input.clone(), "input")?,
            out: required(a.out, f.out.clone(), "out")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub ingest: IngestOptions,
    pub seed: u64,
    /// `None` uses every record up to the default sample size.
    pub sample_size: Option<usize>,
    pub train_frac: f64,
    pub families: Vec<ModelFamily>,
    pub configs: Vec<FeatureConfig>,
    pub cap: Cents,
    pub rate: f64,
    pub resamples: usize,
    pub hyperparams: BTreeMap<ModelFamily, Hyperparams>,
}

fn parse_list<T: std::str::FromStr<Err = lda_core::Error>>(
    items: Vec<String>,
    what: &str,
) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for s in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        out.push(
            s.parse()
                .map_err(|e: lda_core::Error| CliError::Usage(e.to_string()))?,
        );
    }
    if out.is_empty() {
        return usage(format!("--{what} must name at least one value"));
    }
    Ok(out)
}

impl SearchOptions {
    pub fn resolve(a: SearchArgs, f: &FileConfig) -> CliResult<Self> {
        let defaults = SearchConfig::new(0);
        let cap = match a.cap {
            Some(s) => s
                .parse()
                .map_err(|e: lda_core::Error| CliError::Usage(e.to_string()))?,
            None => f.cap.unwrap_or(defaults.sim.cap),
        };
        let families = match a.families.or(f.families.clone()) {
            Some(v) => parse_list(v, "families")?,
            None => defaults.families.clone(),
        };
        let configs = match a.configs.or(f.configs.clone()) {
            Some(v) => parse_list(v, "configs")?,
            None => defaults.feature_configs.clone(),
        };
        Ok(SearchOptions {
            ingest: IngestOptions::resolve(a.common, f)?,
            seed: required(a.seed, f.seed, "seed")?,
            sample_size: a.sample_size.or(f.sample_size),
            train_frac: a.train_frac.or(f.train_frac).unwrap_or(defaults.train_frac),
            families,
            configs,
            cap,
            rate: a.rate.or(f.rate).unwrap_or(defaults.sim.uniform_rate),
            resamples: a.resamples.or(f.resamples).unwrap_or(defaults.n_resamples),
            hyperparams: f.hyperparams.clone().unwrap_or_default(),
        })
    }

    pub fn search_config(&self, available: usize) -> SearchConfig {
        let mut c = SearchConfig::new(self.seed);
        c.families = self.families.clone();
        c.feature_configs = self.configs.clone();
        c.n_resamples = self.resamples;
        c.sample_size = self
            .sample_size
            .unwrap_or(lda_core::split::DEFAULT_SAMPLE_SIZE.min(available));
        c.train_frac = self.train_frac;
        c.sim.cap = self.cap;
        c.sim.uniform_rate = self.rate;
        c.hyperparams = self.hyperparams.clone();
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub out: PathBuf,
    pub config: SynthConfig,
}

impl SynthOptions {
    pub fn resolve(a: SynthArgs, f: &FileConfig) -> CliResult<Self> {
        let d = SynthConfig::default();
        Ok(SynthOptions {
            out: required(a.out, f.out.clone(), "out")?,
            config: SynthConfig {
                rows: a.rows.or(f.rows).unwrap_or(d.rows),
                strength: a.strength.or(f.strength).unwrap_or(d.strength),
                seed: required(a.seed, f.seed, "seed")?,
                group_shares: f.group_shares.clone().unwrap_or(d.group_shares),
            },
        })
    }
}

fn ingest(opts: &IngestOptions) -> CliResult<LarParse> {
    let parsed = parse_hmda_csv(&opts.input, &opts.schema)?;
    println!(
        "parsed {} records from {} ({} dropped)",
        parsed.records.len(),
        opts.input.display(),
        parsed.drop_count()
    );
    if parsed.records.is_empty() {
        return Err(lda_core::Error::NoUsableRows {
            dropped: parsed.drop_count(),
        }
        .into());
    }
    Ok(parsed)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Usage(format!(
            "output directory {} is not writable: {e}",
            dir.display()
        ))
    })
}

#[derive(Debug, Serialize)]
pub struct SummaryFile {
    pub input: PathBuf,
    pub records: usize,
    pub dropped: usize,
    pub dropped_by_reason: BTreeMap<DropReason, usize>,
    pub summary: DatasetSummary,
}

/// Writes `summary.json` into the output directory.
pub fn cmd_summarize(opts: &IngestOptions) -> CliResult<PathBuf> {
    let parsed = ingest(opts)?;
    create_dir(&opts.out)?;
    let file = SummaryFile {
        input: opts.input.clone(),
        records: parsed.records.len(),
        dropped: parsed.drop_count(),
        dropped_by_reason: parsed.drop_counts_by_reason(),
        summary: summarize_dataset(&parsed.records),
    };
    let path = opts.out.join("summary.json");
    let mut body = serde_json::to_string_pretty(&file).map_err(lda_core::Error::from)?;
    body.push('\n');
    fs::write(&path, body)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(path)
}

/// Runs the search and writes the report directory. Fails with
/// [`CliError::AllCandidatesFailed`] only if no candidate succeeded.
pub fn cmd_search(opts: &SearchOptions) -> CliResult<lda_core::SearchReport> {
    let parsed = ingest(&opts.ingest)?;
    let config = opts.search_config(parsed.records.len());
    config.validate()?;
    create_dir(&opts.ingest.out)?;
    println!(
        "searching {} candidates over {} resamples of {} records",
        config.candidates().len(),
        config.n_resamples,
        config.sample_size
    );
    let report = run_horizontal_search(&config, &parsed.records)?;
    for f in &report.failures {
        log::warn!("candidate {} failed: {}", f.id, f.error);
    }
    if report.candidates.is_empty() {
        return Err(CliError::AllCandidatesFailed(report.failures.len()));
    }
    for path in report::write_report(&report, &opts.ingest.out)? {
        println!("wrote {}", path.display());
    }
    Ok(report)
}

pub fn cmd_synth(opts: &SynthOptions) -> CliResult<PathBuf> {
    let rows = synth::generate(&opts.config)?;
    if let Some(dir) = opts.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let file = fs::File::create(&opts.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", opts.out.display())))?;
    synth::write_csv(&rows, std::io::BufWriter::new(file))?;
    println!(
        "wrote {} synthetic rows to {}",
        rows.len(),
        opts.out.display()
    );
    Ok(opts.out.clone())
}

pub fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Summarize(a) => cmd_summarize(&IngestOptions::resolve(a, &file)?).map(drop),
        Command::Search(a) => cmd_search(&SearchOptions::resolve(a, &file)?).map(drop),
        Command::Synth(a) => cmd_synth(&SynthOptions::resolve(a, &file)?).map(drop),
    }
}
