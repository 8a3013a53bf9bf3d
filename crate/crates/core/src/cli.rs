//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the input or configuration is invalid
//! (nothing is written), 2 when a run fails (files written by the failed
//! invocation are removed).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataio::Group;
use crate::decomposition::{
    decompose_points, read_sensitive_csv, read_table_csv, DecompositionMode, DecompositionReport,
};
use crate::error::{Error, Result};
use crate::experiments::{self, audit_table, ExperimentConfig, ExperimentKind, MetricSummary, MitigationKind};
use crate::learners::{LearnerKind, LearnerSpec};
use crate::metrics::{discrimination, DiscriminationRecord, MetricKind};

#[derive(Debug, Parser)]
#[command(name = "bias-audit", version, about = "Sample-size and underrepresentation bias in discrimination estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep training sizes and report sample size bias.
    Ssb(RunArgs),
    /// Sweep group splits and report underrepresentation bias.
    Urb(RunArgs),
    /// Paired sweep without and with reweighing.
    Mitigate(RunArgs),
    /// Grow one group while the other stays fixed.
    Augment(RunArgs),
    /// Decompose an external prediction table.
    Decompose(DecomposeArgs),
    /// Discrimination of a single set of predictions.
    Metrics(MetricsArgs),
    /// Check a configuration file and print it with defaults filled in.
    ValidateConfig(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// logreg, tree, knn or forest, with default hyperparameters.
    #[arg(long)]
    learner: Option<String>,
    /// Comma-separated metric names.
    #[arg(long)]
    metrics: Option<String>,
    /// `start:end:step` (inclusive) or a comma-separated list.
    #[arg(long)]
    sizes: Option<String>,
    /// Comma-separated privileged-group fractions.
    #[arg(long)]
    splits: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    /// CSV with header `eval_id,label,r0,...`.
    #[arg(long)]
    table: PathBuf,
    /// CSV with header `eval_id,sensitive`.
    #[arg(long)]
    sensitive: PathBuf,
    #[arg(long, value_enum, default_value = "label")]
    mode: ModeArg,
    /// Comma-separated metric names; all metrics by default.
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Label,
    Score,
}

impl From<ModeArg> for DecompositionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Label => DecompositionMode::Label,
            ModeArg::Score => DecompositionMode::Score,
        }
    }
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// CSV with columns `label,sensitive,pred_label` and optionally `score`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut written = Vec::new();
    match dispatch(cli.command, &mut written) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            for path in &written {
                let _ = std::fs::remove_file(path);
            }
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(command: Command, written: &mut Vec<PathBuf>) -> Result<()> {
    match command {
        Command::Ssb(a) => run_experiment(ExperimentKind::Ssb, a, written),
        Command::Urb(a) => run_experiment(ExperimentKind::Urb, a, written),
        Command::Mitigate(a) => run_experiment(ExperimentKind::Mitigation, a, written),
        Command::Augment(a) => run_experiment(ExperimentKind::Augmentation, a, written),
        Command::Decompose(a) => decompose_cmd(a, written),
        Command::Metrics(a) => metrics_cmd(a, written),
        Command::ValidateConfig(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            cfg.validate()?;
            println!("{}", cfg.to_json_pretty()?);
            Ok(())
        }
    }
}

pub fn parse_metrics(list: &str) -> Result<Vec<MetricKind>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// `start:end:step` with an inclusive end, or a comma-separated list.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot read sizes {spec:?}; use start:end:step or a comma list"));
    if spec.contains(':') {
        let parts: Vec<usize> = spec
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, end, step] = parts[..] else {
            return Err(bad());
        };
        if step == 0 || start > end {
            return Err(bad());
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        spec.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
    }
}

pub fn parse_splits(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("split {:?} is not a number", p.trim())))
        })
        .collect()
}

fn apply_overrides(cfg: &mut ExperimentConfig, kind: ExperimentKind, a: &RunArgs) -> Result<()> {
    cfg.experiment = kind;
    if kind == ExperimentKind::Mitigation && cfg.mitigation == MitigationKind::None {
        cfg.mitigation = MitigationKind::Reweighing;
    }
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(name) = &a.learner {
        let kind = LearnerKind::from_name(name)
            .ok_or_else(|| Error::Config(format!("unknown learner {name:?} (logreg, tree, knn, forest)")))?;
        cfg.learner = LearnerSpec::new(kind).with_seed(cfg.learner.seed);
    }
    if let Some(m) = &a.metrics {
        cfg.metrics = parse_metrics(m)?;
    }
    if let Some(s) = &a.sizes {
        cfg.sizes = parse_sizes(s)?;
    }
    if let Some(s) = &a.splits {
        cfg.splits = parse_splits(s)?;
    }
    if let Some(out) = &a.out {
        cfg.output = Some(out.clone());
    }
    Ok(())
}

fn write_file(path: &Path, written: &mut Vec<PathBuf>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    written.push(path.to_path_buf());
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => write_file(path, written, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_experiment(kind: ExperimentKind, a: RunArgs, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    apply_overrides(&mut cfg, kind, &a)?;
    cfg.validate()?;
    let result = experiments::run(&cfg)?;
    let out = cfg.output.clone();
    match (a.format, out) {
        (Format::Json, out) => emit_json(&result, out.as_deref(), written),
        (Format::Csv, Some(path)) => {
            let path = path.with_extension("csv");
            write_file(&path, written, |w| result.write_csv(w))
        }
        (Format::Csv, None) => result.write_csv(std::io::stdout().lock()),
        (Format::Both, Some(path)) => {
            let json = path.with_extension("json");
            let csv = path.with_extension("csv");
            emit_json(&result, Some(&json), written)?;
            write_file(&csv, written, |w| result.write_csv(w))
        }
        (Format::Both, None) => Err(Error::Config("--format both needs --out".into())),
    }
}

#[derive(Serialize)]
struct DecomposeOutput {
    schema_version: &'static str,
    mode: DecompositionMode,
    replicates: usize,
    points: usize,
    /// Largest pointwise `|loss - (noise + bias + net_variance)|`.
    max_point_residual: f64,
    report: DecompositionReport<f64>,
    metrics: Vec<MetricSummary>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn decompose_cmd(a: DecomposeArgs, written: &mut Vec<PathBuf>) -> Result<()> {
    let metrics = match &a.metrics {
        Some(m) => parse_metrics(m)?,
        None => MetricKind::ALL.to_vec(),
    };
    let table = read_table_csv(open(&a.table)?, a.mode.into())?;
    let sensitive = read_sensitive_csv(open(&a.sensitive)?, table.eval_ids())?;
    let points = decompose_points(&table);
    let max_point_residual = (0..table.n())
        .map(|j| (points.loss[j] - (points.noise[j] + points.bias[j] + points.net_variance[j])).abs())
        .fold(0.0, f64::max);
    let audit = audit_table(&table, &sensitive, &metrics)?;
    let out = DecomposeOutput {
        schema_version: experiments::SCHEMA_VERSION,
        mode: table.mode(),
        replicates: table.k(),
        points: table.n(),
        max_point_residual,
        report: audit.report,
        metrics: audit.metrics,
    };
    emit_json(&out, a.out.as_deref(), written)
}

#[derive(Serialize)]
struct MetricsOutput {
    schema_version: &'static str,
    rows: usize,
    records: Vec<DiscriminationRecord<f64>>,
}

fn metrics_cmd(a: MetricsArgs, written: &mut Vec<PathBuf>) -> Result<()> {
    let metrics = match &a.metrics {
        Some(m) => parse_metrics(m)?,
        None => MetricKind::ALL.to_vec(),
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(&a.input)?);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let missing = |name: &str| Error::Schema(format!("input has no {name:?} column"));
    let label_c = col("label").ok_or_else(|| missing("label"))?;
    let sens_c = col("sensitive").ok_or_else(|| missing("sensitive"))?;
    let pred_c = col("pred_label").ok_or_else(|| missing("pred_label"))?;
    let score_c = col("score");
    // AUC is dropped from the default metric set when there are no scores,
    // but asking for it explicitly is an error.
    if score_c.is_none() && a.metrics.is_some() && metrics.contains(&MetricKind::Auc) {
        return Err(Error::Schema("AUC needs a \"score\" column".into()));
    }
    let metrics: Vec<MetricKind> = metrics
        .into_iter()
        .filter(|m| *m != MetricKind::Auc || score_c.is_some())
        .collect();
    let bit = |row: usize, column: &str, v: &str| match v {
        "0" => Ok(0u8),
        "1" => Ok(1u8),
        _ => Err(Error::Table {
            row,
            column: column.into(),
            message: format!("{v:?} is not 0 or 1"),
        }),
    };
    let (mut labels, mut groups, mut preds, mut scores) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        labels.push(bit(row, "label", &rec[label_c])?);
        groups.push(match &rec[sens_c] {
            "a0" | "0" => Group::Unprivileged,
            "a1" | "1" => Group::Privileged,
            v => {
                return Err(Error::Table {
                    row,
                    column: "sensitive".into(),
                    message: format!("{v:?} is not a0/a1"),
                })
            }
        });
        let p = bit(row, "pred_label", &rec[pred_c])?;
        preds.push(p);
        scores.push(match score_c {
            Some(c) => rec[c].parse::<f64>().ok().filter(|s| (0.0..=1.0).contains(s)).ok_or_else(|| Error::Table {
                row,
                column: "score".into(),
                message: format!("{:?} is not a score in [0, 1]", &rec[c]),
            })?,
            None => f64::from(p),
        });
    }
    let records = metrics
        .iter()
        .map(|&m| discrimination(m, &preds, &scores, &labels, &groups))
        .collect::<Result<Vec<_>>>()?;
    let out = MetricsOutput {
        schema_version: experiments::SCHEMA_VERSION,
        rows: labels.len(),
        records,
    };
    emit_json(&out, a.out.as_deref(), written)
}
