//! Sweep experiments: sample-size, split-ratio, mitigation and augmentation.
//!
//! Every sweep index trains one model per replicate sample, predicts a fixed
//! evaluation set once per model and summarizes the replicate
//! discriminations. The same predictions form the [`PredictionTable`] whose
//! decomposition is reported alongside.
//!
//! Seeds are derived from the master seed with
//! [`derive_seed`](crate::sampling::derive_seed), and all parallel work is
//! collected in index order, so a configuration always serializes to the
//! same bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    generate_synthetic, group_stats, load_csv, rebalance_outcome_rates, DataSchema, Dataset, Group,
    SyntheticSpec,
};
use crate::decomposition::{
    build_table, decompose, main_prediction_record, ssb_decomposition, DecompositionMode, DecompositionReport,
    PredictionTable,
};
use crate::error::{Error, Result};
use crate::learners::{fit, LearnerSpec, Model};
use crate::metrics::{discrimination, linear_attribution, permutation_importance, MetricKind};
use crate::mitigation::reweighing_weights;
use crate::sampling::{derive_seed, rng, Protocol, ProtocolKind};

pub const SCHEMA_VERSION: &str = "1";

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "BIAS_AUDIT_THREADS";

// Seed streams that never collide with sweep indices.
const EVAL_SPLIT_STREAM: u64 = u64::MAX;
const FOLD_STREAM: u64 = u64::MAX - 1;
const IMPORTANCE_STREAM: u64 = u64::MAX - 2;

const DEFAULT_IMPORTANCE_REPEATS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Ssb,
    Urb,
    Mitigation,
    Augmentation,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Ssb => "ssb",
            ExperimentKind::Urb => "urb",
            ExperimentKind::Mitigation => "mitigation",
            ExperimentKind::Augmentation => "augmentation",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MitigationKind {
    #[default]
    None,
    Reweighing,
}

/// The sweep a mitigation experiment runs both arms of.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseSweep {
    #[default]
    Ssb,
    Urb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RebalanceSpec {
    pub rate_a1: f64,
    pub rate_a0: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        schema: DataSchema,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rebalance: Option<RebalanceSpec>,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Synthetic(spec) => generate_synthetic(spec),
            DataSource::Csv { path, schema, rebalance } => {
                let ds = load_csv(path, schema)?;
                match rebalance {
                    Some(r) => rebalance_outcome_rates(&ds, r.rate_a1, r.rate_a0, r.seed),
                    None => Ok(ds),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalMode {
    /// A fixed fraction of the population, drawn once, is the evaluation
    /// set; training samples come from the rest.
    Holdout { fraction: f64 },
    /// Train and evaluate on the whole population.
    FullPopulation,
    /// `folds`-fold cross-validation: each fold is evaluated by models
    /// trained on samples drawn from the other folds.
    Cv { folds: usize },
}

impl Default for EvalMode {
    fn default() -> Self {
        EvalMode::Holdout { fraction: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowingConfig {
    pub fixed_group: Group,
    pub fixed_n: usize,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub selective: bool,
}

fn default_metrics() -> Vec<MetricKind> {
    MetricKind::ALL.to_vec()
}

fn default_repeats() -> usize {
    crate::sampling::DEFAULT_REPEATS
}

fn default_sample_size() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub data: DataSource,
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    /// Training sizes of a sample-size sweep.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Privileged-group fractions of a split sweep.
    #[serde(default)]
    pub splits: Vec<f64>,
    /// Training size of a split sweep.
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default)]
    pub growing: Option<GrowingConfig>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub mitigation: MitigationKind,
    #[serde(default)]
    pub base: BaseSweep,
    #[serde(default)]
    pub eval: EvalMode,
    #[serde(default)]
    pub decomposition: DecompositionMode,
    /// Permutations per model for sensitive-feature importance. Defaults to
    /// 5 for augmentation sweeps and 0 (off) otherwise.
    #[serde(default)]
    pub importance_repeats: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn effective_importance_repeats(&self) -> usize {
        self.importance_repeats.unwrap_or(match self.experiment {
            ExperimentKind::Augmentation => DEFAULT_IMPORTANCE_REPEATS,
            _ => 0,
        })
    }

    /// The sweep whose indices this experiment walks.
    fn sweep(&self) -> BaseSweep {
        match self.experiment {
            ExperimentKind::Urb => BaseSweep::Urb,
            ExperimentKind::Mitigation => self.base,
            _ => BaseSweep::Ssb,
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::Config("at least one metric is required".into()));
        }
        for (i, m) in self.metrics.iter().enumerate() {
            if self.metrics[..i].contains(m) {
                return Err(Error::Config(format!("metric {m} listed twice")));
            }
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        self.learner.validate()?;
        match &self.eval {
            EvalMode::Holdout { fraction } if !(*fraction > 0.0 && *fraction < 1.0) => {
                return Err(Error::Config(format!("holdout fraction {fraction} must lie in (0, 1)")));
            }
            EvalMode::Cv { folds } if *folds < 2 => {
                return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {folds}")));
            }
            _ => {}
        }
        if let DataSource::Csv { schema, .. } = &self.data {
            schema.validate()?;
        }
        if self.experiment == ExperimentKind::Mitigation && self.mitigation != MitigationKind::Reweighing {
            return Err(Error::Config("a mitigation experiment needs mitigation = reweighing".into()));
        }
        if self.experiment == ExperimentKind::Augmentation {
            let Some(g) = &self.growing else {
                return Err(Error::Config("an augmentation experiment needs a growing block".into()));
            };
            return self.growing_protocol(g, 0).validate();
        }
        match self.sweep() {
            BaseSweep::Ssb => {
                if self.sizes.is_empty() {
                    return Err(Error::Config("sizes must not be empty".into()));
                }
                for &m in &self.sizes {
                    Protocol::new(ProtocolKind::Sized { m }, 0).validate()?;
                }
            }
            BaseSweep::Urb => {
                if self.splits.is_empty() {
                    return Err(Error::Config("splits must not be empty".into()));
                }
                for &f1 in &self.splits {
                    Protocol::new(ProtocolKind::Ratio { m: self.sample_size, f1 }, 0).validate()?;
                }
            }
        }
        Ok(())
    }

    fn growing_protocol(&self, g: &GrowingConfig, master_seed: u64) -> Protocol {
        Protocol::new(
            ProtocolKind::GrowingGroup {
                fixed_group: g.fixed_group,
                fixed_n: g.fixed_n,
                growing_sizes: g.sizes.clone(),
                selective_positive_only: g.selective,
            },
            master_seed,
        )
        .with_repeats(self.repeats)
    }
}

/// Mean, sample standard deviation and normal 95% interval of the defined
/// replicate values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub ci95: Option<[f64; 2]>,
    pub n_defined: usize,
}

pub fn summarize(values: &[Option<f64>]) -> Summary {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let n = defined.len();
    if n == 0 {
        return Summary {
            mean: None,
            std: None,
            ci95: None,
            n_defined: 0,
        };
    }
    let mean = defined.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| {
        let ss: f64 = defined.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    let ci95 = std.map(|s| {
        let half = 1.96 * s / (n as f64).sqrt();
        [mean - half, mean + half]
    });
    Summary {
        mean: Some(mean),
        std,
        ci95,
        n_defined: n,
    }
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    summarize(&values.into_iter().collect::<Vec<_>>()).mean
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Unmitigated,
    Mitigated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: MetricKind,
    pub mean_disc: Option<f64>,
    pub std_disc: Option<f64>,
    pub ci95: Option<[f64; 2]>,
    pub n_defined: usize,
    pub repeats: usize,
    pub cost_a0_mean: Option<f64>,
    pub cost_a1_mean: Option<f64>,
    /// Discrimination of the ensemble's main prediction.
    pub main_pred_disc: Option<f64>,
    /// `mean_disc` minus the reference entry's `mean_disc`.
    pub vs_reference: Option<f64>,
    /// `main_pred_disc` minus the reference entry's `main_pred_disc`.
    pub vs_reference_main_pred: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub mode: DecompositionMode,
    pub delta_noise: Option<f64>,
    pub delta_bias: Option<f64>,
    pub delta_net_variance: Option<f64>,
    /// Discrimination of the ensemble's expected loss.
    pub expected_loss_disc: Option<f64>,
    /// `|expected_loss_disc - (delta_noise + delta_bias + delta_net_variance)|`
    pub residual: Option<f64>,
    /// Bias part of the difference to the reference entry.
    pub bias_term: Option<f64>,
    /// Net-variance part of the difference to the reference entry.
    pub variance_term: Option<f64>,
    /// `|bias_term + variance_term - (expected_loss_disc - reference's)|`
    pub reference_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub feature: String,
    pub permutation_mean: Option<f64>,
    pub permutation_std: Option<f64>,
    /// Mean absolute linear attribution; logistic regression only.
    pub linear_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEntry {
    /// Training size, privileged fraction or growing-group size.
    pub index: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<Arm>,
    pub reference: bool,
    pub metrics: Vec<MetricSummary>,
    pub decomposition: DecompositionSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// `ssb`, `urb`, or `none` when entries have no reference.
    pub estimand: String,
    pub reference_index: Option<f64>,
    pub population_fraction_a1: f64,
    pub entries: Vec<SeriesEntry>,
}

impl Series {
    pub fn entry(&self, index: f64, arm: Option<Arm>) -> Option<&SeriesEntry> {
        self.entries.iter().find(|e| e.index == index && e.arm == arm)
    }
}

impl SeriesEntry {
    pub fn metric(&self, metric: MetricKind) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: String,
    pub config: ExperimentConfig,
    /// Wall-clock start, left empty unless the caller stamps it, so that
    /// identical runs produce identical files.
    pub started_at: Option<String>,
    pub series: Series,
}

impl SweepResult {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Flat export, one row per entry and metric.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "index",
            "arm",
            "reference",
            "metric",
            "mean_disc",
            "std_disc",
            "ci95_low",
            "ci95_high",
            "n_defined",
            "repeats",
            "cost_a0_mean",
            "cost_a1_mean",
            "main_pred_disc",
            "vs_reference",
            "vs_reference_main_pred",
            "delta_bias",
            "delta_net_variance",
            "expected_loss_disc",
        ])?;
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.series.entries {
            let arm = match e.arm {
                Some(Arm::Unmitigated) => "unmitigated",
                Some(Arm::Mitigated) => "mitigated",
                None => "",
            };
            for m in &e.metrics {
                w.write_record([
                    e.index.to_string(),
                    arm.to_string(),
                    e.reference.to_string(),
                    m.metric.to_string(),
                    f(m.mean_disc),
                    f(m.std_disc),
                    f(m.ci95.map(|c| c[0])),
                    f(m.ci95.map(|c| c[1])),
                    m.n_defined.to_string(),
                    m.repeats.to_string(),
                    f(m.cost_a0_mean),
                    f(m.cost_a1_mean),
                    f(m.main_pred_disc),
                    f(m.vs_reference),
                    f(m.vs_reference_main_pred),
                    f(e.decomposition.delta_bias),
                    f(e.decomposition.delta_net_variance),
                    f(e.decomposition.expected_loss_disc),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Metrics and decomposition of one externally supplied ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableAudit {
    pub metrics: Vec<MetricSummary>,
    pub report: DecompositionReport<f64>,
}

/// Audits any ensemble's predictions, for instance those of a model fitted
/// outside this crate and imported with
/// [`read_table_csv`](crate::decomposition::read_table_csv).
pub fn audit_table(table: &PredictionTable<f64>, sensitive: &[Group], metrics: &[MetricKind]) -> Result<TableAudit> {
    let outcome = outcome_from_table(table, sensitive, metrics, None)?;
    let summaries = metric_summaries(std::slice::from_ref(&outcome), metrics, table.k(), None);
    Ok(TableAudit {
        metrics: summaries,
        report: outcome.report,
    })
}

/// Everything computed at one sweep index for one evaluation fold.
#[derive(Clone, Debug)]
struct Outcome {
    /// `[metric][replicate]`
    disc: Vec<Vec<Option<f64>>>,
    cost_a0: Vec<Vec<Option<f64>>>,
    cost_a1: Vec<Vec<Option<f64>>>,
    main_pred: Vec<Option<f64>>,
    report: DecompositionReport<f64>,
    importance: Option<(Vec<f64>, Vec<Option<f64>>)>,
}

fn outcome_from_table(
    table: &PredictionTable<f64>,
    sensitive: &[Group],
    metrics: &[MetricKind],
    importance: Option<(Vec<f64>, Vec<Option<f64>>)>,
) -> Result<Outcome> {
    let mut disc = Vec::with_capacity(metrics.len());
    let mut cost_a0 = Vec::with_capacity(metrics.len());
    let mut cost_a1 = Vec::with_capacity(metrics.len());
    let mut main_pred = Vec::with_capacity(metrics.len());
    for &metric in metrics {
        let records = (0..table.k())
            .map(|r| {
                discrimination(
                    metric,
                    &table.pred_labels()[r],
                    &table.pred_scores()[r],
                    table.labels(),
                    sensitive,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        disc.push(records.iter().map(|r| r.disc).collect());
        cost_a0.push(records.iter().map(|r| r.cost_a0).collect());
        cost_a1.push(records.iter().map(|r| r.cost_a1).collect());
        main_pred.push(main_prediction_record(metric, table, sensitive)?.disc);
    }
    Ok(Outcome {
        disc,
        cost_a0,
        cost_a1,
        main_pred,
        report: decompose(table, sensitive)?,
        importance,
    })
}

/// Run-wide state shared by every sweep index.
struct Context<'a> {
    cfg: &'a ExperimentConfig,
    /// `(training pool, evaluation set)` per fold.
    folds: Vec<(Dataset, Dataset)>,
    population_fraction_a1: f64,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let data = cfg.data.load()?;
        if data.is_empty() {
            return Err(Error::Validation("the dataset is empty".into()));
        }
        let stats = group_stats(&data);
        let folds = split_eval(&data, &cfg.eval, cfg.master_seed)?;
        Ok(Context {
            cfg,
            folds,
            population_fraction_a1: stats.group_fraction_a1,
        })
    }

    /// Protocol master seed of fold `f`. A single fold uses the master seed
    /// itself.
    fn fold_seed(&self, f: usize) -> u64 {
        if self.folds.len() == 1 {
            self.cfg.master_seed
        } else {
            derive_seed(self.cfg.master_seed, FOLD_STREAM, f as u64)
        }
    }

    fn evaluate(&self, samples: &[Dataset], reweigh: bool, eval: &Dataset, sweep: u64) -> Result<Outcome> {
        let cfg = self.cfg;
        let models = samples
            .par_iter()
            .enumerate()
            .map(|(r, train)| {
                let spec = cfg
                    .learner
                    .clone()
                    .with_seed(derive_seed(cfg.learner.seed, sweep, r as u64));
                if reweigh {
                    let w = reweighing_weights::<f64>(train)?;
                    fit(&spec, train, Some(&w.row_weights))
                } else {
                    fit(&spec, train, None)
                }
            })
            .collect::<Result<Vec<Model>>>()?;
        let table = build_table(&models, eval, cfg.decomposition)?;
        let importance = match (cfg.effective_importance_repeats(), eval.sensitive_feature()) {
            (0, _) | (_, None) => None,
            (reps, Some(j)) => {
                let per_model = models
                    .par_iter()
                    .enumerate()
                    .map(|(r, m)| {
                        let seed = derive_seed(cfg.master_seed ^ sweep, IMPORTANCE_STREAM, r as u64);
                        let perm = permutation_importance(m, eval, j, reps, seed)?;
                        let lin = match m.as_logreg() {
                            Some(_) => Some(linear_attribution(m, eval)?[j]),
                            None => None,
                        };
                        Ok((perm, lin))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(per_model.into_iter().unzip())
            }
        };
        outcome_from_table(&table, eval.sensitive(), &cfg.metrics, importance)
    }

    fn protocol(&self, index: f64, master_seed: u64) -> Protocol {
        let kind = match self.cfg.sweep() {
            BaseSweep::Ssb => ProtocolKind::Sized { m: index as usize },
            BaseSweep::Urb => ProtocolKind::Ratio {
                m: self.cfg.sample_size,
                f1: index,
            },
        };
        Protocol::new(kind, master_seed).with_repeats(self.cfg.repeats)
    }

    /// Outcomes per fold for every index of a size or split sweep, for each
    /// requested arm. Both arms share the drawn samples.
    fn run_indices(&self, indices: &[f64], arms: &[bool]) -> Result<Vec<Vec<Vec<Outcome>>>> {
        let mut out = vec![vec![Vec::new(); indices.len()]; arms.len()];
        for (f, (pool, eval)) in self.folds.iter().enumerate() {
            for (i, &index) in indices.iter().enumerate() {
                let family = self.protocol(index, self.fold_seed(f)).draw(pool, i as u64)?;
                for (a, &reweigh) in arms.iter().enumerate() {
                    out[a][i].push(self.evaluate(&family.replicates, reweigh, eval, i as u64)?);
                }
            }
        }
        Ok(out)
    }

    fn feature_name(&self) -> Option<String> {
        let eval = &self.folds[0].1;
        eval.sensitive_feature().map(|j| eval.feature_names()[j].clone())
    }
}

fn split_eval(data: &Dataset, mode: &EvalMode, master_seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    use rand::seq::SliceRandom;
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(derive_seed(master_seed, EVAL_SPLIT_STREAM, 0)));
    match mode {
        EvalMode::FullPopulation => Ok(vec![(data.clone(), data.clone())]),
        EvalMode::Holdout { fraction } => {
            let n_eval = ((n as f64) * fraction).round() as usize;
            if n_eval == 0 || n_eval >= n {
                return Err(Error::Validation(format!(
                    "holdout fraction {fraction} leaves no rows for training or evaluation out of {n}"
                )));
            }
            let mut eval_idx = order[..n_eval].to_vec();
            let mut train_idx = order[n_eval..].to_vec();
            eval_idx.sort_unstable();
            train_idx.sort_unstable();
            Ok(vec![(data.select(&train_idx), data.select(&eval_idx))])
        }
        EvalMode::Cv { folds } => {
            if *folds > n {
                return Err(Error::Validation(format!("{folds} folds requested for {n} rows")));
            }
            Ok((0..*folds)
                .map(|f| {
                    let (mut train_idx, mut eval_idx): (Vec<usize>, Vec<usize>) =
                        (0..n).partition(|&p| p % folds != f);
                    train_idx = train_idx.into_iter().map(|p| order[p]).collect();
                    eval_idx = eval_idx.into_iter().map(|p| order[p]).collect();
                    train_idx.sort_unstable();
                    eval_idx.sort_unstable();
                    (data.select(&train_idx), data.select(&eval_idx))
                })
                .collect())
        }
    }
}

/// Summaries for one sweep index, pooling replicates over folds.
fn metric_summaries(
    outcomes: &[Outcome],
    metrics: &[MetricKind],
    repeats: usize,
    reference: Option<&[Outcome]>,
) -> Vec<MetricSummary> {
    let pooled = |o: &[Outcome], pick: fn(&Outcome) -> &Vec<Vec<Option<f64>>>, k: usize| -> Vec<Option<f64>> {
        o.iter().flat_map(|x| pick(x)[k].iter().copied()).collect()
    };
    let main_pred = |o: &[Outcome], k: usize| mean_defined(o.iter().map(|x| x.main_pred[k]));
    metrics
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            let s = summarize(&pooled(outcomes, |o| &o.disc, k));
            let mp = main_pred(outcomes, k);
            let (vs_ref, vs_ref_mp) = match reference {
                Some(r) => {
                    let rs = summarize(&pooled(r, |o| &o.disc, k)).mean;
                    let rmp = main_pred(r, k);
                    (
                        s.mean.zip(rs).map(|(a, b)| a - b),
                        mp.zip(rmp).map(|(a, b)| a - b),
                    )
                }
                None => (None, None),
            };
            MetricSummary {
                metric,
                mean_disc: s.mean,
                std_disc: s.std,
                ci95: s.ci95,
                n_defined: s.n_defined,
                repeats: repeats * outcomes.len(),
                cost_a0_mean: mean_defined(pooled(outcomes, |o| &o.cost_a0, k)),
                cost_a1_mean: mean_defined(pooled(outcomes, |o| &o.cost_a1, k)),
                main_pred_disc: mp,
                vs_reference: vs_ref,
                vs_reference_main_pred: vs_ref_mp,
            }
        })
        .collect()
}

fn decomposition_summary(mode: DecompositionMode, outcomes: &[Outcome], reference: Option<&[Outcome]>) -> DecompositionSummary {
    let delta = |pick: fn(&crate::decomposition::DecompositionDeltas<f64>) -> f64| {
        mean_defined(outcomes.iter().map(|o| o.report.deltas.as_ref().map(pick)))
    };
    let max_defined = |v: Vec<Option<f64>>| -> Option<f64> {
        if v.iter().any(Option::is_none) {
            None
        } else {
            v.into_iter().flatten().reduce(f64::max)
        }
    };
    let (bias_term, variance_term, reference_residual) = match reference {
        Some(r) => {
            let terms: Vec<_> = outcomes
                .iter()
                .zip(r)
                .map(|(o, ro)| ssb_decomposition(&o.report, &ro.report).ok())
                .collect();
            (
                mean_defined(terms.iter().map(|t| t.as_ref().map(|t| t.bias_term))),
                mean_defined(terms.iter().map(|t| t.as_ref().map(|t| t.variance_term))),
                max_defined(terms.iter().map(|t| t.as_ref().map(|t| t.residual)).collect()),
            )
        }
        None => (None, None, None),
    };
    DecompositionSummary {
        mode,
        delta_noise: delta(|d| d.noise),
        delta_bias: delta(|d| d.bias),
        delta_net_variance: delta(|d| d.net_variance),
        expected_loss_disc: delta(|d| d.loss),
        residual: max_defined(outcomes.iter().map(|o| o.report.deltas.as_ref().map(|d| d.residual)).collect()),
        bias_term,
        variance_term,
        reference_residual,
    }
}

fn importance_summary(feature: Option<String>, outcomes: &[Outcome]) -> Option<ImportanceSummary> {
    let feature = feature?;
    let mut perm = Vec::new();
    let mut lin = Vec::new();
    for o in outcomes {
        let (p, l) = o.importance.as_ref()?;
        perm.extend(p.iter().map(|&v| Some(v)));
        lin.extend(l.iter().copied());
    }
    let ps = summarize(&perm);
    Some(ImportanceSummary {
        feature,
        permutation_mean: ps.mean,
        permutation_std: ps.std,
        linear_mean: if lin.iter().all(Option::is_some) { mean_defined(lin) } else { None },
    })
}

fn entry(
    ctx: &Context<'_>,
    index: f64,
    arm: Option<Arm>,
    is_reference: bool,
    outcomes: &[Outcome],
    reference: Option<&[Outcome]>,
) -> SeriesEntry {
    SeriesEntry {
        index,
        arm,
        reference: is_reference,
        metrics: metric_summaries(outcomes, &ctx.cfg.metrics, ctx.cfg.repeats, reference),
        decomposition: decomposition_summary(ctx.cfg.decomposition, outcomes, reference),
        importance: importance_summary(ctx.feature_name(), outcomes),
    }
}

/// Index of the reference entry: the largest size, or the split closest to
/// the population ratio (first one on ties).
fn reference_position(sweep: BaseSweep, indices: &[f64], population_fraction_a1: f64) -> usize {
    let key = |v: f64| match sweep {
        BaseSweep::Ssb => -v,
        BaseSweep::Urb => (v - population_fraction_a1).abs(),
    };
    let mut best = 0;
    for (i, &v) in indices.iter().enumerate() {
        if key(v) < key(indices[best]) {
            best = i;
        }
    }
    best
}

fn sweep_result(ctx: &Context<'_>, indices: &[f64], arms: &[(Option<Arm>, bool)]) -> Result<SweepResult> {
    let sweep = ctx.cfg.sweep();
    let flags: Vec<bool> = arms.iter().map(|a| a.1).collect();
    let outcomes = ctx.run_indices(indices, &flags)?;
    let ref_pos = reference_position(sweep, indices, ctx.population_fraction_a1);
    let mut entries = Vec::new();
    for (i, &index) in indices.iter().enumerate() {
        for (a, (arm, _)) in arms.iter().enumerate() {
            entries.push(entry(ctx, index, *arm, i == ref_pos, &outcomes[a][i], Some(&outcomes[a][ref_pos])));
        }
    }
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION.into(),
        config: ctx.cfg.clone(),
        started_at: None,
        series: Series {
            estimand: match sweep {
                BaseSweep::Ssb => "ssb",
                BaseSweep::Urb => "urb",
            }
            .into(),
            reference_index: Some(indices[ref_pos]),
            population_fraction_a1: ctx.population_fraction_a1,
            entries,
        },
    })
}

fn with_threads<T: Send>(job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    pool.install(job)
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment == kind {
        Ok(())
    } else {
        Err(Error::Config(format!("configuration is for a {} experiment, not {kind}", cfg.experiment)))
    }
}

/// Sample-size sweep; SSB is reported against the largest size.
pub fn run_ssb(cfg: &ExperimentConfig) -> Result<SweepResult> {
    expect_kind(cfg, ExperimentKind::Ssb)?;
    with_threads(|| {
        let ctx = Context::new(cfg)?;
        let indices: Vec<f64> = cfg.sizes.iter().map(|&m| m as f64).collect();
        let reweigh = cfg.mitigation == MitigationKind::Reweighing;
        sweep_result(&ctx, &indices, &[(None, reweigh)])
    })
}

/// Split sweep at a fixed training size; URB is reported against the split
/// closest to the population's privileged fraction.
pub fn run_urb(cfg: &ExperimentConfig) -> Result<SweepResult> {
    expect_kind(cfg, ExperimentKind::Urb)?;
    with_threads(|| {
        let ctx = Context::new(cfg)?;
        let reweigh = cfg.mitigation == MitigationKind::Reweighing;
        sweep_result(&ctx, &cfg.splits, &[(None, reweigh)])
    })
}

/// Size or split sweep run twice on the same samples, without and with
/// reweighing.
pub fn run_mitigation(cfg: &ExperimentConfig) -> Result<SweepResult> {
    expect_kind(cfg, ExperimentKind::Mitigation)?;
    with_threads(|| {
        let ctx = Context::new(cfg)?;
        let indices: Vec<f64> = match cfg.base {
            BaseSweep::Ssb => cfg.sizes.iter().map(|&m| m as f64).collect(),
            BaseSweep::Urb => cfg.splits.clone(),
        };
        sweep_result(
            &ctx,
            &indices,
            &[(Some(Arm::Unmitigated), false), (Some(Arm::Mitigated), true)],
        )
    })
}

/// Fixed group plus a growing group. Replicate `r` of every size shares one
/// nested series, so sizes differ only in how many growing-group rows were
/// added.
pub fn run_augmentation(cfg: &ExperimentConfig) -> Result<SweepResult> {
    expect_kind(cfg, ExperimentKind::Augmentation)?;
    with_threads(|| {
        let ctx = Context::new(cfg)?;
        let g = cfg.growing.as_ref().expect("validated");
        let reweigh = cfg.mitigation == MitigationKind::Reweighing;
        let mut per_size: Vec<Vec<Outcome>> = vec![Vec::new(); g.sizes.len()];
        for (f, (pool, eval)) in ctx.folds.iter().enumerate() {
            let families = cfg.growing_protocol(g, ctx.fold_seed(f)).draw_growing(pool, 0)?;
            for (i, family) in families.iter().enumerate() {
                per_size[i].push(ctx.evaluate(&family.replicates, reweigh, eval, i as u64)?);
            }
        }
        let entries = g
            .sizes
            .iter()
            .zip(&per_size)
            .map(|(&size, outcomes)| entry(&ctx, size as f64, None, false, outcomes, None))
            .collect();
        Ok(SweepResult {
            schema_version: SCHEMA_VERSION.into(),
            config: cfg.clone(),
            started_at: None,
            series: Series {
                estimand: "none".into(),
                reference_index: None,
                population_fraction_a1: ctx.population_fraction_a1,
                entries,
            },
        })
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<SweepResult> {
    match cfg.experiment {
        ExperimentKind::Ssb => run_ssb(cfg),
        ExperimentKind::Urb => run_urb(cfg),
        ExperimentKind::Mitigation => run_mitigation(cfg),
        ExperimentKind::Augmentation => run_augmentation(cfg),
    }
}
