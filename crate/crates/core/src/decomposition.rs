//! Noise/bias/variance decomposition of discrimination over an ensemble of
//! models trained on different samples.
//!
//! A [`PredictionTable`] holds `k` replicate predictions for each of `n`
//! evaluation points. The optimal prediction is taken to be the observed
//! label (zero noise), so the noise terms exist but are identically 0.
//!
//! Two modes are supported:
//!
//! * [`DecompositionMode::Label`]: hard predictions, majority-vote main
//!   prediction, `loss = bias + (1 - 2 bias) variance` exactly. Squared and
//!   zero-one loss coincide on binary predictions.
//! * [`DecompositionMode::Score`]: scores, mean main prediction,
//!   `loss = bias + variance` for squared loss.
//!
//! Group-level aggregates are expected losses over the ensemble, and the
//! difference of two such aggregates between groups is the discrimination
//! that the bias and net-variance deltas add up to.

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Group};
use crate::error::{Error, Result};
use crate::learners::{predict_batch, Model};
use crate::metrics::{discrimination, DiscriminationRecord, MetricKind};
use crate::scalar::{ordered_sum, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionMode {
    #[default]
    Label,
    Score,
}

impl std::str::FromStr for DecompositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "label" | "labels" => Ok(DecompositionMode::Label),
            "score" | "scores" => Ok(DecompositionMode::Score),
            _ => Err(Error::Config(format!("unknown decomposition mode {s:?} (label or score)"))),
        }
    }
}

/// `k × n` replicate predictions over a fixed evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTable<T> {
    eval_ids: Vec<u64>,
    labels: Vec<u8>,
    pred_labels: Vec<Vec<u8>>,
    pred_scores: Vec<Vec<T>>,
    mode: DecompositionMode,
}

impl<T: Scalar> PredictionTable<T> {
    pub fn new(
        eval_ids: Vec<u64>,
        labels: Vec<u8>,
        pred_labels: Vec<Vec<u8>>,
        pred_scores: Vec<Vec<T>>,
        mode: DecompositionMode,
    ) -> Result<Self> {
        let n = labels.len();
        if eval_ids.len() != n {
            return Err(Error::Validation(format!("{} eval ids for {n} labels", eval_ids.len())));
        }
        if pred_labels.is_empty() {
            return Err(Error::Validation("a prediction table needs at least one replicate".into()));
        }
        if pred_labels.len() != pred_scores.len() {
            return Err(Error::Validation(format!(
                "{} label rows but {} score rows",
                pred_labels.len(),
                pred_scores.len()
            )));
        }
        if let Some(y) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Validation(format!("label {y} is not binary")));
        }
        for (r, (pl, ps)) in pred_labels.iter().zip(&pred_scores).enumerate() {
            if pl.len() != n || ps.len() != n {
                return Err(Error::Validation(format!("replicate {r} does not cover {n} points")));
            }
            if let Some(v) = pl.iter().find(|&&v| v > 1) {
                return Err(Error::Validation(format!("replicate {r} has non-binary prediction {v}")));
            }
            if ps.iter().any(|s| *s < T::zero() || *s > T::one()) {
                return Err(Error::Validation(format!("replicate {r} has a score outside [0, 1]")));
            }
        }
        Ok(PredictionTable {
            eval_ids,
            labels,
            pred_labels,
            pred_scores,
            mode,
        })
    }

    /// Label-mode table; scores are the hard predictions.
    pub fn from_labels(eval_ids: Vec<u64>, labels: Vec<u8>, pred_labels: Vec<Vec<u8>>) -> Result<Self> {
        let scores = pred_labels
            .iter()
            .map(|row| row.iter().map(|&v| T::from_count(v as usize)).collect())
            .collect();
        Self::new(eval_ids, labels, pred_labels, scores, DecompositionMode::Label)
    }

    /// Score-mode table; hard predictions threshold the scores at 1/2.
    pub fn from_scores(eval_ids: Vec<u64>, labels: Vec<u8>, pred_scores: Vec<Vec<T>>) -> Result<Self> {
        let half = T::half();
        let pred_labels = pred_scores
            .iter()
            .map(|row| row.iter().map(|s| u8::from(*s >= half)).collect())
            .collect();
        Self::new(eval_ids, labels, pred_labels, pred_scores, DecompositionMode::Score)
    }

    pub fn with_mode(mut self, mode: DecompositionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> DecompositionMode {
        self.mode
    }

    /// Number of replicates.
    pub fn k(&self) -> usize {
        self.pred_labels.len()
    }

    /// Number of evaluation points.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn eval_ids(&self) -> &[u64] {
        &self.eval_ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pred_labels(&self) -> &[Vec<u8>] {
        &self.pred_labels
    }

    pub fn pred_scores(&self) -> &[Vec<T>] {
        &self.pred_scores
    }

    /// Converts the scores to another scalar type.
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> PredictionTable<U> {
        PredictionTable {
            eval_ids: self.eval_ids.clone(),
            labels: self.labels.clone(),
            pred_labels: self.pred_labels.clone(),
            pred_scores: self
                .pred_scores
                .iter()
                .map(|row| row.iter().map(&f).collect())
                .collect(),
            mode: self.mode,
        }
    }

    fn fingerprint(&self) -> u64 {
        eval_fingerprint(&self.eval_ids)
    }
}

/// FNV-1a over the little-endian bytes of the evaluation ids.
fn eval_fingerprint(ids: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for id in ids {
        for b in id.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Predicts every model on `eval` once; row `i` holds model `i`.
pub fn build_table(models: &[Model], eval: &Dataset, mode: DecompositionMode) -> Result<PredictionTable<f64>> {
    let rows = models
        .par_iter()
        .map(|m| predict_batch(m, eval))
        .collect::<Result<Vec<_>>>()?;
    let (pred_labels, pred_scores) = rows.into_iter().unzip();
    PredictionTable::new(
        eval.row_ids().to_vec(),
        eval.labels().to_vec(),
        pred_labels,
        pred_scores,
        mode,
    )
}

/// Per-point main prediction: majority label (a tie votes 1) in label mode,
/// mean score in score mode.
pub fn main_prediction<T: Scalar>(table: &PredictionTable<T>) -> Vec<T> {
    let k = table.k();
    (0..table.n())
        .map(|j| match table.mode {
            DecompositionMode::Label => {
                let ones = table.pred_labels.iter().filter(|row| row[j] == 1).count();
                if 2 * ones >= k {
                    T::one()
                } else {
                    T::zero()
                }
            }
            DecompositionMode::Score => {
                ordered_sum(table.pred_scores.iter().map(|row| &row[j])) / T::from_count(k)
            }
        })
        .collect()
}

/// Pointwise terms of the decomposition, plus the mean replicate loss each
/// point's terms add up to.
#[derive(Clone, Debug, PartialEq)]
pub struct PointDecomposition<T> {
    pub mode: DecompositionMode,
    pub main_pred: Vec<T>,
    pub noise: Vec<T>,
    pub bias: Vec<T>,
    pub variance: Vec<T>,
    pub net_variance: Vec<T>,
    /// Mean loss of the replicates against the label.
    pub loss: Vec<T>,
    eval_fingerprint: u64,
}

pub fn decompose_points<T: Scalar>(table: &PredictionTable<T>) -> PointDecomposition<T> {
    let k = T::from_count(table.k());
    let main = main_prediction(table);
    let n = table.n();
    let mut bias = Vec::with_capacity(n);
    let mut variance = Vec::with_capacity(n);
    let mut net = Vec::with_capacity(n);
    let mut loss = Vec::with_capacity(n);
    for (j, m) in main.iter().enumerate() {
        let y = table.labels[j];
        match table.mode {
            DecompositionMode::Label => {
                let m_bit = u8::from(m.is_one());
                let off_main = table.pred_labels.iter().filter(|r| r[j] != m_bit).count();
                let wrong = table.pred_labels.iter().filter(|r| r[j] != y).count();
                let b = if m_bit == y { T::zero() } else { T::one() };
                let v = T::from_count(off_main) / k.clone();
                let nv = if m_bit == y { v.clone() } else { -v.clone() };
                bias.push(b);
                variance.push(v);
                net.push(nv);
                loss.push(T::from_count(wrong) / k.clone());
            }
            DecompositionMode::Score => {
                let yv = T::from_count(y as usize);
                let diff = m.clone() - yv.clone();
                let v = ordered_sum(
                    table
                        .pred_scores
                        .iter()
                        .map(|r| (r[j].clone() - m.clone()) * (r[j].clone() - m.clone()))
                        .collect::<Vec<_>>()
                        .iter(),
                ) / k.clone();
                let l = ordered_sum(
                    table
                        .pred_scores
                        .iter()
                        .map(|r| (r[j].clone() - yv.clone()) * (r[j].clone() - yv.clone()))
                        .collect::<Vec<_>>()
                        .iter(),
                ) / k.clone();
                bias.push(diff.clone() * diff);
                variance.push(v.clone());
                net.push(v);
                loss.push(l);
            }
        }
    }
    PointDecomposition {
        mode: table.mode,
        noise: vec![T::zero(); n],
        main_pred: main,
        bias,
        variance,
        net_variance: net,
        loss,
        eval_fingerprint: table.fingerprint(),
    }
}

/// Group means of the pointwise terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTerms<T> {
    pub n: usize,
    pub noise: T,
    pub bias: T,
    pub net_variance: T,
    pub variance: T,
    pub loss: T,
    /// `|loss - (noise + bias + net_variance)|`
    pub residual: T,
}

/// `a1` minus `a0` differences of the group terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDeltas<T> {
    pub noise: T,
    pub bias: T,
    pub net_variance: T,
    /// Discrimination of the expected loss, `loss_a1 - loss_a0`.
    pub loss: T,
    /// `|loss - (noise + bias + net_variance)|`
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport<T> {
    pub mode: DecompositionMode,
    pub eval_fingerprint: u64,
    pub a0: Option<GroupTerms<T>>,
    pub a1: Option<GroupTerms<T>>,
    pub deltas: Option<DecompositionDeltas<T>>,
}

impl<T: Scalar> DecompositionReport<T> {
    pub fn group(&self, g: Group) -> Option<&GroupTerms<T>> {
        match g {
            Group::Unprivileged => self.a0.as_ref(),
            Group::Privileged => self.a1.as_ref(),
        }
    }

    /// The expected zero-one loss of the ensemble per group as a
    /// discrimination record. Only meaningful in label mode, where the
    /// replicate losses are zero-one losses.
    pub fn loss_record(&self) -> Result<DiscriminationRecord<T>> {
        if self.mode != DecompositionMode::Label {
            return Err(Error::Validation(
                "the expected-loss record is a ZOL record only in label mode".into(),
            ));
        }
        Ok(DiscriminationRecord::from_costs(
            MetricKind::Zol,
            self.a0.as_ref().map(|t| t.loss.clone()),
            self.a1.as_ref().map(|t| t.loss.clone()),
            self.a0.as_ref().map_or(0, |t| t.n),
            self.a1.as_ref().map_or(0, |t| t.n),
        ))
    }

    pub fn to_f64(&self) -> DecompositionReport<f64> {
        let g = |t: &GroupTerms<T>| GroupTerms {
            n: t.n,
            noise: t.noise.to_f64_lossy(),
            bias: t.bias.to_f64_lossy(),
            net_variance: t.net_variance.to_f64_lossy(),
            variance: t.variance.to_f64_lossy(),
            loss: t.loss.to_f64_lossy(),
            residual: t.residual.to_f64_lossy(),
        };
        DecompositionReport {
            mode: self.mode,
            eval_fingerprint: self.eval_fingerprint,
            a0: self.a0.as_ref().map(g),
            a1: self.a1.as_ref().map(g),
            deltas: self.deltas.as_ref().map(|d| DecompositionDeltas {
                noise: d.noise.to_f64_lossy(),
                bias: d.bias.to_f64_lossy(),
                net_variance: d.net_variance.to_f64_lossy(),
                loss: d.loss.to_f64_lossy(),
                residual: d.residual.to_f64_lossy(),
            }),
        }
    }
}

pub fn aggregate_groups<T: Scalar>(
    points: &PointDecomposition<T>,
    sensitive: &[Group],
) -> Result<DecompositionReport<T>> {
    if sensitive.len() != points.loss.len() {
        return Err(Error::Validation(format!(
            "{} sensitive values for {} points",
            sensitive.len(),
            points.loss.len()
        )));
    }
    let terms = |g: Group| -> Option<GroupTerms<T>> {
        let idx: Vec<usize> = (0..sensitive.len()).filter(|&i| sensitive[i] == g).collect();
        if idx.is_empty() {
            return None;
        }
        let n = T::from_count(idx.len());
        let avg = |v: &[T]| ordered_sum(idx.iter().map(|&i| &v[i])) / n.clone();
        let noise = avg(&points.noise);
        let bias = avg(&points.bias);
        let net_variance = avg(&points.net_variance);
        let loss = avg(&points.loss);
        let residual = (loss.clone() - (noise.clone() + bias.clone() + net_variance.clone())).abs();
        Some(GroupTerms {
            n: idx.len(),
            noise,
            bias,
            net_variance,
            variance: avg(&points.variance),
            loss,
            residual,
        })
    };
    let a0 = terms(Group::Unprivileged);
    let a1 = terms(Group::Privileged);
    let deltas = match (&a0, &a1) {
        (Some(t0), Some(t1)) => {
            let noise = t1.noise.clone() - t0.noise.clone();
            let bias = t1.bias.clone() - t0.bias.clone();
            let net_variance = t1.net_variance.clone() - t0.net_variance.clone();
            let loss = t1.loss.clone() - t0.loss.clone();
            let residual = (loss.clone() - (noise.clone() + bias.clone() + net_variance.clone())).abs();
            Some(DecompositionDeltas {
                noise,
                bias,
                net_variance,
                loss,
                residual,
            })
        }
        _ => None,
    };
    Ok(DecompositionReport {
        mode: points.mode,
        eval_fingerprint: points.eval_fingerprint,
        a0,
        a1,
        deltas,
    })
}

/// Convenience: points, then group aggregates.
pub fn decompose<T: Scalar>(table: &PredictionTable<T>, sensitive: &[Group]) -> Result<DecompositionReport<T>> {
    aggregate_groups(&decompose_points(table), sensitive)
}

/// Discrimination of the main prediction itself (majority labels, and mean
/// scores for AUC).
pub fn main_prediction_record<T: Scalar>(
    metric: MetricKind,
    table: &PredictionTable<T>,
    sensitive: &[Group],
) -> Result<DiscriminationRecord<T>> {
    let main_labels: Vec<u8> = match table.mode {
        DecompositionMode::Label => main_prediction(table).iter().map(|v| u8::from(v.is_one())).collect(),
        DecompositionMode::Score => main_prediction(table).iter().map(|v| u8::from(*v >= T::half())).collect(),
    };
    let k = T::from_count(table.k());
    let main_scores: Vec<T> = (0..table.n())
        .map(|j| ordered_sum(table.pred_scores.iter().map(|row| &row[j])) / k.clone())
        .collect();
    discrimination(metric, &main_labels, &main_scores, &table.labels, sensitive)
}

fn difference<T: Scalar>(a: &DiscriminationRecord<T>, b: &DiscriminationRecord<T>) -> Result<T> {
    if a.metric != b.metric {
        return Err(Error::MetricMismatch(a.metric.to_string(), b.metric.to_string()));
    }
    match (&a.disc, &b.disc) {
        (Some(x), Some(y)) => Ok(x.clone() - y.clone()),
        _ => Err(Error::Undefined(format!("{} discrimination is undefined", a.metric))),
    }
}

/// Sample size bias `Disc(at m) - Disc(at M)`.
///
/// Pass ensemble records (main prediction or expected loss) for the
/// ensemble form, or a single replicate's record at `m` for the single-set
/// form; the reference is always the ensemble at the largest size `M`.
pub fn ssb_estimate<T: Scalar>(disc_m: &DiscriminationRecord<T>, disc_ref: &DiscriminationRecord<T>) -> Result<T> {
    difference(disc_m, disc_ref)
}

/// Underrepresentation bias `Disc(at split) - Disc(at population split)`.
pub fn urb_estimate<T: Scalar>(
    disc_ratio: &DiscriminationRecord<T>,
    disc_population_ratio: &DiscriminationRecord<T>,
) -> Result<T> {
    difference(disc_ratio, disc_population_ratio)
}

/// SSB or URB split into bias and net-variance terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceTerms<T> {
    pub noise_term: T,
    pub bias_term: T,
    pub variance_term: T,
    /// `noise_term + bias_term + variance_term`
    pub total: T,
    /// Difference of the expected-loss discriminations, computed directly.
    pub direct: T,
    /// `|total - direct|`
    pub residual: T,
}

/// Splits the difference between two decompositions over the same
/// evaluation set. With `(m, M)` reports this is SSB; with
/// `(split, population split)` reports it is URB.
pub fn ssb_decomposition<T: Scalar>(
    report: &DecompositionReport<T>,
    reference: &DecompositionReport<T>,
) -> Result<BiasVarianceTerms<T>> {
    if report.eval_fingerprint != reference.eval_fingerprint {
        return Err(Error::Validation("reports were computed on different evaluation sets".into()));
    }
    if report.mode != reference.mode {
        return Err(Error::Validation("reports use different decomposition modes".into()));
    }
    let (Some(d), Some(r)) = (&report.deltas, &reference.deltas) else {
        return Err(Error::Undefined("a group is empty in one of the reports".into()));
    };
    let noise_term = d.noise.clone() - r.noise.clone();
    let bias_term = d.bias.clone() - r.bias.clone();
    let variance_term = d.net_variance.clone() - r.net_variance.clone();
    let total = noise_term.clone() + bias_term.clone() + variance_term.clone();
    let direct = d.loss.clone() - r.loss.clone();
    let residual = (total.clone() - direct.clone()).abs();
    Ok(BiasVarianceTerms {
        noise_term,
        bias_term,
        variance_term,
        total,
        direct,
        residual,
    })
}

/// URB decomposition; identical arithmetic to [`ssb_decomposition`].
pub fn urb_decomposition<T: Scalar>(
    report: &DecompositionReport<T>,
    population_report: &DecompositionReport<T>,
) -> Result<BiasVarianceTerms<T>> {
    ssb_decomposition(report, population_report)
}

/// Writes a table as CSV: header `eval_id,label,r0,...,r{k-1}`, then one row
/// per evaluation point holding the label and every replicate's prediction
/// (0/1 in label mode, the score in score mode).
pub fn write_table_csv<W: Write>(table: &PredictionTable<f64>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["eval_id".to_string(), "label".to_string()];
    header.extend((0..table.k()).map(|r| format!("r{r}")));
    w.write_record(&header)?;
    for j in 0..table.n() {
        let mut rec = vec![table.eval_ids[j].to_string(), table.labels[j].to_string()];
        for r in 0..table.k() {
            rec.push(match table.mode {
                DecompositionMode::Label => table.pred_labels[r][j].to_string(),
                DecompositionMode::Score => table.pred_scores[r][j].to_string(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<table csv>", e))?;
    Ok(())
}

fn table_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Table {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Reads the layout written by [`write_table_csv`]. Rows are numbered from
/// 1 (the first data row) in error messages.
pub fn read_table_csv<R: Read>(reader: R, mode: DecompositionMode) -> Result<PredictionTable<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "eval_id" || &header[1] != "label" {
        return Err(table_err(0, "header", "expected eval_id,label,r0,..."));
    }
    let k = header.len() - 2;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| table_err(row, "*", e.to_string()))?;
        if rec.len() != header.len() {
            return Err(table_err(row, "*", format!("{} fields, expected {}", rec.len(), header.len())));
        }
        ids.push(rec[0].parse::<u64>().map_err(|_| table_err(row, "eval_id", format!("{:?} is not an id", &rec[0])))?);
        labels.push(match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => return Err(table_err(row, "label", format!("{other:?} is not 0 or 1"))),
        });
        for r in 0..k {
            let raw = &rec[r + 2];
            let col = &header[r + 2];
            let v: f64 = raw
                .parse()
                .map_err(|_| table_err(row, col, format!("{raw:?} is not a number")))?;
            match mode {
                DecompositionMode::Label if v != 0.0 && v != 1.0 => {
                    return Err(table_err(row, col, format!("{raw:?} is not a binary prediction")));
                }
                DecompositionMode::Score if !(0.0..=1.0).contains(&v) => {
                    return Err(table_err(row, col, format!("{raw:?} is not a score in [0, 1]")));
                }
                _ => {}
            }
            cols[r].push(v);
        }
    }
    match mode {
        DecompositionMode::Label => {
            let pred = cols.iter().map(|c| c.iter().map(|&v| v as u8).collect()).collect();
            PredictionTable::from_labels(ids, labels, pred)
        }
        DecompositionMode::Score => PredictionTable::from_scores(ids, labels, cols),
    }
}

/// Reads `eval_id,sensitive` rows (values `a0`/`a1` or `0`/`1`) and orders
/// them to match `eval_ids`.
pub fn read_sensitive_csv<R: Read>(reader: R, eval_ids: &[u64]) -> Result<Vec<Group>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "eval_id" || &header[1] != "sensitive" {
        return Err(table_err(0, "header", "expected eval_id,sensitive"));
    }
    let mut by_id = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| table_err(row, "*", e.to_string()))?;
        let id: u64 = rec[0]
            .parse()
            .map_err(|_| table_err(row, "eval_id", format!("{:?} is not an id", &rec[0])))?;
        let g = match &rec[1] {
            "a0" | "0" => Group::Unprivileged,
            "a1" | "1" => Group::Privileged,
            other => return Err(table_err(row, "sensitive", format!("{other:?} is not a0/a1"))),
        };
        by_id.insert(id, g);
    }
    eval_ids
        .iter()
        .enumerate()
        .map(|(j, id)| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| table_err(j + 1, "eval_id", format!("no sensitive value for eval id {id}")))
        })
        .collect()
}
