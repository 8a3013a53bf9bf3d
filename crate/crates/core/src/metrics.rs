//! Losses, group cost metrics, discrimination, AUC and sensitive-feature
//! importance.
//!
//! Group costs are conditional means and discrimination is always
//! `cost(a1) - cost(a0)`. A cost whose conditioning set is empty is
//! undefined and represented as `None`; it is never silently replaced by 0.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Group};
use crate::error::{Error, Result};
use crate::learners::{predict_batch, Model};
use crate::sampling::{derive_seed, rng};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "SL")]
    Squared,
    #[serde(rename = "AL")]
    Absolute,
    #[serde(rename = "ZO")]
    ZeroOne,
}

/// `SL = (ŷ - y)²`, `AL = |ŷ - y|`, `ZO = 1[ŷ ≠ y]`. The zero-one loss only
/// accepts hard predictions.
pub fn loss<T: Scalar>(kind: LossKind, y_hat: &T, y: u8) -> Result<T> {
    let y = T::from_count(y as usize);
    let diff = y_hat.clone() - y;
    match kind {
        LossKind::Squared => Ok(diff.clone() * diff),
        LossKind::Absolute => Ok(diff.abs()),
        LossKind::ZeroOne => {
            if !(y_hat.is_zero() || y_hat.is_one()) {
                return Err(Error::Validation(format!(
                    "zero-one loss needs a hard prediction, got {y_hat:?}"
                )));
            }
            Ok(if diff.is_zero() { T::zero() } else { T::one() })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MetricKind {
    /// `E[Ŷ | Y=0, A=a]`
    Fpr,
    /// `E[1-Ŷ | Y=1, A=a]`
    Fnr,
    /// Equal opportunity, the true positive rate `E[Ŷ | Y=1, A=a]`.
    Eo,
    /// `E[1[Ŷ≠Y] | A=a]`
    Zol,
    /// Statistical disparity, `E[Ŷ | A=a]`.
    Sd,
    /// Within-group ROC AUC of the scores.
    Auc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Fpr,
        MetricKind::Fnr,
        MetricKind::Eo,
        MetricKind::Zol,
        MetricKind::Sd,
        MetricKind::Auc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Fpr => "FPR",
            MetricKind::Fnr => "FNR",
            MetricKind::Eo => "EO",
            MetricKind::Zol => "ZOL",
            MetricKind::Sd => "SD",
            MetricKind::Auc => "AUC",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FPR" => Ok(MetricKind::Fpr),
            "FNR" => Ok(MetricKind::Fnr),
            "EO" | "TPR" => Ok(MetricKind::Eo),
            "ZOL" => Ok(MetricKind::Zol),
            "SD" => Ok(MetricKind::Sd),
            "AUC" => Ok(MetricKind::Auc),
            _ => Err(Error::Config(format!(
                "unknown metric {s:?} (expected one of FPR, FNR, EO, ZOL, SD, AUC)"
            ))),
        }
    }
}

/// Group costs of one metric and their difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationRecord<T> {
    pub metric: MetricKind,
    pub cost_a0: Option<T>,
    pub cost_a1: Option<T>,
    /// `cost_a1 - cost_a0`, defined only when both costs are.
    pub disc: Option<T>,
    pub n_a0: usize,
    pub n_a1: usize,
}

impl<T: Scalar> DiscriminationRecord<T> {
    pub fn from_costs(metric: MetricKind, cost_a0: Option<T>, cost_a1: Option<T>, n_a0: usize, n_a1: usize) -> Self {
        let disc = match (&cost_a0, &cost_a1) {
            (Some(c0), Some(c1)) => Some(c1.clone() - c0.clone()),
            _ => None,
        };
        DiscriminationRecord {
            metric,
            cost_a0,
            cost_a1,
            disc,
            n_a0,
            n_a1,
        }
    }

    pub fn defined(&self) -> bool {
        self.disc.is_some()
    }

    pub fn cost(&self, group: Group) -> Option<&T> {
        match group {
            Group::Unprivileged => self.cost_a0.as_ref(),
            Group::Privileged => self.cost_a1.as_ref(),
        }
    }

    pub fn to_f64(&self) -> DiscriminationRecord<f64> {
        let conv = |v: &Option<T>| v.as_ref().map(Scalar::to_f64_lossy);
        DiscriminationRecord {
            metric: self.metric,
            cost_a0: conv(&self.cost_a0),
            cost_a1: conv(&self.cost_a1),
            disc: conv(&self.disc),
            n_a0: self.n_a0,
            n_a1: self.n_a1,
        }
    }
}

fn check_lengths(lens: &[usize]) -> Result<()> {
    if lens.windows(2).all(|w| w[0] == w[1]) {
        Ok(())
    } else {
        Err(Error::Validation(format!("input vectors have different lengths {lens:?}")))
    }
}

fn check_binary(values: &[u8], what: &str) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(v) => Err(Error::Validation(format!("{what} contains non-binary value {v}"))),
        None => Ok(()),
    }
}

/// Cost of `metric` for group `a` from hard predictions.
///
/// AUC needs scores and is rejected here; use [`auc`] or [`discrimination`].
pub fn group_cost<T: Scalar>(
    metric: MetricKind,
    labels_hat: &[u8],
    labels: &[u8],
    sensitive: &[Group],
    a: Group,
) -> Result<Option<T>> {
    check_lengths(&[labels_hat.len(), labels.len(), sensitive.len()])?;
    check_binary(labels_hat, "predictions")?;
    check_binary(labels, "labels")?;
    let rows = labels_hat
        .iter()
        .zip(labels)
        .zip(sensitive)
        .filter(|(_, g)| **g == a)
        .map(|((p, y), _)| (*p, *y));
    let (num, den) = match metric {
        MetricKind::Fpr => rows
            .filter(|(_, y)| *y == 0)
            .fold((0, 0), |(n, d), (p, _)| (n + p as usize, d + 1)),
        MetricKind::Fnr => rows
            .filter(|(_, y)| *y == 1)
            .fold((0, 0), |(n, d), (p, _)| (n + (1 - p) as usize, d + 1)),
        MetricKind::Eo => rows
            .filter(|(_, y)| *y == 1)
            .fold((0, 0), |(n, d), (p, _)| (n + p as usize, d + 1)),
        MetricKind::Zol => rows.fold((0, 0), |(n, d), (p, y)| (n + usize::from(p != y), d + 1)),
        MetricKind::Sd => rows.fold((0, 0), |(n, d), (p, _)| (n + p as usize, d + 1)),
        MetricKind::Auc => {
            return Err(Error::Validation("AUC is computed from scores, not hard labels".into()))
        }
    };
    Ok((den > 0).then(|| T::ratio(num, den)))
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. `None` when either class is absent.
///
/// Computed from sorted tie groups with integer pair counts, so the result is
/// exact in any scalar type that represents the final ratio exactly.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Option<T> {
    if scores.len() != labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let positives = labels.iter().filter(|&&y| y == 1).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    // Twice the Mann-Whitney U statistic, so the tie credit stays integral.
    let mut twice_u: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut tie_pos, mut tie_neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                tie_pos += 1;
            } else {
                tie_neg += 1;
            }
            j += 1;
        }
        twice_u += tie_pos * (2 * negatives_below + tie_neg);
        negatives_below += tie_neg;
        i = j;
    }
    let num = T::from_u128(twice_u)?;
    let den = T::from_u128(2 * positives * negatives)?;
    Some(num / den)
}

/// Group costs and discrimination of one metric.
///
/// AUC uses the scores restricted to each group; every other metric uses the
/// hard predictions. `Disc^EO = -Disc^FNR` holds exactly on every input.
pub fn discrimination<T: Scalar>(
    metric: MetricKind,
    labels_hat: &[u8],
    scores: &[T],
    labels: &[u8],
    sensitive: &[Group],
) -> Result<DiscriminationRecord<T>> {
    check_lengths(&[labels_hat.len(), scores.len(), labels.len(), sensitive.len()])?;
    let n_a1 = sensitive.iter().filter(|&&g| g == Group::Privileged).count();
    let n_a0 = sensitive.len() - n_a1;
    let cost = |a: Group| -> Result<Option<T>> {
        if metric == MetricKind::Auc {
            check_binary(labels, "labels")?;
            let (s, y): (Vec<T>, Vec<u8>) = scores
                .iter()
                .zip(labels)
                .zip(sensitive)
                .filter(|(_, g)| **g == a)
                .map(|((s, y), _)| (s.clone(), *y))
                .unzip();
            Ok(auc(&s, &y))
        } else {
            group_cost(metric, labels_hat, labels, sensitive, a)
        }
    };
    Ok(DiscriminationRecord::from_costs(
        metric,
        cost(Group::Unprivileged)?,
        cost(Group::Privileged)?,
        n_a0,
        n_a1,
    ))
}

fn zero_one_error(model: &Model, eval: &Dataset) -> Result<f64> {
    let (pred, _) = predict_batch(model, eval)?;
    let wrong = pred.iter().zip(eval.labels()).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / eval.len() as f64)
}

/// Mean increase of the evaluation zero-one loss when column `feature` is
/// randomly permuted, over `repeats` permutations. Negative means are clamped
/// to 0.
pub fn permutation_importance(
    model: &Model,
    eval: &Dataset,
    feature: usize,
    repeats: usize,
    seed: u64,
) -> Result<f64> {
    if feature >= eval.n_features() {
        return Err(Error::Dimension {
            expected: eval.n_features(),
            actual: feature,
        });
    }
    if eval.is_empty() || repeats == 0 {
        return Ok(0.0);
    }
    let base = zero_one_error(model, eval)?;
    let column = eval.column(feature);
    let mut increase = 0.0;
    for r in 0..repeats {
        let mut shuffled = column.clone();
        shuffled.shuffle(&mut rng(derive_seed(seed, feature as u64, r as u64)));
        increase += zero_one_error(model, &eval.with_column(feature, &shuffled)?)? - base;
    }
    Ok((increase / repeats as f64).max(0.0))
}

/// Exact additive attribution of a logistic-regression margin:
/// `mean_rows |beta_i * (x_i - mean_i)|` per feature, with means over `eval`.
pub fn linear_attribution(model: &Model, eval: &Dataset) -> Result<Vec<f64>> {
    let lr = model
        .as_logreg()
        .ok_or_else(|| Error::Validation("linear attribution needs a logistic regression model".into()))?;
    if eval.n_features() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            actual: eval.n_features(),
        });
    }
    if eval.is_empty() {
        return Ok(vec![0.0; eval.n_features()]);
    }
    let n = eval.len() as f64;
    Ok(lr
        .coefficients()
        .iter()
        .enumerate()
        .map(|(j, beta)| {
            let col = eval.column(j);
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|x| (beta * (x - mean)).abs()).sum::<f64>() / n
        })
        .collect())
}
