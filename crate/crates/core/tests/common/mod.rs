//! Independent reference implementations shared by the integration tests.
//!
//! Everything here recomputes a quantity from first principles (pair
//! enumeration, confusion-cell counting, explicit replicate losses) without
//! calling the code under test.

#![allow(dead_code)]

use bias_audit::dataio::{Dataset, Group, SyntheticSpec};
use bias_audit::decomposition::PredictionTable;
use bias_audit::experiments::{BaseSweep, DataSource, EvalMode, ExperimentConfig, ExperimentKind, MitigationKind};
use bias_audit::learners::LearnerSpec;
use bias_audit::metrics::MetricKind;
use bias_audit::Exact;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(num: i64, den: i64) -> Exact {
    Exact::new(BigInt::from(num), BigInt::from(den))
}

/// AUC by enumerating every (positive, negative) pair; ties count 1/2.
pub fn brute_force_auc(scores: &[Exact], labels: &[u8]) -> Option<Exact> {
    let mut wins = Exact::zero();
    let mut pairs = 0i64;
    for (i, si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                wins += Exact::one();
            } else if si == sj {
                wins += q(1, 2);
            }
        }
    }
    (pairs > 0).then(|| wins / Exact::from_integer(BigInt::from(pairs)))
}

/// Confusion cells `(tp, fp, tn, fn)` of group `a`.
pub fn confusion(pred: &[u8], labels: &[u8], sensitive: &[Group], a: Group) -> (i64, i64, i64, i64) {
    let mut c = (0, 0, 0, 0);
    for i in 0..pred.len() {
        if sensitive[i] != a {
            continue;
        }
        match (pred[i], labels[i]) {
            (1, 1) => c.0 += 1,
            (1, 0) => c.1 += 1,
            (0, 0) => c.2 += 1,
            _ => c.3 += 1,
        }
    }
    c
}

/// Group cost computed from confusion cells.
pub fn cell_cost(metric: MetricKind, cells: (i64, i64, i64, i64)) -> Option<Exact> {
    let (tp, fp, tn, fn_) = cells;
    let frac = |num: i64, den: i64| (den > 0).then(|| q(num, den));
    match metric {
        MetricKind::Fpr => frac(fp, fp + tn),
        MetricKind::Fnr => frac(fn_, fn_ + tp),
        MetricKind::Eo => frac(tp, tp + fn_),
        MetricKind::Zol => frac(fp + fn_, tp + fp + tn + fn_),
        MetricKind::Sd => frac(tp + fp, tp + fp + tn + fn_),
        MetricKind::Auc => unreachable!("AUC is not a confusion-cell cost"),
    }
}

pub fn random_bits(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.random_bool(p))).collect()
}

pub fn random_groups(rng: &mut ChaCha8Rng, n: usize) -> Vec<Group> {
    (0..n).map(|_| Group::from_bit(rng.random_bool(0.5))).collect()
}

/// Label-mode table with per-point flip probabilities, so columns range from
/// unanimous to evenly split.
pub fn random_label_table(rng: &mut ChaCha8Rng, k: usize, n: usize, labels: &[u8]) -> PredictionTable<f64> {
    let flip: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let pred = (0..k)
        .map(|_| {
            (0..n)
                .map(|j| if rng.random_bool(flip[j]) { 1 - labels[j] } else { labels[j] })
                .collect()
        })
        .collect();
    PredictionTable::from_labels((0..n as u64).collect(), labels.to_vec(), pred).unwrap()
}

/// Score-mode table; scores are multiples of 1/64 so ties happen.
pub fn random_score_table(rng: &mut ChaCha8Rng, k: usize, n: usize, labels: &[u8]) -> PredictionTable<f64> {
    let scores = (0..k)
        .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..=64u32)) / 64.0).collect())
        .collect();
    PredictionTable::from_scores((0..n as u64).collect(), labels.to_vec(), scores).unwrap()
}

/// Mean zero-one loss of the replicates at point `j`, counted directly.
pub fn replicate_zo_loss(table: &PredictionTable<f64>, j: usize) -> Exact {
    let wrong = table
        .pred_labels()
        .iter()
        .filter(|row| row[j] != table.labels()[j])
        .count();
    q(wrong as i64, table.k() as i64)
}

/// The biased population used by the trend experiments: 2500 rows per
/// group, positive rates 0.9 (a1) and 0.1 (a0), five weakly informative
/// features plus the sensitive indicator.
pub fn biased_population(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n0: 2500,
        n1: 2500,
        pos_rate_a0: 0.1,
        pos_rate_a1: 0.9,
        d: 5,
        signal: 1.0,
        seed,
        include_sensitive_as_feature: true,
    }
}

pub fn config(experiment: ExperimentKind, data: SyntheticSpec, master_seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        data: DataSource::Synthetic(data),
        learner: LearnerSpec::default(),
        metrics: MetricKind::ALL.to_vec(),
        sizes: Vec::new(),
        splits: Vec::new(),
        sample_size: 1000,
        growing: None,
        repeats: 30,
        mitigation: if experiment == ExperimentKind::Mitigation {
            MitigationKind::Reweighing
        } else {
            MitigationKind::None
        },
        base: BaseSweep::Ssb,
        eval: EvalMode::default(),
        decomposition: Default::default(),
        importance_repeats: None,
        master_seed,
        output: None,
    }
}

/// Rows of `ds` in `(group, label)` cell order, for building small fixtures.
pub fn dataset_from_cells(counts: [[usize; 2]; 2], d: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for g in Group::ALL {
        for y in 0..2u8 {
            for _ in 0..counts[g.index()][y as usize] {
                rows.push((0..d).map(|_| rng.random::<f64>()).collect());
                labels.push(y);
                groups.push(g);
            }
        }
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(names, rows, labels, groups).unwrap()
}
