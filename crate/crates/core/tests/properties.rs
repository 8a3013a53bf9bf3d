mod common;

use std::collections::HashSet;

use bias_audit::dataio::{cell_counts, generate_synthetic, Dataset, Group, SyntheticSpec};
use bias_audit::decomposition::{
    decompose, decompose_points, main_prediction, read_table_csv, ssb_decomposition, write_table_csv,
    DecompositionMode, PredictionTable,
};
use bias_audit::experiments::summarize;
use bias_audit::learners::{fit, predict_batch, LearnerKind, LearnerSpec};
use bias_audit::metrics::{auc, discrimination, group_cost, MetricKind};
use bias_audit::mitigation::{oversample_random, reweighing_weights, smote};
use bias_audit::sampling::{growing_group_series, sample_ratio, sample_sized, split_counts};
use bias_audit::Exact;
use common::{brute_force_auc, cell_cost, confusion, q};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn groups_strategy(n: usize) -> impl Strategy<Value = Vec<Group>> {
    prop::collection::vec(any::<bool>().prop_map(Group::from_bit), n)
}

/// `(labels, predictions, sensitive)` for `k` label-mode replicates.
fn label_table_parts() -> impl Strategy<Value = (Vec<u8>, Vec<Vec<u8>>, Vec<Group>)> {
    (1usize..12, 2usize..30).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(prop::collection::vec(0u8..2, n), k),
            groups_strategy(n),
        )
    })
}

/// Score-mode replicates on a 1/64 grid, so ties and exact arithmetic coexist.
fn score_table_parts() -> impl Strategy<Value = (Vec<u8>, Vec<Vec<u32>>, Vec<Group>)> {
    (1usize..12, 2usize..30).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(prop::collection::vec(0u32..=64, n), k),
            groups_strategy(n),
        )
    })
}

fn ids(n: usize) -> Vec<u64> {
    (0..n as u64).collect()
}

fn exact_scores(raw: &[Vec<u32>]) -> Vec<Vec<Exact>> {
    raw.iter()
        .map(|row| row.iter().map(|&v| q(i64::from(v), 64)).collect())
        .collect()
}

fn float_scores(raw: &[Vec<u32>]) -> Vec<Vec<f64>> {
    raw.iter()
        .map(|row| row.iter().map(|&v| f64::from(v) / 64.0).collect())
        .collect()
}

fn population(n0: usize, n1: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        n0,
        n1,
        pos_rate_a0: 0.35,
        pos_rate_a1: 0.6,
        d: 3,
        signal: 1.0,
        seed,
        include_sensitive_as_feature: true,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn label_mode_points_decompose_exactly((labels, preds, _groups) in label_table_parts()) {
        let n = labels.len();
        let table = PredictionTable::<Exact>::from_labels(ids(n), labels.clone(), preds.clone()).unwrap();
        let p = decompose_points(&table);
        let k = preds.len() as i64;
        for j in 0..n {
            prop_assert_eq!(&p.loss[j], &(p.noise[j].clone() + p.bias[j].clone() + p.net_variance[j].clone()));
            let wrong = preds.iter().filter(|r| r[j] != labels[j]).count() as i64;
            prop_assert_eq!(&p.loss[j], &q(wrong, k));
            let ones = preds.iter().filter(|r| r[j] == 1).count() as i64;
            let expected_main = if 2 * ones >= k { Exact::one() } else { Exact::zero() };
            prop_assert_eq!(&p.main_pred[j], &expected_main);
            prop_assert!(p.noise[j].is_zero());
        }
    }

    #[test]
    fn group_deltas_have_zero_residual_in_exact_arithmetic((labels, preds, groups) in label_table_parts()) {
        let n = labels.len();
        let table = PredictionTable::<Exact>::from_labels(ids(n), labels, preds).unwrap();
        let report = decompose(&table, &groups).unwrap();
        for g in Group::ALL {
            if let Some(t) = report.group(g) {
                prop_assert!(t.residual.is_zero());
            }
        }
        let both = groups.contains(&Group::Privileged) && groups.contains(&Group::Unprivileged);
        prop_assert_eq!(report.deltas.is_some(), both);
        if let Some(d) = &report.deltas {
            prop_assert!(d.residual.is_zero());
            let rec = report.loss_record().unwrap();
            prop_assert_eq!(rec.disc.as_ref(), Some(&d.loss));
        }
    }

    #[test]
    fn score_mode_identity_holds_in_floats_and_exactly((labels, raw, groups) in score_table_parts()) {
        let n = labels.len();
        let exact = PredictionTable::<Exact>::from_scores(ids(n), labels.clone(), exact_scores(&raw)).unwrap();
        let pe = decompose_points(&exact);
        for j in 0..n {
            prop_assert_eq!(&pe.loss[j], &(pe.bias[j].clone() + pe.variance[j].clone()));
        }
        let float = PredictionTable::<f64>::from_scores(ids(n), labels, float_scores(&raw)).unwrap();
        let pf = decompose_points(&float);
        for j in 0..n {
            prop_assert!((pf.loss[j] - pf.bias[j] - pf.net_variance[j]).abs() < 1e-12);
        }
        if let Some(d) = decompose(&float, &groups).unwrap().deltas {
            prop_assert!(d.residual < 1e-12);
        }
    }

    #[test]
    fn mean_score_minimizes_squared_loss(raw in prop::collection::vec(0u32..=64, 1..20)) {
        let k = raw.len();
        let scores: Vec<Vec<f64>> = raw.iter().map(|&v| vec![f64::from(v) / 64.0]).collect();
        let table = PredictionTable::from_scores(vec![0], vec![1], scores.clone()).unwrap();
        let m = main_prediction(&table)[0];
        let sl = |c: f64| scores.iter().map(|r| (r[0] - c) * (r[0] - c)).sum::<f64>() / k as f64;
        let best = sl(m);
        for step in 0..=200 {
            prop_assert!(best <= sl(step as f64 / 200.0) + 1e-12);
        }
    }

    #[test]
    fn ssb_terms_add_up_and_vanish_against_themselves(
        (labels, preds, groups) in label_table_parts(),
        flips in prop::collection::vec(any::<bool>(), 30),
    ) {
        let n = labels.len();
        let other: Vec<Vec<u8>> = preds
            .iter()
            .map(|r| r.iter().zip(&flips).map(|(&p, &f)| if f { 1 - p } else { p }).collect())
            .collect();
        let a = decompose(&PredictionTable::<Exact>::from_labels(ids(n), labels.clone(), preds).unwrap(), &groups).unwrap();
        let b = decompose(&PredictionTable::<Exact>::from_labels(ids(n), labels, other).unwrap(), &groups).unwrap();
        if a.deltas.is_some() {
            let t = ssb_decomposition(&a, &b).unwrap();
            prop_assert!(t.residual.is_zero());
            prop_assert_eq!(&t.total, &t.direct);
            let own = ssb_decomposition(&a, &a).unwrap();
            prop_assert!(own.total.is_zero() && own.direct.is_zero());
        } else {
            prop_assert!(ssb_decomposition(&a, &b).is_err());
        }
    }

    #[test]
    fn table_csv_round_trip((labels, raw, _groups) in score_table_parts()) {
        let n = labels.len();
        let table = PredictionTable::<f64>::from_scores(ids(n), labels, float_scores(&raw)).unwrap();
        let mut buf = Vec::new();
        write_table_csv(&table, &mut buf).unwrap();
        let back = read_table_csv(buf.as_slice(), DecompositionMode::Score).unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn confusion_metrics_match_cell_counts(
        (labels, preds, groups) in label_table_parts(),
    ) {
        let pred = &preds[0];
        let scores = vec![Exact::zero(); labels.len()];
        for metric in [MetricKind::Fpr, MetricKind::Fnr, MetricKind::Eo, MetricKind::Zol, MetricKind::Sd] {
            for g in Group::ALL {
                let got = group_cost::<Exact>(metric, pred, &labels, &groups, g).unwrap();
                prop_assert_eq!(got, cell_cost(metric, confusion(pred, &labels, &groups, g)));
            }
            let rec = discrimination(metric, pred, &scores, &labels, &groups).unwrap();
            if let (Some(c0), Some(c1), Some(d)) = (&rec.cost_a0, &rec.cost_a1, &rec.disc) {
                prop_assert_eq!(d, &(c1.clone() - c0.clone()));
            } else {
                prop_assert!(rec.disc.is_none());
            }
        }
        let eo = discrimination(MetricKind::Eo, pred, &scores, &labels, &groups).unwrap();
        let fnr = discrimination(MetricKind::Fnr, pred, &scores, &labels, &groups).unwrap();
        prop_assert_eq!(eo.disc, fnr.disc.map(|d| -d));
    }

    #[test]
    fn auc_agrees_with_pair_enumeration(
        (labels, raw) in (2usize..40).prop_flat_map(|n| (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u32..=16, n),
        )),
    ) {
        let scores: Vec<Exact> = raw.iter().map(|&v| q(i64::from(v), 16)).collect();
        let got = auc(&scores, &labels);
        prop_assert_eq!(got.clone(), brute_force_auc(&scores, &labels));
        if let Some(a) = got {
            let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
            prop_assert_eq!(auc(&scores, &flipped), Some(Exact::one() - a.clone()));
            let cubed: Vec<Exact> = scores.iter().map(|s| s.clone() * s.clone() * s.clone() + q(3, 1)).collect();
            prop_assert_eq!(auc(&cubed, &labels), Some(a));
        }
    }

    #[test]
    fn reweighing_makes_group_and_label_independent(
        counts in prop::array::uniform2(prop::array::uniform2(0usize..25)),
        seed in any::<u64>(),
    ) {
        let total: usize = counts.iter().flatten().sum();
        prop_assume!(total > 0);
        let ds = common::dataset_from_cells(counts, 2, &mut common::rng(seed));
        let w = reweighing_weights::<Exact>(&ds).unwrap();
        let n = Exact::from_integer(total.into());
        let mass = |a: usize, y: usize| w.cell_weights[a][y].clone() * Exact::from_integer(counts[a][y].into());
        let group = [counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]];
        let label = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
        for a in 0..2 {
            for y in 0..2 {
                prop_assert_eq!(w.degenerate[a][y], counts[a][y] == 0);
                prop_assert!(w.cell_weights[a][y] >= Exact::zero());
                if counts[a][y] > 0 {
                    let target = Exact::from_integer((group[a] * label[y]).into()) / n.clone();
                    prop_assert_eq!(mass(a, y), target);
                }
            }
        }
        for (i, wi) in w.row_weights.iter().enumerate() {
            let (g, y) = (ds.sensitive()[i], ds.labels()[i]);
            prop_assert_eq!(wi, w.weight(g, y));
        }
        if !w.is_degenerate() {
            let sum = w.row_weights.iter().fold(Exact::zero(), |acc, v| acc + v.clone());
            prop_assert_eq!(sum, n);
        }
    }

    #[test]
    fn summary_mean_lies_between_extremes(values in prop::collection::vec(prop::option::of(-1.0f64..1.0), 0..40)) {
        let s = summarize(&values);
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        prop_assert_eq!(s.n_defined, defined.len());
        match s.mean {
            None => prop_assert!(defined.is_empty()),
            Some(m) => {
                let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
                if let (Some(ci), Some(_)) = (s.ci95, s.std) {
                    prop_assert!(ci[0] <= m && m <= ci[1]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sized_samples_are_distinct_subsets(m in 0usize..120, seed in any::<u64>()) {
        let pool = population(60, 60, 5);
        let s = sample_sized(&pool, m, seed).unwrap();
        prop_assert_eq!(s.len(), m);
        let ids: HashSet<u64> = s.row_ids().iter().copied().collect();
        prop_assert_eq!(ids.len(), m);
        prop_assert!(ids.iter().all(|id| pool.row_ids().contains(id)));
        prop_assert_eq!(sample_sized(&pool, m, seed).unwrap(), s);
        prop_assert!(sample_sized(&pool, 121, seed).is_err());
    }

    #[test]
    fn ratio_samples_hit_the_requested_split(m in 4usize..80, pct in 5u32..96, seed in any::<u64>()) {
        let f1 = f64::from(pct) / 100.0;
        let pool = population(80, 80, 6);
        let m1 = ((f64::from(pct) * m as f64) / 100.0 + 0.5).floor() as usize;
        match sample_ratio(&pool, m, f1, seed) {
            Ok(s) => {
                let (m0, k1) = split_counts(m, f1).unwrap();
                prop_assert_eq!(k1, m1);
                let got1 = s.sensitive().iter().filter(|&&g| g == Group::Privileged).count();
                prop_assert_eq!(got1, m1);
                prop_assert_eq!(s.len() - got1, m0);
                let ids: HashSet<u64> = s.row_ids().iter().copied().collect();
                prop_assert_eq!(ids.len(), m);
            }
            Err(_) => prop_assert!(m1 == 0 || m1 >= m),
        }
    }

    #[test]
    fn growing_series_is_nested(
        mut sizes in prop::collection::vec(1usize..40, 1..6),
        selective in any::<bool>(),
        seed in any::<u64>(),
    ) {
        sizes.sort_unstable();
        let pool = population(150, 150, 7);
        let series = growing_group_series(&pool, Group::Privileged, 40, &sizes, selective, seed).unwrap();
        prop_assert_eq!(series.len(), sizes.len());
        for (ds, &size) in series.iter().zip(&sizes) {
            let grown = ds.indices_where(|g, _| g == Group::Unprivileged);
            prop_assert_eq!(grown.len(), size);
            prop_assert_eq!(ds.len(), 40 + size);
            if selective {
                prop_assert!(grown.iter().all(|&i| ds.labels()[i] == 1));
            }
        }
        for pair in series.windows(2) {
            let small: HashSet<u64> = pair[0].row_ids().iter().copied().collect();
            let large: HashSet<u64> = pair[1].row_ids().iter().copied().collect();
            prop_assert!(small.is_subset(&large));
        }
    }

    #[test]
    fn oversampling_keeps_originals_and_reaches_targets(
        extra in prop::array::uniform2(prop::array::uniform2(0usize..20)),
        seed in any::<u64>(),
    ) {
        let ds = common::dataset_from_cells([[5, 3], [4, 6]], 2, &mut common::rng(seed));
        let before = cell_counts(&ds);
        let mut targets = before;
        for a in 0..2 {
            for y in 0..2 {
                targets[a][y] += extra[a][y];
            }
        }
        let out = oversample_random(&ds, targets, seed).unwrap();
        prop_assert_eq!(cell_counts(&out), targets);
        for i in 0..ds.len() {
            prop_assert_eq!(out.row(i), ds.row(i));
            prop_assert_eq!(out.row_ids()[i], ds.row_ids()[i]);
        }
        for i in ds.len()..out.len() {
            let src = ds.row_ids().iter().position(|&id| id == out.origins()[i]).unwrap();
            prop_assert_eq!(out.row(i), ds.row(src));
        }
    }

    #[test]
    fn smote_rows_lie_on_segments_between_cell_members(n_new in 1usize..40, k in 1usize..5, seed in any::<u64>()) {
        let ds = common::dataset_from_cells([[3, 8], [2, 2]], 3, &mut common::rng(seed));
        let out = smote(&ds, (Group::Unprivileged, 1), n_new, k, seed).unwrap();
        prop_assert_eq!(out.len(), ds.len() + n_new);
        let members = ds.indices_where(|g, y| g == Group::Unprivileged && y == 1);
        for i in ds.len()..out.len() {
            prop_assert_eq!(out.labels()[i], 1);
            prop_assert_eq!(out.sensitive()[i], Group::Unprivileged);
            let x = out.row(i);
            // Distance from x to the nearest segment between two cell members.
            let mut best = f64::INFINITY;
            for &a in &members {
                for &b in &members {
                    let (pa, pb) = (ds.row(a), ds.row(b));
                    let dir: Vec<f64> = pa.iter().zip(pb).map(|(u, v)| v - u).collect();
                    let len2: f64 = dir.iter().map(|v| v * v).sum();
                    let t = if len2 == 0.0 {
                        0.0
                    } else {
                        (x.iter().zip(pa).zip(&dir).map(|((xi, ai), di)| (xi - ai) * di).sum::<f64>() / len2).clamp(0.0, 1.0)
                    };
                    let d2: f64 = x.iter().zip(pa).zip(&dir).map(|((xi, ai), di)| (xi - ai - t * di).powi(2)).sum();
                    best = best.min(d2);
                }
            }
            prop_assert!(best < 1e-20);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn learner_labels_threshold_their_scores(seed in any::<u64>(), which in 0usize..4, n in 10usize..60) {
        let train = population(n, n, seed);
        let eval = population(15, 15, seed ^ 1);
        let kind = match which {
            0 => LearnerKind::logreg(),
            1 => LearnerKind::tree(),
            2 => LearnerKind::Knn { k: 3 },
            _ => LearnerKind::Forest { n_trees: 5, max_depth: 4, min_leaf: 1, feature_subsample: None },
        };
        let spec = LearnerSpec::new(kind).with_seed(seed);
        let model = fit(&spec, &train, None).unwrap();
        let (labels, scores) = predict_batch(&model, &eval).unwrap();
        for (i, x) in eval.rows().enumerate() {
            prop_assert!((0.0..=1.0).contains(&scores[i]));
            prop_assert_eq!(labels[i], u8::from(scores[i] >= 0.5));
            prop_assert_eq!(model.predict_score(x), scores[i]);
        }
        let again = fit(&spec, &train, None).unwrap();
        prop_assert_eq!(predict_batch(&again, &eval).unwrap().1, scores);
    }
}
