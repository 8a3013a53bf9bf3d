//! Checks against values worked out by hand or recomputed independently.

mod common;

use bias_audit::dataio::{cell_counts, generate_synthetic, Dataset, Group, SyntheticSpec};
use bias_audit::decomposition::{
    build_table, decompose, main_prediction_record, ssb_decomposition, DecompositionMode, PredictionTable,
};
use bias_audit::learners::{fit, predict_batch, LearnerKind, LearnerSpec, Model};
use bias_audit::metrics::{linear_attribution, permutation_importance, MetricKind};
use bias_audit::mitigation::{oversample_random, reweighing_weights};
use bias_audit::sampling::{derive_seed, sample_sized};
use bias_audit::Exact;
use common::q;
use num_traits::Zero;

use Group::{Privileged as A1, Unprivileged as A0};

fn spec(n0: usize, n1: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n0,
        n1,
        pos_rate_a0: 0.3,
        pos_rate_a1: 0.6,
        d: 4,
        signal: 1.0,
        seed,
        include_sensitive_as_feature: true,
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[test]
fn table_rows_are_replicate_predictions() {
    let pool = generate_synthetic(&spec(400, 400, 11)).unwrap();
    let eval = generate_synthetic(&spec(250, 250, 12)).unwrap();
    let models: Vec<Model> = (0..30)
        .map(|r| {
            let train = sample_sized(&pool, 200, derive_seed(3, 0, r)).unwrap();
            fit(&LearnerSpec::default(), &train, None).unwrap()
        })
        .collect();
    let labels_table = build_table(&models, &eval, DecompositionMode::Label).unwrap();
    let scores_table = build_table(&models, &eval, DecompositionMode::Score).unwrap();
    assert_eq!(labels_table.k(), 30);
    assert_eq!(labels_table.n(), 500);
    assert_eq!(labels_table.eval_ids(), eval.row_ids());
    assert_eq!(labels_table.labels(), eval.labels());
    for (r, model) in models.iter().enumerate() {
        let (pred, scores) = predict_batch(model, &eval).unwrap();
        assert_eq!(labels_table.pred_labels()[r], pred);
        assert_eq!(scores_table.pred_scores()[r], scores);
        for (j, x) in eval.rows().enumerate() {
            assert_eq!(model.predict_label(x), pred[j]);
        }
    }
}

#[test]
fn hand_worked_three_replicate_table() {
    // Points 0,1 are in a0 and 2,3 in a1. Majority votes are 1,0,0,0, so
    // only point 2 is biased, and every point has one dissenting replicate.
    let table = PredictionTable::<Exact>::from_labels(
        vec![10, 11, 12, 13],
        vec![1, 0, 1, 0],
        vec![vec![1, 1, 0, 0], vec![1, 0, 0, 1], vec![0, 0, 1, 0]],
    )
    .unwrap();
    let groups = [A0, A0, A1, A1];
    let report = decompose(&table, &groups).unwrap();

    let a0 = report.group(A0).unwrap();
    assert_eq!((a0.bias.clone(), a0.net_variance.clone(), a0.loss.clone()), (q(0, 1), q(1, 3), q(1, 3)));
    assert_eq!(a0.variance, q(1, 3));
    let a1 = report.group(A1).unwrap();
    assert_eq!((a1.bias.clone(), a1.net_variance.clone(), a1.loss.clone()), (q(1, 2), q(0, 1), q(1, 2)));
    assert_eq!(a1.variance, q(1, 3));

    let d = report.deltas.as_ref().unwrap();
    assert_eq!(d.bias, q(1, 2));
    assert_eq!(d.net_variance, q(-1, 3));
    assert_eq!(d.loss, q(1, 6));
    assert!(d.residual.is_zero());

    let main = main_prediction_record(MetricKind::Zol, &table, &groups).unwrap();
    assert_eq!(main.disc, Some(q(1, 2)));
    let fpr = main_prediction_record(MetricKind::Fpr, &table, &groups).unwrap();
    assert_eq!(fpr.disc, Some(q(0, 1)));
}

#[test]
fn worked_ssb_split() {
    let labels = vec![1, 0, 1, 0];
    let groups = [A0, A0, A1, A1];
    // Small-sample ensemble: disagreement everywhere. Reference: unanimous and correct.
    let small = PredictionTable::<Exact>::from_labels(
        vec![0, 1, 2, 3],
        labels.clone(),
        vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1]],
    )
    .unwrap();
    let reference = PredictionTable::<Exact>::from_labels(vec![0, 1, 2, 3], labels, vec![vec![1, 0, 1, 0]; 2]).unwrap();
    let t = ssb_decomposition(&decompose(&small, &groups).unwrap(), &decompose(&reference, &groups).unwrap()).unwrap();
    // Ties vote 1: points 0 and 2 are unbiased with net variance 1/2, points 1
    // and 3 are biased with net variance -1/2, so both groups sit at loss 1/2.
    assert_eq!(t.bias_term, q(0, 1));
    assert_eq!(t.variance_term, q(0, 1));
    assert_eq!(t.direct, q(0, 1));
    assert!(t.residual.is_zero());
}

#[test]
fn logistic_coefficients_reproduce_the_margin() {
    let train = generate_synthetic(&spec(300, 300, 21)).unwrap();
    let model = fit(&LearnerSpec::default(), &train, None).unwrap();
    let lr = model.as_logreg().unwrap();
    let (beta, b0) = (lr.coefficients(), lr.intercept());
    for x in train.rows().take(50) {
        let margin = b0 + beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        assert!((logit(model.predict_score(x)) - margin).abs() < 1e-9);
    }
}

#[test]
fn attribution_of_a_single_varying_feature_is_the_mean_margin_deviation() {
    let train = generate_synthetic(&spec(300, 300, 31)).unwrap();
    let model = fit(&LearnerSpec::default(), &train, None).unwrap();
    // Freeze every column but x1 at its first value.
    let mut eval = train.select(&(0..200).collect::<Vec<_>>());
    for j in (0..eval.n_features()).filter(|&j| j != 1) {
        let v = eval.row(0)[j];
        eval = eval.with_column(j, &vec![v; eval.len()]).unwrap();
    }
    let margins: Vec<f64> = eval.rows().map(|x| logit(model.predict_score(x))).collect();
    let mean = margins.iter().sum::<f64>() / margins.len() as f64;
    let expected = margins.iter().map(|m| (m - mean).abs()).sum::<f64>() / margins.len() as f64;
    let attr = linear_attribution(&model, &eval).unwrap();
    assert!((attr[1] - expected).abs() < 1e-9);
    for (j, a) in attr.iter().enumerate() {
        if j != 1 {
            assert!(a.abs() < 1e-12);
        }
    }
}

#[test]
fn importance_ignores_features_a_stump_never_reads() {
    // x0 separates the labels perfectly, x1 is noise.
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i), f64::from((i * 7) % 11)]).collect();
    let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
    let groups: Vec<Group> = (0..40).map(|i| Group::from_bit(i % 2 == 0)).collect();
    let ds = Dataset::new(vec!["x0".into(), "x1".into()], rows, labels, groups).unwrap();
    let stump = LearnerSpec::new(LearnerKind::Tree { max_depth: 1, min_leaf: 1 });
    let model = fit(&stump, &ds, None).unwrap();
    assert_eq!(predict_batch(&model, &ds).unwrap().0, ds.labels());
    assert_eq!(permutation_importance(&model, &ds, 1, 10, 5).unwrap(), 0.0);
    assert!(permutation_importance(&model, &ds, 0, 10, 5).unwrap() > 0.2);
}

#[test]
fn one_nearest_neighbour_recalls_training_labels() {
    let train = generate_synthetic(&spec(60, 60, 41)).unwrap();
    let model = fit(&LearnerSpec::new(LearnerKind::Knn { k: 1 }), &train, None).unwrap();
    assert_eq!(predict_batch(&model, &train).unwrap().0, train.labels());
}

#[test]
fn balanced_oversampling_leaves_nothing_to_reweigh() {
    let mut rng = common::rng(51);
    let ds = common::dataset_from_cells([[30, 5], [9, 21]], 3, &mut rng);
    let out = oversample_random(&ds, [[30, 30], [30, 30]], 7).unwrap();
    assert_eq!(cell_counts(&out), [[30, 30], [30, 30]]);
    let w = reweighing_weights::<Exact>(&out).unwrap();
    assert!(w.row_weights.iter().all(|v| *v == q(1, 1)));

    // Before oversampling the weights are n_a n_y / (n n_ay), e.g. (a0, Y=1): 35*26/(65*5).
    let before = reweighing_weights::<Exact>(&ds).unwrap();
    assert_eq!(*before.weight(A0, 1), q(35 * 26, 65 * 5));
    assert_eq!(*before.weight(A1, 0), q(30 * 39, 65 * 9));
}
