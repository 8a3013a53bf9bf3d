//! Sample-weight-aware classifiers behind one interface.
//!
//! Every learner accepts optional non-negative row weights. For logistic
//! regression and trees, integer weights behave exactly like duplicated rows;
//! kNN weights the votes of its neighbours instead. Scores lie in `[0, 1]`
//! and a score of exactly `0.5` is labelled positive.

use std::cmp::Ordering;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::sampling::{derive_seed, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    /// Full-batch gradient descent on the weighted, L2-penalized negative
    /// log-likelihood over standardized features.
    #[serde(rename = "logreg")]
    LogReg {
        lr: f64,
        l2: f64,
        max_iters: usize,
        tol: f64,
    },
    /// CART with weighted Gini impurity. `min_leaf` is the minimum weight mass
    /// of a leaf (a row count for unweighted data).
    Tree { max_depth: usize, min_leaf: usize },
    /// Nearest neighbours by Euclidean distance on standardized features.
    Knn { k: usize },
    /// Bagged trees; `feature_subsample` features are considered at every
    /// split, `ceil(sqrt(d))` when unset.
    Forest {
        n_trees: usize,
        max_depth: usize,
        min_leaf: usize,
        #[serde(default)]
        feature_subsample: Option<usize>,
    },
}

impl LearnerKind {
    pub fn logreg() -> Self {
        LearnerKind::LogReg {
            lr: 0.1,
            l2: 1e-4,
            max_iters: 500,
            tol: 1e-8,
        }
    }

    pub fn tree() -> Self {
        LearnerKind::Tree {
            max_depth: 6,
            min_leaf: 5,
        }
    }

    pub fn knn() -> Self {
        LearnerKind::Knn { k: 5 }
    }

    pub fn forest() -> Self {
        LearnerKind::Forest {
            n_trees: 25,
            max_depth: 6,
            min_leaf: 5,
            feature_subsample: None,
        }
    }

    /// Default hyperparameters for a learner name (`logreg`, `tree`, `knn`, `forest`).
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "logreg" | "lr" | "logistic" => Some(Self::logreg()),
            "tree" | "dt" => Some(Self::tree()),
            "knn" | "nn" => Some(Self::knn()),
            "forest" | "rf" => Some(Self::forest()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    #[serde(default)]
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec { kind, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("learner hyperparameter {what} must be strictly positive")))
            }
        };
        match &self.kind {
            LearnerKind::LogReg { lr, l2, tol, .. } => {
                positive(*lr > 0.0, "lr")?;
                positive(*l2 >= 0.0, "l2")?;
                positive(*tol > 0.0, "tol")
            }
            LearnerKind::Tree { max_depth, min_leaf } => {
                positive(*max_depth > 0, "max_depth")?;
                positive(*min_leaf > 0, "min_leaf")
            }
            LearnerKind::Knn { k } => positive(*k > 0, "k"),
            LearnerKind::Forest {
                n_trees,
                max_depth,
                min_leaf,
                feature_subsample,
            } => {
                positive(*n_trees > 0, "n_trees")?;
                positive(*max_depth > 0, "max_depth")?;
                positive(*min_leaf > 0, "min_leaf")?;
                positive(feature_subsample.is_none_or(|f| f > 0), "feature_subsample")
            }
        }
    }
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::new(LearnerKind::logreg())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn label_of(score: f64) -> u8 {
    u8::from(score >= 0.5)
}

#[derive(Clone, Debug)]
pub struct LogRegModel {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
    iterations: usize,
}

impl LogRegModel {
    fn margin(&self, x: &[f64]) -> f64 {
        self.standardizer
            .transform(x)
            .iter()
            .zip(&self.weights)
            .fold(self.bias, |acc, (xi, wi)| acc + xi * wi)
    }

    /// Coefficients in the original (unstandardized) feature space.
    pub fn coefficients(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.standardizer.scales)
            .map(|(w, s)| w / s)
            .collect()
    }

    pub fn intercept(&self) -> f64 {
        self.bias
            - self
                .coefficients()
                .iter()
                .zip(&self.standardizer.means)
                .map(|(b, m)| b * m)
                .sum::<f64>()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

fn fit_logreg(
    train: &Dataset,
    w: &[f64],
    lr: f64,
    l2: f64,
    max_iters: usize,
    tol: f64,
) -> LogRegModel {
    let standardizer = Standardizer::fit(train, w);
    let x: Vec<Vec<f64>> = train.rows().map(|r| standardizer.transform(r)).collect();
    let y = train.labels();
    let d = train.n_features();
    let total: f64 = w.iter().sum();
    let mut coef = vec![0.0; d];
    let mut bias = 0.0;
    let mut grad = vec![0.0; d];
    let mut iterations = 0;
    while iterations < max_iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for ((xi, &yi), &wi) in x.iter().zip(y).zip(w) {
            if wi == 0.0 {
                continue;
            }
            let z = xi.iter().zip(&coef).fold(bias, |acc, (a, b)| acc + a * b);
            let err = wi * (sigmoid(z) - f64::from(yi));
            for (g, xv) in grad.iter_mut().zip(xi) {
                *g += err * xv;
            }
            grad_b += err;
        }
        grad_b /= total;
        for (g, c) in grad.iter_mut().zip(&coef) {
            *g = *g / total + l2 * c;
        }
        let norm = grad.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if norm < tol {
            break;
        }
        for (c, g) in coef.iter_mut().zip(&grad) {
            *c -= lr * g;
        }
        bias -= lr * grad_b;
        iterations += 1;
    }
    LogRegModel {
        standardizer,
        weights: coef,
        bias,
        iterations,
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        score: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
pub struct TreeModel {
    nodes: Vec<Node>,
}

impl TreeModel {
    fn score(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { score } => return *score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

struct TreeBuilder<'a, R> {
    train: &'a Dataset,
    weights: &'a [f64],
    max_depth: usize,
    min_leaf: f64,
    mtry: usize,
    rng: R,
    nodes: Vec<Node>,
}

/// Weighted Gini impurity times node mass: `2 P (W - P) / W`.
fn gini_mass(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        0.0
    } else {
        2.0 * pos * (total - pos) / total
    }
}

const SPLIT_EPS: f64 = 1e-12;

impl<R: Rng> TreeBuilder<'_, R> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.train.n_features();
        if self.mtry >= d {
            (0..d).collect()
        } else {
            let mut f = sample_indices(&mut self.rng, d, self.mtry).into_vec();
            f.sort_unstable();
            f
        }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let y = self.train.labels();
        let total: f64 = idx.iter().map(|&i| self.weights[i]).sum();
        let pos: f64 = idx.iter().filter(|&&i| y[i] == 1).map(|&i| self.weights[i]).sum();
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            score: (pos + 1.0) / (total + 2.0),
        });
        if depth >= self.max_depth || pos <= 0.0 || pos >= total || total < 2.0 * self.min_leaf {
            return slot;
        }
        let parent = gini_mass(pos, total);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in self.candidate_features() {
            let mut order = idx.clone();
            order.sort_by(|&a, &b| {
                self.train.row(a)[f]
                    .partial_cmp(&self.train.row(b)[f])
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let (mut lw, mut lp) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                lw += self.weights[i];
                if y[i] == 1 {
                    lp += self.weights[i];
                }
                let here = self.train.row(i)[f];
                let next = self.train.row(order[k + 1])[f];
                if here >= next {
                    continue;
                }
                let (rw, rp) = (total - lw, pos - lp);
                if lw < self.min_leaf || rw < self.min_leaf {
                    continue;
                }
                let cost = gini_mass(lp, lw) + gini_mass(rp, rw);
                if best.is_none_or(|(c, _, _)| cost < c - SPLIT_EPS) {
                    best = Some((cost, f, here + (next - here) / 2.0));
                }
            }
        }
        let Some((cost, feature, threshold)) = best else {
            return slot;
        };
        if cost >= parent - SPLIT_EPS {
            return slot;
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.train.row(i)[feature] <= threshold);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

fn fit_tree(
    train: &Dataset,
    weights: &[f64],
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
    seed: u64,
) -> TreeModel {
    let idx: Vec<usize> = (0..train.len()).filter(|&i| weights[i] > 0.0).collect();
    let mut builder = TreeBuilder {
        train,
        weights,
        max_depth,
        min_leaf: min_leaf as f64,
        mtry,
        rng: rng(seed),
        nodes: Vec::new(),
    };
    builder.build(idx, 0);
    TreeModel {
        nodes: builder.nodes,
    }
}

/// Bootstrap multiplicities of `n` rows: `n` uniform draws with replacement.
pub fn bootstrap_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut counts = vec![0.0; n];
    for _ in 0..n {
        counts[r.random_range(0..n)] += 1.0;
    }
    counts
}

/// Seed used by tree `t` of a forest, both for its bootstrap and its
/// feature subsampling.
pub fn forest_tree_seed(forest_seed: u64, tree: usize) -> u64 {
    derive_seed(forest_seed, tree as u64, 0)
}

#[derive(Clone, Debug)]
pub struct KnnModel {
    standardizer: Standardizer,
    points: Vec<Vec<f64>>,
    labels: Vec<u8>,
    weights: Vec<f64>,
    k: usize,
}

impl KnnModel {
    fn score(&self, x: &[f64]) -> f64 {
        let q = self.standardizer.transform(x);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let (mut pos, mut total) = (0.0, 0.0);
        for &(_, i) in &dist[..k] {
            total += self.weights[i];
            if self.labels[i] == 1 {
                pos += self.weights[i];
            }
        }
        pos / total
    }
}

#[derive(Clone, Debug)]
enum Fitted {
    Constant(f64),
    LogReg(LogRegModel),
    Tree(TreeModel),
    Knn(KnnModel),
    Forest(Vec<TreeModel>),
}

/// A fitted classifier. Immutable and safe to share between threads.
#[derive(Clone, Debug)]
pub struct Model {
    n_features: usize,
    degenerate: bool,
    fitted: Fitted,
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// True when the training data held a single class and the model
    /// predicts that class everywhere.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn as_logreg(&self) -> Option<&LogRegModel> {
        match &self.fitted {
            Fitted::LogReg(m) => Some(m),
            _ => None,
        }
    }

    pub fn predict_score(&self, x: &[f64]) -> f64 {
        let s = match &self.fitted {
            Fitted::Constant(s) => *s,
            Fitted::LogReg(m) => sigmoid(m.margin(x)),
            Fitted::Tree(t) => t.score(x),
            Fitted::Knn(m) => m.score(x),
            Fitted::Forest(trees) => {
                trees.iter().map(|t| t.score(x)).sum::<f64>() / trees.len() as f64
            }
        };
        s.clamp(0.0, 1.0)
    }

    pub fn predict_label(&self, x: &[f64]) -> u8 {
        label_of(self.predict_score(x))
    }
}

fn check_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Validation("weights must be finite and non-negative".into()));
            }
            if !w.iter().any(|v| *v > 0.0) {
                return Err(Error::Validation("at least one weight must be positive".into()));
            }
            Ok(w.to_vec())
        }
    }
}

/// Fits `spec` on `train`, optionally with per-row weights.
///
/// When every positively weighted row has the same label, the returned
/// model is flagged degenerate and predicts that label with a constant score.
pub fn fit(spec: &LearnerSpec, train: &Dataset, weights: Option<&[f64]>) -> Result<Model> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::Validation("cannot fit on an empty training set".into()));
    }
    let w = check_weights(train.len(), weights)?;
    let d = train.n_features();
    let mut seen = [false; 2];
    for (y, wi) in train.labels().iter().zip(&w) {
        if *wi > 0.0 {
            seen[*y as usize] = true;
        }
    }
    if !(seen[0] && seen[1]) {
        return Ok(Model {
            n_features: d,
            degenerate: true,
            fitted: Fitted::Constant(if seen[1] { 1.0 } else { 0.0 }),
        });
    }
    let fitted = match &spec.kind {
        LearnerKind::LogReg {
            lr,
            l2,
            max_iters,
            tol,
        } => Fitted::LogReg(fit_logreg(train, &w, *lr, *l2, *max_iters, *tol)),
        LearnerKind::Tree { max_depth, min_leaf } => {
            Fitted::Tree(fit_tree(train, &w, *max_depth, *min_leaf, d, spec.seed))
        }
        LearnerKind::Knn { k } => {
            let keep: Vec<usize> = (0..train.len()).filter(|&i| w[i] > 0.0).collect();
            let standardizer = Standardizer::fit(train, &w);
            Fitted::Knn(KnnModel {
                points: keep.iter().map(|&i| standardizer.transform(train.row(i))).collect(),
                labels: keep.iter().map(|&i| train.labels()[i]).collect(),
                weights: keep.iter().map(|&i| w[i]).collect(),
                standardizer,
                k: *k,
            })
        }
        LearnerKind::Forest {
            n_trees,
            max_depth,
            min_leaf,
            feature_subsample,
        } => {
            let mtry = feature_subsample.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
            let trees = (0..*n_trees)
                .map(|t| {
                    let seed = forest_tree_seed(spec.seed, t);
                    let boot = bootstrap_weights(train.len(), seed);
                    let tw: Vec<f64> = boot.iter().zip(&w).map(|(b, wi)| b * wi).collect();
                    fit_tree(train, &tw, *max_depth, *min_leaf, mtry, seed)
                })
                .collect();
            Fitted::Forest(trees)
        }
    };
    Ok(Model {
        n_features: d,
        degenerate: false,
        fitted,
    })
}

/// Hard labels and scores of `model` on every row of `eval`.
pub fn predict_batch(model: &Model, eval: &Dataset) -> Result<(Vec<u8>, Vec<f64>)> {
    if eval.n_features() != model.n_features {
        return Err(Error::Dimension {
            expected: model.n_features,
            actual: eval.n_features(),
        });
    }
    let scores: Vec<f64> = eval.rows().map(|r| model.predict_score(r)).collect();
    let labels = scores.iter().map(|&s| label_of(s)).collect();
    Ok((labels, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, Group, SyntheticSpec};

    fn ds(rows: &[&[f64]], labels: &[u8]) -> Dataset {
        Dataset::new(
            (0..rows[0].len()).map(|j| format!("x{j}")).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
            labels.to_vec(),
            (0..labels.len()).map(|i| Group::from_bit(i % 2 == 0)).collect(),
        )
        .unwrap()
    }

    fn population(seed: u64) -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n0: 150,
            n1: 150,
            pos_rate_a0: 0.3,
            pos_rate_a1: 0.7,
            d: 3,
            signal: 2.0,
            seed,
            include_sensitive_as_feature: true,
        })
        .unwrap()
    }

    #[test]
    fn logreg_separates_1d_data() {
        let train = ds(&[&[-3.0], &[-2.0], &[-1.0], &[1.0], &[2.0], &[3.0]], &[0, 0, 0, 1, 1, 1]);
        let m = fit(&LearnerSpec::default(), &train, None).unwrap();
        let (labels, _) = predict_batch(&m, &train).unwrap();
        assert_eq!(labels, train.labels());
    }

    #[test]
    fn logreg_without_iterations_scores_one_half() {
        let spec = LearnerSpec::new(LearnerKind::LogReg {
            lr: 0.1,
            l2: 0.0,
            max_iters: 0,
            tol: 1e-8,
        });
        let train = population(1);
        let m = fit(&spec, &train, None).unwrap();
        let (labels, scores) = predict_batch(&m, &train).unwrap();
        assert!(scores.iter().all(|&s| s == 0.5));
        assert!(labels.iter().all(|&l| l == 1));
    }

    fn assert_weight_equals_duplication(spec: &LearnerSpec) {
        let train = population(2);
        let mut weights = vec![1.0; train.len()];
        let mut dup_idx: Vec<usize> = (0..train.len()).collect();
        for r in [0usize, 7, 42] {
            weights[r] = 2.0;
            dup_idx.push(r);
        }
        let dup = train.select(&dup_idx);
        let a = fit(spec, &train, Some(&weights)).unwrap();
        let b = fit(spec, &dup, None).unwrap();
        let (_, sa) = predict_batch(&a, &train).unwrap();
        let (_, sb) = predict_batch(&b, &train).unwrap();
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn integer_weights_equal_duplication() {
        assert_weight_equals_duplication(&LearnerSpec::default());
        assert_weight_equals_duplication(&LearnerSpec::new(LearnerKind::tree()));
    }

    #[test]
    fn single_class_training_is_degenerate() {
        let train = ds(&[&[0.0], &[1.0]], &[1, 1]);
        for kind in [LearnerKind::logreg(), LearnerKind::tree(), LearnerKind::knn(), LearnerKind::forest()] {
            let m = fit(&LearnerSpec::new(kind), &train, None).unwrap();
            assert!(m.is_degenerate());
            assert_eq!(m.predict_score(&[3.0]), 1.0);
        }
        let m = fit(&LearnerSpec::default(), &train, None).unwrap();
        let eval = ds(&[&[5.0], &[-5.0]], &[0, 0]);
        let (labels, scores) = predict_batch(&m, &eval).unwrap();
        assert_eq!(labels, vec![1, 1]);
        assert_eq!(scores, vec![1.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = fit(&LearnerSpec::default(), &population(4), None).unwrap();
        let eval = ds(&[&[0.0]], &[0]);
        assert!(matches!(predict_batch(&m, &eval), Err(Error::Dimension { expected: 4, actual: 1 })));
    }

    #[test]
    fn knn_self_match_returns_training_label() {
        let train = population(5);
        let m = fit(&LearnerSpec::new(LearnerKind::Knn { k: 1 }), &train, None).unwrap();
        let (labels, scores) = predict_batch(&m, &train).unwrap();
        assert_eq!(labels, train.labels());
        assert!(scores.iter().all(|&s| s == 0.0 || s == 1.0));
    }

    #[test]
    fn knn_score_is_neighbour_fraction() {
        let train = ds(&[&[0.0], &[1.0], &[2.0], &[10.0]], &[1, 0, 1, 0]);
        let m = fit(&LearnerSpec::new(LearnerKind::Knn { k: 3 }), &train, None).unwrap();
        let eval = ds(&[&[1.0]], &[0]);
        let (_, s) = predict_batch(&m, &eval).unwrap();
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_tree_forest_equals_bootstrapped_tree() {
        let train = population(6);
        let d = train.n_features();
        let spec = LearnerSpec::new(LearnerKind::Forest {
            n_trees: 1,
            max_depth: 4,
            min_leaf: 3,
            feature_subsample: Some(d),
        })
        .with_seed(99);
        let forest = fit(&spec, &train, None).unwrap();
        let boot = bootstrap_weights(train.len(), forest_tree_seed(99, 0));
        let tree = fit(
            &LearnerSpec::new(LearnerKind::Tree { max_depth: 4, min_leaf: 3 }),
            &train,
            Some(&boot),
        )
        .unwrap();
        let (_, a) = predict_batch(&forest, &train).unwrap();
        let (_, b) = predict_batch(&tree, &train).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tree_leaf_scores_are_laplace_smoothed() {
        let train = ds(&[&[0.0], &[0.0], &[1.0], &[1.0]], &[0, 0, 1, 1]);
        let spec = LearnerSpec::new(LearnerKind::Tree { max_depth: 3, min_leaf: 1 });
        let m = fit(&spec, &train, None).unwrap();
        let (labels, scores) = predict_batch(&m, &train).unwrap();
        assert_eq!(labels, vec![0, 0, 1, 1]);
        assert!((scores[0] - 0.25).abs() < 1e-12);
        assert!((scores[3] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn scores_and_labels_are_consistent_for_all_learners() {
        let train = population(7);
        let eval = population(8);
        for kind in [LearnerKind::logreg(), LearnerKind::tree(), LearnerKind::knn(), LearnerKind::forest()] {
            let m = fit(&LearnerSpec::new(kind).with_seed(3), &train, None).unwrap();
            let (labels, scores) = predict_batch(&m, &eval).unwrap();
            for (l, s) in labels.iter().zip(&scores) {
                assert!((0.0..=1.0).contains(s));
                assert_eq!(*l == 1, *s >= 0.5);
            }
        }
    }

    #[test]
    fn invalid_weights_are_rejected() {
        let train = ds(&[&[0.0], &[1.0]], &[0, 1]);
        let spec = LearnerSpec::default();
        assert!(fit(&spec, &train, Some(&[0.0, 0.0])).is_err());
        assert!(fit(&spec, &train, Some(&[-1.0, 1.0])).is_err());
        assert!(fit(&spec, &train, Some(&[1.0])).is_err());
    }
}
