//! Dataset representation, CSV ingestion and controlled-imbalance populations.
//!
//! A [`Dataset`] is the encoded universe every sampling protocol draws from:
//! a dense row-major feature matrix, a binary label `Y` and a binary
//! sensitive attribute `A`. Rows carry stable identifiers so that subsets,
//! nested samples and augmented copies can be traced back to their source.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value of the binary sensitive attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// `a0`, the unprivileged group.
    #[serde(rename = "a0")]
    Unprivileged,
    /// `a1`, the privileged group.
    #[serde(rename = "a1")]
    Privileged,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Unprivileged, Group::Privileged];

    pub fn index(self) -> usize {
        match self {
            Group::Unprivileged => 0,
            Group::Privileged => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Group::Privileged
        } else {
            Group::Unprivileged
        }
    }

    pub fn other(self) -> Self {
        Group::from_bit(self == Group::Unprivileged)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Unprivileged => "a0",
            Group::Privileged => "a1",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
}

/// Which CSV columns play which role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSchema {
    pub label_column: String,
    /// Raw label value mapped to `Y = 1`.
    pub positive_label: String,
    pub sensitive_column: String,
    /// Raw sensitive value mapped to `A = a1`.
    pub privileged_value: String,
    pub feature_columns: Vec<FeatureColumn>,
    #[serde(default = "default_true")]
    pub include_sensitive_as_feature: bool,
}

fn default_true() -> bool {
    true
}

impl DataSchema {
    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Schema("at least one feature column is required".into()));
        }
        let mut seen = BTreeSet::new();
        for col in &self.feature_columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("feature column {:?} listed twice", col.name)));
            }
            if col.name == self.label_column {
                return Err(Error::Schema(format!(
                    "label column {:?} must not be a feature column",
                    col.name
                )));
            }
            if col.name == self.sensitive_column {
                return Err(Error::Schema(format!(
                    "sensitive column {:?} is added through include_sensitive_as_feature, not feature_columns",
                    col.name
                )));
            }
        }
        if self.label_column == self.sensitive_column {
            return Err(Error::Schema("label and sensitive column are the same".into()));
        }
        Ok(())
    }
}

/// Affine scaling applied to one encoded column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation; `0` for a constant column, which is
    /// only centered.
    pub std: f64,
}

/// Encoded data: `n` rows of `d` finite features with binary `Y` and `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
    sensitive: Vec<Group>,
    row_ids: Vec<u64>,
    origins: Vec<u64>,
    feature_names: Vec<String>,
    sensitive_feature: Option<usize>,
    scaling: Vec<ColumnScaling>,
    provenance: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from per-row feature vectors. Row ids default to
    /// `0..n`.
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        sensitive: Vec<Group>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        let n = rows.len();
        let mut features = Vec::with_capacity(n * n_features);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::Dimension {
                    expected: n_features,
                    actual: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "row {i}, feature {:?} is not finite",
                    feature_names[j]
                )));
            }
            features.extend(row);
        }
        Self::from_parts(n_features, features, labels, sensitive, feature_names)
    }

    fn from_parts(
        n_features: usize,
        features: Vec<f64>,
        labels: Vec<u8>,
        sensitive: Vec<Group>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if sensitive.len() != n || features.len() != n * n_features {
            return Err(Error::Validation(format!(
                "inconsistent lengths: {} labels, {} sensitive values, {} feature cells for {} columns",
                n,
                sensitive.len(),
                features.len(),
                n_features
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Validation(format!("label {bad} is not binary")));
        }
        let ids: Vec<u64> = (0..n as u64).collect();
        Ok(Dataset {
            n_features,
            features,
            labels,
            sensitive,
            row_ids: ids.clone(),
            origins: ids,
            feature_names,
            sensitive_feature: None,
            scaling: Vec::new(),
            provenance: Vec::new(),
        })
    }

    /// Marks column `index` as the encoding of the sensitive attribute.
    pub fn with_sensitive_feature(mut self, index: usize) -> Result<Self> {
        if index >= self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: index,
            });
        }
        self.sensitive_feature = Some(index);
        Ok(self)
    }

    pub fn with_provenance(mut self, note: impl Into<String>) -> Self {
        self.provenance.push(note.into());
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Copy of the dataset with column `j` replaced.
    pub fn with_column(&self, j: usize, values: &[f64]) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                actual: values.len(),
            });
        }
        let mut out = self.clone();
        for (i, v) in values.iter().enumerate() {
            out.features[i * self.n_features + j] = *v;
        }
        Ok(out)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[Group] {
        &self.sensitive
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    /// For each row, the id of the original row it was derived from
    /// (itself for original rows, the source for duplicates and synthetics).
    pub fn origins(&self) -> &[u64] {
        &self.origins
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sensitive_feature(&self) -> Option<usize> {
        self.sensitive_feature
    }

    pub fn scaling(&self) -> &[ColumnScaling] {
        &self.scaling
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    fn max_row_id(&self) -> Option<u64> {
        self.row_ids.iter().copied().max()
    }

    /// Rows at `indices`, in the given order. Ids and lineage are preserved.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            n_features: self.n_features,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
            feature_names: self.feature_names.clone(),
            sensitive_feature: self.sensitive_feature,
            scaling: self.scaling.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Indices of rows satisfying `pred(group, label)`.
    pub fn indices_where(&self, mut pred: impl FnMut(Group, u8) -> bool) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| pred(self.sensitive[i], self.labels[i]))
            .collect()
    }

    /// Concatenation keeping both halves' ids. The caller guarantees the
    /// id sets are disjoint when that matters.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.n_features != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: other.n_features,
            });
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        out.sensitive.extend_from_slice(&other.sensitive);
        out.row_ids.extend_from_slice(&other.row_ids);
        out.origins.extend_from_slice(&other.origins);
        Ok(out)
    }

    /// Appends derived rows with fresh ids above the current maximum.
    pub(crate) fn append_derived(
        &self,
        rows: Vec<(Vec<f64>, u8, Group, u64)>,
    ) -> Result<Dataset> {
        let mut out = self.clone();
        let first = self.max_row_id().map_or(0, |m| m + 1);
        for (id, (features, label, group, origin)) in (first..).zip(rows) {
            if features.len() != self.n_features {
                return Err(Error::Dimension {
                    expected: self.n_features,
                    actual: features.len(),
                });
            }
            out.features.extend(features);
            out.labels.push(label);
            out.sensitive.push(group);
            out.row_ids.push(id);
            out.origins.push(origin);
        }
        Ok(out)
    }
}

/// Group sizes and outcome rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub m0: usize,
    pub m1: usize,
    /// `None` when the group is empty.
    pub pos_rate_a0: Option<f64>,
    pub pos_rate_a1: Option<f64>,
    pub group_fraction_a1: f64,
}

impl GroupStats {
    pub fn count(&self, group: Group) -> usize {
        match group {
            Group::Unprivileged => self.m0,
            Group::Privileged => self.m1,
        }
    }

    pub fn pos_rate(&self, group: Group) -> Option<f64> {
        match group {
            Group::Unprivileged => self.pos_rate_a0,
            Group::Privileged => self.pos_rate_a1,
        }
    }

    pub fn group_fraction_a0(&self) -> f64 {
        self.m0 as f64 / (self.m0 + self.m1) as f64
    }
}

/// Positive and total counts per `(group, label)` cell, indexed `[group][label]`.
pub fn cell_counts(ds: &Dataset) -> [[usize; 2]; 2] {
    let mut counts = [[0usize; 2]; 2];
    for (g, y) in ds.sensitive.iter().zip(&ds.labels) {
        counts[g.index()][*y as usize] += 1;
    }
    counts
}

pub fn group_stats(ds: &Dataset) -> GroupStats {
    let c = cell_counts(ds);
    let m0 = c[0][0] + c[0][1];
    let m1 = c[1][0] + c[1][1];
    let rate = |pos: usize, total: usize| (total > 0).then(|| pos as f64 / total as f64);
    GroupStats {
        m0,
        m1,
        pos_rate_a0: rate(c[0][1], m0),
        pos_rate_a1: rate(c[1][1], m1),
        group_fraction_a1: if m0 + m1 == 0 {
            f64::NAN
        } else {
            m1 as f64 / (m0 + m1) as f64
        },
    }
}

fn is_missing(raw: &str) -> bool {
    matches!(raw, "" | "?" | "NA" | "N/A")
}

pub fn load_csv(path: impl AsRef<Path>, schema: &DataSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from_reader(file, schema, &path.display().to_string())
}

/// Parses and encodes CSV text.
///
/// Categorical columns are one-hot encoded over their sorted distinct values;
/// numeric columns are standardized to zero mean and unit population
/// variance. Rows with a missing value in any used column are dropped.
pub fn load_csv_from_reader<R: Read>(reader: R, schema: &DataSchema, source: &str) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column {name:?} not found in {source}")))
    };
    let label_idx = find(&schema.label_column)?;
    let sens_idx = find(&schema.sensitive_column)?;
    let feat_idx = schema
        .feature_columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;

    let mut kept: Vec<(u64, csv::StringRecord)> = Vec::new();
    let mut dropped = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let used = std::iter::once(label_idx)
            .chain(std::iter::once(sens_idx))
            .chain(feat_idx.iter().copied());
        if used.clone().any(|i| record.get(i).is_none_or(is_missing)) {
            dropped += 1;
            continue;
        }
        kept.push((line as u64, record));
    }

    let distinct = |idx: usize| -> BTreeSet<String> {
        kept.iter().map(|(_, r)| r[idx].to_string()).collect()
    };
    for (idx, col) in [(label_idx, &schema.label_column), (sens_idx, &schema.sensitive_column)] {
        let values = distinct(idx);
        if values.len() > 2 {
            return Err(Error::Validation(format!(
                "column {col:?} must be binary, found values {:?}",
                values.into_iter().collect::<Vec<_>>()
            )));
        }
    }

    // Column layout of the encoded matrix.
    enum Encoder {
        Numeric,
        OneHot(BTreeMap<String, usize>),
    }
    let mut names = Vec::new();
    let mut encoders = Vec::new();
    for (col, &idx) in schema.feature_columns.iter().zip(&feat_idx) {
        match col.kind {
            FeatureKind::Numeric => {
                names.push(col.name.clone());
                encoders.push(Encoder::Numeric);
            }
            FeatureKind::Categorical => {
                let mut map = BTreeMap::new();
                for v in distinct(idx) {
                    map.insert(v.clone(), map.len());
                    names.push(format!("{}={}", col.name, v));
                }
                encoders.push(Encoder::OneHot(map));
            }
        }
    }
    let sensitive_feature = schema.include_sensitive_as_feature.then(|| {
        names.push(schema.sensitive_column.clone());
        names.len() - 1
    });
    let d = names.len();

    let mut features = Vec::with_capacity(kept.len() * d);
    let mut labels = Vec::with_capacity(kept.len());
    let mut sensitive = Vec::with_capacity(kept.len());
    let mut row_ids = Vec::with_capacity(kept.len());
    let mut numeric_cols = Vec::new();
    for (line, record) in &kept {
        let mut offset = 0;
        for ((col, &idx), enc) in schema.feature_columns.iter().zip(&feat_idx).zip(&encoders) {
            let raw = &record[idx];
            match enc {
                Encoder::Numeric => {
                    let v: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                        Error::Validation(format!(
                            "{source}: data row {line}, column {:?}: {raw:?} is not a finite number",
                            col.name
                        ))
                    })?;
                    if row_ids.is_empty() {
                        numeric_cols.push(offset);
                    }
                    features.push(v);
                    offset += 1;
                }
                Encoder::OneHot(map) => {
                    let hot = map[raw];
                    features.extend((0..map.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
                    offset += map.len();
                }
            }
        }
        let group = Group::from_bit(record[sens_idx] == schema.privileged_value);
        if sensitive_feature.is_some() {
            features.push(if group == Group::Privileged { 1.0 } else { 0.0 });
        }
        labels.push(u8::from(record[label_idx] == schema.positive_label));
        sensitive.push(group);
        row_ids.push(*line);
    }

    let mut ds = Dataset::from_parts(d, features, labels, sensitive, names)?;
    ds.row_ids = row_ids.clone();
    ds.origins = row_ids;
    ds.sensitive_feature = sensitive_feature;
    ds.scaling = standardize_columns(&mut ds, &numeric_cols);
    ds.provenance.push(format!(
        "loaded {source}: {} rows kept, {dropped} dropped for missing values",
        ds.len()
    ));
    Ok(ds)
}

fn standardize_columns(ds: &mut Dataset, cols: &[usize]) -> Vec<ColumnScaling> {
    let n = ds.len();
    let d = ds.n_features;
    let mut out = Vec::with_capacity(cols.len());
    for &j in cols {
        let (mean, std) = if n == 0 {
            (0.0, 0.0)
        } else {
            let mean = (0..n).map(|i| ds.features[i * d + j]).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (ds.features[i * d + j] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            (mean, var.sqrt())
        };
        let scale = if std > 0.0 { std } else { 1.0 };
        for i in 0..n {
            let v = &mut ds.features[i * d + j];
            *v = (*v - mean) / scale;
        }
        out.push(ColumnScaling {
            name: ds.feature_names[j].clone(),
            mean,
            std,
        });
    }
    out
}

/// Per-column standardization fitted on a (possibly weighted) training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Weighted mean and weighted population standard deviation per column.
    /// Integer weights are equivalent to row duplication. Constant columns get
    /// scale 1.
    ///
    /// Indicator columns (every value 0 or 1, such as one-hot blocks and the
    /// sensitive attribute) are passed through unchanged.
    pub fn fit(ds: &Dataset, weights: &[f64]) -> Self {
        let d = ds.n_features();
        let indicator: Vec<bool> = (0..d)
            .map(|j| ds.rows().all(|row| row[j] == 0.0 || row[j] == 1.0))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut means = vec![0.0; d];
        for (row, &w) in ds.rows().zip(weights) {
            for (m, x) in means.iter_mut().zip(row) {
                *m += w * x;
            }
        }
        means.iter_mut().for_each(|m| *m /= total);
        let mut vars = vec![0.0; d];
        for (row, &w) in ds.rows().zip(weights) {
            for ((v, x), m) in vars.iter_mut().zip(row).zip(&means) {
                *v += w * (x - m) * (x - m);
            }
        }
        let scales = vars
            .into_iter()
            .zip(&indicator)
            .map(|(v, &ind)| {
                let s = (v / total).sqrt();
                if s > 1e-12 && !ind {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        for (m, &ind) in means.iter_mut().zip(&indicator) {
            if ind {
                *m = 0.0;
            }
        }
        Standardizer { means, scales }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

fn check_rate(rate: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} = {rate} is outside [0, 1]")))
    }
}

/// Slack for floor/round on products of decimal fractions, e.g. 300 / 0.3.
const ROUNDING_SLACK: f64 = 1e-9;

/// Largest group size reachable at outcome rate `rate` from `pos`
/// positives and `neg` negatives, and the positives it contains.
pub(crate) fn rebalanced_size(pos: usize, neg: usize, rate: f64) -> (usize, usize) {
    let by_pos = if rate > 0.0 { pos as f64 / rate } else { f64::INFINITY };
    let by_neg = if rate < 1.0 { neg as f64 / (1.0 - rate) } else { f64::INFINITY };
    let size = ((by_pos.min(by_neg) + ROUNDING_SLACK).floor() as usize).min(pos + neg);
    let positives = ((rate * size as f64 + 0.5 + ROUNDING_SLACK).floor() as usize).min(pos);
    let positives = positives.max(size.saturating_sub(neg));
    (size, positives)
}

/// Subsamples each group to hit a target positive-outcome rate while keeping
/// as many rows as possible.
///
/// For a group with `P` positives, `N` negatives and target `r`, the output
/// group has `floor(min(P/r, N/(1-r)))` rows of which `round(r * n_g)` are
/// positive, each drawn uniformly without replacement. Row order of the input
/// is preserved.
pub fn rebalance_outcome_rates(
    ds: &Dataset,
    target_rate_a1: f64,
    target_rate_a0: f64,
    seed: u64,
) -> Result<Dataset> {
    check_rate(target_rate_a1, "target_rate_a1")?;
    check_rate(target_rate_a0, "target_rate_a0")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    let mut notes = Vec::new();
    for group in Group::ALL {
        let rate = match group {
            Group::Privileged => target_rate_a1,
            Group::Unprivileged => target_rate_a0,
        };
        let pos_idx = ds.indices_where(|g, y| g == group && y == 1);
        let neg_idx = ds.indices_where(|g, y| g == group && y == 0);
        let (p, n) = (pos_idx.len(), neg_idx.len());
        let infeasible = |reason: String| Error::InfeasibleRate { group, rate, reason };
        if rate > 0.0 && p == 0 {
            return Err(infeasible("group has no positive rows".into()));
        }
        if rate < 1.0 && n == 0 {
            return Err(infeasible("group has no negative rows".into()));
        }
        let (size, positives) = rebalanced_size(p, n, rate);
        if size == 0 {
            return Err(infeasible(format!("no group size is reachable from {p} positives and {n} negatives")));
        }
        let negatives = size - positives;
        for (pool, take) in [(&pos_idx, positives), (&neg_idx, negatives)] {
            keep.extend(sample_indices(&mut rng, pool.len(), take).into_iter().map(|k| pool[k]));
        }
        notes.push(format!(
            "{group}: target rate {rate}, realized {positives}/{size} = {}",
            positives as f64 / size as f64
        ));
    }
    keep.sort_unstable();
    let mut out = ds.select(&keep);
    out.provenance
        .push(format!("rebalance_outcome_rates(seed={seed}): {}", notes.join("; ")));
    Ok(out)
}

/// Parameters of a synthetic population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n0: usize,
    pub n1: usize,
    pub pos_rate_a0: f64,
    pub pos_rate_a1: f64,
    /// Number of label-dependent Gaussian features.
    pub d: usize,
    /// Euclidean distance between the two class-conditional means.
    pub signal: f64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub include_sensitive_as_feature: bool,
}

/// Draws a population with group-specific outcome rates.
///
/// Labels are Bernoulli per group. Features are `N(mu_y, I)` with class means
/// `±signal / (2 sqrt d)` in every coordinate, so the class means sit
/// `signal` apart and the features are independent of the group given the
/// label. The sensitive attribute is appended as a 0/1 column when requested.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n0 == 0 || spec.n1 == 0 {
        return Err(Error::Validation("synthetic group sizes must be at least 1".into()));
    }
    if spec.d == 0 {
        return Err(Error::Validation("synthetic populations need at least one feature".into()));
    }
    if !(spec.signal >= 0.0 && spec.signal.is_finite()) {
        return Err(Error::Validation(format!("signal {} must be finite and >= 0", spec.signal)));
    }
    check_rate(spec.pos_rate_a0, "pos_rate_a0")?;
    check_rate(spec.pos_rate_a1, "pos_rate_a1")?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shift = spec.signal / (2.0 * (spec.d as f64).sqrt());
    let width = spec.d + usize::from(spec.include_sensitive_as_feature);
    let n = spec.n0 + spec.n1;
    let mut features = Vec::with_capacity(n * width);
    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for (group, count, rate) in [
        (Group::Unprivileged, spec.n0, spec.pos_rate_a0),
        (Group::Privileged, spec.n1, spec.pos_rate_a1),
    ] {
        for _ in 0..count {
            let y = u8::from(rng.random::<f64>() < rate);
            let mu = if y == 1 { shift } else { -shift };
            for _ in 0..spec.d {
                let z: f64 = rng.sample(StandardNormal);
                features.push(mu + z);
            }
            if spec.include_sensitive_as_feature {
                features.push(if group == Group::Privileged { 1.0 } else { 0.0 });
            }
            labels.push(y);
            sensitive.push(group);
        }
    }
    let mut names: Vec<String> = (0..spec.d).map(|j| format!("x{j}")).collect();
    if spec.include_sensitive_as_feature {
        names.push("sensitive".into());
    }
    let mut ds = Dataset::from_parts(width, features, labels, sensitive, names)?;
    if spec.include_sensitive_as_feature {
        ds.sensitive_feature = Some(spec.d);
    }
    ds.provenance.push(format!(
        "synthetic(n0={}, n1={}, pos_rate_a0={}, pos_rate_a1={}, d={}, signal={}, seed={})",
        spec.n0, spec.n1, spec.pos_rate_a0, spec.pos_rate_a1, spec.d, spec.signal, spec.seed
    ));
    Ok(ds)
}
