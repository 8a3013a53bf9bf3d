//! Reweighing and data augmentation.
//!
//! Reweighing assigns each `(a, y)` cell the weight
//! `P(A=a) P(Y=y) / P(A=a, Y=y)` (Kamiran and Calders), which makes group
//! and label independent in the weighted training data. The augmentation
//! helpers only ever append rows; the original rows come first and are left
//! untouched.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{cell_counts, Dataset, Group};
use crate::error::{Error, Result};
use crate::sampling::rng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReweighingWeights<T> {
    /// Indexed `[group][label]`.
    pub cell_weights: [[T; 2]; 2],
    /// `[group][label]` cells that have no rows.
    pub degenerate: [[bool; 2]; 2],
    pub row_weights: Vec<T>,
}

impl<T: Scalar> ReweighingWeights<T> {
    pub fn weight(&self, group: Group, label: u8) -> &T {
        &self.cell_weights[group.index()][label as usize]
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.iter().flatten().any(|&d| d)
    }

    pub fn to_f64(&self) -> ReweighingWeights<f64> {
        let c = |a: usize, y: usize| self.cell_weights[a][y].to_f64_lossy();
        ReweighingWeights {
            cell_weights: [[c(0, 0), c(0, 1)], [c(1, 0), c(1, 1)]],
            degenerate: self.degenerate,
            row_weights: self.row_weights.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

/// Empirical reweighing weights, `n_a n_y / (n n_ay)` per cell.
pub fn reweighing_weights<T: Scalar>(ds: &Dataset) -> Result<ReweighingWeights<T>> {
    if ds.is_empty() {
        return Err(Error::Validation("cannot reweigh an empty dataset".into()));
    }
    let cells = cell_counts(ds);
    let n = ds.len();
    let n_group = [cells[0][0] + cells[0][1], cells[1][0] + cells[1][1]];
    let n_label = [cells[0][0] + cells[1][0], cells[0][1] + cells[1][1]];
    let mut degenerate = [[false; 2]; 2];
    let mut weight = |a: usize, y: usize| {
        if cells[a][y] == 0 {
            degenerate[a][y] = true;
            T::zero()
        } else {
            T::from_count(n_group[a]) * T::from_count(n_label[y]) / (T::from_count(n) * T::from_count(cells[a][y]))
        }
    };
    let cell_weights = [[weight(0, 0), weight(0, 1)], [weight(1, 0), weight(1, 1)]];
    let row_weights = ds
        .sensitive()
        .iter()
        .zip(ds.labels())
        .map(|(g, &y)| cell_weights[g.index()][y as usize].clone())
        .collect();
    Ok(ReweighingWeights {
        cell_weights,
        degenerate,
        row_weights,
    })
}

/// Duplicates rows uniformly with replacement inside each `[group][label]`
/// cell until the cell reaches its target count.
pub fn oversample_random(ds: &Dataset, targets: [[usize; 2]; 2], seed: u64) -> Result<Dataset> {
    let cells = cell_counts(ds);
    let mut rng = rng(seed);
    let mut new_rows = Vec::new();
    for g in Group::ALL {
        for y in 0..2u8 {
            let (have, want) = (cells[g.index()][y as usize], targets[g.index()][y as usize]);
            if want < have {
                return Err(Error::Validation(format!(
                    "target {want} for cell ({g}, Y={y}) is below its current count {have}"
                )));
            }
            if want == have {
                continue;
            }
            let members = ds.indices_where(|a, l| a == g && l == y);
            if members.is_empty() {
                return Err(Error::Shortfall {
                    group: format!("{g} with Y={y}"),
                    needed: want,
                    available: 0,
                });
            }
            for _ in have..want {
                let src = members[rng.random_range(0..members.len())];
                new_rows.push((ds.row(src).to_vec(), y, g, ds.origins()[src]));
            }
        }
    }
    ds.append_derived(new_rows)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Appends `n_new` SMOTE rows to the `(group, label)` cell.
pub fn smote(ds: &Dataset, cell: (Group, u8), n_new: usize, k: usize, seed: u64) -> Result<Dataset> {
    let (g, y) = cell;
    if k == 0 {
        return Err(Error::Config("SMOTE needs k >= 1 neighbors".into()));
    }
    let members = ds.indices_where(|a, l| a == g && l == y);
    if members.len() < k + 1 {
        return Err(Error::Validation(format!(
            "SMOTE with k={k} needs at least {} rows in cell ({g}, Y={y}), found {}",
            k + 1,
            members.len()
        )));
    }
    // Neighbor lists are computed lazily, only for rows drawn as seeds.
    let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; members.len()];
    let mut rng = rng(seed);
    let mut new_rows = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let s = rng.random_range(0..members.len());
        let near = neighbors[s].get_or_insert_with(|| {
            let base = ds.row(members[s]);
            let mut others: Vec<(f64, usize)> = members
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != s)
                .map(|(_, &m)| (squared_distance(base, ds.row(m)), m))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, m)| m).collect()
        });
        let nb = near[rng.random_range(0..near.len())];
        let t: f64 = rng.random();
        let seed_row = ds.row(members[s]);
        let synthetic = seed_row
            .iter()
            .zip(ds.row(nb))
            .map(|(a, b)| a + t * (b - a))
            .collect();
        new_rows.push((synthetic, y, g, ds.origins()[members[s]]));
    }
    ds.append_derived(new_rows)
}
