//! Seeded sampling protocols for the size, ratio and growing-group sweeps.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Group};
use crate::error::{Error, Result};

pub const DEFAULT_REPEATS: usize = 30;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function: add the golden-ratio increment, then
/// avalanche with two xor-shift-multiply rounds and a final xor-shift.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate_index` at sweep point `sweep_index`.
///
/// Defined bit-exactly as
/// `splitmix64(splitmix64(splitmix64(master) ^ sweep) ^ replicate)` with
/// wrapping 64-bit arithmetic, so it is identical on every platform.
pub fn derive_seed(master_seed: u64, sweep_index: u64, replicate_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ sweep_index) ^ replicate_index)
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolKind {
    Sized {
        m: usize,
    },
    Ratio {
        m: usize,
        f1: f64,
    },
    GrowingGroup {
        fixed_group: Group,
        fixed_n: usize,
        growing_sizes: Vec<usize>,
        selective_positive_only: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub kind: ProtocolKind,
    pub repeats: usize,
    pub master_seed: u64,
}

impl Protocol {
    pub fn new(kind: ProtocolKind, master_seed: u64) -> Self {
        Protocol {
            kind,
            repeats: DEFAULT_REPEATS,
            master_seed,
        }
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        match &self.kind {
            ProtocolKind::Sized { m } if *m < 2 => {
                Err(Error::Config(format!("training size {m} must be at least 2")))
            }
            ProtocolKind::Ratio { m, f1 } => {
                if *m < 2 {
                    Err(Error::Config(format!("training size {m} must be at least 2")))
                } else if !(*f1 > 0.0 && *f1 < 1.0) {
                    Err(Error::Config(format!("split fraction {f1} must lie in (0, 1)")))
                } else {
                    split_counts(*m, *f1).map(|_| ())
                }
            }
            ProtocolKind::GrowingGroup { growing_sizes, fixed_n, .. } => {
                if growing_sizes.is_empty() || growing_sizes[0] == 0 {
                    return Err(Error::Config("growing sizes must be positive".into()));
                }
                if growing_sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("growing sizes must be strictly increasing".into()));
                }
                if *fixed_n == 0 {
                    return Err(Error::Config("fixed group size must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draws every replicate of a `Sized` or `Ratio` protocol. Replicate `r`
    /// uses `derive_seed(master_seed, sweep_index, r)`; replicates are drawn in
    /// parallel and returned in index order.
    pub fn draw(&self, pool: &Dataset, sweep_index: u64) -> Result<SampleFamily> {
        self.validate()?;
        let replicates = (0..self.repeats as u64)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(self.master_seed, sweep_index, r);
                match &self.kind {
                    ProtocolKind::Sized { m } => sample_sized(pool, *m, seed),
                    ProtocolKind::Ratio { m, f1 } => sample_ratio(pool, *m, *f1, seed),
                    ProtocolKind::GrowingGroup { .. } => Err(Error::Config(
                        "growing-group protocols are drawn with draw_growing".into(),
                    )),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleFamily {
            protocol: self.clone(),
            replicates,
        })
    }

    /// Draws a `GrowingGroup` protocol: one family per growing size, where
    /// replicate `r` of every family comes from the same nested series seeded
    /// by `derive_seed(master_seed, sweep_index, r)`.
    pub fn draw_growing(&self, pool: &Dataset, sweep_index: u64) -> Result<Vec<SampleFamily>> {
        self.validate()?;
        let ProtocolKind::GrowingGroup {
            fixed_group,
            fixed_n,
            growing_sizes,
            selective_positive_only,
        } = &self.kind
        else {
            return Err(Error::Config("draw_growing needs a growing-group protocol".into()));
        };
        let series = (0..self.repeats as u64)
            .into_par_iter()
            .map(|r| {
                growing_group_series(
                    pool,
                    *fixed_group,
                    *fixed_n,
                    growing_sizes,
                    *selective_positive_only,
                    derive_seed(self.master_seed, sweep_index, r),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut families: Vec<SampleFamily> = (0..growing_sizes.len())
            .map(|_| SampleFamily {
                protocol: self.clone(),
                replicates: Vec::with_capacity(self.repeats),
            })
            .collect();
        for s in series {
            for (family, ds) in families.iter_mut().zip(s) {
                family.replicates.push(ds);
            }
        }
        Ok(families)
    }
}

/// Training sets drawn under one protocol, ordered by replicate index.
#[derive(Clone, Debug)]
pub struct SampleFamily {
    pub protocol: Protocol,
    pub replicates: Vec<Dataset>,
}

/// Uniform sample of `m` rows without replacement.
pub fn sample_sized(pool: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
    if m > pool.len() {
        return Err(Error::SampleSize {
            requested: m,
            available: pool.len(),
        });
    }
    let idx = sample_indices(&mut rng(seed), pool.len(), m).into_vec();
    Ok(pool.select(&idx))
}

/// `(m0, m1)` for a split, with `m1 = round(f1 * m)` rounding halves up.
pub fn split_counts(m: usize, f1: f64) -> Result<(usize, usize)> {
    let m1 = (f1 * m as f64 + 0.5 + 1e-9).floor() as usize;
    if m1 == 0 || m1 >= m {
        return Err(Error::Config(format!(
            "split {f1} of {m} rows leaves an empty group (m1 = {m1})"
        )));
    }
    Ok((m - m1, m1))
}

fn draw_from(
    candidates: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
    stratum: &str,
) -> Result<Vec<usize>> {
    if k > candidates.len() {
        return Err(Error::Shortfall {
            group: stratum.to_string(),
            needed: k,
            available: candidates.len(),
        });
    }
    Ok(sample_indices(rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect())
}

/// Exactly `round(f1 * m)` rows of `a1` and the rest from `a0`, each drawn
/// uniformly without replacement within its group.
pub fn sample_ratio(pool: &Dataset, m: usize, f1: f64, seed: u64) -> Result<Dataset> {
    let (m0, m1) = split_counts(m, f1)?;
    let mut rng = rng(seed);
    let a1 = pool.indices_where(|g, _| g == Group::Privileged);
    let a0 = pool.indices_where(|g, _| g == Group::Unprivileged);
    let mut idx = draw_from(&a1, m1, &mut rng, "a1")?;
    idx.extend(draw_from(&a0, m0, &mut rng, "a0")?);
    Ok(pool.select(&idx))
}

/// Training sets with a fixed sample of one group and a growing sample of
/// the other.
///
/// The fixed-group sample is drawn once. The growing group is drawn as one
/// random ordering whose prefixes give each size, so every dataset in the
/// series contains the previous one. In selective mode the growing group is
/// restricted to its positive-outcome rows.
pub fn growing_group_series(
    pool: &Dataset,
    fixed_group: Group,
    fixed_n: usize,
    growing_sizes: &[usize],
    selective_positive_only: bool,
    seed: u64,
) -> Result<Vec<Dataset>> {
    let mut rng = rng(seed);
    let fixed_candidates = pool.indices_where(|g, _| g == fixed_group);
    let fixed = draw_from(&fixed_candidates, fixed_n, &mut rng, &fixed_group.to_string())?;

    let growing_group = fixed_group.other();
    let mut growing =
        pool.indices_where(|g, y| g == growing_group && (!selective_positive_only || y == 1));
    let largest = growing_sizes.iter().copied().max().unwrap_or(0);
    if largest > growing.len() {
        return Err(Error::Shortfall {
            group: if selective_positive_only {
                format!("{growing_group} with Y=1")
            } else {
                growing_group.to_string()
            },
            needed: largest,
            available: growing.len(),
        });
    }
    growing.shuffle(&mut rng);
    growing.truncate(largest);

    Ok(growing_sizes
        .iter()
        .map(|&size| {
            let mut idx = fixed.clone();
            idx.extend_from_slice(&growing[..size]);
            pool.select(&idx)
        })
        .collect())
}
