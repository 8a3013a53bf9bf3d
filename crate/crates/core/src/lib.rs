//! Auditing how training-set size and group underrepresentation bias the
//! measurement of discrimination in binary classifiers.
//!
//! The crate is organized as a pipeline:
//!
//! * [`dataio`] loads and encodes tabular data or generates synthetic
//!   populations;
//! * [`sampling`] draws seeded families of training samples;
//! * [`learners`] fits the classifiers;
//! * [`metrics`] computes group costs and discrimination;
//! * [`decomposition`] splits discrimination into bias and variance terms
//!   over an ensemble of replicate models;
//! * [`mitigation`] provides reweighing and augmentation;
//! * [`experiments`] runs the sweeps and [`cli`] exposes them.
//!
//! Metrics, decompositions and reweighing are generic over [`Scalar`], so
//! the identities they rely on can be checked exactly with [`Exact`].

pub mod cli;
pub mod decomposition;
pub mod dataio;
pub mod error;
pub mod experiments;
pub mod learners;
pub mod metrics;
pub mod mitigation;
pub mod sampling;
pub mod scalar;

pub use dataio::{Dataset, Group};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Floating-point scalar used by the experiment runners.
pub type Real = f64;
/// Exact rational scalar for identity checks.
pub type Exact = num_rational::BigRational;

pub type PredictionTable = decomposition::PredictionTable<Real>;
pub type ExactPredictionTable = decomposition::PredictionTable<Exact>;
pub type DecompositionReport = decomposition::DecompositionReport<Real>;
pub type DiscriminationRecord = metrics::DiscriminationRecord<Real>;
pub type ReweighingWeights = mitigation::ReweighingWeights<Real>;
