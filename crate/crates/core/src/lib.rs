//! Single change-point detection for high-dimensional time series.
//!
//! The data are projected onto `k` sparse random directions, each projected
//! series gets a univariate CUSUM test, and the `k` p-values are combined
//! into one global p-value. The location comes from the CUSUM profile of the
//! projection with the smallest adjusted p-value. Because the directions are
//! random, [`detector::detect_repeated`] reruns the procedure and reports the
//! modal location.

pub mod combine;
pub mod cusum;
pub mod data;
pub mod detector;
pub mod error;
pub mod harness;
pub mod projection;
pub mod report;
pub mod rng;
pub mod simgen;
pub mod yearly;

pub use combine::{CombinedResult, Method};
pub use cusum::{CusumProfile, TrimSpec, Variant, VarianceKind};
pub use data::DataMatrix;
pub use detector::{detect, detect_repeated, DetectionReport, DetectorConfig, RepetitionSummary};
pub use error::{Error, Result};
pub use projection::{generate_directions, project, ProjectedSeries, ProjectionMatrix};
