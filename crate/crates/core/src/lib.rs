//! Survival analysis and hazard modeling of homeownership tenure.
//!
//! The pipeline runs from raw property transactions to ownership spells
//! ([`ingest`]), through Kaplan-Meier, log-rank and bootstrap inference
//! ([`survival`]), discrete-time hazards ([`hazard`]), parametric mixture
//! fits ([`hazardfit`]) and the pre/post-cutoff impact index ([`covid`]).
//! Survey responses are encoded and weighted in [`survey`], and [`stats`]
//! holds the shared hypothesis-test battery. [`simlab`] generates synthetic
//! data with known ground truth for every estimator.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the `f64` instantiations used by the command-line tool.

// NaN-rejecting `!(a < b)` guards are intentional, and index loops read
// closer to the formulas than iterator chains do.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod covid;
pub mod error;
pub mod hazard;
pub mod hazardfit;
pub mod ingest;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod seed;
pub mod simlab;
pub mod stats;
pub mod survey;
pub mod survival;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type SurvivalCurve64 = survival::SurvivalCurve<f64>;
pub type SurvivalSample64 = survival::SurvivalSample<f64>;
pub type MedianTenure64 = survival::MedianTenure<f64>;
pub type CumulativeHazard64 = survival::CumulativeHazard<f64>;
pub type TestResult64 = stats::TestResult<f64>;
pub type SampleVector64 = stats::SampleVector<f64>;
pub type RegressionFit64 = stats::RegressionFit<f64>;
pub type HazardSeries64 = hazard::HazardSeries<f64>;
pub type MixtureModel64 = hazardfit::MixtureModel<f64>;
pub type FitResult64 = hazardfit::FitResult<f64>;
pub type CiiResult64 = covid::CiiResult<f64>;
pub type GroupSummary64 = survey::GroupSummary<f64>;

pub type SurvivalCurve32 = survival::SurvivalCurve<f32>;
pub type MixtureModel32 = hazardfit::MixtureModel<f32>;
