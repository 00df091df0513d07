//! Recentered confidence spheres (RCS) for the mean of a p-variate normal
//! distribution with identity covariance.
//!
//! An RCS is the set `{θ : ‖a⁺(T)X − θ‖ ≤ b(T)}` with `T = ‖X‖/√p`, centered on
//! the positive-part James-Stein estimator. This crate computes its coverage
//! probability and scaled expected volume as functions of `γ = ‖θ‖`, checks
//! them by simulation, and optimizes a monotone Hermite radius function that
//! minimizes the expected volume at the origin under a coverage floor.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod interpolation;
pub mod mc;
pub mod optimizer;
pub mod performance;
pub mod quadrature;
pub mod sphere;

pub use error::{Error, Result};
pub use interpolation::HermiteSpline;
pub use mc::{McConfig, McEstimate};
pub use optimizer::{OptimizationProblem, OptimizationResult};
pub use performance::{CurveKind, PerformanceCurve};
pub use quadrature::{Integral, QuadratureConfig};
pub use sphere::{RadiusFunction, RcsSpec};
