//! Shrinkage and stochastically restricted estimation for logistic regression.
//!
//! When the columns of a logistic design matrix are nearly collinear, the
//! maximum likelihood estimator is unstable and its variance blows up. This
//! crate implements the standard remedies built on the converged IRLS state:
//! the Liu estimator (LE), the Liu-type estimator (LTE), and their
//! stochastically restricted counterparts (SRE, SRLE, SRLTE) that fold in
//! prior information of the form `h = H beta + v` with `Cov(v) = Psi`.
//!
//! On top of the estimators themselves the crate provides
//!
//! - asymptotic bias / covariance / MSEM reports and the matrix-order
//!   superiority checks between SRLTE and each competitor ([`analysis`]),
//! - spectral selection of the biasing parameters `(k, d)` ([`tuning`]),
//! - a deterministic Monte Carlo harness comparing all six estimators over a
//!   grid of sample sizes and collinearity levels ([`simulation`]),
//! - CSV/JSON ingestion and report writers ([`io`]).
//!
//! Everything is pure and deterministic: fits, reports and simulations are
//! functions of their inputs (plus an explicit 64-bit seed), and simulation
//! results are byte-identical regardless of thread count.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod model;
pub mod simulation;
pub mod tuning;

pub use error::{Error, Result};
pub use estimators::{EstimateResult, EstimatorKind, EstimatorParams, RestrictionSpec};
pub use model::{Dataset, FitOptions, MleFit};
