//! Signature-based spatial autoregressive (SAR) regression for functional
//! covariates.
//!
//! The crate is organized around the estimation pipeline:
//!
//! * [`sig`] — truncated tensor algebra over `R^p` and exact signatures of
//!   piecewise-linear paths,
//! * [`spatial`] — k-nearest-neighbour weight matrices and the SAR linear
//!   algebra (`S(ρ) = I − ρV`, log-determinants, solves),
//! * [`funcdata`] — B-spline smoothing, PCA and functional PCA shared by the
//!   projection estimator and the spline baseline,
//! * [`estimators`] — ridge-penalized and projection quasi-maximum-likelihood
//!   fits plus the asymptotic inference formulas,
//! * [`simgen`] — seeded data-generating processes for the comparison study,
//! * [`bench`] — the experiment runner behind the `sigsar` CLI.

pub mod bench;
pub mod estimators;
pub mod funcdata;
pub mod sig;
pub mod simgen;
pub mod spatial;
