//! Projection-based signature SAR regression.
//!
//! With centered scores `Z` and centered response `Y`, the coefficient vector
//! and variance have closed forms at fixed `rho`, leaving the concentrated
//! quasi log-likelihood
//!
//! ```text
//! l(rho) = -(N/2)[ln 2pi + 1] - (N/2) ln sigma^2(rho) + ln|S(rho)|,
//! sigma^2(rho) = Y' S(rho)' M S(rho) Y / N,   M = I - Z (Z'Z)^{-1} Z'
//! ```
//!
//! maximized by a 1-D search. `M S(rho) Y` is affine in `rho`, so each
//! candidate costs one log-determinant only.

use super::rho::maximize_rho;
use super::{EstimatorError, SIGMA2_FLOOR};
use crate::spatial::{LogDetProfile, SpatialWeights};
use nalgebra::{DMatrix, DVector};

/// Result of a projection fit.
#[derive(Clone, Debug)]
pub struct ProjectionFit {
    pub rho: f64,
    /// Regression coefficients on the score columns.
    pub phi: DVector<f64>,
    pub sigma2: f64,
    /// Number of score columns used.
    pub n_components: usize,
    /// Concentrated quasi log-likelihood at the optimum.
    pub loglik: f64,
    /// True when the weight matrix was all-zero and `rho` was pinned at 0.
    pub rho_pinned: bool,
}

/// Fits the projection SAR regression. `y` must be centered and the columns
/// of `z` centered with full column rank; both are the caller's contract.
pub fn fit_projection(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    weights: &SpatialWeights,
    profile: Option<&LogDetProfile>,
) -> Result<ProjectionFit, EstimatorError> {
    let n = y.len();
    if z.nrows() != n {
        return Err(EstimatorError::DesignResponseMismatch {
            rows: z.nrows(),
            len: n,
        });
    }
    let nf = n as f64;
    let gram = z.transpose() * z;
    let chol = gram
        .cholesky()
        .ok_or(EstimatorError::RankDeficientDesign)?;
    let project_out = |v: &DVector<f64>| -> DVector<f64> { v - z * chol.solve(&(z.transpose() * v)) };

    let vy = weights.mul_vector(y)?;
    let my = project_out(y);
    let mvy = project_out(&vy);
    let a = my.norm_squared();
    let b = my.dot(&mvy);
    let c = mvy.norm_squared();
    let sigma2_at =
        |rho: f64| ((a - 2.0 * b * rho + c * rho * rho) / nf).max(SIGMA2_FLOOR);
    let constant = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + 1.0);
    let objective = |rho: f64, log_det: f64| constant - 0.5 * nf * sigma2_at(rho).ln() + log_det;

    let (rho, loglik, rho_pinned) = if weights.is_zero() {
        (0.0, objective(0.0, 0.0), true)
    } else {
        let best = maximize_rho(weights, profile, objective)?;
        (best.rho, best.value, false)
    };

    let phi = chol.solve(&(z.transpose() * (y - rho * &vy)));
    Ok(ProjectionFit {
        rho,
        phi,
        sigma2: sigma2_at(rho),
        n_components: z.ncols(),
        loglik,
        rho_pinned,
    })
}
