//! One-dimensional maximization of concentrated likelihoods over the
//! autoregressive parameter.
//!
//! The objective is `f(rho) = g(rho) + ln|S(rho)|` where `g` is cheap and the
//! log-determinant dominates the cost. A coarse scan over the shared
//! [`LogDetProfile`] grid locates the basin, then golden-section refinement
//! with exact factorizations narrows the bracket to `1e-8`. Grid-search
//! agreement tests elsewhere guard the unimodality assumption.

use crate::spatial::{log_det_s, LogDetProfile, SpatialError, SpatialWeights, RHO_MAX, RHO_MIN};

/// Bracket width below which the golden-section refinement stops.
const BRACKET_TOL: f64 = 1e-8;

pub(crate) struct RhoOptimum {
    pub rho: f64,
    pub log_det: f64,
    pub value: f64,
}

/// Maximizes `objective(rho, ln|S(rho)|)` over `[RHO_MIN, RHO_MAX]`.
///
/// `profile` supplies precomputed grid log-determinants; when absent a local
/// profile is built (worth sharing across calls on the same weight matrix).
pub(crate) fn maximize_rho<F>(
    weights: &SpatialWeights,
    profile: Option<&LogDetProfile>,
    objective: F,
) -> Result<RhoOptimum, SpatialError>
where
    F: Fn(f64, f64) -> f64,
{
    let local;
    let profile = match profile {
        Some(p) => p,
        None => {
            local = LogDetProfile::new(weights)?;
            &local
        }
    };

    let mut best = RhoOptimum {
        rho: 0.0,
        log_det: 0.0,
        value: f64::NEG_INFINITY,
    };
    for (rho, log_det) in profile.grid() {
        let value = objective(rho, log_det);
        if value > best.value {
            best = RhoOptimum { rho, log_det, value };
        }
    }

    let eval = |rho: f64| -> Result<RhoOptimum, SpatialError> {
        let log_det = log_det_s(weights, rho)?;
        Ok(RhoOptimum {
            rho,
            log_det,
            value: objective(rho, log_det),
        })
    };

    // Golden-section refinement inside one grid step of the best point.
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = (best.rho - profile.step()).max(RHO_MIN);
    let mut b = (best.rho + profile.step()).min(RHO_MAX);
    let mut c = eval(b - golden * (b - a))?;
    let mut d = eval(a + golden * (b - a))?;
    while b - a > BRACKET_TOL {
        if c.value > d.value {
            b = d.rho;
            d = c;
            c = eval(b - golden * (b - a))?;
        } else {
            a = c.rho;
            c = d;
            d = eval(a + golden * (b - a))?;
        }
    }
    for candidate in [c, d] {
        if candidate.value > best.value {
            best = candidate;
        }
    }
    Ok(best)
}
