//! Reduced-form predictions for SAR fits.
//!
//! The reduced form of the model is `E[Y] = S(rho)^{-1} mean`, evaluated on
//! the target units with their own (re-normalized) weight matrix.

use super::penalized::PenalizedFit;
use super::projection::ProjectionFit;
use super::EstimatorError;
use crate::spatial::{sar_solve, SpatialError, SpatialWeights};
use nalgebra::{DMatrix, DVector};

/// `S(rho)^{-1} mean` on the evaluation units.
pub fn predict_mean(
    weights: &SpatialWeights,
    rho: f64,
    mean: &DVector<f64>,
) -> Result<DVector<f64>, SpatialError> {
    sar_solve(weights, rho, mean)
}

/// Reduced-form prediction of a penalized fit on new units.
pub fn predict_penalized(
    fit: &PenalizedFit,
    xi_eval: &DMatrix<f64>,
    weights_eval: &SpatialWeights,
) -> Result<DVector<f64>, EstimatorError> {
    if xi_eval.nrows() != weights_eval.n() {
        return Err(EstimatorError::DesignResponseMismatch {
            rows: xi_eval.nrows(),
            len: weights_eval.n(),
        });
    }
    let mut mean = xi_eval * &fit.theta;
    mean.add_scalar_mut(fit.alpha);
    Ok(predict_mean(weights_eval, fit.rho, &mean)?)
}

/// Reduced-form prediction of a projection fit on new units; `mean_offset`
/// restores the response level removed by centering at training time.
pub fn predict_projection(
    fit: &ProjectionFit,
    z_eval: &DMatrix<f64>,
    weights_eval: &SpatialWeights,
    mean_offset: f64,
) -> Result<DVector<f64>, EstimatorError> {
    if z_eval.nrows() != weights_eval.n() {
        return Err(EstimatorError::DesignResponseMismatch {
            rows: z_eval.nrows(),
            len: weights_eval.n(),
        });
    }
    let mean = z_eval * &fit.phi;
    let mut prediction = predict_mean(weights_eval, fit.rho, &mean)?;
    prediction.add_scalar_mut(mean_offset);
    Ok(prediction)
}
