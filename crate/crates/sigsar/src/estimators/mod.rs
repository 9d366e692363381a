//! Quasi-maximum-likelihood estimators for the signature SAR model and the
//! spline baseline, plus the asymptotic inference formulas.
//!
//! Both estimators maximize the conditional Gaussian quasi log-likelihood
//!
//! ```text
//! l(sigma^2, rho, mean) = -(N/2) ln sigma^2 - (N/2) ln 2pi + ln|S(rho)|
//!                         - ||S(rho) Y - mean||^2 / (2 sigma^2)
//! ```
//!
//! with `S(rho) = I - rho V`. The penalized variant regresses on truncated
//! signature coefficients under a ridge penalty and iterates closed-form
//! coordinate updates; the projection variant regresses on PCA scores and
//! concentrates everything but `rho` out in closed form.

mod design;
mod inference;
mod penalized;
mod predict;
mod projection;
mod rho;

pub use design::{build_signature_design, AugmentFlags};
pub use inference::{
    asymptotic_cov_penalized, asymptotic_var_projection, expected_hessian, score_vector,
    wald_covariance, ProjectionInference, ResidualMoments,
};
pub use penalized::{
    fit_penalized, quasi_loglik, select_penalized, PenalizedFit, PenalizedOptions,
    PenalizedSelection,
};
pub use predict::{predict_mean, predict_penalized, predict_projection};
pub use projection::{fit_projection, ProjectionFit};

use crate::sig::SigError;
use crate::spatial::SpatialError;
use thiserror::Error;

/// Floor applied to variance estimates so the log-likelihood stays finite
/// under exact interpolation.
pub const SIGMA2_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error("design matrix has {rows} rows but the response has {len}")]
    DesignResponseMismatch { rows: usize, len: usize },
    #[error("design matrix is rank deficient; the unpenalized system has no unique solution")]
    RankDeficientDesign,
    #[error("sigma^2 must be positive, got {0}")]
    InvalidSigma2(f64),
    #[error("ridge level must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("paths disagree in dimension: expected {expected}, found {got}")]
    InconsistentPaths { expected: usize, got: usize },
    #[error("model selection needs a truncation order >= 1 and a nonempty ridge grid")]
    EmptySelectionGrid,
    #[error("expected-Hessian system is singular")]
    SingularHessian,
}
