//! Asymptotic inference: analytic score, expected Hessian, and plug-in
//! covariance estimates for both estimators.
//!
//! Parameter order everywhere is `(sigma^2, rho, gamma)` with
//! `gamma = (alpha, Theta)` for the penalized fit. The covariance building
//! blocks are `G = V S(rho)^{-1}`, its diagonal, and the third/fourth moments
//! of the disturbances estimated from fitted residuals.

use super::penalized::PenalizedFit;
use super::projection::ProjectionFit;
use super::EstimatorError;
use crate::spatial::{g_matrix, SpatialWeights};
use nalgebra::{DMatrix, DVector};

/// Sample third/fourth central moments of fitted residuals, plugged into the
/// covariance formulas in place of the disturbance moments.
#[derive(Clone, Copy, Debug)]
pub struct ResidualMoments {
    pub third: f64,
    pub fourth: f64,
}

impl ResidualMoments {
    pub fn from_residuals(residuals: &DVector<f64>) -> Self {
        let n = residuals.len() as f64;
        let mean = residuals.mean();
        let (mut third, mut fourth) = (0.0, 0.0);
        for r in residuals.iter() {
            let d = r - mean;
            third += d * d * d;
            fourth += d * d * d * d;
        }
        ResidualMoments {
            third: third / n,
            fourth: fourth / n,
        }
    }

    /// Moments of a centered Gaussian with the given variance.
    pub fn gaussian(sigma2: f64) -> Self {
        ResidualMoments {
            third: 0.0,
            fourth: 3.0 * sigma2 * sigma2,
        }
    }
}

/// Analytic gradient of the unpenalized quasi log-likelihood at
/// `(sigma^2, rho, gamma)`; `chi` is the full design including the intercept
/// column.
pub fn score_vector(
    sigma2: f64,
    rho: f64,
    gamma: &DVector<f64>,
    y: &DVector<f64>,
    chi: &DMatrix<f64>,
    weights: &SpatialWeights,
) -> Result<DVector<f64>, EstimatorError> {
    if sigma2 <= 0.0 {
        return Err(EstimatorError::InvalidSigma2(sigma2));
    }
    let n = y.len() as f64;
    let vy = weights.mul_vector(y)?;
    let residual = y - rho * &vy - chi * gamma;
    let tr_g = g_matrix(weights, rho)?.trace();

    let mut score = DVector::zeros(chi.ncols() + 2);
    score[0] = -n / (2.0 * sigma2) + residual.norm_squared() / (2.0 * sigma2 * sigma2);
    score[1] = -tr_g + vy.dot(&residual) / sigma2;
    let grad_gamma = chi.transpose() * &residual / sigma2;
    score.rows_mut(2, chi.ncols()).copy_from(&grad_gamma);
    Ok(score)
}

/// Expected Hessian of the unpenalized quasi log-likelihood, the symmetric
/// block matrix
///
/// ```text
/// [ -N/(2 s^4)   -tr(G)/s^2                                    0          ]
/// [     *        -tr((G+G')G) - ||G chi gamma||^2/s^2   -(chi' G chi gamma)'/s^2 ]
/// [     *                *                              -chi' chi/s^2     ]
/// ```
pub fn expected_hessian(
    sigma2: f64,
    rho: f64,
    gamma: &DVector<f64>,
    chi: &DMatrix<f64>,
    weights: &SpatialWeights,
) -> Result<DMatrix<f64>, EstimatorError> {
    if sigma2 <= 0.0 {
        return Err(EstimatorError::InvalidSigma2(sigma2));
    }
    let n = chi.nrows() as f64;
    let m = chi.ncols();
    let g = g_matrix(weights, rho)?;
    let gcg = &g * (chi * gamma);
    let tr_g = g.trace();
    let tr_sym = (g.transpose() * &g).trace() + (&g * &g).trace();

    let mut hessian = DMatrix::zeros(m + 2, m + 2);
    hessian[(0, 0)] = -n / (2.0 * sigma2 * sigma2);
    hessian[(0, 1)] = -tr_g / sigma2;
    hessian[(1, 1)] = -tr_sym - gcg.norm_squared() / sigma2;
    let cross = chi.transpose() * &gcg / sigma2;
    for j in 0..m {
        hessian[(1, 2 + j)] = -cross[j];
    }
    let chi_t_chi = chi.transpose() * chi;
    for i in 0..m {
        for j in 0..m {
            hessian[(2 + i, 2 + j)] = -chi_t_chi[(i, j)] / sigma2;
        }
    }
    // Mirror the upper triangle.
    for i in 0..m + 2 {
        for j in 0..i {
            hessian[(i, j)] = hessian[(j, i)];
        }
    }
    Ok(hessian)
}

/// Plug-in covariance of the normalized score for the penalized estimator,
/// assembled from `G`, the design, the fitted coefficients and the residual
/// moments.
pub fn asymptotic_cov_penalized(
    fit: &PenalizedFit,
    chi: &DMatrix<f64>,
    weights: &SpatialWeights,
    moments: &ResidualMoments,
) -> Result<DMatrix<f64>, EstimatorError> {
    sigma_n(
        fit.sigma2,
        fit.rho,
        &fit.gamma(),
        chi,
        weights,
        moments,
    )
}

fn sigma_n(
    sigma2: f64,
    rho: f64,
    gamma: &DVector<f64>,
    chi: &DMatrix<f64>,
    weights: &SpatialWeights,
    moments: &ResidualMoments,
) -> Result<DMatrix<f64>, EstimatorError> {
    if sigma2 <= 0.0 {
        return Err(EstimatorError::InvalidSigma2(sigma2));
    }
    let n = chi.nrows() as f64;
    let m = chi.ncols();
    let (m3, m4) = (moments.third, moments.fourth);
    let s4 = sigma2 * sigma2;
    let s6 = s4 * sigma2;
    let s8 = s4 * s4;

    let g = g_matrix(weights, rho)?;
    let gcg = &g * (chi * gamma);
    let tr_g = g.trace();
    let tr_sym = (g.transpose() * &g).trace() + (&g * &g).trace();
    let sum_gii2: f64 = (0..g.nrows()).map(|i| g[(i, i)] * g[(i, i)]).sum();
    let sum_gii_gcg: f64 = (0..g.nrows()).map(|i| g[(i, i)] * gcg[i]).sum();
    let column_sums = chi.transpose() * DVector::from_element(chi.nrows(), 1.0);
    let chi_t_gcg = chi.transpose() * &gcg;
    let diag_weighted_rows = {
        let mut acc = DVector::<f64>::zeros(m);
        for i in 0..chi.nrows() {
            let gii = g[(i, i)];
            if gii != 0.0 {
                for j in 0..m {
                    acc[j] += gii * chi[(i, j)];
                }
            }
        }
        acc
    };

    let mut sigma = DMatrix::zeros(m + 2, m + 2);
    sigma[(0, 0)] = (m4 - s4) / (4.0 * s8);
    sigma[(0, 1)] = (m4 - s4) * tr_g / (2.0 * n * s6) + m3 * gcg.sum() / (2.0 * n * s6);
    for j in 0..m {
        sigma[(0, 2 + j)] = m3 * column_sums[j] / (2.0 * n * s6);
    }
    sigma[(1, 1)] = gcg.norm_squared() / (n * sigma2)
        + (m4 - s4) * sum_gii2 / (n * s4)
        + tr_sym / n
        + 2.0 * m3 * sum_gii_gcg / (n * s4);
    for j in 0..m {
        sigma[(1, 2 + j)] =
            chi_t_gcg[j] / (n * sigma2) + m3 * diag_weighted_rows[j] / (n * s4);
    }
    let chi_t_chi = chi.transpose() * chi;
    for i in 0..m {
        for j in 0..m {
            sigma[(2 + i, 2 + j)] = chi_t_chi[(i, j)] / (n * sigma2);
        }
    }
    for i in 0..m + 2 {
        for j in 0..i {
            sigma[(i, j)] = sigma[(j, i)];
        }
    }
    Ok(sigma)
}

/// Sandwich covariance of the penalized parameter estimates:
/// `(E(A) + P2)^{-1} Sigma_N (E(A) + P2)^{-1} / N` with
/// `E(A) = -expected_hessian / N` and `P2 = diag(0, 0, 0, 2 lambda, ...)`.
/// Wald intervals read their standard errors off the diagonal.
pub fn wald_covariance(
    fit: &PenalizedFit,
    chi: &DMatrix<f64>,
    weights: &SpatialWeights,
    moments: &ResidualMoments,
) -> Result<DMatrix<f64>, EstimatorError> {
    let n = chi.nrows() as f64;
    let gamma = fit.gamma();
    let sigma = sigma_n(fit.sigma2, fit.rho, &gamma, chi, weights, moments)?;
    let hessian = expected_hessian(fit.sigma2, fit.rho, &gamma, chi, weights)?;
    let mut curvature = -hessian / n;
    // The intercept (index 2) stays unpenalized.
    for j in 3..curvature.ncols() {
        curvature[(j, j)] += 2.0 * fit.lambda;
    }
    let inverse = curvature
        .try_inverse()
        .ok_or(EstimatorError::SingularHessian)?;
    Ok(&inverse * sigma * &inverse / n)
}

/// Plug-in variance report for the projection estimator.
///
/// `s_rho2` and `s_sigma2` are the asymptotic variances of the normalized
/// `rho` and `sigma^2` estimates; both are undefined (and the `degenerate`
/// flag set) when the weight matrix carries no spatial structure. The
/// quadratic-form statistic requires the true coefficient vector and is only
/// available in simulations.
#[derive(Clone, Debug)]
pub struct ProjectionInference {
    pub s_n2: f64,
    pub delta_n: f64,
    pub s_rho2: Option<f64>,
    pub s_sigma2: Option<f64>,
    pub phi_stat: Option<f64>,
    pub degenerate: bool,
    pub h_n: f64,
}

/// Assembles the projection estimator's asymptotic variance quantities with
/// `Gamma` estimated by `Z'Z/N` and residual moments from the fit itself.
/// `h_n` is the weight-sparsity rate (the neighbour count for k-NN weights).
pub fn asymptotic_var_projection(
    fit: &ProjectionFit,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    weights: &SpatialWeights,
    h_n: f64,
    phi_true: Option<&DVector<f64>>,
) -> Result<ProjectionInference, EstimatorError> {
    if fit.sigma2 <= 0.0 {
        return Err(EstimatorError::InvalidSigma2(fit.sigma2));
    }
    let n = y.len() as f64;
    let sigma2 = fit.sigma2;
    let s4 = sigma2 * sigma2;
    let vy = weights.mul_vector(y)?;
    let residuals = y - fit.rho * vy - z * &fit.phi;
    let moments = ResidualMoments::from_residuals(&residuals);

    let g = g_matrix(weights, fit.rho)?;
    let tr_g = g.trace();
    let tr_ggt = (g.transpose() * &g).trace();
    let tr_sym = tr_ggt + (&g * &g).trace();
    let sum_gii2: f64 = (0..g.nrows()).map(|i| g[(i, i)] * g[(i, i)]).sum();

    let gamma_hat = z.transpose() * z / n;
    let phi_quad = (fit.phi.transpose() * &gamma_hat * &fit.phi)[(0, 0)];

    let s_n2 = (moments.fourth - 2.0 * s4) * sum_gii2
        + tr_g * tr_g / n * (s4 - moments.fourth - sigma2 * phi_quad)
        + tr_ggt * (s4 + sigma2 * phi_quad);
    let delta_n = (tr_ggt - tr_g * tr_g / n) * phi_quad;

    let normalizer = h_n / n * (delta_n + sigma2 * tr_sym);
    let degenerate = normalizer.abs() < 1e-14;
    let (s_rho2, s_sigma2) = if degenerate {
        (None, None)
    } else {
        let s_rho2 = s_n2 * h_n / n / (normalizer * normalizer);
        let s_sigma2 =
            moments.fourth - s4 + 4.0 * s_rho2 * h_n * (tr_g / n) * (tr_g / n);
        (Some(s_rho2), Some(s_sigma2))
    };

    let phi_stat = phi_true.map(|phi0| {
        let diff = &fit.phi - phi0;
        let c = z.ncols() as f64;
        let quad = (diff.transpose() * &gamma_hat * diff)[(0, 0)];
        (n * quad - sigma2 * c) / (2.0 * c).sqrt()
    });

    Ok(ProjectionInference {
        s_n2,
        delta_n,
        s_rho2,
        s_sigma2,
        phi_stat,
        degenerate,
        h_n,
    })
}
