//! Ridge-penalized signature SAR regression.
//!
//! The fit alternates exact coordinate maximizations of the penalized
//! objective `Q = l(sigma^2, rho, gamma) - N lambda ||Theta||^2` with
//! `gamma = (alpha, Theta)`:
//!
//! 1. initialize `gamma` by a non-spatial ridge regression,
//! 2. `sigma^2 <- ||S(rho) Y - chi gamma||^2 / N`,
//! 3. `rho <- argmax` of the likelihood in `rho` (1-D search),
//! 4. `gamma <- [chi' chi + 2 N sigma^2 lambda L]^{-1} chi' S(rho) Y` with
//!    `L = diag(0, 1, ..., 1)` leaving the intercept unpenalized,
//!
//! repeated until the relative parameter change falls below tolerance. Each
//! step maximizes `Q` exactly in its own coordinates, so `Q` never decreases
//! across sweeps (up to the 1-D search tolerance).

use super::rho::maximize_rho;
use super::{EstimatorError, SIGMA2_FLOOR};
use crate::sig::{sig_dim, DiscretePath};
use crate::spatial::{log_det_s, LogDetProfile, SpatialWeights};
use nalgebra::{DMatrix, DVector, Dyn};

use super::design::{build_signature_design, AugmentFlags};
use super::predict::predict_penalized;

/// Convergence controls for [`fit_penalized`].
#[derive(Clone, Debug)]
pub struct PenalizedOptions {
    /// Relative change of the full parameter vector below which the sweep
    /// loop stops.
    pub tol: f64,
    /// Maximum number of sweeps; hitting it reports `converged = false`.
    pub max_iter: usize,
    /// Floor for the variance update.
    pub sigma2_floor: f64,
}

impl Default for PenalizedOptions {
    fn default() -> Self {
        PenalizedOptions {
            tol: 1e-6,
            max_iter: 500,
            sigma2_floor: SIGMA2_FLOOR,
        }
    }
}

/// Result of a penalized fit.
#[derive(Clone, Debug)]
pub struct PenalizedFit {
    pub rho: f64,
    pub alpha: f64,
    /// Flattened signature coefficients, leading entry for the constant
    /// level-0 column.
    pub theta: DVector<f64>,
    pub sigma2: f64,
    pub lambda: f64,
    /// Truncation order of the design this fit was run on.
    pub order: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Unpenalized quasi log-likelihood at the final parameters.
    pub loglik: f64,
    /// True when the weight matrix was all-zero and `rho` was pinned at 0.
    pub rho_pinned: bool,
    /// Penalized objective after each sweep.
    pub objective_trace: Vec<f64>,
}

impl PenalizedFit {
    /// `(alpha, Theta)` stacked, matching the column order of `chi = [1, xi]`.
    pub fn gamma(&self) -> DVector<f64> {
        let mut gamma = DVector::zeros(self.theta.len() + 1);
        gamma[0] = self.alpha;
        gamma.rows_mut(1, self.theta.len()).copy_from(&self.theta);
        gamma
    }
}

/// Conditional Gaussian quasi log-likelihood of the truncated signature SAR
/// model:
/// `-(N/2) ln sigma^2 - (N/2) ln 2pi + ln|S(rho)| - ||S(rho)Y - alpha 1 - xi Theta||^2 / (2 sigma^2)`.
pub fn quasi_loglik(
    sigma2: f64,
    rho: f64,
    alpha: f64,
    theta: &DVector<f64>,
    y: &DVector<f64>,
    xi: &DMatrix<f64>,
    weights: &SpatialWeights,
) -> Result<f64, EstimatorError> {
    if sigma2 <= 0.0 {
        return Err(EstimatorError::InvalidSigma2(sigma2));
    }
    if xi.nrows() != y.len() {
        return Err(EstimatorError::DesignResponseMismatch {
            rows: xi.nrows(),
            len: y.len(),
        });
    }
    let log_det = log_det_s(weights, rho)?;
    let vy = weights.mul_vector(y)?;
    let mut r = y - rho * vy - xi * theta;
    r.add_scalar_mut(-alpha);
    let n = y.len() as f64;
    Ok(loglik_from_parts(n, sigma2, log_det, r.norm_squared()))
}

fn loglik_from_parts(n: f64, sigma2: f64, log_det: f64, rss: f64) -> f64 {
    -0.5 * n * sigma2.ln() - 0.5 * n * (2.0 * std::f64::consts::PI).ln() + log_det
        - rss / (2.0 * sigma2)
}

/// Solver for the ridge-regularized coordinate update. With a positive ridge
/// level the normal equations are positive definite; at level zero the
/// minimum-norm least-squares solution is used instead, because signature
/// designs carry the constant level-0 column next to the intercept and the
/// normal equations are singular by construction.
enum GammaSolver {
    Ridge {
        chi_t_chi: DMatrix<f64>,
    },
    LeastSquares {
        svd: nalgebra::SVD<f64, Dyn, Dyn>,
        eps: f64,
    },
}

impl GammaSolver {
    fn new(chi: &DMatrix<f64>, lambda: f64) -> Result<Self, EstimatorError> {
        if lambda > 0.0 {
            Ok(GammaSolver::Ridge {
                chi_t_chi: chi.transpose() * chi,
            })
        } else {
            let svd = chi.clone().svd(true, true);
            let eps = svd.singular_values.max()
                * chi.nrows().max(chi.ncols()) as f64
                * f64::EPSILON;
            let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
            // One collinear direction is tolerated: the intercept column
            // duplicates the signatures' constant level-0 column.
            if rank + 1 < chi.ncols() {
                return Err(EstimatorError::RankDeficientDesign);
            }
            Ok(GammaSolver::LeastSquares { svd, eps })
        }
    }

    /// Maximizes the quadratic part of `Q` in `gamma` for target `S(rho) Y`.
    fn solve(
        &self,
        chi: &DMatrix<f64>,
        target: &DVector<f64>,
        ridge: f64,
    ) -> Result<DVector<f64>, EstimatorError> {
        match self {
            GammaSolver::Ridge { chi_t_chi } => {
                let mut system = chi_t_chi.clone();
                for j in 1..system.ncols() {
                    system[(j, j)] += ridge;
                }
                let rhs = chi.transpose() * target;
                system
                    .cholesky()
                    .map(|ch| ch.solve(&rhs))
                    .ok_or(EstimatorError::RankDeficientDesign)
            }
            GammaSolver::LeastSquares { svd, eps } => svd
                .solve(target, *eps)
                .map(|m| DVector::from_column_slice(m.column(0).as_slice()))
                .map_err(|_| EstimatorError::RankDeficientDesign),
        }
    }
}

/// Fits the ridge-penalized signature SAR regression by iterated closed-form
/// updates. `order` is recorded in the result for bookkeeping; it must match
/// the truncation the design `xi` was built with.
pub fn fit_penalized(
    y: &DVector<f64>,
    xi: &DMatrix<f64>,
    weights: &SpatialWeights,
    lambda: f64,
    order: usize,
    opts: &PenalizedOptions,
    profile: Option<&LogDetProfile>,
) -> Result<PenalizedFit, EstimatorError> {
    if lambda < 0.0 {
        return Err(EstimatorError::NegativeLambda(lambda));
    }
    let n = y.len();
    if xi.nrows() != n {
        return Err(EstimatorError::DesignResponseMismatch {
            rows: xi.nrows(),
            len: n,
        });
    }
    let nf = n as f64;
    let chi = {
        let mut chi = DMatrix::zeros(n, xi.ncols() + 1);
        chi.column_mut(0).fill(1.0);
        chi.columns_mut(1, xi.ncols()).copy_from(xi);
        chi
    };
    let solver = GammaSolver::new(&chi, lambda)?;
    let vy = weights.mul_vector(y)?;
    let rho_pinned = weights.is_zero();

    // Step 1: non-spatial ridge initialization (rho = 0, unit error scale).
    let mut gamma = solver.solve(&chi, y, 2.0 * nf * lambda)?;
    let mut rho = 0.0;
    let mut log_det = 0.0;
    let mut sigma2 = ((y - &chi * &gamma).norm_squared() / nf).max(opts.sigma2_floor);

    let mut converged = false;
    let mut iterations = 0;
    let mut objective_trace = Vec::new();
    let vy_dot_vy = vy.norm_squared();

    for sweep in 1..=opts.max_iter {
        iterations = sweep;
        let mut previous = Vec::with_capacity(gamma.len() + 2);
        previous.push(sigma2);
        previous.push(rho);
        previous.extend(gamma.iter().copied());

        // Step 2: variance at the current (rho, gamma).
        let fitted = &chi * &gamma;
        let residual = y - rho * &vy - &fitted;
        sigma2 = (residual.norm_squared() / nf).max(opts.sigma2_floor);

        // Step 3: 1-D likelihood maximization over rho. The residual sum of
        // squares is quadratic in rho, so only the log-determinant needs
        // factorizations.
        if !rho_pinned {
            let e = y - &fitted;
            let a = e.norm_squared();
            let b = e.dot(&vy);
            let objective = |r: f64, ld: f64| {
                ld - (a - 2.0 * b * r + vy_dot_vy * r * r) / (2.0 * sigma2)
            };
            let current_value = objective(rho, log_det);
            let best = maximize_rho(weights, profile, objective)?;
            if best.value >= current_value {
                rho = best.rho;
                log_det = best.log_det;
            }
        }

        // Step 4: penalized coefficient update at the new (sigma^2, rho).
        let target = y - rho * &vy;
        gamma = solver.solve(&chi, &target, 2.0 * nf * sigma2 * lambda)?;

        let rss = (&target - &chi * &gamma).norm_squared();
        let theta_sq = gamma.rows(1, gamma.len() - 1).norm_squared();
        objective_trace
            .push(loglik_from_parts(nf, sigma2, log_det, rss) - nf * lambda * theta_sq);

        let change = previous
            .iter()
            .zip(std::iter::once(&sigma2).chain(std::iter::once(&rho)).chain(gamma.iter()))
            .map(|(old, new)| (new - old).abs() / (1.0 + old.abs()))
            .fold(0.0f64, f64::max);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let rss = (y - rho * &vy - &chi * &gamma).norm_squared();
    let loglik = loglik_from_parts(nf, sigma2, log_det, rss);
    Ok(PenalizedFit {
        rho,
        alpha: gamma[0],
        theta: gamma.rows(1, gamma.len() - 1).into_owned(),
        sigma2,
        lambda,
        order,
        iterations,
        converged,
        loglik,
        rho_pinned,
        objective_trace,
    })
}

/// Winner of a truncation-order/ridge-level scan.
#[derive(Clone, Debug)]
pub struct PenalizedSelection {
    pub order: usize,
    pub lambda: f64,
    pub validation_mse: f64,
    pub fit: PenalizedFit,
}

/// Fits every `(order, lambda)` candidate on the training block and keeps the
/// pair with the smallest validation mean squared prediction error. Ties go
/// to the smaller order, then the smaller ridge level.
#[allow(clippy::too_many_arguments)]
pub fn select_penalized(
    y_train: &DVector<f64>,
    paths_train: &[DiscretePath],
    y_val: &DVector<f64>,
    paths_val: &[DiscretePath],
    w_train: &SpatialWeights,
    w_val: &SpatialWeights,
    d_max: usize,
    lambda_grid: &[f64],
    flags: AugmentFlags,
    opts: &PenalizedOptions,
    profile: Option<&LogDetProfile>,
) -> Result<PenalizedSelection, EstimatorError> {
    if d_max == 0 || lambda_grid.is_empty() || y_val.is_empty() {
        return Err(EstimatorError::EmptySelectionGrid);
    }
    let p = paths_train.first().map(DiscretePath::dim).unwrap_or(0);
    if paths_val.iter().any(|path| path.dim() != p) {
        return Err(EstimatorError::InconsistentPaths {
            expected: p,
            got: paths_val
                .iter()
                .map(DiscretePath::dim)
                .find(|&d| d != p)
                .unwrap_or(p),
        });
    }
    let xi_train_full = build_signature_design(paths_train, d_max, flags)?;
    let xi_val_full = build_signature_design(paths_val, d_max, flags)?;
    let p_aug = flags.augmented_dim(p);

    let mut best: Option<PenalizedSelection> = None;
    for order in 1..=d_max {
        let cols = sig_dim(p_aug, order)?;
        let xi_train = xi_train_full.columns(0, cols).into_owned();
        let xi_val = xi_val_full.columns(0, cols).into_owned();
        for &lambda in lambda_grid {
            let fit = fit_penalized(y_train, &xi_train, w_train, lambda, order, opts, profile)?;
            let prediction = predict_penalized(&fit, &xi_val, w_val)?;
            let mse = (prediction - y_val).norm_squared() / y_val.len() as f64;
            if !mse.is_finite() {
                continue;
            }
            let improves = match &best {
                None => true,
                Some(current) => {
                    mse < current.validation_mse
                        || (mse == current.validation_mse
                            && (order, lambda) < (current.order, current.lambda))
                }
            };
            if improves {
                best = Some(PenalizedSelection {
                    order,
                    lambda,
                    validation_mse: mse,
                    fit,
                });
            }
        }
    }
    best.ok_or(EstimatorError::EmptySelectionGrid)
}
