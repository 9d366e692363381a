//! Functional-data preprocessing shared by the projection estimator and the
//! spline baseline: PCA on coefficient matrices, cubic B-spline smoothing,
//! functional PCA in a Gram-weighted inner product, and trapezoidal
//! quadrature.

use crate::sig::DiscretePath;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuncDataError {
    #[error("need at least two rows for a principal component analysis, got {0}")]
    DegenerateInput(usize),
    #[error("evaluation time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("design matrix is rank deficient ({rank} < {cols})")]
    RankDeficientDesign { rank: usize, cols: usize },
    #[error("Gram matrix is not positive definite")]
    NonPositiveDefiniteGram,
    #[error("paths must share the same time grid")]
    GridMismatch,
    #[error("coefficient row length {cols} is not a multiple of the basis dimension {q}")]
    BlockMismatch { cols: usize, q: usize },
}

/// Threshold under which a column is treated as constant and left unscaled.
const SCALE_GUARD: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Principal component analysis
// ---------------------------------------------------------------------------

/// Centering/scaling data plus orthonormal loadings of a PCA fit.
///
/// `explained_inertia` holds the eigenvalues of the empirical covariance
/// (correlation when standardized) in descending order; scores of new rows
/// are `((x − center) / scale) · loadings`.
#[derive(Clone, Debug)]
pub struct ProjectionBasis {
    center: DVector<f64>,
    scale: DVector<f64>,
    loadings: DMatrix<f64>,
    explained_inertia: DVector<f64>,
}

impl ProjectionBasis {
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    pub fn explained_inertia(&self) -> &DVector<f64> {
        &self.explained_inertia
    }

    pub fn n_components(&self) -> usize {
        self.loadings.ncols()
    }

    /// Inertia of each component as a share of the total.
    pub fn inertia_shares(&self) -> Vec<f64> {
        let total: f64 = self.explained_inertia.sum();
        if total <= 0.0 {
            return vec![0.0; self.explained_inertia.len()];
        }
        self.explained_inertia.iter().map(|v| v / total).collect()
    }

    /// Scores of `rows` on the first `c` components.
    pub fn scores(&self, rows: &DMatrix<f64>, c: usize) -> DMatrix<f64> {
        let c = c.min(self.n_components());
        let mut centered = rows.clone();
        for j in 0..rows.ncols() {
            let (mu, s) = (self.center[j], self.scale[j]);
            for i in 0..rows.nrows() {
                centered[(i, j)] = (centered[(i, j)] - mu) / s;
            }
        }
        centered * self.loadings.columns(0, c)
    }
}

/// PCA of a data matrix via singular value decomposition of the centered
/// (optionally standardized) rows.
pub fn pca_fit(rows: &DMatrix<f64>, standardize: bool) -> Result<ProjectionBasis, FuncDataError> {
    let n = rows.nrows();
    if n < 2 {
        return Err(FuncDataError::DegenerateInput(n));
    }
    let q = rows.ncols();
    let center = DVector::from_fn(q, |j, _| rows.column(j).mean());
    let scale = if standardize {
        DVector::from_fn(q, |j, _| {
            let mu = center[j];
            let ss: f64 = rows.column(j).iter().map(|v| (v - mu) * (v - mu)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            if sd < SCALE_GUARD {
                1.0
            } else {
                sd
            }
        })
    } else {
        DVector::from_element(q, 1.0)
    };
    let mut centered = rows.clone();
    for j in 0..q {
        for i in 0..n {
            centered[(i, j)] = (centered[(i, j)] - center[j]) / scale[j];
        }
    }
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let loadings = v_t.transpose();
    let denom = (n - 1) as f64;
    let explained_inertia = svd.singular_values.map(|s| s * s / denom);
    Ok(ProjectionBasis {
        center,
        scale,
        loadings,
        explained_inertia,
    })
}

/// Number of leading components kept while the cumulative inertia share stays
/// below `threshold`; always at least one.
pub fn select_components(basis: &ProjectionBasis, threshold: f64) -> usize {
    scan_shares(&basis.inertia_shares(), threshold)
}

fn scan_shares(shares: &[f64], threshold: f64) -> usize {
    let mut kept = 0usize;
    let mut cumulative = 0.0;
    while kept < shares.len() && cumulative < threshold {
        cumulative += shares[kept];
        kept += 1;
    }
    kept.max(1)
}

// ---------------------------------------------------------------------------
// Cubic B-splines
// ---------------------------------------------------------------------------

/// Clamped B-spline basis on `[0, 1]` with equally spaced interior knots.
#[derive(Clone, Debug)]
pub struct SplineBasis {
    degree: usize,
    knots: Vec<f64>,
    dim: usize,
}

impl SplineBasis {
    /// Cubic basis with `n_interior` equally spaced interior knots; its
    /// dimension is `n_interior + 4`.
    pub fn cubic(n_interior: usize) -> Self {
        let degree = 3;
        let mut knots = Vec::with_capacity(n_interior + 2 * (degree + 1));
        knots.extend(std::iter::repeat(0.0).take(degree + 1));
        for i in 1..=n_interior {
            knots.push(i as f64 / (n_interior + 1) as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        SplineBasis {
            degree,
            knots,
            dim: n_interior + degree + 1,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn span(&self, t: f64) -> usize {
        // Largest span index with knots[span] <= t < knots[span + 1], taking
        // the final nonempty span at t = 1.
        let d = self.degree;
        let last = self.dim - 1;
        if t >= self.knots[last + 1] {
            return last;
        }
        let mut lo = d;
        let mut hi = last;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.knots[mid] <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Values of all basis functions at `t` (dense row of length `dim`).
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, FuncDataError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(FuncDataError::TimeOutOfRange(t));
        }
        let d = self.degree;
        let span = self.span(t);
        // Triangular Cox-de Boor recurrence on the d+1 active functions.
        let mut active = vec![0.0; d + 1];
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        active[0] = 1.0;
        for j in 1..=d {
            left[j] = t - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let term = if denom == 0.0 { 0.0 } else { active[r] / denom };
                active[r] = saved + right[r + 1] * term;
                saved = left[j - r] * term;
            }
            active[j] = saved;
        }
        let mut row = vec![0.0; self.dim];
        row[(span - d)..=span].copy_from_slice(&active);
        Ok(row)
    }

    /// Gram matrix of pairwise L2 inner products of the basis functions,
    /// integrated exactly by 4-point Gauss-Legendre on each knot interval.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        const NODES: [f64; 4] = [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ];
        const WEIGHTS: [f64; 4] = [
            0.347_854_845_137_453_86,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_86,
        ];
        let mut gram = DMatrix::zeros(self.dim, self.dim);
        for w in self.knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let half = (b - a) / 2.0;
            let mid = (a + b) / 2.0;
            for (node, weight) in NODES.iter().zip(WEIGHTS) {
                let t = mid + half * node;
                let row = self.eval(t).expect("knot interval lies inside [0, 1]");
                for i in 0..self.dim {
                    if row[i] == 0.0 {
                        continue;
                    }
                    for j in 0..self.dim {
                        gram[(i, j)] += weight * half * row[i] * row[j];
                    }
                }
            }
        }
        gram
    }
}

/// Design matrix of basis evaluations at the requested times; each row sums
/// to one.
pub fn bspline_design(basis: &SplineBasis, times: &[f64]) -> Result<DMatrix<f64>, FuncDataError> {
    let mut design = DMatrix::zeros(times.len(), basis.dim());
    for (i, &t) in times.iter().enumerate() {
        let row = basis.eval(t)?;
        for (j, v) in row.into_iter().enumerate() {
            design[(i, j)] = v;
        }
    }
    Ok(design)
}

fn svd_rank(singular_values: &DVector<f64>, rows: usize, cols: usize) -> usize {
    let tol = singular_values.max() * (rows.max(cols) as f64) * f64::EPSILON;
    singular_values.iter().filter(|&&s| s > tol).count()
}

/// Per-channel least-squares spline coefficients of sampled curves; column
/// `c` of the result reproduces channel `c` under the basis.
pub fn curve_smooth(
    values: &DMatrix<f64>,
    times: &[f64],
    basis: &SplineBasis,
) -> Result<DMatrix<f64>, FuncDataError> {
    let design = bspline_design(basis, times)?;
    let svd = design.svd(true, true);
    let rank = svd_rank(&svd.singular_values, values.nrows(), basis.dim());
    if rank < basis.dim() {
        return Err(FuncDataError::RankDeficientDesign {
            rank,
            cols: basis.dim(),
        });
    }
    let mut coeffs = DMatrix::zeros(basis.dim(), values.ncols());
    for c in 0..values.ncols() {
        let y = DVector::from_column_slice(values.column(c).as_slice());
        let sol = svd.solve(&y, 0.0).expect("full-rank solve");
        coeffs.set_column(c, &sol);
    }
    Ok(coeffs)
}

// ---------------------------------------------------------------------------
// Functional PCA
// ---------------------------------------------------------------------------

/// Functional PCA of coefficient rows in the Gram-weighted inner product.
///
/// `eigenfunctions` hold basis coefficients of the principal functions,
/// orthonormal under the block-diagonal Gram metric; `scores` are the
/// projections of the (centered) input curves on them.
#[derive(Clone, Debug)]
pub struct FpcaBasis {
    center: DVector<f64>,
    sqrt_gram: DMatrix<f64>,
    loadings: DMatrix<f64>,
    eigenfunctions: DMatrix<f64>,
    inertia: DVector<f64>,
    scores: DMatrix<f64>,
}

impl FpcaBasis {
    pub fn inertia(&self) -> &DVector<f64> {
        &self.inertia
    }

    pub fn inertia_shares(&self) -> Vec<f64> {
        let total: f64 = self.inertia.sum();
        if total <= 0.0 {
            return vec![0.0; self.inertia.len()];
        }
        self.inertia.iter().map(|v| v / total).collect()
    }

    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfunctions
    }

    pub fn n_components(&self) -> usize {
        self.loadings.ncols()
    }

    /// Training scores computed at fit time, first `c` components.
    pub fn training_scores(&self, c: usize) -> DMatrix<f64> {
        self.scores.columns(0, c.min(self.scores.ncols())).into_owned()
    }

    /// Scores of new coefficient rows on the first `c` components.
    pub fn scores(&self, coeff_rows: &DMatrix<f64>, c: usize) -> DMatrix<f64> {
        let c = c.min(self.n_components());
        let mut centered = coeff_rows.clone();
        for j in 0..centered.ncols() {
            for i in 0..centered.nrows() {
                centered[(i, j)] -= self.center[j];
            }
        }
        apply_block_diag(&centered, &self.sqrt_gram) * self.loadings.columns(0, c)
    }
}

/// Multiplies an `N x (p q)` matrix by `blockdiag(block, ..., block)` with a
/// `q x q` block, channel blocks laid out contiguously.
fn apply_block_diag(rows: &DMatrix<f64>, block: &DMatrix<f64>) -> DMatrix<f64> {
    let q = block.nrows();
    let p = rows.ncols() / q;
    let mut out = DMatrix::zeros(rows.nrows(), rows.ncols());
    for b in 0..p {
        let chunk = rows.columns(b * q, q) * block;
        out.columns_mut(b * q, q).copy_from(&chunk);
    }
    out
}

/// Symmetric square root and inverse square root of a positive-definite
/// matrix.
fn symmetric_sqrt(gram: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), FuncDataError> {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    if max <= 0.0 || eig.eigenvalues.min() <= max * 1e-12 {
        return Err(FuncDataError::NonPositiveDefiniteGram);
    }
    let q = gram.nrows();
    let mut sqrt = DMatrix::zeros(q, q);
    let mut inv_sqrt = DMatrix::zeros(q, q);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        let outer = &v * v.transpose();
        sqrt += lambda.sqrt() * &outer;
        inv_sqrt += outer / lambda.sqrt();
    }
    Ok((sqrt, inv_sqrt))
}

/// Functional PCA of `N x (p q)` coefficient rows under the metric given by a
/// shared `q x q` basis Gram matrix (block-diagonal across channels).
pub fn fpca_scores(
    coeff_rows: &DMatrix<f64>,
    gram: &DMatrix<f64>,
) -> Result<FpcaBasis, FuncDataError> {
    let n = coeff_rows.nrows();
    if n < 2 {
        return Err(FuncDataError::DegenerateInput(n));
    }
    let q = gram.nrows();
    if q == 0 || coeff_rows.ncols() % q != 0 {
        return Err(FuncDataError::BlockMismatch {
            cols: coeff_rows.ncols(),
            q,
        });
    }
    let (sqrt_gram, inv_sqrt_gram) = symmetric_sqrt(gram)?;
    let center = DVector::from_fn(coeff_rows.ncols(), |j, _| coeff_rows.column(j).mean());
    let mut centered = coeff_rows.clone();
    for j in 0..centered.ncols() {
        for i in 0..n {
            centered[(i, j)] -= center[j];
        }
    }
    let transformed = apply_block_diag(&centered, &sqrt_gram);
    let svd = transformed.clone().svd(false, true);
    let loadings = svd.v_t.expect("requested right singular vectors").transpose();
    let denom = (n - 1) as f64;
    let inertia = svd.singular_values.map(|s| s * s / denom);
    let eigenfunctions = {
        // Per-channel back-transform W^{-1/2} v, block by block.
        let p = coeff_rows.ncols() / q;
        let mut out = DMatrix::zeros(loadings.nrows(), loadings.ncols());
        for b in 0..p {
            let chunk = &inv_sqrt_gram * loadings.rows(b * q, q);
            out.rows_mut(b * q, q).copy_from(&chunk);
        }
        out
    };
    let scores = &transformed * &loadings;
    Ok(FpcaBasis {
        center,
        sqrt_gram,
        loadings,
        eigenfunctions,
        inertia,
        scores,
    })
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Trapezoidal rule for the L2 inner product of two sampled curves on a
/// shared time grid: integral of `sum_k x_k(t) theta_k(t)`.
pub fn trapezoid_inner(x: &DiscretePath, theta: &DiscretePath) -> Result<f64, FuncDataError> {
    if x.dim() != theta.dim() || x.n_samples() != theta.n_samples() || x.times() != theta.times() {
        return Err(FuncDataError::GridMismatch);
    }
    let times = x.times();
    let pointwise: Vec<f64> = (0..x.n_samples())
        .map(|j| {
            (0..x.dim())
                .map(|c| x.values()[(j, c)] * theta.values()[(j, c)])
                .sum()
        })
        .collect();
    let mut acc = 0.0;
    for j in 0..times.len() - 1 {
        acc += 0.5 * (times[j + 1] - times[j]) * (pointwise[j] + pointwise[j + 1]);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn uniform_grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn pca_recovers_axis_aligned_covariance() {
        // Columns engineered so the sample covariance is exactly diag(4, 1).
        let rows = DMatrix::from_row_slice(
            5,
            2,
            &[2.0, 1.0, -2.0, 1.0, 2.0, -1.0, -2.0, -1.0, 0.0, 0.0],
        );
        let basis = pca_fit(&rows, false).unwrap();
        assert_abs_diff_eq!(basis.explained_inertia()[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.explained_inertia()[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.loadings()[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.loadings()[(1, 0)].abs(), 0.0, epsilon = 1e-12);

        let standardized = pca_fit(&rows, true).unwrap();
        assert_abs_diff_eq!(standardized.explained_inertia()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(standardized.explained_inertia()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pca_full_rank_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let rows = DMatrix::from_fn(20, 5, |_, _| rng.random_range(-2.0..2.0));
        let basis = pca_fit(&rows, false).unwrap();
        let scores = basis.scores(&rows, basis.n_components());
        let reconstructed = &scores * basis.loadings().transpose();
        for i in 0..20 {
            for j in 0..5 {
                let back = reconstructed[(i, j)] * basis.scale()[j] + basis.center()[j];
                assert_abs_diff_eq!(back, rows[(i, j)], epsilon = 1e-10);
            }
        }
        let gram = basis.loadings().transpose() * basis.loadings();
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn pca_scores_have_diagonal_covariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let rows = DMatrix::from_fn(40, 4, |_, _| rng.random_range(-1.0..1.0));
        let basis = pca_fit(&rows, false).unwrap();
        let scores = basis.scores(&rows, 4);
        let cov = scores.transpose() * &scores / 39.0;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { basis.explained_inertia()[i] } else { 0.0 };
                assert_abs_diff_eq!(cov[(i, j)], want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn pca_rejects_single_row() {
        let rows = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            pca_fit(&rows, false),
            Err(FuncDataError::DegenerateInput(1))
        ));
    }

    fn basis_with_shares(shares: &[f64]) -> ProjectionBasis {
        ProjectionBasis {
            center: DVector::zeros(shares.len()),
            scale: DVector::from_element(shares.len(), 1.0),
            loadings: DMatrix::identity(shares.len(), shares.len()),
            explained_inertia: DVector::from_column_slice(shares),
        }
    }

    #[test]
    fn select_components_tie_rule() {
        let basis = basis_with_shares(&[0.5, 0.3, 0.15, 0.05]);
        assert_eq!(select_components(&basis, 0.95), 3);
        let single = basis_with_shares(&[1.0]);
        assert_eq!(select_components(&single, 0.95), 1);
        assert_eq!(select_components(&single, 0.01), 1);
    }

    #[test]
    fn select_components_matches_linear_scan_and_is_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        for _ in 0..20 {
            let mut shares: Vec<f64> = (0..6).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = shares.iter().sum();
            shares.iter_mut().for_each(|s| *s /= total);
            shares.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let basis = basis_with_shares(&shares);

            let threshold = rng.random_range(0.05..1.0);
            let mut expected = 0usize;
            let mut cum = 0.0;
            for &s in &shares {
                if cum >= threshold {
                    break;
                }
                cum += s;
                expected += 1;
            }
            assert_eq!(select_components(&basis, threshold), expected.max(1));

            let low = select_components(&basis, threshold * 0.5);
            assert!(low <= select_components(&basis, threshold));
        }
    }

    #[test]
    fn bspline_rows_sum_to_one() {
        let basis = SplineBasis::cubic(12);
        assert_eq!(basis.dim(), 16);
        let design = bspline_design(&basis, &uniform_grid(101)).unwrap();
        for i in 0..101 {
            assert_abs_diff_eq!(design.row(i).sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bspline_endpoint_interpolation() {
        let basis = SplineBasis::cubic(10);
        assert_eq!(basis.dim(), 14);
        let row = basis.eval(0.0).unwrap();
        assert_abs_diff_eq!(row[0], 1.0, epsilon = 1e-14);
        assert!(row[1..].iter().all(|&v| v == 0.0));
        let row = basis.eval(1.0).unwrap();
        assert_abs_diff_eq!(row[13], 1.0, epsilon = 1e-14);
        assert!(row[..13].iter().all(|&v| v == 0.0));
    }

    /// Naive Cox-de Boor recursion, used only as a reference here.
    fn reference_bspline(knots: &[f64], j: usize, d: usize, t: f64) -> f64 {
        if d == 0 {
            let closes_range = knots[j + 1] >= 1.0;
            let inside = t >= knots[j] && (t < knots[j + 1] || (closes_range && t <= 1.0));
            return if inside && knots[j] < knots[j + 1] { 1.0 } else { 0.0 };
        }
        let mut value = 0.0;
        let left_den = knots[j + d] - knots[j];
        if left_den > 0.0 {
            value += (t - knots[j]) / left_den * reference_bspline(knots, j, d - 1, t);
        }
        let right_den = knots[j + d + 1] - knots[j + 1];
        if right_den > 0.0 {
            value += (knots[j + d + 1] - t) / right_den * reference_bspline(knots, j + 1, d - 1, t);
        }
        value
    }

    #[test]
    fn bspline_matches_reference_recursion() {
        let basis = SplineBasis::cubic(5);
        for &t in &[0.0, 0.03, 0.17, 0.5, 0.71, 0.99, 1.0] {
            let row = basis.eval(t).unwrap();
            for j in 0..basis.dim() {
                let want = reference_bspline(&basis.knots, j, 3, t);
                assert_abs_diff_eq!(row[j], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bspline_rejects_out_of_range_times() {
        let basis = SplineBasis::cubic(4);
        assert!(matches!(
            bspline_design(&basis, &[0.2, 1.2]),
            Err(FuncDataError::TimeOutOfRange(_))
        ));
    }

    #[test]
    fn curve_smooth_recovers_exact_spline() {
        let mut rng = ChaCha12Rng::seed_from_u64(44);
        let basis = SplineBasis::cubic(6);
        let times = uniform_grid(60);
        let truth = DMatrix::from_fn(basis.dim(), 2, |_, _| rng.random_range(-1.0..1.0));
        let design = bspline_design(&basis, &times).unwrap();
        let values = &design * &truth;
        let coeffs = curve_smooth(&values, &times, &basis).unwrap();
        assert!((coeffs - truth).amax() < 1e-8);
    }

    #[test]
    fn curve_smooth_reproduces_constants() {
        let basis = SplineBasis::cubic(8);
        let times = uniform_grid(50);
        let values = DMatrix::from_element(50, 1, 2.5);
        let coeffs = curve_smooth(&values, &times, &basis).unwrap();
        let fitted = bspline_design(&basis, &times).unwrap() * &coeffs;
        assert!(fitted.iter().all(|&v| (v - 2.5).abs() < 1e-10));
    }

    #[test]
    fn curve_smooth_is_a_least_squares_optimum() {
        let mut rng = ChaCha12Rng::seed_from_u64(45);
        let basis = SplineBasis::cubic(8);
        let times = uniform_grid(101);
        let values = DMatrix::from_fn(101, 1, |i, _| {
            (2.0 * std::f64::consts::PI * times[i]).sin() + 0.1 * rng.random_range(-1.0..1.0)
        });
        let coeffs = curve_smooth(&values, &times, &basis).unwrap();
        let design = bspline_design(&basis, &times).unwrap();
        let best = (&design * &coeffs - &values).norm_squared();
        for _ in 0..10 {
            let bump = DMatrix::from_fn(basis.dim(), 1, |_, _| rng.random_range(-0.05..0.05));
            let worse = (&design * (&coeffs + bump) - &values).norm_squared();
            assert!(best <= worse + 1e-12);
        }
    }

    #[test]
    fn curve_smooth_idempotent_on_fitted_curves() {
        let mut rng = ChaCha12Rng::seed_from_u64(46);
        let basis = SplineBasis::cubic(6);
        let times = uniform_grid(40);
        let noisy = DMatrix::from_fn(40, 1, |_, _| rng.random_range(-1.0..1.0));
        let coeffs = curve_smooth(&noisy, &times, &basis).unwrap();
        let fitted = bspline_design(&basis, &times).unwrap() * &coeffs;
        let again = curve_smooth(&fitted, &times, &basis).unwrap();
        assert!((again - coeffs).amax() < 1e-10);
    }

    #[test]
    fn curve_smooth_rank_deficiency_detected() {
        let basis = SplineBasis::cubic(12);
        // Five samples cannot identify a 16-dimensional basis.
        let times = uniform_grid(5);
        let values = DMatrix::zeros(5, 1);
        assert!(matches!(
            curve_smooth(&values, &times, &basis),
            Err(FuncDataError::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn fpca_with_identity_gram_is_plain_pca() {
        let mut rng = ChaCha12Rng::seed_from_u64(47);
        let rows = DMatrix::from_fn(15, 6, |_, _| rng.random_range(-1.0..1.0));
        let gram = DMatrix::identity(6, 6);
        let fpca = fpca_scores(&rows, &gram).unwrap();
        let pca = pca_fit(&rows, false).unwrap();
        for (a, b) in fpca.inertia().iter().zip(pca.explained_inertia().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let s_f = fpca.training_scores(6);
        let s_p = pca.scores(&rows, 6);
        for c in 0..6 {
            // Principal directions are defined up to sign.
            let diff = (s_f.column(c) - s_p.column(c)).amax();
            let flip = (s_f.column(c) + s_p.column(c)).amax();
            assert!(diff.min(flip) < 1e-9);
        }
    }

    #[test]
    fn fpca_rank_one_has_single_inertia() {
        let mut rng = ChaCha12Rng::seed_from_u64(48);
        let basis = SplineBasis::cubic(3);
        let gram = basis.gram_matrix();
        let q = basis.dim();
        let direction = DVector::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
        let rows = DMatrix::from_fn(12, q, |i, j| (i as f64 - 5.5) * direction[j]);
        let fpca = fpca_scores(&rows, &gram).unwrap();
        let shares = fpca.inertia_shares();
        assert_abs_diff_eq!(shares[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn fpca_eigenfunctions_are_gram_orthonormal() {
        let mut rng = ChaCha12Rng::seed_from_u64(49);
        let basis = SplineBasis::cubic(4);
        let gram = basis.gram_matrix();
        let q = basis.dim();
        let rows = DMatrix::from_fn(25, 2 * q, |_, _| rng.random_range(-1.0..1.0));
        let fpca = fpca_scores(&rows, &gram).unwrap();
        let k = 10.min(fpca.n_components());
        let funs = fpca.eigenfunctions().columns(0, k).into_owned();
        let weighted = apply_block_diag(&funs.transpose(), &gram);
        let products = weighted * funs;
        assert!((products - DMatrix::identity(k, k)).amax() < 1e-10);
    }

    #[test]
    fn fpca_rejects_non_pd_gram() {
        let rows = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            fpca_scores(&rows, &gram),
            Err(FuncDataError::NonPositiveDefiniteGram)
        ));
    }

    fn path_from_fn(n: usize, f: impl Fn(f64) -> f64) -> DiscretePath {
        let times = uniform_grid(n);
        let values = DMatrix::from_fn(n, 1, |i, _| f(times[i]));
        DiscretePath::new(values, times).unwrap()
    }

    #[test]
    fn trapezoid_inner_basic_values() {
        let ones = path_from_fn(101, |_| 1.0);
        assert_eq!(trapezoid_inner(&ones, &ones).unwrap(), 1.0);

        let ramp = path_from_fn(101, |t| t);
        assert_abs_diff_eq!(trapezoid_inner(&ramp, &ones).unwrap(), 0.5, epsilon = 1e-12);

        let sin = path_from_fn(101, |t| (2.0 * std::f64::consts::PI * t).sin());
        let cos = path_from_fn(101, |t| (2.0 * std::f64::consts::PI * t).cos());
        assert_abs_diff_eq!(trapezoid_inner(&sin, &cos).unwrap(), 0.0, epsilon = 1e-4);
    }

    #[test]
    fn trapezoid_inner_is_bilinear() {
        let mut rng = ChaCha12Rng::seed_from_u64(50);
        let times = uniform_grid(31);
        let mk = |rng: &mut ChaCha12Rng| {
            let values = DMatrix::from_fn(31, 2, |_, _| rng.random_range(-1.0..1.0));
            DiscretePath::new(values, times.clone()).unwrap()
        };
        let x = mk(&mut rng);
        let y = mk(&mut rng);
        let theta = mk(&mut rng);
        let (a, b) = (1.75, -0.4);
        let combo = DiscretePath::new(a * x.values() + b * y.values(), times.clone()).unwrap();
        let lhs = trapezoid_inner(&combo, &theta).unwrap();
        let rhs =
            a * trapezoid_inner(&x, &theta).unwrap() + b * trapezoid_inner(&y, &theta).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn trapezoid_inner_rejects_mismatched_grids() {
        let a = path_from_fn(11, |t| t);
        let b = path_from_fn(21, |t| t);
        assert!(matches!(
            trapezoid_inner(&a, &b),
            Err(FuncDataError::GridMismatch)
        ));
    }
}
