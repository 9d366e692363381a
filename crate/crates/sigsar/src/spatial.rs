//! Spatial weight matrices and the SAR linear algebra.
//!
//! The autoregressive structure enters everything through `S(ρ) = I − ρV`
//! for a row-normalized, zero-diagonal weight matrix `V`. This module builds
//! k-nearest-neighbour weights, evaluates `ln|S(ρ)|` by LU factorization with
//! sign tracking, solves SAR systems and materializes `G(ρ) = V S(ρ)^{-1}`
//! for the inference formulas.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Lower end of the admissible autoregressive range for row-normalized
/// weights. The open interval (−1, 1) is shrunk by 0.01 to stay away from the
/// singular boundary.
pub const RHO_MIN: f64 = -0.99;
/// Upper end of the admissible autoregressive range.
pub const RHO_MAX: f64 = 0.99;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("need 1 <= k < N, got k = {k} with N = {n}")]
    InvalidNeighbourCount { k: usize, n: usize },
    #[error("coordinates {0} and {1} coincide")]
    DuplicateCoordinates(usize, usize),
    #[error("S(rho) is singular or has non-positive determinant at rho = {rho}")]
    SingularSystem { rho: f64 },
    #[error("operand has {got} rows, weight matrix is {expected}x{expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Locations of the spatial units, one point in the plane per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinates {
    points: Vec<[f64; 2]>,
}

impl Coordinates {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Coordinates { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn subset(&self, ids: &[usize]) -> Coordinates {
        Coordinates {
            points: ids.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

/// Sparse nonnegative N x N weight matrix with zero diagonal, stored by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialWeights {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    row_normalized: bool,
}

impl SpatialWeights {
    /// Builds directly from per-row (column, weight) entries. Callers are
    /// expected to keep the diagonal empty; this is checked.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, row_normalized: bool) -> Self {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            debug_assert!(row.iter().all(|&(j, _)| j != i && j < n));
        }
        SpatialWeights {
            n,
            rows,
            row_normalized,
        }
    }

    /// The all-zero matrix (no neighbours anywhere).
    pub fn zero(n: usize) -> Self {
        SpatialWeights {
            n,
            rows: vec![Vec::new(); n],
            row_normalized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_normalized(&self) -> bool {
        self.row_normalized
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// True when the matrix has no nonzero entry at all, in which case the
    /// autoregressive parameter is unidentified.
    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    /// If every row holds the same number of nonzeros (as k-NN rows do),
    /// returns that count. Used as the plug-in value of the rate sequence in
    /// the asymptotic variance formulas.
    pub fn uniform_row_count(&self) -> Option<usize> {
        let k = self.rows.first()?.len();
        self.rows.iter().all(|r| r.len() == k).then_some(k)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                dense[(i, j)] = w;
            }
        }
        dense
    }

    /// Sparse matrix-vector product `V x`.
    pub fn mul_vector(&self, x: &DVector<f64>) -> Result<DVector<f64>, SpatialError> {
        if x.len() != self.n {
            return Err(SpatialError::DimensionMismatch {
                got: x.len(),
                expected: self.n,
            });
        }
        let mut out = DVector::zeros(self.n);
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|&(j, w)| w * x[j]).sum();
        }
        Ok(out)
    }

    /// Dense `S(ρ) = I − ρV`.
    pub fn s_matrix(&self, rho: f64) -> DMatrix<f64> {
        let mut s = DMatrix::identity(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                s[(i, j)] -= rho * w;
            }
        }
        s
    }
}

/// Row-normalized k-nearest-neighbour weights: row `i` puts mass `1/k` on the
/// `k` units closest to `i` in Euclidean distance (self excluded), distance
/// ties broken towards the smaller index.
pub fn knn_weights(coords: &Coordinates, k: usize) -> Result<SpatialWeights, SpatialError> {
    let n = coords.len();
    if k == 0 || k >= n {
        return Err(SpatialError::InvalidNeighbourCount { k, n });
    }
    let points = coords.points();
    let mut rows = Vec::with_capacity(n);
    let weight = 1.0 / k as f64;
    for i in 0..n {
        let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for (j, q) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            let dx = points[i][0] - q[0];
            let dy = points[i][1] - q[1];
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 {
                return Err(SpatialError::DuplicateCoordinates(i.min(j), i.max(j)));
            }
            candidates.push((d2, j));
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut row: Vec<(usize, f64)> =
            candidates[..k].iter().map(|&(_, j)| (j, weight)).collect();
        row.sort_by_key(|&(j, _)| j);
        rows.push(row);
    }
    Ok(SpatialWeights {
        n,
        rows,
        row_normalized: true,
    })
}

/// Log-determinant data of a dense LU factorization: `ln|det|` plus the sign
/// of the determinant.
fn lu_log_det(matrix: DMatrix<f64>) -> (f64, f64) {
    let n = matrix.nrows();
    let lu = matrix.lu();
    let mut log_abs = 0.0;
    let mut sign = lu.p().determinant::<f64>();
    let u = lu.u();
    for i in 0..n {
        let d: f64 = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return (f64::NEG_INFINITY, 0.0);
        }
        log_abs += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
    }
    (log_abs, sign)
}

/// `ln|det(I − ρV)|`, failing when the matrix is numerically singular or the
/// determinant is not positive.
pub fn log_det_s(weights: &SpatialWeights, rho: f64) -> Result<f64, SpatialError> {
    let (log_abs, sign) = lu_log_det(weights.s_matrix(rho));
    if sign <= 0.0 || !log_abs.is_finite() {
        return Err(SpatialError::SingularSystem { rho });
    }
    Ok(log_abs)
}

/// Solves `S(ρ) X = rhs` for a matrix right-hand side.
pub fn sar_solve_matrix(
    weights: &SpatialWeights,
    rho: f64,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>, SpatialError> {
    if rhs.nrows() != weights.n {
        return Err(SpatialError::DimensionMismatch {
            got: rhs.nrows(),
            expected: weights.n,
        });
    }
    let lu = weights.s_matrix(rho).lu();
    lu.solve(rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or(SpatialError::SingularSystem { rho })
}

/// Solves `S(ρ) x = rhs` for a vector right-hand side.
pub fn sar_solve(
    weights: &SpatialWeights,
    rho: f64,
    rhs: &DVector<f64>,
) -> Result<DVector<f64>, SpatialError> {
    let cols = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let solved = sar_solve_matrix(weights, rho, &cols)?;
    Ok(DVector::from_column_slice(solved.column(0).as_slice()))
}

/// Dense `G(ρ) = V S(ρ)^{-1}`, the matrix driving the asymptotic variance
/// formulas.
pub fn g_matrix(weights: &SpatialWeights, rho: f64) -> Result<DMatrix<f64>, SpatialError> {
    let inv = weights
        .s_matrix(rho)
        .try_inverse()
        .ok_or(SpatialError::SingularSystem { rho })?;
    let mut g = DMatrix::zeros(weights.n, weights.n);
    for (i, row) in weights.rows.iter().enumerate() {
        for &(j, w) in row {
            for c in 0..weights.n {
                g[(i, c)] += w * inv[(j, c)];
            }
        }
    }
    Ok(g)
}

/// Precomputed `ln|S(ρ)|` on an even grid over `[RHO_MIN, RHO_MAX]`.
///
/// One profile is built per weight matrix and shared by every likelihood
/// maximization on that matrix; the grid supplies the coarse scan and exact
/// factorizations refine around the best grid point.
#[derive(Clone, Debug)]
pub struct LogDetProfile {
    rhos: Vec<f64>,
    log_dets: Vec<f64>,
}

impl LogDetProfile {
    /// Default grid step used by the estimators' coarse scan.
    pub const GRID_STEP: f64 = 0.01;

    pub fn new(weights: &SpatialWeights) -> Result<Self, SpatialError> {
        let steps = ((RHO_MAX - RHO_MIN) / Self::GRID_STEP).round() as usize;
        let mut rhos = Vec::with_capacity(steps + 1);
        let mut log_dets = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let rho = RHO_MIN + i as f64 * Self::GRID_STEP;
            rhos.push(rho);
            log_dets.push(log_det_s(weights, rho)?);
        }
        Ok(LogDetProfile { rhos, log_dets })
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rhos.iter().copied().zip(self.log_dets.iter().copied())
    }

    pub fn step(&self) -> f64 {
        Self::GRID_STEP
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_coords(rng: &mut ChaCha12Rng, n: usize) -> Coordinates {
        Coordinates::new(
            (0..n)
                .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)])
                .collect(),
        )
    }

    fn random_row_normalized(rng: &mut ChaCha12Rng, n: usize, k: usize) -> SpatialWeights {
        knn_weights(&random_coords(rng, n), k).unwrap()
    }

    fn swap_pair() -> SpatialWeights {
        SpatialWeights::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]], true)
    }

    #[test]
    fn knn_on_collinear_points() {
        let coords = Coordinates::new(vec![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let w = knn_weights(&coords, 1).unwrap();
        assert_eq!(w.row(0), &[(1, 1.0)]);
        assert_eq!(w.row(1), &[(0, 1.0)]);
        assert_eq!(w.row(2), &[(1, 1.0)]);
        assert!(w.row_normalized());
    }

    #[test]
    fn knn_rows_sum_to_one_with_zero_diagonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let w = random_row_normalized(&mut rng, 30, 4);
        for i in 0..30 {
            let sum: f64 = w.row(i).iter().map(|&(_, v)| v).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(w.row(i).iter().all(|&(j, v)| j != i && (0.0..=1.0).contains(&v)));
            assert_eq!(w.row(i).len(), 4);
        }
        assert_eq!(w.uniform_row_count(), Some(4));
    }

    #[test]
    fn knn_matches_brute_force_sort() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let coords = random_coords(&mut rng, 5);
        let w = knn_weights(&coords, 2).unwrap();
        let pts = coords.points();
        for i in 0..5 {
            let mut all: Vec<(f64, usize)> = (0..5)
                .filter(|&j| j != i)
                .map(|j| {
                    let dx = pts[i][0] - pts[j][0];
                    let dy = pts[i][1] - pts[j][1];
                    (dx * dx + dy * dy, j)
                })
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut expected: Vec<usize> = all[..2].iter().map(|&(_, j)| j).collect();
            expected.sort_unstable();
            let got: Vec<usize> = w.row(i).iter().map(|&(j, _)| j).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn knn_is_isometry_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let coords = random_coords(&mut rng, 12);
        let (c, s) = (0.6f64, 0.8f64); // rotation by atan2(0.8, 0.6)
        let moved = Coordinates::new(
            coords
                .points()
                .iter()
                .map(|p| [c * p[0] - s * p[1] + 5.0, s * p[0] + c * p[1] - 2.0])
                .collect(),
        );
        let a = knn_weights(&coords, 3).unwrap();
        let b = knn_weights(&moved, 3).unwrap();
        for i in 0..12 {
            let ja: Vec<usize> = a.row(i).iter().map(|&(j, _)| j).collect();
            let jb: Vec<usize> = b.row(i).iter().map(|&(j, _)| j).collect();
            assert_eq!(ja, jb);
        }
    }

    #[test]
    fn knn_rejects_bad_inputs() {
        let coords = Coordinates::new(vec![[0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(
            knn_weights(&coords, 2),
            Err(SpatialError::InvalidNeighbourCount { k: 2, n: 2 })
        ));
        let dup = Coordinates::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]);
        assert!(matches!(
            knn_weights(&dup, 1),
            Err(SpatialError::DuplicateCoordinates(0, 1))
        ));
    }

    #[test]
    fn log_det_at_zero_rho_vanishes() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let w = random_row_normalized(&mut rng, 10, 3);
        assert_abs_diff_eq!(log_det_s(&w, 0.0).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn log_det_two_by_two_closed_form() {
        let w = swap_pair();
        let got = log_det_s(&w, 0.5).unwrap();
        assert_abs_diff_eq!(got, 0.75f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn log_det_matches_eigenvalue_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        let w = random_row_normalized(&mut rng, 6, 2);
        let rho = 0.3;
        let eigs = w.to_dense().complex_eigenvalues();
        let oracle: f64 = eigs
            .iter()
            .map(|lambda| (nalgebra::Complex::new(1.0, 0.0) - rho * lambda).norm().ln())
            .sum();
        assert_abs_diff_eq!(log_det_s(&w, rho).unwrap(), oracle, epsilon = 1e-10);
    }

    #[test]
    fn log_det_fails_at_singular_rho() {
        // det(I - rho V) = 1 - rho^2 vanishes at rho = 1 for the swap matrix.
        let err = log_det_s(&swap_pair(), 1.0);
        assert!(matches!(err, Err(SpatialError::SingularSystem { .. })));
    }

    #[test]
    fn sar_solve_identity_and_swap() {
        let mut rng = ChaCha12Rng::seed_from_u64(26);
        let w = random_row_normalized(&mut rng, 8, 3);
        let rhs = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let x = sar_solve(&w, 0.0, &rhs).unwrap();
        assert_eq!(x, rhs);

        let pair = swap_pair();
        let x = sar_solve(&pair, 0.5, &DVector::from_column_slice(&[1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sar_solve_residual_is_small() {
        let mut rng = ChaCha12Rng::seed_from_u64(27);
        let w = random_row_normalized(&mut rng, 8, 3);
        let rho = 0.6;
        let rhs = DVector::from_fn(8, |_, _| rng.random_range(-2.0..2.0));
        let x = sar_solve(&w, rho, &rhs).unwrap();
        let residual = w.s_matrix(rho) * &x - &rhs;
        let scale = rhs.amax();
        assert!(residual.amax() < 1e-10 * scale);
    }

    #[test]
    fn g_matrix_reduces_to_v_at_zero_rho() {
        let mut rng = ChaCha12Rng::seed_from_u64(28);
        let w = random_row_normalized(&mut rng, 7, 2);
        let g = g_matrix(&w, 0.0).unwrap();
        assert_abs_diff_eq!((g.clone() - w.to_dense()).amax(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.trace(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn g_matrix_satisfies_defining_equation() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let w = random_row_normalized(&mut rng, 6, 2);
        let rho = 0.45;
        let g = g_matrix(&w, rho).unwrap();
        let back = &g * w.s_matrix(rho);
        assert!((back - w.to_dense()).amax() < 1e-10);
    }

    #[test]
    fn log_det_profile_covers_the_whole_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(30);
        let w = random_row_normalized(&mut rng, 12, 4);
        let profile = LogDetProfile::new(&w).unwrap();
        let points: Vec<(f64, f64)> = profile.grid().collect();
        assert_eq!(points.len(), 199);
        assert_abs_diff_eq!(points[0].0, RHO_MIN, epsilon = 1e-12);
        assert_abs_diff_eq!(points.last().unwrap().0, RHO_MAX, epsilon = 1e-12);
        assert!(points.iter().all(|&(_, ld)| ld.is_finite()));
    }

    #[test]
    fn log_det_derivative_matches_negative_trace_of_g() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let w = random_row_normalized(&mut rng, 9, 3);
        for &rho in &[-0.7, -0.2, 0.0, 0.4, 0.8] {
            let h = 1e-5;
            let diff =
                (log_det_s(&w, rho + h).unwrap() - log_det_s(&w, rho - h).unwrap()) / (2.0 * h);
            let tr_g = g_matrix(&w, rho).unwrap().trace();
            assert_abs_diff_eq!(diff, -tr_g, epsilon = 1e-6);
        }
    }
}
