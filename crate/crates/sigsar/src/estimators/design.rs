//! Signature design matrices.

use super::EstimatorError;
use crate::sig::{augment_path, path_signature, sig_dim, DiscretePath};
use nalgebra::DMatrix;

/// Which invariance-breaking preprocessing to apply before taking signatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentFlags {
    /// Prepend a zero observation (defeats translation invariance).
    pub basepoint: bool,
    /// Append the sample time as an extra channel (defeats reparametrization
    /// invariance).
    pub time: bool,
}

impl Default for AugmentFlags {
    fn default() -> Self {
        AugmentFlags {
            basepoint: true,
            time: true,
        }
    }
}

impl AugmentFlags {
    pub const NONE: AugmentFlags = AugmentFlags {
        basepoint: false,
        time: false,
    };

    /// Path dimension after augmentation.
    pub fn augmented_dim(&self, p: usize) -> usize {
        p + usize::from(self.time)
    }
}

/// Stacks the flattened truncated signatures of the (augmented) paths into an
/// `N x sig_dim` design matrix. Row `i` starts with the constant level-0
/// coefficient 1; callers working with PCA drop that column, the penalized
/// regression keeps it.
pub fn build_signature_design(
    paths: &[DiscretePath],
    order: usize,
    flags: AugmentFlags,
) -> Result<DMatrix<f64>, EstimatorError> {
    let p = paths.first().map(DiscretePath::dim).unwrap_or(0);
    for path in paths {
        if path.dim() != p {
            return Err(EstimatorError::InconsistentPaths {
                expected: p,
                got: path.dim(),
            });
        }
    }
    let cols = sig_dim(flags.augmented_dim(p), order)?;
    let mut design = DMatrix::zeros(paths.len(), cols);
    for (i, path) in paths.iter().enumerate() {
        let augmented = augment_path(path, flags.basepoint, flags.time);
        let sig = path_signature(&augmented, order)?;
        for (j, v) in sig.flatten().into_iter().enumerate() {
            design[(i, j)] = v;
        }
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sig::sig_dim;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_paths(rng: &mut ChaCha12Rng, n: usize, samples: usize, p: usize) -> Vec<DiscretePath> {
        (0..n)
            .map(|_| {
                let values = DMatrix::from_fn(samples, p, |_, _| rng.random_range(-1.0..1.0));
                DiscretePath::with_uniform_times(values).unwrap()
            })
            .collect()
    }

    #[test]
    fn identical_paths_give_identical_rows() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let path = random_paths(&mut rng, 1, 6, 2).pop().unwrap();
        let paths = vec![path.clone(), path.clone(), path];
        let design = build_signature_design(&paths, 2, AugmentFlags::default()).unwrap();
        for j in 0..design.ncols() {
            assert_eq!(design[(0, j)], design[(1, j)]);
            assert_eq!(design[(0, j)], design[(2, j)]);
        }
    }

    #[test]
    fn order_one_rows_are_one_plus_displacements() {
        let mut rng = ChaCha12Rng::seed_from_u64(62);
        let paths = random_paths(&mut rng, 4, 7, 3);
        let design = build_signature_design(&paths, 1, AugmentFlags::NONE).unwrap();
        assert_eq!(design.ncols(), 4);
        for (i, path) in paths.iter().enumerate() {
            assert_eq!(design[(i, 0)], 1.0);
            let last = path.n_samples() - 1;
            for c in 0..3 {
                let displacement = path.values()[(last, c)] - path.values()[(0, c)];
                assert_abs_diff_eq!(design[(i, 1 + c)], displacement, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn row_length_matches_augmented_dimension() {
        let mut rng = ChaCha12Rng::seed_from_u64(63);
        let paths = random_paths(&mut rng, 2, 5, 2);
        let flags = AugmentFlags::default();
        let design = build_signature_design(&paths, 3, flags).unwrap();
        assert_eq!(design.ncols(), sig_dim(3, 3).unwrap());
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(64);
        let mut paths = random_paths(&mut rng, 1, 5, 2);
        paths.extend(random_paths(&mut rng, 1, 5, 3));
        assert!(matches!(
            build_signature_design(&paths, 2, AugmentFlags::NONE),
            Err(EstimatorError::InconsistentPaths { expected: 2, got: 3 })
        ));
    }
}
