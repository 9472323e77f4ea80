//! Factorization of diffusion matrices into noise amplitudes, `B Bᵀ = D`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionFactorization {
    /// The symmetrized input.
    pub covariance: DMatrix<f64>,
    pub factor: DMatrix<f64>,
    /// Sum of the magnitudes of eigenvalues clipped to zero.
    pub clipped_mass: f64,
}

impl DiffusionFactorization {
    /// `clipped_mass / trace`, zero for a vanishing matrix.
    pub fn clipped_fraction(&self) -> f64 {
        let tr = self.covariance.trace().abs();
        if tr > 0.0 {
            self.clipped_mass / tr
        } else {
            0.0
        }
    }
}

/// Eigen-decomposes `D`, clips negative eigenvalues and returns `B = V √Λ₊`.
pub fn factorize_diffusion(d: &DMatrix<f64>) -> Result<DiffusionFactorization> {
    if !d.is_square() {
        return Err(Error::InvalidParameter(
            "diffusion matrix must be square".into(),
        ));
    }
    let scale = d.amax();
    let asymmetry = (d - d.transpose()).amax();
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::AsymmetricDiffusion {
            asymmetry,
            tolerance: SYMMETRY_TOL * scale,
        });
    }
    let n = d.nrows();
    let sym = (d + d.transpose()) * 0.5;

    let off_diagonal_zero = (0..n).all(|i| (0..n).all(|j| i == j || sym[(i, j)] == 0.0));
    if off_diagonal_zero {
        let mut clipped_mass = 0.0;
        let diag = sym.diagonal().map(|v| {
            if v < 0.0 {
                clipped_mass -= v;
                0.0
            } else {
                v.sqrt()
            }
        });
        return Ok(DiffusionFactorization {
            covariance: sym,
            factor: DMatrix::from_diagonal(&diag),
            clipped_mass,
        });
    }

    let eig = sym.clone().symmetric_eigen();
    let mut clipped_mass = 0.0;
    let mut factor = eig.eigenvectors;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let root = if lambda < 0.0 {
            clipped_mass -= lambda;
            0.0
        } else {
            lambda.sqrt()
        };
        factor.column_mut(k).scale_mut(root);
    }
    Ok(DiffusionFactorization {
        covariance: sym,
        factor,
        clipped_mass,
    })
}

/// Rank-revealing residual of `m` against its best rank-1 approximation,
/// relative to `max|m|`.
pub fn rank_one_residual(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("non-empty");
    let v = eig.eigenvectors.column(k);
    let approx = &v * v.transpose() * eig.eigenvalues[k];
    (m - approx).amax() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn reconstruct(f: &DiffusionFactorization) -> DMatrix<f64> {
        &f.factor * f.factor.transpose()
    }

    #[test]
    fn zero_matrix() {
        let f = factorize_diffusion(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(f.factor.amax(), 0.0);
        assert_eq!(f.clipped_mass, 0.0);
    }

    #[test]
    fn rank_one_exact() {
        let v = DVector::from_vec(vec![0.3, -0.8, 0.1, 0.55, -0.2]);
        let d = &v * v.transpose() * 2.7e-3;
        let f = factorize_diffusion(&d).unwrap();
        assert!((reconstruct(&f) - &d).amax() <= 1e-12 * d.amax());
        assert!(rank_one_residual(&d) < 1e-12);
    }

    #[test]
    fn rejects_asymmetry() {
        let mut d = DMatrix::identity(3, 3);
        d[(0, 1)] = 1e-6;
        assert!(matches!(
            factorize_diffusion(&d),
            Err(Error::AsymmetricDiffusion { .. })
        ));
    }

    #[test]
    fn clips_negative_eigenvalues() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        let f = factorize_diffusion(&d).unwrap();
        assert!((f.clipped_mass - 1e-3).abs() < 1e-15);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let f = factorize_diffusion(&d).unwrap();
        assert!((f.clipped_mass - 1.0).abs() < 1e-12);
        let r = reconstruct(&f);
        assert!((r[(0, 0)] - 1.5).abs() < 1e-12);
    }

    fn psd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let a = DMatrix::from_vec(n, n, v);
            &a * a.transpose()
        })
    }

    proptest! {
        #[test]
        fn random_psd_reconstructs(d in psd(7)) {
            let f = factorize_diffusion(&d).unwrap();
            prop_assert!((reconstruct(&f) - &d).amax() < 1e-10 * d.amax());
        }

        #[test]
        fn diagonal_fast_path(diag in proptest::collection::vec(0.0f64..5.0, 1..8)) {
            let d = DMatrix::from_diagonal(&DVector::from_vec(diag));
            let f = factorize_diffusion(&d).unwrap();
            prop_assert!((reconstruct(&f) - &d).amax() <= 1e-15 * d.amax().max(1.0));
        }
    }
}
