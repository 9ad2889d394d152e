use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::waveform::CMatrix;

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    pub eigenvectors: CMatrix,
}

const MAX_SWEEPS: usize = 10_000;

pub fn hermitian_evd(r: &CMatrix) -> Result<EigenDecomposition> {
    if r.nrows() != r.ncols() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix", r.nrows(), r.ncols())));
    }
    let eig = SymmetricEigen::try_new(r.clone(), f64::EPSILON, MAX_SWEEPS).ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..r.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = eig.eigenvectors.select_columns(&order);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::C64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_and_diagonal() {
        let e = hermitian_evd(&CMatrix::identity(5, 5)).unwrap();
        assert!(e.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = C64::new(1.0, 0.0);
        d[(1, 1)] = C64::new(3.0, 0.0);
        let e = hermitian_evd(&d).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14 && (e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!((e.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = CMatrix::from_fn(8, 8, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let h = &a + a.adjoint();
        let e = hermitian_evd(&h).unwrap();
        let q = &e.eigenvectors;
        let lam = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            8,
            e.eigenvalues.iter().map(|&v| C64::from(v)),
        ));
        let rec = q * lam * q.adjoint();
        assert!((rec - &h).norm() / h.norm() < 1e-10);
        assert!((q.adjoint() * q - CMatrix::identity(8, 8)).norm() < 1e-9);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_non_square() {
        assert!(hermitian_evd(&CMatrix::zeros(2, 3)).is_err());
    }
}
