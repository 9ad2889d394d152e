use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{CMatrix, CsiTensor, UpaSpec, C64};

/// Hermitian sample covariance together with the number of averaged
/// snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub data: CMatrix,
    pub n_snapshots: usize,
}

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.data.diagonal().iter().map(|v| v.re).sum()
    }
}

pub(crate) fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// `R = (1/(M_s N)) Σ ĥ_{n,m} ĥ_{n,m}^H`.
pub fn sample_covariance(csi: &CsiTensor) -> CovarianceMatrix {
    let s = csi.n_snapshots();
    let x = DMatrix::from_column_slice(csi.n_antennas, s, csi.as_slice());
    let mut r = &x * x.adjoint();
    r /= C64::from(s.max(1) as f64);
    hermitize(&mut r);
    CovarianceMatrix {
        data: r,
        n_snapshots: s,
    }
}

/// Overlapping-subarray plan: `l_x × l_y` subarrays of side `n_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingPlan {
    pub l_x: usize,
    pub l_y: usize,
    pub n_r: usize,
}

impl SmoothingPlan {
    /// Equal subarray counts on both axes of a square array.
    pub fn new(l: usize, upa: &UpaSpec) -> Result<Self> {
        if upa.m_x != upa.m_y {
            return Err(Error::PlanMismatch(format!(
                "smoothing needs a square array, got {}x{}",
                upa.m_x, upa.m_y
            )));
        }
        if l == 0 || l > upa.m_x {
            return Err(Error::PlanMismatch(format!(
                "{l} subarrays per axis on a {}-element axis",
                upa.m_x
            )));
        }
        Ok(Self {
            l_x: l,
            l_y: l,
            n_r: upa.m_x - l + 1,
        })
    }

    pub fn subarray(&self) -> UpaSpec {
        UpaSpec::square(self.n_r)
    }

    fn check(&self, upa: &UpaSpec) -> Result<()> {
        if self.l_x != self.l_y
            || upa.m_x != upa.m_y
            || self.l_x == 0
            || self.n_r == 0
            || self.n_r + self.l_x - 1 != upa.m_x
        {
            return Err(Error::PlanMismatch(format!(
                "plan {self:?} does not fit a {}x{} array",
                upa.m_x, upa.m_y
            )));
        }
        Ok(())
    }
}

/// `Z_l`: `n_r × m` with a single one per row at column `l + row`.
pub fn selection_matrix(n_r: usize, m: usize, l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_r, m, |i, j| if j == l + i { 1.0 } else { 0.0 })
}

/// `R̃ = (1/(L_x L_y)) Σ T R T^H` with `T = Z_y ⊗ Z_x`, evaluated by index
/// gathering rather than explicit products.
pub fn spatial_smooth(r: &CovarianceMatrix, plan: &SmoothingPlan, upa: &UpaSpec) -> Result<CovarianceMatrix> {
    plan.check(upa)?;
    if r.dim() != upa.len() {
        return Err(Error::PlanMismatch(format!(
            "covariance of size {} for a {}-element array",
            r.dim(),
            upa.len()
        )));
    }
    let n = plan.n_r;
    let d = n * n;
    let mut out = CMatrix::zeros(d, d);
    let mut idx = vec![0usize; d];
    for ly in 0..plan.l_y {
        for lx in 0..plan.l_x {
            for p in 0..n {
                for q in 0..n {
                    idx[p * n + q] = (ly + p) * upa.m_x + lx + q;
                }
            }
            for (j, &cj) in idx.iter().enumerate() {
                for (i, &ci) in idx.iter().enumerate() {
                    out[(i, j)] += r.data[(ci, cj)];
                }
            }
        }
    }
    out /= C64::from((plan.l_x * plan.l_y) as f64);
    Ok(CovarianceMatrix {
        data: out,
        n_snapshots: r.n_snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{steering_vector, OfdmGrid};

    fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a.kronecker(b)
    }

    fn eigs(m: &CMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    }

    #[test]
    fn single_snapshot_is_rank_one() {
        let grid = OfdmGrid::new(1, 1, 1e5, 0.0, 1, 28e9).unwrap();
        let mut csi = CsiTensor::zeros(3, grid);
        csi.snapshot_mut(0, 0)
            .copy_from_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(-1.0, 1.0)]);
        let r = sample_covariance(&csi);
        let h = nalgebra::DVector::from_column_slice(csi.snapshot(0, 0));
        assert!((r.data.clone() - &h * h.adjoint()).norm() < 1e-15);
        let e = eigs(&r.data);
        assert!(e[1].abs() < 1e-12 * e[0]);
    }

    #[test]
    fn unit_modulus_scaling_leaves_covariance() {
        let grid = OfdmGrid::new(4, 3, 1e5, 0.0, 1, 28e9).unwrap();
        let mut csi = CsiTensor::zeros(4, grid);
        for (k, s) in csi.snapshots_mut().enumerate() {
            for (a, v) in s.iter_mut().enumerate() {
                *v = C64::new((k * 7 + a) as f64 % 5.0 - 2.0, (k + 3 * a) as f64 % 3.0);
            }
        }
        let r0 = sample_covariance(&csi);
        for (k, s) in csi.snapshots_mut().enumerate() {
            let rot = C64::cis(0.37 * k as f64 + 1.1);
            s.iter_mut().for_each(|v| *v *= rot);
        }
        let r1 = sample_covariance(&csi);
        assert!((r0.data - r1.data).norm() < 1e-15 * 100.0);
    }

    #[test]
    fn white_noise_covariance_near_identity() {
        let grid = OfdmGrid::new(100, 100, 1e5, 0.0, 1, 28e9).unwrap();
        let csi = crate::waveform::synthesize_csi_with_gains(
            &UpaSpec::new(2, 2),
            &grid,
            &[],
            &[],
            &Default::default(),
            1.0,
            5,
        )
        .unwrap();
        let r = sample_covariance(&csi);
        for i in 0..4 {
            assert!((r.data[(i, i)].re - 1.0).abs() < 0.05);
            for j in 0..4 {
                if i != j {
                    assert!(r.data[(i, j)].norm() < 0.05);
                }
            }
        }
    }

    #[test]
    fn smoothing_matches_kronecker_selection() {
        let upa = UpaSpec::square(4);
        let plan = SmoothingPlan::new(2, &upa).unwrap();
        let mut r = CMatrix::from_fn(16, 16, |i, j| C64::new((i * 3 + j) as f64, i as f64 - j as f64));
        r = &r * r.adjoint();
        let cov = CovarianceMatrix {
            data: r.clone(),
            n_snapshots: 1,
        };
        let got = spatial_smooth(&cov, &plan, &upa).unwrap();
        let mut want = CMatrix::zeros(9, 9);
        for ly in 0..2 {
            for lx in 0..2 {
                let t = kron(&selection_matrix(3, 4, ly), &selection_matrix(3, 4, lx)).map(C64::from);
                want += &t * &r * t.adjoint();
            }
        }
        want /= C64::from(4.0);
        assert!((got.data - want).norm() < 1e-9);
        let z = selection_matrix(3, 4, 1);
        for i in 0..3 {
            assert_eq!(z.row(i).sum(), 1.0);
        }
    }

    #[test]
    fn identity_plan_is_noop() {
        let upa = UpaSpec::square(3);
        let plan = SmoothingPlan::new(1, &upa).unwrap();
        let r = CMatrix::from_fn(9, 9, |i, j| C64::new((i + j) as f64, 0.0));
        let cov = CovarianceMatrix {
            data: r.clone(),
            n_snapshots: 4,
        };
        assert_eq!(spatial_smooth(&cov, &plan, &upa).unwrap().data, r);
    }

    #[test]
    fn smoothing_restores_rank_of_coherent_pair() {
        let upa = UpaSpec::square(3);
        let a = steering_vector(&upa, 0.3, 0.6) + steering_vector(&upa, -1.2, 0.9);
        let r = CovarianceMatrix {
            data: &a * a.adjoint(),
            n_snapshots: 1,
        };
        let before = eigs(&r.data);
        assert!(before[1] / before[0] < 1e-12);
        let plan = SmoothingPlan::new(2, &upa).unwrap();
        let sm = spatial_smooth(&r, &plan, &upa).unwrap();
        assert_eq!(sm.dim(), 4);
        let after = eigs(&sm.data);
        assert!(after[1] / after[0] > 1e-6);
    }

    #[test]
    fn plan_errors() {
        assert!(SmoothingPlan::new(2, &UpaSpec::new(3, 4)).is_err());
        assert!(SmoothingPlan::new(5, &UpaSpec::square(4)).is_err());
        let plan = SmoothingPlan::new(2, &UpaSpec::square(4)).unwrap();
        let cov = CovarianceMatrix {
            data: CMatrix::identity(9, 9),
            n_snapshots: 1,
        };
        assert!(matches!(
            spatial_smooth(&cov, &plan, &UpaSpec::square(3)),
            Err(Error::PlanMismatch(_))
        ));
    }
}
