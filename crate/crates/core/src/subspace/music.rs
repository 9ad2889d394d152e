use serde::{Deserialize, Serialize};

use super::covariance::CovarianceMatrix;
use super::evd::hermitian_evd;
use super::search::{pick_peaks, refine_min, Bounds, GridShape};
use super::SpectrumGrid;
use crate::error::{Error, Result};
use crate::exec::{fill_chunks, Exec};
use crate::scene::{wrap_angle, Angles};
use crate::waveform::{UpaSpec, C64};

pub const SPECTRUM_EPS: f64 = 1e-12;

/// Coarse angle grid: azimuth over `[−180°, 180°)`, elevation over
/// `[0°, theta_max_deg]`, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub phi_step_deg: f64,
    pub theta_step_deg: f64,
    pub theta_max_deg: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self {
            phi_step_deg: 0.5,
            theta_step_deg: 0.5,
            theta_max_deg: 90.0,
        }
    }
}

impl AngleGrid {
    pub fn phis(&self) -> Vec<f64> {
        let n = (360.0 / self.phi_step_deg).round() as usize;
        (0..n)
            .map(|i| (-180.0 + i as f64 * self.phi_step_deg).to_radians())
            .collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        let n = (self.theta_max_deg / self.theta_step_deg).round() as usize + 1;
        (0..n).map(|j| (j as f64 * self.theta_step_deg).to_radians()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct MusicEstimate {
    pub angles: Vec<Angles>,
    pub spectrum: SpectrumGrid,
}

/// Projection of steering vectors onto a set of orthonormal columns,
/// evaluated through the Kronecker factors of the UPA response.
struct Projector<'a> {
    upa: &'a UpaSpec,
    /// conjugated basis vectors
    basis: Vec<Vec<C64>>,
}

impl Projector<'_> {
    fn energy(&self, phi: f64, theta: f64) -> f64 {
        let (ox, oy) = Angles::new(phi, theta).direction_cosines();
        let (ax, ay) = self.upa.axis_factors(ox, oy);
        let mx = self.upa.m_x;
        self.basis
            .iter()
            .map(|u| {
                let mut acc = C64::new(0.0, 0.0);
                for (p, y) in ay.iter().enumerate() {
                    let row = &u[p * mx..(p + 1) * mx];
                    let inner: C64 = row.iter().zip(&ax).map(|(c, x)| c * x).sum();
                    acc += y * inner;
                }
                acc.norm_sqr()
            })
            .sum()
    }
}

pub fn music_aoa(r: &CovarianceMatrix, k: usize, upa_sub: &UpaSpec, grid: &AngleGrid) -> Result<MusicEstimate> {
    music_aoa_with(r, k, upa_sub, grid, Exec::default())
}

/// 2-D MUSIC over the angle grid, returning the `k` strongest refined peaks.
pub fn music_aoa_with(
    r: &CovarianceMatrix,
    k: usize,
    upa_sub: &UpaSpec,
    grid: &AngleGrid,
    exec: Exec,
) -> Result<MusicEstimate> {
    let dim = r.dim();
    if dim != upa_sub.len() {
        return Err(Error::DimensionMismatch(format!(
            "covariance of size {dim} for a {}-element array",
            upa_sub.len()
        )));
    }
    if k >= dim {
        return Err(Error::TooFewAntennas {
            antennas: dim,
            sources: k,
        });
    }
    let phis = grid.phis();
    let thetas = grid.thetas();
    if phis.is_empty() || thetas.is_empty() {
        return Err(Error::GridEmpty);
    }
    let evd = hermitian_evd(&r.data)?;
    let column = |c: usize| -> Vec<C64> { evd.eigenvectors.column(c).iter().map(|v| v.conj()).collect() };
    let signal = Projector {
        upa: upa_sub,
        basis: (0..k).map(column).collect(),
    };
    let noise = Projector {
        upa: upa_sub,
        basis: (k..dim).map(column).collect(),
    };
    let use_signal = k < dim - k;
    let denom = |phi: f64, theta: f64| -> f64 {
        if use_signal {
            (dim as f64 - signal.energy(phi, theta)).max(0.0)
        } else {
            noise.energy(phi, theta)
        }
    };

    let nt = thetas.len();
    let mut values = vec![0.0; phis.len() * nt];
    fill_chunks(&mut values, nt, exec, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 1.0 / (denom(phis[i], thetas[j]) + SPECTRUM_EPS);
        }
    });

    let shape = GridShape {
        n1: phis.len(),
        n2: nt,
        wrap1: true,
        wrap2: false,
    };
    let cell = (grid.phi_step_deg.to_radians(), grid.theta_step_deg.to_radians());
    let bounds = Bounds {
        lo: (-4.0 * std::f64::consts::PI, 0.0),
        hi: (4.0 * std::f64::consts::PI, grid.theta_max_deg.to_radians()),
    };
    let angles = pick_peaks(&values, shape, k, 2)
        .into_iter()
        .map(|idx| {
            let start = (phis[idx / nt], thetas[idx % nt]);
            let (phi, theta) = refine_min(|p, t| noise.energy(p, t) + SPECTRUM_EPS, start, cell, bounds);
            Angles::new(wrap_angle(phi), theta)
        })
        .collect();

    Ok(MusicEstimate {
        angles,
        spectrum: SpectrumGrid {
            axis1_name: "phi_rad".into(),
            axis2_name: "theta_rad".into(),
            axis1: phis,
            axis2: thetas,
            values,
        },
    })
}
