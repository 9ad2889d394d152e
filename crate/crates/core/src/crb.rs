//! Fisher information and Cramer-Rao bounds for the angle, delay and Doppler
//! estimators under complex Gaussian noise with known path gains.

use std::io::Write;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{steering_vector, OfdmGrid, PathParams, UpaSpec, C64};

const PI: f64 = std::f64::consts::PI;
const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    Azimuth(usize),
    Elevation(usize),
    Delay,
    Doppler,
}

/// Symmetric FIM with its parameter ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix {
    pub data: DMatrix<f64>,
    pub params: Vec<Param>,
}

/// Variance bounds in rad², s² or Hz² depending on the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbValues {
    pub params: Vec<Param>,
    pub variances: Vec<f64>,
}

impl CrbValues {
    pub fn get(&self, p: Param) -> Option<f64> {
        self.params.iter().position(|&q| q == p).map(|i| self.variances[i])
    }
}

/// Phase-derivative coefficients of element `p·m_x + q` with respect to
/// azimuth and elevation: `∂α/∂φ = jπ c_φ ∘ α`, `∂α/∂θ = jπ c_θ ∘ α`.
pub fn aoa_derivative_coefficients(upa: &UpaSpec, phi: f64, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let k = 2.0 * upa.spacing;
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let mut c_phi = Vec::with_capacity(upa.len());
    let mut c_theta = Vec::with_capacity(upa.len());
    for p in 0..upa.m_y {
        for q in 0..upa.m_x {
            let (p, q) = (p as f64, q as f64);
            c_phi.push(k * st * (q * sp - p * cp));
            c_theta.push(-k * ct * (q * cp + p * sp));
        }
    }
    (c_phi, c_theta)
}

/// Expected FIM of all path angles, ordered all azimuths then all
/// elevations. Paths couple through the overlap of their delay-Doppler
/// phase sequences, so coincident echoes are not treated as independent.
pub fn fim_aoa(paths: &[PathParams], upa: &UpaSpec, grid: &OfdmGrid, sigma_h2: f64, chi: &[C64]) -> Result<FimMatrix> {
    if !(sigma_h2 > 0.0) {
        return Err(Error::InvalidArgument("noise power must be positive".into()));
    }
    if chi.len() != paths.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gains for {} paths",
            chi.len(),
            paths.len()
        )));
    }
    let l = paths.len();
    let mut amps = Vec::with_capacity(l);
    let mut coeffs = Vec::with_capacity(l);
    let mut steer = Vec::with_capacity(l);
    let mut phasors = Vec::with_capacity(l);
    for (p, c) in paths.iter().zip(chi) {
        let g = p.gain * c;
        if g.norm_sqr() == 0.0 {
            return Err(Error::SingularFim);
        }
        amps.push(g);
        let (cp, ct) = aoa_derivative_coefficients(upa, p.aoa.azimuth, p.aoa.elevation);
        coeffs.push([cp, ct]);
        steer.push(steering_vector(upa, p.aoa.azimuth, p.aoa.elevation));
        phasors.push((grid.delay_phasors(p.delay), grid.doppler_phasors(p.doppler)));
    }
    let overlap = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
    let mut f = DMatrix::zeros(2 * l, 2 * l);
    for i in 0..l {
        for j in i..l {
            let s_ij = if i == j {
                C64::from((grid.n_subcarriers * grid.n_packets) as f64)
            } else {
                overlap(&phasors[i].0, &phasors[j].0) * overlap(&phasors[i].1, &phasors[j].1)
            };
            let pre = amps[i].conj() * amps[j] * s_ij * (2.0 * PI * PI / sigma_h2);
            for (a, ca) in coeffs[i].iter().enumerate() {
                for (b, cb) in coeffs[j].iter().enumerate() {
                    let e: C64 = (0..upa.len())
                        .map(|k| steer[i][k].conj() * steer[j][k] * (ca[k] * cb[k]))
                        .sum();
                    let v = (pre * e).re;
                    let (r, c) = (a * l + i, b * l + j);
                    f[(r, c)] = v;
                    f[(c, r)] = v;
                }
            }
        }
    }
    let params = (0..l).map(Param::Azimuth).chain((0..l).map(Param::Elevation)).collect();
    Ok(FimMatrix { data: f, params })
}

/// Expected FIM of `(τ, f)` for the scalar path sequence
/// `d_{n,m} = β χ e^{j2π m T_p f} e^{−j2π n Δf τ}`.
pub fn fim_delay_doppler(path: &PathParams, grid: &OfdmGrid, sigma2: f64, gain: C64) -> Result<FimMatrix> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("noise power must be positive".into()));
    }
    let amp2 = (path.gain * gain).norm_sqr();
    if amp2 == 0.0 {
        return Err(Error::SingularFim);
    }
    let (mut stt, mut sff, mut stf) = (0.0, 0.0, 0.0);
    for n in 0..grid.n_subcarriers {
        let wn = TAU * n as f64 * grid.delta_f;
        for m in 0..grid.n_packets {
            let wm = TAU * m as f64 * grid.packet_interval;
            stt += wn * wn;
            sff += wm * wm;
            stf += wn * wm;
        }
    }
    let s = 2.0 / sigma2 * amp2;
    let data = Matrix2::new(s * stt, -s * stf, -s * stf, s * sff);
    Ok(FimMatrix {
        data: DMatrix::from_column_slice(2, 2, data.as_slice()),
        params: vec![Param::Delay, Param::Doppler],
    })
}

/// Diagonal of the FIM inverse.
pub fn crb_from_fim(fim: &FimMatrix) -> Result<CrbValues> {
    let chol = fim.data.clone().cholesky().ok_or(Error::SingularFim)?;
    let inv = chol.inverse();
    let variances: Vec<f64> = inv.diagonal().iter().copied().collect();
    if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::SingularFim);
    }
    Ok(CrbValues {
        params: fim.params.clone(),
        variances,
    })
}

/// Inputs for a bound curve of one reflected path.
#[derive(Debug, Clone)]
pub struct CrbScene {
    pub path: PathParams,
    pub chi: C64,
    pub upa: UpaSpec,
    pub grid: OfdmGrid,
    /// `‖w‖²` of the separating combiner, which scales the noise seen by the
    /// delay-Doppler estimator.
    pub combiner_gain: f64,
    /// Noise power is `reference_power / 10^(SINR/10)`.
    pub reference_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbPoint {
    pub sinr_db: f64,
    pub sqrt_crb_phi_deg: f64,
    pub sqrt_crb_theta_deg: f64,
    pub sqrt_crb_tau_s: f64,
    pub sqrt_crb_f_hz: f64,
}

pub fn crb_report(scene: &CrbScene, sinr_db: &[f64]) -> Result<Vec<CrbPoint>> {
    sinr_db
        .iter()
        .map(|&s| {
            let sigma2 = scene.reference_power / 10f64.powf(s / 10.0);
            let aoa = crb_from_fim(&fim_aoa(&[scene.path], &scene.upa, &scene.grid, sigma2, &[scene.chi])?)?;
            let dd = crb_from_fim(&fim_delay_doppler(
                &scene.path,
                &scene.grid,
                sigma2 * scene.combiner_gain,
                scene.chi,
            )?)?;
            Ok(CrbPoint {
                sinr_db: s,
                sqrt_crb_phi_deg: aoa.variances[0].sqrt().to_degrees(),
                sqrt_crb_theta_deg: aoa.variances[1].sqrt().to_degrees(),
                sqrt_crb_tau_s: dd.variances[0].sqrt(),
                sqrt_crb_f_hz: dd.variances[1].sqrt(),
            })
        })
        .collect()
}

pub fn write_crb_csv<W: Write>(points: &[CrbPoint], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sinr_db",
        "sqrt_crb_phi_deg",
        "sqrt_crb_theta_deg",
        "sqrt_crb_tau_s",
        "sqrt_crb_f_hz",
    ])?;
    for p in points {
        w.write_record(
            [
                p.sinr_db,
                p.sqrt_crb_phi_deg,
                p.sqrt_crb_theta_deg,
                p.sqrt_crb_tau_s,
                p.sqrt_crb_f_hz,
            ]
            .map(|v| format!("{v:e}")),
        )?;
    }
    w.flush()
}
