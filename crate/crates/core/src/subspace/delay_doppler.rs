use serde::{Deserialize, Serialize};

use super::covariance::hermitize;
use super::evd::hermitian_evd;
use super::mdl::mdl_order;
use super::music::SPECTRUM_EPS;
use super::search::{pick_peaks, refine_min, Bounds, GridShape};
use super::SpectrumGrid;
use crate::error::{Error, Result};
use crate::exec::{fill_chunks, Exec};
use crate::waveform::{CMatrix, OfdmGrid, C64};

const TAU: f64 = std::f64::consts::TAU;

/// Uniform delay and Doppler search axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdGrid {
    pub tau_start: f64,
    pub tau_step: f64,
    pub n_tau: usize,
    pub f_start: f64,
    pub f_step: f64,
    pub n_f: usize,
}

impl DdGrid {
    /// Principal intervals `[0, 1/Δf)` and `(−1/(2T_p), 1/(2T_p)]` with cells
    /// `1/(4NΔf)` and `1/(4 M_s T_p)`.
    pub fn principal(grid: &OfdmGrid) -> Self {
        let n_tau = 4 * grid.n_subcarriers;
        let n_f = 4 * grid.n_packets;
        let f_step = 1.0 / (n_f as f64 * grid.packet_interval);
        Self {
            tau_start: 0.0,
            tau_step: 1.0 / (n_tau as f64 * grid.delta_f),
            n_tau,
            f_start: -0.5 / grid.packet_interval + f_step,
            f_step,
            n_f,
        }
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.n_tau)
            .map(|i| self.tau_start + i as f64 * self.tau_step)
            .collect()
    }

    pub fn dopplers(&self) -> Vec<f64> {
        (0..self.n_f).map(|i| self.f_start + i as f64 * self.f_step).collect()
    }

    fn periodic(&self, grid: &OfdmGrid) -> (bool, bool) {
        let close = |a: f64, b: f64| ((a - b) / b).abs() < 1e-9;
        (
            close(self.n_tau as f64 * self.tau_step, 1.0 / grid.delta_f),
            close(self.n_f as f64 * self.f_step, 1.0 / grid.packet_interval),
        )
    }
}

/// Sub-block size for 2-D smoothing and the cap on the signal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DdOptions {
    pub sub_n: usize,
    pub sub_m: usize,
    pub max_order: usize,
}

impl DdOptions {
    pub fn half(grid: &OfdmGrid) -> Self {
        Self {
            sub_n: (grid.n_subcarriers / 2).max(1),
            sub_m: (grid.n_packets / 2).max(1),
            max_order: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdEstimate {
    /// seconds, in `[0, 1/Δf)`
    pub tau: f64,
    /// Hz, in `(−1/(2T_p), 1/(2T_p)]`
    pub doppler: f64,
    pub order: usize,
    pub spectrum: SpectrumGrid,
}

/// Covariance of vectorized `sub_n × sub_m` windows of `h` (subcarrier index
/// fastest). Each lag is accumulated once over the whole matrix and the
/// window sums are read off a summed-area table.
pub fn subblock_covariance(h: &CMatrix, sub_n: usize, sub_m: usize) -> Result<CMatrix> {
    let (n, m) = h.shape();
    check_subblock(n, m, sub_n, sub_m)?;
    let (kn, km) = (n - sub_n + 1, m - sub_m + 1);
    let d = sub_n * sub_m;
    let norm = 1.0 / (kn * km) as f64;
    let mut r = CMatrix::zeros(d, d);
    let mut sat = vec![C64::new(0.0, 0.0); (n + 1) * (m + 1)];
    let w = m + 1;
    for dn in -(sub_n as isize - 1)..sub_n as isize {
        for dm in -(sub_m as isize - 1)..sub_m as isize {
            if dn < 0 || (dn == 0 && dm < 0) {
                continue;
            }
            // sat[(a+1)*w + (b+1)] = Σ_{a'≤a, b'≤b} h[a',b'] conj(h[a'−dn, b'−dm])
            for a in 0..n {
                let mut row = C64::new(0.0, 0.0);
                for b in 0..m {
                    let (a2, b2) = (a as isize - dn, b as isize - dm);
                    if a2 >= 0 && b2 >= 0 && (b2 as usize) < m {
                        row += h[(a, b)] * h[(a2 as usize, b2 as usize)].conj();
                    }
                    sat[(a + 1) * w + b + 1] = sat[a * w + b + 1] + row;
                }
            }
            let box_sum = |a0: usize, b0: usize| {
                let (a1, b1) = (a0 + kn, b0 + km);
                sat[a1 * w + b1] - sat[a0 * w + b1] - sat[a1 * w + b0] + sat[a0 * w + b0]
            };
            for n2 in 0..sub_n {
                let n1 = n2 as isize + dn;
                if n1 < 0 || n1 >= sub_n as isize {
                    continue;
                }
                for m2 in 0..sub_m {
                    let m1 = m2 as isize + dm;
                    if m1 < 0 || m1 >= sub_m as isize {
                        continue;
                    }
                    let (n1, m1) = (n1 as usize, m1 as usize);
                    let v = box_sum(n1, m1) * norm;
                    let (i, j) = (m1 * sub_n + n1, m2 * sub_n + n2);
                    r[(i, j)] = v;
                    r[(j, i)] = v.conj();
                }
            }
        }
    }
    hermitize(&mut r);
    Ok(r)
}

/// Reference implementation: explicit outer products of every window.
pub fn subblock_covariance_direct(h: &CMatrix, sub_n: usize, sub_m: usize) -> Result<CMatrix> {
    let (n, m) = h.shape();
    check_subblock(n, m, sub_n, sub_m)?;
    let d = sub_n * sub_m;
    let mut r = CMatrix::zeros(d, d);
    let mut count = 0usize;
    for i in 0..=n - sub_n {
        for j in 0..=m - sub_m {
            let x = nalgebra::DVector::from_fn(d, |k, _| h[(i + k % sub_n, j + k / sub_n)]);
            r += &x * x.adjoint();
            count += 1;
        }
    }
    Ok(r / C64::from(count as f64))
}

fn check_subblock(n: usize, m: usize, sub_n: usize, sub_m: usize) -> Result<()> {
    if sub_n == 0 || sub_m == 0 || sub_n > n || sub_m > m || sub_n * sub_m < 2 {
        return Err(Error::DegenerateSubblock { sub_n, sub_m, n, m });
    }
    Ok(())
}

/// Steering factor `a_τ[n] = exp(−j2π n Δf τ)`.
fn tau_factor(len: usize, delta_f: f64, tau: f64) -> Vec<C64> {
    (0..len).map(|n| C64::cis(-TAU * n as f64 * delta_f * tau)).collect()
}

/// Steering factor `a_f[m] = exp(j2π m T_p f)`.
fn doppler_factor(len: usize, t_p: f64, f: f64) -> Vec<C64> {
    (0..len).map(|m| C64::cis(TAU * m as f64 * t_p * f)).collect()
}

/// Power iteration from a fixed start vector; deterministic for a given
/// input.
fn dominant_eigenvector(r: &CMatrix) -> nalgebra::DVector<C64> {
    let d = r.nrows();
    let start = (0..d)
        .max_by(|&a, &b| r[(a, a)].re.total_cmp(&r[(b, b)].re).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut v = r.column(start).into_owned();
    let n0 = v.norm();
    if n0 == 0.0 {
        v = nalgebra::DVector::from_element(d, C64::new(1.0, 0.0));
    }
    v /= C64::from(v.norm());
    for _ in 0..1000 {
        let mut w = r * &v;
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        w /= C64::from(nw);
        let overlap = v.dotc(&w).norm();
        v = w;
        if 1.0 - overlap < 1e-15 {
            break;
        }
    }
    v
}

struct DdProjector {
    sub_n: usize,
    sub_m: usize,
    delta_f: f64,
    t_p: f64,
    /// conjugated basis columns, subcarrier index fastest
    basis: Vec<Vec<C64>>,
}

impl DdProjector {
    fn new(opts: &DdOptions, ofdm: &OfdmGrid, basis: Vec<Vec<C64>>) -> Self {
        Self {
            sub_n: opts.sub_n,
            sub_m: opts.sub_m,
            delta_f: ofdm.delta_f,
            t_p: ofdm.packet_interval,
            basis,
        }
    }

    fn energy(&self, tau: f64, f: f64) -> f64 {
        let at = tau_factor(self.sub_n, self.delta_f, tau);
        let af = doppler_factor(self.sub_m, self.t_p, f);
        self.basis
            .iter()
            .map(|u| {
                let mut acc = C64::new(0.0, 0.0);
                for (mm, a) in af.iter().enumerate() {
                    let col = &u[mm * self.sub_n..(mm + 1) * self.sub_n];
                    acc += a * col.iter().zip(&at).map(|(c, x)| c * x).sum::<C64>();
                }
                acc.norm_sqr()
            })
            .sum()
    }

    /// Energies over the full grid; `B[τ][m]` is formed once per delay.
    fn energy_grid(&self, taus: &[f64], fs: &[f64], exec: Exec) -> Vec<f64> {
        let afs: Vec<Vec<C64>> = fs.iter().map(|&f| doppler_factor(self.sub_m, self.t_p, f)).collect();
        let mut out = vec![0.0; taus.len() * fs.len()];
        fill_chunks(&mut out, fs.len(), exec, |i, row| {
            let at = tau_factor(self.sub_n, self.delta_f, taus[i]);
            for u in &self.basis {
                let b: Vec<C64> = (0..self.sub_m)
                    .map(|mm| {
                        u[mm * self.sub_n..(mm + 1) * self.sub_n]
                            .iter()
                            .zip(&at)
                            .map(|(c, x)| c * x)
                            .sum()
                    })
                    .collect();
                for (v, af) in row.iter_mut().zip(&afs) {
                    *v += b.iter().zip(af).map(|(x, y)| x * y).sum::<C64>().norm_sqr();
                }
            }
        });
        out
    }
}

pub fn delay_doppler_music(h: &CMatrix, ofdm: &OfdmGrid, grid: &DdGrid, opts: &DdOptions) -> Result<DdEstimate> {
    delay_doppler_music_with(h, ofdm, grid, opts, Exec::default())
}

/// 2-D MUSIC over delay and Doppler for one separated path (`N × M_s`).
pub fn delay_doppler_music_with(
    h: &CMatrix,
    ofdm: &OfdmGrid,
    grid: &DdGrid,
    opts: &DdOptions,
    exec: Exec,
) -> Result<DdEstimate> {
    if grid.n_tau == 0 || grid.n_f == 0 {
        return Err(Error::GridEmpty);
    }
    if h.shape() != (ofdm.n_subcarriers, ofdm.n_packets) {
        return Err(Error::DimensionMismatch(format!(
            "path matrix {:?} for a {}x{} grid",
            h.shape(),
            ofdm.n_subcarriers,
            ofdm.n_packets
        )));
    }
    let r = subblock_covariance(h, opts.sub_n, opts.sub_m)?;
    let d = r.nrows();
    let cap = opts.max_order.clamp(1, d - 1);
    let (order, proj, use_signal) = if cap == 1 {
        // The order is pinned to one, so only the dominant eigenvector is
        // needed.
        let u = dominant_eigenvector(&r);
        (
            1,
            DdProjector::new(opts, ofdm, vec![u.iter().map(|v| v.conj()).collect()]),
            true,
        )
    } else {
        let evd = hermitian_evd(&r)?;
        let blocks = (ofdm.n_subcarriers - opts.sub_n + 1) * (ofdm.n_packets - opts.sub_m + 1);
        let order = mdl_order(&evd.eigenvalues, blocks).clamp(1, cap);
        let column = |c: usize| -> Vec<C64> { evd.eigenvectors.column(c).iter().map(|v| v.conj()).collect() };
        let use_signal = order < d - order;
        let basis = if use_signal {
            (0..order).map(column).collect()
        } else {
            (order..d).map(column).collect()
        };
        (order, DdProjector::new(opts, ofdm, basis), use_signal)
    };
    let denom = |e: f64| if use_signal { (d as f64 - e).max(0.0) } else { e };

    let taus = grid.taus();
    let fs = grid.dopplers();
    let values: Vec<f64> = proj
        .energy_grid(&taus, &fs, exec)
        .into_iter()
        .map(|e| 1.0 / (denom(e) + SPECTRUM_EPS))
        .collect();

    let (wrap_t, wrap_f) = grid.periodic(ofdm);
    let shape = GridShape {
        n1: taus.len(),
        n2: fs.len(),
        wrap1: wrap_t,
        wrap2: wrap_f,
    };
    let peak = pick_peaks(&values, shape, 1, 2)[0];
    let start = (taus[peak / fs.len()], fs[peak % fs.len()]);
    let bounds = Bounds {
        lo: (
            if wrap_t { f64::NEG_INFINITY } else { grid.tau_start },
            if wrap_f { f64::NEG_INFINITY } else { grid.f_start },
        ),
        hi: (
            if wrap_t { f64::INFINITY } else { *taus.last().unwrap() },
            if wrap_f { f64::INFINITY } else { *fs.last().unwrap() },
        ),
    };
    let (tau, f) = refine_min(
        |t, f| denom(proj.energy(t, f)) + SPECTRUM_EPS,
        start,
        (grid.tau_step, grid.f_step),
        bounds,
    );
    Ok(DdEstimate {
        tau: tau.rem_euclid(1.0 / ofdm.delta_f),
        doppler: wrap_doppler(f, ofdm.packet_interval),
        order,
        spectrum: SpectrumGrid {
            axis1_name: "delay_s".into(),
            axis2_name: "doppler_hz".into(),
            axis1: taus,
            axis2: fs,
            values,
        },
    })
}

/// Maps `f` into `(−1/(2T_p), 1/(2T_p)]`.
pub fn wrap_doppler(f: f64, t_p: f64) -> f64 {
    let period = 1.0 / t_p;
    let w = (f + 0.5 * period).rem_euclid(period) - 0.5 * period;
    if w <= -0.5 * period {
        w + period
    } else {
        w
    }
}

/// Maps `tau` into `(−1/(2Δf), 1/(2Δf)]`; used for residuals.
pub fn wrap_delay_centered(tau: f64, delta_f: f64) -> f64 {
    wrap_doppler(tau, delta_f)
}
