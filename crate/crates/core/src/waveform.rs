//! Array responses, transmit/receive beamforming, path gains and synthesis of
//! offset-corrupted CSI (the forward model of the simulator).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::Angles;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

const TAU: f64 = std::f64::consts::TAU;

/// Uniform planar array, `m_x × m_y` elements, spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaSpec {
    pub m_x: usize,
    pub m_y: usize,
    #[serde(default = "half_wavelength")]
    pub spacing: f64,
}

fn half_wavelength() -> f64 {
    0.5
}

impl UpaSpec {
    pub fn new(m_x: usize, m_y: usize) -> Self {
        Self { m_x, m_y, spacing: 0.5 }
    }

    pub fn square(m: usize) -> Self {
        Self::new(m, m)
    }

    pub fn len(&self) -> usize {
        self.m_x * self.m_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_x == 0 || self.m_y == 0 {
            return Err(Error::InvalidArgument("UPA needs at least one element per axis".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::InvalidArgument("UPA spacing must be positive".into()));
        }
        Ok(())
    }

    /// Per-axis factors `(a_x, a_y)` of the Kronecker steering vector.
    pub fn axis_factors(&self, ox: f64, oy: f64) -> (Vec<C64>, Vec<C64>) {
        let k = -TAU * self.spacing;
        let ax = (0..self.m_x).map(|q| C64::cis(k * q as f64 * ox)).collect();
        let ay = (0..self.m_y).map(|p| C64::cis(k * p as f64 * oy)).collect();
        (ax, ay)
    }
}

/// Steering vector `a_y ⊗ a_x`, element `p·m_x + q` (x index fastest).
pub fn steering_vector(upa: &UpaSpec, phi: f64, theta: f64) -> CVector {
    let (ox, oy) = Angles::new(phi, theta).direction_cosines();
    steering_from_cosines(upa, ox, oy)
}

pub fn steering_from_cosines(upa: &UpaSpec, ox: f64, oy: f64) -> CVector {
    let (ax, ay) = upa.axis_factors(ox, oy);
    DVector::from_iterator(upa.len(), ay.iter().flat_map(|y| ax.iter().map(move |x| y * x)))
}

/// `√β_R e^{jφ} w_sense + √(1−β_R) w_comm`.
pub fn multibeam_weights(w_sense: &CVector, w_comm: &CVector, beta_r: f64, phase_shift: f64) -> Result<CVector> {
    for w in [w_sense, w_comm] {
        let n = w.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnitNorm(n));
        }
    }
    if w_sense.len() != w_comm.len() {
        return Err(Error::DimensionMismatch(format!(
            "sensing beam has {} elements, communication beam {}",
            w_sense.len(),
            w_comm.len()
        )));
    }
    if !(0.0..=1.0).contains(&beta_r) {
        return Err(Error::InvalidArgument(format!("beta_r = {beta_r} outside [0, 1]")));
    }
    let s = C64::from_polar(beta_r.sqrt(), phase_shift);
    Ok(w_sense * s + w_comm * C64::from((1.0 - beta_r).sqrt()))
}

/// Least-squares solution of `A_q w = v`, rows of `A_q` being `α^T(q_k)`.
/// Singular values below `1e-10 σ_max` are discarded (minimum-norm solution).
pub fn ls_beamformer(aoas: &[Angles], desired: &CVector, upa: &UpaSpec) -> Result<CVector> {
    if aoas.len() != desired.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} directions but {} desired responses",
            aoas.len(),
            desired.len()
        )));
    }
    if aoas.is_empty() || aoas.len() > upa.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} directions for {} antennas",
            aoas.len(),
            upa.len()
        )));
    }
    let a = steering_matrix(aoas, upa);
    pseudo_inverse_apply(a, desired)
}

/// Rows `α^T(q_k)`.
pub fn steering_matrix(aoas: &[Angles], upa: &UpaSpec) -> CMatrix {
    let mut a = CMatrix::zeros(aoas.len(), upa.len());
    for (k, q) in aoas.iter().enumerate() {
        let s = steering_vector(upa, q.azimuth, q.elevation);
        a.row_mut(k).copy_from(&s.transpose());
    }
    a
}

fn pseudo_inverse_apply(a: CMatrix, v: &CVector) -> Result<CVector> {
    let svd = a.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::RankDeficient),
    };
    let s = &svd.singular_values;
    let smax = s.max();
    if !(smax > 0.0) {
        return Err(Error::RankDeficient);
    }
    let cut = 1e-10 * smax;
    let mut coeff = u.adjoint() * v;
    for (c, &si) in coeff.iter_mut().zip(s.iter()) {
        *c = if si > cut { *c / si } else { C64::new(0.0, 0.0) };
    }
    Ok(vt.adjoint() * coeff)
}

/// LoS amplitude `λ / (4π d)`.
pub fn path_gain_los(lambda: f64, d: f64) -> f64 {
    lambda / (4.0 * std::f64::consts::PI * d)
}

/// Reflected-path amplitude `ρ λ / ((4π)^{3/2} d1 d2)`.
pub fn path_gain_nlos(lambda: f64, d1: f64, d2: f64, rho: f64) -> f64 {
    rho * lambda / ((4.0 * std::f64::consts::PI).powf(1.5) * d1 * d2)
}

/// Per-element SINR in dB of a path for a given transmit power (dBm) and
/// noise density (dBm/Hz). Returns −300 dB for a vanishing gain.
pub fn sinr_from_power(
    p_total_dbm: f64,
    noise_psd_dbm_hz: f64,
    bandwidth: f64,
    path_gain: f64,
    beamforming_gain: f64,
) -> f64 {
    let dbm_to_w = |dbm: f64| 10f64.powf((dbm - 30.0) / 10.0);
    let signal = dbm_to_w(p_total_dbm) * (path_gain * beamforming_gain).powi(2);
    let noise = dbm_to_w(noise_psd_dbm_hz) * bandwidth;
    let ratio = signal / noise;
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(-300.0)
    } else {
        -300.0
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub gain: C64,
    /// seconds
    pub delay: f64,
    /// Hz
    pub doppler: f64,
    pub aoa: Angles,
    pub aod: Angles,
    pub is_los: bool,
}

/// Exactly one LoS path and non-negative delays.
pub fn validate_path_set(paths: &[PathParams]) -> Result<()> {
    let los = paths.iter().filter(|p| p.is_los).count();
    if los != 1 {
        return Err(Error::InvalidArgument(format!("{los} LoS paths, expected exactly one")));
    }
    if paths.iter().any(|p| p.delay < 0.0) {
        return Err(Error::InvalidArgument("negative path delay".into()));
    }
    Ok(())
}

/// Rescales LoS by `√(K/(K+1))` and the rest by `√(1/(K+1))`.
pub fn apply_rician_split(paths: &mut [PathParams], k_factor: f64) {
    let los = (k_factor / (k_factor + 1.0)).sqrt();
    let nlos = (1.0 / (k_factor + 1.0)).sqrt();
    for p in paths {
        p.gain *= if p.is_los { los } else { nlos };
    }
}

/// Subcarrier/packet grid of the CSI measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmGrid {
    pub n_subcarriers: usize,
    pub n_packets: usize,
    pub delta_f: f64,
    pub t_guard: f64,
    /// `1/Δf + T_g`
    pub t_symbol: f64,
    /// CSI interval `P_s T_s`
    pub packet_interval: f64,
    pub carrier_frequency: f64,
}

impl OfdmGrid {
    pub fn new(
        n_subcarriers: usize,
        n_packets: usize,
        delta_f: f64,
        t_guard: f64,
        symbols_per_packet: usize,
        carrier_frequency: f64,
    ) -> Result<Self> {
        if n_subcarriers == 0 || n_packets == 0 || symbols_per_packet == 0 {
            return Err(Error::InvalidArgument("OFDM grid dimensions must be positive".into()));
        }
        if !(delta_f > 0.0 && t_guard >= 0.0 && carrier_frequency > 0.0) {
            return Err(Error::InvalidArgument("OFDM timing values must be positive".into()));
        }
        let t_symbol = 1.0 / delta_f + t_guard;
        Ok(Self {
            n_subcarriers,
            n_packets,
            delta_f,
            t_guard,
            t_symbol,
            packet_interval: symbols_per_packet as f64 * t_symbol,
            carrier_frequency,
        })
    }

    pub fn wavelength(&self) -> f64 {
        crate::scene::SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn bandwidth(&self) -> f64 {
        self.n_subcarriers as f64 * self.delta_f
    }

    /// Length of one coherent processing interval.
    pub fn cpi(&self) -> f64 {
        self.n_packets as f64 * self.packet_interval
    }

    /// `exp(−j2π n Δf τ)` for all subcarriers.
    pub fn delay_phasors(&self, tau: f64) -> Vec<C64> {
        (0..self.n_subcarriers)
            .map(|n| C64::cis(-TAU * n as f64 * self.delta_f * tau))
            .collect()
    }

    /// `exp(j2π m T_p f)` for all packets.
    pub fn doppler_phasors(&self, f: f64) -> Vec<C64> {
        (0..self.n_packets)
            .map(|m| C64::cis(TAU * m as f64 * self.packet_interval * f))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClockOffsets {
    /// seconds
    pub tau_off: f64,
    /// Hz
    pub f_off: f64,
}

/// CSI snapshots `ĥ_{n,m}` stored packet-major, subcarrier, then antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTensor {
    pub n_antennas: usize,
    pub grid: OfdmGrid,
    data: Vec<C64>,
}

impl CsiTensor {
    pub fn zeros(n_antennas: usize, grid: OfdmGrid) -> Self {
        Self {
            n_antennas,
            grid,
            data: vec![C64::new(0.0, 0.0); n_antennas * grid.n_subcarriers * grid.n_packets],
        }
    }

    pub fn n_snapshots(&self) -> usize {
        self.grid.n_subcarriers * self.grid.n_packets
    }

    fn offset(&self, n: usize, m: usize) -> usize {
        (m * self.grid.n_subcarriers + n) * self.n_antennas
    }

    pub fn snapshot(&self, n: usize, m: usize) -> &[C64] {
        let o = self.offset(n, m);
        &self.data[o..o + self.n_antennas]
    }

    pub fn snapshot_mut(&mut self, n: usize, m: usize) -> &mut [C64] {
        let o = self.offset(n, m);
        let a = self.n_antennas;
        &mut self.data[o..o + a]
    }

    /// All snapshots in (packet, subcarrier) order.
    pub fn snapshots(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(self.n_antennas)
    }

    pub fn snapshots_mut(&mut self) -> impl Iterator<Item = &mut [C64]> {
        self.data.chunks_exact_mut(self.n_antennas)
    }

    pub fn get(&self, a: usize, n: usize, m: usize) -> C64 {
        self.data[self.offset(n, m) + a]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }
}

/// Transmit gains `χ_{t,l} = α^T(q_{t,l}) w_t`.
pub fn transmit_gains(tx_upa: &UpaSpec, paths: &[PathParams], tx_weights: &CVector) -> Result<Vec<C64>> {
    if tx_weights.len() != tx_upa.len() {
        return Err(Error::DimensionMismatch(format!(
            "transmit weights have {} elements, array has {}",
            tx_weights.len(),
            tx_upa.len()
        )));
    }
    Ok(paths
        .iter()
        .map(|p| (steering_vector(tx_upa, p.aod.azimuth, p.aod.elevation).transpose() * tx_weights)[0])
        .collect())
}

/// Synthesizes CSI with the transmit array response folded in.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_csi(
    rx_upa: &UpaSpec,
    tx_upa: &UpaSpec,
    grid: &OfdmGrid,
    paths: &[PathParams],
    tx_weights: &CVector,
    offsets: &ClockOffsets,
    noise_power: f64,
    seed: u64,
) -> Result<CsiTensor> {
    let chi = transmit_gains(tx_upa, paths, tx_weights)?;
    synthesize_csi_with_gains(rx_upa, grid, paths, &chi, offsets, noise_power, seed)
}

/// `ĥ_{n,m} = e^{jψ_{n,m}} (Σ_l β_l χ_l e^{j2πmT_p f_l} e^{−j2πnΔf τ_l} α(q_{r,l}) + z)`
/// where `ψ` carries the clock offsets. The noise draws come from a ChaCha8
/// stream keyed by `seed` and do not depend on the offsets.
pub fn synthesize_csi_with_gains(
    rx_upa: &UpaSpec,
    grid: &OfdmGrid,
    paths: &[PathParams],
    chi: &[C64],
    offsets: &ClockOffsets,
    noise_power: f64,
    seed: u64,
) -> Result<CsiTensor> {
    rx_upa.validate()?;
    if chi.len() != paths.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} transmit gains for {} paths",
            chi.len(),
            paths.len()
        )));
    }
    if !(noise_power >= 0.0) {
        return Err(Error::InvalidArgument("noise power must be non-negative".into()));
    }
    let (n_sc, n_pk) = (grid.n_subcarriers, grid.n_packets);
    let responses: Vec<CVector> = paths
        .iter()
        .map(|p| steering_vector(rx_upa, p.aoa.azimuth, p.aoa.elevation))
        .collect();
    let dphase: Vec<Vec<C64>> = paths.iter().map(|p| grid.delay_phasors(p.delay)).collect();
    let fphase: Vec<Vec<C64>> = paths.iter().map(|p| grid.doppler_phasors(p.doppler)).collect();
    let off_d = grid.delay_phasors(offsets.tau_off);
    let off_f = grid.doppler_phasors(offsets.f_off);
    let gains: Vec<C64> = paths.iter().zip(chi).map(|(p, c)| p.gain * c).collect();

    let mut csi = CsiTensor::zeros(rx_upa.len(), *grid);
    let mut noise = NoiseStream::new(seed, noise_power);
    for m in 0..n_pk {
        for n in 0..n_sc {
            let snap = csi.snapshot_mut(n, m);
            for l in 0..paths.len() {
                let c = gains[l] * fphase[l][m] * dphase[l][n];
                for (h, a) in snap.iter_mut().zip(responses[l].iter()) {
                    *h += c * a;
                }
            }
            let rot = off_f[m] * off_d[n];
            for h in snap.iter_mut() {
                *h = (*h + noise.sample()) * rot;
            }
        }
    }
    Ok(csi)
}

/// Receive-combined CSI `w^T ĥ_{n,m}` drawn directly in beam space: the
/// signal term is combined exactly and the noise is drawn with variance
/// `σ² ‖w‖²`, which has the same distribution as combining a full tensor.
/// Rows are subcarriers, columns packets.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_beamspace(
    rx_upa: &UpaSpec,
    grid: &OfdmGrid,
    paths: &[PathParams],
    chi: &[C64],
    combiner: &CVector,
    offsets: &ClockOffsets,
    noise_power: f64,
    seed: u64,
) -> Result<CMatrix> {
    if combiner.len() != rx_upa.len() || chi.len() != paths.len() {
        return Err(Error::DimensionMismatch("combiner or gain length".into()));
    }
    let coupled: Vec<C64> = paths
        .iter()
        .zip(chi)
        .map(|(p, c)| {
            let a = steering_vector(rx_upa, p.aoa.azimuth, p.aoa.elevation);
            p.gain * c * combiner.iter().zip(a.iter()).map(|(w, a)| w * a).sum::<C64>()
        })
        .collect();
    let dphase: Vec<Vec<C64>> = paths.iter().map(|p| grid.delay_phasors(p.delay)).collect();
    let fphase: Vec<Vec<C64>> = paths.iter().map(|p| grid.doppler_phasors(p.doppler)).collect();
    let off_d = grid.delay_phasors(offsets.tau_off);
    let off_f = grid.doppler_phasors(offsets.f_off);
    let mut noise = NoiseStream::new(seed, noise_power * combiner.norm_squared());
    let mut out = CMatrix::zeros(grid.n_subcarriers, grid.n_packets);
    for m in 0..grid.n_packets {
        for n in 0..grid.n_subcarriers {
            let s: C64 = (0..paths.len()).map(|l| coupled[l] * fphase[l][m] * dphase[l][n]).sum();
            out[(n, m)] = (s + noise.sample()) * off_f[m] * off_d[n];
        }
    }
    Ok(out)
}

/// Circularly-symmetric complex Gaussian samples with a fixed variance.
pub struct NoiseStream {
    rng: ChaCha8Rng,
    scale: f64,
}

impl NoiseStream {
    pub fn new(seed: u64, variance: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scale: (variance / 2.0).sqrt(),
        }
    }

    pub fn sample(&mut self) -> C64 {
        if self.scale == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        C64::new(re * self.scale, im * self.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn steering_examples() {
        let upa = UpaSpec::new(3, 4);
        let s = steering_vector(&upa, 0.7, 0.0);
        assert!(s.iter().all(|v| close(*v, C64::new(1.0, 0.0), 1e-15)));

        let s = steering_vector(&UpaSpec::new(2, 1), 0.0, FRAC_PI_2);
        assert!(close(s[0], C64::new(1.0, 0.0), 1e-15));
        assert!(close(s[1], C64::new(-1.0, 0.0), 1e-15));

        let s = steering_vector(&UpaSpec::new(1, 2), FRAC_PI_2, FRAC_PI_6);
        assert!(close(s[1], C64::new(0.0, -1.0), 1e-12));
    }

    #[test]
    fn steering_unit_modulus_and_conjugate_symmetry() {
        let upa = UpaSpec::new(4, 3);
        let s = steering_vector(&upa, 0.4, 0.9);
        let mirrored = steering_vector(&upa, 0.4 + PI, 0.9);
        for (a, b) in s.iter().zip(mirrored.iter()) {
            assert_relative_eq!(a.norm(), 1.0, epsilon = 1e-14);
            assert!(close(*a, b.conj(), 1e-12));
        }
        // x index runs fastest
        let (ox, _) = Angles::new(0.4, 0.9).direction_cosines();
        assert!(close(s[1], C64::cis(-PI * ox), 1e-14));
    }

    #[test]
    fn multibeam_examples() {
        let e0 = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let e1 = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.0, 1.0)]);
        let w = multibeam_weights(&e0, &e1, 1.0, 0.3).unwrap();
        assert!(close(w[0], C64::cis(0.3), 1e-15));
        assert!(close(w[1], C64::new(0.0, 0.0), 1e-15));
        let w = multibeam_weights(&e0, &e1, 0.0, 0.3).unwrap();
        assert!(close(w[1], e1[1], 1e-15));
        let w = multibeam_weights(&e0, &e1, 0.5, 0.0).unwrap();
        assert_relative_eq!(w.norm(), 1.0, epsilon = 1e-15);
        let bad = &e0 * C64::new(2.0, 0.0);
        assert!(matches!(
            multibeam_weights(&bad, &e1, 0.5, 0.0),
            Err(Error::NotUnitNorm(_))
        ));
    }

    #[test]
    fn ls_single_direction() {
        let upa = UpaSpec::square(4);
        let q = Angles::from_degrees(20.0, 40.0);
        let w = ls_beamformer(&[q], &CVector::from_element(1, C64::new(1.0, 0.0)), &upa).unwrap();
        let a = steering_vector(&upa, q.azimuth, q.elevation);
        let resp = (a.transpose() * &w)[0];
        assert!(close(resp, C64::new(1.0, 0.0), 1e-9));
        // minimum norm: conj(a)/|a|^2
        let expect = a.map(|v| v.conj()) / C64::from(a.norm_squared());
        assert!((w - expect).norm() < 1e-12);
    }

    #[test]
    fn ls_null_steering() {
        let upa = UpaSpec::square(4);
        let q = [Angles::from_degrees(20.0, 40.0), Angles::from_degrees(-60.0, 30.0)];
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let w = ls_beamformer(&q, &v, &upa).unwrap();
        let a2 = steering_vector(&upa, q[1].azimuth, q[1].elevation);
        assert!((a2.transpose() * &w)[0].norm() < 1e-8);
        let a1 = steering_vector(&upa, q[0].azimuth, q[0].elevation);
        assert!(close((a1.transpose() * &w)[0], C64::new(1.0, 0.0), 1e-8));
    }

    #[test]
    fn ls_inconsistent_duplicate() {
        let upa = UpaSpec::square(3);
        let q = Angles::from_degrees(10.0, 50.0);
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let w = ls_beamformer(&[q, q], &v, &upa).unwrap();
        let a = steering_matrix(&[q, q], &upa);
        let resid = (&a * &w - &v).norm();
        assert_relative_eq!(resid, 2f64.sqrt() / 2.0, epsilon = 1e-9);
        // brute force: the residual of any w is at least that of α^T w = 1/2
        let a0 = steering_vector(&upa, q.azimuth, q.elevation);
        for k in 0..20 {
            let t = k as f64 / 19.0;
            let wt = a0.map(|x| x.conj()) * C64::from(t / a0.norm_squared());
            assert!((&a * &wt - &v).norm() >= resid - 1e-12);
        }
    }

    #[test]
    fn path_gains() {
        assert_relative_eq!(path_gain_los(4.0 * PI, 1.0), 1.0);
        assert_relative_eq!(path_gain_los(0.010707, 173.205), 4.9190e-6, max_relative = 1e-4);
        assert_relative_eq!(path_gain_los(0.01, 20.0), path_gain_los(0.01, 10.0) / 2.0);
        assert_eq!(path_gain_nlos(0.01, 10.0, 10.0, 0.0), 0.0);
        assert_relative_eq!(
            path_gain_nlos(0.010707, 100.0, 100.0, 1.0),
            2.40355e-8,
            max_relative = 1e-4
        );
        assert_relative_eq!(
            path_gain_nlos(0.01, 50.0, 70.0, 0.6),
            0.6 * path_gain_nlos(0.01, 50.0, 70.0, 1.0)
        );
    }

    #[test]
    fn sinr_examples() {
        assert_relative_eq!(sinr_from_power(20.0, -174.0, 1e8, 1.0, 1.0), 114.0, epsilon = 1e-9);
        assert_eq!(sinr_from_power(20.0, -174.0, 1e8, 0.0, 1.0), -300.0);
        let a = sinr_from_power(20.0, -174.0, 1e8, 1e-6, 3.0);
        let b = sinr_from_power(23.0, -174.0, 1e8, 1e-6, 3.0);
        assert_relative_eq!(b - a, 3.0, epsilon = 1e-9);
    }

    fn small_grid() -> OfdmGrid {
        OfdmGrid::new(8, 4, 97_656.25, 3.34e-6, 1, 28e9).unwrap()
    }

    fn one_path(delay: f64) -> PathParams {
        PathParams {
            gain: C64::new(1.0, 0.0),
            delay,
            doppler: 0.0,
            aoa: Angles::from_degrees(30.0, 45.0),
            aod: Angles::new(0.0, 0.0),
            is_los: true,
        }
    }

    #[test]
    fn synthesis_single_path_structure() {
        let upa = UpaSpec::square(3);
        let grid = small_grid();
        let p = PathParams {
            doppler: 700.0,
            ..one_path(1.3e-6)
        };
        let csi = synthesize_csi_with_gains(
            &upa,
            &grid,
            &[p],
            &[C64::new(1.0, 0.0)],
            &ClockOffsets::default(),
            0.0,
            1,
        )
        .unwrap();
        let a = steering_vector(&upa, p.aoa.azimuth, p.aoa.elevation);
        for (h, s) in csi.snapshot(0, 0).iter().zip(a.iter()) {
            assert_eq!(h, s);
        }
        for s in csi.snapshots() {
            assert_relative_eq!(s[4].norm(), 1.0, epsilon = 1e-12);
        }
        let p = one_path(1e-6);
        let csi = synthesize_csi_with_gains(
            &upa,
            &grid,
            &[p],
            &[C64::new(1.0, 0.0)],
            &ClockOffsets::default(),
            0.0,
            1,
        )
        .unwrap();
        let want = C64::cis(-TAU * grid.delta_f * 1e-6);
        for n in 0..grid.n_subcarriers - 1 {
            let r = csi.get(2, n + 1, 1) / csi.get(2, n, 1);
            assert!(close(r, want, 1e-12));
        }
    }

    #[test]
    fn synthesis_offset_shift_is_phase_only() {
        let upa = UpaSpec::square(2);
        let grid = small_grid();
        let paths = [one_path(0.4e-6)];
        let chi = [C64::new(0.5, 0.1)];
        let o1 = ClockOffsets {
            tau_off: 10e-9,
            f_off: 0.0,
        };
        let o2 = ClockOffsets {
            tau_off: 35e-9,
            f_off: 0.0,
        };
        let a = synthesize_csi_with_gains(&upa, &grid, &paths, &chi, &o1, 0.3, 9).unwrap();
        let b = synthesize_csi_with_gains(&upa, &grid, &paths, &chi, &o2, 0.3, 9).unwrap();
        for m in 0..grid.n_packets {
            for n in 0..grid.n_subcarriers {
                let ph = C64::cis(-TAU * n as f64 * grid.delta_f * 25e-9);
                for (x, y) in a.snapshot(n, m).iter().zip(b.snapshot(n, m)) {
                    assert!(close(x * ph, *y, 1e-12));
                }
            }
        }
        let again = synthesize_csi_with_gains(&upa, &grid, &paths, &chi, &o1, 0.3, 9).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn noise_variance() {
        let upa = UpaSpec::square(8);
        let grid = OfdmGrid::new(128, 16, 97_656.25, 3.34e-6, 1, 28e9).unwrap();
        let csi = synthesize_csi_with_gains(&upa, &grid, &[], &[], &ClockOffsets::default(), 0.7, 3).unwrap();
        let cells = csi.as_slice().len();
        assert!(cells >= 100_000);
        let var = csi.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / cells as f64;
        assert!((var / 0.7 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn beamspace_matches_combined_tensor_signal() {
        let upa = UpaSpec::square(3);
        let grid = small_grid();
        let paths = [
            one_path(0.5e-6),
            PathParams {
                is_los: false,
                aoa: Angles::from_degrees(-40.0, 60.0),
                ..one_path(1.1e-6)
            },
        ];
        let chi = [C64::new(1.0, 0.0), C64::new(0.3, -0.2)];
        let w = ls_beamformer(
            &[paths[0].aoa, paths[1].aoa],
            &CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            &upa,
        )
        .unwrap();
        let off = ClockOffsets {
            tau_off: 5e-9,
            f_off: 300.0,
        };
        let full = synthesize_csi_with_gains(&upa, &grid, &paths, &chi, &off, 0.0, 0).unwrap();
        let beam = synthesize_beamspace(&upa, &grid, &paths, &chi, &w, &off, 0.0, 0).unwrap();
        for m in 0..grid.n_packets {
            for n in 0..grid.n_subcarriers {
                let y: C64 = full.snapshot(n, m).iter().zip(w.iter()).map(|(h, w)| h * w).sum();
                assert!(close(y, beam[(n, m)], 1e-12));
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let upa = UpaSpec::square(2);
        let grid = small_grid();
        assert!(matches!(
            synthesize_csi_with_gains(&upa, &grid, &[one_path(0.0)], &[], &ClockOffsets::default(), 0.0, 0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            synthesize_csi(
                &upa,
                &upa,
                &grid,
                &[one_path(0.0)],
                &CVector::zeros(3),
                &ClockOffsets::default(),
                0.0,
                0
            ),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rician_split_preserves_total() {
        let mut p = [
            one_path(0.0),
            PathParams {
                is_los: false,
                ..one_path(1e-6)
            },
        ];
        apply_rician_split(&mut p, 3.0);
        assert_relative_eq!(p[0].gain.norm_sqr() + p[1].gain.norm_sqr(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(p[0].gain.norm_sqr(), 0.75, epsilon = 1e-15);
        assert!(validate_path_set(&p).is_ok());
        p[1].is_los = true;
        assert!(validate_path_set(&p).is_err());
    }
}
