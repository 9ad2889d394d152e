//! One Monte Carlo trial: a track of LoS offset measurements ending in a
//! sensing frame, where the reflected paths are estimated, compensated and
//! scored against the truth.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::assign::assign_by_angle;
use super::config::{ExperimentConfig, Method};
use super::scenario::{draw_scene, FrameTruth, Scenario};
use super::seed::{stream_seed, Purpose, CALIBRATION_TRIAL};
use super::HarnessError;
use crate::crb::{crb_from_fim, fim_aoa, fim_delay_doppler, Param};
use crate::exec::Exec;
use crate::scene::{wrap_angle, Angles, Vec3, SPEED_OF_LIGHT};
use crate::subspace::{
    combine, delay_doppler_music_with, hermitian_evd, mdl_order, music_aoa_with, sample_covariance, separation_weights,
    spatial_smooth, wrap_delay_centered, wrap_doppler, DdEstimate, DdGrid, MusicEstimate,
};
use crate::tvoe::{
    build_residual, solve_target, static_offset_baseline, track_offsets, OffsetTrack, ResidualObservation,
};
use crate::waveform::{
    ls_beamformer, steering_vector, synthesize_beamspace, synthesize_csi_with_gains, CMatrix, CVector, ClockOffsets,
    CsiTensor, OfdmGrid, UpaSpec, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    PhiDeg,
    ThetaDeg,
    DelayS,
    DopplerHz,
    RangeM,
    VelocityMps,
    PositionM,
    ToS,
    CfoHz,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::PhiDeg,
        Quantity::ThetaDeg,
        Quantity::DelayS,
        Quantity::DopplerHz,
        Quantity::RangeM,
        Quantity::VelocityMps,
        Quantity::PositionM,
        Quantity::ToS,
        Quantity::CfoHz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::PhiDeg => "phi_deg",
            Quantity::ThetaDeg => "theta_deg",
            Quantity::DelayS => "delay_s",
            Quantity::DopplerHz => "doppler_hz",
            Quantity::RangeM => "range_m",
            Quantity::VelocityMps => "velocity_mps",
            Quantity::PositionM => "position_m",
            Quantity::ToS => "to_s",
            Quantity::CfoHz => "cfo_hz",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| format!("unknown quantity `{s}`"))
    }
}

/// Signed error of one estimate in the quantity's unit, with the matching
/// CRB variance when one exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub method: Method,
    pub quantity: Quantity,
    pub error: f64,
    pub crb_var: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Miss {
    pub method: Method,
    pub quantity: Quantity,
}

/// Measurement noise variances of the LoS residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub r_tau: f64,
    pub r_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub time: f64,
    pub tau_off: f64,
    pub f_off: f64,
    pub residual_tau: f64,
    pub residual_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetOutcome {
    pub truth_aoa: Angles,
    pub truth_delay: f64,
    pub truth_doppler: f64,
    pub truth_position: Vec3,
    pub ssmusic: Option<Angles>,
    pub music: Option<Angles>,
    /// Offset-corrupted delay and Doppler of the separated path.
    pub measured_delay: Option<f64>,
    pub measured_doppler: Option<f64>,
    /// Position after TVOE compensation.
    pub position_tvoe: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    pub sweep_value: f64,
    pub noise_power: f64,
    /// Order picked by MDL on the smoothed covariance.
    pub mdl_order: usize,
    /// LoS plus targets.
    pub true_order: usize,
    pub los_found: bool,
    pub ssmusic_aoas: Vec<Angles>,
    pub music_aoas: Vec<Angles>,
    pub targets: Vec<TargetOutcome>,
    pub frames: Vec<FrameRecord>,
    pub track: OffsetTrack,
    pub static_offset: [f64; 2],
    pub calibration: Calibration,
    pub samples: Vec<ErrorSample>,
    pub misses: Vec<Miss>,
}

impl TrialResult {
    pub fn errors(&self, method: Method, quantity: Quantity) -> impl Iterator<Item = &ErrorSample> {
        self.samples
            .iter()
            .filter(move |s| s.method == method && s.quantity == quantity)
    }
}

/// Angle estimates of the sensing frame.
#[derive(Debug, Clone)]
pub struct AngleStage {
    pub order: usize,
    /// Eigenvalues of the smoothed covariance, descending.
    pub eigenvalues: Vec<f64>,
    pub ssmusic: MusicEstimate,
    pub music: Option<MusicEstimate>,
}

/// MDL order on the smoothed covariance, then spatial-smoothing MUSIC and
/// optionally plain MUSIC on the full array with the same order.
pub fn estimate_angles(
    cfg: &ExperimentConfig,
    csi: &CsiTensor,
    with_music: bool,
    exec: Exec,
) -> Result<AngleStage, HarnessError> {
    let upa = cfg.rx_upa();
    let plan = cfg.smoothing_plan()?;
    let cov = sample_covariance(csi);
    let smoothed = spatial_smooth(&cov, &plan, &upa)?;
    let evd = hermitian_evd(&smoothed.data)?;
    let order = mdl_order(&evd.eigenvalues, cov.n_snapshots).min(cfg.estimation.max_sources);
    let grid = cfg.angle_grid();
    let ssmusic = music_aoa_with(&smoothed, order, &plan.subarray(), &grid, exec)?;
    let music = if with_music {
        Some(music_aoa_with(&cov, order.min(upa.len() - 1), &upa, &grid, exec)?)
    } else {
        None
    };
    Ok(AngleStage {
        order,
        eigenvalues: evd.eigenvalues,
        ssmusic,
        music,
    })
}

/// `conj(α(q)) / M`: unit response toward `q`.
pub fn matched_combiner(upa: &UpaSpec, aoa: &Angles) -> CVector {
    let a = steering_vector(upa, aoa.azimuth, aoa.elevation);
    a.map(|x| x.conj()) / C64::from(upa.len() as f64)
}

/// LS weights that pass the LoS and null every echo of the frame, standing in
/// for per-frame path separation. Falls back to the matched combiner when
/// the arrivals are not separable.
fn los_combiner(upa: &UpaSpec, truth: &FrameTruth) -> CVector {
    let aoas: Vec<Angles> = truth.paths.iter().map(|p| p.aoa).collect();
    let mut pass = CVector::zeros(aoas.len());
    pass[0] = C64::new(1.0, 0.0);
    match ls_beamformer(&aoas, &pass, upa) {
        Ok(w) if w.iter().all(|x| x.is_finite()) => w,
        _ => matched_combiner(upa, &truth.los().aoa),
    }
}

pub fn measure_path(
    cfg: &ExperimentConfig,
    grid: &OfdmGrid,
    h: &CMatrix,
    exec: Exec,
) -> Result<DdEstimate, HarnessError> {
    Ok(delay_doppler_music_with(
        h,
        grid,
        &DdGrid::principal(grid),
        &cfg.dd_options(),
        exec,
    )?)
}

/// Residual against the LoS geometry, wrapped to the centred ambiguity
/// intervals.
fn los_residual(dd: &DdEstimate, truth: &FrameTruth, grid: &OfdmGrid, frame: usize) -> ResidualObservation {
    let los = truth.los();
    let r = build_residual(dd.tau, dd.doppler, los.delay, los.doppler, frame);
    ResidualObservation {
        frame,
        tau_off_meas: wrap_delay_centered(r.tau_off_meas, grid.delta_f),
        f_off_meas: wrap_doppler(r.f_off_meas, grid.packet_interval),
    }
}

fn frame_time(cfg: &ExperimentConfig, frames: usize, k: usize) -> f64 {
    -((frames - 1 - k) as f64) * cfg.tracking.frame_interval
}

/// Measurement noise of the LoS residuals from offset-free frames of a
/// dedicated scene. Configured variances take precedence.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<Calibration, HarnessError> {
    let t = &cfg.tracking;
    if let (Some(r_tau), Some(r_f)) = (t.r_tau, t.r_f) {
        return Ok(Calibration { r_tau, r_f });
    }
    let grid = cfg.grid()?;
    let rx = cfg.rx_upa();
    let sigma2 = cfg.noise_power();
    let scene = draw_scene(cfg, stream_seed(cfg.seed, CALIBRATION_TRIAL, Purpose::Scene, 0))?;
    let n = t.calibration_frames;
    let (mut s_tau, mut s_f) = (0.0, 0.0);
    for k in 0..n {
        let truth = scene.frame(cfg, frame_time(cfg, n, k))?;
        let w = los_combiner(&rx, &truth);
        let h = synthesize_beamspace(
            &rx,
            &grid,
            &truth.paths,
            &truth.chi,
            &w,
            &ClockOffsets::default(),
            sigma2,
            stream_seed(cfg.seed, CALIBRATION_TRIAL, Purpose::Calibration, k as u64),
        )?;
        let z = los_residual(&measure_path(cfg, &grid, &h, Exec::Serial)?, &truth, &grid, k);
        s_tau += z.tau_off_meas * z.tau_off_meas;
        s_f += z.f_off_meas * z.f_off_meas;
    }
    Ok(Calibration {
        r_tau: t.r_tau.unwrap_or((s_tau / n as f64).max(t.r_floor_tau)),
        r_f: t.r_f.unwrap_or((s_f / n as f64).max(t.r_floor_f)),
    })
}

/// Runs trial `trial` at one sweep value of `cfg.sweep.axis`.
pub fn run_trial(cfg: &ExperimentConfig, sweep_value: f64, trial: u64) -> Result<TrialResult, HarnessError> {
    let point = cfg.at(cfg.sweep.axis, sweep_value);
    let calib = calibrate(&point)?;
    run_trial_at(&point, sweep_value, trial, &calib, Exec::default())
}

/// Offset model value at frame `k` (time `k·frame_interval` from the first
/// frame).
fn offsets_at(cfg: &ExperimentConfig, k: usize, jitter: (f64, f64)) -> ClockOffsets {
    let o = &cfg.offsets;
    let s = k as f64 * cfg.tracking.frame_interval;
    ClockOffsets {
        tau_off: o.to + o.to_drift * s + o.to_jitter * jitter.0,
        f_off: o.cfo + o.cfo_drift * s + o.cfo_jitter * jitter.1,
    }
}

fn jitter_sequence(seed: u64, trial: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, trial, Purpose::Jitter, 0));
    (0..n)
        .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// The sensing frame of a trial as `run_trial_at` synthesizes it.
pub fn sensing_frame(point: &ExperimentConfig, trial: u64) -> Result<(Scenario, FrameTruth, CsiTensor), HarnessError> {
    let grid = point.grid()?;
    let n = point.tracking.frames;
    let scene = draw_scene(point, stream_seed(point.seed, trial, Purpose::Scene, 0))?;
    let off = offsets_at(point, n - 1, jitter_sequence(point.seed, trial, n)[n - 1]);
    let truth = scene.frame(point, 0.0)?;
    let csi = synthesize_csi_with_gains(
        &point.rx_upa(),
        &grid,
        &truth.paths,
        &truth.chi,
        &off,
        point.noise_power(),
        stream_seed(point.seed, trial, Purpose::Noise, (n - 1) as u64),
    )?;
    Ok((scene, truth, csi))
}

/// Splits estimates into the LoS arrival (the closest one to the geometric
/// LoS direction, if within the exclusion radius) and the rest.
fn split_los(estimates: &[Angles], los: &Angles, radius: f64) -> (Option<usize>, Vec<usize>) {
    let los_idx = estimates
        .iter()
        .enumerate()
        .map(|(i, a)| (i, a.separation(los)))
        .filter(|&(_, d)| d <= radius)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    let rest = (0..estimates.len()).filter(|&i| Some(i) != los_idx).collect();
    (los_idx, rest)
}

/// Same as [`run_trial`] for a configuration already set to the sweep point
/// and a given calibration.
pub fn run_trial_at(
    point: &ExperimentConfig,
    sweep_value: f64,
    trial: u64,
    calib: &Calibration,
    exec: Exec,
) -> Result<TrialResult, HarnessError> {
    let grid = point.grid()?;
    let rx = point.rx_upa();
    let sigma2 = point.noise_power();
    let seed = point.seed;
    let scene = draw_scene(point, stream_seed(seed, trial, Purpose::Scene, 0))?;
    let n_frames = point.tracking.frames;
    let jitter = jitter_sequence(seed, trial, n_frames);

    let mut residuals = Vec::with_capacity(n_frames);
    let mut frames = Vec::with_capacity(n_frames);
    let mut sensing = None;
    for (k, &j) in jitter.iter().enumerate() {
        let t = frame_time(point, n_frames, k);
        let off = offsets_at(point, k, j);
        let truth = scene.frame(point, t)?;
        let w = los_combiner(&rx, &truth);
        let noise_seed = stream_seed(seed, trial, Purpose::Noise, k as u64);
        let h = if k + 1 == n_frames {
            let csi = synthesize_csi_with_gains(&rx, &grid, &truth.paths, &truth.chi, &off, sigma2, noise_seed)?;
            let h = combine(&csi, &w);
            sensing = Some((csi, off));
            h
        } else {
            synthesize_beamspace(&rx, &grid, &truth.paths, &truth.chi, &w, &off, sigma2, noise_seed)?
        };
        let z = los_residual(&measure_path(point, &grid, &h, exec)?, &truth, &grid, k);
        frames.push(FrameRecord {
            frame: k,
            time: t,
            tau_off: off.tau_off,
            f_off: off.f_off,
            residual_tau: z.tau_off_meas,
            residual_f: z.f_off_meas,
        });
        residuals.push(z);
    }
    let (csi, true_off) = sensing.expect("at least one frame");
    let track = track_offsets(&residuals, &point.ekf(calib.r_tau, calib.r_f))?;
    let tvoe = *track.last().expect("non-empty track");
    let static_off = static_offset_baseline(&residuals)?;

    let truth = scene.frame(point, 0.0)?;
    let stage = estimate_angles(point, &csi, point.wants(Method::Music), exec)?;
    let sensing = Sensing {
        point,
        grid: &grid,
        rx: &rx,
        sigma2,
        scene: &scene,
        truth: &truth,
        csi: &csi,
        offsets: [
            (Method::Tvoe, (tvoe.tau_off(), tvoe.f_off())),
            (Method::Static, static_off),
            (Method::Uncomp, (0.0, 0.0)),
            (Method::Oracle, (true_off.tau_off, true_off.f_off)),
        ],
    };
    let mut result = TrialResult {
        trial,
        sweep_value,
        noise_power: sigma2,
        mdl_order: stage.order,
        true_order: truth.paths.len(),
        los_found: false,
        ssmusic_aoas: stage.ssmusic.angles.clone(),
        music_aoas: stage.music.as_ref().map(|m| m.angles.clone()).unwrap_or_default(),
        targets: Vec::new(),
        frames,
        track,
        static_offset: [static_off.0, static_off.1],
        calibration: *calib,
        samples: Vec::new(),
        misses: Vec::new(),
    };
    sensing.score(&stage, exec, &mut result)?;
    for m in [Method::Tvoe, Method::Static, Method::Uncomp] {
        if point.wants(m) {
            let (t, f) = sensing.offset_of(m);
            result
                .samples
                .push(sample(m, Quantity::ToS, t - true_off.tau_off, None));
            result
                .samples
                .push(sample(m, Quantity::CfoHz, f - true_off.f_off, None));
        }
    }
    Ok(result)
}

fn sample(method: Method, quantity: Quantity, error: f64, crb_var: Option<f64>) -> ErrorSample {
    ErrorSample {
        method,
        quantity,
        error,
        crb_var,
    }
}

const COMPENSATED: [Method; 4] = [Method::Tvoe, Method::Static, Method::Uncomp, Method::Oracle];
const PATH_QUANTITIES: [Quantity; 5] = [
    Quantity::DelayS,
    Quantity::DopplerHz,
    Quantity::RangeM,
    Quantity::VelocityMps,
    Quantity::PositionM,
];

/// Everything the sensing-frame scoring needs.
struct Sensing<'a> {
    point: &'a ExperimentConfig,
    grid: &'a OfdmGrid,
    rx: &'a UpaSpec,
    sigma2: f64,
    scene: &'a Scenario,
    truth: &'a FrameTruth,
    csi: &'a CsiTensor,
    offsets: [(Method, (f64, f64)); 4],
}

impl Sensing<'_> {
    fn offset_of(&self, m: Method) -> (f64, f64) {
        self.offsets
            .iter()
            .find(|(k, _)| *k == m)
            .expect("compensated method")
            .1
    }

    fn score(&self, stage: &AngleStage, exec: Exec, out: &mut TrialResult) -> Result<(), HarnessError> {
        let point = self.point;
        let los_aoa = self.truth.los().aoa;
        let radius = point.estimation.los_exclusion_deg.to_radians();
        let lambda = self.grid.wavelength();
        let deg2 = 1f64.to_degrees().powi(2);

        let ss = &stage.ssmusic.angles;
        let (los_idx, tgt_idx) = split_los(ss, &los_aoa, radius);
        out.los_found = los_idx.is_some();
        let mut constraints = ss.clone();
        if los_idx.is_none() {
            constraints.push(los_aoa);
        }
        let weights = if tgt_idx.is_empty() {
            Vec::new()
        } else {
            separation_weights(&constraints, self.rx)?
        };
        let mut measured = Vec::with_capacity(tgt_idx.len());
        for &j in &tgt_idx {
            let h = combine(self.csi, &weights[j]);
            let dd = measure_path(point, self.grid, &h, exec)?;
            measured.push((dd.tau, dd.doppler, weights[j].norm_squared()));
        }
        let tgt_angles: Vec<Angles> = tgt_idx.iter().map(|&j| ss[j]).collect();
        let truth_aoas: Vec<Angles> = self.truth.targets().iter().map(|p| p.aoa).collect();
        let assign = assign_by_angle(&truth_aoas, &tgt_angles);

        let music_assign = stage.music.as_ref().map(|m| {
            let (_, rest) = split_los(&m.angles, &los_aoa, radius);
            let est: Vec<Angles> = rest.iter().map(|&j| m.angles[j]).collect();
            let a = assign_by_angle(&truth_aoas, &est);
            (est, a)
        });

        let q_u = self.scene.geometry.uav_trajectory.position(0.0);
        let bs = self.scene.geometry.bs_position;
        let aoa_crb = fim_aoa(&self.truth.paths, self.rx, self.grid, self.sigma2, &self.truth.chi)
            .and_then(|f| crb_from_fim(&f))
            .ok();
        for (i, path) in self.truth.targets().iter().enumerate() {
            let chi = self.truth.chi[i + 1];
            let truth_position = self.scene.geometry.targets[i].position;
            let crb_phi = aoa_crb.as_ref().map(|c| c.get(Param::Azimuth(i + 1)).unwrap() * deg2);
            let crb_theta = aoa_crb.as_ref().map(|c| c.get(Param::Elevation(i + 1)).unwrap() * deg2);
            let angle_rows = |m: Method, est: Option<Angles>, out: &mut TrialResult| {
                if !point.wants(m) {
                    return;
                }
                match est {
                    Some(e) => {
                        let dphi = wrap_angle(e.azimuth - path.aoa.azimuth).to_degrees();
                        let dtheta = (e.elevation - path.aoa.elevation).to_degrees();
                        out.samples.push(sample(m, Quantity::PhiDeg, dphi, crb_phi));
                        out.samples.push(sample(m, Quantity::ThetaDeg, dtheta, crb_theta));
                    }
                    None => {
                        for quantity in [Quantity::PhiDeg, Quantity::ThetaDeg] {
                            out.misses.push(Miss { method: m, quantity });
                        }
                    }
                }
            };
            let ss_est = assign[i].map(|j| tgt_angles[j]);
            angle_rows(Method::Ssmusic, ss_est, out);
            let music_est = music_assign.as_ref().and_then(|(est, a)| a[i].map(|j| est[j]));
            angle_rows(Method::Music, music_est, out);

            let mut outcome = TargetOutcome {
                truth_aoa: path.aoa,
                truth_delay: path.delay,
                truth_doppler: path.doppler,
                truth_position,
                ssmusic: ss_est,
                music: music_est,
                measured_delay: None,
                measured_doppler: None,
                position_tvoe: None,
            };
            let Some(j) = assign[i] else {
                for m in COMPENSATED.into_iter().filter(|m| point.wants(*m)) {
                    for quantity in PATH_QUANTITIES {
                        out.misses.push(Miss { method: m, quantity });
                    }
                }
                out.targets.push(outcome);
                continue;
            };
            let (tau_m, f_m, w_norm2) = measured[j];
            outcome.measured_delay = Some(tau_m);
            outcome.measured_doppler = Some(f_m);
            let dd_crb = fim_delay_doppler(path, self.grid, self.sigma2 * w_norm2, chi)
                .and_then(|f| crb_from_fim(&f))
                .ok();
            let crb_tau = dd_crb.as_ref().map(|c| c.variances[0]);
            let crb_f = dd_crb.as_ref().map(|c| c.variances[1]);
            for m in COMPENSATED {
                let (to, fo) = self.offset_of(m);
                let dtau = wrap_delay_centered(tau_m - to - path.delay, self.grid.delta_f);
                let df = wrap_doppler(f_m - fo - path.doppler, self.grid.packet_interval);
                let solved = solve_target(path.delay + dtau, path.doppler + df, &tgt_angles[j], &q_u, &bs, lambda);
                if m == Method::Tvoe {
                    outcome.position_tvoe = solved.as_ref().ok().map(|s| s.position);
                }
                if !point.wants(m) {
                    continue;
                }
                let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
                out.samples.push(sample(m, Quantity::DelayS, dtau, crb_tau));
                out.samples.push(sample(m, Quantity::DopplerHz, df, crb_f));
                out.samples.push(sample(
                    m,
                    Quantity::RangeM,
                    SPEED_OF_LIGHT * dtau,
                    crb_tau.map(|v| v * c2),
                ));
                out.samples.push(sample(
                    m,
                    Quantity::VelocityMps,
                    lambda * df,
                    crb_f.map(|v| v * lambda * lambda),
                ));
                match solved {
                    Ok(s) => out.samples.push(sample(
                        m,
                        Quantity::PositionM,
                        (s.position - truth_position).norm(),
                        None,
                    )),
                    Err(_) => out.misses.push(Miss {
                        method: m,
                        quantity: Quantity::PositionM,
                    }),
                }
            }
            out.targets.push(outcome);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SweepAxis;

    fn quick() -> ExperimentConfig {
        let mut c = ExperimentConfig::desk();
        c.ofdm.n_subcarriers = 32;
        c.ofdm.n_packets = 8;
        c.ofdm.delta_f = 390_625.0;
        c.ofdm.t_guard = 1e-6;
        c.array.rx = [5, 5];
        c.estimation.dd_sub_n = 8;
        c.estimation.dd_sub_m = 4;
        c.estimation.phi_step_deg = 2.0;
        c.estimation.theta_step_deg = 2.0;
        c.tracking.frames = 4;
        c.tracking.calibration_frames = 4;
        c.scene.n_targets = 1;
        c.scene.min_separation_deg = 25.0;
        c
    }

    #[test]
    fn deterministic() {
        let c = quick();
        let a = run_trial(&c, 20.0, 3).unwrap();
        let b = run_trial(&c, 20.0, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.frames.len(), 4);
        assert_eq!(a.track.frames.len(), 4);
    }

    #[test]
    fn noiseless_trial_is_exact() {
        let mut c = quick();
        c.offsets.to = 0.0;
        c.offsets.cfo = 0.0;
        c.offsets.to_drift = 0.0;
        c.offsets.cfo_drift = 0.0;
        c.tracking.r_tau = Some(1e-24);
        c.tracking.r_f = Some(1e-4);
        c.sweep.axis = SweepAxis::Sinr;
        let r = run_trial(&c, 300.0, 0).unwrap();
        assert_eq!(r.mdl_order, 2);
        assert!(r.los_found);
        let pos: Vec<f64> = r.errors(Method::Oracle, Quantity::PositionM).map(|s| s.error).collect();
        assert_eq!(pos.len(), 1);
        assert!(pos[0] < 1e-3, "position error {}", pos[0]);
    }

    #[test]
    fn method_filter_limits_rows() {
        let mut c = quick();
        c.methods = vec![Method::Tvoe];
        let r = run_trial(&c, 20.0, 1).unwrap();
        assert!(r.samples.iter().all(|s| s.method == Method::Tvoe));
        assert!(r.music_aoas.is_empty());
        assert!(r.samples.iter().any(|s| s.quantity == Quantity::ToS));
    }

    #[test]
    fn split_los_picks_nearest_within_radius() {
        let los = Angles::from_degrees(45.0, 50.0);
        let est = [
            Angles::from_degrees(-60.0, 30.0),
            Angles::from_degrees(46.0, 50.0),
            Angles::from_degrees(44.0, 52.0),
        ];
        let (l, rest) = split_los(&est, &los, 5f64.to_radians());
        assert_eq!(l, Some(1));
        assert_eq!(rest, vec![0, 2]);
        let (l, rest) = split_los(&est[..1], &los, 5f64.to_radians());
        assert_eq!((l, rest), (None, vec![0]));
    }

    #[test]
    fn quantity_names_round_trip() {
        for q in Quantity::ALL {
            assert_eq!(q.as_str().parse::<Quantity>().unwrap(), q);
        }
    }
}
