//! Experiment configuration. Every section has defaults (the desk profile),
//! so a file only needs the keys it changes. Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::scene::{sensing_range_limits, RangeLimits, Vec3};
use crate::subspace::{AngleGrid, DdOptions, SmoothingPlan};
use crate::tvoe::EkfConfig;
use crate::waveform::{OfdmGrid, UpaSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Monte Carlo trials per sweep point.
    pub trials: usize,
    /// Methods whose rows are reported. MUSIC is only computed when listed.
    pub methods: Vec<Method>,
    pub ofdm: OfdmConfig,
    pub array: ArrayConfig,
    pub scene: SceneConfig,
    pub channel: ChannelConfig,
    pub offsets: OffsetModel,
    pub tracking: TrackingConfig,
    pub estimation: EstimationConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub n_packets: usize,
    /// Hz
    pub delta_f: f64,
    /// s
    pub t_guard: f64,
    pub symbols_per_packet: usize,
    /// Hz
    pub carrier_frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    /// Receive array `[m_x, m_y]` at the base station.
    pub rx: [usize; 2],
    /// Transmit array on the UAV (used by the multibeam transmitter).
    pub tx: [usize; 2],
    /// Element spacing in wavelengths.
    pub spacing: f64,
    /// Subarrays per axis for spatial smoothing.
    pub smoothing: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Independent targets drawn inside the sensing annulus.
    Random,
    /// Two static targets on one ellipse, `pair_separation_deg` apart in
    /// elevation, so their echoes are fully coherent.
    CoherentPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Receiver position at the sensing instant, m.
    pub bs_position: [f64; 3],
    /// Transmitter position at the sensing instant, m.
    pub uav_position: [f64; 3],
    pub uav_velocity: [f64; 3],
    pub layout: Layout,
    /// Ignored by the coherent-pair layout, which always has two.
    pub n_targets: usize,
    pub pair_separation_deg: f64,
    /// Minimum angle between any two arrivals (targets and LoS), degrees.
    pub min_separation_deg: f64,
    /// Elevation interval of the drawn arrivals, degrees from the array
    /// normal.
    pub elevation_range_deg: [f64; 2],
    /// Target speeds are uniform in `[0, target_speed_max]`, m/s.
    pub target_speed_max: f64,
    pub reflectivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainModel {
    /// Unit-amplitude echoes; the LoS amplitude is `los_amplitude`.
    Normalized,
    /// Free-space amplitudes, rescaled so the mean echo power is one.
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxBeam {
    /// Unit transmit gain toward every path.
    Isotropic,
    /// Communication beam toward the base station plus a sensing beam
    /// toward the targets, split by `beta_r`.
    Multibeam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub gain_model: GainModel,
    pub los_amplitude: f64,
    pub tx_beam: TxBeam,
    pub beta_r: f64,
    /// Phase of the sensing beam relative to the communication beam, rad.
    pub beam_phase: f64,
    /// Per-element SNR of a unit-amplitude path, dB. The noise power is
    /// `10^(−sinr_db/10)`.
    pub sinr_db: f64,
}

/// `τ_off(t) = to + to_drift·t + jitter`, `f_off(t)` likewise, with `t`
/// measured from the first tracking frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffsetModel {
    /// s
    pub to: f64,
    /// Hz
    pub cfo: f64,
    /// s/s
    pub to_drift: f64,
    /// Hz/s
    pub cfo_drift: f64,
    /// Per-frame standard deviation, s.
    pub to_jitter: f64,
    /// Per-frame standard deviation, Hz.
    pub cfo_jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    /// Frames per track; the last one is the sensing frame.
    pub frames: usize,
    /// Time between frames, s.
    pub frame_interval: f64,
    /// Process noise variances per frame, s² and Hz².
    pub q_tau: f64,
    pub q_f: f64,
    /// Measurement noise variances. When absent they are calibrated from
    /// offset-free frames.
    pub r_tau: Option<f64>,
    pub r_f: Option<f64>,
    pub calibration_frames: usize,
    /// Lower limits on the calibrated variances.
    pub r_floor_tau: f64,
    pub r_floor_f: f64,
    pub gain_from_posterior: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub phi_step_deg: f64,
    pub theta_step_deg: f64,
    pub theta_max_deg: f64,
    pub dd_sub_n: usize,
    pub dd_sub_m: usize,
    /// Cap on the model order picked by MDL.
    pub max_sources: usize,
    /// An arrival this close to the geometric LoS direction is taken as the
    /// LoS path, degrees.
    pub los_exclusion_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Sinr,
    BetaR,
    To,
    Cfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Values in SI units: dB, ratio, s or Hz.
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Music,
    Ssmusic,
    Tvoe,
    Static,
    Uncomp,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Music,
        Method::Ssmusic,
        Method::Tvoe,
        Method::Static,
        Method::Uncomp,
        Method::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Music => "MUSIC",
            Method::Ssmusic => "SSMUSIC",
            Method::Tvoe => "TVOE",
            Method::Static => "STATIC",
            Method::Uncomp => "UNCOMP",
            Method::Oracle => "ORACLE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Sinr => "sinr",
            SweepAxis::BetaR => "beta_r",
            SweepAxis::To => "to",
            SweepAxis::Cfo => "cfo",
        }
    }

    pub fn default_points(self) -> Vec<f64> {
        match self {
            SweepAxis::Sinr => vec![-10.0, 0.0, 10.0, 20.0, 30.0],
            SweepAxis::BetaR => vec![0.1, 0.3, 0.5, 0.7, 0.9],
            SweepAxis::To => vec![10e-9, 20e-9, 40e-9],
            SweepAxis::Cfo => vec![100.0, 500.0, 1000.0],
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sinr" => Ok(SweepAxis::Sinr),
            "beta_r" | "beta-r" => Ok(SweepAxis::BetaR),
            "to" => Ok(SweepAxis::To),
            "cfo" => Ok(SweepAxis::Cfo),
            _ => Err(format!("unknown sweep axis `{s}` (sinr, beta_r, to, cfo)")),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 128,
            n_packets: 16,
            delta_f: 97_656.25,
            t_guard: 3.34e-6,
            symbols_per_packet: 1,
            carrier_frequency: 28e9,
        }
    }
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            rx: [8, 8],
            tx: [4, 4],
            spacing: 0.5,
            smoothing: 2,
        }
    }
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0, 0.0],
            uav_position: [100.0, 100.0, 100.0],
            uav_velocity: [2.0, 1.0, 0.0],
            layout: Layout::Random,
            n_targets: 2,
            pair_separation_deg: 10.0,
            min_separation_deg: 15.0,
            elevation_range_deg: [15.0, 70.0],
            target_speed_max: 10.0,
            reflectivity: 1.0,
        }
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            gain_model: GainModel::Normalized,
            los_amplitude: 1.0,
            tx_beam: TxBeam::Isotropic,
            beta_r: 0.5,
            beam_phase: 0.0,
            sinr_db: 20.0,
        }
    }
}

impl Default for OffsetModel {
    fn default() -> Self {
        Self {
            to: 20e-9,
            cfo: 500.0,
            to_drift: 2e-9,
            cfo_drift: 5.0,
            to_jitter: 0.0,
            cfo_jitter: 0.0,
        }
    }
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            frames: 200,
            frame_interval: 0.1,
            q_tau: 1e-18,
            q_f: 1.0,
            r_tau: None,
            r_f: None,
            calibration_frames: 16,
            r_floor_tau: 1e-24,
            r_floor_f: 1e-4,
            gain_from_posterior: false,
        }
    }
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            phi_step_deg: 0.5,
            theta_step_deg: 0.5,
            theta_max_deg: 90.0,
            dd_sub_n: 16,
            dd_sub_m: 4,
            max_sources: 6,
            los_exclusion_deg: 5.0,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Sinr,
            points: SweepAxis::Sinr.default_points(),
        }
    }
}

impl ExperimentConfig {
    /// Laptop-scale profile: 128 subcarriers, 16 packets, 8×8 array.
    pub fn desk() -> Self {
        Self {
            seed: 1,
            trials: 100,
            methods: Method::ALL.to_vec(),
            ofdm: OfdmConfig::default(),
            array: ArrayConfig::default(),
            scene: SceneConfig::default(),
            channel: ChannelConfig::default(),
            offsets: OffsetModel::default(),
            tracking: TrackingConfig::default(),
            estimation: EstimationConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    /// Full-scale grid: 1024 subcarriers over 100 MHz, 64 packets, four
    /// reflected paths.
    pub fn table1() -> Self {
        let mut c = Self::desk();
        c.ofdm.n_subcarriers = 1024;
        c.ofdm.n_packets = 64;
        c.scene.n_targets = 4;
        c.scene.min_separation_deg = 12.0;
        c.estimation.dd_sub_n = 64;
        c.estimation.dd_sub_m = 16;
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<OfdmGrid, HarnessError> {
        let o = &self.ofdm;
        OfdmGrid::new(
            o.n_subcarriers,
            o.n_packets,
            o.delta_f,
            o.t_guard,
            o.symbols_per_packet,
            o.carrier_frequency,
        )
        .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn rx_upa(&self) -> UpaSpec {
        UpaSpec {
            m_x: self.array.rx[0],
            m_y: self.array.rx[1],
            spacing: self.array.spacing,
        }
    }

    pub fn tx_upa(&self) -> UpaSpec {
        UpaSpec {
            m_x: self.array.tx[0],
            m_y: self.array.tx[1],
            spacing: self.array.spacing,
        }
    }

    pub fn smoothing_plan(&self) -> Result<SmoothingPlan, HarnessError> {
        SmoothingPlan::new(self.array.smoothing, &self.rx_upa()).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn angle_grid(&self) -> AngleGrid {
        AngleGrid {
            phi_step_deg: self.estimation.phi_step_deg,
            theta_step_deg: self.estimation.theta_step_deg,
            theta_max_deg: self.estimation.theta_max_deg,
        }
    }

    pub fn dd_options(&self) -> DdOptions {
        DdOptions {
            sub_n: self.estimation.dd_sub_n,
            sub_m: self.estimation.dd_sub_m,
            max_order: 1,
        }
    }

    pub fn bs_position(&self) -> Vec3 {
        Vec3::from(self.scene.bs_position)
    }

    pub fn uav_position(&self) -> Vec3 {
        Vec3::from(self.scene.uav_position)
    }

    pub fn range_limits(&self) -> RangeLimits {
        let baseline = (self.uav_position() - self.bs_position()).norm();
        sensing_range_limits(baseline, self.ofdm.t_guard, self.ofdm.n_subcarriers, self.ofdm.delta_f)
    }

    /// Noise power per CSI element.
    pub fn noise_power(&self) -> f64 {
        10f64.powf(-self.channel.sinr_db / 10.0)
    }

    /// Filter settings with the given measurement variances.
    pub fn ekf(&self, r_tau: f64, r_f: f64) -> EkfConfig {
        let mut e = EkfConfig::diagonal(self.tracking.q_tau, self.tracking.q_f, r_tau, r_f);
        e.gain_from_posterior = self.tracking.gain_from_posterior;
        e
    }

    pub fn wants(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    /// Copy of this configuration with the sweep variable set to `value`.
    /// TO and CFO points zero the other offset entirely; a `beta_r` point
    /// switches to the multibeam transmitter.
    /// The configured value of a sweep quantity.
    pub fn value_of(&self, axis: SweepAxis) -> f64 {
        match axis {
            SweepAxis::Sinr => self.channel.sinr_db,
            SweepAxis::BetaR => self.channel.beta_r,
            SweepAxis::To => self.offsets.to,
            SweepAxis::Cfo => self.offsets.cfo,
        }
    }

    pub fn at(&self, axis: SweepAxis, value: f64) -> Self {
        let mut c = self.clone();
        match axis {
            SweepAxis::Sinr => c.channel.sinr_db = value,
            SweepAxis::BetaR => {
                c.channel.tx_beam = TxBeam::Multibeam;
                c.channel.beta_r = value;
            }
            SweepAxis::To => {
                c.offsets.to = value;
                c.offsets.cfo = 0.0;
                c.offsets.cfo_drift = 0.0;
                c.offsets.cfo_jitter = 0.0;
            }
            SweepAxis::Cfo => {
                c.offsets.cfo = value;
                c.offsets.to = 0.0;
                c.offsets.to_drift = 0.0;
                c.offsets.to_jitter = 0.0;
            }
        }
        c
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        let grid = self.grid()?;
        let rx = self.rx_upa();
        if rx.validate().is_err() || self.tx_upa().validate().is_err() {
            return bad("array sizes and spacing must be positive".into());
        }
        let plan = self.smoothing_plan()?;
        let sub_dim = plan.n_r * plan.n_r;
        let e = &self.estimation;
        if e.max_sources == 0 || e.max_sources >= sub_dim {
            return bad(format!(
                "max_sources {} must lie in [1, {}) for {}x{} subarrays",
                e.max_sources, sub_dim, plan.n_r, plan.n_r
            ));
        }
        if !(e.phi_step_deg > 0.0 && e.theta_step_deg > 0.0 && e.theta_max_deg > 0.0 && e.theta_max_deg <= 90.0) {
            return bad("angle grid steps must be positive and theta_max_deg in (0, 90]".into());
        }
        if e.dd_sub_n == 0
            || e.dd_sub_m == 0
            || e.dd_sub_n > grid.n_subcarriers
            || e.dd_sub_m > grid.n_packets
            || e.dd_sub_n * e.dd_sub_m < 2
        {
            return bad(format!(
                "delay-Doppler sub-block {}x{} does not fit the {}x{} grid",
                e.dd_sub_n, e.dd_sub_m, grid.n_subcarriers, grid.n_packets
            ));
        }
        if !(e.los_exclusion_deg >= 0.0) {
            return bad("los_exclusion_deg must be non-negative".into());
        }
        let s = &self.scene;
        let [lo, hi] = s.elevation_range_deg;
        if !(0.0 < lo && lo < hi && hi < 90.0) {
            return bad("elevation_range_deg must satisfy 0 < lo < hi < 90".into());
        }
        if s.layout == Layout::CoherentPair {
            if !(s.pair_separation_deg > 0.0 && s.pair_separation_deg < hi - lo) {
                return bad("pair_separation_deg must be positive and fit the elevation range".into());
            }
            if s.uav_velocity != [0.0; 3] {
                return bad("the coherent-pair layout needs a stationary UAV".into());
            }
        }
        if !(s.reflectivity > 0.0 && s.reflectivity <= 1.0) {
            return bad("reflectivity must lie in (0, 1]".into());
        }
        if !(s.target_speed_max >= 0.0 && s.min_separation_deg >= 0.0) {
            return bad("target_speed_max and min_separation_deg must be non-negative".into());
        }
        let limits = self.range_limits();
        if !(limits.r_max > limits.r_min) {
            return bad("guard interval too short: the sensing annulus is empty".into());
        }
        if limits.r_max >= crate::scene::SPEED_OF_LIGHT / grid.delta_f {
            return bad("sensing range exceeds the unambiguous delay interval".into());
        }
        let c = &self.channel;
        if !(c.los_amplitude > 0.0 && (0.0..=1.0).contains(&c.beta_r) && c.sinr_db.is_finite()) {
            return bad("los_amplitude must be positive, beta_r in [0, 1] and sinr_db finite".into());
        }
        let o = &self.offsets;
        if ![o.to, o.cfo, o.to_drift, o.cfo_drift].iter().all(|v| v.is_finite())
            || !(o.to_jitter >= 0.0 && o.cfo_jitter >= 0.0)
        {
            return bad("offset model values must be finite with non-negative jitter".into());
        }
        let t = &self.tracking;
        if t.frames == 0 || t.calibration_frames < 2 {
            return bad("tracking needs at least one frame and two calibration frames".into());
        }
        if !(t.frame_interval > 0.0 && t.q_tau >= 0.0 && t.q_f >= 0.0 && t.r_floor_tau > 0.0 && t.r_floor_f > 0.0) {
            return bad("frame_interval and floors must be positive, process noise non-negative".into());
        }
        if t.r_tau.is_some_and(|r| !(r > 0.0)) || t.r_f.is_some_and(|r| !(r > 0.0)) {
            return bad("measurement variances must be positive".into());
        }
        if self.sweep.points.is_empty() {
            return bad("sweep points are empty".into());
        }
        for &v in &self.sweep.points {
            let ok = match self.sweep.axis {
                SweepAxis::BetaR => (0.0..=1.0).contains(&v),
                _ => v.is_finite(),
            };
            if !ok {
                return bad(format!("sweep value {v} is invalid for axis {}", self.sweep.axis));
            }
        }
        Ok(())
    }
}
