//! Time-varying offset estimation: LoS residuals, Kalman tracking of the
//! (timing, frequency) offset pair, compensation of reflected-path estimates
//! and bistatic target solution.

use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{locate_on_ellipse, Angles, Vec3, SPEED_OF_LIGHT};

/// Offset measurement `z_t` for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualObservation {
    pub frame: usize,
    /// seconds
    pub tau_off_meas: f64,
    /// Hz
    pub f_off_meas: f64,
}

impl ResidualObservation {
    pub fn vector(&self) -> Vector2<f64> {
        Vector2::new(self.tau_off_meas, self.f_off_meas)
    }
}

pub fn build_residual(
    tau_los_meas: f64,
    f_los_meas: f64,
    tau_geo: f64,
    f_geo: f64,
    frame: usize,
) -> ResidualObservation {
    ResidualObservation {
        frame,
        tau_off_meas: tau_los_meas - tau_geo,
        f_off_meas: f_los_meas - f_geo,
    }
}

/// Random-walk model. Units: s² and Hz² on the diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfConfig {
    pub q: Matrix2<f64>,
    pub r: Matrix2<f64>,
    /// Overrides the first residual as the initial state.
    pub x0: Option<Vector2<f64>>,
    /// Overrides `R` as the initial covariance.
    pub p0: Option<Matrix2<f64>>,
    /// Form the gain from `P_{t−1|t−1}` instead of the predicted covariance.
    pub gain_from_posterior: bool,
}

impl EkfConfig {
    pub fn diagonal(q_tau: f64, q_f: f64, r_tau: f64, r_f: f64) -> Self {
        Self {
            q: Matrix2::new(q_tau, 0.0, 0.0, q_f),
            r: Matrix2::new(r_tau, 0.0, 0.0, r_f),
            x0: None,
            p0: None,
            gain_from_posterior: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfState {
    /// `[τ_off (s), f_off (Hz)]`
    pub x: Vector2<f64>,
    pub p: Matrix2<f64>,
}

impl EkfState {
    pub fn tau_off(&self) -> f64 {
        self.x[0]
    }

    pub fn f_off(&self) -> f64 {
        self.x[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: usize,
    pub predicted: EkfState,
    pub updated: EkfState,
    pub gain: Matrix2<f64>,
    pub innovation: Vector2<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OffsetTrack {
    pub frames: Vec<TrackFrame>,
}

impl OffsetTrack {
    pub fn last(&self) -> Option<&EkfState> {
        self.frames.last().map(|f| &f.updated)
    }

    /// Columns `frame, tau_pred, f_pred, tau_upd, f_upd, p11, p22, k11, k22,
    /// innov_tau, innov_f`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "frame",
            "tau_pred",
            "f_pred",
            "tau_upd",
            "f_upd",
            "p11",
            "p22",
            "k11",
            "k22",
            "innov_tau",
            "innov_f",
        ])?;
        for f in &self.frames {
            let mut rec = vec![f.frame.to_string()];
            rec.extend(
                [
                    f.predicted.x[0],
                    f.predicted.x[1],
                    f.updated.x[0],
                    f.updated.x[1],
                    f.updated.p[(0, 0)],
                    f.updated.p[(1, 1)],
                    f.gain[(0, 0)],
                    f.gain[(1, 1)],
                    f.innovation[0],
                    f.innovation[1],
                ]
                .iter()
                .map(|v| format!("{v:e}")),
            );
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

fn symmetrize(p: Matrix2<f64>) -> Matrix2<f64> {
    (p + p.transpose()) * 0.5
}

/// One predict/update cycle with identity dynamics and observation.
pub fn ekf_step(state: &EkfState, z: &ResidualObservation, cfg: &EkfConfig) -> Result<TrackFrame> {
    let x_pred = state.x;
    let p_pred = symmetrize(state.p + cfg.q);
    let p_gain = if cfg.gain_from_posterior { state.p } else { p_pred };
    let s = p_gain + cfg.r;
    let s_inv = s.try_inverse().ok_or(Error::SingularInnovation)?;
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let k = p_gain * s_inv;
    let innovation = z.vector() - x_pred;
    let x = x_pred + k * innovation;
    let p = symmetrize((Matrix2::identity() - k) * p_pred);
    Ok(TrackFrame {
        frame: z.frame,
        predicted: EkfState { x: x_pred, p: p_pred },
        updated: EkfState { x, p },
        gain: k,
        innovation,
    })
}

/// Runs the filter over all residuals. The state starts at the first
/// residual with covariance `R` unless the config overrides either.
pub fn track_offsets(residuals: &[ResidualObservation], cfg: &EkfConfig) -> Result<OffsetTrack> {
    let first = residuals
        .first()
        .ok_or_else(|| Error::InvalidArgument("no residuals to track".into()))?;
    let mut state = EkfState {
        x: cfg.x0.unwrap_or_else(|| first.vector()),
        p: cfg.p0.unwrap_or(cfg.r),
    };
    let mut frames = Vec::with_capacity(residuals.len());
    for z in residuals {
        let step = ekf_step(&state, z, cfg)?;
        state = step.updated;
        frames.push(step);
    }
    Ok(OffsetTrack { frames })
}

/// Positive root of `P = (P + q) r / (P + q + r)`.
pub fn riccati_fixed_point(q: f64, r: f64) -> f64 {
    (-q + (q * q + 4.0 * q * r).sqrt()) / 2.0
}

pub fn compensate(tau_meas: f64, f_meas: f64, state: &EkfState) -> (f64, f64) {
    (tau_meas - state.tau_off(), f_meas - state.f_off())
}

/// Fixed offset for the whole run: the mean of all residuals.
pub fn static_offset_baseline(residuals: &[ResidualObservation]) -> Result<(f64, f64)> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("no residuals to average".into()));
    }
    let n = residuals.len() as f64;
    let (t, f) = residuals
        .iter()
        .fold((0.0, 0.0), |(t, f), r| (t + r.tau_off_meas, f + r.f_off_meas));
    Ok((t / n, f / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSolution {
    pub position: Vec3,
    /// Rate of the bistatic range sum, m/s.
    pub range_rate: f64,
}

pub fn solve_target(tau: f64, f: f64, aoa: &Angles, q_tx: &Vec3, q_rx: &Vec3, lambda: f64) -> Result<TargetSolution> {
    let position = locate_on_ellipse(q_tx, q_rx, SPEED_OF_LIGHT * tau, aoa)?;
    Ok(TargetSolution {
        position,
        range_rate: lambda * f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn obs(frame: usize, t: f64, f: f64) -> ResidualObservation {
        ResidualObservation {
            frame,
            tau_off_meas: t,
            f_off_meas: f,
        }
    }

    #[test]
    fn residual_examples() {
        let r = build_residual(1e-6, 50.0, 1e-6, 50.0, 0);
        assert_eq!((r.tau_off_meas, r.f_off_meas), (0.0, 0.0));
        let r = build_residual(600e-9, 100.0, 577.35e-9, 0.0, 3);
        assert_relative_eq!(r.tau_off_meas, 22.65e-9, max_relative = 1e-9);
        assert_eq!(r.f_off_meas, 100.0);
    }

    #[test]
    fn scalar_hand_step() {
        let cfg = EkfConfig::diagonal(0.01, 0.01, 1.0, 1.0);
        let s = EkfState {
            x: Vector2::zeros(),
            p: Matrix2::identity(),
        };
        let out = ekf_step(&s, &obs(1, 1.0, 1.0), &cfg).unwrap();
        for i in 0..2 {
            assert_relative_eq!(out.predicted.p[(i, i)], 1.01, epsilon = 1e-12);
            assert_relative_eq!(out.gain[(i, i)], 1.01 / 2.01, epsilon = 1e-12);
            assert_relative_eq!(out.updated.x[i], 0.502488, epsilon = 1e-6);
            assert_relative_eq!(out.updated.x[i], 1.01 / 2.01, epsilon = 1e-12);
            // (1 − K) P_pred = K R
            assert_relative_eq!(out.updated.p[(i, i)], 0.502488, epsilon = 1e-6);
            assert_relative_eq!(out.updated.p[(i, i)], (1.0 - 1.01 / 2.01) * 1.01, epsilon = 1e-12);
        }
    }

    #[test]
    fn tiny_r_follows_measurement() {
        let cfg = EkfConfig::diagonal(0.0, 0.0, 1e-18, 1e-18);
        let s = EkfState {
            x: Vector2::new(5e-9, 10.0),
            p: Matrix2::identity(),
        };
        let z = obs(0, 7e-9, 30.0);
        let out = ekf_step(&s, &z, &cfg).unwrap();
        assert_relative_eq!(out.updated.x[0], 7e-9, max_relative = 1e-9);
        assert_relative_eq!(out.updated.x[1], 30.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_q_reduces_to_running_mean() {
        let r = 4.0;
        let mut cfg = EkfConfig::diagonal(0.0, 0.0, r, r);
        cfg.p0 = Some(Matrix2::identity() * (1e6 * r));
        cfg.x0 = Some(Vector2::zeros());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(3.0, 2.0).unwrap();
        let zs: Vec<ResidualObservation> = (0..50)
            .map(|i| obs(i, noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let track = track_offsets(&zs, &cfg).unwrap();
        for (i, f) in track.frames.iter().enumerate() {
            let n = (i + 1) as f64;
            let mean = zs[..=i].iter().map(|z| z.tau_off_meas).sum::<f64>() / n;
            // the diffuse prior contributes a weight of 1e-6 relative to one sample
            assert!((f.updated.x[0] - mean).abs() < 1e-5 * mean.abs().max(1.0));
        }
    }

    #[test]
    fn constant_residuals_converge() {
        let cfg = EkfConfig::diagonal(1e-6, 1e-6, 0.5, 0.5);
        let zs: Vec<_> = (0..200).map(|i| obs(i, 2.5, -1.5)).collect();
        let t = track_offsets(&zs, &cfg).unwrap();
        let x = t.last().unwrap().x;
        assert!((x[0] - 2.5).abs() < 1e-6 && (x[1] + 1.5).abs() < 1e-6);
        let one = track_offsets(&zs[..1], &cfg).unwrap();
        assert_eq!(one.last().unwrap().x, Vector2::new(2.5, -1.5));
    }

    #[test]
    fn white_noise_steady_state_error() {
        let (q, r) = (1e-4, 1.0);
        let cfg = EkfConfig::diagonal(q, q, r, r);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, r.sqrt()).unwrap();
        let zs: Vec<_> = (0..10_000)
            .map(|i| obs(i, noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let t = track_offsets(&zs, &cfg).unwrap();
        let tail = &t.frames[1000..];
        let var = tail.iter().map(|f| f.updated.x[0].powi(2)).sum::<f64>() / tail.len() as f64;
        assert!(var <= (2.0 * r) / 2.0, "{var}");
        let p_star = riccati_fixed_point(q, r);
        assert!(var < 3.0 * p_star, "{var} vs {p_star}");
    }

    #[test]
    fn riccati_examples_and_convergence() {
        assert_eq!(riccati_fixed_point(0.0, 1.0), 0.0);
        assert_relative_eq!(riccati_fixed_point(1.0, 1.0), 0.618_033_988_749_895, epsilon = 1e-12);
        let (q, r) = (0.01, 1.0);
        let p_star = riccati_fixed_point(q, r);
        let mut p = 5.0;
        let mut steps = 0;
        while (p - p_star).abs() >= 1e-9 {
            p = (p + q) * r / (p + q + r);
            steps += 1;
        }
        assert!(steps <= 200, "{steps}");
    }

    #[test]
    fn covariance_shrinks_and_gain_bounded() {
        let cfg = EkfConfig::diagonal(0.3, 0.1, 1.0, 2.0);
        let s = EkfState {
            x: Vector2::zeros(),
            p: Matrix2::new(2.0, 0.3, 0.3, 1.0),
        };
        let out = ekf_step(&s, &obs(0, 1.0, 1.0), &cfg).unwrap();
        let d = out.predicted.p - out.updated.p;
        let e = d.symmetric_eigen().eigenvalues;
        assert!(e.iter().all(|&v| v >= -1e-12));
        let kg = out.gain.symmetric_eigen().eigenvalues;
        assert!(kg.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn posterior_gain_variant_differs_by_q() {
        let mut cfg = EkfConfig::diagonal(0.5, 0.5, 1.0, 1.0);
        let s = EkfState {
            x: Vector2::zeros(),
            p: Matrix2::identity(),
        };
        let standard = ekf_step(&s, &obs(0, 1.0, 1.0), &cfg).unwrap();
        cfg.gain_from_posterior = true;
        let literal = ekf_step(&s, &obs(0, 1.0, 1.0), &cfg).unwrap();
        assert_relative_eq!(standard.gain[(0, 0)], 1.5 / 2.5, epsilon = 1e-12);
        assert_relative_eq!(literal.gain[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn singular_innovation() {
        let cfg = EkfConfig::diagonal(0.0, 0.0, 0.0, 0.0);
        let s = EkfState {
            x: Vector2::zeros(),
            p: Matrix2::zeros(),
        };
        assert_eq!(ekf_step(&s, &obs(0, 1.0, 1.0), &cfg), Err(Error::SingularInnovation));
    }

    #[test]
    fn frame_shift_invariance() {
        let cfg = EkfConfig::diagonal(1e-3, 1e-3, 0.2, 0.2);
        let a: Vec<_> = (0..20).map(|i| obs(i, (i as f64).sin(), (i as f64).cos())).collect();
        let b: Vec<_> = a
            .iter()
            .map(|z| obs(z.frame + 100, z.tau_off_meas, z.f_off_meas))
            .collect();
        let ta = track_offsets(&a, &cfg).unwrap();
        let tb = track_offsets(&b, &cfg).unwrap();
        for (x, y) in ta.frames.iter().zip(&tb.frames) {
            assert_eq!(x.updated, y.updated);
        }
    }

    #[test]
    fn compensation_and_baseline() {
        let s = EkfState {
            x: Vector2::new(0.5e-6, 200.0),
            p: Matrix2::zeros(),
        };
        let (t, f) = compensate(2.0e-6, 1200.0, &s);
        assert_relative_eq!(t, 1.5e-6, epsilon = 1e-18);
        assert_eq!(f, 1000.0);
        let (t, _) = static_offset_baseline(&[obs(0, 1e-9, 0.0), obs(1, 3e-9, 0.0)]).unwrap();
        assert_relative_eq!(t, 2e-9, max_relative = 1e-12);
        assert!(static_offset_baseline(&[]).is_err());
    }

    #[test]
    fn drifting_offset_baseline_lags_by_half_ramp() {
        let (a, b) = (20e-9, 1e-9);
        let n = 200;
        let zs: Vec<_> = (0..n).map(|i| obs(i, a + b * i as f64, 0.0)).collect();
        let (base, _) = static_offset_baseline(&zs).unwrap();
        let truth_final = a + b * (n - 1) as f64;
        assert_relative_eq!(truth_final - base, b * (n - 1) as f64 / 2.0, max_relative = 1e-9);
        let cfg = EkfConfig::diagonal(b * b, 1.0, 1e-20, 1.0);
        let t = track_offsets(&zs, &cfg).unwrap();
        assert!((t.last().unwrap().x[0] - truth_final).abs() < 0.05 * b);
    }

    #[test]
    fn solve_target_examples() {
        let tx = Vec3::new(100.0, 0.0, 0.0);
        let rx = Vec3::zeros();
        let tau = 161.803_398_874_989_5 / SPEED_OF_LIGHT;
        let s = solve_target(tau, 0.0, &Angles::new(0.0, 0.0), &tx, &rx, 0.01).unwrap();
        assert!((s.position - Vec3::new(0.0, 0.0, 50.0)).norm() < 1e-6);
        assert_eq!(s.range_rate, 0.0);
        let blind = solve_target(100.0 / SPEED_OF_LIGHT, 0.0, &Angles::new(0.0, 0.3), &tx, &rx, 0.01);
        assert!(matches!(blind, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn track_csv_has_eleven_columns() {
        let cfg = EkfConfig::diagonal(1e-3, 1e-3, 0.2, 0.2);
        let t = track_offsets(&[obs(0, 1.0, 2.0), obs(1, 1.1, 2.1)], &cfg).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split(',').count() == 11));
        assert!(lines[0].starts_with("frame,tau_pred"));
    }
}
