//! Random scenes and the per-frame ground truth derived from them.
//!
//! Time is measured relative to the sensing frame: the configured UAV
//! position is where the UAV is at `t = 0`, and the tracking frames lie at
//! negative times before it.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, GainModel, Layout, TxBeam};
use super::HarnessError;
use crate::scene::{
    bistatic_delay_of_target, bistatic_doppler_of_target, locate_on_ellipse, los_geo_delay, los_geo_doppler, Angles,
    SceneGeometry, Target, Trajectory, Vec3,
};
use crate::waveform::{multibeam_weights, path_gain_los, path_gain_nlos, steering_vector, CVector, PathParams, C64};

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: SceneGeometry,
    /// Complex path amplitudes `[LoS, targets…]`, held fixed over the track.
    pub amplitudes: Vec<C64>,
}

/// Paths and transmit gains at one instant; `paths[0]` is the LoS path.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    pub time: f64,
    pub paths: Vec<PathParams>,
    pub chi: Vec<C64>,
}

impl FrameTruth {
    pub fn los(&self) -> &PathParams {
        &self.paths[0]
    }

    pub fn targets(&self) -> &[PathParams] {
        &self.paths[1..]
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Draws targets uniformly in range sum over the sensing annulus and
/// uniformly in arrival angle, keeping every arrival at least
/// `min_separation_deg` from the LoS and from each other.
pub fn draw_scene(cfg: &ExperimentConfig, seed: u64) -> Result<Scenario, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = &cfg.scene;
    let bs = cfg.bs_position();
    let uav = cfg.uav_position();
    let los_aoa = Angles::from_vector(&(uav - bs))?;
    let lim = cfg.range_limits();
    let min_sep = s.min_separation_deg.to_radians();
    let (el_lo, el_hi) = (
        s.elevation_range_deg[0].to_radians(),
        s.elevation_range_deg[1].to_radians(),
    );
    let clear = |a: &Angles, taken: &[Angles]| {
        a.separation(&los_aoa) >= min_sep && taken.iter().all(|t| a.separation(t) >= min_sep)
    };

    let mut aoas: Vec<Angles> = Vec::new();
    let mut targets = Vec::new();
    match s.layout {
        Layout::Random => {
            for _ in 0..s.n_targets {
                let mut placed = false;
                for _ in 0..MAX_ATTEMPTS {
                    let r = rng.random_range(lim.r_min..lim.r_max);
                    let aoa = Angles::new(rng.random_range(-PI..PI), rng.random_range(el_lo..el_hi));
                    if !clear(&aoa, &aoas) {
                        continue;
                    }
                    let Ok(position) = locate_on_ellipse(&uav, &bs, r, &aoa) else {
                        continue;
                    };
                    let speed = rng.random_range(0.0..=s.target_speed_max);
                    let velocity = random_direction(&mut rng) * speed;
                    aoas.push(aoa);
                    targets.push(Target {
                        position,
                        velocity,
                        reflectivity: s.reflectivity,
                    });
                    placed = true;
                    break;
                }
                if !placed {
                    return Err(HarnessError::Config(format!(
                        "could not place {} targets {}° apart",
                        s.n_targets, s.min_separation_deg
                    )));
                }
            }
        }
        Layout::CoherentPair => {
            let sep = s.pair_separation_deg.to_radians();
            let mut placed = false;
            for _ in 0..MAX_ATTEMPTS {
                let r = rng.random_range(lim.r_min..lim.r_max);
                let phi = rng.random_range(-PI..PI);
                let theta = rng.random_range(el_lo..el_hi - sep);
                let pair = [Angles::new(phi, theta), Angles::new(phi, theta + sep)];
                if pair.iter().any(|a| a.separation(&los_aoa) < min_sep) {
                    continue;
                }
                let (Ok(q1), Ok(q2)) = (
                    locate_on_ellipse(&uav, &bs, r, &pair[0]),
                    locate_on_ellipse(&uav, &bs, r, &pair[1]),
                ) else {
                    continue;
                };
                for position in [q1, q2] {
                    targets.push(Target {
                        position,
                        velocity: Vec3::zeros(),
                        reflectivity: s.reflectivity,
                    });
                }
                placed = true;
                break;
            }
            if !placed {
                return Err(HarnessError::Config("could not place the coherent pair".into()));
            }
        }
    }

    let lambda = crate::scene::SPEED_OF_LIGHT / cfg.ofdm.carrier_frequency;
    let magnitudes: Vec<f64> = match cfg.channel.gain_model {
        GainModel::Normalized => std::iter::once(cfg.channel.los_amplitude)
            .chain(targets.iter().map(|t| t.reflectivity))
            .collect(),
        GainModel::Physical => {
            let raw: Vec<f64> = std::iter::once(path_gain_los(lambda, (uav - bs).norm()))
                .chain(targets.iter().map(|t| {
                    path_gain_nlos(
                        lambda,
                        (t.position - uav).norm(),
                        (t.position - bs).norm(),
                        t.reflectivity,
                    )
                }))
                .collect();
            let reference = if raw.len() > 1 {
                (raw[1..].iter().map(|g| g * g).sum::<f64>() / (raw.len() - 1) as f64).sqrt()
            } else {
                raw[0]
            };
            raw.iter().map(|g| g / reference).collect()
        }
    };
    let amplitudes = magnitudes
        .iter()
        .map(|&m| C64::from_polar(m, rng.random_range(0.0..2.0 * PI)))
        .collect();

    Ok(Scenario {
        geometry: SceneGeometry {
            bs_position: bs,
            uav_trajectory: Trajectory::linear(uav, Vec3::from(s.uav_velocity)),
            targets,
        },
        amplitudes,
    })
}

fn unit_conj(v: CVector) -> CVector {
    let n = v.norm();
    v.map(|x| x.conj()) / C64::from(n)
}

impl Scenario {
    pub fn n_targets(&self) -> usize {
        self.geometry.targets.len()
    }

    /// Paths and transmit gains at time `t`.
    pub fn frame(&self, cfg: &ExperimentConfig, t: f64) -> Result<FrameTruth, HarnessError> {
        let g = &self.geometry;
        let lambda = crate::scene::SPEED_OF_LIGHT / cfg.ofdm.carrier_frequency;
        let bs = g.bs_position;
        let q_u = g.uav_trajectory.position(t);
        let v_u = g.uav_trajectory.velocity_at(t);

        let mut paths = Vec::with_capacity(1 + g.targets.len());
        paths.push(PathParams {
            gain: self.amplitudes[0],
            delay: los_geo_delay(&g.uav_trajectory, t, &bs),
            doppler: los_geo_doppler(&g.uav_trajectory, t, &bs, lambda)?,
            aoa: Angles::from_vector(&(q_u - bs))?,
            aod: Angles::from_vector(&(bs - q_u))?,
            is_los: true,
        });
        for (target, amp) in g.targets.iter().zip(&self.amplitudes[1..]) {
            let q = target.position_at(t);
            let to_target = q - q_u;
            let tx_term = to_target.dot(&v_u) / to_target.norm() / lambda;
            paths.push(PathParams {
                gain: *amp,
                delay: bistatic_delay_of_target(&q_u, &bs, &q),
                doppler: bistatic_doppler_of_target(&q_u, &bs, &q, &target.velocity, lambda)? - tx_term,
                aoa: Angles::from_vector(&(q - bs))?,
                aod: Angles::from_vector(&to_target)?,
                is_los: false,
            });
        }

        let chi = match cfg.channel.tx_beam {
            TxBeam::Isotropic => vec![C64::new(1.0, 0.0); paths.len()],
            TxBeam::Multibeam => {
                let tx = cfg.tx_upa();
                let steer = |a: &Angles| steering_vector(&tx, a.azimuth, a.elevation);
                let w_comm = unit_conj(steer(&paths[0].aod));
                let w_sense = if paths.len() > 1 {
                    unit_conj(
                        paths[1..]
                            .iter()
                            .fold(CVector::zeros(tx.len()), |acc, p| acc + steer(&p.aod)),
                    )
                } else {
                    w_comm.clone()
                };
                let w = multibeam_weights(&w_sense, &w_comm, cfg.channel.beta_r, cfg.channel.beam_phase)?;
                let norm = (tx.len() as f64).sqrt();
                paths
                    .iter()
                    .map(|p| (steer(&p.aod).transpose() * &w)[0] / norm)
                    .collect()
            }
        };
        Ok(FrameTruth { time: t, paths, chi })
    }
}
