//! Ground-truth geometry: positions, trajectories, bistatic range algebra,
//! ellipse localization and sensing-range limits.
//!
//! Angle convention (used everywhere in the crate): azimuth `phi` measured in
//! the array x-y plane from the x axis, elevation `theta` measured from the
//! array normal (z axis). The unit direction is
//! `(sin θ cos φ, sin θ sin φ, cos θ)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Position or velocity in meters (per second).
pub type Vec3 = Vector3<f64>;

/// Angle pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angles {
    pub const fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    pub fn from_degrees(azimuth: f64, elevation: f64) -> Self {
        Self::new(azimuth.to_radians(), elevation.to_radians())
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (st, ct) = self.elevation.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }

    /// Angles of a (not necessarily normalized) direction vector.
    pub fn from_vector(d: &Vec3) -> Result<Self> {
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::UndefinedDirection);
        }
        let u = d / n;
        Ok(Self::new(u.y.atan2(u.x), u.z.clamp(-1.0, 1.0).acos()))
    }

    /// Direction cosines `(Ω_x, Ω_y)` seen by a planar array.
    pub fn direction_cosines(&self) -> (f64, f64) {
        let st = self.elevation.sin();
        (st * self.azimuth.cos(), st * self.azimuth.sin())
    }

    /// Angles with elevation in [0, π/2] from direction cosines inside the
    /// unit disk (points outside are pulled onto the rim).
    pub fn from_direction_cosines(ox: f64, oy: f64) -> Self {
        let r = ox.hypot(oy).min(1.0);
        Self::new(oy.atan2(ox), r.asin())
    }

    /// Great-circle angle between the two directions, radians.
    pub fn separation(&self, other: &Angles) -> f64 {
        let d = self.unit_vector().dot(&other.unit_vector());
        d.clamp(-1.0, 1.0).acos()
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Small deviations from straight-line flight.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    #[default]
    None,
    /// `(Δt, Δq)` samples sorted by time, linearly interpolated and held
    /// constant outside the table.
    Table(Vec<(f64, Vec3)>),
}

impl Perturbation {
    pub fn offset(&self, dt: f64) -> Vec3 {
        match self {
            Perturbation::None => Vec3::zeros(),
            Perturbation::Table(rows) => interpolate(rows, dt),
        }
    }

    fn derivative(&self, dt: f64) -> Vec3 {
        match self {
            Perturbation::None => Vec3::zeros(),
            Perturbation::Table(_) => {
                const H: f64 = 1e-3;
                (self.offset(dt + H) - self.offset(dt - H)) / (2.0 * H)
            }
        }
    }
}

fn interpolate(rows: &[(f64, Vec3)], t: f64) -> Vec3 {
    match rows {
        [] => Vec3::zeros(),
        [(_, only)] => *only,
        _ => {
            if t <= rows[0].0 {
                return rows[0].1;
            }
            let last = rows[rows.len() - 1];
            if t >= last.0 {
                return last.1;
            }
            let i = rows.partition_point(|(ti, _)| *ti <= t);
            let (t0, q0) = rows[i - 1];
            let (t1, q1) = rows[i];
            let w = (t - t0) / (t1 - t0);
            q0 + (q1 - q0) * w
        }
    }
}

/// `q(Δt) = q0 + v Δt + Δq(Δt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub q0: Vec3,
    pub velocity: Vec3,
    #[serde(default)]
    pub perturbation: Perturbation,
}

impl Trajectory {
    pub fn stationary(q0: Vec3) -> Self {
        Self::linear(q0, Vec3::zeros())
    }

    pub fn linear(q0: Vec3, velocity: Vec3) -> Self {
        Self {
            q0,
            velocity,
            perturbation: Perturbation::None,
        }
    }

    pub fn position(&self, t: f64) -> Vec3 {
        self.q0 + self.velocity * t + self.perturbation.offset(t)
    }

    pub fn velocity_at(&self, t: f64) -> Vec3 {
        self.velocity + self.perturbation.derivative(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Amplitude reflection factor in (0, 1].
    pub reflectivity: f64,
}

impl Target {
    pub fn position_at(&self, t: f64) -> Vec3 {
        self.position + self.velocity * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub bs_position: Vec3,
    pub uav_trajectory: Trajectory,
    pub targets: Vec<Target>,
}

impl SceneGeometry {
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.reflectivity > 0.0 && t.reflectivity <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "target {i} reflectivity {} outside (0, 1]",
                    t.reflectivity
                )));
            }
        }
        Ok(())
    }
}

/// Outer and blind-zone ellipses of a bistatic pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeLimits {
    pub r_max: f64,
    pub r_min: f64,
    pub a_max: f64,
    pub a_min: f64,
    pub range_resolution: f64,
}

/// Geometric LoS delay `‖q_u(t) − q_b‖ / c`.
pub fn los_geo_delay(traj: &Trajectory, t: f64, q_b: &Vec3) -> f64 {
    (traj.position(t) - q_b).norm() / SPEED_OF_LIGHT
}

/// Geometric LoS Doppler, `(1/λ) d/dt ‖q_u(t) − q_b‖` (positive while the
/// range grows).
pub fn los_geo_doppler(traj: &Trajectory, t: f64, q_b: &Vec3, lambda: f64) -> Result<f64> {
    let d = traj.position(t) - q_b;
    let n = d.norm();
    if n == 0.0 {
        return Err(Error::UndefinedDirection);
    }
    Ok(d.dot(&traj.velocity_at(t)) / n / lambda)
}

/// Bistatic delay `(‖q_tx − q‖ + ‖q − q_rx‖) / c`.
pub fn bistatic_delay_of_target(q_tx: &Vec3, q_rx: &Vec3, q_target: &Vec3) -> f64 {
    ((q_tx - q_target).norm() + (q_target - q_rx).norm()) / SPEED_OF_LIGHT
}

/// Rate of change of the bistatic range sum divided by `λ`.
pub fn bistatic_doppler_of_target(
    q_tx: &Vec3,
    q_rx: &Vec3,
    q_target: &Vec3,
    v_target: &Vec3,
    lambda: f64,
) -> Result<f64> {
    let a = q_target - q_tx;
    let b = q_target - q_rx;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedDirection);
    }
    Ok((a / na + b / nb).dot(v_target) / lambda)
}

/// Point on the ellipse with foci `q_tx`, `q_rx` and range sum `r_bistatic`,
/// seen from the receiver along `aoa`.
pub fn locate_on_ellipse(q_tx: &Vec3, q_rx: &Vec3, r_bistatic: f64, aoa: &Angles) -> Result<Vec3> {
    let u = aoa.unit_vector();
    let baseline = q_tx - q_rx;
    let d_base = baseline.norm();
    if r_bistatic <= d_base {
        return Err(Error::DegenerateGeometry(format!(
            "range sum {r_bistatic} m does not exceed baseline {d_base} m"
        )));
    }
    let denom = 2.0 * (r_bistatic - u.dot(&baseline));
    if denom <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "arrival direction points along the baseline".into(),
        ));
    }
    let d = (r_bistatic * r_bistatic - d_base * d_base) / denom;
    Ok(q_rx + u * d)
}

pub fn sensing_range_limits(r_baseline: f64, t_guard: f64, n_subcarriers: usize, delta_f: f64) -> RangeLimits {
    let r_max = t_guard * SPEED_OF_LIGHT + r_baseline;
    let dr = SPEED_OF_LIGHT / (n_subcarriers as f64 * delta_f);
    let r_min = r_baseline + dr;
    let minor = |r: f64| (r * r - r_baseline * r_baseline).max(0.0).sqrt();
    RangeLimits {
        r_max,
        r_min,
        a_max: minor(r_max),
        a_min: minor(r_min),
        range_resolution: dr,
    }
}
