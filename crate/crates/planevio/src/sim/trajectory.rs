//! Smooth ground-truth trajectories with analytic kinematics.
//!
//! Position and yaw/pitch/roll angles are interpolated with natural cubic
//! splines, so velocity, acceleration and body angular velocity come from
//! analytic spline derivatives instead of numeric differencing.

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation};
use crate::sim::spline::CubicSpline;
use crate::{Mat3, Real, Vec3};

/// Trajectory specification: timed waypoint poses plus sensor rates.
#[derive(Debug, Clone)]
pub struct TrajectorySpec {
    /// (pose, timestamp) waypoints, strictly increasing in time.
    pub waypoints: Vec<(Pose, Real)>,
    pub imu_rate: Real,
    pub cam_rate: Real,
}

impl TrajectorySpec {
    pub fn compile(&self) -> Result<Trajectory> {
        if self.waypoints.len() < 2 {
            return Err(Error::ScenarioInvalid("need at least two waypoints".into()));
        }
        if self.imu_rate <= 0.0 || self.cam_rate <= 0.0 || self.imu_rate < self.cam_rate {
            return Err(Error::ScenarioInvalid("imu rate must be >= camera rate > 0".into()));
        }
        let t: Vec<Real> = self.waypoints.iter().map(|(_, t)| *t).collect();
        for w in t.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::ScenarioInvalid("waypoint times must increase".into()));
            }
        }
        let xs: Vec<Real> = self.waypoints.iter().map(|(p, _)| p.pos.x).collect();
        let ys: Vec<Real> = self.waypoints.iter().map(|(p, _)| p.pos.y).collect();
        let zs: Vec<Real> = self.waypoints.iter().map(|(p, _)| p.pos.z).collect();
        // Euler ZYX angles, with yaw unwrapped to stay continuous.
        let mut yaw = Vec::with_capacity(t.len());
        let mut pitch = Vec::with_capacity(t.len());
        let mut roll = Vec::with_capacity(t.len());
        let mut prev_yaw: Option<Real> = None;
        for (p, _) in &self.waypoints {
            let m = p.rot.matrix();
            let (mut psi, theta, phi) = euler_zyx(&m);
            if let Some(prev) = prev_yaw {
                while psi - prev > std::f64::consts::PI {
                    psi -= 2.0 * std::f64::consts::PI;
                }
                while psi - prev < -std::f64::consts::PI {
                    psi += 2.0 * std::f64::consts::PI;
                }
            }
            prev_yaw = Some(psi);
            yaw.push(psi);
            pitch.push(theta);
            roll.push(phi);
        }
        Ok(Trajectory {
            pos: [CubicSpline::fit(&t, &xs), CubicSpline::fit(&t, &ys), CubicSpline::fit(&t, &zs)],
            euler: [
                CubicSpline::fit(&t, &roll),
                CubicSpline::fit(&t, &pitch),
                CubicSpline::fit(&t, &yaw),
            ],
            t_start: t[0],
            t_end: *t.last().unwrap(),
            imu_rate: self.imu_rate,
            cam_rate: self.cam_rate,
        })
    }
}

/// Yaw/pitch/roll of a body-to-world rotation `R = Rz(psi) Ry(theta) Rx(phi)`.
fn euler_zyx(m: &Mat3) -> (Real, Real, Real) {
    let psi = m[(1, 0)].atan2(m[(0, 0)]);
    let theta = (-m[(2, 0)]).asin();
    let phi = m[(2, 1)].atan2(m[(2, 2)]);
    (psi, theta, phi)
}

/// Compiled trajectory with analytic kinematics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pos: [CubicSpline; 3],
    /// Roll, pitch, yaw splines (body-to-world ZYX).
    euler: [CubicSpline; 3],
    pub t_start: Real,
    pub t_end: Real,
    pub imu_rate: Real,
    pub cam_rate: Real,
}

impl Trajectory {
    pub fn duration(&self) -> Real {
        self.t_end - self.t_start
    }

    pub fn position(&self, t: Real) -> Vec3 {
        Vec3::new(self.pos[0].value(t), self.pos[1].value(t), self.pos[2].value(t))
    }

    pub fn velocity(&self, t: Real) -> Vec3 {
        Vec3::new(self.pos[0].derivative(t), self.pos[1].derivative(t), self.pos[2].derivative(t))
    }

    pub fn acceleration(&self, t: Real) -> Vec3 {
        Vec3::new(
            self.pos[0].second_derivative(t),
            self.pos[1].second_derivative(t),
            self.pos[2].second_derivative(t),
        )
    }

    /// Body-to-world rotation at `t`.
    pub fn rotation(&self, t: Real) -> Rotation {
        let phi = self.euler[0].value(t);
        let theta = self.euler[1].value(t);
        let psi = self.euler[2].value(t);
        Rotation::from_scaled_axis(Vec3::new(0.0, 0.0, psi))
            .compose(&Rotation::from_scaled_axis(Vec3::new(0.0, theta, 0.0)))
            .compose(&Rotation::from_scaled_axis(Vec3::new(phi, 0.0, 0.0)))
    }

    /// Body-in-world pose at `t`.
    pub fn pose(&self, t: Real) -> Pose {
        Pose::new(self.rotation(t), self.position(t))
    }

    /// Angular velocity in the body frame from the Euler rates.
    pub fn angular_velocity_body(&self, t: Real) -> Vec3 {
        let phi = self.euler[0].value(t);
        let theta = self.euler[1].value(t);
        let dphi = self.euler[0].derivative(t);
        let dtheta = self.euler[1].derivative(t);
        let dpsi = self.euler[2].derivative(t);
        Vec3::new(
            dphi - dpsi * theta.sin(),
            dtheta * phi.cos() + dpsi * theta.cos() * phi.sin(),
            -dtheta * phi.sin() + dpsi * theta.cos() * phi.cos(),
        )
    }
}
