//! IMU state and covariance propagation between update times.
//!
//! One integration step covers the interval between two consecutive IMU
//! samples with midpoint-averaged, bias-corrected measurements (RK2 flavor).
//! The error-state transition below is the exact differential of that
//! discrete step, so it matches central finite differences of the
//! integration to first order in the perturbation.

use nalgebra::Matrix3;

use crate::config::PropagationConfig;
use crate::error::{Error, Result};
use crate::geometry::{skew, so3_exp, so3_right_jacobian, Rotation};
use crate::state::{FilterState, ImuState, StateLayout};
use crate::{MatD, Real, Vec3};

/// One IMU sample: body angular velocity and specific force.
#[derive(Debug, Clone, Copy)]
pub struct ImuSample {
    pub time: Real,
    /// Measured angular velocity, rad/s.
    pub gyro: Vec3,
    /// Measured specific force, m/s^2.
    pub accel: Vec3,
}

/// Continuous-time IMU noise densities plus gravity.
#[derive(Debug, Clone)]
pub struct ImuNoiseModel {
    /// Gyro white noise, rad/s/sqrt(Hz).
    pub sigma_g: Real,
    /// Accel white noise, m/s^2/sqrt(Hz).
    pub sigma_a: Real,
    /// Gyro bias random walk, rad/s^2/sqrt(Hz).
    pub sigma_bg: Real,
    /// Accel bias random walk, m/s^3/sqrt(Hz).
    pub sigma_ba: Real,
    /// Gravity in the world frame, m/s^2.
    pub gravity: Vec3,
}

impl Default for ImuNoiseModel {
    fn default() -> Self {
        ImuNoiseModel {
            sigma_g: 1.7e-3,
            sigma_a: 2.0e-2,
            sigma_bg: 2.0e-5,
            sigma_ba: 3.0e-4,
            gravity: Vec3::new(0.0, 0.0, -9.81),
        }
    }
}

/// Integrate one interval `[t, t+dt]` bounded by the samples `(w0, a0)` and
/// `(w1, a1)`; returns the propagated IMU state.
pub fn integrate_interval(
    imu: &ImuState,
    w0: &Vec3,
    a0: &Vec3,
    w1: &Vec3,
    a1: &Vec3,
    dt: Real,
    gravity: &Vec3,
) -> ImuState {
    let w = 0.5 * (w0 + w1) - imu.bias_gyro;
    let a = 0.5 * (a0 + a1) - imu.bias_accel;
    let r_k = imu.orientation.inverse(); // body-to-world
    let r_mid = r_k.compose(&Rotation::from_scaled_axis(w * (dt * 0.5)));
    let a_world = r_mid.rotate(&a) + gravity;
    let mut out = imu.clone();
    out.position = imu.position + imu.velocity * dt + 0.5 * a_world * dt * dt;
    out.velocity = imu.velocity + a_world * dt;
    let mut rot = r_k.compose(&Rotation::from_scaled_axis(w * dt)).inverse();
    rot.renormalize();
    out.orientation = rot;
    out.time = imu.time + dt;
    out
}

/// Error-state transition and discretized process noise for one interval.
///
/// Block order is `[dtheta, dp, dv, dbg, dba]`.
pub fn interval_transition(
    imu: &ImuState,
    w0: &Vec3,
    a0: &Vec3,
    w1: &Vec3,
    a1: &Vec3,
    dt: Real,
    noise: &ImuNoiseModel,
) -> (MatD, MatD) {
    let w = 0.5 * (w0 + w1) - imu.bias_gyro;
    let a = 0.5 * (a0 + a1) - imu.bias_accel;
    let r_k = imu.orientation.inverse().matrix(); // body-to-world at t_k
    let exp_half = so3_exp(&(w * (dt * 0.5)));
    let r_mid = r_k * exp_half;
    let jr_full = so3_right_jacobian(&(w * dt));
    let jr_half = so3_right_jacobian(&(w * (dt * 0.5)));
    // Body-frame direction (at t_k) of the mid-interval acceleration.
    let u = exp_half * a;

    let mut phi = MatD::identity(15, 15);
    let set = |m: &mut MatD, r: usize, c: usize, b: &Matrix3<Real>| {
        m.view_mut((r, c), (3, 3)).copy_from(b);
    };
    let phi_tt = so3_exp(&(w * dt)).transpose();
    let phi_tbg = -jr_full * dt;
    let phi_v_t = -r_k * skew(&u) * dt;
    let phi_vbg = r_mid * skew(&a) * jr_half * (dt * dt * 0.5);
    let phi_vba = -r_mid * dt;
    set(&mut phi, StateLayout::IMU_THETA, StateLayout::IMU_THETA, &phi_tt);
    set(&mut phi, StateLayout::IMU_THETA, StateLayout::IMU_BG, &phi_tbg);
    set(&mut phi, StateLayout::IMU_POS, StateLayout::IMU_THETA, &(phi_v_t * (dt * 0.5)));
    set(&mut phi, StateLayout::IMU_POS, StateLayout::IMU_VEL, &(Matrix3::identity() * dt));
    set(&mut phi, StateLayout::IMU_POS, StateLayout::IMU_BG, &(phi_vbg * (dt * 0.5)));
    set(&mut phi, StateLayout::IMU_POS, StateLayout::IMU_BA, &(phi_vba * (dt * 0.5)));
    set(&mut phi, StateLayout::IMU_VEL, StateLayout::IMU_THETA, &phi_v_t);
    set(&mut phi, StateLayout::IMU_VEL, StateLayout::IMU_BG, &phi_vbg);
    set(&mut phi, StateLayout::IMU_VEL, StateLayout::IMU_BA, &phi_vba);

    // White noise enters through the same channels as the bias errors; the
    // discrete variance of a density sigma over dt is sigma^2/dt.
    let mut g = MatD::zeros(15, 12);
    let setg = |m: &mut MatD, r: usize, c: usize, b: &Matrix3<Real>| {
        m.view_mut((r, c), (3, 3)).copy_from(b);
    };
    setg(&mut g, StateLayout::IMU_THETA, 0, &phi_tbg);
    setg(&mut g, StateLayout::IMU_POS, 0, &(phi_vbg * (dt * 0.5)));
    setg(&mut g, StateLayout::IMU_POS, 3, &(phi_vba * (dt * 0.5)));
    setg(&mut g, StateLayout::IMU_VEL, 0, &phi_vbg);
    setg(&mut g, StateLayout::IMU_VEL, 3, &phi_vba);
    setg(&mut g, StateLayout::IMU_BG, 6, &Matrix3::identity());
    setg(&mut g, StateLayout::IMU_BA, 9, &Matrix3::identity());
    let mut qc = MatD::zeros(12, 12);
    for i in 0..3 {
        qc[(i, i)] = noise.sigma_g * noise.sigma_g / dt;
        qc[(3 + i, 3 + i)] = noise.sigma_a * noise.sigma_a / dt;
        qc[(6 + i, 6 + i)] = noise.sigma_bg * noise.sigma_bg * dt;
        qc[(9 + i, 9 + i)] = noise.sigma_ba * noise.sigma_ba * dt;
    }
    let qd = &g * qc * g.transpose();
    (phi, qd)
}

/// Linearly interpolate a sample at time `t` between `s0` and `s1`.
fn lerp_sample(s0: &ImuSample, s1: &ImuSample, t: Real) -> ImuSample {
    let span = s1.time - s0.time;
    let alpha = if span.abs() < 1e-12 { 0.0 } else { (t - s0.time) / span };
    ImuSample {
        time: t,
        gyro: s0.gyro + (s1.gyro - s0.gyro) * alpha,
        accel: s0.accel + (s1.accel - s0.accel) * alpha,
    }
}

/// Propagate the full filter state to `t_target` using the IMU samples that
/// bracket `[state.imu.time, t_target]`. Boundary samples are interpolated.
pub fn propagate(
    state: &mut FilterState,
    samples: &[ImuSample],
    t_target: Real,
    noise: &ImuNoiseModel,
    cfg: &PropagationConfig,
) -> Result<()> {
    let t0 = state.imu.time;
    if t_target <= t0 + 1e-12 {
        return Ok(());
    }
    // Build the bounded sample list: interpolated endpoints plus everything
    // strictly inside the window.
    let mut bounded: Vec<ImuSample> = Vec::new();
    let mut prev: Option<&ImuSample> = None;
    for s in samples {
        if s.time <= t0 {
            prev = Some(s);
            continue;
        }
        if bounded.is_empty() {
            match prev {
                Some(p) => bounded.push(lerp_sample(p, s, t0)),
                None => {
                    if s.time - t0 > cfg.max_gap {
                        return Err(Error::PropagationGap(s.time - t0));
                    }
                    bounded.push(ImuSample { time: t0, ..*s });
                }
            }
        }
        if s.time >= t_target {
            let last = *bounded.last().unwrap();
            bounded.push(lerp_sample(&last, s, t_target));
            break;
        }
        bounded.push(*s);
        prev = Some(s);
    }
    match bounded.last() {
        None => return Err(Error::PropagationGap(t_target - t0)),
        Some(last) if last.time < t_target - 1e-9 => {
            let gap = t_target - last.time;
            if gap > cfg.max_gap {
                return Err(Error::PropagationGap(gap));
            }
            // Stream ended just short of the target: hold the last sample.
            let held = ImuSample { time: t_target, ..*last };
            bounded.push(held);
        }
        _ => {}
    }

    for k in 0..bounded.len() - 1 {
        let s0 = bounded[k];
        let s1 = bounded[k + 1];
        let dt = s1.time - s0.time;
        if dt <= 1e-12 {
            continue;
        }
        if dt > cfg.max_gap {
            return Err(Error::PropagationGap(dt));
        }
        let (phi, qd) =
            interval_transition(&state.imu, &s0.gyro, &s0.accel, &s1.gyro, &s1.accel, dt, noise);
        state.imu = integrate_interval(
            &state.imu,
            &s0.gyro,
            &s0.accel,
            &s1.gyro,
            &s1.accel,
            dt,
            &noise.gravity,
        );
        let dim = state.dim();
        let cov = state.covariance_mut();
        let imu_block = cov.view((0, 0), (15, 15)).into_owned();
        let new_imu = &phi * imu_block * phi.transpose() + &qd;
        cov.view_mut((0, 0), (15, 15)).copy_from(&new_imu);
        if dim > 15 {
            let cross = cov.view((0, 15), (15, dim - 15)).into_owned();
            let new_cross = &phi * cross;
            cov.view_mut((0, 15), (15, dim - 15)).copy_from(&new_cross);
            cov.view_mut((15, 0), (dim - 15, 15)).copy_from(&new_cross.transpose());
        }
    }
    state.debug_validate();
    Ok(())
}

/// Inject a 15-dof error into an IMU state using the filter conventions
/// (right perturbation of the body-to-world rotation, additive elsewhere).
pub fn inject_imu_error(imu: &ImuState, dx: &[Real; 15]) -> ImuState {
    let mut out = imu.clone();
    let dtheta = Vec3::new(dx[0], dx[1], dx[2]);
    out.orientation = Rotation::from_scaled_axis(-dtheta).compose(&imu.orientation);
    out.position += Vec3::new(dx[3], dx[4], dx[5]);
    out.velocity += Vec3::new(dx[6], dx[7], dx[8]);
    out.bias_gyro += Vec3::new(dx[9], dx[10], dx[11]);
    out.bias_accel += Vec3::new(dx[12], dx[13], dx[14]);
    out
}

/// Error vector between two IMU states under the filter conventions.
pub fn imu_error(reference: &ImuState, other: &ImuState) -> [Real; 15] {
    let dtheta = reference.orientation.compose(&other.orientation.inverse()).log();
    let dp = other.position - reference.position;
    let dv = other.velocity - reference.velocity;
    let dbg = other.bias_gyro - reference.bias_gyro;
    let dba = other.bias_accel - reference.bias_accel;
    [
        dtheta.x, dtheta.y, dtheta.z, dp.x, dp.y, dp.z, dv.x, dv.y, dv.z, dbg.x, dbg.y, dbg.z,
        dba.x, dba.y, dba.z,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StateConfig;
    use crate::state::CalibState;
    use approx::assert_relative_eq;

    fn calib() -> CalibState {
        CalibState {
            rot_imu_to_cam: Rotation::identity(),
            p_imu_in_cam: Vec3::zeros(),
            time_offset: 0.0,
            intrinsics: [380.0, 380.0, 320.0, 240.0],
        }
    }

    fn state_with(imu: ImuState) -> FilterState {
        let mut p0 = MatD::zeros(15, 15);
        for i in 0..15 {
            p0[(i, i)] = 1e-4;
        }
        FilterState::new(imu, calib(), StateConfig::default(), p0)
    }

    fn noise() -> ImuNoiseModel {
        ImuNoiseModel::default()
    }

    fn samples_at(rate: Real, t_end: Real, f: impl Fn(Real) -> (Vec3, Vec3)) -> Vec<ImuSample> {
        let n = (t_end * rate).round() as usize;
        (0..=n)
            .map(|k| {
                let t = k as Real / rate;
                let (gyro, accel) = f(t);
                ImuSample { time: t, gyro, accel }
            })
            .collect()
    }

    #[test]
    fn static_equilibrium_holds_pose() {
        let mut imu = ImuState::at_rest(0.0);
        imu.orientation = Rotation::from_scaled_axis(Vec3::new(0.2, -0.1, 0.4));
        let g = noise().gravity;
        let a_body = imu.orientation.rotate(&(-g));
        let mut st = state_with(imu.clone());
        let samples = samples_at(200.0, 1.0, |_| (Vec3::zeros(), a_body));
        propagate(&mut st, &samples, 1.0, &noise(), &PropagationConfig::default()).unwrap();
        assert_relative_eq!(st.imu.position, imu.position, epsilon = 1e-9);
        assert_relative_eq!(st.imu.velocity, Vec3::zeros(), epsilon = 1e-9);
        assert!(st.imu.orientation.angle_to(&imu.orientation) < 1e-9);
    }

    #[test]
    fn pure_yaw_rotation() {
        let imu = ImuState::at_rest(0.0);
        let g = noise().gravity;
        let omega = Vec3::new(0.0, 0.0, 1.0);
        let mut st = state_with(imu);
        let t_end = std::f64::consts::PI;
        // Accelerometer tracks gravity in the rotating body frame.
        let samples = samples_at(500.0, t_end + 0.01, |t| {
            let r_gtoi = Rotation::from_scaled_axis(omega * t).inverse();
            (omega, r_gtoi.rotate(&(-g)))
        });
        propagate(&mut st, &samples, t_end, &noise(), &PropagationConfig::default()).unwrap();
        let expected = Rotation::from_scaled_axis(omega * t_end).inverse();
        assert!(st.imu.orientation.angle_to(&expected) < 1e-9);
        assert!(st.imu.position.norm() < 1e-4, "pos drift {}", st.imu.position.norm());
    }

    #[test]
    fn constant_world_acceleration_kinematics() {
        // 1 m/s^2 along x for 2 s from rest: dp = (2,0,0), dv = (2,0,0).
        let imu = ImuState::at_rest(0.0);
        let g = noise().gravity;
        let a_world = Vec3::new(1.0, 0.0, 0.0);
        let mut st = state_with(imu);
        let samples = samples_at(200.0, 2.01, |_| (Vec3::zeros(), a_world - g));
        propagate(&mut st, &samples, 2.0, &noise(), &PropagationConfig::default()).unwrap();
        assert_relative_eq!(st.imu.position, Vec3::new(2.0, 0.0, 0.0), epsilon = 1e-9);
        assert_relative_eq!(st.imu.velocity, Vec3::new(2.0, 0.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn split_propagation_matches_single_pass() {
        let mut imu = ImuState::at_rest(0.0);
        imu.velocity = Vec3::new(0.3, -0.1, 0.05);
        imu.bias_gyro = Vec3::new(0.01, -0.02, 0.005);
        imu.bias_accel = Vec3::new(-0.03, 0.01, 0.02);
        let g = noise().gravity;
        let f = |t: Real| {
            (
                Vec3::new(0.2 * (0.9 * t).sin(), -0.1 * (1.3 * t).cos(), 0.3),
                Vec3::new(0.4 * (0.7 * t).cos(), 0.2, -0.1 * t) - g,
            )
        };
        let samples = samples_at(200.0, 1.0, f);
        let mut a = state_with(imu.clone());
        propagate(&mut a, &samples, 0.5, &noise(), &PropagationConfig::default()).unwrap();
        propagate(&mut a, &samples, 1.0, &noise(), &PropagationConfig::default()).unwrap();
        let mut b = state_with(imu);
        propagate(&mut b, &samples, 1.0, &noise(), &PropagationConfig::default()).unwrap();
        assert_relative_eq!(a.imu.position, b.imu.position, epsilon = 1e-9);
        assert_relative_eq!(a.imu.velocity, b.imu.velocity, epsilon = 1e-9);
        assert!(a.imu.orientation.angle_to(&b.imu.orientation) < 1e-9);
    }

    #[test]
    fn gap_in_stream_is_rejected() {
        let mut st = state_with(ImuState::at_rest(0.0));
        let mut samples = samples_at(200.0, 1.0, |_| (Vec3::zeros(), -noise().gravity));
        samples.retain(|s| s.time < 0.2 || s.time > 0.5);
        let err = propagate(&mut st, &samples, 1.0, &noise(), &PropagationConfig::default());
        assert!(matches!(err, Err(Error::PropagationGap(_))));
    }

    #[test]
    fn covariance_trace_grows_under_noise() {
        let mut st = state_with(ImuState::at_rest(0.0));
        let before = st.covariance().trace();
        let samples = samples_at(200.0, 1.0, |_| (Vec3::zeros(), -noise().gravity));
        propagate(&mut st, &samples, 1.0, &noise(), &PropagationConfig::default()).unwrap();
        assert!(st.covariance().trace() > before);
    }

    #[test]
    fn transition_matches_finite_differences() {
        let mut imu = ImuState::at_rest(0.0);
        imu.orientation = Rotation::from_scaled_axis(Vec3::new(0.3, -0.2, 0.5));
        imu.position = Vec3::new(1.0, -2.0, 0.5);
        imu.velocity = Vec3::new(0.4, 0.2, -0.3);
        imu.bias_gyro = Vec3::new(0.02, -0.01, 0.03);
        imu.bias_accel = Vec3::new(-0.05, 0.02, 0.01);
        let w0 = Vec3::new(0.3, -0.5, 0.8);
        let a0 = Vec3::new(0.5, 9.0, 3.0);
        let w1 = Vec3::new(0.35, -0.45, 0.75);
        let a1 = Vec3::new(0.55, 8.9, 3.1);
        let dt = 0.01;
        let g = noise().gravity;
        let (phi, _) = interval_transition(&imu, &w0, &a0, &w1, &a1, dt, &noise());

        let eps = 1e-6;
        for c in 0..15 {
            let mut dp = [0.0; 15];
            dp[c] = eps;
            let mut dm = [0.0; 15];
            dm[c] = -eps;
            let out_p = integrate_interval(&inject_imu_error(&imu, &dp), &w0, &a0, &w1, &a1, dt, &g);
            let out_m = integrate_interval(&inject_imu_error(&imu, &dm), &w0, &a0, &w1, &a1, dt, &g);
            let nominal = integrate_interval(&imu, &w0, &a0, &w1, &a1, dt, &g);
            let ep = imu_error(&nominal, &out_p);
            let em = imu_error(&nominal, &out_m);
            for r in 0..15 {
                let fd = (ep[r] - em[r]) / (2.0 * eps);
                let tol = 1e-5 * fd.abs().max(1.0);
                assert!(
                    (phi[(r, c)] - fd).abs() < tol,
                    "phi[{r},{c}] = {} vs fd {}",
                    phi[(r, c)],
                    fd
                );
            }
        }
    }
}
