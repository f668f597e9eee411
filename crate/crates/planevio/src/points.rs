//! Depth-aided point triangulation and point-feature EKF updates.
//!
//! Observations with valid depth contribute full 3D rows to the
//! triangulation system; depth-less observations contribute two rows that
//! constrain the point to its bearing ray. Updates use the 2D reprojection
//! residual only; depth never enters the EKF residual. Features are split
//! into SLAM landmarks (kept in the state) and MSCKF features (marginalized
//! through left-nullspace projection).

use nalgebra::{Matrix2x3, Matrix3, Vector2};

use crate::config::PointConfig;
use crate::error::{Error, Result};
use crate::geometry::{orthonormal_basis, skew, Pose};
use crate::state::{chi2_gate, CalibState, FilterState, StateLayout};
use crate::{MatD, Real, Vec2, Vec3, VecD};

/// One observation of a point feature from a camera frame.
#[derive(Debug, Clone, Copy)]
pub struct PointObservation {
    pub frame: u64,
    /// Unit bearing in the camera frame.
    pub bearing: Vec3,
    /// Raw pixel coordinates.
    pub pixel: Vec2,
    /// Sensor depth (camera-frame z), when available.
    pub depth: Option<Real>,
}

impl PointObservation {
    /// Camera-frame point reconstructed from bearing and depth.
    pub fn camera_point(&self) -> Option<Vec3> {
        let z = self.depth?;
        if self.bearing.z.abs() < 1e-9 {
            return None;
        }
        Some(self.bearing * (z / self.bearing.z))
    }
}

/// Track classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    Slam,
    Msckf,
}

/// A tracked feature: time-ordered observations of one feature id.
#[derive(Debug, Clone)]
pub struct PointTrack {
    pub feature_id: u64,
    pub observations: Vec<PointObservation>,
    pub kind: TrackKind,
}

/// Result of hybrid triangulation: the point and the normal-equation
/// information matrix of the linear system.
#[derive(Debug, Clone, Copy)]
pub struct Triangulation {
    pub position: Vec3,
    pub info: Matrix3<Real>,
}

/// Solve the stacked hybrid system for a point observed from the given
/// camera poses (camera-in-world).
pub fn triangulate_hybrid(
    observations: &[(PointObservation, Pose)],
    max_condition: Real,
) -> Result<Triangulation> {
    let mut ata = Matrix3::<Real>::zeros();
    let mut atb = Vec3::zeros();
    let mut rows = 0usize;
    for (obs, cam) in observations {
        if let Some(fc) = obs.camera_point() {
            // Depth row block: I3 * f = R_CtoG fc + p_C.
            let rhs = cam.transform_point(&fc);
            ata += Matrix3::identity();
            atb += rhs;
            rows += 3;
        } else {
            // Bearing-only rows: N (f - p_C) = 0 with N orthogonal to the
            // world-frame bearing.
            let gb = cam.rot.rotate(&obs.bearing);
            let (u, v) = orthonormal_basis(&gb.normalize());
            for n in [u, v] {
                ata += n * n.transpose();
                atb += n * (n.dot(&cam.pos));
                rows += 1;
            }
        }
    }
    if rows < 2 {
        return Err(Error::TriangulationIllConditioned(Real::INFINITY));
    }
    let eig = nalgebra::SymmetricEigen::new(ata);
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    if lmin <= 0.0 || lmax / lmin > max_condition {
        return Err(Error::TriangulationIllConditioned(if lmin > 0.0 {
            lmax / lmin
        } else {
            Real::INFINITY
        }));
    }
    let mut inv = Matrix3::zeros();
    for k in 0..3 {
        let q = eig.eigenvectors.column(k);
        inv += q * q.transpose() / eig.eigenvalues[k];
    }
    Ok(Triangulation { position: inv * atb, info: ata })
}

/// Reprojection residual and Jacobians of one observation.
#[derive(Debug, Clone)]
pub struct PointResidual {
    pub residual: Vector2<Real>,
    /// W.r.t. the observing clone pose error [dtheta, dp].
    pub h_pose: nalgebra::Matrix2x6<Real>,
    /// W.r.t. the world point.
    pub h_point: Matrix2x3<Real>,
    /// W.r.t. calibration [dtheta_ext(3), dp_ext(3), intrinsics(4)], when
    /// online calibration is active.
    pub h_calib: Option<nalgebra::SMatrix<Real, 2, 10>>,
}

/// Residual of the pinhole projection of `point` observed at `obs` from the
/// clone with body-in-world pose `imu_pose`.
pub fn point_residual_jacobians(
    point: &Vec3,
    obs: &PointObservation,
    imu_pose: &Pose,
    calib: &CalibState,
    min_depth: Real,
    with_calib: bool,
) -> Result<PointResidual> {
    let r_gtoi = imu_pose.rot.inverse();
    let r_itoc = calib.rot_imu_to_cam;
    let f_imu = r_gtoi.rotate(&(point - imu_pose.pos));
    let f_cam = r_itoc.rotate(&f_imu) + calib.p_imu_in_cam;
    if f_cam.z <= min_depth {
        return Err(Error::ObservationInvalid("point behind or too close to camera"));
    }
    let [fx, fy, cx, cy] = calib.intrinsics;
    let (x, y, z) = (f_cam.x, f_cam.y, f_cam.z);
    let predicted = Vector2::new(fx * x / z + cx, fy * y / z + cy);
    let residual = obs.pixel - predicted;

    let j_proj = Matrix2x3::new(fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z));
    let r_itoc_m = r_itoc.matrix();
    let r_gtoc = r_itoc_m * r_gtoi.matrix();
    let h_theta = j_proj * r_itoc_m * skew(&f_imu);
    let h_p = -j_proj * r_gtoc;
    let mut h_pose = nalgebra::Matrix2x6::zeros();
    h_pose.view_mut((0, 0), (2, 3)).copy_from(&h_theta);
    h_pose.view_mut((0, 3), (2, 3)).copy_from(&h_p);
    let h_point = j_proj * r_gtoc;

    let h_calib = if with_calib {
        let mut h = nalgebra::SMatrix::<Real, 2, 10>::zeros();
        // Extrinsic rotation error (same right-perturbation convention).
        let h_ext_theta = j_proj * skew(&(f_cam - calib.p_imu_in_cam));
        h.view_mut((0, 0), (2, 3)).copy_from(&h_ext_theta);
        h.view_mut((0, 3), (2, 3)).copy_from(&j_proj);
        h[(0, 6)] = x / z;
        h[(1, 7)] = y / z;
        h[(0, 8)] = 1.0;
        h[(1, 9)] = 1.0;
        Some(h)
    } else {
        None
    };

    Ok(PointResidual { residual, h_pose, h_point, h_calib })
}

/// Remove the feature dependency of a stacked system by projecting onto the
/// left nullspace of `h_f` (Householder QR on the combined system, keeping
/// the rows below the triangle). Returns the projected `(h_x, r)`.
///
/// The transform is orthonormal, so isotropic measurement noise keeps its
/// covariance.
pub fn nullspace_project(h_f: &MatD, h_x: &MatD, r: &VecD) -> Option<(MatD, VecD)> {
    let m = h_f.nrows();
    let k = h_f.ncols();
    if m <= k {
        return None;
    }
    let mut hf = h_f.clone();
    let mut hx = h_x.clone();
    let mut rv = r.clone();
    for col in 0..k {
        let x = hf.view((col, col), (m - col, 1)).into_owned();
        let xn = x.norm();
        if xn < 1e-14 {
            continue;
        }
        let mut v = x;
        let alpha = if v[(0, 0)] >= 0.0 { -xn } else { xn };
        v[(0, 0)] -= alpha;
        let vn = v.norm();
        if vn < 1e-14 {
            continue;
        }
        v /= vn;
        reflect(&v, &mut hf, col);
        reflect(&v, &mut hx, col);
        reflect_vec(&v, &mut rv, col);
    }
    Some((hx.rows(k, m - k).into_owned(), rv.rows(k, m - k).into_owned()))
}

fn reflect(v: &MatD, m: &mut MatD, row0: usize) {
    let rows = v.nrows();
    let w = v.transpose() * m.view((row0, 0), (rows, m.ncols()));
    let delta = v * w * 2.0;
    let mut block = m.view_mut((row0, 0), (rows, delta.ncols()));
    block -= delta;
}

fn reflect_vec(v: &MatD, r: &mut VecD, row0: usize) {
    let rows = v.nrows();
    let w: Real = (0..rows).map(|i| v[(i, 0)] * r[row0 + i]).sum();
    for i in 0..rows {
        r[row0 + i] -= 2.0 * v[(i, 0)] * w;
    }
}

/// A triangulated MSCKF track ready for an update: observations paired with
/// the clone indices they were taken from.
#[derive(Debug, Clone)]
pub struct MsckfTrack {
    pub feature_id: u64,
    pub position: Vec3,
    pub rows: Vec<(usize, PointObservation)>,
}

/// Build the stacked linearized system of a track against the current state.
fn stack_track(
    state: &FilterState,
    position: &Vec3,
    rows: &[(usize, PointObservation)],
    cfg: &PointConfig,
) -> Option<(MatD, MatD, VecD)> {
    let layout = state.layout();
    let dim = layout.dim();
    let with_calib = layout.calib_dim > 0;
    let mut h_x = MatD::zeros(2 * rows.len(), dim);
    let mut h_f = MatD::zeros(2 * rows.len(), 3);
    let mut r = VecD::zeros(2 * rows.len());
    let mut used = 0usize;
    for (clone_idx, obs) in rows {
        let (_, pose) = state.clones[*clone_idx];
        let Ok(res) =
            point_residual_jacobians(position, obs, &pose, &state.calib, cfg.min_depth, with_calib)
        else {
            continue;
        };
        let off = layout.clone_offset(*clone_idx);
        h_x.view_mut((2 * used, off), (2, 6)).copy_from(&res.h_pose);
        if let Some(hc) = res.h_calib {
            h_x.view_mut((2 * used, layout.calib_offset()), (2, 10)).copy_from(&hc);
        }
        h_f.view_mut((2 * used, 0), (2, 3)).copy_from(&res.h_point);
        r[2 * used] = res.residual[0];
        r[2 * used + 1] = res.residual[1];
        used += 1;
    }
    if used < 2 {
        return None;
    }
    Some((
        h_x.rows(0, 2 * used).into_owned(),
        h_f.rows(0, 2 * used).into_owned(),
        r.rows(0, 2 * used).into_owned(),
    ))
}

/// MSCKF update: project each track's system onto the left nullspace of its
/// feature Jacobian, gate, stack the survivors and apply one EKF update.
/// Returns the number of tracks that passed the gate.
pub fn msckf_update(
    state: &mut FilterState,
    tracks: &[MsckfTrack],
    cfg: &PointConfig,
) -> Result<usize> {
    let dim = state.dim();
    let mut stacked_h: Vec<MatD> = Vec::new();
    let mut stacked_r: Vec<VecD> = Vec::new();
    let mut accepted = 0usize;
    for track in tracks {
        let Some((h_x, h_f, r)) = stack_track(state, &track.position, &track.rows, cfg) else {
            continue;
        };
        let Some((h_proj, r_proj)) = nullspace_project(&h_f, &h_x, &r) else {
            continue;
        };
        let noise = MatD::identity(r_proj.len(), r_proj.len()) * (cfg.sigma_px * cfg.sigma_px);
        if !chi2_gate(&r_proj, &h_proj, state.covariance(), &noise, cfg.chi2_confidence) {
            continue;
        }
        stacked_h.push(h_proj);
        stacked_r.push(r_proj);
        accepted += 1;
    }
    if accepted == 0 {
        return Ok(0);
    }
    let total_rows: usize = stacked_r.iter().map(|r| r.len()).sum();
    let mut h = MatD::zeros(total_rows, dim);
    let mut r = VecD::zeros(total_rows);
    let mut at = 0usize;
    for (hb, rb) in stacked_h.iter().zip(&stacked_r) {
        h.view_mut((at, 0), (hb.nrows(), dim)).copy_from(hb);
        r.rows_mut(at, rb.len()).copy_from(rb);
        at += rb.len();
    }
    let noise = MatD::identity(total_rows, total_rows) * (cfg.sigma_px * cfg.sigma_px);
    state.ekf_update(&r, &h, &noise)?;
    Ok(accepted)
}

/// Insert a SLAM point landmark from a triangulated track. The initial
/// covariance comes from the triangulation information matrix, inflated.
pub fn initialize_slam_point(
    state: &mut FilterState,
    landmark_id: u64,
    rows: &[(usize, PointObservation)],
    cfg: &PointConfig,
) -> Result<Vec3> {
    let obs_with_poses: Vec<(PointObservation, Pose)> = rows
        .iter()
        .map(|(idx, obs)| (*obs, state.calib.camera_pose(&state.clones[*idx].1)))
        .collect();
    let tri = triangulate_hybrid(&obs_with_poses, cfg.max_condition)?;
    let eig = nalgebra::SymmetricEigen::new(tri.info);
    let mut cov = Matrix3::zeros();
    for k in 0..3 {
        let q = eig.eigenvectors.column(k);
        cov += q * q.transpose() / eig.eigenvalues[k];
    }
    cov *= cfg.sigma_triangulation * cfg.sigma_triangulation * cfg.init_inflation;
    state.insert_point_landmark(landmark_id, tri.position, &cov);
    Ok(tri.position)
}

/// Outcome of a batched SLAM point update.
#[derive(Debug, Default)]
pub struct SlamUpdateOutcome {
    pub accepted: usize,
    /// Landmarks whose observation failed the gate this frame.
    pub gated: Vec<u64>,
}

/// Joint EKF update for the current frame's observations of SLAM point
/// landmarks. Gated observations are dropped individually.
pub fn slam_points_update(
    state: &mut FilterState,
    items: &[(u64, usize, PointObservation)],
    cfg: &PointConfig,
) -> Result<SlamUpdateOutcome> {
    let layout = state.layout();
    let dim = layout.dim();
    let with_calib = layout.calib_dim > 0;
    let mut rows: Vec<(MatD, Vector2<Real>)> = Vec::new();
    let mut outcome = SlamUpdateOutcome::default();
    for (landmark_id, clone_idx, obs) in items {
        let Some(slot) = state.point_slot(*landmark_id) else { continue };
        let point = *state.point(*landmark_id).unwrap();
        let (_, pose) = state.clones[*clone_idx];
        let res = match point_residual_jacobians(
            &point,
            obs,
            &pose,
            &state.calib,
            cfg.min_depth,
            with_calib,
        ) {
            Ok(r) => r,
            Err(_) => {
                outcome.gated.push(*landmark_id);
                continue;
            }
        };
        let mut h = MatD::zeros(2, dim);
        h.view_mut((0, layout.clone_offset(*clone_idx)), (2, 6)).copy_from(&res.h_pose);
        h.view_mut((0, layout.point_offset(slot)), (2, 3)).copy_from(&res.h_point);
        if let Some(hc) = res.h_calib {
            h.view_mut((0, layout.calib_offset()), (2, 10)).copy_from(&hc);
        }
        let r2 = VecD::from_vec(vec![res.residual[0], res.residual[1]]);
        let noise = MatD::identity(2, 2) * (cfg.sigma_px * cfg.sigma_px);
        if !chi2_gate(&r2, &h, state.covariance(), &noise, cfg.chi2_confidence) {
            outcome.gated.push(*landmark_id);
            continue;
        }
        rows.push((h, res.residual));
    }
    if rows.is_empty() {
        return Ok(outcome);
    }
    let mut h = MatD::zeros(2 * rows.len(), dim);
    let mut r = VecD::zeros(2 * rows.len());
    for (i, (hb, rb)) in rows.iter().enumerate() {
        h.view_mut((2 * i, 0), (2, dim)).copy_from(hb);
        r[2 * i] = rb[0];
        r[2 * i + 1] = rb[1];
    }
    let noise = MatD::identity(2 * rows.len(), 2 * rows.len()) * (cfg.sigma_px * cfg.sigma_px);
    state.ekf_update(&r, &h, &noise)?;
    outcome.accepted = rows.len();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StateConfig;
    use crate::geometry::Rotation;
    use crate::state::ImuState;
    use approx::assert_relative_eq;

    fn calib() -> CalibState {
        CalibState {
            rot_imu_to_cam: Rotation::identity(),
            p_imu_in_cam: Vec3::zeros(),
            time_offset: 0.0,
            intrinsics: [400.0, 400.0, 320.0, 240.0],
        }
    }

    fn obs_with_depth(bearing: Vec3, depth: Real) -> PointObservation {
        PointObservation {
            frame: 0,
            bearing: bearing.normalize(),
            pixel: Vec2::zeros(),
            depth: Some(depth),
        }
    }

    fn bearing_only(cam_pos: Vec3, target: Vec3) -> (PointObservation, Pose) {
        let b = (target - cam_pos).normalize();
        (
            PointObservation { frame: 0, bearing: b, pixel: Vec2::zeros(), depth: None },
            Pose::new(Rotation::identity(), cam_pos),
        )
    }

    #[test]
    fn single_depth_view_is_exact() {
        let obs = obs_with_depth(Vec3::new(0.0, 0.0, 1.0), 2.0);
        let tri = triangulate_hybrid(&[(obs, Pose::identity())], 1e8).unwrap();
        assert_relative_eq!(tri.position, Vec3::new(0.0, 0.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn two_ray_intersection() {
        let target = Vec3::new(0.5, 0.0, 2.0);
        let a = bearing_only(Vec3::zeros(), target);
        let b = bearing_only(Vec3::new(1.0, 0.0, 0.0), target);
        let tri = triangulate_hybrid(&[a, b], 1e8).unwrap();
        assert_relative_eq!(tri.position, target, epsilon = 1e-9);
    }

    #[test]
    fn parallel_rays_are_ill_conditioned() {
        let b = Vec3::new(0.1, 0.0, 1.0).normalize();
        let o1 = PointObservation { frame: 0, bearing: b, pixel: Vec2::zeros(), depth: None };
        let o2 = o1;
        let p1 = Pose::new(Rotation::identity(), Vec3::zeros());
        let p2 = Pose::new(Rotation::identity(), b * 3.0);
        let r = triangulate_hybrid(&[(o1, p1), (o2, p2)], 1e8);
        assert!(matches!(r, Err(Error::TriangulationIllConditioned(_))));
    }

    #[test]
    fn mixed_rows_noiseless_exact() {
        let target = Vec3::new(-0.3, 0.4, 3.0);
        let with_depth = (
            PointObservation {
                frame: 0,
                bearing: target.normalize(),
                pixel: Vec2::zeros(),
                depth: Some(target.z),
            },
            Pose::identity(),
        );
        let ray = bearing_only(Vec3::new(0.8, -0.2, 0.1), target);
        let tri = triangulate_hybrid(&[with_depth, ray], 1e8).unwrap();
        assert_relative_eq!(tri.position, target, epsilon = 1e-9);
    }

    #[test]
    fn perfect_prediction_zero_residual() {
        let point = Vec3::new(0.3, -0.2, 2.5);
        let cal = calib();
        let pose = Pose::new(Rotation::from_scaled_axis(Vec3::new(0.05, 0.1, -0.03)), Vec3::new(0.2, 0.1, 0.0));
        let cam = cal.camera_pose(&pose);
        let f_cam = cam.inverse().transform_point(&point);
        let pixel = Vec2::new(
            cal.intrinsics[0] * f_cam.x / f_cam.z + cal.intrinsics[2],
            cal.intrinsics[1] * f_cam.y / f_cam.z + cal.intrinsics[3],
        );
        let obs =
            PointObservation { frame: 0, bearing: f_cam.normalize(), pixel, depth: Some(f_cam.z) };
        let res = point_residual_jacobians(&point, &obs, &pose, &cal, 0.05, false).unwrap();
        assert_relative_eq!(res.residual, Vector2::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn translation_sensitivity_on_optical_axis() {
        // Point on the optical axis at depth 2 with f = 400: the pixel u
        // moves by -200 px per meter of camera x translation.
        let point = Vec3::new(0.0, 0.0, 2.0);
        let obs = obs_with_depth(Vec3::new(0.0, 0.0, 1.0), 2.0);
        let res =
            point_residual_jacobians(&point, &obs, &Pose::identity(), &calib(), 0.05, false)
                .unwrap();
        // Predicted pixel moves as dp does, so h_pose position column 0.
        assert_relative_eq!(res.h_pose[(0, 3)], -200.0, epsilon = 1e-9);
        assert_relative_eq!(res.h_pose[(1, 3)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn near_point_rejected() {
        let point = Vec3::new(0.0, 0.0, 0.01);
        let obs = obs_with_depth(Vec3::new(0.0, 0.0, 1.0), 0.01);
        let r = point_residual_jacobians(&point, &obs, &Pose::identity(), &calib(), 0.05, false);
        assert!(matches!(r, Err(Error::ObservationInvalid(_))));
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let point = Vec3::new(0.4, -0.3, 2.2);
        let cal = calib();
        let imu_pose = Pose::new(
            Rotation::from_scaled_axis(Vec3::new(0.2, -0.1, 0.3)),
            Vec3::new(0.5, 0.2, -0.1),
        );
        let obs = PointObservation {
            frame: 0,
            bearing: Vec3::new(0.0, 0.0, 1.0),
            pixel: Vec2::new(100.0, 150.0),
            depth: None,
        };
        let nominal =
            point_residual_jacobians(&point, &obs, &imu_pose, &cal, 0.05, false).unwrap();
        let eps = 1e-6;
        // The residual is (measured - predicted), so its derivative is -H;
        // negate the finite differences to compare against H.
        for c in 0..6 {
            let peval = |sign: Real| {
                let mut pose = imu_pose;
                let mut d = [0.0; 6];
                d[c] = sign * eps;
                pose.rot = pose.rot.perturb(&Vec3::new(d[0], d[1], d[2]));
                pose.pos += Vec3::new(d[3], d[4], d[5]);
                point_residual_jacobians(&point, &obs, &pose, &cal, 0.05, false)
                    .unwrap()
                    .residual
            };
            let fd = (peval(-1.0) - peval(1.0)) / (2.0 * eps);
            for r in 0..2 {
                let tol = 1e-5 * fd[r].abs().max(1.0);
                assert!(
                    (nominal.h_pose[(r, c)] - fd[r]).abs() < tol,
                    "pose jac [{r},{c}]: {} vs {}",
                    nominal.h_pose[(r, c)],
                    fd[r]
                );
            }
        }
        // Point block.
        for c in 0..3 {
            let peval = |sign: Real| {
                let mut p = point;
                p[c] += sign * eps;
                point_residual_jacobians(&p, &obs, &imu_pose, &cal, 0.05, false).unwrap().residual
            };
            let fd = (peval(-1.0) - peval(1.0)) / (2.0 * eps);
            for r in 0..2 {
                let tol = 1e-5 * fd[r].abs().max(1.0);
                assert!((nominal.h_point[(r, c)] - fd[r]).abs() < tol);
            }
        }
    }

    #[test]
    fn nullspace_projection_properties() {
        // A 3-observation track: 6 rows project to 3, the projector is
        // orthonormal and annihilates h_f.
        let mut h_f = MatD::zeros(6, 3);
        let mut h_x = MatD::zeros(6, 8);
        let mut r = VecD::zeros(6);
        let mut seed = 1.0;
        for i in 0..6 {
            for j in 0..3 {
                seed = (seed * 1.3 + 0.7) % 2.0;
                h_f[(i, j)] = seed - 1.0;
            }
            for j in 0..8 {
                seed = (seed * 1.7 + 0.3) % 2.0;
                h_x[(i, j)] = seed - 1.0;
            }
            r[i] = i as Real * 0.1;
        }
        let (h_proj, r_proj) = nullspace_project(&h_f, &h_x, &r).unwrap();
        assert_eq!(h_proj.nrows(), 3);
        assert_eq!(r_proj.len(), 3);

        // Extract the implicit projector V by transforming the identity:
        // rows 3.. of Q^T I are V^T.
        let eye = MatD::identity(6, 6);
        let (vt, _) = nullspace_project(&h_f, &eye, &VecD::zeros(6)).unwrap();
        // V^T H_f = 0.
        assert!((&vt * &h_f).amax() < 1e-10);
        // V orthonormal: V^T V = I.
        let vvt = &vt * vt.transpose();
        assert_relative_eq!(vvt, MatD::identity(3, 3), epsilon = 1e-10);
        // The projected system is V^T applied to (h_x, r).
        assert_relative_eq!((&vt * &h_x - &h_proj).amax(), 0.0, epsilon = 1e-10);
        assert_relative_eq!((&vt * &r - &r_proj).amax(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn msckf_ignores_landmark_covariance_blocks() {
        // An MSCKF update must not touch covariance blocks of unrelated
        // SLAM landmarks beyond the correlations it legitimately creates:
        // with zero cross-covariance the landmark marginal stays put.
        let mut imu = ImuState::at_rest(0.0);
        imu.position = Vec3::new(0.0, 0.0, 0.0);
        let mut p0 = MatD::zeros(15, 15);
        for i in 0..15 {
            p0[(i, i)] = 1e-3;
        }
        let mut st = FilterState::new(imu, calib(), StateConfig::default(), p0);
        st.augment_clone(0.1).unwrap();
        // Move so the second clone sees parallax.
        st.imu.position = Vec3::new(0.4, 0.0, 0.0);
        st.augment_clone(0.2).unwrap();
        st.imu.position = Vec3::new(0.8, 0.0, 0.0);
        st.augment_clone(0.3).unwrap();
        st.insert_point_landmark(99, Vec3::new(5.0, 5.0, 5.0), &(Matrix3::identity() * 0.123));
        let slot = st.point_slot(99).unwrap();
        let off = st.layout().point_offset(slot);
        let before = st.covariance().view((off, off), (3, 3)).into_owned();

        let target = Vec3::new(0.3, 0.1, 2.0);
        let cfg = PointConfig::default();
        let mut rows = Vec::new();
        for (idx, (_, pose)) in st.clones.clone().iter().enumerate() {
            let cam = st.calib.camera_pose(pose);
            let f_cam = cam.inverse().transform_point(&target);
            let pixel = Vec2::new(
                400.0 * f_cam.x / f_cam.z + 320.0,
                400.0 * f_cam.y / f_cam.z + 240.0,
            );
            rows.push((
                idx,
                PointObservation {
                    frame: idx as u64,
                    bearing: f_cam.normalize(),
                    pixel: pixel + Vec2::new(0.3, -0.2),
                    depth: None,
                },
            ));
        }
        let track = MsckfTrack { feature_id: 1, position: target, rows };
        let used = msckf_update(&mut st, &[track], &cfg).unwrap();
        assert_eq!(used, 1);
        let after = st.covariance().view((off, off), (3, 3)).into_owned();
        assert_relative_eq!((after - before).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn slam_init_and_zero_residual_update() {
        let mut imu = ImuState::at_rest(0.0);
        imu.position = Vec3::zeros();
        let mut p0 = MatD::zeros(15, 15);
        for i in 0..15 {
            p0[(i, i)] = 1e-4;
        }
        let mut st = FilterState::new(imu, calib(), StateConfig::default(), p0);
        st.augment_clone(0.1).unwrap();
        st.imu.position = Vec3::new(0.5, 0.0, 0.0);
        st.augment_clone(0.2).unwrap();

        let target = Vec3::new(0.2, -0.1, 3.0);
        let mut rows = Vec::new();
        for (idx, (_, pose)) in st.clones.clone().iter().enumerate() {
            let cam = st.calib.camera_pose(pose);
            let f_cam = cam.inverse().transform_point(&target);
            let pixel = Vec2::new(
                400.0 * f_cam.x / f_cam.z + 320.0,
                400.0 * f_cam.y / f_cam.z + 240.0,
            );
            rows.push((
                idx,
                PointObservation {
                    frame: idx as u64,
                    bearing: f_cam.normalize(),
                    pixel,
                    depth: Some(f_cam.z),
                },
            ));
        }
        let cfg = PointConfig::default();
        let inserted = initialize_slam_point(&mut st, 42, &rows, &cfg).unwrap();
        assert_relative_eq!(inserted, target, epsilon = 1e-9);
        assert_relative_eq!(*st.point(42).unwrap(), target, epsilon = 1e-9);

        // A perfect observation leaves the landmark unchanged.
        let (idx, obs) = rows[1];
        let out = slam_points_update(&mut st, &[(42, idx, obs)], &cfg).unwrap();
        assert_eq!(out.accepted, 1);
        assert_relative_eq!(*st.point(42).unwrap(), target, epsilon = 1e-9);
    }
}
