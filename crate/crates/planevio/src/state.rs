//! Filter state container and covariance bookkeeping.
//!
//! The error state is ordered `[imu(15) | calib | clones(6 each) |
//! points(3 each) | planes(3 each)]` with the IMU block split as
//! `[dtheta, dp, dv, dbg, dba]`. Attitude errors follow the convention in
//! [`crate::geometry`]: body-to-world rotations are perturbed on the right,
//! `R = R_hat * Exp(dtheta)`.

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::config::StateConfig;
use crate::error::{Error, Result};
use crate::geometry::{PlanePatch, Pose, Rotation};
use crate::{MatD, Real, Vec3, VecD};

/// Current IMU state: orientation, position, velocity, gyro bias, accel bias.
#[derive(Debug, Clone)]
pub struct ImuState {
    /// Rotation from the world frame into the IMU frame.
    pub orientation: Rotation,
    /// IMU position in the world frame, m.
    pub position: Vec3,
    /// IMU velocity in the world frame, m/s.
    pub velocity: Vec3,
    /// Gyroscope bias, rad/s.
    pub bias_gyro: Vec3,
    /// Accelerometer bias, m/s^2.
    pub bias_accel: Vec3,
    /// Timestamp of the state, s.
    pub time: Real,
}

impl ImuState {
    pub fn at_rest(time: Real) -> Self {
        ImuState {
            orientation: Rotation::identity(),
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            bias_gyro: Vec3::zeros(),
            bias_accel: Vec3::zeros(),
            time,
        }
    }

    /// Body-in-world pose.
    pub fn pose(&self) -> Pose {
        Pose::new(self.orientation.inverse(), self.position)
    }
}

/// Camera-IMU calibration: extrinsic rotation/translation, time offset and
/// pinhole intrinsics.
#[derive(Debug, Clone)]
pub struct CalibState {
    /// Rotation from the IMU frame into the camera frame.
    pub rot_imu_to_cam: Rotation,
    /// IMU origin expressed in the camera frame, m.
    pub p_imu_in_cam: Vec3,
    /// Camera time offset, s.
    pub time_offset: Real,
    /// Pinhole intrinsics: fx, fy, cx, cy, px.
    pub intrinsics: [Real; 4],
}

impl CalibState {
    /// Camera pose in the world given the IMU body-in-world pose:
    /// `R_CtoG = R_ItoG * R_CtoI`, `p_C = p_I - R_CtoG * p_imu_in_cam`.
    pub fn camera_pose(&self, imu_pose: &Pose) -> Pose {
        let rot_cam_to_world = imu_pose.rot.compose(&self.rot_imu_to_cam.inverse());
        let pos = imu_pose.pos - rot_cam_to_world.rotate(&self.p_imu_in_cam);
        Pose::new(rot_cam_to_world, pos)
    }
}

/// A plane landmark with its bookkeeping.
#[derive(Debug, Clone)]
pub struct PlaneLandmarkEntry {
    pub patch: PlanePatch,
    pub last_seen_frame: u64,
    pub track_count: u32,
    pub permanent: bool,
}

/// Block offsets of the error state for a given population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub calib_dim: usize,
    pub n_clones: usize,
    pub n_points: usize,
    pub n_planes: usize,
}

impl StateLayout {
    pub const IMU_THETA: usize = 0;
    pub const IMU_POS: usize = 3;
    pub const IMU_VEL: usize = 6;
    pub const IMU_BG: usize = 9;
    pub const IMU_BA: usize = 12;
    pub const IMU_DIM: usize = 15;

    pub fn calib_offset(&self) -> usize {
        Self::IMU_DIM
    }
    pub fn clones_offset(&self) -> usize {
        Self::IMU_DIM + self.calib_dim
    }
    pub fn clone_offset(&self, idx: usize) -> usize {
        self.clones_offset() + 6 * idx
    }
    pub fn points_offset(&self) -> usize {
        self.clones_offset() + 6 * self.n_clones
    }
    pub fn point_offset(&self, idx: usize) -> usize {
        self.points_offset() + 3 * idx
    }
    pub fn planes_offset(&self) -> usize {
        self.points_offset() + 3 * self.n_points
    }
    pub fn plane_offset(&self, idx: usize) -> usize {
        self.planes_offset() + 3 * idx
    }
    pub fn dim(&self) -> usize {
        self.planes_offset() + 3 * self.n_planes
    }
}

/// The full error-state EKF state.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub imu: ImuState,
    pub calib: CalibState,
    /// Sliding window of past IMU poses: (timestamp, body-in-world pose),
    /// strictly increasing in time.
    pub clones: Vec<(Real, Pose)>,
    point_ids: Vec<u64>,
    point_index: HashMap<u64, usize>,
    points: HashMap<u64, Vec3>,
    plane_ids: Vec<u64>,
    plane_index: HashMap<u64, usize>,
    planes: HashMap<u64, PlaneLandmarkEntry>,
    cov: MatD,
    cfg: StateConfig,
    next_plane_id: u64,
}

impl FilterState {
    pub fn new(imu: ImuState, calib: CalibState, cfg: StateConfig, initial_cov: MatD) -> Self {
        let calib_dim = if cfg.online_calib { 10 } else { 0 };
        let dim = StateLayout::IMU_DIM + calib_dim;
        let mut cov = MatD::zeros(dim, dim);
        cov.view_mut((0, 0), (StateLayout::IMU_DIM, StateLayout::IMU_DIM))
            .copy_from(&initial_cov);
        FilterState {
            imu,
            calib,
            clones: Vec::new(),
            point_ids: Vec::new(),
            point_index: HashMap::new(),
            points: HashMap::new(),
            plane_ids: Vec::new(),
            plane_index: HashMap::new(),
            planes: HashMap::new(),
            cov,
            cfg,
            next_plane_id: 0,
        }
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            calib_dim: if self.cfg.online_calib { 10 } else { 0 },
            n_clones: self.clones.len(),
            n_points: self.point_ids.len(),
            n_planes: self.plane_ids.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }

    pub fn covariance(&self) -> &MatD {
        &self.cov
    }

    pub fn covariance_mut(&mut self) -> &mut MatD {
        &mut self.cov
    }

    pub fn config(&self) -> &StateConfig {
        &self.cfg
    }

    /// Allocate a fresh, monotonically increasing plane landmark id.
    pub fn alloc_plane_id(&mut self) -> u64 {
        let id = self.next_plane_id;
        self.next_plane_id += 1;
        id
    }

    pub fn point_ids(&self) -> &[u64] {
        &self.point_ids
    }
    pub fn plane_ids(&self) -> &[u64] {
        &self.plane_ids
    }
    pub fn point(&self, id: u64) -> Option<&Vec3> {
        self.points.get(&id)
    }
    pub fn plane(&self, id: u64) -> Option<&PlaneLandmarkEntry> {
        self.planes.get(&id)
    }
    pub fn plane_mut(&mut self, id: u64) -> Option<&mut PlaneLandmarkEntry> {
        self.planes.get_mut(&id)
    }
    pub fn planes_iter(&self) -> impl Iterator<Item = (&u64, &PlaneLandmarkEntry)> {
        self.plane_ids.iter().map(move |id| (id, &self.planes[id]))
    }
    pub fn point_slot(&self, id: u64) -> Option<usize> {
        self.point_index.get(&id).copied()
    }
    pub fn plane_slot(&self, id: u64) -> Option<usize> {
        self.plane_index.get(&id).copied()
    }

    /// Index of the clone nearest `t` within `tol`, if any.
    pub fn clone_at(&self, t: Real, tol: Real) -> Option<usize> {
        self.clones
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1 .0 - t).abs();
                let db = (b.1 .0 - t).abs();
                da.partial_cmp(&db).unwrap()
            })
            .filter(|(_, (tc, _))| (tc - t).abs() <= tol)
            .map(|(i, _)| i)
    }

    /// Append the current IMU pose as a clone; marginalizes the oldest clone
    /// first when the window is full. Returns the new clone index.
    pub fn augment_clone(&mut self, timestamp: Real) -> Result<usize> {
        if let Some((last, _)) = self.clones.last() {
            if timestamp <= *last {
                return Err(Error::ObservationInvalid("clone timestamp not increasing"));
            }
        }
        if self.clones.len() >= self.cfg.max_clones {
            self.marginalize_clone(0);
        }
        let layout = self.layout();
        let at = layout.points_offset();
        let old_dim = layout.dim();
        let cov = std::mem::replace(&mut self.cov, MatD::zeros(0, 0));
        let mut cov = cov.insert_columns(at, 6, 0.0).insert_rows(at, 6, 0.0);
        // Exact identity Jacobian of the clone w.r.t. the IMU pose error:
        // copy the dtheta/dp rows and columns of the covariance.
        let map = |j: usize| if j < at { j } else { j + 6 };
        for i in 0..6 {
            for j in 0..old_dim {
                let v = cov[(i, map(j))];
                cov[(at + i, map(j))] = v;
                let v = cov[(map(j), i)];
                cov[(map(j), at + i)] = v;
            }
        }
        for i in 0..6 {
            for k in 0..6 {
                let v = cov[(i, k)];
                cov[(at + i, at + k)] = v;
            }
        }
        self.cov = cov;
        self.clones.push((timestamp, self.imu.pose()));
        self.debug_validate();
        Ok(self.clones.len() - 1)
    }

    /// Drop a clone, removing its covariance rows and columns.
    pub fn marginalize_clone(&mut self, idx: usize) {
        let off = self.layout().clone_offset(idx);
        self.remove_block(off, 6);
        self.clones.remove(idx);
        self.debug_validate();
    }

    /// Insert a point landmark with the given marginal covariance and zero
    /// cross-covariance.
    pub fn insert_point_landmark(
        &mut self,
        id: u64,
        position: Vec3,
        cov3: &nalgebra::Matrix3<Real>,
    ) {
        assert!(!self.points.contains_key(&id), "duplicate point landmark id");
        let at = self.layout().planes_offset();
        let cov = std::mem::replace(&mut self.cov, MatD::zeros(0, 0));
        let mut cov = cov.insert_columns(at, 3, 0.0).insert_rows(at, 3, 0.0);
        cov.view_mut((at, at), (3, 3)).copy_from(cov3);
        self.cov = cov;
        self.point_index.insert(id, self.point_ids.len());
        self.point_ids.push(id);
        self.points.insert(id, position);
        self.debug_validate();
    }

    pub fn set_point(&mut self, id: u64, position: Vec3) {
        if let Some(p) = self.points.get_mut(&id) {
            *p = position;
        }
    }

    pub fn remove_point_landmark(&mut self, id: u64) {
        let Some(idx) = self.point_index.remove(&id) else { return };
        let off = self.layout().point_offset(idx);
        self.remove_block(off, 3);
        self.point_ids.remove(idx);
        self.points.remove(&id);
        for v in self.point_index.values_mut() {
            if *v > idx {
                *v -= 1;
            }
        }
        self.debug_validate();
    }

    /// Insert a plane landmark with the given marginal covariance and zero
    /// cross-covariance. Returns the landmark id.
    pub fn insert_plane_landmark(
        &mut self,
        entry: PlaneLandmarkEntry,
        cov3: &nalgebra::Matrix3<Real>,
    ) -> u64 {
        let id = entry.patch.id;
        assert!(!self.planes.contains_key(&id), "duplicate plane landmark id");
        let at = self.layout().dim();
        let cov = std::mem::replace(&mut self.cov, MatD::zeros(0, 0));
        let mut cov = cov.insert_columns(at, 3, 0.0).insert_rows(at, 3, 0.0);
        cov.view_mut((at, at), (3, 3)).copy_from(cov3);
        self.cov = cov;
        self.plane_index.insert(id, self.plane_ids.len());
        self.plane_ids.push(id);
        self.planes.insert(id, entry);
        self.debug_validate();
        id
    }

    pub fn remove_plane_landmark(&mut self, id: u64) {
        let Some(idx) = self.plane_index.remove(&id) else { return };
        let off = self.layout().plane_offset(idx);
        self.remove_block(off, 3);
        self.plane_ids.remove(idx);
        self.planes.remove(&id);
        for v in self.plane_index.values_mut() {
            if *v > idx {
                *v -= 1;
            }
        }
        self.debug_validate();
    }

    fn remove_block(&mut self, off: usize, len: usize) {
        let cov = std::mem::replace(&mut self.cov, MatD::zeros(0, 0));
        self.cov = cov.remove_columns(off, len).remove_rows(off, len);
    }

    /// Standard EKF update with Joseph-form covariance. `h` columns must
    /// follow the current layout; `noise` is the measurement covariance.
    pub fn ekf_update(&mut self, residual: &VecD, h: &MatD, noise: &MatD) -> Result<()> {
        let (dx, new_cov) = kalman_update(&self.cov, h, noise, residual)?;
        self.cov = new_cov;
        self.inject(&dx);
        self.debug_validate();
        Ok(())
    }

    /// Apply an error-state correction: multiplicative on rotations,
    /// additive elsewhere.
    pub fn inject(&mut self, dx: &VecD) {
        assert_eq!(dx.len(), self.dim());
        let layout = self.layout();
        let dtheta = Vec3::new(dx[0], dx[1], dx[2]);
        // R_GtoI_new = Exp(-dtheta) * R_GtoI, the dual of perturbing the
        // body-to-world rotation on the right.
        self.imu.orientation = Rotation::from_scaled_axis(-dtheta).compose(&self.imu.orientation);
        self.imu.orientation.renormalize();
        self.imu.position += Vec3::new(dx[3], dx[4], dx[5]);
        self.imu.velocity += Vec3::new(dx[6], dx[7], dx[8]);
        self.imu.bias_gyro += Vec3::new(dx[9], dx[10], dx[11]);
        self.imu.bias_accel += Vec3::new(dx[12], dx[13], dx[14]);
        if layout.calib_dim > 0 {
            let off = layout.calib_offset();
            let dth = Vec3::new(dx[off], dx[off + 1], dx[off + 2]);
            self.calib.rot_imu_to_cam =
                Rotation::from_scaled_axis(-dth).compose(&self.calib.rot_imu_to_cam);
            self.calib.p_imu_in_cam += Vec3::new(dx[off + 3], dx[off + 4], dx[off + 5]);
            for k in 0..4 {
                self.calib.intrinsics[k] += dx[off + 6 + k];
            }
        }
        for (i, (_, pose)) in self.clones.iter_mut().enumerate() {
            let off = layout.clone_offset(i);
            let dth = Vec3::new(dx[off], dx[off + 1], dx[off + 2]);
            pose.rot = pose.rot.perturb(&dth);
            pose.rot.renormalize();
            pose.pos += Vec3::new(dx[off + 3], dx[off + 4], dx[off + 5]);
        }
        for (i, id) in self.point_ids.iter().enumerate() {
            let off = layout.point_offset(i);
            *self.points.get_mut(id).unwrap() += Vec3::new(dx[off], dx[off + 1], dx[off + 2]);
        }
        let mut moved: Vec<(u64, Vec3)> = Vec::new();
        for (i, id) in self.plane_ids.iter().enumerate() {
            let off = layout.plane_offset(i);
            let d = Vec3::new(dx[off], dx[off + 1], dx[off + 2]);
            if d != Vec3::zeros() {
                moved.push((*id, d));
            }
        }
        for (id, d) in moved {
            let entry = self.planes.get_mut(&id).unwrap();
            let new_cp = entry.patch.plane.cp() + d;
            if let Ok(plane) = crate::geometry::PlaneCP::from_cp(new_cp) {
                // Hull reprojection can only fail if the patch degenerates;
                // keep the previous hull in that case.
                let _ = entry.patch.rebase(plane);
            }
        }
    }

    /// Delayed marginalization sweep: flag large, well-tracked planes as
    /// permanent; drop small or short-tracked ones unseen longer than the
    /// configured delay. Returns the removed ids.
    pub fn delayed_marginalize_planes(&mut self, current_frame: u64) -> Vec<u64> {
        let mut to_remove = Vec::new();
        for id in self.plane_ids.clone() {
            let entry = self.planes.get_mut(&id).unwrap();
            if !entry.permanent
                && entry.patch.area >= self.cfg.area_permanent
                && entry.track_count >= self.cfg.tracks_permanent
            {
                entry.permanent = true;
            }
            if entry.permanent {
                continue;
            }
            let unseen = current_frame.saturating_sub(entry.last_seen_frame);
            let small = entry.patch.area < self.cfg.area_permanent
                || entry.track_count < self.cfg.tracks_permanent;
            if unseen > self.cfg.marginalize_delay_frames as u64 && small {
                to_remove.push(id);
            }
        }
        for id in &to_remove {
            self.remove_plane_landmark(*id);
        }
        to_remove
    }

    /// Merge two plane landmarks: hulls unioned onto the kept patch,
    /// observation counts summed, the dropped landmark marginalized.
    pub fn merge_planes(&mut self, keep_id: u64, drop_id: u64) -> Result<()> {
        if keep_id == drop_id {
            return Ok(());
        }
        if !self.planes.contains_key(&keep_id) || !self.planes.contains_key(&drop_id) {
            return Err(Error::ObservationInvalid("merge id not in state"));
        }
        let dropped = self.planes[&drop_id].clone();
        {
            let kept = self.planes.get_mut(&keep_id).unwrap();
            kept.patch.union_with(&dropped.patch)?;
            kept.track_count += dropped.track_count;
            kept.last_seen_frame = kept.last_seen_frame.max(dropped.last_seen_frame);
            kept.permanent |= dropped.permanent;
        }
        self.remove_plane_landmark(drop_id);
        Ok(())
    }

    /// Pairs of near-identical plane landmarks (older id first) eligible for
    /// merging in the marginalization step.
    pub fn find_merge_pairs(&self) -> Vec<(u64, u64)> {
        let mut pairs = Vec::new();
        let ids = &self.plane_ids;
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let a = &self.planes[&ids[i]].patch;
                let b = &self.planes[&ids[j]].patch;
                if crate::geometry::patch_angle(a, b) < self.cfg.merge_angle
                    && (a.plane.distance() - b.plane.distance()).abs() < self.cfg.merge_dist
                    && crate::geometry::patch_overlap(a, b) > 0.0
                {
                    let keep = ids[i].min(ids[j]);
                    let drop = ids[i].max(ids[j]);
                    pairs.push((keep, drop));
                }
            }
        }
        pairs
    }

    /// Covariance health checks, active in debug builds only.
    pub fn debug_validate(&self) {
        #[cfg(debug_assertions)]
        {
            let dim = self.dim();
            assert_eq!(self.cov.nrows(), dim, "covariance dimension formula violated");
            assert_eq!(self.cov.ncols(), dim);
            let mut max_asym: Real = 0.0;
            for i in 0..dim {
                for j in (i + 1)..dim {
                    max_asym = max_asym.max((self.cov[(i, j)] - self.cov[(j, i)]).abs());
                }
            }
            assert!(max_asym < 1e-9, "covariance asymmetry {max_asym}");
            let scale = if dim > 0 { 1.0 + self.cov.diagonal().amax() } else { 1.0 };
            let jitter = MatD::identity(dim, dim) * (1e-9 * scale);
            assert!(
                (self.cov.clone() + jitter).cholesky().is_some(),
                "covariance not positive semidefinite"
            );
        }
    }
}

/// Core Kalman update: gain, correction, Joseph-form posterior covariance.
pub fn kalman_update(p: &MatD, h: &MatD, r: &MatD, residual: &VecD) -> Result<(VecD, MatD)> {
    let pht = p * h.transpose();
    let s = h * &pht + r;
    let s = (&s + s.transpose()) * 0.5;
    let chol = s.cholesky().ok_or(Error::UpdateRejected)?;
    // K = P H^T S^{-1}  =>  K^T = S^{-1} (P H^T)^T.
    let kt = chol.solve(&pht.transpose());
    let k = kt.transpose();
    let dx = &k * residual;
    let ikh = MatD::identity(p.nrows(), p.ncols()) - &k * h;
    let joseph = &ikh * p * ikh.transpose() + &k * r * k.transpose();
    let cov = (&joseph + joseph.transpose()) * 0.5;
    Ok((dx, cov))
}

/// Chi-square quantile for the given confidence and degrees of freedom.
pub fn chi2_quantile(confidence: Real, dof: usize) -> Real {
    ChiSquared::new(dof as Real).expect("valid dof").inverse_cdf(confidence)
}

/// Mahalanobis gate: accept iff `r^T (H P H^T + R)^{-1} r` is below the
/// chi-square quantile at the given confidence for dim(r) dofs.
pub fn chi2_gate(residual: &VecD, h: &MatD, p: &MatD, r: &MatD, confidence: Real) -> bool {
    let s = h * p * h.transpose() + r;
    let s = (&s + s.transpose()) * 0.5;
    let Some(chol) = s.cholesky() else { return false };
    let x = chol.solve(residual);
    let m2 = residual.dot(&x);
    m2 < chi2_quantile(confidence, residual.len())
}
