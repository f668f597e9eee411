//! Plane fitting, association, initialization and EKF update.
//!
//! Planes arrive as camera-frame CP fits with inlier samples. They are
//! matched to map landmarks by normal angle, CP distance and patch overlap;
//! unmatched observations accumulate in a pending buffer until enough views
//! justify inserting a new landmark.

use nalgebra::Matrix3;
use rand::Rng;

use crate::config::PlaneConfig;
use crate::error::{Error, Result};
use crate::geometry::{plane_to_world, skew, PlaneCP, PlanePatch, Pose, EPS_CP};
use crate::state::{chi2_gate, CalibState, FilterState, PlaneLandmarkEntry};
use crate::{MatD, Real, Vec3, VecD};

/// A fitted plane observation from one camera frame.
#[derive(Debug, Clone)]
pub struct PlaneObservation {
    pub frame: u64,
    /// Fitted camera-frame plane.
    pub plane_cam: PlaneCP,
    /// Camera-frame inlier sample subset.
    pub inliers: Vec<Vec3>,
    /// Measurement covariance of the camera-frame CP vector.
    pub cov: Matrix3<Real>,
}

/// Least-squares plane refinement: centroid plus smallest-eigenvector
/// normal. Returns (normal, d) with d > 0 and the mid eigenvalue of the
/// scatter for degeneracy checks.
fn refine_plane(points: &[Vec3]) -> Result<(Vec3, Real, Real)> {
    let n = points.len() as Real;
    let centroid: Vec3 = points.iter().sum::<Vec3>() / n;
    let mut scatter = Matrix3::<Real>::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(scatter / n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| eig.eigenvalues[*a].partial_cmp(&eig.eigenvalues[*b]).unwrap());
    let normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
    let lateral = eig.eigenvalues[order[1]].max(0.0).sqrt();
    let mut normal = normal.normalize();
    let mut d = normal.dot(&centroid);
    if d < 0.0 {
        normal = -normal;
        d = -d;
    }
    Ok((normal, d, lateral))
}

/// RANSAC plane fit with MLE refinement and first-order covariance.
///
/// `sigma_point` is the isotropic per-point noise driving the covariance.
pub fn fit_plane_ransac(
    points: &[Vec3],
    cfg: &PlaneConfig,
    sigma_point: Real,
    rng: &mut impl Rng,
) -> Result<PlaneObservation> {
    if points.len() < cfg.min_inliers.max(3) {
        return Err(Error::FitFailed(0.0));
    }
    let mut best_inliers: Vec<usize> = Vec::new();
    for _ in 0..cfg.ransac_iters {
        let i = rng.gen_range(0..points.len());
        let j = rng.gen_range(0..points.len());
        let k = rng.gen_range(0..points.len());
        if i == j || j == k || i == k {
            continue;
        }
        let e1 = points[j] - points[i];
        let e2 = points[k] - points[i];
        let cr = e1.cross(&e2);
        if cr.norm() < 1e-9 {
            continue;
        }
        let n = cr.normalize();
        let d = n.dot(&points[i]);
        let inliers: Vec<usize> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| (n.dot(p) - d).abs() <= cfg.inlier_tol)
            .map(|(idx, _)| idx)
            .collect();
        if inliers.len() > best_inliers.len() {
            best_inliers = inliers;
        }
    }
    if best_inliers.is_empty() {
        // No valid hypothesis at all: distinguish a degenerate (collinear)
        // point set from plain outlier contamination.
        let (_, _, lateral) = refine_plane(points)?;
        if lateral < cfg.min_lateral_extent {
            return Err(Error::FitDegenerate("inlier spread too thin"));
        }
        return Err(Error::FitFailed(0.0));
    }
    let ratio = best_inliers.len() as Real / points.len() as Real;
    if ratio < 0.5 {
        return Err(Error::FitFailed(ratio));
    }
    // Two refinement passes: fit, re-select inliers, fit again.
    let mut inlier_pts: Vec<Vec3> = best_inliers.iter().map(|&i| points[i]).collect();
    let (n0, d0, _) = refine_plane(&inlier_pts)?;
    inlier_pts = points
        .iter()
        .filter(|p| (n0.dot(p) - d0).abs() <= cfg.inlier_tol)
        .copied()
        .collect();
    if (inlier_pts.len() as Real) < 0.5 * points.len() as Real {
        return Err(Error::FitFailed(inlier_pts.len() as Real / points.len() as Real));
    }
    let (normal, d, lateral) = refine_plane(&inlier_pts)?;
    if lateral < cfg.min_lateral_extent {
        return Err(Error::FitDegenerate("inlier spread too thin"));
    }
    if d <= EPS_CP {
        return Err(Error::FitDegenerate("plane passes through the camera origin"));
    }
    let plane = PlaneCP::from_normal_distance(&normal, d)?;

    // First-order covariance of the CP vector: Fisher information of the
    // point-to-plane residuals r_i(cp) = (cp.p_i)/|cp| - |cp|.
    let mut info = Matrix3::<Real>::zeros();
    for p in &inlier_pts {
        let g = (p - normal * normal.dot(p)) / d - normal;
        info += g * g.transpose() / (sigma_point * sigma_point);
    }
    let eig = nalgebra::SymmetricEigen::new(info);
    let mut cov = Matrix3::<Real>::zeros();
    let floor = cfg.sigma_cp_floor * cfg.sigma_cp_floor;
    for k in 0..3 {
        let lam = eig.eigenvalues[k];
        let var = if lam > 1e-12 { (1.0 / lam).max(floor) } else { 1.0 };
        let q = eig.eigenvectors.column(k);
        cov += q * q.transpose() * var;
    }
    Ok(PlaneObservation { frame: 0, plane_cam: plane, inliers: inlier_pts, cov })
}

/// Result of associating one observation against the landmark map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    Existing(u64),
    New,
}

/// Match a world-frame observation (plane + temporary patch) against the
/// landmarks: minimum normal angle subject to the angle/distance gates and
/// positive patch overlap.
pub fn associate_plane(
    state: &FilterState,
    obs_plane: &PlaneCP,
    obs_patch: &PlanePatch,
    cfg: &PlaneConfig,
) -> Association {
    let mut best: Option<(Real, u64)> = None;
    for (id, entry) in state.planes_iter() {
        let lp = &entry.patch.plane;
        let angle = obs_plane.normal().dot(&lp.normal()).abs().clamp(0.0, 1.0).acos();
        if angle >= cfg.assoc_angle {
            continue;
        }
        if (obs_plane.distance() - lp.distance()).abs() >= cfg.assoc_dist {
            continue;
        }
        if crate::geometry::patch_overlap(obs_patch, &entry.patch) <= 0.0 {
            continue;
        }
        if best.map_or(true, |(a, _)| angle < a) {
            best = Some((angle, *id));
        }
    }
    match best {
        Some((_, id)) => Association::Existing(id),
        None => Association::New,
    }
}

/// Residual and Jacobians of a camera-frame plane measurement.
#[derive(Debug, Clone)]
pub struct PlaneResidual {
    pub residual: Vec3,
    /// W.r.t. the observing clone pose error [dtheta, dp].
    pub h_pose: nalgebra::Matrix3x6<Real>,
    /// W.r.t. the landmark CP vector.
    pub h_plane: Matrix3<Real>,
    /// W.r.t. calibration [dtheta_ext(3), dp_ext(3), intrinsics(4)].
    pub h_calib: Option<nalgebra::SMatrix<Real, 3, 10>>,
}

/// Linearize `z = (R_GtoC n)(d - p_C . n)` about the current estimates.
pub fn plane_residual_jacobians(
    plane_g: &PlaneCP,
    measured_cam: &PlaneCP,
    imu_pose: &Pose,
    calib: &CalibState,
    with_calib: bool,
) -> Result<PlaneResidual> {
    let cp = plane_g.cp();
    let rho = plane_g.distance();
    let n = plane_g.normal();
    let r_gtoi = imu_pose.rot.inverse().matrix();
    let r_itoc = calib.rot_imu_to_cam.matrix();
    // Camera origin in the IMU frame (constant given the calibration).
    let e = -calib.rot_imu_to_cam.inverse().rotate(&calib.p_imu_in_cam);
    let p_c = imu_pose.pos + imu_pose.rot.rotate(&e);
    let d_cam = rho - p_c.dot(&n);
    if d_cam <= EPS_CP {
        return Err(Error::DegeneratePlane(d_cam));
    }
    let w = r_gtoi * (cp - n * (n.dot(&p_c)));
    let predicted = r_itoc * w;
    let residual = measured_cam.cp() - predicted;

    let r_gtoc = r_itoc * r_gtoi;
    let r_itog = r_gtoi.transpose();
    let nnt = n * n.transpose();
    let h_theta = r_itoc * (skew(&w) + r_gtoi * nnt * r_itog * skew(&e));
    let h_p = -r_gtoc * nnt;
    let mut h_pose = nalgebra::Matrix3x6::zeros();
    h_pose.view_mut((0, 0), (3, 3)).copy_from(&h_theta);
    h_pose.view_mut((0, 3), (3, 3)).copy_from(&h_p);
    // d(cp - n n^T p)/d(cp).
    let proj = Matrix3::identity() - nnt;
    let m_cp = Matrix3::identity() - (n * p_c.transpose() + Matrix3::identity() * n.dot(&p_c)) * proj / rho;
    let h_plane = r_gtoc * m_cp;

    let h_calib = if with_calib {
        let mut h = nalgebra::SMatrix::<Real, 3, 10>::zeros();
        h.view_mut((0, 0), (3, 3)).copy_from(&skew(&predicted));
        let h_pe = r_gtoc * nnt * r_gtoc.transpose();
        h.view_mut((0, 3), (3, 3)).copy_from(&h_pe);
        Some(h)
    } else {
        None
    };
    Ok(PlaneResidual { residual, h_pose, h_plane, h_calib })
}

/// Jacobian of the camera-to-world CP transform, used to map the fitted
/// covariance into the world frame at initialization.
pub fn cam_to_world_jacobian(plane_cam: &PlaneCP, cam_pose: &Pose) -> Matrix3<Real> {
    let r = cam_pose.rot.matrix();
    let n = plane_cam.normal();
    let rho = plane_cam.distance();
    let q = cam_pose.rot.inverse().rotate(&cam_pose.pos);
    let proj = Matrix3::identity() - n * n.transpose();
    r * (Matrix3::identity() + (n * q.transpose() + Matrix3::identity() * n.dot(&q)) * proj / rho)
}

/// A plane observation waiting for enough views to become a landmark.
#[derive(Debug, Clone)]
struct PendingPlane {
    plane_world: PlaneCP,
    points_world: Vec<Vec3>,
    count: u32,
    last_seen: u64,
    last_cam: (PlaneCP, Matrix3<Real>, Pose),
}

/// Buffer of not-yet-initialized planes.
#[derive(Debug, Default)]
pub struct PendingPlanes {
    entries: Vec<PendingPlane>,
}

impl PendingPlanes {
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Outcome of one frame's plane update.
#[derive(Debug, Default)]
pub struct PlaneUpdateOutcome {
    pub updated: Vec<u64>,
    pub inserted: Vec<u64>,
    pub gated: Vec<u64>,
}

/// Process one frame of plane observations: associate, EKF-update matched
/// landmarks jointly, grow hulls, and promote pending planes with enough
/// views into new landmarks.
pub fn plane_update(
    state: &mut FilterState,
    observations: &[(PlaneObservation, usize)],
    frame: u64,
    cfg: &PlaneConfig,
    pending: &mut PendingPlanes,
) -> Result<PlaneUpdateOutcome> {
    let mut outcome = PlaneUpdateOutcome::default();
    let layout = state.layout();
    let dim = layout.dim();
    let with_calib = layout.calib_dim > 0;
    let mut rows: Vec<(MatD, Vec3, Matrix3<Real>)> = Vec::new();
    let mut hull_growth: Vec<(u64, Vec<Vec3>)> = Vec::new();

    for (obs, clone_idx) in observations {
        let (_, imu_pose) = state.clones[*clone_idx];
        let cam_pose = state.calib.camera_pose(&imu_pose);
        let Ok(plane_world) = plane_to_world(&cam_pose, &obs.plane_cam) else {
            continue;
        };
        let world_pts: Vec<Vec3> =
            obs.inliers.iter().map(|p| cam_pose.transform_point(p)).collect();
        let Ok(obs_patch) = PlanePatch::from_world_points(u64::MAX, plane_world, &world_pts)
        else {
            continue;
        };

        match associate_plane(state, &plane_world, &obs_patch, cfg) {
            Association::Existing(id) => {
                let entry = state.plane(id).unwrap();
                let res = match plane_residual_jacobians(
                    &entry.patch.plane,
                    &obs.plane_cam,
                    &imu_pose,
                    &state.calib,
                    with_calib,
                ) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                let slot = state.plane_slot(id).unwrap();
                let mut h = MatD::zeros(3, dim);
                h.view_mut((0, layout.clone_offset(*clone_idx)), (3, 6))
                    .copy_from(&res.h_pose);
                h.view_mut((0, layout.plane_offset(slot)), (3, 3)).copy_from(&res.h_plane);
                if let Some(hc) = res.h_calib {
                    h.view_mut((0, layout.calib_offset()), (3, 10)).copy_from(&hc);
                }
                let rv =
                    VecD::from_vec(vec![res.residual.x, res.residual.y, res.residual.z]);
                let noise = MatD::from_fn(3, 3, |i, j| obs.cov[(i, j)]);
                if !chi2_gate(&rv, &h, state.covariance(), &noise, cfg.chi2_confidence) {
                    outcome.gated.push(id);
                    continue;
                }
                rows.push((h, res.residual, obs.cov));
                hull_growth.push((id, world_pts));
                outcome.updated.push(id);
            }
            Association::New => {
                // Try the pending buffer with the same angle/distance gates.
                let mut hit = None;
                for (k, p) in pending.entries.iter().enumerate() {
                    let angle = plane_world
                        .normal()
                        .dot(&p.plane_world.normal())
                        .abs()
                        .clamp(0.0, 1.0)
                        .acos();
                    if angle < cfg.assoc_angle
                        && (plane_world.distance() - p.plane_world.distance()).abs()
                            < cfg.assoc_dist
                    {
                        hit = Some(k);
                        break;
                    }
                }
                match hit {
                    Some(k) => {
                        let entry = &mut pending.entries[k];
                        entry.count += 1;
                        entry.last_seen = frame;
                        entry.plane_world = plane_world;
                        entry.points_world.extend(world_pts);
                        if entry.points_world.len() > 256 {
                            let excess = entry.points_world.len() - 256;
                            entry.points_world.drain(0..excess);
                        }
                        entry.last_cam = (obs.plane_cam, obs.cov, cam_pose);
                    }
                    None => pending.entries.push(PendingPlane {
                        plane_world,
                        points_world: world_pts,
                        count: 1,
                        last_seen: frame,
                        last_cam: (obs.plane_cam, obs.cov, cam_pose),
                    }),
                }
            }
        }
    }

    // Joint update over all accepted observations.
    if !rows.is_empty() {
        let m = 3 * rows.len();
        let mut h = MatD::zeros(m, dim);
        let mut r = VecD::zeros(m);
        let mut noise = MatD::zeros(m, m);
        for (i, (hb, rb, cov)) in rows.iter().enumerate() {
            h.view_mut((3 * i, 0), (3, dim)).copy_from(hb);
            for k in 0..3 {
                r[3 * i + k] = rb[k];
                for l in 0..3 {
                    noise[(3 * i + k, 3 * i + l)] = cov[(k, l)];
                }
            }
        }
        state.ekf_update(&r, &h, &noise)?;
    }
    for (id, pts) in hull_growth {
        if let Some(entry) = state.plane_mut(id) {
            let _ = entry.patch.extend(&pts);
            entry.last_seen_frame = frame;
            entry.track_count += 1;
        }
    }

    // Promote pending planes that collected enough observations.
    let mut still_pending = Vec::new();
    for p in pending.entries.drain(..) {
        if p.count >= cfg.min_obs_init {
            let (plane_cam, cov_cam, cam_pose) = p.last_cam;
            let Ok(plane_world) = plane_to_world(&cam_pose, &plane_cam) else {
                continue;
            };
            let id = state.alloc_plane_id();
            let Ok(patch) = PlanePatch::from_world_points(id, plane_world, &p.points_world)
            else {
                continue;
            };
            let j = cam_to_world_jacobian(&plane_cam, &cam_pose);
            let cov_world = j * cov_cam * j.transpose() * cfg.init_inflation;
            state.insert_plane_landmark(
                PlaneLandmarkEntry {
                    patch,
                    last_seen_frame: frame,
                    track_count: p.count,
                    permanent: false,
                },
                &cov_world,
            );
            outcome.inserted.push(id);
        } else if frame.saturating_sub(p.last_seen) <= cfg.pending_ttl_frames as u64 {
            still_pending.push(p);
        }
    }
    pending.entries = still_pending;
    Ok(outcome)
}
