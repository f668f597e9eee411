//! Synthetic scenes, trajectories and sensor streams.
//!
//! Scenes are plane patches plus point features; the corridor generator
//! builds a rectangular loop with segmented walls. Measurement synthesis
//! projects features through the true trajectory, perturbs them with the
//! rig's noise model, and fits plane observations from noisy depth samples
//! with the same RANSAC the filter consumes in production.

mod spline;
mod trajectory;

pub use trajectory::{Trajectory, TrajectorySpec};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rand::SeedableRng;

use crate::config::PlaneConfig;
use crate::error::{Error, Result};
use crate::geometry::{PlaneCP, PlanePatch, Pose, Rotation};
use crate::planes::{fit_plane_ransac, PlaneObservation};
use crate::points::PointObservation;
use crate::propagation::{ImuNoiseModel, ImuSample};
use crate::{Real, Vec2, Vec3};

/// Ground-truth scene: bounded plane patches and point features.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub patches: Vec<PlanePatch>,
    pub points: Vec<Vec3>,
    pub seed: u64,
}

/// Measurement drift injection: from `frame` on, all vision measurements
/// are generated from poses perturbed by this world-frame transform.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementDrift {
    pub frame: u64,
    pub translation: Vec3,
    /// Rotation vector, radians.
    pub rotation: Vec3,
}

/// Camera + IMU sensor rig with noise parameters.
#[derive(Debug, Clone)]
pub struct SensorRig {
    /// Pinhole intrinsics fx, fy, cx, cy.
    pub intrinsics: [Real; 4],
    pub width: u32,
    pub height: u32,
    /// Rotation from the IMU frame into the camera frame.
    pub rot_imu_to_cam: Rotation,
    /// IMU origin in the camera frame, m.
    pub p_imu_in_cam: Vec3,
    /// Valid depth range, m.
    pub depth_min: Real,
    pub depth_max: Real,
    /// Pixel noise, px.
    pub sigma_px: Real,
    /// Depth noise along the view ray, m.
    pub sigma_depth: Real,
    /// Fraction of point observations that carry depth.
    pub depth_availability: Real,
    pub imu_noise: ImuNoiseModel,
    pub drift_injections: Vec<MeasurementDrift>,
}

impl Default for SensorRig {
    fn default() -> Self {
        SensorRig {
            intrinsics: [380.0, 380.0, 320.0, 240.0],
            width: 640,
            height: 480,
            // Camera looks along body +x: cam x = -body y, cam y = -body z.
            rot_imu_to_cam: Rotation::from_matrix(&crate::Mat3::new(
                0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0,
            )),
            p_imu_in_cam: Vec3::new(0.02, -0.01, 0.03),
            depth_min: 0.3,
            depth_max: 8.0,
            sigma_px: 1.0,
            sigma_depth: 0.01,
            depth_availability: 0.95,
            imu_noise: ImuNoiseModel::default(),
            drift_injections: Vec::new(),
        }
    }
}

impl SensorRig {
    /// Horizontal field of view implied by the intrinsics, degrees.
    pub fn fov_deg(&self) -> Real {
        2.0 * ((self.width as Real * 0.5) / self.intrinsics[0]).atan().to_degrees()
    }

    /// Camera pose in the world for a given IMU body-in-world pose.
    pub fn camera_pose(&self, imu_pose: &Pose) -> Pose {
        let rot = imu_pose.rot.compose(&self.rot_imu_to_cam.inverse());
        let pos = imu_pose.pos - rot.rotate(&self.p_imu_in_cam);
        Pose::new(rot, pos)
    }

    /// A noise-free copy (keeps geometry, zeroes all stochastic terms).
    pub fn noiseless(&self) -> Self {
        let mut rig = self.clone();
        rig.sigma_px = 0.0;
        rig.sigma_depth = 0.0;
        rig.depth_availability = 1.0;
        rig.imu_noise.sigma_g = 0.0;
        rig.imu_noise.sigma_a = 0.0;
        rig.imu_noise.sigma_bg = 0.0;
        rig.imu_noise.sigma_ba = 0.0;
        rig
    }
}

/// Parameters of the rectangular-loop corridor scene.
#[derive(Debug, Clone)]
pub struct CorridorParams {
    /// Centerline perimeter, m.
    pub length: Real,
    /// Corridor width, m.
    pub width: Real,
    /// Wall height, m.
    pub height: Real,
    /// Number of point features.
    pub n_features: usize,
    /// Upper bound on wall segment length, m.
    pub max_segment: Real,
    pub seed: u64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        CorridorParams {
            length: 40.0,
            width: 1.5,
            height: 2.5,
            n_features: 350,
            max_segment: 3.0,
            seed: 1,
        }
    }
}

fn rect_points(
    n: Vec3,
    d: Real,
    u: Vec3,
    v: Vec3,
    u_range: (Real, Real),
    v_range: (Real, Real),
) -> (PlaneCP, [Vec3; 4]) {
    let plane = PlaneCP::from_normal_distance(&n, d).expect("valid scene plane");
    let origin = plane.cp();
    // The rectangle lives in absolute (u, v) coordinates: x = u*a + v*b + n*d
    // only when (u, v, n) spans the frame; ranges are absolute along u/v.
    let corner = |a: Real, b: Real| origin + u * a + v * b;
    (
        plane,
        [
            corner(u_range.0, v_range.0),
            corner(u_range.1, v_range.0),
            corner(u_range.1, v_range.1),
            corner(u_range.0, v_range.1),
        ],
    )
}

/// Rectangular-loop corridor: floor and ceiling arms, segmented inner and
/// outer walls, and point features on walls and in free space.
pub fn generate_corridor_scene(params: &CorridorParams) -> Result<SceneSpec> {
    if params.length <= 0.0 || params.width <= 0.0 || params.height <= 0.6 {
        return Err(Error::ScenarioInvalid("corridor dimensions must be positive".into()));
    }
    let side = params.length / 4.0;
    let ho = (side + params.width) / 2.0;
    let hi = (side - params.width) / 2.0;
    if hi <= 0.3 {
        return Err(Error::ScenarioInvalid("corridor too narrow for its length".into()));
    }
    let z_floor = -(params.height / 2.0 + 0.05);
    let z_ceil = z_floor + params.height;

    let mut patches: Vec<PlanePatch> = Vec::new();
    let mut next_id = 0u64;
    let mut push = |plane: PlaneCP, corners: [Vec3; 4], patches: &mut Vec<PlanePatch>, id: &mut u64| {
        let patch = PlanePatch::from_world_points(*id, plane, &corners).expect("valid patch");
        *id += 1;
        patches.push(patch);
    };

    // Floor and ceiling arms (x arms span the full outer width).
    let ex = Vec3::x();
    let ey = Vec3::y();
    for (n, d) in [(Vec3::new(0.0, 0.0, -1.0), -z_floor), (Vec3::new(0.0, 0.0, 1.0), z_ceil)] {
        for (ur, vr) in [
            ((-ho, ho), (hi, ho)),
            ((-ho, ho), (-ho, -hi)),
            ((-ho, -hi), (-hi, hi)),
            ((hi, ho), (-hi, hi)),
        ] {
            let (plane, corners) = rect_points(n, d, ex, ey, ur, vr);
            push(plane, corners, &mut patches, &mut next_id);
        }
    }

    // Walls: four outer sides at distance ho, four inner sides at hi.
    let z_range = (z_floor, z_ceil);
    let wall_sides: [(Vec3, Real, Vec3, Real); 8] = [
        (Vec3::new(1.0, 0.0, 0.0), ho, ey, ho),
        (Vec3::new(-1.0, 0.0, 0.0), ho, ey, ho),
        (Vec3::new(0.0, 1.0, 0.0), ho, ex, ho),
        (Vec3::new(0.0, -1.0, 0.0), ho, ex, ho),
        (Vec3::new(1.0, 0.0, 0.0), hi, ey, hi),
        (Vec3::new(-1.0, 0.0, 0.0), hi, ey, hi),
        (Vec3::new(0.0, 1.0, 0.0), hi, ex, hi),
        (Vec3::new(0.0, -1.0, 0.0), hi, ex, hi),
    ];
    for (n, d, tangent, half_span) in wall_sides {
        let span = 2.0 * half_span;
        let n_seg = (span / params.max_segment).ceil().max(1.0) as usize;
        let seg = span / n_seg as Real;
        for k in 0..n_seg {
            let a = -half_span + k as Real * seg;
            let (plane, corners) = rect_points(n, d, tangent, Vec3::z(), (a, a + seg), z_range);
            push(plane, corners, &mut patches, &mut next_id);
        }
    }

    // Point features: most on walls, the rest in corridor free space.
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let wall_ids: Vec<usize> = (8..patches.len()).collect();
    let mut points = Vec::with_capacity(params.n_features);
    while points.len() < params.n_features {
        if rng.gen_bool(0.65) {
            let patch = &patches[wall_ids[rng.gen_range(0..wall_ids.len())]];
            let verts = patch.hull.vertices();
            let (min, max) = bbox(verts);
            let uv = Vec2::new(
                rng.gen_range(min.x + 0.05..max.x - 0.05),
                rng.gen_range(min.y + 0.05..max.y - 0.05),
            );
            if !patch.hull.contains(&uv, 0.0) {
                continue;
            }
            let origin = patch.plane.cp();
            points.push(origin + patch.basis.0 * uv.x + patch.basis.1 * uv.y);
        } else {
            let x = rng.gen_range(-ho + 0.2..ho - 0.2);
            let y = rng.gen_range(-ho + 0.2..ho - 0.2);
            if x.abs().max(y.abs()) < hi + 0.2 {
                continue;
            }
            let z = rng.gen_range(z_floor + 0.3..z_ceil - 0.3);
            points.push(Vec3::new(x, y, z));
        }
    }
    Ok(SceneSpec { patches, points, seed: params.seed })
}

fn bbox(verts: &[Vec2]) -> (Vec2, Vec2) {
    let mut min = Vec2::new(Real::INFINITY, Real::INFINITY);
    let mut max = Vec2::new(Real::NEG_INFINITY, Real::NEG_INFINITY);
    for v in verts {
        min.x = min.x.min(v.x);
        min.y = min.y.min(v.y);
        max.x = max.x.max(v.x);
        max.y = max.y.max(v.y);
    }
    (min, max)
}

/// Centerline loop trajectory through the corridor: straights and rounded
/// corners at constant speed, yaw following the path tangent.
pub fn corridor_trajectory(
    params: &CorridorParams,
    laps: Real,
    speed: Real,
    imu_rate: Real,
    cam_rate: Real,
) -> Result<Trajectory> {
    let half = params.length / 8.0;
    let r = (0.45 * params.width).min(0.6);
    let straight = 2.0 * (half - r);
    let quarter = std::f64::consts::FRAC_PI_2 * r;
    let lap_len = 4.0 * straight + 4.0 * quarter;
    let total = laps * lap_len;
    let step = 0.35;
    let n = (total / step).ceil() as usize;

    // Position and heading along the rounded square, arc length s per lap.
    let point_at = |s: Real| -> (Vec2, Real) {
        let s = s.rem_euclid(lap_len);
        // Pieces starting at (half, 0) heading +y, counter-clockwise.
        let h = half;
        let hs = straight / 2.0;
        let pieces = [
            (hs, 0),      // right side, up to the corner entry
            (quarter, 1), // top-right corner
            (straight, 2),
            (quarter, 3),
            (straight, 4),
            (quarter, 5),
            (straight, 6),
            (quarter, 7),
            (hs, 8), // right side, back to start
        ];
        let mut rem = s;
        for (len, kind) in pieces {
            if rem > len {
                rem -= len;
                continue;
            }
            return match kind {
                0 => (Vec2::new(h, rem), std::f64::consts::FRAC_PI_2),
                1 => {
                    let a = rem / r;
                    let c = Vec2::new(h - r, hs);
                    (
                        Vec2::new(c.x + r * a.cos(), c.y + r * a.sin()),
                        std::f64::consts::FRAC_PI_2 + a,
                    )
                }
                2 => (Vec2::new(h - r - rem, h), std::f64::consts::PI),
                3 => {
                    let a = rem / r;
                    let c = Vec2::new(-hs, h - r);
                    let base = std::f64::consts::FRAC_PI_2;
                    (
                        Vec2::new(c.x + r * (base + a).cos(), c.y + r * (base + a).sin()),
                        std::f64::consts::PI + a,
                    )
                }
                4 => (Vec2::new(-h, h - r - rem), 1.5 * std::f64::consts::PI),
                5 => {
                    let a = rem / r;
                    let c = Vec2::new(-(h - r), -hs);
                    let base = std::f64::consts::PI;
                    (
                        Vec2::new(c.x + r * (base + a).cos(), c.y + r * (base + a).sin()),
                        1.5 * std::f64::consts::PI + a,
                    )
                }
                6 => (Vec2::new(-(h - r) + rem, -h), 2.0 * std::f64::consts::PI),
                7 => {
                    let a = rem / r;
                    let c = Vec2::new(hs, -(h - r));
                    let base = 1.5 * std::f64::consts::PI;
                    (
                        Vec2::new(c.x + r * (base + a).cos(), c.y + r * (base + a).sin()),
                        2.0 * std::f64::consts::PI + a,
                    )
                }
                _ => (Vec2::new(h, -hs + rem), 2.5 * std::f64::consts::PI),
            };
        }
        (Vec2::new(h, 0.0), std::f64::consts::FRAC_PI_2)
    };

    let mut waypoints = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = total * k as Real / n as Real;
        let (p, yaw_in_lap) = point_at(s);
        let lap = (s / lap_len).floor();
        let yaw = yaw_in_lap + lap * 2.0 * std::f64::consts::PI
            - std::f64::consts::FRAC_PI_2
            + std::f64::consts::FRAC_PI_2;
        let pose = Pose::new(
            Rotation::from_scaled_axis(Vec3::new(0.0, 0.0, yaw)),
            Vec3::new(p.x, p.y, 0.0),
        );
        waypoints.push((pose, s / speed));
    }
    TrajectorySpec { waypoints, imu_rate, cam_rate }.compile()
}

/// One point-track record in the measurement stream.
#[derive(Debug, Clone, Copy)]
pub struct PointRecord {
    pub feature_id: u64,
    pub obs: PointObservation,
}

/// One plane-observation record in the measurement stream.
#[derive(Debug, Clone)]
pub struct PlaneRecord {
    pub obs: PlaneObservation,
}

/// Stream-level metadata the consumer needs to configure the filter.
#[derive(Debug, Clone)]
pub struct StreamMeta {
    pub imu_rate: Real,
    pub cam_rate: Real,
    pub gravity: Vec3,
    pub sigma_g: Real,
    pub sigma_a: Real,
    pub sigma_bg: Real,
    pub sigma_ba: Real,
    pub intrinsics: [Real; 4],
    pub width: u32,
    pub height: u32,
    pub rot_imu_to_cam: Rotation,
    pub p_imu_in_cam: Vec3,
    pub depth_min: Real,
    pub depth_max: Real,
    pub sigma_px: Real,
    pub sigma_depth: Real,
    pub n_gt_patches: usize,
    pub seed: u64,
}

/// A complete synthetic measurement stream.
#[derive(Debug, Clone)]
pub struct MeasurementStream {
    pub meta: StreamMeta,
    pub imu: Vec<ImuSample>,
    /// (frame id, timestamp), strictly increasing.
    pub frames: Vec<(u64, Real)>,
    pub points: Vec<(u64, PointRecord)>,
    pub planes: Vec<(u64, PlaneRecord)>,
    /// Ground-truth IMU poses at frame times.
    pub truth: Vec<(Real, Pose)>,
}

fn segment_hits_patch(a: &Vec3, b: &Vec3, patch: &PlanePatch) -> bool {
    let n = patch.plane.normal();
    let d = patch.plane.distance();
    let sa = n.dot(a) - d;
    let sb = n.dot(b) - d;
    if sa * sb >= 0.0 {
        return false;
    }
    let t = sa / (sa - sb);
    if t <= 1e-4 || t >= 1.0 - 1e-4 {
        return false;
    }
    let hit = a + (b - a) * t;
    let rel = hit - patch.plane.cp();
    let uv = Vec2::new(patch.basis.0.dot(&rel), patch.basis.1.dot(&rel));
    patch.hull.contains(&uv, 1e-9)
}

fn occluded(cam: &Vec3, target: &Vec3, patches: &[PlanePatch]) -> bool {
    patches.iter().any(|p| segment_hits_patch(cam, target, p))
}

struct PatchGrid {
    /// World-frame sample points per patch.
    samples: Vec<Vec<Vec3>>,
}

fn build_grids(scene: &SceneSpec) -> PatchGrid {
    let mut samples = Vec::with_capacity(scene.patches.len());
    for patch in &scene.patches {
        let verts = patch.hull.vertices();
        let (min, max) = bbox(verts);
        let spacing = ((patch.area / 320.0).sqrt()).max(0.09);
        let origin = patch.plane.cp();
        let mut pts = Vec::new();
        let nx = ((max.x - min.x) / spacing).ceil() as usize;
        let ny = ((max.y - min.y) / spacing).ceil() as usize;
        for i in 0..=nx {
            for j in 0..=ny {
                let uv = Vec2::new(
                    min.x + spacing * i as Real + 0.5 * spacing,
                    min.y + spacing * j as Real + 0.5 * spacing,
                );
                if uv.x > max.x || uv.y > max.y || !patch.hull.contains(&uv, 0.0) {
                    continue;
                }
                pts.push(origin + patch.basis.0 * uv.x + patch.basis.1 * uv.y);
            }
        }
        samples.push(pts);
    }
    PatchGrid { samples }
}

/// Synthesize the full measurement stream for a scenario.
pub fn synthesize_measurements(
    scene: &SceneSpec,
    trajectory: &Trajectory,
    rig: &SensorRig,
    plane_cfg: &PlaneConfig,
    seed: u64,
) -> Result<MeasurementStream> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let normal = Normal::new(0.0, 1.0).map_err(|_| Error::ScenarioInvalid("noise".into()))?;
    let g = rig.imu_noise.gravity;
    let t0 = trajectory.t_start;
    let duration = trajectory.duration();

    // Trajectory must stay clear of every patch.
    let n_checks = (duration * trajectory.cam_rate) as usize;
    for k in 0..=n_checks {
        let t = t0 + duration * k as Real / n_checks.max(1) as Real;
        let p = trajectory.position(t);
        for patch in &scene.patches {
            let s = patch.plane.signed_distance(&p);
            if s.abs() < 0.1 {
                let rel = patch.plane.project(&p) - patch.plane.cp();
                let uv = Vec2::new(patch.basis.0.dot(&rel), patch.basis.1.dot(&rel));
                if patch.hull.contains(&uv, 0.0) {
                    return Err(Error::ScenarioInvalid(format!(
                        "trajectory touches patch {} at t={t:.2}",
                        patch.id
                    )));
                }
            }
        }
    }

    // IMU stream with bias random walk and white noise.
    let dt = 1.0 / trajectory.imu_rate;
    let n_imu = (duration * trajectory.imu_rate).round() as usize;
    let mut imu = Vec::with_capacity(n_imu + 1);
    let mut bias_g = Vec3::zeros();
    let mut bias_a = Vec3::zeros();
    let nz = |rng: &mut ChaCha12Rng, normal: &Normal<Real>| {
        Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
    };
    for k in 0..=n_imu {
        let t = t0 + k as Real * dt;
        let r_gtoi = trajectory.rotation(t).inverse();
        let w_true = trajectory.angular_velocity_body(t);
        let a_true = r_gtoi.rotate(&(trajectory.acceleration(t) - g));
        let w_noise = nz(&mut rng, &normal) * (rig.imu_noise.sigma_g / dt.sqrt());
        let a_noise = nz(&mut rng, &normal) * (rig.imu_noise.sigma_a / dt.sqrt());
        imu.push(ImuSample {
            time: t,
            gyro: w_true + bias_g + w_noise,
            accel: a_true + bias_a + a_noise,
        });
        bias_g += nz(&mut rng, &normal) * (rig.imu_noise.sigma_bg * dt.sqrt());
        bias_a += nz(&mut rng, &normal) * (rig.imu_noise.sigma_ba * dt.sqrt());
    }

    let grids = build_grids(scene);
    let [fx, fy, cx, cy] = rig.intrinsics;
    let (w_px, h_px) = (rig.width as Real, rig.height as Real);

    let mut frames = Vec::new();
    let mut points = Vec::new();
    let mut planes = Vec::new();
    let mut truth = Vec::new();

    let n_frames = ((duration - 1.5 * dt) * trajectory.cam_rate).floor() as u64;
    for f in 0..=n_frames {
        let t = t0 + f as Real / trajectory.cam_rate;
        let true_pose = trajectory.pose(t);
        truth.push((t, true_pose));
        frames.push((f, t));

        // Apply the latest active measurement drift injection, if any.
        let mut meas_pose = true_pose;
        for inj in &rig.drift_injections {
            if f >= inj.frame {
                let pert = Pose::new(Rotation::from_scaled_axis(inj.rotation), inj.translation);
                meas_pose = pert.compose(&true_pose);
            }
        }
        let cam = rig.camera_pose(&meas_pose);
        let cam_inv = cam.inverse();

        // Point observations.
        for (fid, p) in scene.points.iter().enumerate() {
            let pc = cam_inv.transform_point(p);
            if pc.z < rig.depth_min || pc.z > rig.depth_max {
                continue;
            }
            let u = fx * pc.x / pc.z + cx;
            let v = fy * pc.y / pc.z + cy;
            if u < 1.0 || u >= w_px - 1.0 || v < 1.0 || v >= h_px - 1.0 {
                continue;
            }
            if occluded(&cam.pos, p, &scene.patches) {
                continue;
            }
            let u_n = u + normal.sample(&mut rng) * rig.sigma_px;
            let v_n = v + normal.sample(&mut rng) * rig.sigma_px;
            let has_depth = rng.gen_bool(rig.depth_availability.clamp(0.0, 1.0));
            let depth_noise = normal.sample(&mut rng) * rig.sigma_depth;
            let bearing = Vec3::new((u_n - cx) / fx, (v_n - cy) / fy, 1.0).normalize();
            points.push((
                f,
                PointRecord {
                    feature_id: fid as u64,
                    obs: PointObservation {
                        frame: f,
                        bearing,
                        pixel: Vec2::new(u_n, v_n),
                        depth: if has_depth { Some(pc.z + depth_noise) } else { None },
                    },
                },
            ));
        }

        // Plane observations: visible grid samples, ray-noise, real RANSAC.
        for (pid, patch) in scene.patches.iter().enumerate() {
            let mut cam_samples = Vec::new();
            for p in &grids.samples[pid] {
                let pc = cam_inv.transform_point(p);
                if pc.z < rig.depth_min || pc.z > rig.depth_max {
                    continue;
                }
                let u = fx * pc.x / pc.z + cx;
                let v = fy * pc.y / pc.z + cy;
                if u < 1.0 || u >= w_px - 1.0 || v < 1.0 || v >= h_px - 1.0 {
                    continue;
                }
                if occluded(&cam.pos, p, &scene.patches) {
                    continue;
                }
                let ray = pc / pc.norm();
                cam_samples.push(pc + ray * (normal.sample(&mut rng) * rig.sigma_depth));
            }
            if cam_samples.len() < plane_cfg.min_inliers {
                continue;
            }
            let sigma = rig.sigma_depth.max(1e-4);
            let Ok(mut obs) = fit_plane_ransac(&cam_samples, plane_cfg, sigma, &mut rng) else {
                continue;
            };
            obs.frame = f;
            if obs.inliers.len() > 64 {
                let stride = obs.inliers.len().div_ceil(64);
                obs.inliers = obs.inliers.iter().step_by(stride).copied().collect();
            }
            planes.push((f, PlaneRecord { obs }));
        }
    }

    Ok(MeasurementStream {
        meta: StreamMeta {
            imu_rate: trajectory.imu_rate,
            cam_rate: trajectory.cam_rate,
            gravity: g,
            sigma_g: rig.imu_noise.sigma_g,
            sigma_a: rig.imu_noise.sigma_a,
            sigma_bg: rig.imu_noise.sigma_bg,
            sigma_ba: rig.imu_noise.sigma_ba,
            intrinsics: rig.intrinsics,
            width: rig.width,
            height: rig.height,
            rot_imu_to_cam: rig.rot_imu_to_cam,
            p_imu_in_cam: rig.p_imu_in_cam,
            depth_min: rig.depth_min,
            depth_max: rig.depth_max,
            sigma_px: rig.sigma_px,
            sigma_depth: rig.sigma_depth,
            n_gt_patches: scene.patches.len(),
            seed,
        },
        imu,
        frames,
        points,
        planes,
        truth,
    })
}
