//! Closest-point plane parameterization.
//!
//! A plane is stored as the vector from the origin to its closest point,
//! `cp = n * d` with unit normal `n` and distance `d > 0`. Planes through the
//! origin are unrepresentable; `EPS_CP` is the representability floor.


use crate::error::{Error, Result};
use crate::geometry::rotation::Pose;
use crate::{Real, Vec3};

/// Minimum origin distance for a representable plane, meters.
pub const EPS_CP: Real = 1e-6;

/// A plane in closest-point form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneCP {
    cp: Vec3,
}

impl PlaneCP {
    /// Build from a unit normal and a positive distance.
    pub fn from_normal_distance(n: &Vec3, d: Real) -> Result<Self> {
        if d <= EPS_CP {
            return Err(Error::DegeneratePlane(d));
        }
        Ok(PlaneCP { cp: n * d })
    }

    /// Build directly from a closest-point vector.
    pub fn from_cp(cp: Vec3) -> Result<Self> {
        if cp.norm() <= EPS_CP {
            return Err(Error::DegeneratePlane(cp.norm()));
        }
        Ok(PlaneCP { cp })
    }

    pub fn cp(&self) -> Vec3 {
        self.cp
    }

    /// Unit normal, `cp / ||cp||`.
    pub fn normal(&self) -> Vec3 {
        self.cp / self.cp.norm()
    }

    /// Distance from the origin, `||cp||`.
    pub fn distance(&self) -> Real {
        self.cp.norm()
    }

    /// Signed distance of a point to the plane (positive on the far side of
    /// the normal).
    pub fn signed_distance(&self, p: &Vec3) -> Real {
        self.normal().dot(p) - self.distance()
    }

    /// Project a point onto the plane.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        p - self.signed_distance(p) * self.normal()
    }
}

/// Express a world-frame plane in the camera frame given the camera pose in
/// the world: `n_C = R_{G->C} n`, `d_C = d - p_C . n`.
///
/// Fails when the camera lies on (or beyond) the plane, where the CP form
/// degenerates.
pub fn transform_plane(camera_pose: &Pose, plane: &PlaneCP) -> Result<PlaneCP> {
    let n = plane.normal();
    let d_cam = plane.distance() - camera_pose.pos.dot(&n);
    if d_cam <= EPS_CP {
        return Err(Error::DegeneratePlane(d_cam));
    }
    let n_cam = camera_pose.rot.inverse().rotate(&n);
    Ok(PlaneCP { cp: n_cam * d_cam })
}

/// Express a camera-frame plane in the world frame (inverse of
/// [`transform_plane`]).
pub fn plane_to_world(camera_pose: &Pose, plane_cam: &PlaneCP) -> Result<PlaneCP> {
    let n = camera_pose.rot.rotate(&plane_cam.normal());
    let d = plane_cam.distance() + camera_pose.pos.dot(&n);
    if d.abs() <= EPS_CP {
        return Err(Error::DegeneratePlane(d));
    }
    // Keep d positive so the CP form stays valid.
    if d > 0.0 {
        Ok(PlaneCP { cp: n * d })
    } else {
        Ok(PlaneCP { cp: -n * -d })
    }
}

/// Deterministic orthonormal completion of a unit vector to a right-handed
/// triad; returns the two vectors spanning the orthogonal plane.
///
/// Householder-based, well conditioned for every input direction.
pub fn orthonormal_basis(n: &Vec3) -> (Vec3, Vec3) {
    // Householder vector mapping e_k (largest axis of n) onto n.
    let sign = if n.z >= 0.0 { 1.0 } else { -1.0 };
    // Stable branch-free construction (Duff et al. style).
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let u = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let v = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation::Rotation;
    use approx::assert_relative_eq;

    #[test]
    fn cp_roundtrip_direct() {
        let p = PlaneCP::from_normal_distance(&Vec3::new(0.0, 0.0, 1.0), 2.0).unwrap();
        assert_relative_eq!(p.cp(), Vec3::new(0.0, 0.0, 2.0), epsilon = 1e-15);
        assert_relative_eq!(p.normal(), Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(p.distance(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn cp_rejects_near_origin_plane() {
        let r = PlaneCP::from_normal_distance(&Vec3::new(1.0, 0.0, 0.0), 1e-12);
        assert!(matches!(r, Err(Error::DegeneratePlane(_))));
    }

    #[test]
    fn transform_identity_pose() {
        let p = PlaneCP::from_cp(Vec3::new(0.0, 0.0, 2.0)).unwrap();
        let out = transform_plane(&Pose::identity(), &p).unwrap();
        assert_relative_eq!(out.cp(), p.cp(), epsilon = 1e-15);
    }

    #[test]
    fn transform_translated_camera() {
        let p = PlaneCP::from_cp(Vec3::new(0.0, 0.0, 2.0)).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(0.0, 0.0, 1.0));
        let out = transform_plane(&pose, &p).unwrap();
        assert_relative_eq!(out.cp(), Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn transform_camera_on_plane_degenerates() {
        let p = PlaneCP::from_cp(Vec3::new(0.0, 0.0, 2.0)).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(0.0, 0.0, 2.0));
        assert!(matches!(transform_plane(&pose, &p), Err(Error::DegeneratePlane(_))));
    }

    #[test]
    fn transform_composes_over_frame_chains() {
        let plane = PlaneCP::from_cp(Vec3::new(0.3, -0.4, 1.8)).unwrap();
        let p1 = Pose::new(
            Rotation::from_scaled_axis(Vec3::new(0.1, 0.2, -0.3)),
            Vec3::new(0.2, 0.1, -0.4),
        );
        let p2 = Pose::new(
            Rotation::from_scaled_axis(Vec3::new(-0.2, 0.05, 0.4)),
            Vec3::new(-0.1, 0.3, 0.2),
        );
        // Transforming by p1*p2 in one go must match chaining through the
        // intermediate frame.
        let direct = transform_plane(&(p1 * p2), &plane).unwrap();
        let mid = transform_plane(&p1, &plane).unwrap();
        let chained = transform_plane(&p2, &mid).unwrap();
        // Chaining: camera pose of frame2 in frame1 is p2, and `mid` is the
        // plane in frame1, so the chained result is the plane in frame2.
        assert_relative_eq!(direct.cp(), chained.cp(), epsilon = 1e-9);
    }

    #[test]
    fn world_roundtrip() {
        let plane = PlaneCP::from_cp(Vec3::new(0.5, 1.0, 2.0)).unwrap();
        let pose = Pose::new(
            Rotation::from_scaled_axis(Vec3::new(0.3, -0.1, 0.2)),
            Vec3::new(0.4, -0.2, 0.1),
        );
        let cam = transform_plane(&pose, &plane).unwrap();
        let back = plane_to_world(&pose, &cam).unwrap();
        assert_relative_eq!(back.cp(), plane.cp(), epsilon = 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.6, -0.48, 0.64),
        ] {
            let n = n.normalize();
            let (u, v) = orthonormal_basis(&n);
            assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(u.dot(&v), 0.0, epsilon = 1e-12);
            assert_relative_eq!(u.dot(&n), 0.0, epsilon = 1e-12);
            assert_relative_eq!(v.dot(&n), 0.0, epsilon = 1e-12);
        }
    }
}
