//! Rotations, rigid poses and SO(3) helpers.
//!
//! Quaternions are Hamilton convention. Error-state conventions used by the
//! filter live here so every Jacobian in the crate agrees with the same
//! injection: for a body-to-world rotation `R`, the attitude error `dtheta`
//! enters as `R = R_hat * Exp(dtheta)`.

use nalgebra::{Quaternion, UnitQuaternion};

use crate::{Mat3, Real, Vec3};

/// Skew-symmetric (cross-product) matrix of `v`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// SO(3) exponential map.
pub fn so3_exp(omega: &Vec3) -> Mat3 {
    let theta = omega.norm();
    if theta < 1e-12 {
        return Mat3::identity() + skew(omega);
    }
    let k = skew(&(omega / theta));
    Mat3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// SO(3) logarithm of a rotation matrix, as a rotation vector.
pub fn so3_log(rot: &Mat3) -> Vec3 {
    let q = UnitQuaternion::from_matrix(rot);
    q.scaled_axis()
}

/// Right Jacobian of SO(3): `Exp(v + d) ~= Exp(v) Exp(Jr(v) d)`.
pub fn so3_right_jacobian(v: &Vec3) -> Mat3 {
    let theta = v.norm();
    let k = skew(v);
    if theta < 1e-6 {
        return Mat3::identity() - 0.5 * k + (1.0 / 6.0) * k * k;
    }
    let t2 = theta * theta;
    Mat3::identity() - ((1.0 - theta.cos()) / t2) * k + ((theta - theta.sin()) / (t2 * theta)) * k * k
}

/// A rotation stored as a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<Real>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    pub fn from_quaternion(w: Real, x: Real, y: Real, z: Real) -> Self {
        Rotation(UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)))
    }

    /// Exponential of a rotation vector.
    pub fn from_scaled_axis(v: Vec3) -> Self {
        Rotation(UnitQuaternion::from_scaled_axis(v))
    }

    pub fn from_matrix(m: &Mat3) -> Self {
        Rotation(UnitQuaternion::from_matrix(m))
    }

    /// Rotation taking unit vector `a` onto unit vector `b` (shortest arc).
    pub fn between(a: &Vec3, b: &Vec3) -> Self {
        Rotation(UnitQuaternion::rotation_between(a, b).unwrap_or_else(UnitQuaternion::identity))
    }

    pub fn matrix(&self) -> Mat3 {
        *self.0.to_rotation_matrix().matrix()
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.inverse())
    }

    /// Composition: `(a * b).rotate(v) = a.rotate(b.rotate(v))`.
    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotation vector of `self`.
    pub fn log(&self) -> Vec3 {
        self.0.scaled_axis()
    }

    /// Right-multiplicative perturbation: `self * Exp(dtheta)`.
    pub fn perturb(&self, dtheta: &Vec3) -> Self {
        Rotation(self.0 * UnitQuaternion::from_scaled_axis(*dtheta))
    }

    /// Quaternion components as (x, y, z, w).
    pub fn quat_xyzw(&self) -> [Real; 4] {
        let q = self.0.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    /// Re-normalize the quaternion; integration drift stays below 1e-12 per
    /// step this way.
    pub fn renormalize(&mut self) {
        self.0.renormalize();
    }

    /// Angle of the relative rotation to `other`, radians.
    pub fn angle_to(&self, other: &Rotation) -> Real {
        self.0.angle_to(&other.0)
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

/// Rigid pose of a frame expressed in its parent frame.
///
/// `rot` maps local coordinates into the parent frame and `pos` is the local
/// origin in the parent frame, so `transform_point(x) = rot * x + pos`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rot: Rotation,
    pub pos: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose { rot: Rotation::identity(), pos: Vec3::zeros() }
    }

    pub fn new(rot: Rotation, pos: Vec3) -> Self {
        Pose { rot, pos }
    }

    pub fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.rot.rotate(x) + self.pos
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rot.rotate(v)
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rot.inverse();
        Pose { rot: inv_rot, pos: -inv_rot.rotate(&self.pos) }
    }

    /// Composition: `(a * b).transform_point(x) = a.transform_point(b.transform_point(x))`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rot: self.rot.compose(&other.rot),
            pos: self.rot.rotate(&other.pos) + self.pos,
        }
    }
}

impl std::ops::Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}
