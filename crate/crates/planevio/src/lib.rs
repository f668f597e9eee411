//! Plane-aided RGB-D visual-inertial odometry.
//!
//! An error-state EKF fuses IMU propagation with depth-aided point features
//! and closest-point plane landmarks. On top of the filter, a graph-based
//! detector searches the plane map for duplicated structures caused by
//! accumulated drift and corrects them through a de-drift update. A synthetic
//! measurement simulator and an ATE evaluation harness make the whole stack
//! testable without real sensor data.

pub mod config;
pub mod driftgraph;
pub mod error;
pub mod geometry;
pub mod planes;
pub mod points;
pub mod propagation;
pub mod sim;
pub mod state;

pub use error::{Error, Result};

/// Scalar type used throughout the crate.
pub type Real = f64;
/// 2D vector.
pub type Vec2 = nalgebra::Vector2<Real>;
/// 3D vector.
pub type Vec3 = nalgebra::Vector3<Real>;
/// 3x3 matrix.
pub type Mat3 = nalgebra::Matrix3<Real>;
/// Dynamically sized vector.
pub type VecD = nalgebra::DVector<Real>;
/// Dynamically sized matrix.
pub type MatD = nalgebra::DMatrix<Real>;
