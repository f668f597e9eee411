//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the filter, the geometry kernels, the simulator and the
/// evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Plane too close to the origin for the closest-point parameterization.
    #[error("degenerate plane: distance {0} below the CP representability floor")]
    DegeneratePlane(f64),
    /// Convex hull construction failed (collinear or too few points).
    #[error("degenerate hull: {0}")]
    DegenerateHull(&'static str),
    /// EKF innovation matrix could not be inverted.
    #[error("update rejected: innovation matrix not invertible")]
    UpdateRejected,
    /// Triangulation normal equations are numerically rank deficient.
    #[error("triangulation ill-conditioned: condition number {0:.3e}")]
    TriangulationIllConditioned(f64),
    /// Observation unusable for a residual (e.g. point behind the camera).
    #[error("observation invalid: {0}")]
    ObservationInvalid(&'static str),
    /// Hole in the IMU stream larger than the allowed gap.
    #[error("propagation gap of {0:.4} s in the IMU stream")]
    PropagationGap(f64),
    /// RANSAC could not find an acceptable inlier set.
    #[error("plane fit failed: inlier ratio {0:.3} below 0.5")]
    FitFailed(f64),
    /// Inlier spread is too thin to define a plane.
    #[error("plane fit degenerate: {0}")]
    FitDegenerate(&'static str),
    /// Unary check produced an all-zero constraint matrix.
    #[error("no candidate matches after the unary check")]
    NoCandidates,
    /// Fewer active planes than the drift detector needs.
    #[error("insufficient local planes: {0} active, need at least {1}")]
    InsufficientLocalPlanes(usize, usize),
    /// Exhaustive matching oracle asked to enumerate too large a problem.
    #[error("matching oracle too large: {0}x{1} exceeds the enumeration bound")]
    OracleTooLarge(usize, usize),
    /// Simulator scenario is not physically realizable.
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),
    /// Trajectory evaluation could not associate enough poses.
    #[error("evaluation error: {0}")]
    EvalError(String),
    /// Filter diverged (covariance blow-up).
    #[error("filter diverged: {0}")]
    Diverged(String),
    /// Malformed input file or record.
    #[error("parse error: {0}")]
    Parse(String),
    /// Configuration file problem.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
