//! Run configuration: every numeric tunable, grouped by subsystem.
//!
//! Configs serialize to flat `key = value` TOML grouped by module-named
//! sections, so a default file documents every knob.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Pipeline mode: the two ablations drop plane landmarks entirely or keep
/// planes but skip the graph-based drift suppression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Full,
    NoPlanes,
    NoGraph,
}

impl std::str::FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(RunMode::Full),
            "no-planes" => Ok(RunMode::NoPlanes),
            "no-graph" => Ok(RunMode::NoGraph),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunMode::Full => "full",
            RunMode::NoPlanes => "no-planes",
            RunMode::NoGraph => "no-graph",
        };
        f.write_str(s)
    }
}

/// Filter state housekeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StateConfig {
    /// Sliding-window size (number of pose clones kept).
    pub max_clones: usize,
    /// Planes at least this large may become permanent landmarks, m^2.
    pub area_permanent: Real,
    /// ... when additionally tracked at least this often.
    pub tracks_permanent: u32,
    /// Frames a plane may stay unseen before delayed marginalization.
    pub marginalize_delay_frames: u32,
    /// Angle gate for merging near-identical plane landmarks, radians.
    pub merge_angle: Real,
    /// Distance gate for merging near-identical plane landmarks, m.
    pub merge_dist: Real,
    /// Estimate camera-IMU extrinsics and intrinsics online.
    pub online_calib: bool,
}

impl Default for StateConfig {
    fn default() -> Self {
        StateConfig {
            max_clones: 11,
            area_permanent: 1.0,
            tracks_permanent: 20,
            marginalize_delay_frames: 200,
            merge_angle: 5.0_f64.to_radians(),
            merge_dist: 0.05,
            online_calib: false,
        }
    }
}

/// Point feature handling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PointConfig {
    /// Consecutive track length that promotes a feature to a SLAM landmark.
    pub slam_promote_len: usize,
    /// Cap on SLAM point landmarks in the state.
    pub max_slam_points: usize,
    /// Pixel measurement noise, isotropic, px.
    pub sigma_px: Real,
    /// Condition-number bound on the triangulation normal equations.
    pub max_condition: Real,
    /// Minimum camera-frame depth for a usable observation, m.
    pub min_depth: Real,
    /// Per-row noise scale used for the initial SLAM landmark covariance, m.
    pub sigma_triangulation: Real,
    /// Inflation applied to the initial SLAM landmark covariance.
    pub init_inflation: Real,
    /// Chi-square gate confidence for point updates.
    pub chi2_confidence: Real,
    /// Consecutive gated updates after which a SLAM landmark is dropped.
    pub max_gated_updates: u32,
}

impl Default for PointConfig {
    fn default() -> Self {
        PointConfig {
            slam_promote_len: 15,
            max_slam_points: 50,
            sigma_px: 1.0,
            max_condition: 1e8,
            min_depth: 0.05,
            sigma_triangulation: 0.05,
            init_inflation: 10.0,
            chi2_confidence: 0.95,
            max_gated_updates: 5,
        }
    }
}

/// Plane feature handling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaneConfig {
    /// Minimum inlier count for a usable plane fit.
    pub min_inliers: usize,
    /// Point-to-plane inlier tolerance for RANSAC, m.
    pub inlier_tol: Real,
    /// RANSAC hypothesis count.
    pub ransac_iters: usize,
    /// Minimum lateral spread of the inlier set, m.
    pub min_lateral_extent: Real,
    /// Observations required before a plane landmark is inserted.
    pub min_obs_init: u32,
    /// Association gates: normal angle (radians) and CP-distance (m).
    pub assoc_angle: Real,
    pub assoc_dist: Real,
    /// Floor on each axis of the fitted CP covariance, m.
    pub sigma_cp_floor: Real,
    /// Inflation applied to the initial plane landmark covariance.
    pub init_inflation: Real,
    /// Chi-square gate confidence for plane updates.
    pub chi2_confidence: Real,
    /// Frames a pending (not yet inserted) plane survives unseen.
    pub pending_ttl_frames: u32,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        PlaneConfig {
            min_inliers: 50,
            inlier_tol: 0.02,
            ransac_iters: 25,
            min_lateral_extent: 0.03,
            min_obs_init: 3,
            assoc_angle: 10.0_f64.to_radians(),
            assoc_dist: 0.1,
            sigma_cp_floor: 0.005,
            init_inflation: 5.0,
            chi2_confidence: 0.95,
            pending_ttl_frames: 10,
        }
    }
}

/// Graph-based drift detection thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    /// Score kernel widths: angle (radians) and distance (m).
    pub sigma_theta: Real,
    pub sigma_d: Real,
    /// Weak unary gates: angle (radians), distance (m), in-plane gap (m).
    pub delta_theta: Real,
    pub delta_d: Real,
    pub delta_o: Real,
    /// Ground-footprint IoU acceptance threshold.
    pub delta_o_iou: Real,
    /// Strict binary gates: angle (radians), distance (m), overlap (m^2 / m).
    pub delta_theta_strict: Real,
    pub delta_d_strict: Real,
    pub delta_o_strict: Real,
    /// Frames a plane counts as currently active (local map window).
    pub active_window: u32,
    /// Minimum number of active planes to attempt detection.
    pub min_local_planes: usize,
    /// Minimum surviving matches to declare drift.
    pub min_matches: usize,
    /// De-drift residual noise, m per CP axis.
    pub sigma_dedrift: Real,
    /// Chi-square confidence for gating individual de-drift pairs.
    pub dedrift_chi2_confidence: Real,
    /// Run detection every this many camera frames.
    pub cadence_frames: u32,
    /// Power-iteration count for the spectral relaxation.
    pub power_iters: usize,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            sigma_theta: 15.0_f64.to_radians(),
            sigma_d: 0.5,
            delta_theta: 20.0_f64.to_radians(),
            delta_d: 0.5,
            delta_o: 1.0,
            delta_o_iou: 0.3,
            delta_theta_strict: 5.0_f64.to_radians(),
            delta_d_strict: 0.15,
            delta_o_strict: 0.3,
            active_window: 10,
            min_local_planes: 3,
            min_matches: 3,
            sigma_dedrift: 0.01,
            dedrift_chi2_confidence: 0.999,
            cadence_frames: 10,
            power_iters: 200,
        }
    }
}

/// Propagation safety limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    /// Largest tolerated hole in the IMU stream, s.
    pub max_gap: Real,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig { max_gap: 0.1 }
    }
}

/// Evaluation harness settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    /// Alignment window; the effective value is min(align_n, frames / 4).
    pub align_n: usize,
    /// Timestamp association tolerance, s.
    pub assoc_tol: Real,
    /// Covariance trace beyond which the filter is declared divergent.
    pub divergence_trace: Real,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig { align_n: 500, assoc_tol: 0.01, divergence_trace: 1e6 }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub run: RunSection,
    pub state: StateConfig,
    pub propagation: PropagationConfig,
    pub points: PointConfig,
    pub planes: PlaneConfig,
    pub driftgraph: DriftConfig,
    pub harness: HarnessConfig,
}

/// Top-level run switches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub mode: RunMode,
    pub seed: u64,
    /// Optional filter-state drift injections: at `frame`, add the given
    /// world-frame pose error to the IMU position/orientation and all clones.
    /// Emulates accumulated estimation drift against clean measurements.
    pub drift_injections: Vec<StateDriftInjection>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { mode: RunMode::Full, seed: 0, drift_injections: Vec::new() }
    }
}

/// A world-frame SE(3) error applied to the estimator state at a frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StateDriftInjection {
    pub frame: u64,
    pub translation: [Real; 3],
    /// Rotation vector, radians.
    #[serde(default)]
    pub rotation: [Real; 3],
}

impl RunConfig {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
