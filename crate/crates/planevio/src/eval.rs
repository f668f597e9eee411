//! Trajectory evaluation: timestamp association, first-N rigid alignment,
//! and ATE RMSE.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation};
use crate::{Real, Vec3};

/// A timestamped pose sequence.
pub type PoseTrajectory = Vec<(Real, Pose)>;

/// Associate two trajectories by nearest timestamp within `tol` seconds.
/// Returns index pairs (estimate, truth), ordered by time.
pub fn associate(est: &[(Real, Pose)], truth: &[(Real, Pose)], tol: Real) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut j0 = 0usize;
    for (i, (te, _)) in est.iter().enumerate() {
        while j0 + 1 < truth.len() && truth[j0 + 1].0 <= *te {
            j0 += 1;
        }
        let mut best = j0;
        if j0 + 1 < truth.len() && (truth[j0 + 1].0 - te).abs() < (truth[j0].0 - te).abs() {
            best = j0 + 1;
        }
        if (truth[best].0 - te).abs() <= tol {
            pairs.push((i, best));
        }
    }
    pairs
}

/// Closed-form least-squares SE(3) fit (no scale) over the first `n`
/// associated pairs, applied to the whole estimate.
pub fn align_first_n(
    est: &[(Real, Pose)],
    truth: &[(Real, Pose)],
    n: usize,
    tol: Real,
) -> Result<PoseTrajectory> {
    let pairs = associate(est, truth, tol);
    if pairs.len() < n || n < 2 {
        return Err(Error::EvalError(format!(
            "need {n} associated poses for alignment, have {}",
            pairs.len()
        )));
    }
    let head = &pairs[..n];
    let ce: Vec3 = head.iter().map(|(i, _)| est[*i].1.pos).sum::<Vec3>() / n as Real;
    let ct: Vec3 = head.iter().map(|(_, j)| truth[*j].1.pos).sum::<Vec3>() / n as Real;
    let mut m = Matrix3::<Real>::zeros();
    for (i, j) in head {
        let p = est[*i].1.pos - ce;
        let q = truth[*j].1.pos - ct;
        m += p * q.transpose();
    }
    let svd = nalgebra::SVD::new(m, true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let d = (vt.transpose() * u.transpose()).determinant();
    let fix = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d.signum()));
    let r = vt.transpose() * fix * u.transpose();
    let rot = Rotation::from_matrix(&r);
    let t = ct - rot.rotate(&ce);
    let align = Pose::new(rot, t);
    Ok(est.iter().map(|(time, pose)| (*time, align.compose(pose))).collect())
}

/// Root-mean-square position error over the associated pairs.
pub fn ate_rmse(aligned: &[(Real, Pose)], truth: &[(Real, Pose)], tol: Real) -> Result<Real> {
    let pairs = associate(aligned, truth, tol);
    if pairs.is_empty() {
        return Err(Error::EvalError("no associated poses".into()));
    }
    let sum: Real = pairs
        .iter()
        .map(|(i, j)| (aligned[*i].1.pos - truth[*j].1.pos).norm_squared())
        .sum();
    Ok((sum / pairs.len() as Real).sqrt())
}

/// Per-axis RMSE over the associated pairs.
pub fn per_axis_rmse(aligned: &[(Real, Pose)], truth: &[(Real, Pose)], tol: Real) -> [Real; 3] {
    let pairs = associate(aligned, truth, tol);
    let mut acc = [0.0; 3];
    for (i, j) in &pairs {
        let d = aligned[*i].1.pos - truth[*j].1.pos;
        acc[0] += d.x * d.x;
        acc[1] += d.y * d.y;
        acc[2] += d.z * d.z;
    }
    let n = pairs.len().max(1) as Real;
    [(acc[0] / n).sqrt(), (acc[1] / n).sqrt(), (acc[2] / n).sqrt()]
}

/// Position error of the last associated pose.
pub fn final_drift(aligned: &[(Real, Pose)], truth: &[(Real, Pose)], tol: Real) -> Result<Real> {
    let pairs = associate(aligned, truth, tol);
    let (i, j) = pairs.last().ok_or_else(|| Error::EvalError("no associated poses".into()))?;
    Ok((aligned[*i].1.pos - truth[*j].1.pos).norm())
}

/// Full evaluation report.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub ate_rmse_m: Real,
    pub per_axis_rmse_m: [Real; 3],
    pub final_drift_m: Real,
    pub drift_events: usize,
    pub runtime_s: Real,
    pub aligned_poses: usize,
    pub align_n: usize,
}

/// Align on the first `min(align_n, len/4)` pairs and evaluate. Drift event
/// count and runtime are filled by the caller.
pub fn evaluate(
    est: &[(Real, Pose)],
    truth: &[(Real, Pose)],
    align_n: usize,
    tol: Real,
) -> Result<(EvalReport, PoseTrajectory)> {
    let pairs = associate(est, truth, tol);
    let n = align_n.min(pairs.len() / 4).max(2);
    let aligned = align_first_n(est, truth, n, tol)?;
    let report = EvalReport {
        ate_rmse_m: ate_rmse(&aligned, truth, tol)?,
        per_axis_rmse_m: per_axis_rmse(&aligned, truth, tol),
        final_drift_m: final_drift(&aligned, truth, tol)?,
        drift_events: 0,
        runtime_s: 0.0,
        aligned_poses: pairs.len(),
        align_n: n,
    };
    Ok((report, aligned))
}
