//! Graph-based drift detection and the de-drift update.
//!
//! Recently observed planes form the local graph, the remaining map planes
//! the global graph; both are fully connected with directed relation edges.
//! Candidate matches pass a weak unary check, graph matching proposes an
//! assignment, and two verification stages (ground-footprint overlap and
//! strict pairwise consistency) reject false hypotheses before the matched
//! duplicates are aligned through an EKF equality update.

mod matching;

pub use matching::{
    brute_force_matching, matching_objective, solve_matching, AssignMatrix, ConstraintMatrix,
    EdgeAffinity,
};

use crate::config::DriftConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    chain_area, chains_intersect, clip_chain, hull_chain, orthonormal_basis, patch_relation,
    PatchRelation, PlanePatch,
};
use crate::state::{chi2_gate, FilterState};
use crate::{MatD, Real, Vec2, Vec3, VecD};

/// Parameters of the Gaussian score kernel.
#[derive(Debug, Clone, Copy)]
pub struct ScoreParams {
    pub sigma_theta: Real,
    pub sigma_d: Real,
}

impl From<&DriftConfig> for ScoreParams {
    fn from(cfg: &DriftConfig) -> Self {
        ScoreParams { sigma_theta: cfg.sigma_theta, sigma_d: cfg.sigma_d }
    }
}

/// Separable Gaussian score in [0, 1], monotone decreasing in both the
/// angle and the distance argument.
pub fn score(theta: Real, d: Real, params: &ScoreParams) -> Real {
    let t = theta / params.sigma_theta;
    let s = d / params.sigma_d;
    (-0.5 * (t * t + s * s)).exp()
}

/// A fully connected directed graph over plane patches.
#[derive(Debug, Clone)]
pub struct SceneGraph {
    pub ids: Vec<u64>,
    pub vertices: Vec<PlanePatch>,
    relations: Vec<PatchRelation>,
}

impl SceneGraph {
    /// Build the complete relation set; `parallel_tol` feeds the category
    /// attribute.
    pub fn build(ids: Vec<u64>, vertices: Vec<PlanePatch>, parallel_tol: Real) -> Self {
        let n = vertices.len();
        let mut relations = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                relations.push(patch_relation(&vertices[i], &vertices[j], parallel_tol));
            }
        }
        SceneGraph { ids, vertices, relations }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Number of directed edges, n(n-1).
    pub fn edge_count(&self) -> usize {
        let n = self.len();
        n * (n - 1)
    }

    pub fn relation(&self, i: usize, j: usize) -> &PatchRelation {
        &self.relations[i * self.len() + j]
    }

    fn subset(&self, idx: &[usize], parallel_tol: Real) -> SceneGraph {
        SceneGraph::build(
            idx.iter().map(|&k| self.ids[k]).collect(),
            idx.iter().map(|&k| self.vertices[k].clone()).collect(),
            parallel_tol,
        )
    }
}

/// Split the plane map into the currently active (local) graph and the
/// remaining (global) graph.
pub fn build_graphs(
    state: &FilterState,
    current_frame: u64,
    cfg: &DriftConfig,
) -> Result<(SceneGraph, SceneGraph)> {
    let mut local_ids = Vec::new();
    let mut local_patches = Vec::new();
    let mut global_ids = Vec::new();
    let mut global_patches = Vec::new();
    for (id, entry) in state.planes_iter() {
        if current_frame.saturating_sub(entry.last_seen_frame) < cfg.active_window as u64 {
            local_ids.push(*id);
            local_patches.push(entry.patch.clone());
        } else {
            global_ids.push(*id);
            global_patches.push(entry.patch.clone());
        }
    }
    if local_ids.len() < cfg.min_local_planes {
        return Err(Error::InsufficientLocalPlanes(local_ids.len(), cfg.min_local_planes));
    }
    Ok((
        SceneGraph::build(local_ids, local_patches, cfg.delta_theta),
        SceneGraph::build(global_ids, global_patches, cfg.delta_theta),
    ))
}

/// Result of the unary candidate check: pruned subgraphs plus the
/// constraint matrix over them.
#[derive(Debug)]
pub struct UnaryOutcome {
    pub local_sub: SceneGraph,
    pub global_sub: SceneGraph,
    pub ct: ConstraintMatrix,
}

/// Weak per-vertex gates: angle, distance to the candidate's infinite
/// plane, and the in-plane gap (overlapping pairs always pass the gap
/// bound). Global planes sharing an identity with an active plane are
/// excluded, and vertices without any candidate are dropped.
pub fn unary_check(
    local: &SceneGraph,
    global: &SceneGraph,
    cfg: &DriftConfig,
) -> Result<UnaryOutcome> {
    let (n_a, n_m) = (local.len(), global.len());
    let mut ct = ConstraintMatrix::new(n_a, n_m, false);
    for i in 0..n_a {
        for j in 0..n_m {
            let rel = patch_relation(&local.vertices[i], &global.vertices[j], cfg.delta_theta);
            let gap_ok = rel.overlap > -cfg.delta_o;
            if rel.theta < cfg.delta_theta && rel.dist < cfg.delta_d && gap_ok {
                ct.set(i, j, true);
            }
        }
    }
    for j in 0..n_m {
        if local.ids.iter().any(|id| *id == global.ids[j]) {
            ct.zero_column(j);
        }
    }
    if !ct.any() {
        return Err(Error::NoCandidates);
    }
    let rows: Vec<usize> = (0..n_a).filter(|&i| ct.row_any(i)).collect();
    let cols: Vec<usize> = (0..n_m).filter(|&j| ct.col_any(j)).collect();
    let mut ct_sub = ConstraintMatrix::new(rows.len(), cols.len(), false);
    for (si, &i) in rows.iter().enumerate() {
        for (sj, &j) in cols.iter().enumerate() {
            ct_sub.set(si, sj, ct.get(i, j));
        }
    }
    Ok(UnaryOutcome {
        local_sub: local.subset(&rows, cfg.delta_theta),
        global_sub: global.subset(&cols, cfg.delta_theta),
        ct: ct_sub,
    })
}

/// Vertex and edge affinity matrices between the two subgraphs.
pub fn compute_affinities(
    local: &SceneGraph,
    global: &SceneGraph,
    params: &ScoreParams,
    parallel_tol: Real,
) -> (MatD, EdgeAffinity) {
    let (n_a, n_m) = (local.len(), global.len());
    let kp = MatD::from_fn(n_a, n_m, |i, j| {
        let rel = patch_relation(&local.vertices[i], &global.vertices[j], parallel_tol);
        score(rel.theta, rel.dist, params)
    });
    let mut kq = EdgeAffinity::new(n_a, n_m);
    for i1 in 0..n_a {
        for i2 in 0..n_a {
            if i1 == i2 {
                continue;
            }
            let rl = local.relation(i1, i2);
            for j1 in 0..n_m {
                for j2 in 0..n_m {
                    if j1 == j2 {
                        continue;
                    }
                    let rg = global.relation(j1, j2);
                    let dt = (rl.theta - rg.theta).abs();
                    let dd = (rl.dist - rg.dist).abs();
                    kq.set(i1, i2, j1, j2, score(dt, dd, params));
                }
            }
        }
    }
    (kp, kq)
}

/// Project the hulls of a patch set onto the horizontal plane and take the
/// combined footprint hull. Degenerate footprints return an empty chain.
fn ground_footprint(patches: &[&PlanePatch], gravity: &Vec3) -> Vec<Vec2> {
    let up = (-gravity).normalize();
    let (u, v) = orthonormal_basis(&up);
    let mut pts = Vec::new();
    for p in patches {
        for w in p.hull_world() {
            pts.push(Vec2::new(u.dot(&w), v.dot(&w)));
        }
    }
    hull_chain(&pts)
}

/// Ground-footprint verification: IoU of the two matched sets projected
/// along gravity. Degenerate projections reject.
pub fn overlap_check(
    matched_local: &[&PlanePatch],
    matched_global: &[&PlanePatch],
    gravity: &Vec3,
    cfg: &DriftConfig,
) -> (bool, Real) {
    if matched_local.is_empty() || matched_global.is_empty() {
        return (false, 0.0);
    }
    let fa = ground_footprint(matched_local, gravity);
    let fm = ground_footprint(matched_global, gravity);
    let a_a = chain_area(&fa);
    let a_m = chain_area(&fm);
    if a_a < 1e-9 || a_m < 1e-9 {
        return (false, 0.0);
    }
    let inter = if chains_intersect(&fa, &fm) { chain_area(&clip_chain(&fa, &fm)) } else { 0.0 };
    let iou = inter / (a_a + a_m - inter);
    (iou >= cfg.delta_o_iou, iou)
}

/// Strict pairwise verification: every pair of surviving matches must have
/// consistent relative angle, distance and overlap on both directed edges.
/// Violations remove both endpoint matches; rounds repeat to a fixpoint, so
/// the surviving set is independent of edge processing order.
pub fn binary_check(
    matches: &[(usize, usize)],
    local: &SceneGraph,
    global: &SceneGraph,
    cfg: &DriftConfig,
) -> Vec<(usize, usize)> {
    let mut alive: Vec<(usize, usize)> = matches.to_vec();
    loop {
        let mut bad = vec![false; alive.len()];
        for a in 0..alive.len() {
            for b in 0..alive.len() {
                if a == b {
                    continue;
                }
                let (i1, j1) = alive[a];
                let (i2, j2) = alive[b];
                let rl = local.relation(i1, i2);
                let rg = global.relation(j1, j2);
                let dt = (rl.theta - rg.theta).abs();
                let dd = (rl.dist - rg.dist).abs();
                let do_ = (rl.overlap - rg.overlap).abs();
                if dt >= cfg.delta_theta_strict || dd >= cfg.delta_d_strict || do_ >= cfg.delta_o_strict
                {
                    bad[a] = true;
                    bad[b] = true;
                }
            }
        }
        if !bad.iter().any(|&b| b) {
            break;
        }
        alive = alive
            .iter()
            .zip(&bad)
            .filter(|(_, &b)| !b)
            .map(|(&m, _)| m)
            .collect();
        if alive.is_empty() {
            break;
        }
    }
    alive
}

/// One detected duplicate pair: the newer landmark drifts, the older one is
/// the drift-free reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriftPair {
    pub drifting: u64,
    pub reference: u64,
}

/// A full drift detection event with diagnostics for the event log.
#[derive(Debug, Clone)]
pub struct DriftEvent {
    pub frame: u64,
    pub pairs: Vec<DriftPair>,
    pub objective: Real,
    pub iou: Real,
}

/// Run the whole detection pipeline. Any stage rejection yields `None`.
pub fn detect_drift(
    state: &FilterState,
    current_frame: u64,
    gravity: &Vec3,
    cfg: &DriftConfig,
) -> Option<DriftEvent> {
    let (local, global) = build_graphs(state, current_frame, cfg).ok()?;
    if global.is_empty() {
        return None;
    }
    let unary = unary_check(&local, &global, cfg).ok()?;
    let params = ScoreParams::from(cfg);
    let (kp, kq) = compute_affinities(&unary.local_sub, &unary.global_sub, &params, cfg.delta_theta);
    let x = solve_matching(&kp, &kq, &unary.ct, cfg.power_iters);
    if x.is_empty() {
        return None;
    }
    let matched_local: Vec<&PlanePatch> =
        x.matches().iter().map(|&(i, _)| &unary.local_sub.vertices[i]).collect();
    let matched_global: Vec<&PlanePatch> =
        x.matches().iter().map(|&(_, j)| &unary.global_sub.vertices[j]).collect();
    let (ok, iou) = overlap_check(&matched_local, &matched_global, gravity, cfg);
    if !ok {
        return None;
    }
    let surviving = binary_check(x.matches(), &unary.local_sub, &unary.global_sub, cfg);
    if surviving.len() < cfg.min_matches {
        return None;
    }
    let x_final =
        AssignMatrix::from_matches(unary.local_sub.len(), unary.global_sub.len(), surviving.clone(), None)
            .ok()?;
    let objective = matching_objective(&x_final, &kp, &kq);
    let pairs = surviving
        .iter()
        .map(|&(i, j)| {
            let a = unary.local_sub.ids[i];
            let b = unary.global_sub.ids[j];
            DriftPair { drifting: a.max(b), reference: a.min(b) }
        })
        .collect();
    Some(DriftEvent { frame: current_frame, pairs, objective, iou })
}

/// Pair-wise equality update: drive each drifting landmark onto its fixed
/// reference. Pairs failing the high-confidence gate are skipped. Returns
/// the pairs that were applied, with their residual norms.
pub fn de_drift_update(
    state: &mut FilterState,
    pairs: &[DriftPair],
    cfg: &DriftConfig,
) -> Result<Vec<(DriftPair, Real)>> {
    let layout = state.layout();
    let dim = layout.dim();
    let sigma2 = cfg.sigma_dedrift * cfg.sigma_dedrift;
    let mut accepted: Vec<(DriftPair, Real)> = Vec::new();
    let mut rows: Vec<(MatD, Vec3)> = Vec::new();
    for pair in pairs {
        let (Some(drift), Some(reference)) = (state.plane(pair.drifting), state.plane(pair.reference))
        else {
            continue;
        };
        let Some(slot) = state.plane_slot(pair.drifting) else { continue };
        // Measurement 0 = Pi_d - Pi_r with the reference held fixed.
        let residual = reference.patch.plane.cp() - drift.patch.plane.cp();
        let mut h = MatD::zeros(3, dim);
        h.view_mut((0, layout.plane_offset(slot)), (3, 3))
            .copy_from(&nalgebra::Matrix3::identity());
        let rv = VecD::from_vec(vec![residual.x, residual.y, residual.z]);
        let noise = MatD::identity(3, 3) * sigma2;
        if !chi2_gate(&rv, &h, state.covariance(), &noise, cfg.dedrift_chi2_confidence) {
            continue;
        }
        accepted.push((*pair, residual.norm()));
        rows.push((h, residual));
    }
    if rows.is_empty() {
        return Ok(accepted);
    }
    let m = 3 * rows.len();
    let mut h = MatD::zeros(m, dim);
    let mut r = VecD::zeros(m);
    for (k, (hb, rb)) in rows.iter().enumerate() {
        h.view_mut((3 * k, 0), (3, dim)).copy_from(hb);
        r[3 * k] = rb.x;
        r[3 * k + 1] = rb.y;
        r[3 * k + 2] = rb.z;
    }
    let noise = MatD::identity(m, m) * sigma2;
    state.ekf_update(&r, &h, &noise)?;
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StateConfig;
    use crate::geometry::{PlaneCP, Rotation};
    use crate::state::{CalibState, ImuState, PlaneLandmarkEntry};
    use approx::assert_relative_eq;

    fn cfg() -> DriftConfig {
        DriftConfig::default()
    }

    /// Rectangle patch: plane through `anchor` with normal `n`, extents
    /// (2*hu, 2*hv) along its in-plane basis around the anchor projection.
    fn rect(id: u64, n: Vec3, anchor: Vec3, hu: Real, hv: Real) -> PlanePatch {
        let n = n.normalize();
        let d = n.dot(&anchor);
        let (n, d) = if d < 0.0 { (-n, -d) } else { (n, d) };
        let plane = PlaneCP::from_normal_distance(&n, d).unwrap();
        let (u, v) = orthonormal_basis(&n);
        let c = anchor;
        let pts = [
            c + u * hu + v * hv,
            c - u * hu + v * hv,
            c - u * hu - v * hv,
            c + u * hu - v * hv,
        ];
        PlanePatch::from_world_points(id, plane, &pts).unwrap()
    }

    /// A small room corner: floor plus two perpendicular walls, shifted by
    /// `offset` and with ids starting at `id0`.
    fn corner(id0: u64, offset: Vec3) -> Vec<PlanePatch> {
        vec![
            rect(id0, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0) + offset, 1.5, 1.5),
            rect(id0 + 1, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0) + offset, 1.5, 1.0),
            rect(id0 + 2, Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 2.0, 0.0) + offset, 1.5, 1.0),
        ]
    }

    #[test]
    fn score_examples() {
        let params = ScoreParams { sigma_theta: 0.3, sigma_d: 0.5 };
        assert_relative_eq!(score(0.0, 0.0, &params), 1.0, epsilon = 1e-12);
        assert_relative_eq!(score(0.3, 0.0, &params), (-0.5_f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(score(0.0, 0.5, &params), (-0.5_f64).exp(), epsilon = 1e-12);
        assert!(score(30.0, 0.0, &params) < 1e-12);
        assert!(score(0.0, 50.0, &params) < 1e-12);
        // Monotone decreasing in each argument.
        assert!(score(0.2, 0.1, &params) > score(0.3, 0.1, &params));
        assert!(score(0.2, 0.1, &params) > score(0.2, 0.2, &params));
    }

    fn state_with_patches(patches: Vec<(PlanePatch, u64)>) -> FilterState {
        let imu = ImuState::at_rest(0.0);
        let calib = CalibState {
            rot_imu_to_cam: Rotation::identity(),
            p_imu_in_cam: Vec3::zeros(),
            time_offset: 0.0,
            intrinsics: [380.0, 380.0, 320.0, 240.0],
        };
        let mut p0 = MatD::zeros(15, 15);
        for i in 0..15 {
            p0[(i, i)] = 1e-4;
        }
        let mut st = FilterState::new(imu, calib, StateConfig::default(), p0);
        for (patch, last_seen) in patches {
            // Keep the allocator ahead of explicit ids.
            while st.alloc_plane_id() < patch.id {}
            st.insert_plane_landmark(
                PlaneLandmarkEntry {
                    patch,
                    last_seen_frame: last_seen,
                    track_count: 5,
                    permanent: false,
                },
                &(nalgebra::Matrix3::identity() * 1e-3),
            );
        }
        st
    }

    #[test]
    fn build_graphs_splits_by_recency() {
        let mut patches = Vec::new();
        for (k, p) in corner(0, Vec3::zeros()).into_iter().enumerate() {
            patches.push((p, 95 + k as u64)); // active at frame 100
        }
        for (k, p) in corner(10, Vec3::new(6.0, 0.0, 0.0)).into_iter().enumerate() {
            patches.push((p, 10 + k as u64)); // long unseen
        }
        let st = state_with_patches(patches);
        let (local, global) = build_graphs(&st, 100, &cfg()).unwrap();
        assert_eq!(local.len(), 3);
        assert_eq!(global.len(), 3);
        assert_eq!(local.edge_count(), 6);

        // Four active planes give 12 directed edges.
        let mut patches: Vec<(PlanePatch, u64)> =
            corner(0, Vec3::zeros()).into_iter().map(|p| (p, 99)).collect();
        patches.push((rect(3, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 2.0), 1.0, 1.0), 99));
        let st = state_with_patches(patches);
        let (local, global) = build_graphs(&st, 100, &cfg()).unwrap();
        assert_eq!(local.edge_count(), 12);
        assert!(global.is_empty());
    }

    #[test]
    fn too_few_active_planes() {
        let patches: Vec<(PlanePatch, u64)> = corner(0, Vec3::zeros())
            .into_iter()
            .enumerate()
            .map(|(k, p)| (p, if k < 2 { 99 } else { 0 }))
            .collect();
        let st = state_with_patches(patches);
        let err = build_graphs(&st, 100, &cfg());
        assert!(matches!(err, Err(Error::InsufficientLocalPlanes(2, 3))));
    }

    #[test]
    fn unary_check_examples() {
        // Local: duplicate corner near the original; Global: original corner.
        let local_p = corner(10, Vec3::new(0.3, 0.0, 0.0));
        let global_p = corner(0, Vec3::zeros());
        let local = SceneGraph::build(vec![10, 11, 12], local_p, cfg().delta_theta);
        let global = SceneGraph::build(vec![0, 1, 2], global_p, cfg().delta_theta);
        let out = unary_check(&local, &global, &cfg()).unwrap();
        // Corresponding planes are candidates; perpendicular ones are not.
        assert_eq!(out.local_sub.len(), 3);
        assert_eq!(out.global_sub.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(out.ct.get(i, j), i == j, "ct[{i}][{j}]");
            }
        }
    }

    #[test]
    fn unary_zeroes_shared_identities() {
        let local_p = corner(0, Vec3::new(0.2, 0.0, 0.0));
        let global_p = corner(0, Vec3::zeros());
        let local = SceneGraph::build(vec![0, 1, 2], local_p, cfg().delta_theta);
        let global = SceneGraph::build(vec![0, 7, 8], global_p, cfg().delta_theta);
        let out = unary_check(&local, &global, &cfg()).unwrap();
        // Global vertex with id 0 was dropped entirely (column zeroed, then
        // pruned); wall ids 7 and 8 survive.
        assert!(!out.global_sub.ids.contains(&0));
    }

    #[test]
    fn affinities_of_identical_graphs() {
        let cfgv = cfg();
        let params = ScoreParams::from(&cfgv);
        let a = corner(0, Vec3::zeros());
        let b = corner(10, Vec3::zeros());
        let local = SceneGraph::build(vec![0, 1, 2], a, cfgv.delta_theta);
        let global = SceneGraph::build(vec![10, 11, 12], b, cfgv.delta_theta);
        let (kp, kq) = compute_affinities(&local, &global, &params, cfgv.delta_theta);
        for i in 0..3 {
            assert_relative_eq!(kp[(i, i)], 1.0, epsilon = 1e-9);
        }
        // Corresponding edge pairs are perfectly similar.
        for i1 in 0..3 {
            for i2 in 0..3 {
                if i1 != i2 {
                    assert_relative_eq!(kq.get(i1, i2, i1, i2), 1.0, epsilon = 1e-9);
                }
            }
        }
        // A known kernel value: edge pair differing by sigma_theta in angle.
        let dt = params.sigma_theta;
        assert_relative_eq!(score(dt, 0.0, &params), (-0.5_f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn identity_assignment_on_duplicated_structure() {
        let cfgv = cfg();
        let params = ScoreParams::from(&cfgv);
        // Distinct pairwise relations: floor, wall, tilted wall.
        let a = vec![
            rect(0, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0), 1.5, 1.5),
            rect(1, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), 1.0, 0.8),
            rect(2, Vec3::new(1.0, 1.0, 0.2), Vec3::new(0.0, 3.0, 0.5), 1.2, 0.6),
        ];
        let b: Vec<PlanePatch> =
            a.iter().map(|p| { let mut q = p.clone(); q.id += 10; q }).collect();
        let local = SceneGraph::build(vec![0, 1, 2], a, cfgv.delta_theta);
        let global = SceneGraph::build(vec![10, 11, 12], b, cfgv.delta_theta);
        let (kp, kq) = compute_affinities(&local, &global, &params, cfgv.delta_theta);
        let ct = ConstraintMatrix::new(3, 3, true);
        let x = solve_matching(&kp, &kq, &ct, 100);
        assert_eq!(x.matches(), &[(0, 0), (1, 1), (2, 2)]);
        // Matches the exhaustive oracle.
        let (bx, bobj) = brute_force_matching(&kp, &kq, &ct).unwrap();
        assert_eq!(bx.matches(), x.matches());
        assert_relative_eq!(matching_objective(&x, &kp, &kq), bobj, epsilon = 1e-9);
    }

    #[test]
    fn overlap_check_examples() {
        let g = Vec3::new(0.0, 0.0, -9.81);
        let cfgv = cfg();
        let a = corner(0, Vec3::zeros());
        let refs_a: Vec<&PlanePatch> = a.iter().collect();
        let (ok, iou) = overlap_check(&refs_a, &refs_a, &g, &cfgv);
        assert!(ok);
        assert_relative_eq!(iou, 1.0, epsilon = 1e-9);

        let b = corner(10, Vec3::new(50.0, 0.0, 0.0));
        let refs_b: Vec<&PlanePatch> = b.iter().collect();
        let (ok, iou) = overlap_check(&refs_a, &refs_b, &g, &cfgv);
        assert!(!ok);
        assert_relative_eq!(iou, 0.0, epsilon = 1e-12);

        // Two horizontal unit squares overlapping half: IoU = 1/3.
        let sq_a = rect(0, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0), 0.5, 0.5);
        let sq_b = rect(1, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.5, 0.0, -1.0), 0.5, 0.5);
        let (ok, iou) = overlap_check(&[&sq_a], &[&sq_b], &g, &cfgv);
        assert_relative_eq!(iou, 1.0 / 3.0, epsilon = 1e-9);
        assert_eq!(ok, cfgv.delta_o_iou <= 1.0 / 3.0);

        // Parallel vertical walls only: degenerate ground projection.
        let w1 = rect(0, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), 1.0, 1.0);
        let (ok, _) = overlap_check(&[&w1], &[&w1], &g, &cfgv);
        assert!(!ok);
    }

    #[test]
    fn binary_check_keeps_exact_duplicates_and_prunes_displaced() {
        let cfgv = cfg();
        let a = corner(0, Vec3::zeros());
        let b = corner(10, Vec3::new(0.3, 0.0, 0.0));
        let local = SceneGraph::build(vec![0, 1, 2], a.clone(), cfgv.delta_theta);
        let global = SceneGraph::build(vec![10, 11, 12], b, cfgv.delta_theta);
        let matches = vec![(0, 0), (1, 1), (2, 2)];
        let surviving = binary_check(&matches, &local, &global, &cfgv);
        assert_eq!(surviving, matches);

        // Displace one duplicate 1 m along its own plane: the relative
        // overlaps break and both of its pairings must go.
        let mut b2 = corner(10, Vec3::new(0.3, 0.0, 0.0));
        b2[2] = rect(12, Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 2.0, 0.0) + Vec3::new(0.3, 0.0, 0.0), 1.5, 1.0);
        let global2 = SceneGraph::build(vec![10, 11, 12], b2, cfgv.delta_theta);
        let surviving = binary_check(&matches, &local, &global2, &cfgv);
        assert!(!surviving.iter().any(|&(i, _)| i == 2));
        // Order independence: permuting the input matches yields the same
        // surviving set.
        let perm = vec![(2, 2), (0, 0), (1, 1)];
        let mut s2 = binary_check(&perm, &local, &global2, &cfgv);
        s2.sort();
        let mut s1 = surviving.clone();
        s1.sort();
        assert_eq!(s1, s2);
    }

    #[test]
    fn detect_drift_full_pipeline_on_synthetic_map() {
        let mut patches = Vec::new();
        // Originals: a 4-plane structure, long unseen.
        let mut orig = corner(0, Vec3::zeros());
        orig.push(rect(3, Vec3::new(0.0, 1.0, 0.0), Vec3::new(-1.0, -2.0, 0.0), 1.2, 0.9));
        for p in orig {
            patches.push((p, 5));
        }
        // Duplicates of the same structure, shifted by 0.3 m, recently seen.
        let mut dup = corner(20, Vec3::new(0.3, 0.0, 0.0));
        dup.push(rect(23, Vec3::new(0.0, 1.0, 0.0), Vec3::new(-0.7, -2.0, 0.0), 1.2, 0.9));
        for p in dup {
            patches.push((p, 499));
        }
        let st = state_with_patches(patches);
        let g = Vec3::new(0.0, 0.0, -9.81);
        let event = detect_drift(&st, 500, &g, &cfg()).expect("drift detected");
        assert_eq!(event.pairs.len(), 4);
        for pair in &event.pairs {
            assert_eq!(pair.drifting, pair.reference + 20);
            assert!(pair.drifting > pair.reference);
        }
        assert!(event.iou > 0.5);

        // The same map with no recently-seen duplicates detects nothing.
        let originals: Vec<(PlanePatch, u64)> =
            corner(0, Vec3::zeros()).into_iter().map(|p| (p, 499)).collect();
        let st = state_with_patches(originals);
        assert!(detect_drift(&st, 500, &g, &cfg()).is_none());
    }

    #[test]
    fn de_drift_zero_residual_is_noop() {
        let a = rect(0, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 2.0), 1.0, 1.0);
        let b = rect(1, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 2.0), 1.0, 1.0);
        let mut st = state_with_patches(vec![(a, 0), (b, 99)]);
        let before_cp = st.plane(0).unwrap().patch.plane.cp();
        let pairs = [DriftPair { drifting: 1, reference: 0 }];
        let accepted = de_drift_update(&mut st, &pairs, &cfg()).unwrap();
        assert_eq!(accepted.len(), 1);
        assert_relative_eq!(accepted[0].1, 0.0, epsilon = 1e-12);
        assert_relative_eq!(st.plane(0).unwrap().patch.plane.cp(), before_cp, epsilon = 1e-12);
        assert_relative_eq!(st.plane(1).unwrap().patch.plane.cp(), before_cp, epsilon = 1e-12);
    }

    #[test]
    fn de_drift_pulls_drifting_landmark_and_correlated_state() {
        // Hand-checkable two-landmark system: the drifting plane has loose
        // covariance correlated with the IMU position; the reference is
        // tight. The posterior must move the drifting plane toward the
        // reference by P_dd (P_dd + sigma^2 I)^-1 r and drag the position by
        // P_pd (P_dd + sigma^2 I)^-1 r.
        let reference = rect(0, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 2.0), 1.0, 1.0);
        let drifting = rect(1, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 2.5), 1.0, 1.0);
        let mut st = state_with_patches(vec![(reference, 0), (drifting, 99)]);
        let l = st.layout();
        let off_d = l.plane_offset(st.plane_slot(1).unwrap());
        let p_dd = 0.04;
        let p_pp = 0.01;
        let p_pd = 0.015;
        {
            let cov = st.covariance_mut();
            for k in 0..3 {
                cov[(off_d + k, off_d + k)] = p_dd;
                // Correlate with the IMU position block (p_pd^2 < p_pp*p_dd
                // keeps the covariance PSD).
                cov[(3 + k, 3 + k)] = p_pp;
                cov[(3 + k, off_d + k)] = p_pd;
                cov[(off_d + k, 3 + k)] = p_pd;
            }
        }
        st.debug_validate();
        let cfgv = cfg();
        let r = st.plane(0).unwrap().patch.plane.cp() - st.plane(1).unwrap().patch.plane.cp();
        let gain = p_dd / (p_dd + cfgv.sigma_dedrift.powi(2));
        let expect_d_move = r * gain;
        let expect_p_move = r * (p_pd / (p_dd + cfgv.sigma_dedrift.powi(2)));
        let before_d = st.plane(1).unwrap().patch.plane.cp();
        let before_p = st.imu.position;
        let pairs = [DriftPair { drifting: 1, reference: 0 }];
        let accepted = de_drift_update(&mut st, &pairs, &cfgv).unwrap();
        assert_eq!(accepted.len(), 1);
        let after_d = st.plane(1).unwrap().patch.plane.cp();
        let after_p = st.imu.position;
        assert_relative_eq!(after_d - before_d, expect_d_move, epsilon = 1e-9);
        assert_relative_eq!(after_p - before_p, expect_p_move, epsilon = 1e-9);
        // Reference stays fixed.
        assert_relative_eq!(
            st.plane(0).unwrap().patch.plane.cp(),
            Vec3::new(0.0, 0.0, 2.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn de_drift_gates_inconsistent_pairs() {
        let reference = rect(0, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 2.0), 1.0, 1.0);
        // 1 m apart with tiny covariance: hopeless pair, must be skipped.
        let drifting = rect(1, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 3.0), 1.0, 1.0);
        let mut st = state_with_patches(vec![(reference, 0), (drifting, 99)]);
        let pairs = [DriftPair { drifting: 1, reference: 0 }];
        let accepted = de_drift_update(&mut st, &pairs, &cfg()).unwrap();
        assert!(accepted.is_empty());
        assert_relative_eq!(
            st.plane(1).unwrap().patch.plane.cp(),
            Vec3::new(0.0, 0.0, 3.0),
            epsilon = 1e-12
        );
    }
}
