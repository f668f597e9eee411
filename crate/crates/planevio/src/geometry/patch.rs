//! Bounded plane patches and their pairwise geometric relations.
//!
//! A patch is an infinite plane in CP form plus a convex hull of observed
//! inliers, kept in an orthonormal in-plane basis. The relation attributes
//! between two patches (angle, distance, category, overlap) drive both plane
//! association and the drift-detection graphs. Distances and overlaps are
//! directional; only the angle is symmetric.


use crate::error::Result;
use crate::geometry::plane::{orthonormal_basis, PlaneCP};
use crate::geometry::polygon::{
    chain_area, chains_distance, chains_intersect, clip_chain, hull_chain, ConvexPolygon2D,
};
use crate::{Real, Vec2, Vec3};

/// Cap on hull vertices; growth beyond this discards the vertex whose
/// removal changes the area least.
pub const MAX_HULL_VERTICES: usize = 32;

/// Relation category between two patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchCategory {
    Parallel,
    Separation,
    Intersection,
}

/// Directed relation attributes from patch `i` to patch `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchRelation {
    /// Normal angle in [0, pi/2], symmetric.
    pub theta: Real,
    /// Minimum distance from the hull of `i` to the infinite plane of `j`.
    pub dist: Real,
    /// Relation category (keyed on the reverse distance, see
    /// [`patch_category`]).
    pub category: PatchCategory,
    /// Overlap area after projecting `i` onto `j` when positive; negated
    /// in-plane gap between the projected hulls when negative.
    pub overlap: Real,
}

/// A bounded plane patch.
#[derive(Debug, Clone)]
pub struct PlanePatch {
    pub id: u64,
    pub plane: PlaneCP,
    /// Orthonormal in-plane basis (both orthogonal to the normal).
    pub basis: (Vec3, Vec3),
    /// Convex hull of observed inliers, in basis coordinates.
    pub hull: ConvexPolygon2D,
    /// Hull area, cached.
    pub area: Real,
}

impl PlanePatch {
    /// Build a patch from world-frame points near the plane. Points are
    /// projected onto the plane before hull construction.
    pub fn from_world_points(id: u64, plane: PlaneCP, points: &[Vec3]) -> Result<Self> {
        let basis = orthonormal_basis(&plane.normal());
        let coords: Vec<Vec2> = points.iter().map(|p| to_plane(&plane, &basis, p)).collect();
        let hull = ConvexPolygon2D::convex_hull(&coords)?.capped(MAX_HULL_VERTICES);
        let area = hull.area();
        Ok(PlanePatch { id, plane, basis, hull, area })
    }

    /// Hull vertices lifted back to the world frame.
    pub fn hull_world(&self) -> Vec<Vec3> {
        let origin = self.plane.cp();
        self.hull
            .vertices()
            .iter()
            .map(|v| origin + self.basis.0 * v.x + self.basis.1 * v.y)
            .collect()
    }

    /// Grow the hull with additional world-frame inlier points.
    pub fn extend(&mut self, points: &[Vec3]) -> Result<()> {
        let mut coords: Vec<Vec2> = self.hull.vertices().to_vec();
        coords.extend(points.iter().map(|p| to_plane(&self.plane, &self.basis, p)));
        let hull = ConvexPolygon2D::convex_hull(&coords)?.capped(MAX_HULL_VERTICES);
        self.area = hull.area();
        self.hull = hull;
        Ok(())
    }

    /// Move the patch onto an updated plane estimate, reprojecting the hull.
    pub fn rebase(&mut self, new_plane: PlaneCP) -> Result<()> {
        let world = self.hull_world();
        let basis = orthonormal_basis(&new_plane.normal());
        let coords: Vec<Vec2> = world.iter().map(|p| to_plane(&new_plane, &basis, p)).collect();
        let hull = ConvexPolygon2D::convex_hull(&coords)?.capped(MAX_HULL_VERTICES);
        self.plane = new_plane;
        self.basis = basis;
        self.area = hull.area();
        self.hull = hull;
        Ok(())
    }

    /// Union with another patch: the other hull is projected onto this
    /// patch's plane and merged. Identity and plane stay this patch's.
    pub fn union_with(&mut self, other: &PlanePatch) -> Result<()> {
        self.extend(&other.hull_world())
    }
}

fn to_plane(plane: &PlaneCP, basis: &(Vec3, Vec3), p: &Vec3) -> Vec2 {
    let q = plane.project(p) - plane.cp();
    Vec2::new(basis.0.dot(&q), basis.1.dot(&q))
}

/// Angle between patch normals, folded into [0, pi/2].
pub fn patch_angle(i: &PlanePatch, j: &PlanePatch) -> Real {
    let c = i.plane.normal().dot(&j.plane.normal()).abs().clamp(0.0, 1.0);
    c.acos()
}

/// Minimum unsigned distance from the hull vertices of `i` to the infinite
/// plane of `j`; zero when the plane splits the patch.
pub fn patch_distance(i: &PlanePatch, j: &PlanePatch) -> Real {
    let mut min_s = Real::INFINITY;
    let mut max_s = Real::NEG_INFINITY;
    for v in i.hull_world() {
        let s = j.plane.signed_distance(&v);
        min_s = min_s.min(s);
        max_s = max_s.max(s);
    }
    if min_s > 0.0 {
        min_s
    } else if max_s < 0.0 {
        -max_s
    } else {
        0.0
    }
}

/// Relation category: parallel within `delta_theta`, otherwise separation
/// when patch `j` clears the infinite plane of `i`, otherwise intersection.
pub fn patch_category(i: &PlanePatch, j: &PlanePatch, delta_theta: Real) -> PatchCategory {
    if patch_angle(i, j) <= delta_theta {
        PatchCategory::Parallel
    } else if patch_distance(j, i) > 0.0 {
        PatchCategory::Separation
    } else {
        PatchCategory::Intersection
    }
}

/// Signed overlap of patch `i` projected along `n_j` onto plane `j`:
/// intersection area of the projected hulls when they meet, otherwise the
/// negated minimum in-plane gap between them.
pub fn patch_overlap(i: &PlanePatch, j: &PlanePatch) -> Real {
    let basis = &j.basis;
    let nj = j.plane.normal();
    let projected: Vec<Vec2> = i
        .hull_world()
        .iter()
        .map(|p| {
            let q = p - j.plane.signed_distance(p) * nj;
            let q = q - j.plane.cp();
            Vec2::new(basis.0.dot(&q), basis.1.dot(&q))
        })
        .collect();
    let chain_i = hull_chain(&projected);
    let chain_j = j.hull.vertices();
    if chains_intersect(&chain_i, chain_j) {
        if chain_i.len() >= 3 {
            chain_area(&clip_chain(&chain_i, chain_j))
        } else {
            // Projection collapsed to a segment or point: zero-measure overlap.
            0.0
        }
    } else {
        -chains_distance(&chain_i, chain_j)
    }
}

/// All four relation attributes from `i` to `j`.
pub fn patch_relation(i: &PlanePatch, j: &PlanePatch, delta_theta: Real) -> PatchRelation {
    PatchRelation {
        theta: patch_angle(i, j),
        dist: patch_distance(i, j),
        category: patch_category(i, j, delta_theta),
        overlap: patch_overlap(i, j),
    }
}
