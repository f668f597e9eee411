//! Convex polygons in the plane: hulls, clipping, containment, distances.
//!
//! Projections of plane patches can collapse to segments or points (a wall
//! projected onto the floor), so the low-level routines operate on convex
//! chains that are allowed to be degenerate; [`ConvexPolygon2D`] is the
//! strict, validated form used for patch hulls.


use crate::error::{Error, Result};
use crate::{Real, Vec2};

/// Cross product of (b - a) and (c - a).
#[inline]
fn cross(a: &Vec2, b: &Vec2, c: &Vec2) -> Real {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

const EPS_COLLINEAR: Real = 1e-9;

/// Convex hull of a point set by monotone chain, allowing degenerate output:
/// one point (all coincident), two points (all collinear), or a CCW polygon.
pub(crate) fn hull_chain(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= EPS_COLLINEAR
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= EPS_COLLINEAR
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // All points collinear: keep the two extreme ones.
        let first = pts[0];
        let last = pts[pts.len() - 1];
        return vec![first, last];
    }
    lower
}

/// Shoelace area of a CCW vertex chain (0 for degenerate chains).
pub(crate) fn chain_area(v: &[Vec2]) -> Real {
    if v.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..v.len() {
        let j = (i + 1) % v.len();
        s += v[i].x * v[j].y - v[j].x * v[i].y;
    }
    0.5 * s
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon2D {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon2D {
    /// Convex hull of the input points. Fails when fewer than three
    /// non-collinear points remain.
    pub fn convex_hull(points: &[Vec2]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateHull("fewer than 3 points"));
        }
        let hull = hull_chain(points);
        if hull.len() < 3 {
            return Err(Error::DegenerateHull("all points collinear"));
        }
        Ok(ConvexPolygon2D { vertices: hull })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> Real {
        chain_area(&self.vertices)
    }

    /// True when `p` lies inside or on the boundary.
    pub fn contains(&self, p: &Vec2, tol: Real) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let j = (i + 1) % n;
            if cross(&self.vertices[i], &self.vertices[j], p) < -tol {
                return false;
            }
        }
        true
    }

    /// Reduce the hull to at most `max_vertices` by repeatedly removing the
    /// vertex whose removal changes the area the least.
    pub fn capped(mut self, max_vertices: usize) -> Self {
        while self.vertices.len() > max_vertices.max(3) {
            let n = self.vertices.len();
            let mut best = 0;
            let mut best_loss = Real::INFINITY;
            for i in 0..n {
                let prev = self.vertices[(i + n - 1) % n];
                let next = self.vertices[(i + 1) % n];
                // Area lost by removing vertex i is the ear triangle.
                let loss = 0.5 * cross(&prev, &self.vertices[i], &next).abs();
                if loss < best_loss {
                    best_loss = loss;
                    best = i;
                }
            }
            self.vertices.remove(best);
        }
        self
    }
}

/// Area of the intersection of two convex polygons (Sutherland-Hodgman
/// clipping); zero when they are disjoint.
pub fn polygon_intersection_area(a: &ConvexPolygon2D, b: &ConvexPolygon2D) -> Real {
    chain_area(&clip_chain(a.vertices(), b.vertices()))
}

/// Clip a convex CCW subject chain against a convex CCW clip polygon.
pub(crate) fn clip_chain(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        let e0 = clip[i];
        let e1 = clip[(i + 1) % n];
        let input = std::mem::take(&mut out);
        if input.is_empty() {
            return Vec::new();
        }
        let m = input.len();
        for k in 0..m {
            let s = input[k];
            let e = input[(k + 1) % m];
            let sc = cross(&e0, &e1, &s);
            let ec = cross(&e0, &e1, &e);
            let s_in = sc >= 0.0;
            let e_in = ec >= 0.0;
            match (s_in, e_in) {
                (true, true) => out.push(e),
                (true, false) => {
                    if (sc - ec).abs() > 1e-30 {
                        let t = sc / (sc - ec);
                        out.push(s + (e - s) * t);
                    }
                }
                (false, true) => {
                    if (sc - ec).abs() > 1e-30 {
                        let t = sc / (sc - ec);
                        out.push(s + (e - s) * t);
                    }
                    out.push(e);
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// Distance from point `p` to segment `[a, b]`.
pub(crate) fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> Real {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-30 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn seg_intersects(a0: &Vec2, a1: &Vec2, b0: &Vec2, b1: &Vec2) -> bool {
    let d1 = cross(b0, b1, a0);
    let d2 = cross(b0, b1, a1);
    let d3 = cross(a0, a1, b0);
    let d4 = cross(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Touching or collinear-overlap cases.
    let on = |d: Real, p: &Vec2, a: &Vec2, b: &Vec2| {
        d.abs() < 1e-12
            && p.x >= a.x.min(b.x) - 1e-12
            && p.x <= a.x.max(b.x) + 1e-12
            && p.y >= a.y.min(b.y) - 1e-12
            && p.y <= a.y.max(b.y) + 1e-12
    };
    on(d1, a0, b0, b1) || on(d2, a1, b0, b1) || on(d3, b0, a0, a1) || on(d4, b1, a0, a1)
}

/// Edge list of a convex chain: a closed loop for polygons, the single
/// segment for 2 points, a zero-length segment for 1 point.
fn chain_edges(c: &[Vec2]) -> Vec<(Vec2, Vec2)> {
    match c.len() {
        0 => Vec::new(),
        1 => vec![(c[0], c[0])],
        2 => vec![(c[0], c[1])],
        n => (0..n).map(|i| (c[i], c[(i + 1) % n])).collect(),
    }
}

fn chain_contains(c: &[Vec2], p: &Vec2) -> bool {
    if c.len() < 3 {
        return false;
    }
    let n = c.len();
    for i in 0..n {
        if cross(&c[i], &c[(i + 1) % n], p) < -1e-12 {
            return false;
        }
    }
    true
}

/// Whether two convex chains (possibly degenerate) share at least one point.
pub(crate) fn chains_intersect(a: &[Vec2], b: &[Vec2]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    if a.iter().any(|p| chain_contains(b, p)) || b.iter().any(|p| chain_contains(a, p)) {
        return true;
    }
    let ea = chain_edges(a);
    let eb = chain_edges(b);
    for (a0, a1) in &ea {
        for (b0, b1) in &eb {
            if seg_intersects(a0, a1, b0, b1) {
                return true;
            }
        }
    }
    false
}

/// Minimum boundary distance between two disjoint convex chains.
pub(crate) fn chains_distance(a: &[Vec2], b: &[Vec2]) -> Real {
    let mut best = Real::INFINITY;
    for p in a {
        for (b0, b1) in chain_edges(b) {
            best = best.min(point_segment_distance(p, &b0, &b1));
        }
    }
    for p in b {
        for (a0, a1) in chain_edges(a) {
            best = best.min(point_segment_distance(p, &a0, &a1));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> ConvexPolygon2D {
        ConvexPolygon2D::convex_hull(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn shifted_square(dx: Real, dy: Real) -> ConvexPolygon2D {
        ConvexPolygon2D::convex_hull(&[
            Vec2::new(dx, dy),
            Vec2::new(dx + 1.0, dy),
            Vec2::new(dx + 1.0, dy + 1.0),
            Vec2::new(dx, dy + 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn hull_drops_interior_point() {
        let hull = ConvexPolygon2D::convex_hull(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.5, 0.5),
        ])
        .unwrap();
        assert_eq!(hull.vertices().len(), 4);
        assert_relative_eq!(hull.area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hull_rejects_collinear() {
        let r = ConvexPolygon2D::convex_hull(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 2.0),
        ]);
        assert!(matches!(r, Err(Error::DegenerateHull(_))));
    }

    #[test]
    fn hull_of_random_disk_points_contains_all() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let mut pts = Vec::new();
        while pts.len() < 1000 {
            let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if p.norm() <= 1.0 {
                pts.push(p);
            }
        }
        let hull = ConvexPolygon2D::convex_hull(&pts).unwrap();
        assert!(hull.area() <= std::f64::consts::PI + 1e-9);
        for p in &pts {
            assert!(hull.contains(p, 1e-9));
        }
    }

    #[test]
    fn intersection_identical_squares() {
        assert_relative_eq!(polygon_intersection_area(&unit_square(), &unit_square()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn intersection_disjoint_squares() {
        assert_relative_eq!(
            polygon_intersection_area(&unit_square(), &shifted_square(3.0, 0.0)),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn intersection_half_overlap() {
        assert_relative_eq!(
            polygon_intersection_area(&unit_square(), &shifted_square(0.5, 0.0)),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn intersection_subset_is_smaller_area() {
        let small = ConvexPolygon2D::convex_hull(&[
            Vec2::new(0.25, 0.25),
            Vec2::new(0.75, 0.25),
            Vec2::new(0.75, 0.75),
            Vec2::new(0.25, 0.75),
        ])
        .unwrap();
        assert_relative_eq!(
            polygon_intersection_area(&small, &unit_square()),
            small.area(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn cap_keeps_most_area() {
        let n = 64;
        let pts: Vec<Vec2> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as Real / n as Real;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        let hull = ConvexPolygon2D::convex_hull(&pts).unwrap();
        let full = hull.area();
        let capped = hull.capped(32);
        assert_eq!(capped.vertices().len(), 32);
        assert!(capped.area() > 0.98 * full);
    }

    #[test]
    fn chain_distance_between_squares() {
        let a = unit_square();
        let b = shifted_square(1.3, 0.0);
        assert!(!chains_intersect(a.vertices(), b.vertices()));
        assert_relative_eq!(chains_distance(a.vertices(), b.vertices()), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn chain_intersect_containment() {
        let outer = unit_square();
        let inner = ConvexPolygon2D::convex_hull(&[
            Vec2::new(0.4, 0.4),
            Vec2::new(0.6, 0.4),
            Vec2::new(0.6, 0.6),
            Vec2::new(0.4, 0.6),
        ])
        .unwrap();
        assert!(chains_intersect(outer.vertices(), inner.vertices()));
    }

    #[test]
    fn degenerate_chain_intersection_and_distance() {
        let sq = unit_square();
        // A segment crossing the square.
        let seg = vec![Vec2::new(-0.5, 0.5), Vec2::new(1.5, 0.5)];
        assert!(chains_intersect(sq.vertices(), &seg));
        // A point outside.
        let pt = vec![Vec2::new(2.0, 0.5)];
        assert!(!chains_intersect(sq.vertices(), &pt));
        assert_relative_eq!(chains_distance(sq.vertices(), &pt), 1.0, epsilon = 1e-12);
    }
}
