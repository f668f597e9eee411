//! Geometry kernels shared by the filter and the drift detector.

mod patch;
mod plane;
mod polygon;
mod rotation;

pub use patch::{
    patch_angle, patch_category, patch_distance, patch_overlap, patch_relation, PatchCategory,
    PatchRelation, PlanePatch, MAX_HULL_VERTICES,
};
pub use plane::{orthonormal_basis, plane_to_world, transform_plane, PlaneCP, EPS_CP};
pub use polygon::{polygon_intersection_area, ConvexPolygon2D};
pub use rotation::{skew, so3_exp, so3_log, so3_right_jacobian, Pose, Rotation};

pub(crate) use polygon::{chain_area, chains_distance, chains_intersect, clip_chain, hull_chain};
