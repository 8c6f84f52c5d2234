mod curve;
mod mesh;
mod polygon;

pub use curve::{
    f_mean_convexity_check, f_mean_curvature, f_mean_curvature_at, outward_normal, CurveSample,
    CurveShape, SmoothBoundaryCurve,
};
pub use mesh::{triangulate, TriMesh, MAX_LEVELS};
pub use polygon::{
    convex_hull, diameter, diameter_with, inscribed_with, inscribed_wulff_radius, ConvexPolygon,
    Facet, InscribedBall,
};
