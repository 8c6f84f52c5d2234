// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod check;
pub mod domain;
pub mod dual;
pub mod eigen;
pub mod error;
pub mod model1d;
pub mod norms;

pub use check::CheckReport;
pub use domain::{
    diameter, inscribed_wulff_radius, triangulate, ConvexPolygon, SmoothBoundaryCurve, TriMesh,
};
pub use dual::{cauchy_schwarz_gap, dual_norm, f_distance, wulff_contains, DualEval};
pub use error::{Error, Result};
pub use model1d::{match_model, solve_model, ModelMatch, OneDModel, OneDSolution};
pub use norms::{eval_norm, eval_tensors, regularize, Norm, NormSpec, NormTensors, Tensor3};
