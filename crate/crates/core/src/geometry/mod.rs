//! Point sets, optimality classes, minimum-norm points, Voronoi cell frames
//! and polytopes.

mod frame;
mod minnorm;
mod pointset;
mod polytope;

pub use frame::{affine_frame, cell_frame, AffineFrame, CellFrame};
pub use minnorm::{min_norm_point, min_norm_point_faces, min_norm_point_wolfe};
pub use pointset::{opt_class, OptClass, PointSet, MAX_DIM};
pub use polytope::{polytope_distance_ratio, Halfspace, Polytope};
