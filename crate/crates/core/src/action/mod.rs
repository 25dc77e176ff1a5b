//! The discretized action functional, its minimizer, a dynamic programming
//! oracle and a convex-constrained variant.

mod constrained;
mod dp;
mod functional;
mod path;
mod shape;
mod solver;

pub use constrained::{constrained_minimize, ConstrainedResult};
pub use dp::{dp_oracle, seed_grid, DpResult, GridSpec, NODE_BUDGET};
pub use functional::{action_gradient, evaluate_action, ActionBreakdown};
pub(crate) use functional::{node_state, node_states};
pub use path::Path;
pub use shape::Shape;
pub use solver::{minimize, SolveResult, SolverConfig, StageRecord, StartRecord};
