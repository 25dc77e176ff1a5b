//! Least-action paths for the opposite squared distance potential of a
//! finite point set `K ⊂ ℝ^d`.
//!
//! The crate is layered bottom-up:
//!
//! * [`geometry`]: point sets, optimality classes, minimum-norm points of
//!   convex hulls, Voronoi cell frames and polytopes.
//! * [`potential`]: `f_K`, `g_K`, the extended gradient `η(x) − x`,
//!   potential zones and balancedness.
//! * [`action`]: the discretized action functional, its minimizer, a
//!   layered-graph dynamic programming oracle and a convex-constrained
//!   variant.
//! * [`analysis`]: energy, shocks, jump identities and regularity checks on
//!   computed paths.
//! * [`mag`]: the discrete Monge-Ampère gravitational point sets.
//! * [`io`]: text formats for point sets, polytopes and trajectories.

pub mod action;
pub mod analysis;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod mag;
pub mod potential;

pub use error::{Error, Result};
