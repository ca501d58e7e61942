//! Discrete weak KAM theory on finite spaces.
//!
//! The crate computes, for a cost kernel `c` on a finite set, the critical
//! constant, weak KAM solutions, the Peierls barrier, the Aubry and Mather
//! sets, the discounted and degenerate-discounted selected solutions, and the
//! Aubry–Mather quantities of exact twist maps on the circle.

pub mod aubry;
pub mod discounted;
pub mod error;
pub mod fixed_point;
pub mod io;
pub mod mather;
pub mod matrix;
pub mod minplus;
pub mod space_cost;
pub mod tol;
pub mod twist;

pub use error::{Error, Result};
pub use matrix::SquareMatrix;
pub use minplus::{CriticalValue, ValueFunction};
pub use space_cost::{CostKernel, FiniteSpace};
pub use tol::Tolerances;
