use serde::{Deserialize, Serialize};

use crate::space_cost::CostKernel;

/// Numerical tolerances, scaled by `1 + ‖c‖∞` of the kernel they are used with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Slack for barrier identities and fixed-point residual checks.
    pub eps_num: f64,
    /// Membership threshold for the Aubry sets and Mather cycles.
    pub eps_aubry: f64,
    /// Relative sup-norm residual at which fixed-point iterations stop.
    pub fixed_point: f64,
    pub max_iterations: usize,
}

impl Tolerances {
    pub fn for_scale(sup_norm: f64) -> Self {
        let s = 1.0 + sup_norm;
        Self {
            eps_num: 1e-9 * s,
            eps_aubry: 1e-6 * s,
            fixed_point: 1e-12,
            max_iterations: 1_000_000,
        }
    }

    pub fn for_kernel(c: &CostKernel) -> Self {
        Self::for_scale(c.sup_norm())
    }
}
