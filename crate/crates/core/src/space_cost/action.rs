use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{wrap_displacement, CostKernel, FiniteSpace};
use crate::error::{Error, Result};
use crate::matrix::{minplus_product_with_argmin, SquareMatrix};

/// Potential `V` on the circle `[0, 1)`.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `V(x) = -scale · sin²(πx) · sin²(π(x - well))`: two maxima, at `0` and `well`, both equal to 0.
    TwoWell { well: f64, scale: f64 },
    /// `V(x) = amplitude · (cos(2πx) - 1)`.
    Cosine { amplitude: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::TwoWell { well, scale } => write!(f, "TwoWell {{ well: {well}, scale: {scale} }}"),
            Potential::Cosine { amplitude } => write!(f, "Cosine {{ amplitude: {amplitude} }}"),
            Potential::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Potential {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::TwoWell { well, scale } => {
                let a = (PI * x).sin();
                let b = (PI * (x - well)).sin();
                -scale * a * a * b * b
            }
            Potential::Cosine { amplitude } => amplitude * ((2.0 * PI * x).cos() - 1.0),
            Potential::Custom(f) => f(x),
        }
    }
}

/// Time-one action of `L_c(x, v) = v²/2 - V(x) - c·v` discretized on a circle grid.
#[derive(Clone, Debug)]
pub struct ActionDiscretization {
    pub grid_n: usize,
    pub steps_m: usize,
    pub potential: Potential,
    pub cohomology_c: f64,
    /// Upper bound on `steps_m · grid_n`.
    pub budget: usize,
}

impl ActionDiscretization {
    pub const DEFAULT_BUDGET: usize = 100_000;

    pub fn new(grid_n: usize, steps_m: usize, potential: Potential, cohomology_c: f64) -> Self {
        Self {
            grid_n,
            steps_m,
            potential,
            cohomology_c,
            budget: Self::DEFAULT_BUDGET,
        }
    }

    fn check(&self) -> Result<()> {
        if self.steps_m == 0 {
            return Err(Error::OutOfRange("steps_m must be >= 1".into()));
        }
        let needed = self.steps_m.saturating_mul(self.grid_n);
        if needed > self.budget {
            return Err(Error::BudgetExceeded {
                needed,
                budget: self.budget,
            });
        }
        let h = 1.0 / self.grid_n as f64;
        for i in 0..self.grid_n {
            let v = self.potential.eval(i as f64 * h);
            if !v.is_finite() || v > 1e-12 {
                return Err(Error::OutOfRange(format!("potential must be finite and <= 0 on the grid, V({}) = {v}", i as f64 * h)));
            }
        }
        Ok(())
    }

    /// Single sub-step kernel with `τ = 1/steps_m`, midpoint rule, minimal-modulus lift.
    pub fn one_step(&self) -> Result<CostKernel> {
        self.check()?;
        let n = self.grid_n;
        let tau = 1.0 / self.steps_m as f64;
        let h = 1.0 / n as f64;
        let mut cost = SquareMatrix::filled(n, 0.0);
        let mut lifts = SquareMatrix::filled(n, 0.0);
        for i in 0..n {
            let x = i as f64 * h;
            for j in 0..n {
                let d = wrap_displacement(j as f64 * h - x);
                let v = d / tau;
                let mid = (x + 0.5 * d).rem_euclid(1.0);
                cost[(i, j)] = tau * (0.5 * v * v - self.potential.eval(mid)) - self.cohomology_c * d;
                lifts[(i, j)] = d;
            }
        }
        CostKernel::from_matrix(FiniteSpace::circle(n)?, cost)?.with_lifts(lifts)
    }
}

/// Min-plus product of two circle kernels, carrying the lift along the minimizing path.
pub fn compose(a: &CostKernel, b: &CostKernel) -> Result<CostKernel> {
    let (la, lb) = match (a.lifts(), b.lifts()) {
        (Some(la), Some(lb)) => (la, lb),
        _ => return Err(Error::NotCircle),
    };
    let (prod, arg) = minplus_product_with_argmin(&a.to_dense(), &b.to_dense());
    let n = a.n();
    let lifts = SquareMatrix::from_fn(n, |x, y| {
        let z = arg[x * n + y];
        if z == usize::MAX {
            0.0
        } else {
            la[(x, z)] + lb[(z, y)]
        }
    });
    CostKernel::from_matrix(a.space().clone(), prod)?.with_lifts(lifts)
}

/// `steps_m`-fold min-plus power of the one-step kernel, folded from the left.
pub fn build_action_cost(a: &ActionDiscretization) -> Result<CostKernel> {
    let step = a.one_step()?;
    let mut acc = step.clone();
    for _ in 1..a.steps_m {
        acc = compose(&acc, &step)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_particle_single_step() {
        let a = ActionDiscretization::new(4, 1, Potential::Zero, 0.0);
        let c = build_action_cost(&a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d = wrap_displacement((j as f64 - i as f64) / 4.0);
                assert_eq!(c.entry(i, j), 0.5 * d * d);
            }
        }
    }

    #[test]
    fn positive_potential_rejected() {
        let a = ActionDiscretization::new(8, 2, Potential::Cosine { amplitude: -1.0 }, 0.0);
        assert!(matches!(a.one_step(), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn budget_enforced() {
        let mut a = ActionDiscretization::new(100, 50, Potential::Zero, 0.0);
        a.budget = 1000;
        assert!(matches!(build_action_cost(&a), Err(Error::BudgetExceeded { .. })));
        a.steps_m = 0;
        a.budget = usize::MAX;
        assert!(matches!(build_action_cost(&a), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn composition_splits_agree() {
        let a = ActionDiscretization::new(24, 5, Potential::TwoWell { well: 0.3, scale: 1.0 }, 0.2);
        let full = build_action_cost(&a).unwrap();
        let step = a.one_step().unwrap();
        let mut powers = vec![step.clone()];
        for _ in 1..5 {
            let next = compose(powers.last().unwrap(), &step).unwrap();
            powers.push(next);
        }
        let scale = 1.0 + full.sup_norm();
        for m1 in 1..5 {
            let split = compose(&powers[m1 - 1], &powers[5 - m1 - 1]).unwrap();
            let d = split.to_dense().sup_distance(&full.to_dense());
            assert!(d <= 1e-13 * scale, "m1={m1}: {d}");
        }
        // Left fold reproduces build_action_cost bit for bit.
        assert_eq!(powers[4].to_dense().as_slice(), full.to_dense().as_slice());
    }

    #[test]
    fn lifts_track_composed_displacement() {
        let a = ActionDiscretization::new(16, 4, Potential::Zero, 0.0);
        let c = build_action_cost(&a).unwrap();
        // Free motion: straight path, total displacement is the minimal-modulus one.
        for j in 0..16 {
            let d = c.lift(0, j).unwrap();
            assert!((d - wrap_displacement(j as f64 / 16.0)).abs() < 1e-12 || (j == 8 && (d.abs() - 0.5).abs() < 1e-12));
        }
    }
}
