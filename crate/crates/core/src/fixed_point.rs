//! Fixed points of discounted Lax–Oleinik operators
//!
//! ```text
//! backward: w(x) = min_y (1 - g(y)) w(y) + c(y, x) + shift
//! forward:  w(x) = max_y (1 - g(y)) w(y) - c(x, y) - shift
//! ```
//!
//! with per-state discount gaps `g(y) ∈ [0, 1)`. The forward problem is the
//! negation of the backward problem on the transposed kernel. Two solvers are
//! provided: Banach iteration from zero, and Howard policy iteration whose
//! evaluation step solves each policy's functional graph exactly.

use crate::error::{Error, Result};
use crate::space_cost::CostKernel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Backward,
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Banach,
    Policy,
}

/// Work budget (kernel entry evaluations) under which Banach iteration is preferred.
pub const BANACH_WORK_BUDGET: f64 = 5e7;

#[derive(Clone, Debug)]
pub struct DiscountProblem<'a> {
    pub kernel: &'a CostKernel,
    /// `1 - discount` per source state.
    pub gaps: Vec<f64>,
    pub shift: f64,
    pub orientation: Orientation,
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub values: Vec<f64>,
    /// Minimizing (backward) or maximizing (forward) partner per state.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// `‖w - Φ(w)‖∞`.
    pub residual: f64,
    pub method: SolveMethod,
}

impl<'a> DiscountProblem<'a> {
    pub fn uniform(kernel: &'a CostKernel, gap: f64, shift: f64, orientation: Orientation) -> Self {
        Self {
            kernel,
            gaps: vec![gap; kernel.n()],
            shift,
            orientation,
        }
    }

    #[inline]
    fn arc(&self, y: usize, x: usize) -> f64 {
        match self.orientation {
            Orientation::Backward => self.kernel.entry(y, x),
            Orientation::Forward => self.kernel.entry(x, y),
        }
    }

    /// Backward-normalized operator: forward problems are handled on `-w`.
    fn apply_normalized(&self, w: &[f64], out: &mut [f64], arg: &mut [usize]) {
        let n = self.kernel.n();
        for x in 0..n {
            let mut best = f64::INFINITY;
            let mut best_y = usize::MAX;
            for y in self.kernel.sources(x) {
                let c = self.arc(y, x);
                if !c.is_finite() {
                    continue;
                }
                let v = (1.0 - self.gaps[y]) * w[y] + c + self.shift;
                if v < best {
                    best = v;
                    best_y = y;
                }
            }
            out[x] = best;
            arg[x] = best_y;
        }
    }

    fn normalize(&self, w: &[f64]) -> Vec<f64> {
        match self.orientation {
            Orientation::Backward => w.to_vec(),
            Orientation::Forward => w.iter().map(|v| -v).collect(),
        }
    }

    /// One application of the operator in the problem's own orientation.
    pub fn apply(&self, w: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let n = self.kernel.n();
        let z = self.normalize(w);
        let mut out = vec![0.0; n];
        let mut arg = vec![0; n];
        self.apply_normalized(&z, &mut out, &mut arg);
        (self.normalize(&out), arg)
    }

    pub fn residual(&self, w: &[f64]) -> f64 {
        let (tw, _) = self.apply(w);
        sup_diff(w, &tw)
    }

    fn banach_cap(&self, tol: f64) -> usize {
        let min_gap = self.gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_gap <= 0.0 {
            return usize::MAX;
        }
        let rate = (-min_gap).ln_1p();
        (((tol * min_gap).ln() / rate).ceil() as usize).saturating_add(64)
    }

    /// Banach when affordable, policy iteration otherwise.
    pub fn solve(&self, tol: f64, max_iterations: usize) -> Result<FixedPoint> {
        self.solve_seeded(None, tol, max_iterations)
    }

    /// As [`solve`](Self::solve), warm-starting policy iteration from `seed` when it is used.
    pub fn solve_seeded(&self, seed: Option<Vec<usize>>, tol: f64, max_iterations: usize) -> Result<FixedPoint> {
        let cap = self.banach_cap(tol);
        let work = cap as f64 * self.work_per_sweep();
        if cap <= max_iterations && work <= BANACH_WORK_BUDGET {
            self.solve_banach(tol, cap)
        } else {
            self.solve_policy(seed, tol)
        }
    }

    fn work_per_sweep(&self) -> f64 {
        let n = self.kernel.n() as f64;
        match self.kernel.window() {
            Some(w) => n * (2 * w + 1).min(self.kernel.n()) as f64,
            None => n * n,
        }
    }

    /// Banach iteration from `0` until the a-posteriori error bound
    /// `‖Φw - w‖·(1-g)/g` drops below `tol·(1 + ‖w‖)`, `g` the smallest gap.
    pub fn solve_banach(&self, tol: f64, cap: usize) -> Result<FixedPoint> {
        let n = self.kernel.n();
        let min_gap = self.gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let factor = if min_gap > 0.0 { (1.0 - min_gap) / min_gap } else { f64::INFINITY };
        let mut w = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut arg = vec![0; n];
        for it in 1..=cap {
            self.apply_normalized(&w, &mut next, &mut arg);
            let diff = sup_diff(&w, &next);
            std::mem::swap(&mut w, &mut next);
            // With tiny gaps the bound can sit below rounding; once the step is
            // at the ulp level the iterates cannot improve further.
            let stalled = diff <= 8.0 * f64::EPSILON * (1.0 + sup_abs(&w));
            if diff * factor <= tol * (1.0 + sup_abs(&w)) || stalled {
                // The greedy policy is usually optimal by now; its exact values remove the truncation error.
                self.apply_normalized(&w, &mut next, &mut arg);
                let mut values = self.normalize(&w);
                let mut residual = self.residual(&values);
                let exact = self.normalize(&self.evaluate(&arg));
                let exact_residual = self.residual(&exact);
                if exact_residual <= residual {
                    values = exact;
                    residual = exact_residual;
                }
                return Ok(FixedPoint {
                    values,
                    policy: arg,
                    iterations: it,
                    residual,
                    method: SolveMethod::Banach,
                });
            }
        }
        // Rounding noise kept the bound from closing: the greedy policy is a
        // near-optimal seed for exact policy iteration.
        self.apply_normalized(&w, &mut next, &mut arg);
        self.solve_policy(Some(arg), tol)
    }

    /// Howard policy iteration, optionally seeded with a policy whose values are finite.
    pub fn solve_policy(&self, seed: Option<Vec<usize>>, tol: f64) -> Result<FixedPoint> {
        let n = self.kernel.n();
        let mut policy = match seed {
            Some(p) => p,
            None => {
                let mut out = vec![0.0; n];
                let mut arg = vec![0; n];
                self.apply_normalized(&vec![0.0; n], &mut out, &mut arg);
                arg
            }
        };
        let mut w = self.evaluate(&policy);
        let mut next = vec![0.0; n];
        let mut arg = vec![0; n];
        let cap = 50 * n + 100;
        for it in 1..=cap {
            self.apply_normalized(&w, &mut next, &mut arg);
            let mut changed = false;
            for x in 0..n {
                let improves = if w[x].is_finite() {
                    next[x] < w[x] - 1e-13 * (1.0 + w[x].abs())
                } else {
                    next[x] < w[x]
                };
                if arg[x] != policy[x] && improves {
                    policy[x] = arg[x];
                    changed = true;
                }
            }
            if !changed {
                let values = self.normalize(&w);
                let residual = self.residual(&values);
                if residual > tol * (1.0 + sup_abs(&values)) && residual.is_finite() {
                    // Rounding stalls: finish with a few Banach sweeps from the policy values.
                    return self.polish(values, policy, it, tol);
                }
                return Ok(FixedPoint {
                    values,
                    policy,
                    iterations: it,
                    residual,
                    method: SolveMethod::Policy,
                });
            }
            w = self.evaluate(&policy);
        }
        Err(Error::NoConvergence {
            iterations: cap,
            residual: self.residual(&self.normalize(&w)),
        })
    }

    fn polish(&self, values: Vec<f64>, policy: Vec<usize>, iterations: usize, tol: f64) -> Result<FixedPoint> {
        let mut w = self.normalize(&values);
        let n = w.len();
        let mut next = vec![0.0; n];
        let mut arg = policy;
        for k in 0..1000 {
            self.apply_normalized(&w, &mut next, &mut arg);
            let diff = sup_diff(&w, &next);
            std::mem::swap(&mut w, &mut next);
            if diff <= tol * (1.0 + sup_abs(&w)) {
                let values = self.normalize(&w);
                let residual = self.residual(&values);
                return Ok(FixedPoint {
                    values,
                    policy: arg,
                    iterations: iterations + k + 1,
                    residual,
                    method: SolveMethod::Policy,
                });
            }
        }
        let values = self.normalize(&w);
        let residual = self.residual(&values);
        Err(Error::Residual {
            residual,
            tol: tol * (1.0 + sup_abs(&values)),
        })
    }

    /// Exact values of a fixed policy (normalized orientation). Cycles without
    /// discount yield `+inf` unless their reward sum vanishes.
    pub(crate) fn evaluate(&self, policy: &[usize]) -> Vec<f64> {
        let n = policy.len();
        let reward = |x: usize| self.arc(policy[x], x) + self.shift;
        let mut w = vec![f64::NAN; n];
        // 0 = unseen, 1 = on current path, 2 = done
        let mut state = vec![0u8; n];
        let mut path = Vec::new();
        for start in 0..n {
            if state[start] != 0 {
                continue;
            }
            path.clear();
            let mut x = start;
            while state[x] == 0 {
                state[x] = 1;
                path.push(x);
                x = policy[x];
            }
            let mut tail_end = path.len();
            if state[x] == 1 {
                let pos = path.iter().position(|&p| p == x).expect("on path");
                let cycle = &path[pos..];
                let len = cycle.len();
                // w(x0) = S / (1 - P), S = Σ_k (Π_{j=1..k} d(x_j)) r(x_k), P = Π_{j=1..L} d(x_j)
                let mut s = 0.0;
                let mut prod = 1.0;
                let mut log_p = 0.0;
                for k in 0..len {
                    s += prod * reward(cycle[k]);
                    let nxt = cycle[(k + 1) % len];
                    prod *= 1.0 - self.gaps[nxt];
                    log_p += (-self.gaps[nxt]).ln_1p();
                }
                let one_minus_p = -log_p.exp_m1();
                let w0 = if one_minus_p > 0.0 {
                    s / one_minus_p
                } else if s.abs() <= 1e-12 * len as f64 {
                    0.0
                } else {
                    f64::INFINITY
                };
                w[cycle[0]] = w0;
                for k in (1..len).rev() {
                    let nxt = cycle[(k + 1) % len];
                    w[cycle[k]] = (1.0 - self.gaps[nxt]) * w[nxt] + reward(cycle[k]);
                }
                for &c in cycle {
                    state[c] = 2;
                }
                tail_end = pos;
            }
            for &p in path[..tail_end].iter().rev() {
                let y = policy[p];
                w[p] = (1.0 - self.gaps[y]) * w[y] + reward(p);
                state[p] = 2;
            }
        }
        w
    }
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| {
        if x == y {
            m
        } else {
            m.max((x - y).abs())
        }
    })
}

pub fn sup_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_cost::build_dense_cost;

    fn two_point() -> CostKernel {
        build_dense_cost(2, vec![vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap()
    }

    #[test]
    fn banach_and_policy_agree_on_two_point() {
        let c = two_point();
        for lambda in [0.25, 0.75, 0.99] {
            let p = DiscountProblem::uniform(&c, 1.0 - lambda, 0.0, Orientation::Backward);
            let a = p.solve_banach(1e-13, 100_000).unwrap();
            let b = p.solve_policy(None, 1e-13).unwrap();
            assert!(sup_diff(&a.values, &b.values) < 1e-9, "{lambda}: {:?} {:?}", a.values, b.values);
        }
    }

    #[test]
    fn forward_is_negated_transpose() {
        let c = build_dense_cost(3, vec![vec![1.0, 0.5, 2.0], vec![0.0, 3.0, 1.0], vec![2.0, 2.0, 0.25]]).unwrap();
        let fwd = DiscountProblem::uniform(&c, 0.1, 0.0, Orientation::Forward).solve_policy(None, 1e-13).unwrap();
        let ct = c.transpose();
        let bwd = DiscountProblem::uniform(&ct, 0.1, 0.0, Orientation::Backward).solve_policy(None, 1e-13).unwrap();
        for (a, b) in fwd.values.iter().zip(&bwd.values) {
            assert!((a + b).abs() < 1e-12);
        }
        assert!(fwd.residual < 1e-12);
    }

    #[test]
    fn policy_handles_lambda_near_one() {
        let c = two_point();
        let gap = 2f64.powi(-24);
        let p = DiscountProblem::uniform(&c, gap, 0.0, Orientation::Backward);
        let fp = p.solve(1e-12, 1_000_000).unwrap();
        assert_eq!(fp.method, SolveMethod::Policy);
        assert!((fp.values[0]).abs() < 1e-9);
        assert!((fp.values[1] - 2.0).abs() < 1e-9);
    }
}
