//! Degenerate discounting `𝔗_λ v = T⁻((1 - λα) v) + c0` with a state-dependent weight `α`.

use serde::Serialize;

use crate::aubry::BarrierData;
use crate::error::{Error, Result};
use crate::fixed_point::{sup_abs, sup_diff, DiscountProblem, Orientation, SolveMethod};
use crate::mather::MatherFamily;
use crate::minplus::{apply_t_minus_with_argmin, ValueFunction};
use crate::space_cost::CostKernel;
use crate::tol::Tolerances;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegenerateWeight {
    alpha: Vec<f64>,
    lambda: f64,
}

impl DegenerateWeight {
    /// Checks `0 ≤ α < 1` pointwise and `0 < λ < 1`.
    pub fn new(alpha: Vec<f64>, lambda: f64) -> Result<Self> {
        if let Some((i, a)) = alpha.iter().enumerate().find(|(_, a)| !(**a >= 0.0 && **a < 1.0)) {
            return Err(Error::Weight(format!("alpha({i}) = {a} is outside [0, 1)")));
        }
        crate::minplus::check_lambda(lambda)?;
        Ok(Self { alpha, lambda })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.alpha.clone(), lambda)
    }

    /// `λα`, the per-state discount gaps.
    pub fn gaps(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| self.lambda * a).collect()
    }
}

/// Smallest `∫ α dπ₁*μ` over the extremals; errors unless it exceeds `eps`.
pub fn check_alpha_mass(alpha: &[f64], f: &MatherFamily, eps: f64) -> Result<f64> {
    if f.extremals.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let m = f
        .extremals
        .iter()
        .map(|mu| mu.marginal_integral(alpha))
        .fold(f64::INFINITY, f64::min);
    if m <= eps {
        return Err(Error::Weight(format!("a Mather measure gives alpha mass {m:e} <= {eps:e}")));
    }
    Ok(m)
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerateSolve {
    pub lambda: f64,
    pub u: ValueFunction,
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
    /// Largest `λ Σ_{k ≤ 0} β_k` over the backward calibrating chains of `u`.
    pub beta_sum: f64,
}

fn problem<'a>(c: &'a CostKernel, c0: f64, w: &DegenerateWeight) -> DiscountProblem<'a> {
    DiscountProblem {
        kernel: c,
        gaps: w.gaps(),
        shift: c0,
        orientation: Orientation::Backward,
    }
}

/// Default bound for the `λ Σ β` monitor: twice the value expected on a Mather cycle, plus slack.
pub fn default_beta_bound(min_alpha_mass: f64) -> f64 {
    2.0 / min_alpha_mass + 2.0
}

/// `λ Σ_{k ≤ 0} β_k` along the chain `x, policy(x), policy(policy(x)), …`, summed exactly.
pub fn beta_sums(policy: &[usize], gaps: &[f64], lambda: f64) -> Vec<f64> {
    let n = policy.len();
    (0..n)
        .map(|x0| {
            let mut pos = vec![usize::MAX; n];
            let mut partial = Vec::new();
            let mut beta = 1.0;
            let mut sum = 0.0;
            let mut x = x0;
            while pos[x] == usize::MAX {
                pos[x] = partial.len();
                partial.push((sum, beta));
                sum += beta;
                let y = policy[x];
                beta *= 1.0 - gaps[y];
                x = y;
            }
            // The chain cycles from index pos[x]: one period adds `sum - s0` scaled by β_period.
            let (s0, b0) = partial[pos[x]];
            let period_sum = sum - s0;
            let period_factor = beta / b0;
            let tail = if period_factor < 1.0 {
                period_sum / (1.0 - period_factor)
            } else {
                f64::INFINITY
            };
            lambda * (s0 + tail)
        })
        .collect()
}

/// Unique solution of `u = T⁻((1-λα)u) + c0` by policy iteration seeded from the
/// calibrating policy of the weak KAM solution `u1`.
pub fn solve_u_lambda_alpha(c: &CostKernel, c0: f64, w: &DegenerateWeight, u1: &ValueFunction, beta_bound: f64) -> Result<DegenerateSolve> {
    let tol = Tolerances::for_kernel(c);
    let (_, seed) = apply_t_minus_with_argmin(c, u1)?;
    let p = problem(c, c0, w);
    let fp = p.solve_policy(Some(seed), tol.fixed_point)?;
    finish(p, fp.values, fp.policy, fp.iterations, fp.method, w.lambda(), beta_bound, tol.fixed_point)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    p: DiscountProblem<'_>,
    values: Vec<f64>,
    policy: Vec<usize>,
    iterations: usize,
    method: SolveMethod,
    lambda: f64,
    beta_bound: f64,
    tol: f64,
) -> Result<DegenerateSolve> {
    let u = ValueFunction::new(values)?;
    let residual = p.residual(&u);
    let allowed = tol * (1.0 + u.sup_norm()) * 10.0;
    if residual > allowed {
        return Err(Error::Residual { residual, tol: allowed });
    }
    let beta_sum = beta_sums(&policy, &p.gaps, lambda).into_iter().fold(0.0, f64::max);
    if !(beta_sum < beta_bound) {
        return Err(Error::Weight(format!("lambda * sum(beta) = {beta_sum:e} exceeds the bound {beta_bound:e}")));
    }
    Ok(DegenerateSolve {
        lambda,
        u,
        residual,
        method,
        iterations,
        beta_sum,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Sandwich {
    pub lower: ValueFunction,
    pub upper: ValueFunction,
    pub gap: f64,
    pub iterations: usize,
}

/// Monotone iteration of `𝔗_λ` from `u1 - K` (non-decreasing) and `u1 + K`
/// (non-increasing), `K = max(‖c‖∞, ‖u1‖∞)`; both limits must coincide.
pub fn sandwich(c: &CostKernel, c0: f64, w: &DegenerateWeight, u1: &ValueFunction, max_iterations: usize) -> Result<Sandwich> {
    let tol = Tolerances::for_kernel(c);
    let k = c.sup_norm().max(u1.sup_norm());
    let p = problem(c, c0, w);
    let lower = monotone(&p, u1.shifted(-k).into_vec(), 1.0, max_iterations, tol.eps_num, tol.fixed_point)?;
    let upper = monotone(&p, u1.shifted(k).into_vec(), -1.0, max_iterations, tol.eps_num, tol.fixed_point)?;
    let gap = sup_diff(&lower.0, &upper.0);
    if gap > tol.eps_num {
        return Err(Error::SandwichMismatch(gap));
    }
    Ok(Sandwich {
        lower: ValueFunction::new(lower.0)?,
        upper: ValueFunction::new(upper.0)?,
        gap,
        iterations: lower.1.max(upper.1),
    })
}

fn monotone(p: &DiscountProblem<'_>, mut v: Vec<f64>, direction: f64, cap: usize, slack: f64, tol: f64) -> Result<(Vec<f64>, usize)> {
    for it in 1..=cap {
        let (next, _) = p.apply(&v);
        let mut diff = 0.0_f64;
        for (i, (a, b)) in next.iter().zip(&v).enumerate() {
            let jump = direction * (a - b);
            if jump < -slack {
                return Err(Error::NotMonotone { index: i, step: it, jump });
            }
            diff = diff.max(jump.abs());
        }
        v = next;
        if diff <= tol * (1.0 + sup_abs(&v)) {
            return Ok((v, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: cap,
        residual: p.residual(&v),
    })
}

/// `λ_k = 2^{-k}`, `k = 2..=20`.
pub fn default_schedule_to_zero() -> Vec<f64> {
    (2..=20).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerateLimit {
    pub u: ValueFunction,
    pub lambda: f64,
    pub last_diff: f64,
    pub history: Vec<(f64, Vec<f64>)>,
    pub max_beta_sum: f64,
}

/// `u₀^α = lim u_λ^α` as `λ → 0` along a decreasing schedule.
#[allow(clippy::too_many_arguments)]
pub fn limit_u0_alpha(
    c: &CostKernel,
    c0: f64,
    alpha: &[f64],
    schedule: &[f64],
    u1: &ValueFunction,
    f: &MatherFamily,
    limit_tol: f64,
    cauchy_tol: f64,
) -> Result<DegenerateLimit> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::OutOfRange("schedule must be non-empty and strictly decreasing".into()));
    }
    let eps_a = Tolerances::for_kernel(c).eps_aubry;
    let mass = check_alpha_mass(alpha, f, eps_a)?;
    let bound = default_beta_bound(mass);
    let mut history: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut last_diff = f64::INFINITY;
    let mut max_beta_sum = 0.0_f64;
    for &lambda in schedule {
        let w = DegenerateWeight::new(alpha.to_vec(), lambda)?;
        let s = solve_u_lambda_alpha(c, c0, &w, u1, bound)?;
        max_beta_sum = max_beta_sum.max(s.beta_sum);
        if let Some((_, prev)) = history.last() {
            last_diff = sup_diff(prev, &s.u);
        }
        history.push((lambda, s.u.into_vec()));
        if last_diff <= limit_tol {
            break;
        }
    }
    if history.len() > 1 && last_diff > cauchy_tol {
        return Err(Error::NotCauchy { diff: last_diff, tol: cauchy_tol });
    }
    let (lambda, values) = history.last().cloned().expect("non-empty schedule");
    Ok(DegenerateLimit {
        u: ValueFunction::new(values)?,
        lambda,
        last_diff,
        history,
        max_beta_sum,
    })
}

/// `u₀^α(x) = min over extremal μ of ∫ α(y) h(y, x) dπ₁*μ(y) / ∫ α dπ₁*μ`.
pub fn formula_u0_alpha(b: &BarrierData, f: &MatherFamily, alpha: &[f64], eps_a: f64) -> Result<ValueFunction> {
    check_alpha_mass(alpha, f, eps_a)?;
    let n = b.n();
    let values = (0..n)
        .map(|x| {
            let weighted: Vec<f64> = (0..n).map(|y| alpha[y] * b.h[(y, x)]).collect();
            f.extremals
                .iter()
                .map(|mu| mu.marginal_integral(&weighted) / mu.marginal_integral(alpha))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    ValueFunction::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aubry::{aubry_sets, peierls_barrier};
    use crate::discounted::formula_u1;
    use crate::mather::{extremal_measures, DEFAULT_CYCLE_CAP};
    use crate::space_cost::build_dense_cost;

    fn two_point() -> CostKernel {
        build_dense_cost(2, vec![vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap()
    }

    #[test]
    fn weight_validation() {
        assert!(matches!(DegenerateWeight::new(vec![1.0, 0.0], 0.5), Err(Error::Weight(_))));
        assert!(matches!(DegenerateWeight::new(vec![-0.1, 0.0], 0.5), Err(Error::Weight(_))));
        assert!(DegenerateWeight::new(vec![0.5, 0.0], 1.5).is_err());
        assert!(DegenerateWeight::new(vec![0.5, 0.0], 0.1).is_ok());
    }

    #[test]
    fn two_point_degenerate() {
        let c = two_point();
        let b = peierls_barrier(&c, 0.0).unwrap();
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        let f = extremal_measures(&c, 0.0, &a, DEFAULT_CYCLE_CAP).unwrap();
        let u1 = formula_u1(&b, &f).unwrap().u;
        let w = DegenerateWeight::new(vec![0.5, 0.0], 0.1).unwrap();
        let s = solve_u_lambda_alpha(&c, 0.0, &w, &u1, 1e3).unwrap();
        // Aubry point a: u(a) = 0.95 u(a) => 0; then u(b) = min(u(a) + 2, u(b) + 1) = 2.
        assert!(s.u.sup_distance(&ValueFunction::new(vec![0.0, 2.0]).unwrap()) < 1e-12);
        let sw = sandwich(&c, 0.0, &w, &u1, 100_000).unwrap();
        assert!(sw.lower.sup_distance(&s.u) < 1e-9);
        let u0 = formula_u0_alpha(&b, &f, &[0.3, 0.9], 1e-6).unwrap();
        assert_eq!(u0.values(), &[0.0, 2.0]);
        assert!(check_alpha_mass(&[0.0, 0.9], &f, 1e-6).is_err());
    }

    #[test]
    fn beta_sum_of_a_loop() {
        // Self-loop with gap g: λ Σ (1-g)^k = λ / g.
        let s = beta_sums(&[0], &[0.25], 0.5);
        assert!((s[0] - 2.0).abs() < 1e-12);
    }
}
