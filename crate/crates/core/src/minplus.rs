//! Lax–Oleinik operators, min-plus powers and the critical constant.
//!
//! Sign conventions: `T⁻f(x) = min_y f(y) + c(y, x)`, `T⁺f(x) = max_y f(y) - c(x, y)`,
//! and the critical constant `c0` is the unique real making `u = T⁻u + c0`
//! solvable. On a finite space `c0` is minus the minimum cycle mean of `c`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{sup_abs, sup_diff, DiscountProblem, Orientation};
use crate::matrix::{minplus_product, SquareMatrix};
use crate::space_cost::CostKernel;
use crate::tol::Tolerances;

/// Real-valued function on the points of a finite space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, k: f64) -> Self {
        Self(vec![k; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        sup_abs(&self.0)
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        sup_diff(&self.0, &other.0)
    }

    pub fn shifted(&self, k: f64) -> ValueFunction {
        Self(self.0.iter().map(|v| v + k).collect())
    }

    pub fn scaled(&self, k: f64) -> ValueFunction {
        Self(self.0.iter().map(|v| v * k).collect())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Entrywise `self ≤ other + tol`.
    pub fn le(&self, other: &ValueFunction, tol: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + tol)
    }

    pub fn pointwise_min(&self, other: &ValueFunction) -> ValueFunction {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a.min(*b)).collect())
    }
}

impl Deref for ValueFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(c: &CostKernel, f: &[f64]) -> Result<()> {
    if c.n() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: c.n(),
            found: f.len(),
        });
    }
    Ok(())
}

/// `T⁻f` together with the minimizing source per point (ties to the smallest index).
pub fn apply_t_minus_with_argmin(c: &CostKernel, f: &ValueFunction) -> Result<(ValueFunction, Vec<usize>)> {
    check_len(c, f)?;
    let n = c.n();
    let mut out = vec![f64::INFINITY; n];
    let mut arg = vec![usize::MAX; n];
    for x in 0..n {
        for y in c.sources(x) {
            let v = f[y] + c.entry(y, x);
            if v < out[x] {
                out[x] = v;
                arg[x] = y;
            }
        }
    }
    Ok((ValueFunction(out), arg))
}

pub fn apply_t_minus(c: &CostKernel, f: &ValueFunction) -> Result<ValueFunction> {
    apply_t_minus_with_argmin(c, f).map(|(v, _)| v)
}

/// `T⁺f` together with the maximizing target per point.
pub fn apply_t_plus_with_argmax(c: &CostKernel, f: &ValueFunction) -> Result<(ValueFunction, Vec<usize>)> {
    check_len(c, f)?;
    let n = c.n();
    let mut out = vec![f64::NEG_INFINITY; n];
    let mut arg = vec![usize::MAX; n];
    for x in 0..n {
        for y in c.targets(x) {
            let v = f[y] - c.entry(x, y);
            if v > out[x] {
                out[x] = v;
                arg[x] = y;
            }
        }
    }
    Ok((ValueFunction(out), arg))
}

pub fn apply_t_plus(c: &CostKernel, f: &ValueFunction) -> Result<ValueFunction> {
    apply_t_plus_with_argmax(c, f).map(|(v, _)| v)
}

/// Discounted operator `T⁻_λ f = T⁻(λ f)`, a `λ`-contraction.
pub fn apply_t_lambda(c: &CostKernel, f: &ValueFunction, lambda: f64) -> Result<ValueFunction> {
    check_lambda(lambda)?;
    apply_t_minus(c, &f.scaled(lambda))
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::OutOfRange(format!("discount factor must lie in (0, 1), got {lambda}")));
    }
    Ok(())
}

/// Largest number of matrix entries `minplus_power` will hold.
pub const POWER_MEMORY_BUDGET: usize = 50_000_000;

/// Min-plus powers `c_1 = c, c_{k+1} = c_k ⊗ c` for `k < n`.
pub fn minplus_power(c: &CostKernel, n: usize) -> Result<Vec<SquareMatrix>> {
    if n == 0 {
        return Err(Error::OutOfRange("power index must be >= 1".into()));
    }
    let needed = n.saturating_mul(c.n() * c.n());
    if needed > POWER_MEMORY_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: POWER_MEMORY_BUDGET,
        });
    }
    let base = c.to_dense().into_owned();
    let mut out = Vec::with_capacity(n);
    out.push(base.clone());
    for k in 1..n {
        let next = minplus_product(&out[k - 1], &base);
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMethod {
    Karp,
    Discounted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    pub method: CriticalMethod,
    /// Karp: gap between the recovered cycle's mean and the Karp mean.
    /// Discounted: spread of `-(1-λ)u_λ` over the space at the last `λ`.
    pub residual: f64,
}

/// Minimum cycle mean of the kernel together with one cycle attaining it.
pub fn min_mean_cycle(c: &CostKernel) -> (f64, Vec<usize>) {
    let m = c.to_dense();
    let n = m.n();
    // d[k][v]: minimal weight of a k-arc walk ending at v, from any start.
    let mut d = vec![f64::INFINITY; (n + 1) * n];
    let mut pred = vec![usize::MAX; (n + 1) * n];
    d[..n].fill(0.0);
    for k in 1..=n {
        let (prev, cur) = d.split_at_mut(k * n);
        let prev = &prev[(k - 1) * n..];
        let cur = &mut cur[..n];
        let pk = &mut pred[k * n..(k + 1) * n];
        for (u, &du) in prev.iter().enumerate() {
            if !du.is_finite() {
                continue;
            }
            let row = m.row(u);
            for v in 0..n {
                let val = du + row[v];
                if val < cur[v] {
                    cur[v] = val;
                    pk[v] = u;
                }
            }
        }
    }
    let dn = &d[n * n..];
    let mut best = f64::INFINITY;
    let mut best_v = usize::MAX;
    for v in 0..n {
        if !dn[v].is_finite() {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            let dk = d[k * n + v];
            if dk.is_finite() {
                worst = worst.max((dn[v] - dk) / (n - k) as f64);
            }
        }
        if worst < best {
            best = worst;
            best_v = v;
        }
    }
    // The n-arc walk ending at best_v repeats a vertex; any cycle on it has minimal mean.
    let mut walk = vec![best_v];
    let mut v = best_v;
    for k in (1..=n).rev() {
        v = pred[k * n + v];
        walk.push(v);
    }
    walk.reverse();
    let cycle = extract_min_cycle(&m, &walk);
    (best, cycle)
}

fn extract_min_cycle(m: &SquareMatrix, walk: &[usize]) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut last_seen = std::collections::HashMap::new();
    for (pos, &v) in walk.iter().enumerate() {
        if let Some(&start) = last_seen.get(&v) {
            let cyc: Vec<usize> = walk[start..pos].to_vec();
            let mean = cycle_mean(m, &cyc);
            if best.as_ref().map_or(true, |(b, _)| mean < *b) {
                best = Some((mean, cyc));
            }
        }
        last_seen.insert(v, pos);
    }
    best.map(|(_, c)| c).unwrap_or_default()
}

/// Mean arc cost of the closed cycle `v_0 → v_1 → … → v_0`.
pub fn cycle_mean(m: &SquareMatrix, cycle: &[usize]) -> f64 {
    let len = cycle.len();
    (0..len).map(|k| m[(cycle[k], cycle[(k + 1) % len])]).sum::<f64>() / len as f64
}

pub fn critical_value_karp(c: &CostKernel) -> CriticalValue {
    let (mean, cycle) = min_mean_cycle(c);
    let residual = if cycle.is_empty() {
        f64::INFINITY
    } else {
        (cycle_mean(&c.to_dense(), &cycle) - mean).abs()
    };
    CriticalValue {
        value: -mean,
        method: CriticalMethod::Karp,
        residual,
    }
}

/// `λ_k = 1 - 2^{-k}`, `k = 4..=24`.
pub fn default_schedule_to_one() -> Vec<f64> {
    (4..=24).map(|k| 1.0 - 2f64.powi(-k)).collect()
}

/// Critical value as the limit of `-(1-λ) u_λ(x₀)` along an increasing schedule.
pub fn critical_value_discounted(c: &CostKernel, schedule: &[f64]) -> Result<CriticalValue> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::OutOfRange("schedule must be non-empty and strictly increasing".into()));
    }
    let tol = Tolerances::for_kernel(c);
    let mut estimates = Vec::with_capacity(schedule.len());
    let mut spread = 0.0;
    for &lambda in schedule {
        check_lambda(lambda)?;
        let gap = 1.0 - lambda;
        let fp = DiscountProblem::uniform(c, gap, 0.0, Orientation::Backward).solve(tol.fixed_point, tol.max_iterations)?;
        let est: Vec<f64> = fp.values.iter().map(|u| -gap * u).collect();
        let hi = est.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = est.iter().cloned().fold(f64::INFINITY, f64::min);
        spread = hi - lo;
        estimates.push((gap, est[0]));
    }
    // |-(1-λ)u_λ - c0| ≤ (1-λ)·B with B bounding u_λ + c0/(1-λ).
    let bound = 2.0 * c.n() as f64 * (2.0 * c.sup_norm()) + 1.0;
    if let [.., (g_prev, e_prev), (g_last, e_last)] = estimates[..] {
        let allowed = (g_prev + g_last) * bound;
        let diff = (e_last - e_prev).abs();
        if diff > allowed {
            return Err(Error::NotCauchy { diff, tol: allowed });
        }
    }
    // (1-λ)u_λ = -c0 + (1-λ)w_λ with w_λ = u₁ + O(1-λ): eliminating the
    // first-order term between the last two entries leaves an O((1-λ)²) error.
    let value = match estimates[..] {
        [.., (g1, a1), (g2, a2)] => (g1 * a2 - g2 * a1) / (g1 - g2),
        _ => estimates[0].1,
    };
    Ok(CriticalValue {
        value,
        method: CriticalMethod::Discounted,
        residual: spread,
    })
}

/// Karp on dense kernels, the discounted route on callable ones.
pub fn critical_value(c: &CostKernel) -> Result<CriticalValue> {
    if c.is_dense() {
        Ok(critical_value_karp(c))
    } else {
        critical_value_discounted(c, &default_schedule_to_one())
    }
}

/// `‖T⁻ⁿv / n + c0‖∞`.
pub fn asymptotic_rate(c: &CostKernel, v: &ValueFunction, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be >= 1".into()));
    }
    let c0 = critical_value(c)?.value;
    let mut f = v.clone();
    for _ in 0..n {
        f = apply_t_minus(c, &f)?;
    }
    Ok(f.iter().fold(0.0_f64, |m, x| m.max((x / n as f64 + c0).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_cost::build_dense_cost;

    fn two_point() -> CostKernel {
        build_dense_cost(2, vec![vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap()
    }

    fn constant(n: usize, k: f64) -> CostKernel {
        build_dense_cost(n, vec![vec![k; n]; n]).unwrap()
    }

    fn vf(v: &[f64]) -> ValueFunction {
        ValueFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn t_minus_two_point() {
        assert_eq!(apply_t_minus(&two_point(), &vf(&[0.0, 0.0])).unwrap().values(), &[0.0, 1.0]);
    }

    #[test]
    fn t_plus_two_point() {
        assert_eq!(apply_t_plus(&two_point(), &vf(&[0.0, 0.0])).unwrap().values(), &[0.0, -1.0]);
    }

    #[test]
    fn t_lambda_two_point_and_range() {
        let c = two_point();
        assert_eq!(apply_t_lambda(&c, &vf(&[0.0, 0.0]), 0.5).unwrap().values(), &[0.0, 1.0]);
        assert!(apply_t_lambda(&c, &vf(&[0.0, 0.0]), 1.0).is_err());
        assert!(apply_t_lambda(&c, &vf(&[0.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn constant_kernel_operators() {
        let c = constant(4, 1.5);
        let f = vf(&[3.0, -1.0, 2.0, 0.5]);
        assert!(apply_t_minus(&c, &f).unwrap().iter().all(|&x| x == -1.0 + 1.5));
        assert!(apply_t_plus(&c, &f).unwrap().iter().all(|&x| x == 3.0 - 1.5));
    }

    #[test]
    fn t_plus_after_t_minus_is_below_identity() {
        let c = two_point();
        let f = vf(&[0.0, 0.0]);
        let g = apply_t_plus(&c, &apply_t_minus(&c, &f).unwrap()).unwrap();
        assert!(g.le(&f, 0.0));
    }

    #[test]
    fn powers_two_point_and_constant() {
        let p = minplus_power(&two_point(), 2).unwrap();
        assert_eq!(p[1][(1, 1)], 2.0);
        let q = minplus_power(&constant(3, 2.0), 5).unwrap();
        for (k, m) in q.iter().enumerate() {
            assert!(m.as_slice().iter().all(|&x| x == 2.0 * (k + 1) as f64));
        }
        assert!(minplus_power(&two_point(), 0).is_err());
    }

    #[test]
    fn karp_fixtures() {
        assert_eq!(critical_value_karp(&two_point()).value, 0.0);
        assert_eq!(critical_value_karp(&constant(5, 2.5)).value, -2.5);
        assert_eq!(critical_value_karp(&build_dense_cost(1, vec![vec![3.0]]).unwrap()).value, -3.0);
        assert_eq!(critical_value_karp(&two_point()).residual, 0.0);
    }

    #[test]
    fn karp_recovers_a_critical_cycle() {
        let inf = f64::INFINITY;
        let c = build_dense_cost(3, vec![vec![inf, 1.0, inf], vec![inf, inf, 2.0], vec![0.0, inf, 5.0]]).unwrap();
        let (mean, cyc) = min_mean_cycle(&c);
        assert!((mean - 1.0).abs() < 1e-15);
        assert_eq!(cyc.len(), 3);
    }

    #[test]
    fn discounted_fixtures() {
        let cv = critical_value_discounted(&two_point(), &[0.9, 0.99, 0.999]).unwrap();
        assert!(cv.value.abs() < 1e-3);
        let k = 1.75;
        for lambda in [0.3, 0.9, 0.999] {
            let cv = critical_value_discounted(&constant(3, k), &[lambda]).unwrap();
            assert!((cv.value + k).abs() < 1e-9, "{lambda}: {}", cv.value);
        }
        assert!(critical_value_discounted(&two_point(), &[0.9, 0.5]).is_err());
    }

    #[test]
    fn asymptotic_rate_bounds() {
        let r = asymptotic_rate(&two_point(), &ValueFunction::zeros(2), 100).unwrap();
        assert!(r <= 0.05, "{r}");
        let v = vf(&[0.0, 3.0, -1.0]);
        for n in [1, 5, 40] {
            let r = asymptotic_rate(&constant(3, 2.0), &v, n).unwrap();
            assert!(r <= (v.max() - v.min()) / n as f64 + 1e-12);
        }
    }
}
