//! Peierls barrier, Aubry sets and the subsolution calculus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{minplus_product, SquareMatrix};
use crate::minplus::{apply_t_minus, apply_t_plus, ValueFunction};
use crate::space_cost::CostKernel;
use crate::tol::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMethod {
    /// Eventual periodicity of `D_n = c_n + n·c0`.
    Power,
    /// `h(x, y) = min over critical z of d*(x, z) + d*(z, y)`.
    CriticalClosure,
}

#[derive(Clone, Copy, Debug)]
pub struct BarrierOptions {
    pub eps_num: f64,
    /// `None` picks `Power` for irreducible kernels up to `power_max_points`
    /// points and `CriticalClosure` otherwise.
    pub method: Option<BarrierMethod>,
    pub power_max_points: usize,
}

impl BarrierOptions {
    pub fn for_kernel(c: &CostKernel) -> Self {
        Self {
            eps_num: Tolerances::for_kernel(c).eps_num,
            method: None,
            power_max_points: 40,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BarrierData {
    pub h: SquareMatrix,
    pub c0: f64,
    /// First index `N₀` of the detected period (0 for the closure route).
    pub tail_start: usize,
    /// Detected period `σ` (0 for the closure route).
    pub period: usize,
    /// No periodicity found by `n_max`; `h` comes from the closure route.
    pub fallback: bool,
    pub method: BarrierMethod,
}

impl BarrierData {
    pub fn n(&self) -> usize {
        self.h.n()
    }

    /// `h(x, ·)`.
    pub fn row(&self, x: usize) -> &[f64] {
        self.h.row(x)
    }

    /// `h(·, x)`.
    pub fn column(&self, x: usize) -> Vec<f64> {
        (0..self.n()).map(|y| self.h[(y, x)]).collect()
    }
}

pub fn peierls_barrier(c: &CostKernel, c0: f64) -> Result<BarrierData> {
    peierls_barrier_with(c, c0, &BarrierOptions::for_kernel(c))
}

pub fn peierls_barrier_with(c: &CostKernel, c0: f64, opts: &BarrierOptions) -> Result<BarrierData> {
    let method = opts.method.unwrap_or(if c.n() <= opts.power_max_points && is_irreducible(c) {
        BarrierMethod::Power
    } else {
        BarrierMethod::CriticalClosure
    });
    match method {
        BarrierMethod::Power => barrier_power(c, c0, opts.eps_num),
        BarrierMethod::CriticalClosure => barrier_closure(c, c0, opts.eps_num),
    }
}

/// Every point reaches every other through finite entries. Reducible kernels
/// can have rows of `D_n` that grow linearly, so the power route diverges.
pub fn is_irreducible(c: &CostKernel) -> bool {
    let n = c.n();
    let reach_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            let next: Vec<usize> = if forward {
                c.targets(x).filter(|&y| c.entry(x, y).is_finite()).collect()
            } else {
                c.sources(x).filter(|&y| c.entry(y, x).is_finite()).collect()
            };
            for y in next {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach_all(true) && reach_all(false)
}

fn shifted_dense(c: &CostKernel, c0: f64) -> SquareMatrix {
    c.to_dense().map(|v| v + c0)
}

fn barrier_power(c: &CostKernel, c0: f64, eps: f64) -> Result<BarrierData> {
    let n = c.n();
    let a = shifted_dense(c, c0);
    let bound = (4 * n + 1) as f64 * a.finite_sup() + eps;
    let n_max = 4 * n * n + n;
    // ring[k % (n + 1)] holds D_k for the last n + 1 indices.
    let mut ring: Vec<Option<SquareMatrix>> = vec![None; n + 1];
    let mut current = a.clone();
    for k in 1..=n_max {
        if k > 1 {
            current = minplus_product(&current, &a);
        }
        let norm = current.finite_sup();
        if norm > bound && k > 4 * n {
            return Err(Error::Divergence { n: k, norm });
        }
        for sigma in 1..=n.min(k - 1) {
            let prev = ring[(k - sigma) % (n + 1)].as_ref().expect("ring holds the last n+1 powers");
            if current.sup_distance(prev) <= eps {
                let mut h = prev.clone();
                for j in (k - sigma + 1)..k {
                    h.min_assign(ring[j % (n + 1)].as_ref().expect("ring entry"));
                }
                return Ok(BarrierData {
                    h,
                    c0,
                    tail_start: k - sigma,
                    period: sigma,
                    fallback: false,
                    method: BarrierMethod::Power,
                });
            }
        }
        ring[k % (n + 1)] = Some(current.clone());
    }
    // The transient outlasted the cap (nearly critical cycles): the tail
    // minimum is only approximate, so switch to the exact closure formula.
    let mut b = barrier_closure(c, c0, eps)?;
    b.fallback = true;
    Ok(b)
}

/// All-pairs minimal weight of non-empty walks for `c + c0` (Floyd–Warshall).
///
/// Finite only when `c0` is at least the critical value, i.e. no negative cycle.
pub fn walk_closure(c: &CostKernel, c0: f64) -> SquareMatrix {
    let mut d = shifted_dense(c, c0);
    let n = d.n();
    for z in 0..n {
        let dz: Vec<f64> = d.row(z).to_vec();
        for x in 0..n {
            let dxz = d[(x, z)];
            if !dxz.is_finite() {
                continue;
            }
            let row = d.row_mut(x);
            for y in 0..n {
                let v = dxz + dz[y];
                if v < row[y] {
                    row[y] = v;
                }
            }
        }
    }
    d
}

/// `d*`: the walk closure with the empty walk allowed on the diagonal.
pub fn star_closure(c: &CostKernel, c0: f64) -> SquareMatrix {
    let mut d = walk_closure(c, c0);
    for x in 0..d.n() {
        let v = d[(x, x)];
        d.row_mut(x)[x] = v.min(0.0);
    }
    d
}

fn barrier_closure(c: &CostKernel, c0: f64, eps: f64) -> Result<BarrierData> {
    let n = c.n();
    let walks = walk_closure(c, c0);
    let critical: Vec<usize> = (0..n).filter(|&z| walks[(z, z)].abs() <= eps).collect();
    if let Some(z) = (0..n).find(|&z| walks[(z, z)] < -eps) {
        return Err(Error::Divergence {
            n: z,
            norm: walks[(z, z)].abs(),
        });
    }
    if critical.is_empty() {
        let gap = (0..n).map(|z| walks[(z, z)]).fold(f64::INFINITY, f64::min);
        return Err(Error::Divergence { n: 0, norm: gap });
    }
    let mut star = walks;
    for x in 0..n {
        let v = star[(x, x)];
        star.row_mut(x)[x] = v.min(0.0);
    }
    let mut h = SquareMatrix::filled(n, f64::INFINITY);
    for x in 0..n {
        for &z in &critical {
            let dxz = star[(x, z)];
            if !dxz.is_finite() {
                continue;
            }
            let zrow = star.row(z).to_vec();
            let hrow = h.row_mut(x);
            for y in 0..n {
                let v = dxz + zrow[y];
                if v < hrow[y] {
                    hrow[y] = v;
                }
            }
        }
    }
    Ok(BarrierData {
        h,
        c0,
        tail_start: 0,
        period: 0,
        fallback: false,
        method: BarrierMethod::CriticalClosure,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AubryData {
    /// Sorted projected Aubry set.
    pub projected: Vec<usize>,
    /// Pairs of the 2-Aubry set, sorted lexicographically.
    pub pairs: Vec<(usize, usize)>,
    /// Partners `y` with `(x, y) ∈ Â`, parallel to `projected`.
    pub successors: Vec<Vec<usize>>,
    pub eps: f64,
    /// `π₁(Â) = π₂(Â) = 𝒜`.
    pub projections_agree: bool,
}

impl AubryData {
    pub fn contains(&self, x: usize) -> bool {
        self.projected.binary_search(&x).is_ok()
    }

    pub fn contains_pair(&self, x: usize, y: usize) -> bool {
        self.pairs.binary_search(&(x, y)).is_ok()
    }

    /// Every Aubry point has exactly one successor (graph property of twist costs).
    pub fn successors_unique(&self) -> bool {
        self.successors.iter().all(|s| s.len() == 1)
    }
}

pub fn aubry_sets(c: &CostKernel, b: &BarrierData, eps_a: f64) -> Result<AubryData> {
    let n = c.n();
    let projected: Vec<usize> = (0..n).filter(|&x| b.h[(x, x)].abs() <= eps_a).collect();
    if projected.is_empty() {
        return Err(Error::EmptyAubry(eps_a));
    }
    let mut pairs = Vec::new();
    for x in 0..n {
        for y in c.targets(x) {
            let v = c.entry(x, y) + b.c0 + b.h[(y, x)];
            if v.is_finite() && v.abs() <= eps_a {
                pairs.push((x, y));
            }
        }
    }
    pairs.sort_unstable();
    let successors = projected
        .iter()
        .map(|&x| pairs.iter().filter(|p| p.0 == x).map(|p| p.1).collect())
        .collect();
    let mut first: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let mut second: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    first.dedup();
    second.sort_unstable();
    second.dedup();
    let projections_agree = first == projected && second == projected;
    Ok(AubryData {
        projected,
        pairs,
        successors,
        eps: eps_a,
        projections_agree,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsolutionCheck {
    pub holds: bool,
    /// Pair `(x, y)` maximizing `u(y) - u(x) - c(x, y) - C`.
    pub worst: (usize, usize),
    /// That maximum; `≤ 0` for a subsolution.
    pub violation: f64,
}

pub fn is_subsolution(c: &CostKernel, u: &ValueFunction, big_c: f64) -> SubsolutionCheck {
    is_subsolution_tol(c, u, big_c, Tolerances::for_kernel(c).eps_num)
}

pub fn is_subsolution_tol(c: &CostKernel, u: &ValueFunction, big_c: f64, eps: f64) -> SubsolutionCheck {
    let mut worst = (0, 0);
    let mut violation = f64::NEG_INFINITY;
    for x in 0..c.n() {
        for y in c.targets(x) {
            let v = u[y] - u[x] - c.entry(x, y) - big_c;
            if v > violation {
                violation = v;
                worst = (x, y);
            }
        }
    }
    SubsolutionCheck {
        holds: violation <= eps,
        worst,
        violation,
    }
}

/// `‖u - (T⁻u + c0)‖∞`.
pub fn negative_residual(c: &CostKernel, u: &ValueFunction, c0: f64) -> Result<f64> {
    let t = apply_t_minus(c, u)?;
    Ok(t.shifted(c0).sup_distance(u))
}

/// `‖u - (T⁺u - c0)‖∞`.
pub fn positive_residual(c: &CostKernel, u: &ValueFunction, c0: f64) -> Result<f64> {
    let t = apply_t_plus(c, u)?;
    Ok(t.shifted(-c0).sup_distance(u))
}

fn check_residual(residual: f64, tol: f64) -> Result<()> {
    if residual.is_nan() || residual > tol {
        return Err(Error::Residual { residual, tol });
    }
    Ok(())
}

/// `h(x, ·)`, checked to be a negative weak KAM solution.
pub fn weak_kam_from_barrier(c: &CostKernel, b: &BarrierData, x: usize) -> Result<ValueFunction> {
    let u = ValueFunction::new(b.row(x).to_vec())?;
    check_residual(negative_residual(c, &u, b.c0)?, Tolerances::for_kernel(c).eps_num)?;
    Ok(u)
}

/// `-h(·, x)`, checked to be a positive weak KAM solution.
pub fn positive_weak_kam_from_barrier(c: &CostKernel, b: &BarrierData, x: usize) -> Result<ValueFunction> {
    let u = ValueFunction::new(b.column(x).iter().map(|v| -v).collect())?;
    check_residual(positive_residual(c, &u, b.c0)?, Tolerances::for_kernel(c).eps_num)?;
    Ok(u)
}

/// The weak KAM solution `min over y ∈ 𝒜 of f(y) + h(y, ·)` extending `f` (given on `a.projected`).
pub fn extend_from_aubry(c: &CostKernel, b: &BarrierData, a: &AubryData, f: &[f64]) -> Result<ValueFunction> {
    if f.len() != a.projected.len() {
        return Err(Error::DimensionMismatch {
            expected: a.projected.len(),
            found: f.len(),
        });
    }
    let eps = Tolerances::for_kernel(c).eps_num;
    for (i, &x) in a.projected.iter().enumerate() {
        for (j, &y) in a.projected.iter().enumerate() {
            let excess = f[j] - f[i] - b.h[(x, y)];
            if excess > eps {
                return Err(Error::ExtensionData { x, y, excess });
            }
        }
    }
    let n = b.n();
    let values = (0..n)
        .map(|x| {
            a.projected
                .iter()
                .zip(f)
                .map(|(&y, fy)| fy + b.h[(y, x)])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let u = ValueFunction::new(values)?;
    check_residual(negative_residual(c, &u, b.c0)?, eps)?;
    Ok(u)
}

/// Limits of `T⁻ⁿu + n·c0` (non-decreasing) and `T⁺ⁿu - n·c0` (non-increasing) for a subsolution `u`.
pub fn conjugate_pair(c: &CostKernel, u: &ValueFunction, c0: f64, n_max: usize) -> Result<(ValueFunction, ValueFunction)> {
    let eps = Tolerances::for_kernel(c).eps_num;
    let minus = monotone_limit(u, n_max, eps, 1.0, |g| Ok(apply_t_minus(c, g)?.shifted(c0)))?;
    let plus = monotone_limit(u, n_max, eps, -1.0, |g| Ok(apply_t_plus(c, g)?.shifted(-c0)))?;
    Ok((minus, plus))
}

/// Iterates `step` from `u`, requiring `direction · (g_{k+1} - g_k) ≥ -eps`.
fn monotone_limit(
    u: &ValueFunction,
    n_max: usize,
    eps: f64,
    direction: f64,
    step: impl Fn(&ValueFunction) -> Result<ValueFunction>,
) -> Result<ValueFunction> {
    let mut g = u.clone();
    for k in 1..=n_max {
        let next = step(&g)?;
        let mut diff = 0.0_f64;
        for (i, (a, b)) in next.iter().zip(g.iter()).enumerate() {
            let jump = direction * (a - b);
            if jump < -eps {
                return Err(Error::NotMonotone {
                    index: i,
                    step: k,
                    jump,
                });
            }
            diff = diff.max(jump.abs());
        }
        g = next;
        if diff <= eps {
            return Ok(g);
        }
    }
    Err(Error::NoConvergence {
        iterations: n_max,
        residual: step(&g)?.sup_distance(&g),
    })
}

#[derive(Clone, Debug)]
pub struct StrictSubsolution {
    pub u: ValueFunction,
    /// Smallest slack `c(x, y) + c0 - u(y) + u(x)` over finite pairs outside `Â`.
    pub min_slack: f64,
    /// Pairs outside `Â` where the slack is not positive.
    pub non_strict: Vec<(usize, usize)>,
}

/// Average of `d*(y, ·)` over the points `y` reaching every point; strict exactly off zero-weight cycles.
pub fn strict_subsolution(c: &CostKernel, c0: f64, a: &AubryData) -> Result<StrictSubsolution> {
    let n = c.n();
    let star = star_closure(c, c0);
    let roots: Vec<usize> = (0..n).filter(|&y| star.row(y).iter().all(|v| v.is_finite())).collect();
    if roots.is_empty() {
        return Err(Error::NonFiniteValue(0));
    }
    let mut values = vec![0.0; n];
    for &y in &roots {
        for (v, d) in values.iter_mut().zip(star.row(y)) {
            *v += d;
        }
    }
    let k = roots.len() as f64;
    values.iter_mut().for_each(|v| *v /= k);
    let u = ValueFunction::new(values)?;
    let mut min_slack = f64::INFINITY;
    let mut non_strict = Vec::new();
    for x in 0..n {
        for y in c.targets(x) {
            if a.contains_pair(x, y) {
                continue;
            }
            let slack = c.entry(x, y) + c0 - u[y] + u[x];
            if !slack.is_finite() {
                continue;
            }
            min_slack = min_slack.min(slack);
            if slack <= 0.0 {
                non_strict.push((x, y));
            }
        }
    }
    Ok(StrictSubsolution {
        u,
        min_slack,
        non_strict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minplus::critical_value_karp;
    use crate::space_cost::build_dense_cost;

    fn two_point() -> CostKernel {
        build_dense_cost(2, vec![vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap()
    }

    #[test]
    fn two_point_barrier_both_routes() {
        let c = two_point();
        for method in [BarrierMethod::Power, BarrierMethod::CriticalClosure] {
            let opts = BarrierOptions {
                method: Some(method),
                ..BarrierOptions::for_kernel(&c)
            };
            let b = peierls_barrier_with(&c, 0.0, &opts).unwrap();
            assert_eq!(b.h.to_rows(), vec![vec![0.0, 2.0], vec![2.0, 4.0]], "{method:?}");
        }
        let b = peierls_barrier(&c, 0.0).unwrap();
        assert_eq!((b.tail_start, b.period, b.fallback), (4, 1, false));
    }

    #[test]
    fn constant_and_single_point() {
        let c = build_dense_cost(3, vec![vec![1.5; 3]; 3]).unwrap();
        let b = peierls_barrier(&c, -1.5).unwrap();
        assert!(b.h.as_slice().iter().all(|&v| v == 0.0));
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        assert_eq!(a.projected, vec![0, 1, 2]);
        assert_eq!(a.pairs.len(), 9);
        let c = build_dense_cost(1, vec![vec![3.0]]).unwrap();
        let b = peierls_barrier(&c, -3.0).unwrap();
        assert_eq!(b.h[(0, 0)], 0.0);
    }

    #[test]
    fn two_point_aubry_and_solutions() {
        let c = two_point();
        let b = peierls_barrier(&c, 0.0).unwrap();
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        assert_eq!(a.projected, vec![0]);
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert!(a.projections_agree && a.successors_unique());
        let u = weak_kam_from_barrier(&c, &b, 0).unwrap();
        assert_eq!(u.values(), &[0.0, 2.0]);
        let v = positive_weak_kam_from_barrier(&c, &b, 0).unwrap();
        assert_eq!(v.values(), &[0.0, -2.0]);
        let e = extend_from_aubry(&c, &b, &a, &[0.0]).unwrap();
        assert_eq!(e.values(), &[0.0, 2.0]);
        let e = extend_from_aubry(&c, &b, &a, &[1.25]).unwrap();
        assert_eq!(e.values(), &[1.25, 3.25]);
    }

    #[test]
    fn subsolution_checks() {
        let c = two_point();
        let ok = is_subsolution(&c, &ValueFunction::new(vec![0.0, 2.0]).unwrap(), 0.0);
        assert!(ok.holds);
        let bad = is_subsolution(&c, &ValueFunction::new(vec![0.0, 5.0]).unwrap(), 0.0);
        assert!(!bad.holds);
        assert_eq!(bad.worst, (0, 1));
        assert_eq!(bad.violation, 3.0);
        let k = build_dense_cost(2, vec![vec![4.0; 2]; 2]).unwrap();
        let z = is_subsolution(&k, &ValueFunction::zeros(2), -4.0);
        assert!(z.holds && z.violation == 0.0);
    }

    #[test]
    fn conjugate_pairs_on_fixture() {
        let c = two_point();
        let (m, p) = conjugate_pair(&c, &ValueFunction::new(vec![0.0, 1.0]).unwrap(), 0.0, 1000).unwrap();
        assert_eq!(m.values(), &[0.0, 2.0]);
        assert_eq!(p.values(), &[0.0, -2.0]);
        let (m, p) = conjugate_pair(&c, &ValueFunction::new(vec![0.0, 2.0]).unwrap(), 0.0, 1000).unwrap();
        assert_eq!(m.values(), &[0.0, 2.0]);
        assert_eq!(p.values(), &[0.0, -2.0]);
        let err = conjugate_pair(&c, &ValueFunction::new(vec![0.0, 5.0]).unwrap(), 0.0, 1000).unwrap_err();
        assert!(matches!(err, Error::NotMonotone { .. }));
    }

    #[test]
    fn extension_rejects_bad_data() {
        let c = build_dense_cost(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = peierls_barrier(&c, 0.0).unwrap();
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        assert_eq!(a.projected, vec![0, 1]);
        let err = extend_from_aubry(&c, &b, &a, &[0.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::ExtensionData { x: 0, y: 1, .. }));
    }

    #[test]
    fn strict_subsolution_on_fixture() {
        let c = two_point();
        let b = peierls_barrier(&c, 0.0).unwrap();
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        let s = strict_subsolution(&c, 0.0, &a).unwrap();
        assert!(s.non_strict.is_empty());
        assert!(s.min_slack > 0.0);
        assert!(is_subsolution(&c, &s.u, 0.0).holds);
    }

    #[test]
    fn wrong_constant_diverges() {
        let c = two_point();
        let opts = BarrierOptions {
            method: Some(BarrierMethod::Power),
            ..BarrierOptions::for_kernel(&c)
        };
        assert!(matches!(peierls_barrier_with(&c, 3.0, &opts), Err(Error::Divergence { .. })));
        assert!(matches!(peierls_barrier_with(&c, -3.0, &opts), Err(Error::Divergence { .. })));
        let cv = critical_value_karp(&c);
        assert_eq!(cv.value, 0.0);
    }
}
