//! Discounted approximation: `u_λ`, `v_λ`, the selected limits `u₁`, `v₁` and
//! their formulas over Mather measures, and the conjugate-pair diagnostics.

pub mod degenerate;
pub mod triangle;

use serde::Serialize;

use crate::aubry::{is_subsolution_tol, negative_residual, positive_residual, AubryData, BarrierData};
use crate::error::{Error, Result};
use crate::fixed_point::{DiscountProblem, Orientation, SolveMethod};
use crate::mather::MatherFamily;
use crate::minplus::{check_lambda, ValueFunction};
use crate::space_cost::CostKernel;
use crate::tol::Tolerances;

pub use crate::minplus::default_schedule_to_one;

#[derive(Clone, Debug)]
pub struct DiscountedSolve {
    pub lambda: f64,
    pub u: ValueFunction,
    pub iterations: usize,
    /// `‖u - T⁻(λu)‖∞` (or the `T⁺` analogue).
    pub residual: f64,
    pub method: SolveMethod,
}

fn solve_discounted(c: &CostKernel, lambda: f64, orientation: Orientation, tol: &Tolerances) -> Result<DiscountedSolve> {
    check_lambda(lambda)?;
    let fp = DiscountProblem::uniform(c, 1.0 - lambda, 0.0, orientation).solve(tol.fixed_point, tol.max_iterations)?;
    let u = ValueFunction::new(fp.values)?;
    let allowed = tol.fixed_point * (1.0 + u.sup_norm());
    if fp.residual > allowed {
        return Err(Error::Residual {
            residual: fp.residual,
            tol: allowed,
        });
    }
    Ok(DiscountedSolve {
        lambda,
        u,
        iterations: fp.iterations,
        residual: fp.residual,
        method: fp.method,
    })
}

/// The unique fixed point of `f ↦ T⁻(λf)`.
pub fn solve_u_lambda(c: &CostKernel, lambda: f64) -> Result<DiscountedSolve> {
    solve_discounted(c, lambda, Orientation::Backward, &Tolerances::for_kernel(c))
}

pub fn solve_u_lambda_with(c: &CostKernel, lambda: f64, tol: &Tolerances) -> Result<DiscountedSolve> {
    solve_discounted(c, lambda, Orientation::Backward, tol)
}

/// The unique fixed point of `f ↦ T⁺(λf)`.
pub fn solve_v_lambda(c: &CostKernel, lambda: f64) -> Result<DiscountedSolve> {
    solve_discounted(c, lambda, Orientation::Forward, &Tolerances::for_kernel(c))
}

pub fn solve_v_lambda_with(c: &CostKernel, lambda: f64, tol: &Tolerances) -> Result<DiscountedSolve> {
    solve_discounted(c, lambda, Orientation::Forward, tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectedLimit {
    pub u: ValueFunction,
    /// Last schedule entry used.
    pub lambda: f64,
    /// Sup-distance between the last two estimates.
    pub last_diff: f64,
    /// Weak KAM residual of `u` for the relevant semigroup.
    pub residual: f64,
    /// `(λ, u_λ ± c0/(1-λ))` for every schedule entry visited.
    pub history: Vec<(f64, Vec<f64>)>,
}

#[derive(Clone, Copy, Debug)]
pub struct LimitOptions {
    /// Stop once successive estimates differ by at most this.
    pub limit_tol: f64,
    /// Largest final difference accepted when the schedule runs out.
    pub cauchy_tol: f64,
    /// Largest weak KAM residual accepted for the limit.
    pub residual_tol: f64,
    /// Fixed-point settings for each schedule entry.
    pub tolerances: Tolerances,
}

impl LimitOptions {
    pub fn for_kernel(c: &CostKernel) -> Self {
        Self::from_tolerances(Tolerances::for_kernel(c))
    }

    pub fn from_tolerances(t: Tolerances) -> Self {
        Self {
            limit_tol: t.eps_num,
            cauchy_tol: 10.0 * t.eps_aubry,
            residual_tol: 10.0 * t.eps_aubry,
            tolerances: t,
        }
    }
}

fn check_schedule_to_one(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::OutOfRange("schedule must be non-empty and strictly increasing".into()));
    }
    schedule.iter().try_for_each(|&l| check_lambda(l))
}

/// Follows `w_λ = T∓(λw_λ) ± c0`, i.e. `u_λ + c0/(1-λ)` or `v_λ - c0/(1-λ)`, along the schedule.
fn selected_limit(c: &CostKernel, c0: f64, schedule: &[f64], orientation: Orientation, opts: &LimitOptions) -> Result<SelectedLimit> {
    check_schedule_to_one(schedule)?;
    let tol = opts.tolerances;
    let mut history: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut seed = None;
    let mut last_diff = f64::INFINITY;
    for &lambda in schedule {
        let problem = DiscountProblem::uniform(c, 1.0 - lambda, c0, orientation);
        let fp = problem.solve_seeded(seed.take(), tol.fixed_point, tol.max_iterations)?;
        if let Some((_, prev)) = history.last() {
            last_diff = crate::fixed_point::sup_diff(prev, &fp.values);
        }
        seed = Some(fp.policy);
        history.push((lambda, fp.values));
        if last_diff <= opts.limit_tol {
            break;
        }
    }
    if history.len() > 1 && last_diff > opts.cauchy_tol {
        return Err(Error::NotCauchy {
            diff: last_diff,
            tol: opts.cauchy_tol,
        });
    }
    let (lambda, values) = history.last().cloned().expect("non-empty schedule");
    let u = ValueFunction::new(values)?;
    let residual = match orientation {
        Orientation::Backward => negative_residual(c, &u, c0)?,
        Orientation::Forward => positive_residual(c, &u, c0)?,
    };
    if residual > opts.residual_tol {
        return Err(Error::Residual {
            residual,
            tol: opts.residual_tol,
        });
    }
    Ok(SelectedLimit {
        u,
        lambda,
        last_diff: if history.len() > 1 { last_diff } else { f64::NAN },
        residual,
        history,
    })
}

/// `u₁ = lim u_λ + c0/(1-λ)` as `λ → 1`.
pub fn limit_u1(c: &CostKernel, c0: f64, schedule: &[f64]) -> Result<SelectedLimit> {
    limit_u1_with(c, c0, schedule, &LimitOptions::for_kernel(c))
}

pub fn limit_u1_with(c: &CostKernel, c0: f64, schedule: &[f64], opts: &LimitOptions) -> Result<SelectedLimit> {
    selected_limit(c, c0, schedule, Orientation::Backward, opts)
}

/// `v₁ = lim v_λ - c0/(1-λ)` as `λ → 1`.
pub fn limit_v1(c: &CostKernel, c0: f64, schedule: &[f64]) -> Result<SelectedLimit> {
    limit_v1_with(c, c0, schedule, &LimitOptions::for_kernel(c))
}

pub fn limit_v1_with(c: &CostKernel, c0: f64, schedule: &[f64], opts: &LimitOptions) -> Result<SelectedLimit> {
    selected_limit(c, c0, schedule, Orientation::Forward, opts)
}

#[derive(Clone, Debug, Serialize)]
pub struct FormulaValue {
    pub u: ValueFunction,
    /// The Mather family was capped: `u₁` values are upper bounds, `v₁` values lower bounds.
    pub bound_only: bool,
}

/// `u₁(x) = min over extremal μ of ∫ h(y, x) dπ₁*μ(y)`.
pub fn formula_u1(b: &BarrierData, f: &MatherFamily) -> Result<FormulaValue> {
    if f.extremals.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let n = b.n();
    let values = (0..n)
        .map(|x| {
            let col = b.column(x);
            f.extremals
                .iter()
                .map(|mu| mu.marginal_integral(&col))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(FormulaValue {
        u: ValueFunction::new(values)?,
        bound_only: f.capped,
    })
}

/// `v₁(x) = max over extremal μ of -∫ h(x, y) dπ₁*μ(y)`.
pub fn formula_v1(b: &BarrierData, f: &MatherFamily) -> Result<FormulaValue> {
    if f.extremals.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let n = b.n();
    let values = (0..n)
        .map(|x| {
            let row = b.row(x);
            f.extremals
                .iter()
                .map(|mu| -mu.marginal_integral(row))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(FormulaValue {
        u: ValueFunction::new(values)?,
        bound_only: f.capped,
    })
}

/// Static classes of the projected Aubry set: `x ~ y` iff `h(x, y) + h(y, x) = 0`.
pub fn static_classes(b: &BarrierData, a: &AubryData) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &x in &a.projected {
        match classes
            .iter_mut()
            .find(|cl| (b.h[(cl[0], x)] + b.h[(x, cl[0])]).abs() <= a.eps)
        {
            Some(cl) => cl.push(x),
            None => classes.push(vec![x]),
        }
    }
    classes
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyReport {
    /// (1) `v₁` is the positive conjugate of `u₁`.
    pub conjugate_pair: bool,
    /// (2) `u₁ = v₁` on `𝒜`.
    pub equal_on_aubry: bool,
    /// (3) `u₁ ≥ v₁`.
    pub u_above_v: bool,
    /// (4) `∫ u₁ dπ₁*μ = 0` for every extremal `μ`.
    pub u_integrals_vanish: bool,
    /// (5) `∫ v₁ dπ₁*μ = 0` for every extremal `μ`.
    pub v_integrals_vanish: bool,
    /// (6) some critical subsolution has vanishing integrals on every extremal.
    pub subsolution_exists: bool,
    /// Witness for (6) when it holds.
    pub witness: Option<ValueFunction>,
    pub tol: f64,
}

impl ConjugacyReport {
    pub fn conditions(&self) -> [bool; 6] {
        [
            self.conjugate_pair,
            self.equal_on_aubry,
            self.u_above_v,
            self.u_integrals_vanish,
            self.v_integrals_vanish,
            self.subsolution_exists,
        ]
    }

    /// The six conditions agree.
    pub fn consistent(&self) -> bool {
        let c = self.conditions();
        c.iter().all(|&v| v == c[0])
    }

    pub fn all_true(&self) -> bool {
        self.conditions().iter().all(|&v| v)
    }

    pub fn all_false(&self) -> bool {
        self.conditions().iter().all(|&v| !v)
    }

    pub fn ensure_consistent(&self) -> Result<()> {
        if self.consistent() {
            Ok(())
        } else {
            Err(Error::Instance(format!("conjugacy conditions disagree: {:?}", self.conditions())))
        }
    }
}

/// Evaluates the six equivalent conjugacy conditions for `(u₁, v₁)`.
pub fn conjugate_pair_test(
    c: &CostKernel,
    u1: &ValueFunction,
    v1: &ValueFunction,
    b: &BarrierData,
    a: &AubryData,
    f: &MatherFamily,
) -> Result<ConjugacyReport> {
    conjugate_pair_test_tol(c, u1, v1, b, a, f, 10.0 * Tolerances::for_kernel(c).eps_aubry)
}

pub fn conjugate_pair_test_tol(
    c: &CostKernel,
    u1: &ValueFunction,
    v1: &ValueFunction,
    b: &BarrierData,
    a: &AubryData,
    f: &MatherFamily,
    tol: f64,
) -> Result<ConjugacyReport> {
    let n = c.n();
    if u1.len() != n || v1.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if u1.len() != n { u1.len() } else { v1.len() },
        });
    }
    if f.extremals.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let conjugate: Vec<f64> = (0..n)
        .map(|x| {
            a.projected
                .iter()
                .map(|&y| u1[y] - b.h[(x, y)])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let conjugate_pair = conjugate.iter().zip(v1.iter()).all(|(p, v)| (p - v).abs() <= tol);
    let equal_on_aubry = a.projected.iter().all(|&x| (u1[x] - v1[x]).abs() <= tol);
    let u_above_v = u1.iter().zip(v1.iter()).all(|(u, v)| *u >= v - tol);
    let vanish = |g: &[f64]| f.extremals.iter().all(|mu| mu.marginal_integral(g).abs() <= tol);
    let u_integrals_vanish = vanish(u1);
    let v_integrals_vanish = vanish(v1);
    let witness = zero_integral_subsolution(c, b, a, f, tol)?;
    if let Some(w) = &witness {
        let check = is_subsolution_tol(c, w, b.c0, tol);
        if !check.holds || !vanish(w) {
            return Err(Error::Instance("constructed zero-integral subsolution fails verification".into()));
        }
    }
    Ok(ConjugacyReport {
        conjugate_pair,
        equal_on_aubry,
        u_above_v,
        u_integrals_vanish,
        v_integrals_vanish,
        subsolution_exists: witness.is_some(),
        witness,
        tol,
    })
}

/// A critical subsolution with `∫ w dπ₁*μ = 0` on every extremal, if one exists.
///
/// On a static class `K` with representative `x_K`, subsolutions satisfy
/// `w = a_K + h(x_K, ·)`; each extremal (a cycle inside one class) fixes
/// `a_K = -∫ h(x_K, ·) dπ₁*μ`, and the class constants must obey
/// `a_L - a_K ≤ h(x_K, x_L)`.
fn zero_integral_subsolution(
    c: &CostKernel,
    b: &BarrierData,
    a: &AubryData,
    f: &MatherFamily,
    tol: f64,
) -> Result<Option<ValueFunction>> {
    let classes = static_classes(b, a);
    let mut constants: Vec<Option<f64>> = vec![None; classes.len()];
    for (mu, cycle) in f.extremals.iter().zip(&f.cycles) {
        let k = classes
            .iter()
            .position(|cl| cl.contains(&cycle[0]))
            .ok_or_else(|| Error::Instance("extremal cycle outside the Aubry set".into()))?;
        let rep = classes[k][0];
        let value = -mu.marginal_integral(b.row(rep));
        match constants[k] {
            None => constants[k] = Some(value),
            Some(prev) if (prev - value).abs() > tol => return Ok(None),
            Some(_) => {}
        }
    }
    let fixed: Vec<(usize, f64)> = constants
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|v| (classes[k][0], v)))
        .collect();
    for &(xk, ak) in &fixed {
        for &(xl, al) in &fixed {
            if al - ak > b.h[(xk, xl)] + tol {
                return Ok(None);
            }
        }
    }
    let values = (0..c.n())
        .map(|x| {
            fixed
                .iter()
                .map(|&(xk, ak)| ak + b.h[(xk, x)])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(Some(ValueFunction::new(values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aubry::{aubry_sets, peierls_barrier};
    use crate::mather::{extremal_measures, DEFAULT_CYCLE_CAP};
    use crate::space_cost::build_dense_cost;

    fn two_point() -> CostKernel {
        build_dense_cost(2, vec![vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap()
    }

    fn constant(n: usize, k: f64) -> CostKernel {
        build_dense_cost(n, vec![vec![k; n]; n]).unwrap()
    }

    #[test]
    fn u_lambda_closed_forms() {
        let c = two_point();
        let s = solve_u_lambda(&c, 0.25).unwrap();
        assert!((s.u[0]).abs() < 1e-12 && (s.u[1] - 4.0 / 3.0).abs() < 1e-12, "{:?}", s);
        let s = solve_u_lambda(&c, 0.75).unwrap();
        assert!((s.u[0]).abs() < 1e-12 && (s.u[1] - 2.0).abs() < 1e-12);
        let s = solve_u_lambda(&constant(3, 2.0), 0.6).unwrap();
        assert!(s.u.iter().all(|v| (v - 5.0).abs() < 1e-11));
        assert!(solve_u_lambda(&c, 1.0).is_err());
    }

    #[test]
    fn limits_on_fixtures() {
        let c = two_point();
        let sched = default_schedule_to_one();
        let u1 = limit_u1(&c, 0.0, &sched).unwrap();
        assert!(u1.u.sup_distance(&ValueFunction::new(vec![0.0, 2.0]).unwrap()) < 1e-9);
        let v1 = limit_v1(&c, 0.0, &sched).unwrap();
        assert!(v1.u.sup_distance(&ValueFunction::new(vec![0.0, -2.0]).unwrap()) < 1e-9);
        let k = constant(4, 1.5);
        let u1 = limit_u1(&k, -1.5, &sched).unwrap();
        assert!(u1.u.sup_norm() < 1e-9);
    }

    #[test]
    fn formulas_and_conjugacy_on_fixture() {
        let c = two_point();
        let b = peierls_barrier(&c, 0.0).unwrap();
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        let f = extremal_measures(&c, 0.0, &a, DEFAULT_CYCLE_CAP).unwrap();
        let u1 = formula_u1(&b, &f).unwrap().u;
        let v1 = formula_v1(&b, &f).unwrap().u;
        assert_eq!(u1.values(), &[0.0, 2.0]);
        assert_eq!(v1.values(), &[0.0, -2.0]);
        let r = conjugate_pair_test(&c, &u1, &v1, &b, &a, &f).unwrap();
        assert!(r.all_true(), "{r:?}");
    }

    #[test]
    fn non_conjugate_pair_detected() {
        // Two separate critical loops with different escape costs.
        let c = build_dense_cost(2, vec![vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap();
        let b = peierls_barrier(&c, 0.0).unwrap();
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        assert_eq!(static_classes(&b, &a).len(), 2);
        let f = extremal_measures(&c, 0.0, &a, DEFAULT_CYCLE_CAP).unwrap();
        let u1 = formula_u1(&b, &f).unwrap().u;
        let v1 = formula_v1(&b, &f).unwrap().u;
        let r = conjugate_pair_test(&c, &u1, &v1, &b, &a, &f).unwrap();
        assert!(r.consistent(), "{r:?}");
    }
}
