//! Exact twist maps of the annulus through their generating functions:
//! the costs `S^c`, Mather's `α` and `β`, rotation numbers, minimizing
//! chains and pseudographs.

pub mod chain;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aubry::{aubry_sets, peierls_barrier, weak_kam_from_barrier, BarrierData};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::minplus::{critical_value_karp, ValueFunction};
use crate::space_cost::{CostKernel, FiniteSpace};
use crate::tol::Tolerances;

pub use chain::{backward_chain, count_crossings, noncrossing_holds, Chain, Crossing};

type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `S̃ = (Θ - θ)²/2`.
    Integrable,
    /// `S̃ = (Θ - θ)²/2 + ε/(4π²) cos(2πθ)`, generating the standard map.
    Standard { eps: f64 },
    Custom,
}

/// A lift `S̃(θ̃, Θ̃)` of a generating function with its partial derivatives.
#[derive(Clone)]
pub struct GeneratingFunction {
    family: Family,
    s: Fn2,
    d1: Option<Fn2>,
    d2: Option<Fn2>,
}

impl fmt::Debug for GeneratingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratingFunction").field("family", &self.family).finish()
    }
}

const FD_STEP: f64 = 1e-5;

fn sample_points() -> impl Iterator<Item = (f64, f64)> {
    (0..13).flat_map(|i| (0..13).map(move |j| (-1.0 + i as f64 / 6.0 + 0.013, -1.5 + j as f64 / 4.0 + 0.007)))
}

impl GeneratingFunction {
    pub fn integrable() -> Self {
        Self::standard(0.0).with_family(Family::Integrable)
    }

    pub fn standard(eps: f64) -> Self {
        let k = eps / (4.0 * PI * PI);
        Self {
            family: Family::Standard { eps },
            s: Arc::new(move |t, tt| 0.5 * (tt - t) * (tt - t) + k * (2.0 * PI * t).cos()),
            d1: Some(Arc::new(move |t, tt| -(tt - t) - eps / (2.0 * PI) * (2.0 * PI * t).sin())),
            d2: Some(Arc::new(|t, tt| tt - t)),
        }
    }

    /// A user-supplied `S̃`; derivatives default to central differences.
    pub fn custom(s: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let g = Self {
            family: Family::Custom,
            s: Arc::new(s),
            d1: None,
            d2: None,
        };
        g.check()?;
        Ok(g)
    }

    fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    #[inline]
    pub fn eval(&self, t: f64, tt: f64) -> f64 {
        (self.s)(t, tt)
    }

    pub fn d1(&self, t: f64, tt: f64) -> f64 {
        match &self.d1 {
            Some(d) => d(t, tt),
            None => (self.eval(t + FD_STEP, tt) - self.eval(t - FD_STEP, tt)) / (2.0 * FD_STEP),
        }
    }

    pub fn d2(&self, t: f64, tt: f64) -> f64 {
        match &self.d2 {
            Some(d) => d(t, tt),
            None => (self.eval(t, tt + FD_STEP) - self.eval(t, tt - FD_STEP)) / (2.0 * FD_STEP),
        }
    }

    /// Periodicity under the diagonal translation, negative mixed derivative,
    /// and growth of `S̃(0, ±K)/K`, all on samples.
    pub fn check(&self) -> Result<()> {
        for (t, tt) in sample_points() {
            let shift = (self.eval(t + 1.0, tt + 1.0) - self.eval(t, tt)).abs();
            if shift > 1e-12 * (1.0 + self.eval(t, tt).abs()) {
                return Err(Error::Generating(format!("not periodic at ({t}, {tt}): jump {shift:e}")));
            }
            let h = 1e-4;
            let mixed = (self.eval(t + h, tt + h) - self.eval(t + h, tt - h) - self.eval(t - h, tt + h)
                + self.eval(t - h, tt - h))
                / (4.0 * h * h);
            if !(mixed < 0.0) {
                return Err(Error::Generating(format!("mixed derivative {mixed} is not negative at ({t}, {tt})")));
            }
        }
        for sign in [1.0, -1.0] {
            let ratios: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
                .iter()
                .map(|k| self.eval(0.0, sign * k) / k)
                .collect();
            if ratios.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Generating(format!("S(0, ±K)/K does not grow: {ratios:?}")));
            }
        }
        Ok(())
    }

    /// The lifted twist map `(θ̃, r) ↦ (Θ̃, R)` with `r = -∂₁S̃`, `R = ∂₂S̃`;
    /// `Θ̃` is found by bisection since `-∂₁S̃` increases in `Θ̃`.
    pub fn map(&self, t: f64, r: f64) -> Result<(f64, f64)> {
        let f = |tt: f64| -self.d1(t, tt) - r;
        let (mut lo, mut hi) = (t - 1.0, t + 1.0);
        let mut widen = 0;
        while f(lo) > 0.0 || f(hi) < 0.0 {
            lo -= 2.0_f64.powi(widen);
            hi += 2.0_f64.powi(widen);
            widen += 1;
            if widen > 60 {
                return Err(Error::Generating(format!("no image for (θ, r) = ({t}, {r})")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tt = 0.5 * (lo + hi);
        Ok((tt, self.d2(t, tt)))
    }
}

/// `F_ε(θ, r) = (θ + r - ε/(2π) sin 2πθ, r - ε/(2π) sin 2πθ)` on the lift.
pub fn standard_map(eps: f64, t: f64, r: f64) -> (f64, f64) {
    let r1 = r - eps / (2.0 * PI) * (2.0 * PI * t).sin();
    (t + r1, r1)
}

/// Builds the generating function of a family and checks it against the map
/// it is meant to generate.
pub fn make_generating(family: Family) -> Result<GeneratingFunction> {
    let g = match family {
        Family::Integrable => GeneratingFunction::integrable(),
        Family::Standard { eps } => {
            if !eps.is_finite() {
                return Err(Error::Generating(format!("eps = {eps} is not finite")));
            }
            GeneratingFunction::standard(eps)
        }
        Family::Custom => {
            return Err(Error::Generating("custom families are built with GeneratingFunction::custom".into()));
        }
    };
    g.check()?;
    let eps = match family {
        Family::Standard { eps } => eps,
        _ => 0.0,
    };
    for (t, r) in sample_points() {
        let (tt, rr) = standard_map(eps, t, r);
        let res = (-g.d1(t, tt) - r).abs().max((g.d2(t, tt) - rr).abs());
        if res > 1e-10 {
            return Err(Error::Generating(format!("generating relations fail at ({t}, {r}) by {res:e}")));
        }
    }
    Ok(g)
}

/// `S^c` on the grid `i / grid_n`, each entry the minimum over lifts
/// `Θ̃ = Θ + k`, `|k| ≤ K`, of `S̃(θ, Θ̃) + c(θ - Θ̃)`; the minimizing
/// displacement `Θ̃ - θ` is recorded as the kernel's lift.
#[derive(Clone, Debug)]
pub struct TwistCost {
    pub generating: GeneratingFunction,
    pub c: f64,
    pub grid_n: usize,
    pub window: usize,
    pub kernel: CostKernel,
}

pub fn default_window(c: f64) -> usize {
    2.max(c.abs().ceil() as usize + 2)
}

pub fn twist_cost(g: &GeneratingFunction, c: f64, grid_n: usize, window: Option<usize>) -> Result<TwistCost> {
    if !c.is_finite() {
        return Err(Error::OutOfRange(format!("cohomology {c} is not finite")));
    }
    let window = window.unwrap_or_else(|| default_window(c));
    let space = FiniteSpace::circle(grid_n)?;
    let step = 1.0 / grid_n as f64;
    let k = window as i64;
    let mut values = SquareMatrix::filled(grid_n, 0.0);
    let mut lifts = SquareMatrix::filled(grid_n, 0.0);
    for i in 0..grid_n {
        let t = i as f64 * step;
        for j in 0..grid_n {
            let base = j as f64 * step;
            let mut best = (f64::INFINITY, 0_i64);
            for shift in -k..=k {
                let tt = base + shift as f64;
                let v = g.eval(t, tt) + c * (t - tt);
                if v < best.0 {
                    best = (v, shift);
                }
            }
            if best.1.abs() == k {
                return Err(Error::WindowBoundary { row: i, offset: best.1 });
            }
            values[(i, j)] = best.0;
            lifts[(i, j)] = base + best.1 as f64 - t;
        }
    }
    let kernel = CostKernel::from_matrix(space, values)?.with_lifts(lifts)?;
    Ok(TwistCost {
        generating: g.clone(),
        c,
        grid_n,
        window,
        kernel,
    })
}

/// `α(c)`, the critical value of `S^c`, by Karp's algorithm.
pub fn alpha_of_c(g: &GeneratingFunction, c: f64, grid_n: usize, window: Option<usize>) -> Result<f64> {
    Ok(critical_value_karp(&twist_cost(g, c, grid_n, window)?.kernel).value)
}

/// Weak KAM data at one cohomology class.
#[derive(Clone, Debug)]
pub struct TwistSolution {
    pub cost: TwistCost,
    pub alpha: f64,
    pub barrier: BarrierData,
    /// `h(x₀, ·)` for the first point `x₀` of the projected Aubry set.
    pub u: ValueFunction,
    pub aubry_point: usize,
}

pub fn solve_twist(cost: TwistCost) -> Result<TwistSolution> {
    let alpha = critical_value_karp(&cost.kernel).value;
    let barrier = peierls_barrier(&cost.kernel, alpha)?;
    let eps_a = Tolerances::for_kernel(&cost.kernel).eps_aubry;
    let aubry = aubry_sets(&cost.kernel, &barrier, eps_a)?;
    let x0 = aubry.projected[0];
    let u = weak_kam_from_barrier(&cost.kernel, &barrier, x0)?;
    Ok(TwistSolution {
        cost,
        alpha,
        barrier,
        u,
        aubry_point: x0,
    })
}

#[derive(Clone, Debug)]
pub struct Rotation {
    pub rho: f64,
    pub alpha: f64,
    pub chain: Chain,
    /// `max_k |θ̃_k - θ̃_0 - kρ|` along the chain.
    pub window: f64,
}

/// `ρ(c) = (θ̃_0 - θ̃_{-H}) / H` along a backward calibrating chain of length
/// `horizon` ending at an Aubry point.
pub fn rotation_number(s: &TwistSolution, horizon: usize) -> Result<Rotation> {
    if horizon == 0 {
        return Err(Error::OutOfRange("horizon must be positive".into()));
    }
    let chain = backward_chain(&s.cost, &s.u, s.alpha, s.aubry_point, horizon)?;
    let pos = &chain.positions;
    let rho = (pos[horizon] - pos[0]) / horizon as f64;
    let window = chain.rotation_window(rho);
    if !(window < 2.0) {
        return Err(Error::OutOfRange(format!("chain drifts {window} away from rotation {rho}")));
    }
    Ok(Rotation {
        rho,
        alpha: s.alpha,
        chain,
        window,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub c: f64,
    pub alpha: f64,
    pub rho: f64,
}

/// `(c, α(c), ρ(c))` over a grid of cohomology classes.
pub fn alpha_rho_curve(g: &GeneratingFunction, cs: &[f64], grid_n: usize, horizon: usize) -> Result<Vec<CurvePoint>> {
    cs.iter()
        .map(|&c| {
            let s = solve_twist(twist_cost(g, c, grid_n, None)?)?;
            let r = rotation_number(&s, horizon)?;
            Ok(CurvePoint { c, alpha: s.alpha, rho: r.rho })
        })
        .collect()
}

/// Largest excess of `f` over its chords between neighbouring samples;
/// non-positive up to rounding for convex data. Samples must be sorted by abscissa.
pub fn convexity_violation(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(3)
        .map(|w| {
            let ((x0, y0), (x1, y1), (x2, y2)) = (w[0], w[1], w[2]);
            let t = (x1 - x0) / (x2 - x0);
            y1 - ((1.0 - t) * y0 + t * y2)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest decrease between consecutive values.
pub fn monotonicity_violation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaValue {
    pub rho: f64,
    pub beta: f64,
    /// Cohomology sample attaining the maximum.
    pub argmax: f64,
    /// `ρ` lies outside the range of secant slopes of the samples, so the
    /// maximum sits at an end of the sample grid.
    pub extrapolated: bool,
}

/// Discrete Legendre transform `β(ρ) = max_c ρc - α(c)` over sorted samples `(c, α(c))`.
pub fn beta_from_alpha(samples: &[(f64, f64)], rho: f64) -> Result<BetaValue> {
    if samples.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let (k, beta) = legendre(samples, rho);
    let slopes: Vec<f64> = samples.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let extrapolated = match (slopes.first(), slopes.last()) {
        (Some(&lo), Some(&hi)) => rho < lo || rho > hi,
        _ => true,
    };
    Ok(BetaValue {
        rho,
        beta,
        argmax: samples[k].0,
        extrapolated,
    })
}

/// `max_i (p·x_i - y_i)` and its argmax.
pub fn legendre(samples: &[(f64, f64)], p: f64) -> (usize, f64) {
    samples
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| (i, p * x - y))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PseudographPoint {
    pub theta: f64,
    /// `c + u'_-(θ)`.
    pub r_minus: f64,
    /// `c + u'_+(θ)`.
    pub r_plus: f64,
}

/// One-sided momenta `c + u'_∓` of a weak KAM solution on the circle grid;
/// errors where `r⁺ > r⁻ + tol` (semiconcavity fails).
pub fn pseudograph(u: &ValueFunction, c: f64, tol: f64) -> Result<Vec<PseudographPoint>> {
    let n = u.len();
    if n < 2 {
        return Err(Error::NotCircle);
    }
    let h = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let prev = u[(i + n - 1) % n];
            let next = u[(i + 1) % n];
            let p = PseudographPoint {
                theta: i as f64 * h,
                r_minus: c + (u[i] - prev) / h,
                r_plus: c + (next - u[i]) / h,
            };
            let excess = p.r_plus - p.r_minus;
            if excess > tol {
                return Err(Error::Semiconcavity { index: i, excess });
            }
            Ok(p)
        })
        .collect()
}

/// Indices where the momentum jumps down by more than `tol`.
pub fn pseudograph_jumps(points: &[PseudographPoint], tol: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.r_minus - p.r_plus > tol)
        .map(|(i, _)| i)
        .collect()
}

/// `S̃(θ,Θ) + S̃(θ',Θ') - S̃(θ,Θ') - S̃(θ',Θ)`, positive whenever
/// `(θ - θ')(Θ - Θ') < 0`.
pub fn fundamental_lemma_gap(g: &GeneratingFunction, t: f64, t2: f64, tt: f64, tt2: f64) -> f64 {
    g.eval(t, tt) + g.eval(t2, tt2) - g.eval(t, tt2) - g.eval(t2, tt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_family_generates_the_map() {
        let g = make_generating(Family::Standard { eps: 1.0 }).unwrap();
        let (tt, _) = g.map(0.25, 0.5).unwrap();
        assert!((tt - (0.75 - 1.0 / (2.0 * PI))).abs() < 1e-12);
        let g0 = make_generating(Family::Standard { eps: 0.0 }).unwrap();
        let (tt, rr) = g0.map(0.1, 0.3).unwrap();
        assert!((tt - 0.4).abs() < 1e-12 && (rr - 0.3).abs() < 1e-12);
        assert_eq!(GeneratingFunction::integrable().eval(0.2, 1.2), 0.5);
    }

    #[test]
    fn custom_periodicity_is_checked() {
        assert!(matches!(
            GeneratingFunction::custom(|t, tt| 0.5 * (tt - t).powi(2) + 0.1 * t),
            Err(Error::Generating(_))
        ));
        assert!(GeneratingFunction::custom(|t, tt| 0.5 * (tt - t).powi(2) + 0.01 * (2.0 * PI * tt).sin()).is_ok());
    }

    #[test]
    fn integrable_cost_entries() {
        let g = GeneratingFunction::integrable();
        let tc = twist_cost(&g, 0.0, 8, None).unwrap();
        assert_eq!(tc.kernel.entry(0, 1), 0.5 / 64.0);
        assert_eq!(tc.kernel.entry(1, 0), 0.5 / 64.0);
        assert_eq!(tc.kernel.lift(7, 0), Some(0.125));
        // δ²/2 - 0.3δ is minimal at δ = 0.3.
        let tc = twist_cost(&g, 0.3, 10, None).unwrap();
        for i in 0..10 {
            assert!((tc.kernel.entry(i, (i + 3) % 10) + 0.045).abs() < 1e-15);
        }
        assert!(matches!(twist_cost(&g, 3.0, 8, Some(2)), Err(Error::WindowBoundary { .. })));
        assert!(twist_cost(&g, 3.0, 8, Some(5)).is_ok());
    }

    #[test]
    fn alpha_and_rotation_integrable() {
        let g = GeneratingFunction::integrable();
        assert_eq!(alpha_of_c(&g, 0.0, 16, None).unwrap(), 0.0);
        let s = solve_twist(twist_cost(&g, 0.25, 16, None).unwrap()).unwrap();
        assert!((s.alpha - 0.03125).abs() < 1e-12);
        let r = rotation_number(&s, 40).unwrap();
        assert!((r.rho - 0.25).abs() < 1e-12);
    }

    #[test]
    fn legendre_of_parabola() {
        let samples: Vec<(f64, f64)> = (0..=20).map(|k| {
            let c = -1.0 + 0.1 * k as f64;
            (c, 0.5 * c * c)
        }).collect();
        let b = beta_from_alpha(&samples, 0.4).unwrap();
        assert!((b.beta - 0.08).abs() < 1e-12 && !b.extrapolated);
        assert!(beta_from_alpha(&samples, 2.0).unwrap().extrapolated);
        assert!(convexity_violation(&samples) < 1e-15);
    }

    #[test]
    fn pseudograph_of_kink() {
        // u = -|θ - 1/2| on the circle grid: a downward kink at 1/2 and an upward one at 0.
        let n = 8;
        let u = ValueFunction::new((0..n).map(|i| -((i as f64 / n as f64) - 0.5).abs()).collect()).unwrap();
        assert!(matches!(pseudograph(&u, 0.0, 1e-9), Err(Error::Semiconcavity { index: 0, .. })));
        let u = ValueFunction::zeros(n);
        let p = pseudograph(&u, 0.3, 1e-9).unwrap();
        assert!(p.iter().all(|q| (q.r_minus - 0.3).abs() < 1e-15 && (q.r_plus - 0.3).abs() < 1e-15));
        assert!(pseudograph_jumps(&p, 1e-9).is_empty());
    }
}
