//! A 1-Lipschitz-style self-map of a triangle whose discounted fixed points
//! `X_λ = f(λ X_λ)` oscillate as `λ → 1`.
//!
//! `𝔗 = {-½ ≤ y ≤ ½ - |x|}`, `f(x, y) = (x + ε(y), α(y + ½) - ½)`,
//! `ε = ε₀ · h ∘ g⁻¹` on `[-½, 0]` and `ε(0)` above, with
//! `g(λ) = λ(α - 1) / (2(1 - αλ))` and `h(x) = (1 - x) sin(ln|1 - x|)`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TriangleMap {
    alpha: f64,
    eps0: f64,
}

const SAMPLES: usize = 20_000;

impl TriangleMap {
    /// Rejects parameters for which `f` does not map the triangle into itself,
    /// i.e. `|ε(y)| ≤ (1 - α)(y + ½)` fails at a sample point.
    pub fn new(alpha: f64, eps0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::OutOfRange(format!("alpha = {alpha} is outside (0, 1)")));
        }
        if !(eps0 >= 0.0 && eps0.is_finite()) {
            return Err(Error::OutOfRange(format!("eps0 = {eps0} must be non-negative")));
        }
        let t = Self { alpha, eps0 };
        for k in 0..=SAMPLES {
            let y = -0.5 + 0.5 * k as f64 / SAMPLES as f64;
            let bound = (1.0 - alpha) * (y + 0.5);
            if t.eps(y).abs() > bound + 1e-15 {
                return Err(Error::OutOfRange(format!(
                    "eps0 = {eps0} too large: |eps({y})| exceeds (1 - alpha)(y + 1/2) = {bound}"
                )));
            }
        }
        Ok(t)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn g(&self, lambda: f64) -> f64 {
        lambda * (self.alpha - 1.0) / (2.0 * (1.0 - self.alpha * lambda))
    }

    pub fn g_inv(&self, mu: f64) -> f64 {
        2.0 * mu / (self.alpha - 1.0 + 2.0 * self.alpha * mu)
    }

    pub fn eps(&self, y: f64) -> f64 {
        self.eps0 * h(self.g_inv(y.min(0.0)))
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let tol = 1e-12;
        p[1] >= -0.5 - tol && p[1] <= 0.5 - p[0].abs() + tol
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] + self.eps(p[1]), self.alpha * (p[1] + 0.5) - 0.5]
    }

    /// `f_λ(p) = f(λp)`.
    pub fn apply_lambda(&self, p: [f64; 2], lambda: f64) -> [f64; 2] {
        self.apply([lambda * p[0], lambda * p[1]])
    }

    /// `X_λ = (ε₀ sin(ln(1 - λ)), g(λ)/λ)`.
    pub fn closed_form(&self, lambda: f64) -> [f64; 2] {
        [
            self.eps0 * (1.0 - lambda).ln().sin(),
            (self.alpha - 1.0) / (2.0 * (1.0 - self.alpha * lambda)),
        ]
    }

    /// Largest sampled slope of `ε` on `[-½, 0]`; `f` is 1-Lipschitz for
    /// `‖·‖₁` when this is at most `1 - α`.
    pub fn lipschitz_estimate(&self) -> f64 {
        let step = 0.5 / SAMPLES as f64;
        (0..SAMPLES)
            .map(|k| {
                let y = -0.5 + step * k as f64;
                ((self.eps(y + step) - self.eps(y)) / step).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn h(x: f64) -> f64 {
    let d = 1.0 - x;
    if d == 0.0 {
        0.0
    } else {
        d * d.abs().ln().sin()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TriangleRow {
    pub lambda: f64,
    pub closed: [f64; 2],
    pub iterated: [f64; 2],
    /// `‖closed - iterated‖₁`.
    pub diff: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TriangleReport {
    pub rows: Vec<TriangleRow>,
    pub lipschitz: f64,
    pub nonexpansive: bool,
    pub min_x: f64,
    pub max_x: f64,
}

/// `λ = 1 - e^{-t}` for 20 values of `t` evenly spaced in `[π/2, 3π/2]`,
/// hitting both `sin(ln(1 - λ)) = -1` and `+1`.
pub fn default_triangle_schedule() -> Vec<f64> {
    use std::f64::consts::PI;
    (0..20)
        .map(|k| 1.0 - (-(PI / 2.0 + PI * k as f64 / 19.0)).exp())
        .collect()
}

/// Iterates `f_λ` from the origin to its fixed point for each `λ` and
/// compares with the closed form.
pub fn triangle_fixed_points(t: &TriangleMap, schedule: &[f64]) -> Result<TriangleReport> {
    let mut rows = Vec::with_capacity(schedule.len());
    for &lambda in schedule {
        crate::minplus::check_lambda(lambda)?;
        let (iterated, iterations) = iterate(t, lambda)?;
        let closed = t.closed_form(lambda);
        let diff = (closed[0] - iterated[0]).abs() + (closed[1] - iterated[1]).abs();
        rows.push(TriangleRow {
            lambda,
            closed,
            iterated,
            diff,
            iterations,
        });
    }
    let lipschitz = t.lipschitz_estimate();
    let min_x = rows.iter().map(|r| r.closed[0]).fold(f64::INFINITY, f64::min);
    let max_x = rows.iter().map(|r| r.closed[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(TriangleReport {
        rows,
        lipschitz,
        nonexpansive: lipschitz <= 1.0 - t.alpha + 1e-9,
        min_x,
        max_x,
    })
}

fn iterate(t: &TriangleMap, lambda: f64) -> Result<([f64; 2], usize)> {
    // The y-coordinate contracts by αλ and x by λ once y has settled, so the
    // a-posteriori bound `step · λ/(1 - λ)` controls the error.
    let cap = 10_000 + (40.0 / (1.0 - lambda)) as usize;
    let mut p = [0.0, 0.0];
    for it in 1..=cap {
        let q = t.apply_lambda(p, lambda);
        if !t.contains(q) {
            return Err(Error::LeftTriangle { x: q[0], y: q[1] });
        }
        let step = (q[0] - p[0]).abs() + (q[1] - p[1]).abs();
        p = q;
        if step * lambda / (1.0 - lambda) <= 1e-13 {
            return Ok((p, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: cap,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_extremes() {
        let t = TriangleMap::new(0.75, 0.1).unwrap();
        let a = t.closed_form(1.0 - (-PI / 2.0).exp());
        assert!((a[0] + 0.1).abs() < 1e-15);
        let b = t.closed_form(1.0 - (-1.5 * PI).exp());
        assert!((b[0] - 0.1).abs() < 1e-15);
        let z = TriangleMap::new(0.75, 0.0).unwrap().closed_form(0.3);
        assert_eq!(z[0], 0.0);
        assert!((z[1] + 0.25 / (2.0 * (1.0 - 0.225))).abs() < 1e-15);
    }

    #[test]
    fn g_inverse() {
        let t = TriangleMap::new(0.75, 0.1).unwrap();
        for l in [0.0, 0.2, 0.9, 1.0] {
            assert!((t.g_inv(t.g(l)) - l).abs() < 1e-14);
        }
        assert!((t.g(1.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn iteration_matches_and_oscillates() {
        let t = TriangleMap::new(0.75, 0.1).unwrap();
        let r = triangle_fixed_points(&t, &default_triangle_schedule()).unwrap();
        assert_eq!(r.rows.len(), 20);
        assert!(r.rows.iter().all(|row| row.diff < 1e-9));
        assert!((r.min_x + 0.1).abs() < 1e-12 && (r.max_x - 0.1).abs() < 1e-12);
        assert!(!r.nonexpansive);
    }

    #[test]
    fn rejects_escaping_parameters() {
        assert!(TriangleMap::new(0.75, 0.5).is_err());
        assert!(TriangleMap::new(1.0, 0.1).is_err());
        assert!(TriangleMap::new(0.5, 0.01).unwrap().lipschitz_estimate() < 0.5);
    }
}
