//! Backward calibrating chains and Aubry's crossing count.

use serde::Serialize;

use super::{GeneratingFunction, TwistCost};
use crate::error::{Error, Result};
use crate::minplus::ValueFunction;
use crate::tol::Tolerances;

/// Lifted positions `θ̃_{-H}, …, θ̃_0` of a chain, oldest first.
#[derive(Clone, Debug, Serialize)]
pub struct Chain {
    pub positions: Vec<f64>,
    /// Grid index of each position.
    pub indices: Vec<usize>,
    pub c: f64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `r_k = ∂₂S̃(θ̃_{k-1}, θ̃_k)`, and `-∂₁S̃(θ̃_0, θ̃_1)` for the first point.
    pub fn momenta(&self, g: &GeneratingFunction) -> Vec<f64> {
        let p = &self.positions;
        (0..p.len())
            .map(|k| {
                if k > 0 {
                    g.d2(p[k - 1], p[k])
                } else if p.len() > 1 {
                    -g.d1(p[0], p[1])
                } else {
                    f64::NAN
                }
            })
            .collect()
    }

    /// `max |∂₂S̃(θ̃_{k-1}, θ̃_k) + ∂₁S̃(θ̃_k, θ̃_{k+1})|` over interior points.
    pub fn euler_lagrange_residual(&self, g: &GeneratingFunction) -> f64 {
        let p = &self.positions;
        (1..p.len().saturating_sub(1))
            .map(|k| (g.d2(p[k - 1], p[k]) + g.d1(p[k], p[k + 1])).abs())
            .fold(0.0, f64::max)
    }

    /// `max_k |θ̃_k - θ̃_last - (k - last)ρ|`.
    pub fn rotation_window(&self, rho: f64) -> f64 {
        let p = &self.positions;
        let last = p.len() - 1;
        p.iter()
            .enumerate()
            .map(|(k, x)| (x - p[last] - (k as f64 - last as f64) * rho).abs())
            .fold(0.0, f64::max)
    }
}

/// Follows `x ← argmin_y u(y) + S^c(y, x)` backwards `horizon` times from
/// grid point `start`, checking calibration `u(x) = u(y) + S^c(y, x) + α`.
pub fn backward_chain(cost: &TwistCost, u: &ValueFunction, alpha: f64, start: usize, horizon: usize) -> Result<Chain> {
    let k = &cost.kernel;
    let n = k.n();
    if start >= n || u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.len().max(start + 1) });
    }
    let eps = Tolerances::for_kernel(k).eps_num * (1.0 + u.sup_norm());
    let mut indices = vec![start];
    let mut positions = vec![start as f64 / n as f64];
    let mut x = start;
    for step in 1..=horizon {
        let mut best = (f64::INFINITY, 0);
        for y in k.sources(x) {
            let v = u[y] + k.entry(y, x);
            if v < best.0 {
                best = (v, y);
            }
        }
        let residual = (best.0 + alpha - u[x]).abs();
        if !(residual <= eps) {
            return Err(Error::Calibration { step, residual });
        }
        let y = best.1;
        let lift = k.lift(y, x).ok_or(Error::NotCircle)?;
        positions.push(positions.last().expect("non-empty") - lift);
        indices.push(y);
        x = y;
    }
    positions.reverse();
    indices.reverse();
    Ok(Chain {
        positions,
        indices,
        c: cost.c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Crossing {
    /// `θ̃_i = θ̃'_i`.
    At(usize),
    /// `(θ̃_i - θ̃'_i)(θ̃_{i+1} - θ̃'_{i+1}) < 0`.
    Between(usize),
}

/// Crossings of two chains on a common index range; positions within `tol`
/// count as equal.
pub fn count_crossings(a: &[f64], b: &[f64], tol: f64) -> Vec<Crossing> {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| if (x - y).abs() <= tol { 0.0 } else { x - y })
        .collect();
    let mut out = Vec::new();
    for i in 0..d.len() {
        if d[i] == 0.0 {
            out.push(Crossing::At(i));
        }
        if i + 1 < d.len() && d[i] * d[i + 1] < 0.0 {
            out.push(Crossing::Between(i));
        }
    }
    out
}

/// Aubry's non-crossing alternative for two chains: no crossing, one
/// crossing, or exactly two at the two ends.
///
/// Grid chains are generated by a deterministic argmin, so once two of them
/// meet they coincide on all earlier indices; only the part after the last
/// meeting point is compared.
pub fn noncrossing_holds(a: &[f64], b: &[f64], tol: f64) -> bool {
    let len = a.len().min(b.len());
    let (a, b) = (&a[a.len() - len..], &b[b.len() - len..]);
    let first = (0..len).rev().find(|&i| (a[i] - b[i]).abs() <= tol).unwrap_or(0);
    let (a, b) = (&a[first..], &b[first..]);
    let cr = count_crossings(a, b, tol);
    match cr.as_slice() {
        [] | [_] => true,
        [Crossing::At(0), Crossing::At(j)] => *j == a.len() - 1,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_counts() {
        let a = [0.0, 1.0, 2.0, 3.0];
        let b = [0.5, 0.5, 2.5, 3.5];
        assert_eq!(count_crossings(&a, &b, 1e-12), vec![Crossing::Between(0), Crossing::Between(1)]);
        assert!(!noncrossing_holds(&a, &b, 1e-12));
        let c = [0.0, 0.2, 0.4, 0.6];
        let d = [0.0, 0.3, 0.6, 0.9];
        // Merged at the oldest index only: one crossing at the start of the compared range.
        assert!(noncrossing_holds(&c, &d, 1e-12));
        let e = [1.0, 0.0, 2.0];
        let f = [1.0, 0.5, 2.0];
        assert!(noncrossing_holds(&e, &f, 1e-12));
    }
}
