//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min cost·x` subject to `A x = b`, `x ≥ 0`, with `b ≥ 0`.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    /// Reduced-cost row, same width; last entry is minus the objective.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.t[r][col];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[col] = 0.0;
        }
        self.basis[r] = col;
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        self.obj = vec![0.0; w];
        self.obj[..self.cols].copy_from_slice(cost);
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb != 0.0 {
                for j in 0..w {
                    self.obj[j] -= cb * self.t[i][j];
                }
            }
        }
    }

    /// Bland iterations over columns `< allowed`; returns iterations used.
    fn run(&mut self, allowed: usize, rc_tol: f64, budget: usize) -> Result<usize> {
        let rhs = self.cols;
        for it in 0..budget {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] < -rc_tol) else {
                return Ok(it);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > PIVOT_TOL {
                    let ratio = row[rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::OutOfRange("linear program is unbounded".into()));
            };
            self.pivot(r, enter);
        }
        Err(Error::SimplexCap(budget))
    }
}

pub fn solve(a: &[Vec<f64>], b: &[f64], cost: &[f64], max_iterations: usize) -> Result<LpOutcome> {
    let m = a.len();
    let nvar = cost.len();
    let cols = nvar + m;
    let mut t = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        let mut r = vec![0.0; cols + 1];
        r[..nvar].copy_from_slice(row);
        r[nvar + i] = 1.0;
        r[cols] = b[i];
        t.push(r);
    }
    let mut tab = Tableau {
        t,
        obj: Vec::new(),
        basis: (nvar..cols).collect(),
        cols,
    };
    let mut phase1 = vec![0.0; cols];
    phase1[nvar..].iter_mut().for_each(|v| *v = 1.0);
    tab.set_objective(&phase1);
    let mut iterations = tab.run(cols, PIVOT_TOL, max_iterations)?;
    if -tab.obj[cols] > 1e-9 {
        return Err(Error::Infeasible);
    }
    // Drive artificial variables out of the basis; rows where that is impossible are redundant.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= nvar {
            if let Some(j) = (0..nvar).find(|&j| tab.t[r][j].abs() > 1e-9) {
                tab.pivot(r, j);
                iterations += 1;
            } else {
                tab.t.remove(r);
                tab.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }
    let mut phase2 = vec![0.0; cols];
    phase2[..nvar].copy_from_slice(cost);
    tab.set_objective(&phase2);
    let scale = 1.0 + cost.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    iterations += tab.run(nvar, PIVOT_TOL * scale, max_iterations.saturating_sub(iterations))?;
    let mut x = vec![0.0; nvar];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < nvar {
            x[bv] = tab.t[i][cols].max(0.0);
        }
    }
    let value = x.iter().zip(cost).map(|(x, c)| x * c).sum();
    Ok(LpOutcome { value, x, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + y + s = 4, x + 3y + t = 6
        let a = vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]];
        let out = solve(&a, &[4.0, 6.0], &[-1.0, -1.0, 0.0, 0.0], 100).unwrap();
        assert!((out.value + 4.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(solve(&a, &[1.0, 2.0], &[0.0, 0.0], 100).unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn redundant_row_dropped() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let out = solve(&a, &[1.0, 2.0], &[3.0, 1.0], 100).unwrap();
        assert!((out.value - 1.0).abs() < 1e-12);
        assert_eq!(out.x, vec![0.0, 1.0]);
    }
}
