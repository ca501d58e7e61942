//! Closed measures, the Mather linear program and extremal cycle measures.

pub mod cycles;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::aubry::AubryData;
use crate::error::{Error, Result};
use crate::space_cost::CostKernel;

pub use cycles::simple_cycles;

/// Probability on `X × X` with equal marginals, stored sparsely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedMeasure {
    n: usize,
    /// Sorted by pair, positive weights only.
    weights: Vec<((usize, usize), f64)>,
}

pub const MASS_TOL: f64 = 1e-12;
pub const BALANCE_TOL: f64 = 1e-10;

impl ClosedMeasure {
    pub fn new(n: usize, mut weights: Vec<((usize, usize), f64)>) -> Result<Self> {
        for &((i, j), w) in &weights {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: i.max(j) + 1,
                });
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::OutOfRange(format!("weight on ({i}, {j}) is {w}")));
            }
        }
        weights.retain(|e| e.1 > 0.0);
        weights.sort_by(|a, b| a.0.cmp(&b.0));
        weights.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        let m = Self { n, weights };
        let mass = m.total_mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::OutOfRange(format!("total mass {mass} is not 1")));
        }
        let r = m.marginal_residual();
        if r > BALANCE_TOL {
            return Err(Error::OutOfRange(format!("marginals differ by {r:e}")));
        }
        Ok(m)
    }

    /// Uniform measure on the arcs of a cycle `x₀ → x₁ → … → x₀`.
    pub fn uniform_cycle(n: usize, cycle: &[usize]) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let w = 1.0 / cycle.len() as f64;
        let weights = (0..cycle.len())
            .map(|k| ((cycle[k], cycle[(k + 1) % cycle.len()]), w))
            .collect();
        Self::new(n, weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[((usize, usize), f64)] {
        &self.weights
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.weights.iter().map(|e| e.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().map(|e| e.1).sum()
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for &((i, _), w) in &self.weights {
            m[i] += w;
        }
        m
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for &((_, j), w) in &self.weights {
            m[j] += w;
        }
        m
    }

    pub fn marginal_residual(&self) -> f64 {
        self.first_marginal()
            .iter()
            .zip(self.second_marginal())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `∫ c dμ`.
    pub fn integral(&self, c: &CostKernel) -> f64 {
        self.weights.iter().map(|&((i, j), w)| w * c.entry(i, j)).sum()
    }

    /// `∫ f(x) dπ₁*μ(x)`.
    pub fn marginal_integral(&self, f: &[f64]) -> f64 {
        self.weights.iter().map(|&((i, _), w)| w * f[i]).sum()
    }

    /// `∫ f(y) - f(x) dμ`, zero for closed measures.
    pub fn coboundary_integral(&self, f: &[f64]) -> f64 {
        self.weights.iter().map(|&((i, j), w)| w * (f[j] - f[i])).sum()
    }
}

/// Default cap on the number of points for the dense simplex.
pub const LP_CAP: usize = 60;

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub value: f64,
    pub measure: ClosedMeasure,
    pub iterations: usize,
}

/// `min ∫ c dμ` over closed probability measures, by the dense simplex.
pub fn lp_min_cost(c: &CostKernel) -> Result<LpSolution> {
    lp_min_cost_capped(c, LP_CAP)
}

pub fn lp_min_cost_capped(c: &CostKernel, cap: usize) -> Result<LpSolution> {
    let n = c.n();
    if n > cap {
        return Err(Error::BudgetExceeded { needed: n, budget: cap });
    }
    let dense = c.to_dense();
    let arcs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| dense[(i, j)].is_finite())
        .collect();
    // Balance rows for points 0..n-1 (the last one is implied), then the mass row.
    let mut a = vec![vec![0.0; arcs.len()]; n];
    for (k, &(i, j)) in arcs.iter().enumerate() {
        if i != j {
            if i + 1 < n {
                a[i][k] += 1.0;
            }
            if j + 1 < n {
                a[j][k] -= 1.0;
            }
        }
        a[n - 1][k] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let cost: Vec<f64> = arcs.iter().map(|&(i, j)| dense[(i, j)]).collect();
    let budget = 200 * (arcs.len() + n) + 10_000;
    let out = simplex::solve(&a, &b, &cost, budget)?;
    // Degenerate basic variables carry rounding noise; they are zero at the vertex.
    let x: Vec<f64> = out.x.iter().map(|&w| if w > 1e-12 { w } else { 0.0 }).collect();
    let total: f64 = x.iter().sum();
    let weights = arcs
        .iter()
        .zip(&x)
        .filter(|e| *e.1 > 0.0)
        .map(|(&p, &w)| (p, w / total))
        .collect();
    let measure = ClosedMeasure::new(n, weights)?;
    Ok(LpSolution {
        value: measure.integral(c),
        measure,
        iterations: out.iterations,
    })
}

#[derive(Clone, Debug)]
pub struct MatherFamily {
    /// Uniform measures on the minimizing simple cycles of `(𝒜, Â)`.
    pub extremals: Vec<ClosedMeasure>,
    pub cycles: Vec<Vec<usize>>,
    /// `-c0`, the common value of `∫ c dμ` over the family.
    pub lp_value: f64,
    pub mather_pairs: Vec<(usize, usize)>,
    /// The cycle cap was reached: the family may be incomplete.
    pub capped: bool,
}

pub const DEFAULT_CYCLE_CAP: usize = 100_000;

/// Minimizing simple cycles of the graph `(𝒜, Â)`, each as a uniform measure.
pub fn extremal_measures(c: &CostKernel, c0: f64, a: &AubryData, cap: usize) -> Result<MatherFamily> {
    let n = c.n();
    let mut adj = vec![Vec::new(); n];
    for &(x, y) in &a.pairs {
        adj[x].push(y);
    }
    let (all, capped) = simple_cycles(&adj, cap);
    let eps_a = a.eps;
    let mut cycles = Vec::new();
    let mut extremals = Vec::new();
    for cyc in all {
        let len = cyc.len();
        let excess: f64 = (0..len).map(|k| c.entry(cyc[k], cyc[(k + 1) % len]) + c0).sum();
        if excess.abs() <= eps_a * len as f64 {
            extremals.push(ClosedMeasure::uniform_cycle(n, &cyc)?);
            cycles.push(cyc);
        }
    }
    if extremals.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut mather_pairs: Vec<(usize, usize)> = extremals.iter().flat_map(|m| m.support()).collect();
    mather_pairs.sort_unstable();
    mather_pairs.dedup();
    Ok(MatherFamily {
        extremals,
        cycles,
        lp_value: -c0,
        mather_pairs,
        capped,
    })
}

/// Mather set `ℳ` and 2-Mather set `ℳ̂` as sorted index sets; asserts `ℳ ⊆ 𝒜`.
pub fn mather_set(f: &MatherFamily, a: &AubryData) -> Result<(Vec<usize>, Vec<(usize, usize)>)> {
    if f.extremals.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let pairs = f.mather_pairs.clone();
    let mut points: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    points.sort_unstable();
    points.dedup();
    if let Some(&x) = points.iter().find(|&&x| !a.contains(x)) {
        return Err(Error::OutOfRange(format!("Mather point {x} lies outside the Aubry set")));
    }
    Ok((points, pairs))
}

/// `∫ (y - x) dμ` with the displacement lifts recorded on the kernel.
pub fn rotation_number_of_measure(c: &CostKernel, mu: &ClosedMeasure) -> Result<f64> {
    let lifts = c.lifts().ok_or(Error::NotCircle)?;
    Ok(mu.weights().iter().map(|&((i, j), w)| w * lifts[(i, j)]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aubry::{aubry_sets, peierls_barrier};
    use crate::space_cost::{build_circle_cost, build_dense_cost};

    fn two_point() -> CostKernel {
        build_dense_cost(2, vec![vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap()
    }

    #[test]
    fn closed_measure_validation() {
        assert!(ClosedMeasure::new(2, vec![((0, 1), 1.0)]).is_err());
        assert!(ClosedMeasure::new(2, vec![((0, 1), 0.5), ((1, 0), 0.4)]).is_err());
        let m = ClosedMeasure::uniform_cycle(3, &[0, 2, 1]).unwrap();
        assert_eq!(m.weights().len(), 3);
        assert!(m.coboundary_integral(&[1.0, -3.0, 7.0]).abs() < 1e-15);
    }

    #[test]
    fn lp_on_fixtures() {
        let s = lp_min_cost(&two_point()).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.measure.weights(), &[((0, 0), 1.0)]);
        let k = build_dense_cost(3, vec![vec![2.5; 3]; 3]).unwrap();
        assert!((lp_min_cost(&k).unwrap().value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn family_on_fixtures() {
        let c = two_point();
        let b = peierls_barrier(&c, 0.0).unwrap();
        let a = aubry_sets(&c, &b, 1e-6).unwrap();
        let f = extremal_measures(&c, 0.0, &a, DEFAULT_CYCLE_CAP).unwrap();
        assert_eq!(f.cycles, vec![vec![0]]);
        assert_eq!(mather_set(&f, &a).unwrap().0, vec![0]);

        let k = build_dense_cost(3, vec![vec![1.0; 3]; 3]).unwrap();
        let b = peierls_barrier(&k, -1.0).unwrap();
        let a = aubry_sets(&k, &b, 1e-6).unwrap();
        let f = extremal_measures(&k, -1.0, &a, DEFAULT_CYCLE_CAP).unwrap();
        assert_eq!(f.extremals.len(), 8);
        assert_eq!(mather_set(&f, &a).unwrap().0, vec![0, 1, 2]);
    }

    #[test]
    fn rotation_of_fixed_point_measure() {
        let c = build_circle_cost(4, |x, y| {
            let d = crate::space_cost::wrap_displacement(y - x);
            0.5 * d * d
        }, None)
        .unwrap();
        let m = ClosedMeasure::uniform_cycle(4, &[2]).unwrap();
        assert_eq!(rotation_number_of_measure(&c, &m).unwrap(), 0.0);
        let m = ClosedMeasure::uniform_cycle(4, &[0, 2]).unwrap();
        // Lifts of minimal modulus: +1/2 both ways.
        assert_eq!(rotation_number_of_measure(&c, &m).unwrap(), 0.5);
        assert!(rotation_number_of_measure(&two_point(), &m).is_err());
    }
}
