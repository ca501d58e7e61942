//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakkam::space_cost::build_dense_cost;
use weakkam::CostKernel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn two_point() -> CostKernel {
    build_dense_cost(2, vec![vec![0.0, 2.0], vec![2.0, 1.0]]).unwrap()
}

pub fn constant(n: usize, k: f64) -> CostKernel {
    build_dense_cost(n, vec![vec![k; n]; n]).unwrap()
}

/// Uniform entries in `[lo, hi)`; with `holes`, each off-diagonal entry is
/// `+inf` with that probability (the diagonal stays finite).
pub fn random_dense(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, holes: f64) -> CostKernel {
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i != j && rng.gen::<f64>() < holes {
                        f64::INFINITY
                    } else {
                        rng.gen_range(lo..hi)
                    }
                })
                .collect()
        })
        .collect();
    build_dense_cost(n, entries).unwrap()
}

/// Small integer entries, so that ties between cycles are common.
pub fn random_integer(rng: &mut ChaCha8Rng, n: usize, max: i32) -> CostKernel {
    let entries = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0..=max) as f64).collect())
        .collect();
    build_dense_cost(n, entries).unwrap()
}

/// All simple cycles by brute-force depth-first search, each rotated to
/// start at its smallest vertex.
pub fn brute_force_cycles(c: &CostKernel) -> Vec<Vec<usize>> {
    fn extend(c: &CostKernel, start: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        for next in 0..c.n() {
            if !c.entry(last, next).is_finite() {
                continue;
            }
            if next == start {
                out.push(path.clone());
            } else if next > start && !path.contains(&next) {
                path.push(next);
                extend(c, start, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for s in 0..c.n() {
        extend(c, s, &mut vec![s], &mut out);
    }
    out
}

pub fn cycle_cost(c: &CostKernel, cycle: &[usize]) -> f64 {
    let l = cycle.len();
    (0..l).map(|k| c.entry(cycle[k], cycle[(k + 1) % l])).sum()
}

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
