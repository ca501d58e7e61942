//! Both barrier routes against a brute-force liminf of `D_n`.

mod common;

use common::*;
use rand::Rng;
use weakkam::aubry::{aubry_sets, peierls_barrier_with, BarrierMethod, BarrierOptions};
use weakkam::minplus::critical_value_karp;
use weakkam::{CostKernel, Tolerances};

/// `min over n in [k_lo, k_hi] of D_n`, by naive min-plus products. With
/// integer entries and at most five points the sequence is periodic with a
/// period dividing 60 well before `k_lo`.
fn brute_barrier(c: &CostKernel, c0: f64, k_lo: usize, k_hi: usize) -> Vec<Vec<f64>> {
    let n = c.n();
    let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| c.entry(i, j) + c0).collect()).collect();
    let mut d = a.clone();
    let mut h = vec![vec![f64::INFINITY; n]; n];
    for k in 1..=k_hi {
        if k > 1 {
            d = (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|m| d[i][m] + a[m][j]).fold(f64::INFINITY, f64::min)).collect())
                .collect();
        }
        if k >= k_lo {
            for i in 0..n {
                for j in 0..n {
                    h[i][j] = h[i][j].min(d[i][j]);
                }
            }
        }
    }
    h
}

fn integer_with_holes(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> CostKernel {
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    // Keep the cycle i -> i+1 so the kernel stays irreducible.
                    if j != (i + 1) % n && rng.gen::<f64>() < 0.3 {
                        f64::INFINITY
                    } else {
                        rng.gen_range(0..=4) as f64
                    }
                })
                .collect()
        })
        .collect();
    weakkam::space_cost::build_dense_cost(n, entries).unwrap()
}

#[test]
fn power_and_closure_match_brute_force() {
    let mut rng = rng(11);
    for k in 0..150 {
        let n = rng.gen_range(1..=5);
        let c = if k % 2 == 0 { random_integer(&mut rng, n, 4) } else { integer_with_holes(&mut rng, n) };
        let c0 = critical_value_karp(&c).value;
        let oracle = brute_barrier(&c, c0, 600, 720);
        for method in [BarrierMethod::Power, BarrierMethod::CriticalClosure] {
            let opts = BarrierOptions {
                method: Some(method),
                ..BarrierOptions::for_kernel(&c)
            };
            let b = peierls_barrier_with(&c, c0, &opts).unwrap();
            for (x, row) in oracle.iter().enumerate() {
                for (y, &v) in row.iter().enumerate() {
                    let got = b.h[(x, y)];
                    assert!(
                        (got == v) || (got - v).abs() <= 1e-9,
                        "{method:?} kernel {k}: h({x},{y}) = {got}, brute force {v}"
                    );
                }
            }
        }
    }
}

#[test]
fn routes_agree_on_real_kernels() {
    let mut rng = rng(12);
    for _ in 0..40 {
        let n = rng.gen_range(2..=20);
        let c = random_dense(&mut rng, n, -1.0, 1.0, 0.0);
        let c0 = critical_value_karp(&c).value;
        let base = BarrierOptions::for_kernel(&c);
        let p = peierls_barrier_with(&c, c0, &BarrierOptions { method: Some(BarrierMethod::Power), ..base }).unwrap();
        let q = peierls_barrier_with(&c, c0, &BarrierOptions { method: Some(BarrierMethod::CriticalClosure), ..base })
            .unwrap();
        assert!(p.h.sup_distance(&q.h) <= 1e-9, "gap {}", p.h.sup_distance(&q.h));
        let eps = Tolerances::for_kernel(&c).eps_aubry;
        assert_eq!(aubry_sets(&c, &p, eps).unwrap().projected, aubry_sets(&c, &q, eps).unwrap().projected);
    }
}

#[test]
fn reducible_kernels_use_the_closure_route() {
    // Point 1 only reaches itself through a cycle of mean 1 > 0 = critical.
    let c = weakkam::space_cost::build_dense_cost(2, vec![vec![0.0, 1.0], vec![f64::INFINITY, 1.0]]).unwrap();
    assert!(!weakkam::aubry::is_irreducible(&c));
    let b = weakkam::aubry::peierls_barrier(&c, 0.0).unwrap();
    assert_eq!(b.method, BarrierMethod::CriticalClosure);
    assert_eq!(b.h.to_rows(), vec![vec![0.0, 1.0], vec![f64::INFINITY, f64::INFINITY]]);
}
