//! The simplex optimum against exhaustive cycle enumeration.

mod common;

use common::*;
use rand::Rng;
use weakkam::mather::lp_min_cost;
use weakkam::minplus::critical_value_karp;

#[test]
fn lp_value_is_min_cycle_mean() {
    let mut rng = rng(21);
    for k in 0..200 {
        let n = rng.gen_range(1..=6);
        let c = match k % 3 {
            0 => random_integer(&mut rng, n, 3),
            1 => random_dense(&mut rng, n, -2.0, 2.0, 0.4),
            _ => random_dense(&mut rng, n, 0.0, 1.0, 0.0),
        };
        let best = brute_force_cycles(&c)
            .iter()
            .map(|cy| cycle_cost(&c, cy) / cy.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let lp = lp_min_cost(&c).unwrap();
        assert!((lp.value - best).abs() <= 1e-9, "kernel {k}: LP {} vs {best}", lp.value);
        assert!((critical_value_karp(&c).value + best).abs() <= 1e-9);
        assert!(lp.measure.marginal_residual() <= 1e-12);
        assert!((lp.measure.total_mass() - 1.0).abs() <= 1e-12);
        // A vertex of the closed-measure polytope is uniform on one simple cycle.
        let w = lp.measure.weights();
        let m = w.len() as f64;
        assert!(w.iter().all(|&(_, v)| (v - 1.0 / m).abs() <= 1e-9), "kernel {k}: {w:?}");
    }
}
