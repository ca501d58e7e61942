//! Command dispatch. Each command fills a report and a list of output files.

use std::time::Instant;

use serde_json::json;
use weakkam::aubry::{aubry_sets, negative_residual, peierls_barrier_with, strict_subsolution, AubryData, BarrierData, BarrierOptions};
use weakkam::discounted::degenerate::{
    check_alpha_mass, default_beta_bound, default_schedule_to_zero, formula_u0_alpha, limit_u0_alpha, sandwich,
    solve_u_lambda_alpha, DegenerateWeight,
};
use weakkam::discounted::triangle::{default_triangle_schedule, triangle_fixed_points, TriangleMap};
use weakkam::discounted::{
    conjugate_pair_test_tol, default_schedule_to_one, formula_u1, formula_v1, limit_u1_with, limit_v1_with, LimitOptions,
};
use weakkam::mather::{extremal_measures, lp_min_cost, mather_set, rotation_number_of_measure, MatherFamily, DEFAULT_CYCLE_CAP};
use weakkam::minplus::critical_value_karp;
use weakkam::twist::{
    backward_chain, beta_from_alpha, convexity_violation, make_generating, monotonicity_violation,
    noncrossing_holds, pseudograph, rotation_number, solve_twist, twist_cost, Family,
};
use weakkam::{CostKernel, Error, Tolerances, ValueFunction};

use crate::config::{Command, Resolved, RunConfig};
use crate::report::{OutputFile, RunReport, Table};
use crate::CliError;

pub struct Outcome {
    pub report: RunReport,
    pub files: Vec<OutputFile>,
}

/// Validates `config`, then runs `command`. Configuration problems are
/// returned as errors; solver failures end up in the report.
pub fn run(config: &RunConfig, command: Command) -> Result<Outcome, CliError> {
    let start = Instant::now();
    config.validate(command)?;
    let kernel = match &config.instance {
        Some(spec) => Some(spec.build().map_err(|e| CliError::Config(format!("instance: {e}")))?),
        None => None,
    };
    let scale = kernel.as_ref().map_or(0.0, |c| c.sup_norm());
    let tol = config.tolerances.resolve(Tolerances::for_scale(scale))?;
    if command == Command::Triangle {
        let t = config.triangle.expect("validated");
        TriangleMap::new(t.alpha, t.eps0).map_err(|e| CliError::Config(format!("triangle: {e}")))?;
    }
    if let Some(t) = &config.twist {
        make_generating(t.generating).map_err(|e| CliError::Config(format!("twist.generating: {e}")))?;
    }
    if let (Some(d), Some(c)) = (&config.degenerate, &kernel) {
        if d.alpha.len() != c.n() {
            return Err(CliError::Config(format!(
                "degenerate.alpha has {} weights for {} points",
                d.alpha.len(),
                c.n()
            )));
        }
    }

    let mut report = RunReport::new(command, config.clone());
    let mut files = Vec::new();
    let mut ctx = Ctx {
        config,
        tol,
        report: &mut report,
        files: &mut files,
    };
    let result = match command {
        Command::Solve => ctx.solve(kernel.as_ref().expect("validated")),
        Command::Mather => ctx.mather(kernel.as_ref().expect("validated")),
        Command::Discounted => ctx.discounted(kernel.as_ref().expect("validated")),
        Command::Degenerate => ctx.degenerate(kernel.as_ref().expect("validated")),
        Command::Twist => ctx.twist(),
        Command::Triangle => ctx.triangle(),
    };
    if let Err(e) = result {
        report.error = Some(e.to_string());
    }
    report.finish();
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(Outcome { report, files })
}

struct Ctx<'a> {
    config: &'a RunConfig,
    tol: Resolved,
    report: &'a mut RunReport,
    files: &'a mut Vec<OutputFile>,
}

struct Analysis {
    c0: f64,
    b: BarrierData,
    a: AubryData,
}

type Res = weakkam::Result<()>;

impl Ctx<'_> {
    fn analyse(&mut self, c: &CostKernel) -> weakkam::Result<Analysis> {
        let cv = critical_value_karp(c);
        let opts = BarrierOptions {
            eps_num: self.tol.base.eps_num,
            ..BarrierOptions::for_kernel(c)
        };
        let b = peierls_barrier_with(c, cv.value, &opts)?;
        let a = aubry_sets(c, &b, self.tol.base.eps_aubry)?;
        self.report.scalar("c0", cv.value);
        self.report.bound("critical_cycle_mean", cv.residual, self.tol.base.eps_num);
        self.report.set("aubry", a.projected.clone());
        self.report.flag("barrier_fallback", b.fallback);
        Ok(Analysis { c0: cv.value, b, a })
    }

    fn family(&mut self, c: &CostKernel, an: &Analysis) -> weakkam::Result<MatherFamily> {
        let f = extremal_measures(c, an.c0, &an.a, DEFAULT_CYCLE_CAP)?;
        self.report.flag("cycle_cap_reached", f.capped);
        Ok(f)
    }

    fn solve(&mut self, c: &CostKernel) -> Res {
        let an = self.analyse(c)?;
        let eps = self.tol.base.eps_num;
        let n = c.n();
        self.report.scalar("barrier_period", an.b.period as f64);
        self.report.scalar("barrier_tail_start", an.b.tail_start as f64);

        let diag = (0..n).map(|x| an.b.h[(x, x)]).fold(f64::INFINITY, f64::min);
        self.report.bound("barrier_diagonal_nonnegative", -diag, eps);
        let x0 = an.a.projected[0];
        let u = ValueFunction::new(an.b.row(x0).to_vec())?;
        self.report.bound("weak_kam_residual", negative_residual(c, &u, an.c0)?, eps);
        self.report.holds("aubry_projections_agree", an.a.projections_agree, "");
        let strict = strict_subsolution(c, an.c0, &an.a)?;
        self.report.holds(
            "strict_subsolution",
            strict.non_strict.is_empty(),
            format!("{} non-strict pairs outside the 2-Aubry set", strict.non_strict.len()),
        );
        self.report.scalar("strict_min_slack", strict.min_slack);

        let mut bt = Table::new(&["x", "y", "h"]);
        for x in 0..n {
            for y in 0..n {
                bt.push(vec![x.into(), y.into(), an.b.h[(x, y)].into()]);
            }
        }
        self.files.push(OutputFile::csv("barrier.csv", &bt));
        let mut ut = Table::new(&["x", "u", "strict_subsolution"]);
        for x in 0..n {
            ut.push(vec![x.into(), u[x].into(), strict.u[x].into()]);
        }
        self.files.push(OutputFile::csv("weak_kam.csv", &ut));
        self.files.push(OutputFile::json(
            "aubry.json",
            &json!({
                "projected": an.a.projected,
                "pairs": an.a.pairs,
                "weak_kam_base_point": x0,
            }),
        ));
        Ok(())
    }

    fn mather(&mut self, c: &CostKernel) -> Res {
        let an = self.analyse(c)?;
        let f = self.family(c, &an)?;
        let (points, pairs) = mather_set(&f, &an.a)?;
        self.report.set("mather", points.clone());
        self.report.scalar("extremal_count", f.extremals.len() as f64);

        let closed = f.extremals.iter().map(|m| m.marginal_residual()).fold(0.0, f64::max);
        self.report.bound("extremals_closed", closed, self.tol.base.eps_num);
        let inside = f.extremals.iter().all(|m| m.support().all(|(x, y)| an.a.contains_pair(x, y)));
        self.report.holds("support_in_2_aubry", inside, "");
        let cost_gap = f.extremals.iter().map(|m| (m.integral(c) + an.c0).abs()).fold(0.0, f64::max);
        self.report.bound("extremal_cost_is_minus_c0", cost_gap, self.tol.base.eps_aubry);
        match lp_min_cost(c) {
            Ok(lp) => {
                self.report.scalar("lp_value", lp.value);
                self.report.bound("lp_matches_c0", (lp.value + an.c0).abs(), 1e-8 * (1.0 + c.sup_norm()));
            }
            Err(Error::BudgetExceeded { .. }) => {}
            Err(e) => return Err(e),
        }
        if c.lifts().is_some() {
            let rho = f
                .extremals
                .iter()
                .map(|m| rotation_number_of_measure(c, m))
                .collect::<weakkam::Result<Vec<f64>>>()?;
            self.report.series("extremal_rotation_numbers", rho);
        }

        let mut mt = Table::new(&["measure", "x", "y", "weight"]);
        for (k, m) in f.extremals.iter().enumerate() {
            for &((x, y), w) in m.weights() {
                mt.push(vec![k.into(), x.into(), y.into(), w.into()]);
            }
        }
        self.files.push(OutputFile::csv("measures.csv", &mt));
        self.files.push(OutputFile::json(
            "mather.json",
            &json!({
                "cycles": f.cycles,
                "mather_set": points,
                "mather_pairs": pairs,
                "capped": f.capped,
            }),
        ));
        Ok(())
    }

    fn discounted(&mut self, c: &CostKernel) -> Res {
        let an = self.analyse(c)?;
        let f = self.family(c, &an)?;
        let schedule = self.config.schedule.clone().unwrap_or_else(default_schedule_to_one);
        let opts = LimitOptions {
            limit_tol: self.tol.limit_tol,
            cauchy_tol: self.tol.cauchy_tol,
            ..LimitOptions::from_tolerances(self.tol.base)
        };
        let u1 = limit_u1_with(c, an.c0, &schedule, &opts)?;
        let v1 = limit_v1_with(c, an.c0, &schedule, &opts)?;
        let fu = formula_u1(&an.b, &f)?;
        let fv = formula_v1(&an.b, &f)?;
        self.report.scalar("lambda_last", u1.lambda);
        self.report.scalar("u1_last_diff", u1.last_diff);
        self.report.scalar("v1_last_diff", v1.last_diff);
        self.report.series("u1", u1.u.values().to_vec());
        self.report.series("v1", v1.u.values().to_vec());
        self.report.bound("u1_limit_matches_formula", u1.u.sup_distance(&fu.u), self.tol.route_tol);
        self.report.bound("v1_limit_matches_formula", v1.u.sup_distance(&fv.u), self.tol.route_tol);
        let rep = conjugate_pair_test_tol(c, &u1.u, &v1.u, &an.b, &an.a, &f, 10.0 * self.tol.base.eps_aubry)?;
        self.report.holds("conjugacy_conditions_agree", rep.consistent(), format!("{:?}", rep.conditions()));
        self.report.flag("conjugate", rep.all_true());

        let mut ht = Table::new(&["lambda", "x", "u_lambda", "v_lambda"]);
        for ((lambda, wu), (_, wv)) in u1.history.iter().zip(&v1.history) {
            let shift = an.c0 / (1.0 - lambda);
            for x in 0..c.n() {
                ht.push(vec![(*lambda).into(), x.into(), (wu[x] - shift).into(), (wv[x] + shift).into()]);
            }
        }
        self.files.push(OutputFile::csv("u_lambda.csv", &ht));
        let mut lt = Table::new(&["x", "u1", "v1", "formula_u1", "formula_v1"]);
        for x in 0..c.n() {
            lt.push(vec![x.into(), u1.u[x].into(), v1.u[x].into(), fu.u[x].into(), fv.u[x].into()]);
        }
        self.files.push(OutputFile::csv("limits.csv", &lt));
        self.files.push(OutputFile::json("conjugacy.json", &rep));
        Ok(())
    }

    fn degenerate(&mut self, c: &CostKernel) -> Res {
        let cfg = self.config.degenerate.clone().expect("validated");
        let an = self.analyse(c)?;
        let f = self.family(c, &an)?;
        let eps_a = self.tol.base.eps_aubry;
        let u1 = formula_u1(&an.b, &f)?.u;
        let mass = check_alpha_mass(&cfg.alpha, &f, eps_a)?;
        self.report.scalar("min_alpha_mass", mass);
        let w = DegenerateWeight::new(cfg.alpha.clone(), cfg.lambda)?;
        let s = solve_u_lambda_alpha(c, an.c0, &w, &u1, default_beta_bound(mass))?;
        self.report.scalar("lambda", cfg.lambda);
        self.report.scalar("residual", s.residual);
        let sw = sandwich(c, an.c0, &w, &u1, self.tol.base.max_iterations)?;
        self.report.bound("sandwich_gap", sw.gap, self.tol.base.eps_num);
        self.report.bound("sandwich_brackets_solution", sw.lower.sup_distance(&s.u).max(sw.upper.sup_distance(&s.u)), self.tol.base.eps_num);

        let schedule = self.config.schedule.clone().unwrap_or_else(default_schedule_to_zero);
        let lim = limit_u0_alpha(c, an.c0, &cfg.alpha, &schedule, &u1, &f, self.tol.limit_tol, self.tol.cauchy_tol)?;
        let formula = formula_u0_alpha(&an.b, &f, &cfg.alpha, eps_a)?;
        self.report.scalar("u0_last_diff", lim.last_diff);
        self.report.scalar("max_beta_sum", lim.max_beta_sum);
        self.report.series("u0_alpha", lim.u.values().to_vec());
        self.report.bound("u0_limit_matches_formula", lim.u.sup_distance(&formula), self.tol.route_tol);

        let mut st = Table::new(&["x", "u_lambda_alpha", "sandwich_lower", "sandwich_upper"]);
        for x in 0..c.n() {
            st.push(vec![x.into(), s.u[x].into(), sw.lower[x].into(), sw.upper[x].into()]);
        }
        self.files.push(OutputFile::csv("u_lambda_alpha.csv", &st));
        let mut ht = Table::new(&["lambda", "x", "u_lambda_alpha"]);
        for (lambda, u) in &lim.history {
            for (x, v) in u.iter().enumerate() {
                ht.push(vec![(*lambda).into(), x.into(), (*v).into()]);
            }
        }
        self.files.push(OutputFile::csv("u0_history.csv", &ht));
        let mut lt = Table::new(&["x", "u0_alpha", "formula"]);
        for x in 0..c.n() {
            lt.push(vec![x.into(), lim.u[x].into(), formula[x].into()]);
        }
        self.files.push(OutputFile::csv("u0_alpha.csv", &lt));
        Ok(())
    }

    fn twist(&mut self) -> Res {
        let cfg = self.config.twist.clone().expect("validated");
        let g = make_generating(cfg.generating)?;
        let eps = match cfg.generating {
            Family::Standard { eps } => eps.abs(),
            _ => 0.0,
        };
        let semi_tol = cfg.semiconcavity_tol.unwrap_or(4.0 * (1.0 + eps) / cfg.grid_n as f64);
        let mut curve = Table::new(&["c", "alpha", "rho", "rotation_window"]);
        let mut pg = Table::new(&["c", "theta", "r_minus", "r_plus"]);
        let mut ch = Table::new(&["c", "chain", "step", "index", "theta"]);
        let (mut alphas, mut rhos) = (Vec::new(), Vec::new());
        let mut crossing_pairs = 0;
        for &c in &cfg.cs {
            let s = solve_twist(twist_cost(&g, c, cfg.grid_n, cfg.window)?)?;
            let r = rotation_number(&s, cfg.horizon)?;
            curve.push(vec![c.into(), s.alpha.into(), r.rho.into(), r.window.into()]);
            alphas.push(s.alpha);
            rhos.push(r.rho);
            for p in pseudograph(&s.u, c, semi_tol)? {
                pg.push(vec![c.into(), p.theta.into(), p.r_minus.into(), p.r_plus.into()]);
            }
            let chains = (0..cfg.chains)
                .map(|k| backward_chain(&s.cost, &s.u, s.alpha, k * cfg.grid_n / cfg.chains.max(1), cfg.horizon))
                .collect::<weakkam::Result<Vec<_>>>()?;
            for (k, chain) in chains.iter().enumerate() {
                for (step, (&i, &t)) in chain.indices.iter().zip(&chain.positions).enumerate() {
                    ch.push(vec![c.into(), k.into(), step.into(), i.into(), t.into()]);
                }
            }
            for a in 0..chains.len() {
                for b in a + 1..chains.len() {
                    let (pa, pb) = (&chains[a].positions, &chains[b].positions);
                    if !noncrossing_holds(pa, pb, self.tol.base.eps_num) {
                        crossing_pairs += 1;
                    }
                }
            }
        }
        let samples: Vec<(f64, f64)> = cfg.cs.iter().cloned().zip(alphas.iter().cloned()).collect();
        self.report.series("c", cfg.cs.clone());
        self.report.series("alpha", alphas);
        self.report.series("rho", rhos.clone());
        self.report.bound("alpha_convex", convexity_violation(&samples).max(0.0), self.tol.base.eps_num);
        self.report.bound("rho_monotone", monotonicity_violation(&rhos), 0.0);
        self.report.bound("chains_noncrossing", crossing_pairs as f64, 0.0);

        let beta_at = cfg.rhos.clone().unwrap_or(rhos);
        let mut bt = Table::new(&["rho", "beta", "argmax_c", "extrapolated"]);
        let mut betas = Vec::new();
        for &p in &beta_at {
            let b = beta_from_alpha(&samples, p)?;
            bt.push(vec![p.into(), b.beta.into(), b.argmax.into(), b.extrapolated.into()]);
            betas.push(b.beta);
        }
        self.report.series("beta_rho", beta_at);
        self.report.series("beta", betas);
        self.files.push(OutputFile::csv("alpha_rho.csv", &curve));
        self.files.push(OutputFile::csv("beta.csv", &bt));
        self.files.push(OutputFile::csv("pseudograph.csv", &pg));
        self.files.push(OutputFile::csv("chains.csv", &ch));
        Ok(())
    }

    fn triangle(&mut self) -> Res {
        let cfg = self.config.triangle.expect("validated");
        let t = TriangleMap::new(cfg.alpha, cfg.eps0)?;
        let schedule = self.config.schedule.clone().unwrap_or_else(default_triangle_schedule);
        let r = triangle_fixed_points(&t, &schedule)?;
        let worst = r.rows.iter().map(|row| row.diff).fold(0.0, f64::max);
        self.report.bound("closed_form_agreement", worst, self.tol.base.eps_num);
        self.report.scalar("lipschitz_estimate", r.lipschitz);
        self.report.scalar("min_x", r.min_x);
        self.report.scalar("max_x", r.max_x);
        self.report.flag("nonexpansive", r.nonexpansive);
        let mut tt = Table::new(&["lambda", "closed_x", "closed_y", "iterated_x", "iterated_y", "diff", "iterations"]);
        for row in &r.rows {
            tt.push(vec![
                row.lambda.into(),
                row.closed[0].into(),
                row.closed[1].into(),
                row.iterated[0].into(),
                row.iterated[1].into(),
                row.diff.into(),
                row.iterations.into(),
            ]);
        }
        self.files.push(OutputFile::csv("triangle.csv", &tt));
        Ok(())
    }
}
