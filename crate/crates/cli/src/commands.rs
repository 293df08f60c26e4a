//! One function per subcommand. Each writes its artifacts and returns the
//! checks it ran plus a summary section.

use std::fmt::Write as _;

use oblique::fd::{residual_report, write_surfaces, Grid, SchemeOptions, ValueField};
use oblique::oracle::{
    build_lattice, enumerate_strategies, euler_paths, lattice_dp, lsmc_solve, LatticeModel, LatticeOptions,
    LatticeValues, LsmcOptions, LsmcResult, OracleError,
};
use oblique::picard::{
    alpha_star, contraction_probe, dominating_bound, picard_solve, slab_width, PicardError, PicardOptions, PicardState,
};
use oblique::validate::{grid_samples, space_samples};
use oblique::{
    check_non_free_loop, check_terminal_consistency, estimate_lipschitz, DomainBox, ProbeBox, SwitchingProblem,
    ValidationReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::output::{cell, Artifacts};

/// Tolerance of the lattice-level obstacle check.
pub const LATTICE_OBSTACLE_TOL: f64 = 1e-9;
/// Node-wise bound on `|dK (u - obstacle)|`.
pub const COMPLEMENTARITY_TOL: f64 = 1e-6;
/// Allowed excess of `|u|` over the dominating bound.
pub const GROWTH_TOL: f64 = 1e-2;
/// Slack on the reported contraction ratio at the default weight.
pub const CONTRACTION_SLACK: f64 = 0.05;
const LSMC_SE_CAP: f64 = 0.05;
const LIPSCHITZ_PROBES: usize = 2000;
const PROBE_PAIRS: u64 = 4;
const DIGEST_VIOLATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub p: SwitchingProblem,
    pub domain: DomainBox,
    pub x0: Vec<f64>,
    pub art: &'a mut Artifacts,
    pub checks: Vec<CheckResult>,
    pub summary: Map<String, Value>,
    pub text: String,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RunConfig, p: SwitchingProblem, art: &'a mut Artifacts) -> Result<Ctx<'a>, CliError> {
        let domain = cfg.domain.clone().unwrap_or_else(|| p.domain_or_default());
        if domain.dim() != p.state_dim {
            return Err(CliError::Usage(format!(
                "box has {} axes, problem has k = {}",
                domain.dim(),
                p.state_dim
            )));
        }
        let x0 = match &cfg.x0 {
            Some(x) => x.clone(),
            None => domain.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
        };
        if x0.len() != p.state_dim {
            return Err(CliError::Usage(format!(
                "--x0 has {} entries, problem has k = {}",
                x0.len(),
                p.state_dim
            )));
        }
        if x0.iter().zip(&domain.bounds).any(|(x, (lo, hi))| !(x >= lo && x <= hi)) {
            return Err(CliError::Usage(format!("--x0 {x0:?} lies outside the box {domain}")));
        }
        Ok(Ctx {
            cfg,
            p,
            domain,
            x0,
            art,
            checks: Vec::new(),
            summary: Map::new(),
            text: String::new(),
        })
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckResult::new(name, passed, detail));
    }

    fn section(&mut self, name: &str, value: impl Serialize) {
        self.summary.insert(
            name.to_string(),
            serde_json::to_value(value).expect("plain data serializes"),
        );
    }

    fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::uniform(
            self.p.horizon,
            self.cfg.grid.steps,
            &self.domain,
            self.cfg.grid.nodes,
        )?)
    }

    fn scheme(&self) -> SchemeOptions {
        SchemeOptions {
            theta: self.cfg.theta,
            ..SchemeOptions::default()
        }
    }
}

pub(crate) fn execute(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let valid = assumptions(ctx)?;
    if !valid && ctx.cfg.command != Command::Validate {
        ctx.text += "assumptions violated; see validation.txt\n";
        return Ok(());
    }
    match ctx.cfg.command {
        Command::Validate => Ok(()),
        Command::SolvePde => solve_pde(ctx),
        Command::SolveMc => solve_mc(ctx),
        Command::Oracle => oracle(ctx),
        Command::Compare => compare(ctx),
        Command::PicardDiag => picard_diag(ctx),
    }
}

fn assumptions(ctx: &mut Ctx<'_>) -> Result<bool, CliError> {
    let p = &ctx.p;
    let points = match p.state_dim {
        1 => 41,
        2 => 15,
        _ => 5,
    };
    let h2 = check_non_free_loop(p, &grid_samples(p, &ctx.domain, 11, points))?;
    let h3 = check_terminal_consistency(p, &space_samples(&ctx.domain, points))?;
    let probe = ProbeBox {
        x: ctx.domain.clone(),
        ..ProbeBox::unit(p)
    };
    let estimate = estimate_lipschitz(p, &probe, LIPSCHITZ_PROBES, ctx.cfg.seed);
    let declared = p.lipschitz_const;

    let report = format!("[non_free_loop]\n{h2}\n[terminal_consistency]\n{h3}");
    ctx.art.write("validation.txt", &report)?;
    ctx.art
        .write("violations.csv", &h2.clone().merge(h3.clone()).to_records())?;
    let passed = h2.passed && h3.passed;
    ctx.check(
        "non_free_loop",
        h2.passed,
        format!("{} violations", h2.violations.len()),
    );
    ctx.check(
        "terminal_consistency",
        h3.passed,
        format!("{} violations", h3.violations.len()),
    );
    ctx.section(
        "validation",
        json!({
            "non_free_loop": report_digest(&h2),
            "terminal_consistency": report_digest(&h3),
            "lipschitz": {
                "declared": declared,
                "estimated": estimate,
                "declared_below_estimate": estimate > declared * (1.0 + 1e-9) + 1e-12,
            },
        }),
    );
    Ok(passed)
}

/// Report with the violation list cut to its first entries; the full list
/// goes to `violations.csv`.
fn report_digest(r: &ValidationReport) -> Value {
    json!({
        "passed": r.passed,
        "violation_count": r.violations.len(),
        "first_violations": &r.violations[..r.violations.len().min(DIGEST_VIOLATIONS)],
        "min_slack": r.min_slack,
        "points_checked": r.points_checked,
    })
}

fn convergence_log(state: &PicardState) -> String {
    let mut out = String::from("q,alpha_distance,inf_distance,ratio\n");
    for (q, (d, inf)) in state.distance_history.iter().zip(&state.inf_history).enumerate() {
        let ratio = if q == 0 { None } else { state.measured_ratios[q - 1] };
        let _ = writeln!(out, "{},{d},{inf},{}", q + 1, cell(ratio));
    }
    out
}

/// Picard solve writing the convergence log, also when the iteration stalls.
fn pde_field(ctx: &mut Ctx<'_>, grid: &Grid, opts: &SchemeOptions) -> Result<(ValueField, PicardState), CliError> {
    let picard = PicardOptions {
        tol: ctx.cfg.tol,
        max_iter: ctx.cfg.max_iter,
        alpha: ctx.cfg.alpha,
        warm_start: None,
    };
    match picard_solve(&ctx.p, grid, opts, &picard) {
        Ok((field, state)) => {
            ctx.art.write("convergence.csv", &convergence_log(&state))?;
            Ok((field, state))
        }
        Err(PicardError::NotConverged { state }) => {
            ctx.art.write("convergence.csv", &convergence_log(&state))?;
            Err(PicardError::NotConverged { state }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn values_at_start(p: &SwitchingProblem, grid: &Grid, field: &ValueField, x0: &[f64]) -> Vec<f64> {
    (0..p.mode_count).map(|i| field.value_at(grid, i, 0, x0)).collect()
}

fn solve_pde(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let opts = ctx.scheme();
    let (field, state) = pde_field(ctx, &grid, &opts)?;
    let written = write_surfaces(&ctx.art.dir().join("surfaces"), &grid, &field, &opts)?;
    ctx.art.record(&written);

    let residuals = residual_report(&ctx.p, &grid, &field, &opts)?;
    ctx.art.json("residuals.json", &residuals)?;
    let bound = dominating_bound(&ctx.p, &grid, &opts)?;
    let excess = bound.max_excess(&field);

    let values = values_at_start(&ctx.p, &grid, &field, &ctx.x0);
    let active: Vec<Option<usize>> = (0..ctx.p.mode_count)
        .map(|i| field.active_at(&grid, i, 0, &ctx.x0).map(|j| j + 1))
        .collect();
    ctx.section(
        "pde",
        json!({
            "x0": ctx.x0,
            "values": values,
            "active_obstacle": active,
            "iterations": state.iteration,
            "alpha": state.alpha,
            "final_alpha_distance": state.distance_history.last(),
            "final_inf_distance": state.inf_history.last(),
            "residuals": {
                "max_obstacle": residuals.max_obstacle(),
                "max_pde": residuals.max_pde(),
                "max_complementarity": residuals.max_complementarity(),
            },
            "growth_bound_excess": excess,
        }),
    );
    ctx.check(
        "picard_converged",
        state.converged,
        format!("{} iterations", state.iteration),
    );
    let obstacle = residuals.max_obstacle();
    ctx.check(
        "obstacle_residual",
        obstacle <= opts.obstacle_tolerance,
        format!("{obstacle:.3e} <= {:.3e}", opts.obstacle_tolerance),
    );
    let comp = residuals.max_complementarity();
    ctx.check(
        "complementarity",
        comp <= COMPLEMENTARITY_TOL,
        format!("{comp:.3e} <= {COMPLEMENTARITY_TOL:.3e}"),
    );
    ctx.check(
        "growth_bound",
        excess <= GROWTH_TOL,
        format!("{excess:.3e} <= {GROWTH_TOL:.3e}"),
    );
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(ctx.text, "u{}(0, x0) = {v}", i + 1);
    }
    Ok(())
}

/// Runs the regression estimator, solving the PDE first when the drivers
/// need the value vector along the paths.
fn mc_values(ctx: &mut Ctx<'_>, pde: Option<(&Grid, &ValueField)>) -> Result<LsmcResult, CliError> {
    let bundle = euler_paths(&ctx.p, 0.0, &ctx.x0, ctx.cfg.steps, ctx.cfg.paths, ctx.cfg.seed)?;
    if ctx.cfg.write_paths {
        ctx.art.write("paths.csv", &bundle.to_text())?;
    }
    let opts = LsmcOptions {
        degree: ctx.cfg.degree,
        bootstrap: ctx.cfg.bootstrap,
        seed: ctx.cfg.seed,
        se_cap: LSMC_SE_CAP,
    };
    if !ctx.p.drivers_depend_on_y() {
        return Ok(lsmc_solve(&ctx.p, &bundle, &opts, None)?);
    }
    let owned;
    let (grid, field) = match pde {
        Some(pair) => pair,
        None => {
            let grid = ctx.grid()?;
            let opts = ctx.scheme();
            let (field, _) = pde_field(ctx, &grid, &opts)?;
            owned = (grid, field);
            (&owned.0, &owned.1)
        }
    };
    let m = ctx.p.mode_count;
    let dt = grid.dt();
    let steps = grid.time_steps;
    let frozen = move |t: f64, x: &[f64]| -> Vec<f64> {
        let n = ((t / dt).round() as usize).min(steps);
        (0..m).map(|i| field.value_at(grid, i, n, x)).collect()
    };
    Ok(lsmc_solve(&ctx.p, &bundle, &opts, Some(&frozen))?)
}

fn solve_mc(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let result = mc_values(ctx, None)?;
    let finite = result.values.iter().chain(&result.std_errors).all(|v| v.is_finite());
    ctx.section(
        "mc",
        json!({
            "x0": ctx.x0,
            "steps": ctx.cfg.steps,
            "seed": ctx.cfg.seed,
            "result": result,
        }),
    );
    ctx.check("mc_finite", finite, "values and standard errors are finite".into());
    for (i, (v, se)) in result.values.iter().zip(&result.std_errors).enumerate() {
        let flag = if result.low_confidence[i] {
            " (low confidence)"
        } else {
            ""
        };
        let _ = writeln!(ctx.text, "Y{}(0) = {v} +- {se}{flag}", i + 1);
    }
    Ok(())
}

/// Largest `max_j(v_j - g_ij) - v_i` over the lattice.
fn lattice_obstacle_violation(p: &SwitchingProblem, lat: &LatticeModel, dp: &LatticeValues) -> Result<f64, CliError> {
    let m = p.mode_count;
    let mut worst = 0.0f64;
    for (n, layer) in lat.layers.iter().enumerate() {
        for (s, &x) in layer.states.iter().enumerate() {
            for i in 0..m {
                for j in (0..m).filter(|&j| j != i) {
                    let g = p
                        .cost(i, j, layer.t, &[x])
                        .map_err(|source| OracleError::Eval { what: "cost", source })?;
                    worst = worst.max(dp.values[j][n][s] - g - dp.values[i][n][s]);
                }
            }
        }
    }
    Ok(worst)
}

fn oracle(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let p = &ctx.p;
    let lat = build_lattice(p, 0.0, ctx.x0[0], ctx.cfg.steps, &LatticeOptions::default())?;
    let dp = lattice_dp(p, &lat, None)?;
    let root = dp.root();
    let violation = lattice_obstacle_violation(p, &lat, &dp)?;
    let y_dependent = p.drivers_depend_on_y();
    let frozen = y_dependent.then_some(&dp);

    let mut rows = Vec::new();
    let mut csv = String::from("mode,lattice_dp,enumeration,difference,strategies_evaluated,best_strategy\n");
    let mut bounded = true;
    for i in 0..p.mode_count {
        match enumerate_strategies(p, &lat, i, ctx.cfg.max_switches, frozen) {
            Ok(e) => {
                let diff = root[i] - e.value;
                if !y_dependent && diff < -1e-12 * root[i].abs().max(1.0) {
                    bounded = false;
                }
                let _ = writeln!(
                    csv,
                    "{},{},{},{diff},{},\"{}\"",
                    i + 1,
                    root[i],
                    e.value,
                    e.evaluated,
                    e.best
                );
                rows.push(json!({
                    "mode": i + 1,
                    "lattice_dp": root[i],
                    "enumeration": e.value,
                    "difference": diff,
                    "strategies_evaluated": e.evaluated,
                    "best_strategy": e.best.to_string(),
                    "best": e.best,
                }));
            }
            Err(OracleError::GuardExceeded { count, limit }) => {
                let _ = writeln!(csv, "{},{},,,,", i + 1, root[i]);
                rows.push(json!({
                    "mode": i + 1,
                    "lattice_dp": root[i],
                    "enumeration_skipped": format!("{count} strategies exceed the limit {limit}"),
                }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    ctx.art.write("oracle.csv", &csv)?;
    ctx.section(
        "oracle",
        json!({
            "x0": ctx.x0,
            "steps": lat.steps,
            "dt": lat.dt,
            "dx": lat.dx,
            "max_switches": ctx.cfg.max_switches,
            "max_obstacle_sweeps": dp.max_sweeps,
            "obstacle_violation": violation,
            "drivers_depend_on_y": y_dependent,
            "modes": rows,
        }),
    );
    ctx.check(
        "lattice_obstacle",
        violation <= LATTICE_OBSTACLE_TOL,
        format!("{violation:.3e} <= {LATTICE_OBSTACLE_TOL:.3e}"),
    );
    if !y_dependent {
        ctx.check(
            "enumeration_within_dp",
            bounded,
            "no fixed-schedule strategy beats the lattice value".into(),
        );
    }
    ctx.text += &csv;
    Ok(())
}

fn compare(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let opts = ctx.scheme();
    let (field, _) = pde_field(ctx, &grid, &opts)?;
    let pde = values_at_start(&ctx.p, &grid, &field, &ctx.x0);

    let lattice = if ctx.p.state_dim == 1 && !ctx.p.drivers_depend_on_z() {
        let lat = build_lattice(&ctx.p, 0.0, ctx.x0[0], ctx.cfg.steps, &LatticeOptions::default())?;
        Some(lattice_dp(&ctx.p, &lat, None)?.root())
    } else {
        None
    };
    let mc = mc_values(ctx, Some((&grid, &field)))?;

    let tol = ctx.cfg.compare_tol;
    let mut csv = String::from("mode,pde,lattice,mc,mc_se,abs_pde_lattice,abs_pde_mc\n");
    let mut rows = Vec::new();
    let (mut lattice_ok, mut mc_ok) = (true, true);
    for i in 0..ctx.p.mode_count {
        let lat = lattice.as_ref().map(|r| r[i]);
        let d_lat = lat.map(|v| (pde[i] - v).abs());
        let d_mc = (pde[i] - mc.values[i]).abs();
        lattice_ok &= d_lat.is_none_or(|d| d <= tol);
        mc_ok &= d_mc <= tol + 3.0 * mc.std_errors[i];
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{d_mc}",
            i + 1,
            pde[i],
            cell(lat),
            mc.values[i],
            mc.std_errors[i],
            cell(d_lat)
        );
        rows.push(json!({
            "mode": i + 1,
            "pde": pde[i],
            "lattice": lat,
            "mc": mc.values[i],
            "mc_se": mc.std_errors[i],
            "abs_pde_lattice": d_lat,
            "abs_pde_mc": d_mc,
        }));
    }
    ctx.art.write("compare.csv", &csv)?;
    ctx.section("compare", json!({ "x0": ctx.x0, "tolerance": tol, "rows": rows }));
    if lattice.is_some() {
        ctx.check("pde_vs_lattice", lattice_ok, format!("|pde - lattice| <= {tol}"));
    }
    ctx.check("pde_vs_mc", mc_ok, format!("|pde - mc| <= {tol} + 3 se"));
    ctx.text += &csv;
    Ok(())
}

fn random_field(grid: &Grid, m: usize, d: usize, rng: &mut ChaCha8Rng) -> ValueField {
    let mut f = ValueField::zeros(grid, m, d);
    for u in &mut f.values {
        u.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    }
    f
}

fn picard_diag(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let opts = ctx.scheme();
    let p = &ctx.p;
    let (m, d) = (p.mode_count, p.brownian_dim);
    let c = p.lipschitz_const;
    let star = alpha_star(c, p.horizon, m);
    let alphas: Vec<f64> = match ctx.cfg.alpha {
        Some(a) => vec![a],
        None if star.is_degenerate() => vec![0.0, 0.5, 1.0, 2.0, 4.0],
        None => [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * star.alpha0).collect(),
    };
    let pairs: Vec<(ValueField, ValueField)> = (0..PROBE_PAIRS)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
            rng.set_stream(j);
            (random_field(&grid, m, d, &mut rng), random_field(&grid, m, d, &mut rng))
        })
        .collect();

    let mut csv = String::from("alpha,probe,ratio,bound\n");
    let mut sweep = Vec::new();
    let mut at_alpha0 = None;
    for &alpha in &alphas {
        let bound = (alpha > 0.0).then(|| (2.0 * c * p.horizon * m as f64 / alpha).sqrt());
        let mut worst = 0.0f64;
        for (j, (a, b)) in pairs.iter().enumerate() {
            let ratio = contraction_probe(p, &grid, &opts, a, b, alpha)?;
            worst = worst.max(ratio);
            let _ = writeln!(csv, "{alpha},{},{ratio},{}", j + 1, cell(bound));
        }
        if !star.is_degenerate() && alpha == star.alpha0 {
            at_alpha0 = Some(worst);
        }
        sweep.push(json!({ "alpha": alpha, "max_ratio": worst, "bound": bound }));
    }
    ctx.art.write("picard_diag.csv", &csv)?;
    let slab = (c > 0.0).then(|| slab_width(c, m)).transpose()?;
    // reported only: the discrete map has no proven constant
    let limit = star.contraction_bound.sqrt() + CONTRACTION_SLACK;
    let within = at_alpha0.map(|worst| worst <= limit);
    ctx.section(
        "picard_diag",
        json!({
            "lipschitz": c,
            "alpha0": star.alpha0,
            "contraction_bound": star.contraction_bound,
            "slab_width": slab,
            "probe_pairs": PROBE_PAIRS,
            "sweep": sweep,
            "max_ratio_at_alpha0": at_alpha0,
            "ratio_limit": at_alpha0.map(|_| limit),
            "within_limit_at_alpha0": within,
        }),
    );
    if let (Some(worst), Some(ok)) = (at_alpha0, within) {
        let verdict = if ok { "within" } else { "ABOVE" };
        let _ = writeln!(ctx.text, "max ratio at alpha0 {worst} is {verdict} {limit}");
    }
    ctx.text += &csv;
    Ok(())
}
