//! Batch driver for the `oblique` solvers.
//!
//! [`run`] loads the problem, checks its assumptions, runs the requested
//! command and leaves its artifacts in the output directory:
//!
//! * `manifest.json`: configuration echo, versions, seed, problem text,
//!   thread cap, wall time and status.
//! * `summary.json`: checks and command results.
//! * `validation.txt`, `violations.csv`: assumption reports.
//! * `convergence.csv`, `residuals.json`, `surfaces/`: PDE runs.
//! * `oracle.csv`, `compare.csv`, `picard_diag.csv`, `paths.csv`: the
//!   corresponding commands.
//!
//! Everything except the manifest is a function of the configuration and
//! the problem file alone.

mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use oblique::parse_problem;
use serde_json::json;

pub use commands::{CheckResult, COMPLEMENTARITY_TOL, CONTRACTION_SLACK, GROWTH_TOL, LATTICE_OBSTACLE_TOL};
pub use config::{Args, Command, GridSize, RunConfig};
pub use error::CliError;
pub use output::{Artifacts, MANIFEST_FILE, SUMMARY_FILE};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out: PathBuf,
    pub checks: Vec<CheckResult>,
    pub summary: serde_json::Value,
    /// Files written, relative to `out`, manifest excluded.
    pub files: Vec<String>,
    /// Human-readable digest for the terminal.
    pub text: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Runs one command. `Err` means a solver or input error; a completed run
/// with failed checks is `Ok` with [`Outcome::passed`] false.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut art = Artifacts::create(&cfg.out)?;
    let (problem_text, result) = match fs::read_to_string(&cfg.problem) {
        Ok(text) => {
            let result = match cfg.threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Threads(e.to_string()))
                    .and_then(|pool| pool.install(|| execute(cfg, &text, &mut art))),
                None => execute(cfg, &text, &mut art),
            };
            (Some(text), result)
        }
        Err(source) => (
            None,
            Err(CliError::Io {
                path: cfg.problem.clone(),
                source,
            }),
        ),
    };
    let status = match &result {
        Ok(o) if o.passed() => "passed",
        Ok(_) => "checks_failed",
        Err(e) => e.code(),
    };
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.echo(),
        "seed": cfg.seed,
        "threads": cfg.threads,
        "problem_text": problem_text,
        "wall_seconds": clock.elapsed().as_secs_f64(),
        "status": status,
        "error": result.as_ref().err().map(|e| e.line()),
        "files": art.files(),
    });
    art.json(MANIFEST_FILE, &manifest)?;
    result
}

fn execute(cfg: &RunConfig, text: &str, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let p = parse_problem(text)?;
    let mut ctx = commands::Ctx::new(cfg, p, art)?;
    commands::execute(&mut ctx)?;
    let (checks, mut summary, text) = (ctx.checks, ctx.summary, ctx.text);
    summary.insert("command".into(), json!(cfg.command));
    summary.insert("checks".into(), json!(checks));
    summary.insert("passed".into(), json!(checks.iter().all(|c| c.passed)));
    let summary = serde_json::Value::Object(summary);
    art.json(SUMMARY_FILE, &summary)?;
    Ok(Outcome {
        out: cfg.out.clone(),
        checks,
        summary,
        files: art.files(),
        text,
    })
}
