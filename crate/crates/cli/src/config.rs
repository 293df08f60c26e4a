//! Command-line arguments and the validated run configuration.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use oblique::DomainBox;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check the non-free-loop and terminal consistency assumptions.
    Validate,
    /// Picard iteration over the finite-difference obstacle solver.
    SolvePde,
    /// Regression Monte Carlo on Euler paths.
    SolveMc,
    /// Lattice dynamic programming and strategy enumeration.
    Oracle,
    /// PDE, lattice and Monte Carlo values side by side.
    Compare,
    /// Contraction ratios of the frozen-driver map over a sweep of weights.
    PicardDiag,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::SolvePde => "solve-pde",
            Command::SolveMc => "solve-mc",
            Command::Oracle => "oracle",
            Command::Compare => "compare",
            Command::PicardDiag => "picard-diag",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "oblique",
    version,
    about = "Solvers for switching problems with interconnected obstacles"
)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Problem file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Time steps x nodes per axis.
    #[arg(long, default_value = "100x101")]
    pub grid: String,
    /// Spatial box `lo:hi[,lo:hi]`; defaults to the problem's box.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// Picard stopping tolerance on the weighted distance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Weight of the Picard norm; defaults to 4 C T m.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Total degree of the regression basis.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Starting point; defaults to the centre of the box.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Time steps of the lattice and of the Euler paths.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Switch budget of the strategy enumeration.
    #[arg(long, default_value_t = 2)]
    pub max_switches: usize,
    /// Implicitness of the time stepping.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 32)]
    pub bootstrap: usize,
    /// Allowed gap between solvers in `compare`.
    #[arg(long, default_value_t = 2e-2)]
    pub compare_tol: f64,
    /// Also write the simulated paths in `solve-mc`.
    #[arg(long)]
    pub write_paths: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSize {
    pub steps: usize,
    pub nodes: usize,
}

impl GridSize {
    /// Parses `NxM`.
    pub fn parse(text: &str) -> Result<GridSize, CliError> {
        let bad = || CliError::Usage(format!("--grid expects NxM with positive integers, got '{text}'"));
        let (n, m) = text.split_once(['x', 'X']).ok_or_else(bad)?;
        let steps: usize = n.trim().parse().map_err(|_| bad())?;
        let nodes: usize = m.trim().parse().map_err(|_| bad())?;
        if steps == 0 || nodes < 3 {
            return Err(CliError::Usage(format!(
                "--grid needs at least one step and three nodes, got '{text}'"
            )));
        }
        Ok(GridSize { steps, nodes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: PathBuf,
    pub grid: GridSize,
    pub domain: Option<DomainBox>,
    pub tol: f64,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub paths: usize,
    pub degree: usize,
    pub max_iter: usize,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub steps: usize,
    pub max_switches: usize,
    pub theta: f64,
    pub bootstrap: usize,
    pub compare_tol: f64,
    pub write_paths: bool,
}

impl RunConfig {
    /// Defaults for `command` on `problem`, writing into `out`.
    pub fn new(command: Command, problem: impl Into<PathBuf>, out: impl Into<PathBuf>) -> RunConfig {
        let args = Args::parse_from(["oblique", command.name(), "--problem", "-"]);
        let mut cfg = RunConfig::try_from(args).expect("defaults are valid");
        cfg.problem = problem.into();
        cfg.out = out.into();
        cfg
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {}", self.tol)));
        }
        if let Some(a) = self.alpha {
            if !(a >= 0.0) {
                return Err(CliError::Usage(format!("--alpha must be nonnegative, got {a}")));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        if self.steps == 0 || self.max_iter == 0 || self.paths < 2 {
            return Err(CliError::Usage(
                "--steps and --max-iter must be positive and --paths at least 2".into(),
            ));
        }
        if !(self.compare_tol >= 0.0) {
            return Err(CliError::Usage("--compare-tol must be nonnegative".into()));
        }
        Ok(())
    }

    /// Flat echo for the manifest.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "command": self.command,
            "problem": self.problem.display().to_string(),
            "grid": self.grid,
            "box": self.domain.as_ref().map(|b| b.to_string()),
            "tol": self.tol,
            "alpha": self.alpha,
            "seed": self.seed,
            "paths": self.paths,
            "degree": self.degree,
            "max_iter": self.max_iter,
            "out": self.out.display().to_string(),
            "threads": self.threads,
            "x0": self.x0,
            "steps": self.steps,
            "max_switches": self.max_switches,
            "theta": self.theta,
            "bootstrap": self.bootstrap,
            "compare_tol": self.compare_tol,
            "write_paths": self.write_paths,
        })
    }
}

impl TryFrom<Args> for RunConfig {
    type Error = CliError;

    fn try_from(a: Args) -> Result<RunConfig, CliError> {
        let domain = a
            .domain
            .as_deref()
            .map(|s| DomainBox::parse(s).map_err(|e| CliError::Usage(format!("--box: {e}"))))
            .transpose()?;
        let cfg = RunConfig {
            command: a.command,
            problem: a.problem,
            grid: GridSize::parse(&a.grid)?,
            domain,
            tol: a.tol,
            alpha: a.alpha,
            seed: a.seed,
            paths: a.paths,
            degree: a.degree,
            max_iter: a.max_iter,
            out: a.out,
            threads: a.threads,
            x0: a.x0,
            steps: a.steps,
            max_switches: a.max_switches,
            theta: a.theta,
            bootstrap: a.bootstrap,
            compare_tol: a.compare_tol,
            write_paths: a.write_paths,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
