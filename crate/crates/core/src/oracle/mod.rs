//! Independent ground truth for the switching system: a trinomial lattice
//! with exact dynamic programming and strategy enumeration, and regression
//! Monte Carlo on simulated paths.

pub mod dp;
pub mod lattice;
pub mod lsmc;
pub mod paths;
pub mod strategy;

use thiserror::Error;

use crate::expr::EvalError;
use crate::obstacle::SweepCapExceeded;

pub use dp::{lattice_dp, LatticeValues};
pub use lattice::{build_lattice, LatticeLayer, LatticeModel, LatticeOptions, Transition};
pub use lsmc::{lsmc_solve, LsmcOptions, LsmcResult};
pub use paths::{euler_paths, PathBundle};
pub use strategy::{enumerate_strategies, evaluate_strategy, switching_cost, CostProcess, Enumeration, Strategy};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("the lattice oracle needs k = 1, problem has k = {0}")]
    NotOneDimensional(usize),
    #[error("branch probabilities {probs:?} leave [0, 1] at step {step}, x = {x}; use a smaller time step")]
    ProbabilityOutOfRange { step: usize, x: f64, probs: [f64; 3] },
    #[error("drivers depend on z; exact lattice evaluation is not available")]
    ZDependent,
    #[error("drivers depend on y; supply frozen values")]
    YDependentWithoutFrozen,
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("{count} strategies exceed the enumeration limit {limit}")]
    GuardExceeded { count: u128, limit: u128 },
    #[error("step {step}, node {node}: {source}")]
    SweepCap {
        step: usize,
        node: usize,
        source: SweepCapExceeded,
    },
    #[error("regression design matrix is rank deficient at step {step}")]
    RankDeficient { step: usize },
    #[error("evaluating {what}: {source}")]
    Eval { what: &'static str, source: EvalError },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl OracleError {
    pub(crate) fn eval(what: &'static str) -> impl Fn(EvalError) -> OracleError {
        move |source| OracleError::Eval { what, source }
    }

    pub fn code(&self) -> &'static str {
        match self {
            OracleError::NotOneDimensional(_) => "lattice_dimension",
            OracleError::ProbabilityOutOfRange { .. } => "lattice_probability",
            OracleError::ZDependent => "z_dependent_driver",
            OracleError::YDependentWithoutFrozen => "y_dependent_driver",
            OracleError::InvalidStrategy(_) => "invalid_strategy",
            OracleError::GuardExceeded { .. } => "enumeration_guard",
            OracleError::SweepCap { .. } => "obstacle_sweep_cap",
            OracleError::RankDeficient { .. } => "rank_deficient",
            OracleError::Eval { .. } => "evaluation",
            OracleError::InvalidArgument(_) => "invalid_argument",
        }
    }
}
