//! Monotone finite differences for the obstacle system on a truncated box.

pub mod field;
pub mod grid;
pub mod io;
pub mod operator;
pub mod residual;
pub mod theta;

use thiserror::Error;

use crate::expr::EvalError;
use crate::obstacle::SweepCapExceeded;

pub use field::ValueField;
pub use grid::{Axis, Grid};
pub use io::{read_surfaces, write_surfaces, SurfaceMetadata};
pub use operator::{discretize_generator, Boundary, SparseOperator};
pub use residual::{residual_report, ModeResidual, ResidualReport, Stat};
pub use theta::{apply_theta_map, gradient_field, GradientStencil, SchemeOptions};

#[derive(Debug, Error)]
pub enum FdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scheme options: {0}")]
    InvalidOptions(String),
    #[error("stencil is not monotone at node {node} (x = {x:?}): {detail}")]
    NonMonotone { node: usize, x: Vec<f64>, detail: String },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("explicit part violates the CFL bound at node {node}: 1 + (1-theta) dt L_ss = {factor} < 0 (theta = {theta}, dt = {dt})")]
    Cfl {
        node: usize,
        factor: f64,
        theta: f64,
        dt: f64,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer {layer}, node {node}: {source}")]
    ObstacleSweeps {
        layer: usize,
        node: usize,
        source: SweepCapExceeded,
    },
    #[error("evaluating {what}: {source}")]
    Eval { what: &'static str, source: EvalError },
    #[error("surface file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FdError {
    pub(crate) fn eval(what: &'static str) -> impl Fn(EvalError) -> FdError {
        move |source| FdError::Eval { what, source }
    }

    /// Stable machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            FdError::InvalidGrid(_) => "invalid_grid",
            FdError::InvalidOptions(_) => "invalid_options",
            FdError::NonMonotone { .. } => "non_monotone_stencil",
            FdError::LinearSolve(_) => "linear_solve",
            FdError::Cfl { .. } => "cfl",
            FdError::ShapeMismatch(_) => "shape_mismatch",
            FdError::ObstacleSweeps { .. } => "obstacle_sweep_cap",
            FdError::Eval { .. } => "evaluation",
            FdError::Format(_) => "surface_format",
            FdError::Io(_) => "io",
        }
    }
}
