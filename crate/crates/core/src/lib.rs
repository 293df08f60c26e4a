//! Solvers for systems of parabolic PDEs with interconnected obstacles and
//! their optimal-switching counterparts.
//!
//! * [`problem`] and [`expr`] hold the problem datum and its coefficient DSL.
//! * [`validate`] checks the standing assumptions on sample points.
//! * [`fd`] is the monotone finite-difference machinery and the frozen-driver
//!   map whose fixed point is the solution.
//! * [`picard`] runs the outer fixed-point loop and its diagnostics.
//! * [`oracle`] provides independent ground truth: lattice dynamic
//!   programming, strategy enumeration and regression Monte Carlo.

pub mod expr;
pub mod fd;
pub mod obstacle;
pub mod oracle;
pub mod picard;
pub mod problem;
pub mod validate;

pub use expr::{Env, EvalError, Expr, ParseError, Var};
pub use problem::{parse_problem, DomainBox, ProblemError, SwitchingProblem};
pub use validate::{
    check_non_free_loop, check_terminal_consistency, estimate_lipschitz, ProbeBox, ValidationError, ValidationReport,
    Violation,
};
