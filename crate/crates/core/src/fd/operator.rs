//! Monotone discretization of the generator
//! `L u = b . grad u + 1/2 tr(sigma sigma^T D^2 u)` and the linear solves of
//! the implicit time step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::FdError;
use crate::problem::SwitchingProblem;

/// Boundary treatment of the truncated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Ghost nodes by linear extrapolation: the second derivative normal to
    /// the boundary vanishes, drift pointing out of the box is dropped.
    #[default]
    LinearExtrapolation,
    /// Boundary values held at the terminal data `h_i(x)`.
    DirichletFromTerminal,
}

/// Square matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> SparseOperator {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOperator { n, row_ptr, cols, vals }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            *o = self.row(i).map(|(c, v)| v * u[c]).sum();
        });
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }
}

/// Local coefficients at one node: drift and `a = 1/2 sigma sigma^T`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalCoeffs {
    pub drift: [f64; 2],
    pub a: [[f64; 2]; 2],
}

pub(crate) fn local_coeffs(p: &SwitchingProblem, t: f64, x: &[f64]) -> Result<LocalCoeffs, FdError> {
    let k = p.state_dim;
    let d = p.brownian_dim;
    let mut b = [0.0; 2];
    p.drift_at(t, x, &mut b[..k]).map_err(FdError::eval("drift"))?;
    let mut sigma = vec![0.0; k * d];
    p.diffusion_at(t, x, &mut sigma).map_err(FdError::eval("diffusion"))?;
    let mut a = [[0.0; 2]; 2];
    for r in 0..k {
        for c in 0..k {
            a[r][c] = 0.5 * (0..d).map(|l| sigma[r * d + l] * sigma[c * d + l]).sum::<f64>();
        }
    }
    Ok(LocalCoeffs { drift: b, a })
}

/// Assembles the generator at time `t` on the grid.
///
/// Drift uses upwind differences chosen by the sign of each drift
/// component, diffusion uses central second differences and mixed
/// derivatives use the seven-point stencil oriented by the sign of the
/// cross coefficient. Off-diagonal entries are nonnegative; a node where the
/// mixed term would break that is reported as
/// [`FdError::NonMonotone`].
pub fn discretize_generator(
    p: &SwitchingProblem,
    grid: &Grid,
    t: f64,
    boundary: Boundary,
) -> Result<SparseOperator, FdError> {
    if p.state_dim != grid.dim() {
        return Err(FdError::InvalidGrid(format!(
            "grid has {} dimensions, problem has k = {}",
            grid.dim(),
            p.state_dim
        )));
    }
    let rows = (0..grid.node_count())
        .into_par_iter()
        .map(|s| generator_row(p, grid, t, boundary, s))
        .collect::<Result<Vec<_>, FdError>>()?;
    Ok(SparseOperator::from_rows(rows))
}

fn generator_row(
    p: &SwitchingProblem,
    grid: &Grid,
    t: f64,
    boundary: Boundary,
    s: usize,
) -> Result<Vec<(usize, f64)>, FdError> {
    let x = grid.coords(s);
    if boundary == Boundary::DirichletFromTerminal && grid.is_boundary(s) {
        return Ok(Vec::new());
    }
    let coeffs = local_coeffs(p, t, &x)?;
    let mi = grid.multi_index(s);
    let k = grid.dim();
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(9);
    let mut diag = 0.0;
    let shifted = |r: usize, delta: isize| -> usize {
        let mut m = mi;
        m[r] = (m[r] as isize + delta) as usize;
        grid.index(&m[..k])
    };
    let at_lo = |r: usize| mi[r] == 0;
    let at_hi = |r: usize| mi[r] + 1 == grid.axes[r].nodes;

    for r in 0..k {
        let h = grid.axes[r].spacing();
        let b = coeffs.drift[r];
        if b > 0.0 && !at_hi(r) {
            row.push((shifted(r, 1), b / h));
            diag -= b / h;
        } else if b < 0.0 && !at_lo(r) {
            row.push((shifted(r, -1), -b / h));
            diag += b / h;
        }
        if !at_lo(r) && !at_hi(r) {
            let w = coeffs.a[r][r] / (h * h);
            row.push((shifted(r, 1), w));
            row.push((shifted(r, -1), w));
            diag -= 2.0 * w;
        }
    }

    if k == 2 {
        let a01 = coeffs.a[0][1];
        let interior = !(at_lo(0) || at_hi(0) || at_lo(1) || at_hi(1));
        if a01 != 0.0 && interior {
            let (h0, h1) = (grid.axes[0].spacing(), grid.axes[1].spacing());
            let c = a01.abs() / (h0 * h1);
            // remaining axis weights must stay nonnegative
            let w0 = coeffs.a[0][0] / (h0 * h0);
            let w1 = coeffs.a[1][1] / (h1 * h1);
            if w0 < c || w1 < c {
                return Err(FdError::NonMonotone {
                    node: s,
                    x,
                    detail: format!(
                        "|a12|/(dx dy) = {c:.6e} exceeds a11/dx^2 = {w0:.6e} or a22/dy^2 = {w1:.6e}; refine or rotate the grid"
                    ),
                });
            }
            let (d1, d2) = if a01 > 0.0 {
                ([1isize, 1isize], [-1isize, -1isize])
            } else {
                ([1, -1], [-1, 1])
            };
            for dd in [d1, d2] {
                let idx = grid.index(&[(mi[0] as isize + dd[0]) as usize, (mi[1] as isize + dd[1]) as usize]);
                row.push((idx, c));
            }
            for r in 0..2 {
                row.push((shifted(r, 1), -c));
                row.push((shifted(r, -1), -c));
            }
            diag += 2.0 * c;
        }
    }
    row.push((s, diag));
    Ok(row)
}

/// Solves `(I - w L) u = rhs` where `w = theta * dt`. Rows of `L` that are
/// empty (Dirichlet nodes) reduce to `u = rhs`.
pub(crate) fn solve_implicit(
    op: &SparseOperator,
    weight: f64,
    rhs: &[f64],
    guess: &[f64],
    tridiagonal: bool,
) -> Result<Vec<f64>, FdError> {
    if weight == 0.0 {
        return Ok(rhs.to_vec());
    }
    if tridiagonal {
        return Ok(thomas(op, weight, rhs));
    }
    gauss_seidel(op, weight, rhs, guess)
}

fn thomas(op: &SparseOperator, weight: f64, rhs: &[f64]) -> Vec<f64> {
    let n = op.size();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        diag[i] = 1.0;
        for (c, v) in op.row(i) {
            if c == i {
                diag[i] -= weight * v;
            } else if c + 1 == i {
                lower[i] = -weight * v;
            } else if c == i + 1 {
                upper[i] = -weight * v;
            }
        }
    }
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / denom;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = dp[i] - cp[i] * u[i + 1];
    }
    u
}

const GS_MAX_SWEEPS: usize = 200_000;
const GS_TOL: f64 = 1e-13;

fn gauss_seidel(op: &SparseOperator, weight: f64, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>, FdError> {
    let n = op.size();
    let mut u = guess.to_vec();
    let diag: Vec<f64> = (0..n).map(|i| 1.0 - weight * op.diagonal(i)).collect();
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for _ in 0..GS_MAX_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut acc = rhs[i];
            for (c, v) in op.row(i) {
                if c != i {
                    acc += weight * v * u[c];
                }
            }
            let next = acc / diag[i];
            change = change.max((next - u[i]).abs());
            u[i] = next;
        }
        if change <= GS_TOL * scale {
            return Ok(u);
        }
    }
    Err(FdError::LinearSolve(format!(
        "Gauss-Seidel did not converge in {GS_MAX_SWEEPS} sweeps"
    )))
}
