//! Residuals of a computed field against the discrete obstacle system.
//!
//! Everything here is recomputed from the stored surfaces with its own
//! stencil code, so it does not share a path with the solver's matrix
//! assembly.

use serde::Serialize;

use super::field::ValueField;
use super::grid::Grid;
use super::theta::SchemeOptions;
use super::FdError;
use crate::problem::SwitchingProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Stat {
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeResidual {
    /// `max(0, max_j(u^j - g_ij) - u^i)`.
    pub obstacle: Stat,
    /// `|min(u^i - obstacle, -(discrete PDE))|`.
    pub pde: Stat,
    /// `|dK^i (u^i - obstacle)|`.
    pub complementarity: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub modes: Vec<ModeResidual>,
    pub interior_points: usize,
    /// The box is a truncation of the whole space; residuals exclude faces.
    pub truncated_domain: bool,
}

impl ResidualReport {
    pub fn max_obstacle(&self) -> f64 {
        self.modes.iter().map(|m| m.obstacle.max).fold(0.0, f64::max)
    }

    pub fn max_pde(&self) -> f64 {
        self.modes.iter().map(|m| m.pde.max).fold(0.0, f64::max)
    }

    pub fn max_complementarity(&self) -> f64 {
        self.modes.iter().map(|m| m.complementarity.max).fold(0.0, f64::max)
    }
}

struct Acc {
    max: f64,
    sum: f64,
    count: usize,
}

impl Acc {
    fn new() -> Self {
        Acc {
            max: 0.0,
            sum: 0.0,
            count: 0,
        }
    }

    fn push(&mut self, v: f64) {
        self.max = self.max.max(v);
        self.sum += v;
        self.count += 1;
    }

    fn stat(&self) -> Stat {
        Stat {
            max: self.max,
            mean: if self.count > 0 {
                self.sum / self.count as f64
            } else {
                0.0
            },
        }
    }
}

/// `L u` at interior node `mi`, straight from the difference formulas.
fn generator_at(p: &SwitchingProblem, grid: &Grid, t: f64, u: &[f64], mi: [usize; 2]) -> Result<f64, FdError> {
    let k = grid.dim();
    let d = p.brownian_dim;
    let x: Vec<f64> = (0..k).map(|r| grid.axes[r].coord(mi[r])).collect();
    let mut b = [0.0; 2];
    p.drift_at(t, &x, &mut b[..k]).map_err(FdError::eval("drift"))?;
    let mut sigma = vec![0.0; k * d];
    p.diffusion_at(t, &x, &mut sigma).map_err(FdError::eval("diffusion"))?;
    let cov = |r: usize, c: usize| (0..d).map(|l| sigma[r * d + l] * sigma[c * d + l]).sum::<f64>();
    let val = |i0: isize, i1: isize| -> f64 {
        let j0 = (mi[0] as isize + i0) as usize;
        if k == 1 {
            u[j0]
        } else {
            let j1 = (mi[1] as isize + i1) as usize;
            u[j0 + grid.axes[0].nodes * j1]
        }
    };
    let offset = |r: usize, delta: isize| if r == 0 { (delta, 0) } else { (0, delta) };
    let mut out = 0.0;
    for r in 0..k {
        let h = grid.axes[r].spacing();
        let (p1, p0) = (offset(r, 1), offset(r, -1));
        let up = val(p1.0, p1.1);
        let down = val(p0.0, p0.1);
        let here = val(0, 0);
        out += if b[r] >= 0.0 {
            b[r] * (up - here) / h
        } else {
            b[r] * (here - down) / h
        };
        out += 0.5 * cov(r, r) * (up - 2.0 * here + down) / (h * h);
    }
    if k == 2 {
        let a01 = 0.5 * cov(0, 1);
        if a01 != 0.0 {
            let (h0, h1) = (grid.axes[0].spacing(), grid.axes[1].spacing());
            let axes_sum = val(1, 0) + val(-1, 0) + val(0, 1) + val(0, -1);
            let mixed = if a01 > 0.0 {
                (val(1, 1) + val(-1, -1) - axes_sum + 2.0 * val(0, 0)) / (2.0 * h0 * h1)
            } else {
                -(val(1, -1) + val(-1, 1) - axes_sum + 2.0 * val(0, 0)) / (2.0 * h0 * h1)
            };
            out += 2.0 * a01 * mixed;
        }
    }
    Ok(out)
}

/// Central-difference `sigma^T D u` at an interior node.
fn z_at(p: &SwitchingProblem, grid: &Grid, t: f64, u: &[f64], mi: [usize; 2]) -> Result<Vec<f64>, FdError> {
    let k = grid.dim();
    let d = p.brownian_dim;
    let x: Vec<f64> = (0..k).map(|r| grid.axes[r].coord(mi[r])).collect();
    let idx = |r: usize, delta: isize| {
        let mut m = mi;
        m[r] = (m[r] as isize + delta) as usize;
        if k == 1 {
            m[0]
        } else {
            m[0] + grid.axes[0].nodes * m[1]
        }
    };
    let grad: Vec<f64> = (0..k)
        .map(|r| (u[idx(r, 1)] - u[idx(r, -1)]) / (2.0 * grid.axes[r].spacing()))
        .collect();
    let mut sigma = vec![0.0; k * d];
    p.diffusion_at(t, &x, &mut sigma).map_err(FdError::eval("diffusion"))?;
    Ok((0..d)
        .map(|c| (0..k).map(|r| sigma[r * d + c] * grad[r]).sum())
        .collect())
}

/// Obstacle violation, min-equation residual and complementarity of a
/// field, over interior nodes of layers `0..N`.
pub fn residual_report(
    p: &SwitchingProblem,
    grid: &Grid,
    field: &ValueField,
    opts: &SchemeOptions,
) -> Result<ResidualReport, FdError> {
    let m = p.mode_count;
    let dt = grid.dt();
    let theta = opts.theta;
    let mut obstacle_acc: Vec<Acc> = (0..m).map(|_| Acc::new()).collect();
    let mut pde_acc: Vec<Acc> = (0..m).map(|_| Acc::new()).collect();
    let mut comp_acc: Vec<Acc> = (0..m).map(|_| Acc::new()).collect();
    let layers: Vec<Vec<Vec<f64>>> = field
        .values
        .iter()
        .map(|v| v.rows().into_iter().map(|r| r.to_vec()).collect())
        .collect();
    let mut interior_points = 0;

    for n in 0..grid.time_steps {
        let t = grid.time(n);
        let t_next = grid.time(n + 1);
        for s in 0..grid.node_count() {
            if grid.is_boundary(s) {
                continue;
            }
            interior_points += 1;
            let mi = grid.multi_index(s);
            let x = grid.coords(s);
            let y: Vec<f64> = (0..m).map(|j| layers[j][n][s]).collect();
            for i in 0..m {
                let mut obstacle = f64::NEG_INFINITY;
                for j in (0..m).filter(|&j| j != i) {
                    let g = p.cost(i, j, t, &x).map_err(FdError::eval("cost"))?;
                    obstacle = obstacle.max(y[j] - g);
                }
                let u = y[i];
                obstacle_acc[i].push((obstacle - u).max(0.0));

                let lu_now = generator_at(p, grid, t, &layers[i][n], mi)?;
                let lu_next = if theta < 1.0 {
                    generator_at(p, grid, t_next, &layers[i][n + 1], mi)?
                } else {
                    0.0
                };
                let z = z_at(p, grid, t_next, &layers[i][n + 1], mi)?;
                let f = p.driver(i, t, &x, &y, &z).map_err(FdError::eval("driver"))?;
                let pde = (layers[i][n + 1][s] - u) / dt + theta * lu_now + (1.0 - theta) * lu_next + f;
                let gap = u - obstacle;
                pde_acc[i].push(gap.min(-pde).abs());

                let dk = field.reflection_increments[i][[n, s]];
                let comp = if obstacle.is_finite() { (dk * gap).abs() } else { 0.0 };
                comp_acc[i].push(comp);
            }
        }
    }
    Ok(ResidualReport {
        modes: (0..m)
            .map(|i| ModeResidual {
                obstacle: obstacle_acc[i].stat(),
                pde: pde_acc[i].stat(),
                complementarity: comp_acc[i].stat(),
            })
            .collect(),
        interior_points,
        truncated_domain: true,
    })
}
