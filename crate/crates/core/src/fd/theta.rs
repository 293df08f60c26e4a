//! One application of the frozen-driver map: a backward theta-scheme sweep
//! with the driver's value arguments read from a given field and the
//! interconnected obstacles resolved among the unknowns at every layer.

use std::borrow::Cow;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::ValueField;
use super::grid::Grid;
use super::operator::{discretize_generator, local_coeffs, solve_implicit, Boundary, SparseOperator};
use super::FdError;
use crate::obstacle;
use crate::problem::SwitchingProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientStencil {
    #[default]
    Central,
    /// One-sided in the drift direction where the cell Peclet number
    /// `|b| dx / (2 a)` exceeds one, central elsewhere.
    UpwindFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    /// Implicitness of the generator: 1 is backward Euler, 0.5 Crank-Nicolson.
    pub theta: f64,
    pub obstacle_inner_max_sweeps: usize,
    pub obstacle_tolerance: f64,
    pub boundary: Boundary,
    pub gradient_stencil: GradientStencil,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            theta: 1.0,
            obstacle_inner_max_sweeps: 64,
            obstacle_tolerance: 1e-6,
            boundary: Boundary::LinearExtrapolation,
            gradient_stencil: GradientStencil::Central,
        }
    }
}

impl SchemeOptions {
    pub fn validate(&self) -> Result<(), FdError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(FdError::InvalidOptions(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if !(self.obstacle_tolerance > 0.0) {
            return Err(FdError::InvalidOptions("obstacle_tolerance must be positive".into()));
        }
        if self.obstacle_inner_max_sweeps == 0 {
            return Err(FdError::InvalidOptions(
                "obstacle_inner_max_sweeps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Backward time stepping of `-du/dt - L u = source` for one scalar surface.
pub(crate) struct Stepper<'a> {
    p: &'a SwitchingProblem,
    grid: &'a Grid,
    opts: SchemeOptions,
    fixed: Option<SparseOperator>,
    tridiagonal: bool,
    dirichlet_nodes: Vec<usize>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(p: &'a SwitchingProblem, grid: &'a Grid, opts: SchemeOptions) -> Result<Self, FdError> {
        opts.validate()?;
        if p.state_dim != grid.dim() {
            return Err(FdError::InvalidGrid(format!(
                "grid has {} dimensions, problem has k = {}",
                grid.dim(),
                p.state_dim
            )));
        }
        let time_dependent = p
            .drift
            .iter()
            .chain(p.diffusion.iter().flatten())
            .any(|e| e.mentions_t());
        let mut stepper = Stepper {
            p,
            grid,
            opts,
            fixed: None,
            tridiagonal: grid.dim() == 1,
            dirichlet_nodes: match opts.boundary {
                Boundary::DirichletFromTerminal => (0..grid.node_count()).filter(|&s| grid.is_boundary(s)).collect(),
                Boundary::LinearExtrapolation => Vec::new(),
            },
        };
        if !time_dependent {
            let op = discretize_generator(p, grid, 0.0, opts.boundary)?;
            stepper.check_cfl(&op)?;
            stepper.fixed = Some(op);
        }
        Ok(stepper)
    }

    fn check_cfl(&self, op: &SparseOperator) -> Result<(), FdError> {
        let explicit = (1.0 - self.opts.theta) * self.grid.dt();
        if explicit == 0.0 {
            return Ok(());
        }
        for i in 0..op.size() {
            let factor = 1.0 + explicit * op.diagonal(i);
            if factor < 0.0 {
                return Err(FdError::Cfl {
                    node: i,
                    factor,
                    theta: self.opts.theta,
                    dt: self.grid.dt(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn operator(&self, n: usize) -> Result<Cow<'_, SparseOperator>, FdError> {
        match &self.fixed {
            Some(op) => Ok(Cow::Borrowed(op)),
            None => {
                let op = discretize_generator(self.p, self.grid, self.grid.time(n), self.opts.boundary)?;
                self.check_cfl(&op)?;
                Ok(Cow::Owned(op))
            }
        }
    }

    /// Layer `n` from layer `n + 1`:
    /// `((1 - dt*shift) I - theta dt L_n) u = (I + (1-theta) dt L_{n+1}) next + dt source`.
    /// Dirichlet nodes take `boundary_values`.
    pub(crate) fn step(
        &self,
        n: usize,
        next: &[f64],
        source: &[f64],
        shift: f64,
        boundary_values: &[f64],
    ) -> Result<Vec<f64>, FdError> {
        let dt = self.grid.dt();
        let theta = self.opts.theta;
        let mut rhs: Vec<f64> = next.iter().zip(source).map(|(u, f)| u + dt * f).collect();
        if theta < 1.0 {
            let op_next = self.operator(n + 1)?;
            let mut lu = vec![0.0; next.len()];
            op_next.apply(next, &mut lu);
            for (r, l) in rhs.iter_mut().zip(&lu) {
                *r += (1.0 - theta) * dt * l;
            }
        }
        let diag_scale = 1.0 - dt * shift;
        if !(diag_scale > 0.0) {
            return Err(FdError::InvalidOptions(format!(
                "time step {dt} too large for the implicit linear term (dt * {shift} >= 1)"
            )));
        }
        let op = self.operator(n)?;
        let weight = theta * dt / diag_scale;
        let mut scaled: Vec<f64> = rhs.iter().map(|r| r / diag_scale).collect();
        for &s in &self.dirichlet_nodes {
            scaled[s] = boundary_values[s];
        }
        let mut u = solve_implicit(&op, weight, &scaled, next, self.tridiagonal)?;
        for &s in &self.dirichlet_nodes {
            u[s] = boundary_values[s];
        }
        Ok(u)
    }
}

/// `sigma^T(t, x) D_x u` at every node: central differences inside the box,
/// one-sided on its faces. Returns a `(nodes, d)` array.
pub fn gradient_field(
    grid: &Grid,
    values: ArrayView1<'_, f64>,
    p: &SwitchingProblem,
    t: f64,
    stencil: GradientStencil,
) -> Result<Array2<f64>, FdError> {
    let k = grid.dim();
    let d = p.brownian_dim;
    let rows = (0..grid.node_count())
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>, FdError> {
            let x = grid.coords(s);
            let mi = grid.multi_index(s);
            let coeffs = match stencil {
                GradientStencil::UpwindFallback => Some(local_coeffs(p, t, &x)?),
                GradientStencil::Central => None,
            };
            let mut grad = [0.0; 2];
            for (r, gr) in grad.iter_mut().enumerate().take(k) {
                let axis = grid.axes[r];
                let h = axis.spacing();
                let at = |delta: isize| {
                    let mut m = mi;
                    m[r] = (m[r] as isize + delta) as usize;
                    values[grid.index(&m[..k])]
                };
                let forward = || (at(1) - at(0)) / h;
                let backward = || (at(0) - at(-1)) / h;
                *gr = if mi[r] == 0 {
                    forward()
                } else if mi[r] + 1 == axis.nodes {
                    backward()
                } else {
                    match coeffs {
                        Some(c) if c.drift[r].abs() * h > 2.0 * c.a[r][r] => {
                            if c.drift[r] > 0.0 {
                                forward()
                            } else {
                                backward()
                            }
                        }
                        _ => (at(1) - at(-1)) / (2.0 * h),
                    }
                };
            }
            let mut sigma = vec![0.0; k * d];
            p.diffusion_at(t, &x, &mut sigma).map_err(FdError::eval("diffusion"))?;
            Ok((0..d)
                .map(|c| (0..k).map(|r| sigma[r * d + c] * grad[r]).sum())
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Array2::zeros((grid.node_count(), d));
    for (s, row) in rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            out[[s, c]] = v;
        }
    }
    Ok(out)
}

/// Terminal data `h_i` on the nodes.
pub(crate) fn terminal_layer(p: &SwitchingProblem, grid: &Grid, mode: usize) -> Result<Vec<f64>, FdError> {
    (0..grid.node_count())
        .map(|s| p.terminal(mode, &grid.coords(s)).map_err(FdError::eval("terminal")))
        .collect()
}

/// Applies the frozen-driver map once.
///
/// Sweeps backward over the layers. At each layer the continuation value of
/// every mode solves the theta-scheme with driver
/// `f_i(t_n, x, frozen(t_n, x), z_i)`, where `z_i` is the gradient of the
/// layer just computed; the obstacles `max_{j != i}(y_j - g_ij)` are then
/// resolved among the new values. The terminal layer of `frozen` is never
/// read.
pub fn apply_theta_map(
    p: &SwitchingProblem,
    grid: &Grid,
    frozen: &ValueField,
    opts: &SchemeOptions,
) -> Result<ValueField, FdError> {
    let m = p.mode_count;
    let d = p.brownian_dim;
    let nodes = grid.node_count();
    let steps = grid.time_steps;
    if frozen.mode_count() != m || frozen.layers() != steps + 1 || frozen.nodes() != nodes {
        return Err(FdError::ShapeMismatch(format!(
            "frozen field is {}x{}x{}, expected {}x{}x{}",
            frozen.mode_count(),
            frozen.layers(),
            frozen.nodes(),
            m,
            steps + 1,
            nodes
        )));
    }
    let stepper = Stepper::new(p, grid, *opts)?;
    let coords: Vec<Vec<f64>> = (0..nodes).map(|s| grid.coords(s)).collect();
    let mut field = ValueField::zeros(grid, m, d);

    let terminals: Vec<Vec<f64>> = (0..m).map(|i| terminal_layer(p, grid, i)).collect::<Result<_, _>>()?;
    for (i, h) in terminals.iter().enumerate() {
        field.values[i].row_mut(steps).assign(&ArrayView1::from(h.as_slice()));
        let grad = gradient_field(grid, field.values[i].row(steps), p, grid.horizon, opts.gradient_stencil)?;
        field.gradients[i].index_axis_mut(ndarray::Axis(0), steps).assign(&grad);
    }

    for n in (0..steps).rev() {
        let t = grid.time(n);
        let continuation = (0..m)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>, FdError> {
                let next = field.values[i].row(n + 1).to_vec();
                let source = (0..nodes)
                    .into_par_iter()
                    .map(|s| {
                        let y: Vec<f64> = (0..m).map(|j| frozen.values[j][[n, s]]).collect();
                        let z: Vec<f64> = (0..d).map(|c| field.gradients[i][[n + 1, s, c]]).collect();
                        p.driver(i, t, &coords[s], &y, &z).map_err(FdError::eval("driver"))
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                stepper.step(n, &next, &source, 0.0, &terminals[i])
            })
            .collect::<Result<Vec<_>, _>>()?;

        let resolved = (0..nodes)
            .into_par_iter()
            .map(|s| -> Result<obstacle::Resolution, FdError> {
                let c: Vec<f64> = continuation.iter().map(|ci| ci[s]).collect();
                let mut g = vec![0.0; m * m];
                for i in 0..m {
                    for j in (0..m).filter(|&j| j != i) {
                        g[i * m + j] = p.cost(i, j, t, &coords[s]).map_err(FdError::eval("cost"))?;
                    }
                }
                obstacle::resolve(&c, &g, opts.obstacle_tolerance, opts.obstacle_inner_max_sweeps).map_err(|e| {
                    FdError::ObstacleSweeps {
                        layer: n,
                        node: s,
                        source: e,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        for (s, r) in resolved.into_iter().enumerate() {
            for i in 0..m {
                field.values[i][[n, s]] = r.values[i];
                field.reflection_increments[i][[n, s]] = r.values[i] - continuation[i][s];
                field.active_obstacle[i][[n, s]] = r.active[i];
            }
        }
        for i in 0..m {
            let grad = gradient_field(grid, field.values[i].row(n), p, t, opts.gradient_stencil)?;
            field.gradients[i].index_axis_mut(ndarray::Axis(0), n).assign(&grad);
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::grid::Axis;
    use crate::problem::parse_problem;

    fn problem(drift: &str, sigma: &str) -> SwitchingProblem {
        parse_problem(&format!(
            "[problem]\nk = 1\nm = 1\nT = 1\n[drift]\nb1 = \"{drift}\"\n[diffusion]\nsigma11 = \"{sigma}\"\n[drivers]\nf1 = \"0\"\n[terminals]\nh1 = \"0\"\n"
        ))
        .unwrap()
    }

    #[test]
    fn implicit_step_is_monotone() {
        let p = problem("sin(3*x1)", "0.2 + x1^2");
        let grid = Grid::new(
            1.0,
            4,
            vec![Axis {
                lo: -1.0,
                hi: 1.0,
                nodes: 9,
            }],
        )
        .unwrap();
        let stepper = Stepper::new(&p, &grid, SchemeOptions::default()).unwrap();
        let base: Vec<f64> = (0..9).map(|s| (s as f64 * 0.7).cos()).collect();
        let zero = vec![0.0; 9];
        let u0 = stepper.step(2, &base, &zero, 0.0, &zero).unwrap();
        for probe in 0..9 {
            let mut bumped = base.clone();
            bumped[probe] += 1e-3;
            let u1 = stepper.step(2, &bumped, &zero, 0.0, &zero).unwrap();
            for s in 0..9 {
                assert!(u1[s] >= u0[s], "probe {probe}, node {s}");
            }
        }
    }

    #[test]
    fn options_are_validated() {
        let bad = SchemeOptions {
            theta: 1.5,
            ..SchemeOptions::default()
        };
        assert!(bad.validate().is_err());
        let bad = SchemeOptions {
            obstacle_tolerance: 0.0,
            ..SchemeOptions::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = problem("0", "1");
        let grid = Grid::new(
            1.0,
            4,
            vec![Axis {
                lo: -1.0,
                hi: 1.0,
                nodes: 9,
            }],
        )
        .unwrap();
        let other = Grid::new(
            1.0,
            5,
            vec![Axis {
                lo: -1.0,
                hi: 1.0,
                nodes: 9,
            }],
        )
        .unwrap();
        let frozen = ValueField::zeros(&other, 1, 1);
        let err = apply_theta_map(&p, &grid, &frozen, &SchemeOptions::default()).unwrap_err();
        assert_eq!(err.code(), "shape_mismatch");
    }
}
