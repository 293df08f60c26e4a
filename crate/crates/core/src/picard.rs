//! The outer fixed-point loop `Gamma^{q+1} = Theta(Gamma^q)` and its
//! diagnostics: the exponentially weighted norm, contraction probes, the
//! dominating growth bound and a comparison harness.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fd::theta::{gradient_field, terminal_layer, Stepper};
use crate::fd::{apply_theta_map, FdError, Grid, SchemeOptions, ValueField};
use crate::problem::SwitchingProblem;

#[derive(Debug, Error)]
pub enum PicardError {
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error("no convergence after {} iterations (last distance {:e})", .state.iteration, .state.distance_history.last().copied().unwrap_or(f64::NAN))]
    NotConverged { state: Box<PicardState> },
    #[error("the two fields coincide; contraction ratio undefined")]
    ZeroDenominator,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dominance precondition fails: {0}")]
    Dominance(DominanceWitness),
}

impl PicardError {
    pub fn code(&self) -> &'static str {
        match self {
            PicardError::Fd(e) => e.code(),
            PicardError::NotConverged { .. } => "picard_not_converged",
            PicardError::ZeroDenominator => "zero_denominator",
            PicardError::InvalidArgument(_) => "invalid_argument",
            PicardError::Dominance(_) => "dominance_violated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaStar {
    pub alpha0: f64,
    pub contraction_bound: f64,
}

impl AlphaStar {
    /// With `C = 0` the map does not depend on its argument and any positive
    /// weight works; `alpha0` is then the sentinel 0.
    pub fn is_degenerate(&self) -> bool {
        self.alpha0 == 0.0
    }
}

/// `alpha0 = 4 C T m` and the squared-norm contraction bound
/// `2 C T m / alpha0`.
pub fn alpha_star(c: f64, horizon: f64, m: usize) -> AlphaStar {
    let alpha0 = 4.0 * c * horizon * m as f64;
    AlphaStar {
        alpha0,
        contraction_bound: if alpha0 > 0.0 {
            2.0 * c * horizon * m as f64 / alpha0
        } else {
            0.0
        },
    }
}

/// `sqrt(sum_{n<N} sum_s (1/S) e^{alpha t_n} |delta(t_n, x_s)|^2 dt)` with
/// `delta` given per mode as `(layer, node)` arrays.
pub fn weighted_norm(delta: &[Array2<f64>], alpha: f64, grid: &Grid) -> f64 {
    let nodes = grid.node_count() as f64;
    let dt = grid.dt();
    let mut acc = 0.0;
    for n in 0..grid.time_steps {
        let weight = (alpha * grid.time(n)).exp() * dt / nodes;
        let layer: f64 = delta.iter().map(|d| d.row(n).iter().map(|v| v * v).sum::<f64>()).sum();
        acc += weight * layer;
    }
    acc.sqrt()
}

fn sup_norm(delta: &[Array2<f64>]) -> f64 {
    delta.iter().flat_map(|d| d.iter()).fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the norm; `None` uses `alpha0`.
    pub alpha: Option<f64>,
    /// Starting iterate; `None` starts from zero in every mode.
    pub warm_start: Option<ValueField>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-6,
            max_iter: 200,
            alpha: None,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardState {
    pub iteration: usize,
    pub alpha: f64,
    pub current: ValueField,
    pub previous: ValueField,
    /// `||Gamma^q - Gamma^{q-1}||_alpha` for `q = 1, 2, ...`.
    pub distance_history: Vec<f64>,
    /// Matching sup-norm distances.
    pub inf_history: Vec<f64>,
    /// `distance_history[q] / distance_history[q-1]`, `None` where the
    /// previous distance is zero.
    pub measured_ratios: Vec<Option<f64>>,
    pub iteration_seconds: Vec<f64>,
    pub converged: bool,
}

/// Iterates the frozen-driver map until the weighted distance between
/// successive iterates drops to `tol`.
pub fn picard_solve(
    p: &SwitchingProblem,
    grid: &Grid,
    opts: &SchemeOptions,
    picard: &PicardOptions,
) -> Result<(ValueField, PicardState), PicardError> {
    if !(picard.tol > 0.0) {
        return Err(PicardError::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            picard.tol
        )));
    }
    if picard.max_iter == 0 {
        return Err(PicardError::InvalidArgument("max_iter must be at least 1".into()));
    }
    let alpha = picard
        .alpha
        .unwrap_or_else(|| alpha_star(p.lipschitz_const, p.horizon, p.mode_count).alpha0);
    let start = match &picard.warm_start {
        Some(f) => f.clone(),
        None => ValueField::zeros(grid, p.mode_count, p.brownian_dim),
    };
    let mut state = PicardState {
        iteration: 0,
        alpha,
        current: start.clone(),
        previous: start,
        distance_history: Vec::new(),
        inf_history: Vec::new(),
        measured_ratios: Vec::new(),
        iteration_seconds: Vec::new(),
        converged: false,
    };
    while state.iteration < picard.max_iter {
        let clock = Instant::now();
        let next = apply_theta_map(p, grid, &state.current, opts)?;
        let delta = next.value_difference(&state.current);
        let distance = weighted_norm(&delta, alpha, grid);
        state.inf_history.push(sup_norm(&delta));
        if let Some(&last) = state.distance_history.last() {
            state.measured_ratios.push((last > 0.0).then(|| distance / last));
        }
        state.distance_history.push(distance);
        state.previous = std::mem::replace(&mut state.current, next);
        state.iteration += 1;
        state.iteration_seconds.push(clock.elapsed().as_secs_f64());
        if distance <= picard.tol {
            state.converged = true;
            return Ok((state.current.clone(), state));
        }
    }
    Err(PicardError::NotConverged { state: Box::new(state) })
}

/// `||Theta(a) - Theta(b)||_alpha / ||a - b||_alpha`.
pub fn contraction_probe(
    p: &SwitchingProblem,
    grid: &Grid,
    opts: &SchemeOptions,
    a: &ValueField,
    b: &ValueField,
    alpha: f64,
) -> Result<f64, PicardError> {
    let denominator = weighted_norm(&a.value_difference(b), alpha, grid);
    if denominator == 0.0 {
        return Err(PicardError::ZeroDenominator);
    }
    let ta = apply_theta_map(p, grid, a, opts)?;
    let tb = apply_theta_map(p, grid, b, opts)?;
    Ok(weighted_norm(&ta.value_difference(&tb), alpha, grid) / denominator)
}

/// `eta` with `2 C m (e^{C eta} - 1) = 3/4`.
pub fn slab_width(c: f64, m: usize) -> Result<f64, PicardError> {
    if !(c > 0.0) {
        return Err(PicardError::InvalidArgument(format!("slab width needs C > 0, got {c}")));
    }
    if m == 0 {
        return Err(PicardError::InvalidArgument("slab width needs m >= 1".into()));
    }
    Ok((3.0 / (8.0 * c * m as f64)).ln_1p() / c)
}

/// Scalar surface dominating every `|u^i|`, indexed `(layer, node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundField {
    pub values: Array2<f64>,
}

impl BoundField {
    /// `max_i max_nodes (|u^i| - v)`.
    pub fn max_excess(&self, field: &ValueField) -> f64 {
        field
            .values
            .iter()
            .flat_map(|u| u.iter().zip(self.values.iter()).map(|(a, v)| a.abs() - v))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Solves `-v_t - L v = Cbar m v + Cbar |sigma^T D v| + sum_i |f_i(t, x, 0, 0)|`
/// with `v(T) = sum_i |h_i|` by the same backward scheme, where
/// `Cbar = m C`. The `v` term is implicit, the gradient term lagged.
pub fn dominating_bound(p: &SwitchingProblem, grid: &Grid, opts: &SchemeOptions) -> Result<BoundField, PicardError> {
    let m = p.mode_count;
    let d = p.brownian_dim;
    let nodes = grid.node_count();
    let c_bar = m as f64 * p.lipschitz_const;
    let stepper = Stepper::new(p, grid, *opts)?;
    let coords: Vec<Vec<f64>> = (0..nodes).map(|s| grid.coords(s)).collect();
    let mut terminal = vec![0.0; nodes];
    for i in 0..m {
        for (acc, h) in terminal.iter_mut().zip(terminal_layer(p, grid, i)?) {
            *acc += h.abs();
        }
    }
    let mut values = Array2::zeros((grid.time_steps + 1, nodes));
    values
        .row_mut(grid.time_steps)
        .assign(&ndarray::ArrayView1::from(terminal.as_slice()));
    let zero_y = vec![0.0; m];
    let zero_z = vec![0.0; d];
    for n in (0..grid.time_steps).rev() {
        let t = grid.time(n);
        let next = values.row(n + 1).to_vec();
        let grad = gradient_field(grid, values.row(n + 1), p, grid.time(n + 1), opts.gradient_stencil)?;
        let mut source = vec![0.0; nodes];
        for (s, src) in source.iter_mut().enumerate() {
            let mut f0 = 0.0;
            for i in 0..m {
                f0 += p
                    .driver(i, t, &coords[s], &zero_y, &zero_z)
                    .map_err(FdError::eval("driver"))?
                    .abs();
            }
            let z_norm = grad.row(s).iter().map(|v| v * v).sum::<f64>().sqrt();
            *src = f0 + c_bar * z_norm;
        }
        let layer = stepper.step(n, &next, &source, c_bar * m as f64, &terminal)?;
        values.row_mut(n).assign(&ndarray::ArrayView1::from(layer.as_slice()));
    }
    Ok(BoundField { values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceWitness {
    pub what: String,
    pub mode: usize,
    pub other: Option<usize>,
    pub t: f64,
    pub x: Vec<f64>,
    pub margin: f64,
}

impl std::fmt::Display for DominanceWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} for mode {}", self.what, self.mode + 1)?;
        if let Some(j) = self.other {
            write!(f, " -> {}", j + 1)?;
        }
        write!(f, " at t = {}, x = {:?} (margin {:e})", self.t, self.x, self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `min over modes, layers, nodes of (u_high - u_low)`.
    pub min_slack: f64,
    pub mode_min_slack: Vec<f64>,
    /// `(mode, layer, node)` attaining `min_slack`.
    pub witness: (usize, usize, usize),
    pub tolerance: f64,
    pub passed: bool,
    pub points_checked: usize,
}

const PROBES: usize = 6;
const MONOTONE_STEP: f64 = 0.25;

fn probe_points(p: &SwitchingProblem, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![(vec![0.0; p.mode_count], vec![0.0; p.brownian_dim])];
    for _ in 1..PROBES {
        let y = (0..p.mode_count).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let z = (0..p.brownian_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        out.push((y, z));
    }
    out
}

fn sample_points(grid: &Grid, max_points: usize) -> Vec<(f64, Vec<f64>)> {
    let layers = grid.time_steps + 1;
    let nodes = grid.node_count();
    let stride = ((layers * nodes) as f64 / max_points as f64).sqrt().ceil().max(1.0) as usize;
    let mut out = Vec::new();
    for n in (0..layers).step_by(stride) {
        for s in (0..nodes).step_by(stride) {
            out.push((grid.time(n), grid.coords(s)));
        }
    }
    out
}

/// Checks `f_i <= fbar_i`, `h_i <= hbar_i`, `g_ij >= gbar_ij` and monotone
/// cross-dependence of the drivers on samples, then solves both problems and
/// reports `min (u_high - u_low)`.
pub fn comparison_harness(
    low: &SwitchingProblem,
    high: &SwitchingProblem,
    grid: &Grid,
    opts: &SchemeOptions,
    picard: &PicardOptions,
    tolerance: f64,
) -> Result<ComparisonReport, PicardError> {
    if low.mode_count != high.mode_count
        || low.state_dim != high.state_dim
        || low.brownian_dim != high.brownian_dim
        || low.horizon != high.horizon
    {
        return Err(PicardError::InvalidArgument(
            "compared problems differ in k, d, m or T".into(),
        ));
    }
    let m = low.mode_count;
    let eval = FdError::eval;
    let probes = probe_points(low, 0x5eed);
    let samples = sample_points(grid, 4000);
    let fail = |what: &str, mode, other, t, x: &[f64], margin| {
        Err(PicardError::Dominance(DominanceWitness {
            what: what.into(),
            mode,
            other,
            t,
            x: x.to_vec(),
            margin,
        }))
    };
    for (t, x) in &samples {
        for i in 0..m {
            for (y, z) in &probes {
                let f = low.driver(i, *t, x, y, z).map_err(eval("driver"))?;
                let fbar = high.driver(i, *t, x, y, z).map_err(eval("driver"))?;
                if f > fbar {
                    return fail("driver dominance f <= fbar", i, None, *t, x, fbar - f);
                }
                for (problem, label) in [(low, "lower"), (high, "upper")] {
                    let base = problem.driver(i, *t, x, y, z).map_err(eval("driver"))?;
                    for j in (0..m).filter(|&j| j != i) {
                        let mut bumped = y.clone();
                        bumped[j] += MONOTONE_STEP;
                        let v = problem.driver(i, *t, x, &bumped, z).map_err(eval("driver"))?;
                        if v < base - 1e-12 {
                            return fail(
                                &format!("{label} driver not nondecreasing in y_j"),
                                i,
                                Some(j),
                                *t,
                                x,
                                v - base,
                            );
                        }
                    }
                }
            }
            for j in (0..m).filter(|&j| j != i) {
                let g = low.cost(i, j, *t, x).map_err(eval("cost"))?;
                let gbar = high.cost(i, j, *t, x).map_err(eval("cost"))?;
                if g < gbar {
                    return fail("cost dominance g >= gbar", i, Some(j), *t, x, g - gbar);
                }
            }
        }
    }
    for s in 0..grid.node_count() {
        let x = grid.coords(s);
        for i in 0..m {
            let h = low.terminal(i, &x).map_err(eval("terminal"))?;
            let hbar = high.terminal(i, &x).map_err(eval("terminal"))?;
            if h > hbar {
                return fail("terminal dominance h <= hbar", i, None, grid.horizon, &x, hbar - h);
            }
        }
    }

    let (u_low, _) = picard_solve(low, grid, opts, picard)?;
    let (u_high, _) = picard_solve(high, grid, opts, picard)?;
    let mut mode_min_slack = vec![f64::INFINITY; m];
    let mut min_slack = f64::INFINITY;
    let mut witness = (0, 0, 0);
    for i in 0..m {
        for ((n, s), &v) in u_high.values[i].indexed_iter() {
            let slack = v - u_low.values[i][[n, s]];
            mode_min_slack[i] = mode_min_slack[i].min(slack);
            if slack < min_slack {
                min_slack = slack;
                witness = (i, n, s);
            }
        }
    }
    Ok(ComparisonReport {
        min_slack,
        mode_min_slack,
        witness,
        tolerance,
        passed: min_slack >= -tolerance,
        points_checked: samples.len() * m * probes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::Axis;

    #[test]
    fn alpha_star_examples() {
        let a = alpha_star(1.0, 1.0, 2);
        assert_eq!((a.alpha0, a.contraction_bound), (8.0, 0.5));
        let a = alpha_star(2.0, 0.5, 3);
        assert_eq!((a.alpha0, a.contraction_bound), (12.0, 0.5));
        let a = alpha_star(0.0, 1.0, 3);
        assert!(a.is_degenerate());
        assert_eq!(a.contraction_bound, 0.0);
    }

    #[test]
    fn slab_width_examples() {
        let e2 = slab_width(1.0, 2).unwrap();
        assert!((e2 - (19.0f64 / 16.0).ln()).abs() < 1e-15);
        assert!((e2 - 0.171850).abs() < 1e-6);
        let e1 = slab_width(1.0, 1).unwrap();
        assert!((e1 - 0.318454).abs() < 1e-6);
        for (c, m, eta) in [(1.0, 2, e2), (1.0, 1, e1)] {
            assert!((2.0 * c * m as f64 * ((c * eta).exp() - 1.0) - 0.75).abs() < 1e-12);
        }
        assert!(slab_width(0.0, 1).is_err());
        assert!(slab_width(-1.0, 1).is_err());
    }

    fn grid(steps: usize) -> Grid {
        Grid::new(
            1.0,
            steps,
            vec![Axis {
                lo: 0.0,
                hi: 1.0,
                nodes: 5,
            }],
        )
        .unwrap()
    }

    #[test]
    fn norm_of_constant_field() {
        let g = grid(1000);
        let c = 1.7;
        let delta = vec![Array2::from_elem((1001, 5), c)];
        assert_eq!(weighted_norm(&[Array2::zeros((1001, 5))], 3.0, &g), 0.0);
        for alpha in [0.0, 1.0, 8.0] {
            let exact: f64 = if alpha == 0.0 {
                c
            } else {
                c * (((alpha * 1.0f64).exp() - 1.0) / alpha).sqrt()
            };
            let got = weighted_norm(&delta, alpha, &g);
            assert!((got / exact - 1.0).abs() < 0.01, "alpha {alpha}: {got} vs {exact}");
        }
    }

    #[test]
    fn norm_of_half_field() {
        let g = grid(10);
        let mut delta = Array2::zeros((11, 5));
        for n in 0..5 {
            delta.row_mut(n).fill(1.0);
        }
        let got = weighted_norm(&[delta], 0.0, &g);
        assert!((got - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn norm_is_homogeneous() {
        let g = grid(8);
        let a = Array2::from_shape_fn((9, 5), |(n, s)| (n as f64 * 0.3 - s as f64).sin());
        let base = weighted_norm(std::slice::from_ref(&a), 2.5, &g);
        let scaled = weighted_norm(&[a * -4.0], 2.5, &g);
        assert_eq!(scaled, 4.0 * base);
    }
}
