use rayon::prelude::*;
use serde::Serialize;

use super::lattice::{continuation, LatticeModel};
use super::strategy::check_frozen_shape;
use super::OracleError;
use crate::obstacle;
use crate::problem::SwitchingProblem;

/// Per-mode values on the lattice, indexed `[mode][layer][node]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeValues {
    pub values: Vec<Vec<Vec<f64>>>,
    /// Binding obstacle mode, `None` where continuing is optimal.
    pub active: Vec<Vec<Vec<Option<usize>>>>,
    pub max_sweeps: usize,
}

impl LatticeValues {
    pub fn root(&self) -> Vec<f64> {
        self.values.iter().map(|v| v[0][0]).collect()
    }
}

const SWEEP_CAP: usize = 1000;

/// Backward dynamic programming with the obstacles resolved exactly at
/// every node. The driver's `y` argument comes from `frozen` when given,
/// otherwise from the conditional expectations of the next layer.
pub fn lattice_dp(
    p: &SwitchingProblem,
    lat: &LatticeModel,
    frozen: Option<&LatticeValues>,
) -> Result<LatticeValues, OracleError> {
    if p.drivers_depend_on_z() {
        return Err(OracleError::ZDependent);
    }
    let m = p.mode_count;
    if let Some(fr) = frozen {
        check_frozen_shape(lat, m, fr)?;
    }
    let steps = lat.steps;
    let mut values: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); steps + 1]; m];
    let mut active: Vec<Vec<Vec<Option<usize>>>> = vec![vec![Vec::new(); steps + 1]; m];
    let last = &lat.layers[steps];
    for i in 0..m {
        values[i][steps] = last
            .states
            .iter()
            .map(|&x| p.terminal(i, &[x]).map_err(OracleError::eval("terminal")))
            .collect::<Result<_, _>>()?;
        active[i][steps] = vec![None; last.states.len()];
    }
    let z = vec![0.0; p.brownian_dim];
    let mut max_sweeps = 0;
    for n in (0..steps).rev() {
        let layer = &lat.layers[n];
        let next: Vec<&[f64]> = (0..m).map(|i| values[i][n + 1].as_slice()).collect();
        let resolved = layer
            .states
            .par_iter()
            .zip(&layer.transitions)
            .enumerate()
            .map(|(idx, (&x, tr))| -> Result<obstacle::Resolution, OracleError> {
                let y: Vec<f64> = match frozen {
                    Some(fr) => (0..m).map(|j| fr.values[j][n][idx]).collect(),
                    None => (0..m).map(|j| continuation(tr, next[j], 0.0, lat.dt)).collect(),
                };
                let mut c = Vec::with_capacity(m);
                let mut g = vec![0.0; m * m];
                for i in 0..m {
                    let f = p
                        .driver(i, layer.t, &[x], &y, &z)
                        .map_err(OracleError::eval("driver"))?;
                    c.push(continuation(tr, next[i], f, lat.dt));
                    for j in (0..m).filter(|&j| j != i) {
                        g[i * m + j] = p.cost(i, j, layer.t, &[x]).map_err(OracleError::eval("cost"))?;
                    }
                }
                obstacle::resolve(&c, &g, 0.0, SWEEP_CAP).map_err(|source| OracleError::SweepCap {
                    step: n,
                    node: idx,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for i in 0..m {
            values[i][n] = resolved.iter().map(|r| r.values[i]).collect();
            active[i][n] = resolved.iter().map(|r| r.active[i]).collect();
        }
        max_sweeps = resolved.iter().map(|r| r.sweeps).fold(max_sweeps, usize::max);
    }
    Ok(LatticeValues {
        values,
        active,
        max_sweeps,
    })
}
