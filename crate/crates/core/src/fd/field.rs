use ndarray::{Array2, Array3, ArrayView1};

use super::grid::Grid;

/// Discrete value surfaces `u^i(t_n, x_s)` for every mode, together with the
/// gradient fields `sigma^T D_x u^i`, the per-step reflection increments and
/// the binding obstacle mode where the obstacle is active.
///
/// Arrays are indexed `(time layer, node)`; gradients add a trailing
/// Brownian component axis. Modes are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub values: Vec<Array2<f64>>,
    pub gradients: Vec<Array3<f64>>,
    pub reflection_increments: Vec<Array2<f64>>,
    pub active_obstacle: Vec<Array2<Option<usize>>>,
}

impl ValueField {
    pub fn zeros(grid: &Grid, modes: usize, brownian_dim: usize) -> ValueField {
        let layers = grid.time_steps + 1;
        let nodes = grid.node_count();
        ValueField {
            values: vec![Array2::zeros((layers, nodes)); modes],
            gradients: vec![Array3::zeros((layers, nodes, brownian_dim)); modes],
            reflection_increments: vec![Array2::zeros((layers, nodes)); modes],
            active_obstacle: vec![Array2::from_elem((layers, nodes), None); modes],
        }
    }

    pub fn mode_count(&self) -> usize {
        self.values.len()
    }

    pub fn layers(&self) -> usize {
        self.values.first().map_or(0, |v| v.nrows())
    }

    pub fn nodes(&self) -> usize {
        self.values.first().map_or(0, |v| v.ncols())
    }

    pub fn brownian_dim(&self) -> usize {
        self.gradients.first().map_or(0, |g| g.shape()[2])
    }

    pub fn layer(&self, mode: usize, n: usize) -> ArrayView1<'_, f64> {
        self.values[mode].row(n)
    }

    /// Interpolated `u^mode(t_n, x)`.
    pub fn value_at(&self, grid: &Grid, mode: usize, n: usize, x: &[f64]) -> f64 {
        let row = self.values[mode].row(n);
        match row.as_slice() {
            Some(s) => grid.interpolate(s, x),
            None => grid.interpolate(&row.to_vec(), x),
        }
    }

    /// Binding obstacle at the node nearest to `x` on layer `n`.
    pub fn active_at(&self, grid: &Grid, mode: usize, n: usize, x: &[f64]) -> Option<usize> {
        let multi: Vec<usize> = grid
            .axes
            .iter()
            .zip(x)
            .map(|(a, &v)| (((v - a.lo) / a.spacing()).round().max(0.0) as usize).min(a.nodes - 1))
            .collect();
        self.active_obstacle[mode][[n, grid.index(&multi)]]
    }

    pub fn same_shape(&self, other: &ValueField) -> bool {
        self.mode_count() == other.mode_count() && self.layers() == other.layers() && self.nodes() == other.nodes()
    }

    /// Node-wise difference of the value surfaces.
    pub fn value_difference(&self, other: &ValueField) -> Vec<Array2<f64>> {
        self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect()
    }

    /// Largest absolute node-wise difference over all modes and layers.
    pub fn sup_distance(&self, other: &ValueField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max)
    }
}
