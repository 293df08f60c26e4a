use serde::{Deserialize, Serialize};

use super::FdError;
use crate::problem::DomainBox;

/// Uniform axis with `nodes` points on `[lo, hi]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

/// Space-time grid on `[0, T] x box` with `time_steps` uniform steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub horizon: f64,
    pub time_steps: usize,
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn new(horizon: f64, time_steps: usize, axes: Vec<Axis>) -> Result<Grid, FdError> {
        if !(horizon > 0.0) {
            return Err(FdError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if time_steps == 0 {
            return Err(FdError::InvalidGrid("at least one time step is required".into()));
        }
        if axes.is_empty() || axes.len() > 2 {
            return Err(FdError::InvalidGrid(format!(
                "finite differences support 1 or 2 space dimensions, got {}",
                axes.len()
            )));
        }
        for a in &axes {
            if a.nodes < 3 {
                return Err(FdError::InvalidGrid(format!(
                    "each axis needs at least 3 nodes, got {}",
                    a.nodes
                )));
            }
            if !(a.hi > a.lo) {
                return Err(FdError::InvalidGrid(format!("empty axis [{}, {}]", a.lo, a.hi)));
            }
        }
        Ok(Grid {
            horizon,
            time_steps,
            axes,
        })
    }

    /// Grid with the same node count on every axis of `domain`.
    pub fn uniform(horizon: f64, time_steps: usize, domain: &DomainBox, nodes: usize) -> Result<Grid, FdError> {
        let axes = domain.bounds.iter().map(|&(lo, hi)| Axis { lo, hi, nodes }).collect();
        Grid::new(horizon, time_steps, axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.time_steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    /// Flat node index; the first axis varies fastest.
    pub fn index(&self, multi: &[usize]) -> usize {
        match multi.len() {
            1 => multi[0],
            _ => multi[0] + self.axes[0].nodes * multi[1],
        }
    }

    pub fn multi_index(&self, s: usize) -> [usize; 2] {
        let n0 = self.axes[0].nodes;
        if self.dim() == 1 {
            [s, 0]
        } else {
            [s % n0, s / n0]
        }
    }

    pub fn coords(&self, s: usize) -> Vec<f64> {
        let mi = self.multi_index(s);
        self.axes.iter().enumerate().map(|(r, a)| a.coord(mi[r])).collect()
    }

    /// True if the node touches the boundary of the box along any axis.
    pub fn is_boundary(&self, s: usize) -> bool {
        let mi = self.multi_index(s);
        self.axes
            .iter()
            .enumerate()
            .any(|(r, a)| mi[r] == 0 || mi[r] + 1 == a.nodes)
    }

    pub fn contains_in_interior(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x).all(|(a, &v)| v > a.lo && v < a.hi)
    }

    /// Multilinear interpolation of a nodal surface at `x` (clamped to the box).
    pub fn interpolate(&self, surface: &[f64], x: &[f64]) -> f64 {
        let mut lo_idx = [0usize; 2];
        let mut weight = [0.0f64; 2];
        for (r, a) in self.axes.iter().enumerate() {
            let h = a.spacing();
            let pos = ((x[r] - a.lo) / h).clamp(0.0, (a.nodes - 1) as f64);
            let i = (pos.floor() as usize).min(a.nodes - 2);
            lo_idx[r] = i;
            weight[r] = pos - i as f64;
        }
        if self.dim() == 1 {
            let i = lo_idx[0];
            let w = weight[0];
            if w == 0.0 {
                return surface[i];
            }
            return (1.0 - w) * surface[i] + w * surface[i + 1];
        }
        let mut acc = 0.0;
        for (c1, w1) in [(0usize, 1.0 - weight[1]), (1, weight[1])] {
            for (c0, w0) in [(0usize, 1.0 - weight[0]), (1, weight[0])] {
                let w = w0 * w1;
                if w != 0.0 {
                    acc += w * surface[self.index(&[lo_idx[0] + c0, lo_idx[1] + c1])];
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry() {
        let g = Grid::new(
            1.0,
            4,
            vec![Axis {
                lo: -1.0,
                hi: 1.0,
                nodes: 5,
            }],
        )
        .unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.time(4), 1.0);
        assert_eq!(g.coords(2), vec![0.0]);
        assert!(g.is_boundary(0) && g.is_boundary(4) && !g.is_boundary(2));
        assert!(g.contains_in_interior(&[0.3]));
        assert!(!g.contains_in_interior(&[1.0]));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(
            1.0,
            0,
            vec![Axis {
                lo: 0.0,
                hi: 1.0,
                nodes: 5
            }]
        )
        .is_err());
        assert!(Grid::new(
            1.0,
            1,
            vec![Axis {
                lo: 0.0,
                hi: 1.0,
                nodes: 2
            }]
        )
        .is_err());
        assert!(Grid::new(
            1.0,
            1,
            vec![
                Axis {
                    lo: 0.0,
                    hi: 1.0,
                    nodes: 3
                };
                3
            ]
        )
        .is_err());
    }

    #[test]
    fn two_dim_indexing_and_interpolation() {
        let a = Axis {
            lo: 0.0,
            hi: 2.0,
            nodes: 3,
        };
        let b = Axis {
            lo: 0.0,
            hi: 4.0,
            nodes: 5,
        };
        let g = Grid::new(1.0, 1, vec![a, b]).unwrap();
        assert_eq!(g.node_count(), 15);
        for s in 0..15 {
            let mi = g.multi_index(s);
            assert_eq!(g.index(&mi), s);
        }
        // bilinear surfaces are reproduced exactly
        let surf: Vec<f64> = (0..15)
            .map(|s| {
                let x = g.coords(s);
                1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]
            })
            .collect();
        let v = g.interpolate(&surf, &[0.7, 2.3]);
        assert!((v - (1.0 + 1.4 - 2.3 + 0.5 * 0.7 * 2.3)).abs() < 1e-12);
    }
}
