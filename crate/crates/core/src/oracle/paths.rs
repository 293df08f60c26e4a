use std::fmt::Write as _;

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::OracleError;
use crate::problem::SwitchingProblem;

/// Euler-Maruyama paths of the state on `[t0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    /// `(time index, path, coordinate)`, `steps + 1` time indices.
    pub states: Array3<f64>,
    /// `(step, path, component)` Brownian increments, `steps` steps.
    pub increments: Array3<f64>,
}

impl PathBundle {
    pub fn path_count(&self) -> usize {
        self.states.shape()[1]
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// Rows `path,n,x1..xk,dB1..dBd`; the increment columns are empty on
    /// the last time index.
    pub fn to_text(&self) -> String {
        let k = self.states.shape()[2];
        let d = self.increments.shape()[2];
        let mut out = String::from("path,n");
        for r in 1..=k {
            write!(out, ",x{r}").unwrap();
        }
        for c in 1..=d {
            write!(out, ",dB{c}").unwrap();
        }
        out.push('\n');
        for path in 0..self.path_count() {
            for n in 0..=self.steps {
                write!(out, "{path},{n}").unwrap();
                for r in 0..k {
                    write!(out, ",{}", self.states[[n, path, r]]).unwrap();
                }
                for c in 0..d {
                    if n < self.steps {
                        write!(out, ",{}", self.increments[[n, path, c]]).unwrap();
                    } else {
                        out.push(',');
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Simulates `paths` paths with `steps` steps from `(t0, x0)` to the
/// horizon. Path `i` draws from its own ChaCha8 stream, so the bundle does
/// not depend on the number of worker threads.
pub fn euler_paths(
    p: &SwitchingProblem,
    t0: f64,
    x0: &[f64],
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<PathBundle, OracleError> {
    let k = p.state_dim;
    let d = p.brownian_dim;
    if steps == 0 || paths == 0 {
        return Err(OracleError::InvalidArgument(
            "need at least one step and one path".into(),
        ));
    }
    if x0.len() != k {
        return Err(OracleError::InvalidArgument(format!(
            "x0 has {} coordinates, k = {k}",
            x0.len()
        )));
    }
    if !(t0 < p.horizon) {
        return Err(OracleError::InvalidArgument(format!(
            "t0 = {t0} is not before T = {}",
            p.horizon
        )));
    }
    let dt = (p.horizon - t0) / steps as f64;
    let sqrt_dt = dt.sqrt();
    let simulated = (0..paths)
        .into_par_iter()
        .map(|id| -> Result<(Vec<f64>, Vec<f64>), OracleError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id as u64);
            let mut states = Vec::with_capacity((steps + 1) * k);
            let mut incs = Vec::with_capacity(steps * d);
            let mut x = x0.to_vec();
            let mut b = vec![0.0; k];
            let mut sigma = vec![0.0; k * d];
            states.extend_from_slice(&x);
            for n in 0..steps {
                let t = t0 + n as f64 * dt;
                p.drift_at(t, &x, &mut b).map_err(OracleError::eval("drift"))?;
                p.diffusion_at(t, &x, &mut sigma)
                    .map_err(OracleError::eval("diffusion"))?;
                let db: Vec<f64> = (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z * sqrt_dt
                    })
                    .collect();
                for r in 0..k {
                    let noise: f64 = (0..d).map(|c| sigma[r * d + c] * db[c]).sum();
                    x[r] += b[r] * dt + noise;
                }
                states.extend_from_slice(&x);
                incs.extend_from_slice(&db);
            }
            Ok((states, incs))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut states = Array3::zeros((steps + 1, paths, k));
    let mut increments = Array3::zeros((steps, paths, d));
    for (id, (s, inc)) in simulated.into_iter().enumerate() {
        for (n, x) in s.chunks(k).enumerate() {
            for (r, v) in x.iter().enumerate() {
                states[[n, id, r]] = *v;
            }
        }
        for (n, db) in inc.chunks(d).enumerate() {
            for (c, v) in db.iter().enumerate() {
                increments[[n, id, c]] = *v;
            }
        }
    }
    Ok(PathBundle {
        t0,
        dt,
        steps,
        seed,
        states,
        increments,
    })
}
