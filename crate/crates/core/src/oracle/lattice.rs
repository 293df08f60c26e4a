use serde::Serialize;

use super::OracleError;
use crate::problem::SwitchingProblem;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LatticeOptions {
    /// Space step; defaults to `sigma sqrt(3 dt)` at the root.
    pub spacing: Option<f64>,
}

/// Branches to `first_child`, `first_child + 1`, `first_child + 2` of the
/// next layer with probabilities `probs` (down, middle, up).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub first_child: usize,
    pub probs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeLayer {
    pub t: f64,
    /// Integer level of the first node; node `j` sits at `x0 + (lowest + j) dx`.
    pub lowest: i64,
    pub states: Vec<f64>,
    /// Empty on the last layer.
    pub transitions: Vec<Transition>,
}

/// Recombining trinomial tree for a one-dimensional state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeModel {
    pub t0: f64,
    pub x0: f64,
    pub dt: f64,
    pub dx: f64,
    pub steps: usize,
    pub layers: Vec<LatticeLayer>,
}

impl LatticeModel {
    pub fn node_count(&self, n: usize) -> usize {
        self.layers[n].states.len()
    }
}

fn variance_rate(p: &SwitchingProblem, t: f64, x: f64) -> Result<f64, OracleError> {
    let mut sigma = vec![0.0; p.brownian_dim];
    p.diffusion_at(t, &[x], &mut sigma)
        .map_err(OracleError::eval("diffusion"))?;
    Ok(sigma.iter().map(|s| s * s).sum())
}

fn drift(p: &SwitchingProblem, t: f64, x: f64) -> Result<f64, OracleError> {
    let mut b = [0.0];
    p.drift_at(t, &[x], &mut b).map_err(OracleError::eval("drift"))?;
    Ok(b[0])
}

const PROBABILITY_SLACK: f64 = 1e-12;

/// Builds the lattice on `[t0, T]` with `steps` steps rooted at `x0`.
///
/// The middle child of a node at level `j` is `j + round(b dt / dx)`; with
/// `eta` the rounding remainder and `V = sigma^2 dt / dx^2` the branch
/// probabilities `(V + eta^2 -+ eta) / 2` and `1 - V - eta^2` match the
/// local mean and variance exactly.
pub fn build_lattice(
    p: &SwitchingProblem,
    t0: f64,
    x0: f64,
    steps: usize,
    options: &LatticeOptions,
) -> Result<LatticeModel, OracleError> {
    if p.state_dim != 1 {
        return Err(OracleError::NotOneDimensional(p.state_dim));
    }
    if steps == 0 || !(t0 < p.horizon) {
        return Err(OracleError::InvalidArgument(format!(
            "need at least one step and t0 < T (t0 = {t0}, T = {})",
            p.horizon
        )));
    }
    let dt = (p.horizon - t0) / steps as f64;
    let dx = match options.spacing {
        Some(h) if h > 0.0 => h,
        Some(h) => {
            return Err(OracleError::InvalidArgument(format!(
                "lattice spacing must be positive, got {h}"
            )))
        }
        None => {
            let var = variance_rate(p, t0, x0)?;
            if var > 0.0 {
                (3.0 * var * dt).sqrt()
            } else {
                let b = drift(p, t0, x0)?.abs();
                if b > 0.0 {
                    b * dt
                } else {
                    dt
                }
            }
        }
    };
    let time = |n: usize| if n == steps { p.horizon } else { t0 + n as f64 * dt };
    let mut layers = vec![LatticeLayer {
        t: t0,
        lowest: 0,
        states: vec![x0],
        transitions: Vec::new(),
    }];
    for n in 0..steps {
        let t = time(n);
        let layer = &layers[n];
        let mut middles = Vec::with_capacity(layer.states.len());
        for (idx, &x) in layer.states.iter().enumerate() {
            let level = layer.lowest + idx as i64;
            let shift = drift(p, t, x)? * dt / dx;
            let rounded = shift.round();
            let eta = shift - rounded;
            let v = variance_rate(p, t, x)? * dt / (dx * dx);
            let probs = [
                (v + eta * eta - eta) / 2.0,
                1.0 - v - eta * eta,
                (v + eta * eta + eta) / 2.0,
            ];
            if probs
                .iter()
                .any(|&q| !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&q))
            {
                return Err(OracleError::ProbabilityOutOfRange { step: n, x, probs });
            }
            middles.push((level + rounded as i64, probs));
        }
        let lowest = middles.iter().map(|m| m.0).min().unwrap() - 1;
        let highest = middles.iter().map(|m| m.0).max().unwrap() + 1;
        let transitions = middles
            .iter()
            .map(|&(mid, probs)| Transition {
                first_child: (mid - 1 - lowest) as usize,
                probs,
            })
            .collect();
        layers[n].transitions = transitions;
        layers.push(LatticeLayer {
            t: time(n + 1),
            lowest,
            states: (lowest..=highest).map(|j| x0 + j as f64 * dx).collect(),
            transitions: Vec::new(),
        });
    }
    Ok(LatticeModel {
        t0,
        x0,
        dt,
        dx,
        steps,
        layers,
    })
}

/// `pd vd + pm vm + pu vu + f dt`; every lattice backward step goes
/// through here so that values computed along different routes agree to
/// the last bit.
#[inline]
pub(crate) fn continuation(tr: &Transition, next: &[f64], f: f64, dt: f64) -> f64 {
    let c = tr.first_child;
    tr.probs[0] * next[c] + tr.probs[1] * next[c + 1] + tr.probs[2] * next[c + 2] + f * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_problem;

    fn problem(b: &str, sigma: &str) -> SwitchingProblem {
        parse_problem(&format!(
            "[problem]\nk = 1\nm = 1\nT = 1\n[drift]\nb1 = \"{b}\"\n[diffusion]\nsigma11 = \"{sigma}\"\n[drivers]\nf1 = \"0\"\n[terminals]\nh1 = \"x1\"\n"
        ))
        .unwrap()
    }

    #[test]
    fn symmetric_when_dt_equals_dx_squared() {
        let p = problem("0", "1");
        let lat = build_lattice(&p, 0.0, 0.0, 4, &LatticeOptions { spacing: Some(0.5) }).unwrap();
        let tr = lat.layers[1].transitions[1];
        assert_eq!(tr.probs, [0.5, 0.0, 0.5]);
        let mean: f64 = tr
            .probs
            .iter()
            .enumerate()
            .map(|(c, q)| q * (lat.layers[2].states[tr.first_child + c] - lat.layers[1].states[1]))
            .sum();
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn second_moment_matches() {
        let p = problem("0", "1");
        let lat = build_lattice(&p, 0.0, 0.3, 10, &LatticeOptions::default()).unwrap();
        for n in 0..10 {
            for (idx, tr) in lat.layers[n].transitions.iter().enumerate() {
                let x = lat.layers[n].states[idx];
                let m2: f64 = (0..3)
                    .map(|c| tr.probs[c] * (lat.layers[n + 1].states[tr.first_child + c] - x).powi(2))
                    .sum();
                assert!((m2 - lat.dt).abs() < 1e-12);
                assert!((tr.probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn deterministic_drift() {
        let p = problem("1", "0");
        let lat = build_lattice(&p, 0.0, 0.0, 5, &LatticeOptions::default()).unwrap();
        let tr = lat.layers[0].transitions[0];
        assert_eq!(tr.probs, [0.0, 1.0, 0.0]);
        assert!((lat.layers[1].states[tr.first_child + 1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn drift_moments_with_state_dependence() {
        let p = problem("-x1", "1 + 0.1*sin(x1)");
        let lat = build_lattice(&p, 0.0, 0.5, 20, &LatticeOptions::default()).unwrap();
        for n in 0..20 {
            for (idx, tr) in lat.layers[n].transitions.iter().enumerate() {
                let x = lat.layers[n].states[idx];
                let mean: f64 = (0..3)
                    .map(|c| tr.probs[c] * (lat.layers[n + 1].states[tr.first_child + c] - x))
                    .sum();
                assert!((mean - (-x) * lat.dt).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_large_step_is_rejected() {
        let p = problem("0", "1");
        let err = build_lattice(&p, 0.0, 0.0, 2, &LatticeOptions { spacing: Some(0.1) }).unwrap_err();
        assert_eq!(err.code(), "lattice_probability");
    }
}
