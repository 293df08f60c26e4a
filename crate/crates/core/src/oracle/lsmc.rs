//! Regression Monte Carlo for the switching system on simulated paths.
//!
//! Backward in time: conditional expectations of next-step values are
//! regressed on polynomials of the state, `Z` on the scaled Brownian
//! increments, the obstacles are resolved on the regressed values and the
//! pathwise values follow the resulting decisions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::paths::PathBundle;
use super::OracleError;
use crate::obstacle;
use crate::problem::SwitchingProblem;

/// Frozen `y` argument of the drivers as a function of `(t, x)`.
pub type Frozen<'a> = &'a (dyn Fn(f64, &[f64]) -> Vec<f64> + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LsmcOptions {
    pub degree: usize,
    /// Bootstrap replicates for the standard error.
    pub bootstrap: usize,
    pub seed: u64,
    /// Standard errors above this flag the estimate as low confidence.
    pub se_cap: f64,
}

impl Default for LsmcOptions {
    fn default() -> Self {
        LsmcOptions {
            degree: 3,
            bootstrap: 32,
            seed: 0,
            se_cap: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsmcResult {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub low_confidence: Vec<bool>,
    pub degree: usize,
    pub path_count: usize,
    pub bootstrap: usize,
}

const SE_FLOOR: f64 = 1e-12;
const SWEEP_CAP: usize = 1000;
const BOOTSTRAP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Exponent vectors of all monomials of total degree at most `degree` in
/// `k` variables, constant first.
fn monomials(k: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e);
            rec(k, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|e| (e.iter().sum::<usize>(), std::cmp::Reverse(e.clone())));
    out
}

struct Basis {
    exponents: Vec<Vec<usize>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Basis {
    /// Standardized monomials of the points in the flat `k`-strided `xs`;
    /// coordinates without spread are left out.
    fn fit(xs: &[f64], k: usize, degree: usize) -> Basis {
        let count = (xs.len() / k) as f64;
        let mut mean = vec![0.0; k];
        let mut scale = vec![0.0; k];
        for x in xs.chunks(k) {
            for r in 0..k {
                mean[r] += x[r];
            }
        }
        mean.iter_mut().for_each(|v| *v /= count);
        for x in xs.chunks(k) {
            for r in 0..k {
                scale[r] += (x[r] - mean[r]).powi(2);
            }
        }
        let live: Vec<bool> = (0..k)
            .map(|r| {
                scale[r] = (scale[r] / count).sqrt();
                scale[r] > 1e-12 * (1.0 + mean[r].abs())
            })
            .collect();
        let exponents = monomials(k, degree)
            .into_iter()
            .filter(|e| e.iter().zip(&live).all(|(&p, &l)| l || p == 0))
            .collect();
        Basis { exponents, mean, scale }
    }

    fn len(&self) -> usize {
        self.exponents.len()
    }

    fn eval(&self, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        for (r, u) in scratch.iter_mut().enumerate() {
            *u = if self.scale[r] > 0.0 {
                (x[r] - self.mean[r]) / self.scale[r]
            } else {
                0.0
            };
        }
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e.iter().zip(scratch.iter()).map(|(&p, &v)| v.powi(p as i32)).product();
        }
    }
}

/// Least squares through the normal equations, one factorization shared by
/// several responses.
struct Regression {
    design: Vec<f64>,
    q: usize,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Regression {
    fn new(basis: &Basis, xs: &[f64], k: usize, step: usize) -> Result<Regression, OracleError> {
        let q = basis.len();
        let mut design = vec![0.0; xs.len() / k * q];
        let mut scratch = vec![0.0; k];
        for (row, x) in design.chunks_mut(q).zip(xs.chunks(k)) {
            basis.eval(x, &mut scratch, row);
        }
        let mut gram = DMatrix::<f64>::zeros(q, q);
        for row in design.chunks(q) {
            for a in 0..q {
                for b in a..q {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let chol = gram.cholesky().ok_or(OracleError::RankDeficient { step })?;
        let pivots: Vec<f64> = (0..q).map(|a| chol.l_dirty()[(a, a)]).collect();
        let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
        let max_pivot = pivots.iter().copied().fold(0.0, f64::max);
        if !(min_pivot > 1e-7 * max_pivot) {
            return Err(OracleError::RankDeficient { step });
        }
        Ok(Regression { design, q, chol })
    }

    /// Fitted values at the regression points of the response
    /// `target(row)`.
    fn fitted(&self, target: impl Fn(usize) -> f64) -> Vec<f64> {
        let q = self.q;
        let mut rhs = DVector::<f64>::zeros(q);
        for (r, row) in self.design.chunks(q).enumerate() {
            let y = target(r);
            for a in 0..q {
                rhs[a] += row[a] * y;
            }
        }
        let beta = self.chol.solve(&rhs);
        self.design
            .chunks(q)
            .map(|row| row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }
}

struct Scratch {
    chat: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    f: Vec<f64>,
    c: Vec<f64>,
    g: Vec<f64>,
}

impl Scratch {
    fn new(m: usize, d: usize) -> Scratch {
        Scratch {
            chat: vec![0.0; m],
            y: vec![0.0; m],
            z: vec![0.0; d],
            f: vec![0.0; m],
            c: vec![0.0; m],
            g: vec![0.0; m * m],
        }
    }
}

fn estimate(
    p: &SwitchingProblem,
    paths: &PathBundle,
    selection: &[usize],
    degree: usize,
    frozen: Option<Frozen<'_>>,
) -> Result<Vec<f64>, OracleError> {
    let m = p.mode_count;
    let d = p.brownian_dim;
    let k = p.state_dim;
    let count = selection.len();
    let dt = paths.dt;
    let gather = |n: usize| -> Vec<f64> {
        let mut xs = Vec::with_capacity(count * k);
        for &path in selection {
            xs.extend((0..k).map(|r| paths.states[[n, path, r]]));
        }
        xs
    };

    // pathwise values, flat [path][mode]
    let xs = gather(paths.steps);
    let mut values = vec![0.0; count * m];
    values
        .par_chunks_mut(m)
        .zip(xs.par_chunks(k))
        .try_for_each(|(v, x)| -> Result<(), OracleError> {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = p.terminal(i, x).map_err(OracleError::eval("terminal"))?;
            }
            Ok(())
        })?;
    let mut next_values = vec![0.0; count * m];
    for n in (0..paths.steps).rev() {
        let t = paths.time(n);
        let xs = gather(n);
        let basis = Basis::fit(&xs, k, degree);
        let reg = Regression::new(&basis, &xs, k, n)?;
        let mut cont: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut z: Vec<Vec<Vec<f64>>> = Vec::with_capacity(m);
        for i in 0..m {
            let fitted = reg.fitted(|row| values[row * m + i]);
            let zi = (0..d)
                .map(|c| {
                    reg.fitted(|row| {
                        (values[row * m + i] - fitted[row]) * paths.increments[[n, selection[row], c]] / dt
                    })
                })
                .collect();
            cont.push(fitted);
            z.push(zi);
        }
        next_values
            .par_chunks_mut(m)
            .zip(xs.par_chunks(k))
            .enumerate()
            .try_for_each_init(
                || Scratch::new(m, d),
                |s, (row, (out, x))| -> Result<(), OracleError> {
                    for i in 0..m {
                        s.chat[i] = cont[i][row];
                    }
                    match frozen {
                        Some(fr) => s.y.copy_from_slice(&fr(t, x)),
                        None => s.y.copy_from_slice(&s.chat),
                    }
                    for i in 0..m {
                        for c in 0..d {
                            s.z[c] = z[i][c][row];
                        }
                        s.f[i] = p.driver(i, t, x, &s.y, &s.z).map_err(OracleError::eval("driver"))?;
                        s.c[i] = s.chat[i] + s.f[i] * dt;
                        out[i] = values[row * m + i] + s.f[i] * dt;
                    }
                    if m == 1 {
                        return Ok(());
                    }
                    for i in 0..m {
                        for j in (0..m).filter(|&j| j != i) {
                            s.g[i * m + j] = p.cost(i, j, t, x).map_err(OracleError::eval("cost"))?;
                        }
                    }
                    let r = obstacle::resolve(&s.c, &s.g, 0.0, SWEEP_CAP).map_err(|source| OracleError::SweepCap {
                        step: n,
                        node: row,
                        source,
                    })?;
                    if r.active.iter().all(Option::is_none) {
                        return Ok(());
                    }
                    s.f.copy_from_slice(out);
                    for i in 0..m {
                        // follow the binding chain to a mode that continues
                        let mut mode = i;
                        let mut cost = 0.0;
                        for _ in 0..m {
                            match r.active[mode] {
                                Some(j) => {
                                    cost += s.g[mode * m + j];
                                    mode = j;
                                }
                                None => break,
                            }
                        }
                        out[i] = s.f[mode] - cost;
                    }
                    Ok(())
                },
            )?;
        std::mem::swap(&mut values, &mut next_values);
    }
    Ok((0..m)
        .map(|i| values.chunks(m).map(|v| v[i]).sum::<f64>() / count as f64)
        .collect())
}

/// Values of every mode at the bundle's starting point with bootstrap
/// standard errors.
pub fn lsmc_solve(
    p: &SwitchingProblem,
    paths: &PathBundle,
    opts: &LsmcOptions,
    frozen: Option<Frozen<'_>>,
) -> Result<LsmcResult, OracleError> {
    let count = paths.path_count();
    if count < 2 {
        return Err(OracleError::InvalidArgument(
            "regression needs at least two paths".into(),
        ));
    }
    if opts.bootstrap < 2 {
        return Err(OracleError::InvalidArgument(
            "at least two bootstrap replicates are needed".into(),
        ));
    }
    let all: Vec<usize> = (0..count).collect();
    let values = estimate(p, paths, &all, opts.degree, frozen)?;
    let replicates = (0..opts.bootstrap)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ BOOTSTRAP_SALT);
            rng.set_stream(b as u64);
            let selection: Vec<usize> = (0..count).map(|_| rng.gen_range(0..count)).collect();
            estimate(p, paths, &selection, opts.degree, frozen)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let m = p.mode_count;
    let std_errors: Vec<f64> = (0..m)
        .map(|i| {
            let mean = replicates.iter().map(|r| r[i]).sum::<f64>() / replicates.len() as f64;
            let var = replicates.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (replicates.len() - 1) as f64;
            var.sqrt().max(SE_FLOOR)
        })
        .collect();
    Ok(LsmcResult {
        low_confidence: std_errors.iter().map(|&s| s > opts.se_cap).collect(),
        values,
        std_errors,
        degree: opts.degree,
        path_count: count,
        bootstrap: opts.bootstrap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_order() {
        assert_eq!(monomials(1, 3), vec![vec![0], vec![1], vec![2], vec![3]]);
        let two = monomials(2, 2);
        assert_eq!(two.len(), 6);
        assert_eq!(two[0], vec![0, 0]);
        assert_eq!(two[1], vec![1, 0]);
    }

    #[test]
    fn regression_recovers_polynomial() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1 - 2.0).collect();
        let basis = Basis::fit(&xs, 1, 3);
        let reg = Regression::new(&basis, &xs, 1, 0).unwrap();
        let target: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x.powi(3)).collect();
        for (a, b) in reg.fitted(|r| target[r]).iter().zip(&target) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_states_use_the_mean() {
        let xs = vec![0.5; 10];
        let basis = Basis::fit(&xs, 1, 3);
        assert_eq!(basis.len(), 1);
        let reg = Regression::new(&basis, &xs, 1, 0).unwrap();
        let fitted = reg.fitted(|r| r as f64);
        assert!((fitted[0] - 4.5).abs() < 1e-12);
    }
}
