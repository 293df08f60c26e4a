//! Sampled checks of the standing assumptions on a problem: the non-free-loop
//! property of the switching costs, terminal consistency, and a probe-based
//! lower bound on the drivers' Lipschitz constant.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::problem::{DomainBox, SwitchingProblem};

/// Largest mode count accepted by the cycle enumeration.
pub const MAX_CYCLE_MODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("cycle enumeration supports at most {MAX_CYCLE_MODES} modes, problem has {0}")]
    TooManyModes(usize),
    #[error("evaluating {what}: {source}")]
    Eval { what: String, source: EvalError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    DiagonalCost,
    NegativeCost,
    FreeLoop,
    TerminalConsistency,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::DiagonalCost => "diagonal_cost",
            Check::NegativeCost => "negative_cost",
            Check::FreeLoop => "free_loop",
            Check::TerminalConsistency => "terminal_consistency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: Check,
    pub t: Option<f64>,
    pub x: Vec<f64>,
    /// Zero-based modes: a closed cycle (first == last) or an `(i, j)` pair.
    pub modes: Vec<usize>,
    /// Signed margin of the failed inequality (negative or zero).
    pub slack: f64,
}

impl Violation {
    pub fn modes_text(&self) -> String {
        let inner: Vec<String> = self.modes.iter().map(|m| (m + 1).to_string()).collect();
        format!("({})", inner.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Smallest margin seen over all sampled inequalities.
    pub min_slack: Option<f64>,
    pub points_checked: usize,
}

impl ValidationReport {
    fn from_parts(violations: Vec<Violation>, min_slack: Option<f64>, points_checked: usize) -> Self {
        ValidationReport {
            passed: violations.is_empty(),
            violations,
            min_slack,
            points_checked,
        }
    }

    pub fn merge(mut self, other: ValidationReport) -> ValidationReport {
        self.violations.extend(other.violations);
        self.passed = self.violations.is_empty();
        self.min_slack = match (self.min_slack, other.min_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.points_checked += other.points_checked;
        self
    }

    /// One violation per line: `check,t,x1;x2,modes,slack`.
    pub fn to_records(&self) -> String {
        let mut out = String::from("check,t,x,modes,slack\n");
        for v in &self.violations {
            let t = v.t.map(|t| t.to_string()).unwrap_or_default();
            let x: Vec<String> = v.x.iter().map(|x| x.to_string()).collect();
            let modes: Vec<String> = v.modes.iter().map(|m| (m + 1).to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                v.check.name(),
                t,
                x.join(";"),
                modes.join(";"),
                v.slack
            );
        }
        out
    }
}

/// Key/value text blocks, one per violation.
impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "passed: {}", self.passed)?;
        writeln!(f, "points_checked: {}", self.points_checked)?;
        if let Some(s) = self.min_slack {
            writeln!(f, "min_slack: {s}")?;
        }
        writeln!(f, "violations: {}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f)?;
            writeln!(f, "check: {}", v.check.name())?;
            if let Some(t) = v.t {
                writeln!(f, "t: {t}")?;
            }
            writeln!(f, "x: {:?}", v.x)?;
            let label = if v.check == Check::FreeLoop { "cycle" } else { "modes" };
            writeln!(f, "{label}: {}", v.modes_text())?;
            writeln!(f, "slack: {}", v.slack)?;
        }
        Ok(())
    }
}

fn eval_err(what: impl Into<String>) -> impl FnOnce(EvalError) -> ValidationError {
    let what = what.into();
    move |source| ValidationError::Eval { what, source }
}

/// All simple directed cycles over `m` modes, each listed once starting
/// from its smallest mode, in depth-first lexicographic order. The returned
/// cycles are closed (`[0, 1, 0]`).
pub fn simple_cycles(m: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, path: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let m = used.len();
        for next in start + 1..m {
            if used[next] {
                continue;
            }
            path.push(next);
            used[next] = true;
            let mut cycle = path.clone();
            cycle.push(start);
            out.push(cycle);
            extend(start, path, used, out);
            used[next] = false;
            path.pop();
        }
    }
    let mut out = Vec::new();
    for start in 0..m {
        let mut used = vec![false; m];
        used[start] = true;
        extend(start, &mut vec![start], &mut used, &mut out);
    }
    out
}

/// Checks `g_ii = 0`, `g_ij >= 0` and strictly positive cost around every
/// simple cycle at each sample point.
pub fn check_non_free_loop(
    p: &SwitchingProblem,
    samples: &[(f64, Vec<f64>)],
) -> Result<ValidationReport, ValidationError> {
    let m = p.mode_count;
    if m > MAX_CYCLE_MODES {
        return Err(ValidationError::TooManyModes(m));
    }
    let cycles = simple_cycles(m);
    let mut violations = Vec::new();
    let mut min_slack: Option<f64> = None;
    let mut g = vec![0.0; m * m];
    for (t, x) in samples {
        for i in 0..m {
            for j in 0..m {
                g[i * m + j] = p.cost(i, j, *t, x).map_err(eval_err(format!("g{}{}", i + 1, j + 1)))?;
            }
        }
        for i in 0..m {
            if g[i * m + i] != 0.0 {
                violations.push(Violation {
                    check: Check::DiagonalCost,
                    t: Some(*t),
                    x: x.clone(),
                    modes: vec![i, i],
                    slack: -g[i * m + i].abs(),
                });
            }
            for j in (0..m).filter(|&j| j != i) {
                if g[i * m + j] < 0.0 {
                    violations.push(Violation {
                        check: Check::NegativeCost,
                        t: Some(*t),
                        x: x.clone(),
                        modes: vec![i, j],
                        slack: g[i * m + j],
                    });
                }
            }
        }
        for cycle in &cycles {
            let sum: f64 = cycle.windows(2).map(|w| g[w[0] * m + w[1]]).sum();
            min_slack = Some(min_slack.map_or(sum, |s: f64| s.min(sum)));
            if !(sum > 0.0) {
                violations.push(Violation {
                    check: Check::FreeLoop,
                    t: Some(*t),
                    x: x.clone(),
                    modes: cycle.clone(),
                    slack: sum,
                });
            }
        }
    }
    Ok(ValidationReport::from_parts(violations, min_slack, samples.len()))
}

/// Checks `h_i(x) >= h_j(x) - g_ij(T, x)` for every ordered pair at each
/// sampled `x`.
pub fn check_terminal_consistency(
    p: &SwitchingProblem,
    samples: &[Vec<f64>],
) -> Result<ValidationReport, ValidationError> {
    let m = p.mode_count;
    let mut violations = Vec::new();
    let mut min_slack: Option<f64> = None;
    let mut h = vec![0.0; m];
    for x in samples {
        for (i, hi) in h.iter_mut().enumerate() {
            *hi = p.terminal(i, x).map_err(eval_err(format!("h{}", i + 1)))?;
        }
        for i in 0..m {
            for j in (0..m).filter(|&j| j != i) {
                let g = p
                    .cost(i, j, p.horizon, x)
                    .map_err(eval_err(format!("g{}{}", i + 1, j + 1)))?;
                let slack = h[i] - (h[j] - g);
                min_slack = Some(min_slack.map_or(slack, |s: f64| s.min(slack)));
                if slack < 0.0 {
                    violations.push(Violation {
                        check: Check::TerminalConsistency,
                        t: Some(p.horizon),
                        x: x.clone(),
                        modes: vec![i, j],
                        slack,
                    });
                }
            }
        }
    }
    Ok(ValidationReport::from_parts(violations, min_slack, samples.len()))
}

/// Tensor grid of `(t, x)` sample points over `[0, T] x box`.
pub fn grid_samples(
    p: &SwitchingProblem,
    domain: &DomainBox,
    time_points: usize,
    space_points: usize,
) -> Vec<(f64, Vec<f64>)> {
    let times: Vec<f64> = linspace(0.0, p.horizon, time_points.max(1));
    space_samples(domain, space_points)
        .into_iter()
        .flat_map(|x| times.iter().map(move |&t| (t, x.clone())))
        .collect()
}

/// Tensor grid of `x` sample points over the box.
pub fn space_samples(domain: &DomainBox, points_per_dim: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = domain
        .bounds
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, points_per_dim.max(1)))
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Region probed by [`estimate_lipschitz`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBox {
    pub t: (f64, f64),
    pub x: DomainBox,
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl ProbeBox {
    /// Unit box in `y` and `z`, the problem's domain in `x`, `[0, T]` in time.
    pub fn unit(p: &SwitchingProblem) -> ProbeBox {
        ProbeBox {
            t: (0.0, p.horizon),
            x: p.domain_or_default(),
            y: (-1.0, 1.0),
            z: (-1.0, 1.0),
        }
    }
}

/// Largest observed difference quotient
/// `|f_i(y, z) - f_i(y', z')| / (|y - y'| + |z - z'|)` over random probe
/// pairs sharing `(t, x)`. A lower bound on the true Lipschitz constant.
///
/// A third of the pairs move only `y`, a third only `z`, the rest both, so
/// that constants concentrated in one argument are found. Probes where a
/// driver fails to evaluate are skipped.
pub fn estimate_lipschitz(p: &SwitchingProblem, probe: &ProbeBox, n_probes: usize, seed: u64) -> f64 {
    let (m, d) = (p.mode_count, p.brownian_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };
    let mut best = 0.0f64;
    for probe_idx in 0..n_probes.max(2) {
        let t = uniform(&mut rng, probe.t);
        let x: Vec<f64> = probe.x.bounds.iter().map(|&b| uniform(&mut rng, b)).collect();
        let y: Vec<f64> = (0..m).map(|_| uniform(&mut rng, probe.y)).collect();
        let z: Vec<f64> = (0..d).map(|_| uniform(&mut rng, probe.z)).collect();
        let (move_y, move_z) = match probe_idx % 3 {
            0 => (true, false),
            1 => (false, true),
            _ => (true, true),
        };
        let y2: Vec<f64> = if move_y {
            (0..m).map(|_| uniform(&mut rng, probe.y)).collect()
        } else {
            y.clone()
        };
        let z2: Vec<f64> = if move_z {
            (0..d).map(|_| uniform(&mut rng, probe.z)).collect()
        } else {
            z.clone()
        };
        let dist = euclid(&y, &y2) + euclid(&z, &z2);
        if !(dist > 0.0) {
            continue;
        }
        for i in 0..m {
            let (Ok(a), Ok(b)) = (p.driver(i, t, &x, &y, &z), p.driver(i, t, &x, &y2, &z2)) else {
                continue;
            };
            best = best.max((a - b).abs() / dist);
        }
    }
    best
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}
