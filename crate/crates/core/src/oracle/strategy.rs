//! Deterministic-time switching strategies: their cost process, their value
//! on the lattice, and exhaustive maximization.

use std::fmt;

use serde::Serialize;

use super::dp::LatticeValues;
use super::lattice::{continuation, LatticeModel};
use super::OracleError;
use crate::problem::SwitchingProblem;

/// Starts in `initial_mode` at time index 0 and switches to `switches[k].1`
/// at time index `switches[k].0`. Modes are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Strategy {
    pub initial_mode: usize,
    pub switches: Vec<(usize, usize)>,
}

impl Strategy {
    pub fn stay(mode: usize) -> Strategy {
        Strategy {
            initial_mode: mode,
            switches: Vec::new(),
        }
    }

    /// Checks ordering, distinct consecutive modes, mode range and that no
    /// switch happens at or after the last time index `steps`.
    pub fn validate(&self, m: usize, steps: usize) -> Result<(), OracleError> {
        if self.initial_mode >= m {
            return Err(OracleError::InvalidStrategy(format!(
                "initial mode {} out of range",
                self.initial_mode + 1
            )));
        }
        let mut mode = self.initial_mode;
        let mut time = 0;
        for &(n, to) in &self.switches {
            if n < time {
                return Err(OracleError::InvalidStrategy(
                    "switch times must be nondecreasing".into(),
                ));
            }
            if n >= steps {
                return Err(OracleError::InvalidStrategy(format!(
                    "switch at time index {n}; switching at the horizon is not allowed"
                )));
            }
            if to >= m || to == mode {
                return Err(OracleError::InvalidStrategy(format!(
                    "invalid switch {} -> {} at index {n}",
                    mode + 1,
                    to + 1
                )));
            }
            mode = to;
            time = n;
        }
        Ok(())
    }

    /// Mode held after all switches at each time index `0..=steps`.
    pub fn schedule(&self, steps: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut mode = self.initial_mode;
        let mut k = 0;
        for n in 0..=steps {
            while k < self.switches.len() && self.switches[k].0 == n {
                mode = self.switches[k].1;
                k += 1;
            }
            out.push(mode);
        }
        out
    }

    /// `(from, to)` pairs switched at time index `n`, in order.
    pub fn chain_at(&self, n: usize) -> Vec<(usize, usize)> {
        let mut mode = self.initial_mode;
        let mut out = Vec::new();
        for &(time, to) in &self.switches {
            if time == n {
                out.push((mode, to));
            }
            mode = to;
        }
        out
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "start in {}", self.initial_mode + 1)?;
        if self.switches.is_empty() {
            return write!(f, ", never switch");
        }
        for (n, to) in &self.switches {
            write!(f, "; at index {n} switch to {}", to + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostProcess {
    /// `A` after the switches at each time index (right-continuous).
    pub running: Vec<f64>,
    pub total: f64,
}

/// Cost process of `s` along one path given by its states at the grid times.
pub fn switching_cost(
    s: &Strategy,
    p: &SwitchingProblem,
    times: &[f64],
    path: &[Vec<f64>],
) -> Result<CostProcess, OracleError> {
    if times.len() != path.len() || times.is_empty() {
        return Err(OracleError::InvalidArgument(
            "times and path must have the same nonzero length".into(),
        ));
    }
    s.validate(p.mode_count, times.len() - 1)?;
    let mut running = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for n in 0..times.len() {
        for (from, to) in s.chain_at(n) {
            acc += p
                .cost(from, to, times[n], &path[n])
                .map_err(OracleError::eval("cost"))?;
        }
        running.push(acc);
    }
    Ok(CostProcess { running, total: acc })
}

pub(crate) fn driver_inputs_ok(p: &SwitchingProblem, frozen: Option<&LatticeValues>) -> Result<(), OracleError> {
    if p.drivers_depend_on_z() {
        return Err(OracleError::ZDependent);
    }
    if frozen.is_none() && p.drivers_depend_on_y() {
        return Err(OracleError::YDependentWithoutFrozen);
    }
    Ok(())
}

pub(crate) fn check_frozen_shape(lat: &LatticeModel, m: usize, frozen: &LatticeValues) -> Result<(), OracleError> {
    let ok = frozen.values.len() == m
        && frozen.values.iter().all(|mode| {
            mode.len() == lat.steps + 1 && mode.iter().zip(&lat.layers).all(|(v, l)| v.len() == l.states.len())
        });
    if ok {
        Ok(())
    } else {
        Err(OracleError::InvalidArgument(
            "frozen values do not match the lattice".into(),
        ))
    }
}

/// Value of `s` at the root: expected aggregated running payoff plus
/// terminal payoff, minus switching costs, computed backward on the lattice.
pub fn evaluate_strategy(
    s: &Strategy,
    p: &SwitchingProblem,
    lat: &LatticeModel,
    frozen: Option<&LatticeValues>,
) -> Result<f64, OracleError> {
    driver_inputs_ok(p, frozen)?;
    if let Some(fr) = frozen {
        check_frozen_shape(lat, p.mode_count, fr)?;
    }
    s.validate(p.mode_count, lat.steps)?;
    let schedule = s.schedule(lat.steps);
    let chains: Vec<Vec<(usize, usize)>> = (0..lat.steps).map(|n| s.chain_at(n)).collect();
    evaluate_schedule(p, lat, frozen, &schedule, &chains)
}

fn evaluate_schedule(
    p: &SwitchingProblem,
    lat: &LatticeModel,
    frozen: Option<&LatticeValues>,
    schedule: &[usize],
    chains: &[Vec<(usize, usize)>],
) -> Result<f64, OracleError> {
    let m = p.mode_count;
    let z = vec![0.0; p.brownian_dim];
    let mut y = vec![0.0; m];
    let last = &lat.layers[lat.steps];
    let mut next: Vec<f64> = last
        .states
        .iter()
        .map(|&x| {
            p.terminal(schedule[lat.steps], &[x])
                .map_err(OracleError::eval("terminal"))
        })
        .collect::<Result<_, _>>()?;
    for n in (0..lat.steps).rev() {
        let layer = &lat.layers[n];
        let mode = schedule[n];
        let mut current = Vec::with_capacity(layer.states.len());
        for (idx, (&x, tr)) in layer.states.iter().zip(&layer.transitions).enumerate() {
            if let Some(fr) = frozen {
                for (j, yj) in y.iter_mut().enumerate() {
                    *yj = fr.values[j][n][idx];
                }
            }
            let f = p
                .driver(mode, layer.t, &[x], &y, &z)
                .map_err(OracleError::eval("driver"))?;
            let mut v = continuation(tr, &next, f, lat.dt);
            for &(from, to) in chains[n].iter().rev() {
                v -= p.cost(from, to, layer.t, &[x]).map_err(OracleError::eval("cost"))?;
            }
            current.push(v);
        }
        next = current;
    }
    Ok(next[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumeration {
    pub value: f64,
    pub best: Strategy,
    pub evaluated: usize,
}

/// Largest number of strategies [`enumerate_strategies`] will evaluate.
pub const MAX_STRATEGIES: u128 = 2_000_000;

/// Switch chains available at one time index from `mode`: sequences of
/// distinct modes not revisiting `mode`, in lexicographic order with the
/// empty chain first.
fn chains_from(mode: usize, m: usize, budget: usize) -> Vec<Vec<usize>> {
    fn extend(path: &mut Vec<usize>, visited: &mut Vec<bool>, m: usize, budget: usize, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        if path.len() == budget {
            return;
        }
        for j in 0..m {
            if !visited[j] {
                visited[j] = true;
                path.push(j);
                extend(path, visited, m, budget, out);
                path.pop();
                visited[j] = false;
            }
        }
    }
    let mut visited = vec![false; m];
    visited[mode] = true;
    let mut out = Vec::new();
    extend(&mut Vec::new(), &mut visited, m, budget, &mut out);
    out
}

/// Number of strategies from `mode` at time index `n`, memoized on
/// `(n, mode, budget)` and saturating.
fn count_strategies(mode: usize, n: usize, steps: usize, m: usize, budget: usize) -> u128 {
    fn rec(
        mode: usize,
        n: usize,
        steps: usize,
        m: usize,
        budget: usize,
        memo: &mut std::collections::HashMap<(usize, usize, usize), u128>,
    ) -> u128 {
        if n == steps {
            return 1;
        }
        if let Some(&c) = memo.get(&(n, mode, budget)) {
            return c;
        }
        let mut total: u128 = 0;
        for c in chains_from(mode, m, budget) {
            let sub = rec(*c.last().unwrap_or(&mode), n + 1, steps, m, budget - c.len(), memo);
            total = total.saturating_add(sub);
        }
        memo.insert((n, mode, budget), total);
        total
    }
    rec(mode, n, steps, m, budget, &mut std::collections::HashMap::new())
}

/// Maximizes [`evaluate_strategy`] over all deterministic-time strategies
/// starting in `i0` with at most `max_switches` switches. Ties keep the
/// first strategy in depth-first lexicographic order (no switch first,
/// then lower modes).
pub fn enumerate_strategies(
    p: &SwitchingProblem,
    lat: &LatticeModel,
    i0: usize,
    max_switches: usize,
    frozen: Option<&LatticeValues>,
) -> Result<Enumeration, OracleError> {
    driver_inputs_ok(p, frozen)?;
    if let Some(fr) = frozen {
        check_frozen_shape(lat, p.mode_count, fr)?;
    }
    let m = p.mode_count;
    if i0 >= m {
        return Err(OracleError::InvalidArgument(format!(
            "initial mode {} out of range",
            i0 + 1
        )));
    }
    let count = count_strategies(i0, 0, lat.steps, m, max_switches);
    if count > MAX_STRATEGIES {
        return Err(OracleError::GuardExceeded {
            count,
            limit: MAX_STRATEGIES,
        });
    }

    /// Switch chain at every time index.
    type Chains = Vec<Vec<(usize, usize)>>;

    struct Search<'a> {
        p: &'a SwitchingProblem,
        lat: &'a LatticeModel,
        frozen: Option<&'a LatticeValues>,
        m: usize,
        schedule: Vec<usize>,
        chains: Chains,
        best: Option<(f64, Chains)>,
        evaluated: usize,
    }

    impl Search<'_> {
        fn run(&mut self, n: usize, mode: usize, budget: usize) -> Result<(), OracleError> {
            if n == self.lat.steps {
                self.schedule[n] = mode;
                let v = evaluate_schedule(self.p, self.lat, self.frozen, &self.schedule, &self.chains)?;
                self.evaluated += 1;
                if self.best.as_ref().is_none_or(|(b, _)| v > *b) {
                    self.best = Some((v, self.chains.clone()));
                }
                return Ok(());
            }
            for chain in chains_from(mode, self.m, budget) {
                let mut from = mode;
                self.chains[n] = chain
                    .iter()
                    .map(|&to| {
                        let pair = (from, to);
                        from = to;
                        pair
                    })
                    .collect();
                self.schedule[n] = from;
                self.run(n + 1, from, budget - chain.len())?;
            }
            self.chains[n].clear();
            Ok(())
        }
    }

    let mut search = Search {
        p,
        lat,
        frozen,
        m,
        schedule: vec![i0; lat.steps + 1],
        chains: vec![Vec::new(); lat.steps],
        best: None,
        evaluated: 0,
    };
    search.run(0, i0, max_switches)?;
    let (value, chains) = search.best.expect("at least the no-switch strategy is evaluated");
    let switches = chains
        .iter()
        .enumerate()
        .flat_map(|(n, c)| c.iter().map(move |&(_, to)| (n, to)))
        .collect();
    Ok(Enumeration {
        value,
        best: Strategy {
            initial_mode: i0,
            switches,
        },
        evaluated: search.evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_order() {
        assert_eq!(
            chains_from(0, 3, 5),
            vec![vec![], vec![1], vec![1, 2], vec![2], vec![2, 1]]
        );
        assert_eq!(chains_from(1, 3, 1), vec![vec![], vec![0], vec![2]]);
        assert_eq!(count_strategies(0, 0, 2, 2, 10), 4);
    }

    #[test]
    fn schedule_and_validation() {
        let s = Strategy {
            initial_mode: 0,
            switches: vec![(0, 1), (0, 2), (3, 0)],
        };
        assert_eq!(s.schedule(4), vec![2, 2, 2, 0, 0]);
        assert_eq!(s.chain_at(0), vec![(0, 1), (1, 2)]);
        assert!(s.validate(3, 4).is_ok());
        assert!(s.validate(3, 3).is_err());
        let bad = Strategy {
            initial_mode: 0,
            switches: vec![(1, 1), (0, 0)],
        };
        assert!(bad.validate(2, 4).is_err());
    }
}
