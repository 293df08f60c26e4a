//! Resolution of the interconnected obstacles at a single point.
//!
//! Given continuation values `c_i`, finds the smallest `y` with
//! `y_i = max(c_i, max_{j != i}(y_j - g_ij))` by Gauss-Seidel sweeps in
//! increasing mode order. Shared by the finite-difference scheme, the
//! lattice dynamic program and the regression Monte Carlo solver.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("obstacle sweeps did not stabilize within {sweeps} sweeps (last change {last_change:e})")]
pub struct SweepCapExceeded {
    pub sweeps: usize,
    pub last_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub values: Vec<f64>,
    /// Mode whose obstacle binds for each mode, `None` where `y_i = c_i`.
    pub active: Vec<Option<usize>>,
    /// Sweeps performed, including the final sweep that changed nothing.
    pub sweeps: usize,
}

/// `costs` is the row-major `m x m` cost matrix at the point. A component
/// counts as changed when it moves by more than `tolerance`; pass `0.0` to
/// iterate until the sweep is bit-for-bit stationary.
pub fn resolve(
    continuation: &[f64],
    costs: &[f64],
    tolerance: f64,
    max_sweeps: usize,
) -> Result<Resolution, SweepCapExceeded> {
    let m = continuation.len();
    let mut y = continuation.to_vec();
    let mut last_change = 0.0;
    for sweep in 1..=max_sweeps {
        let mut changed = false;
        last_change = 0.0f64;
        for i in 0..m {
            let mut best = continuation[i];
            for j in (0..m).filter(|&j| j != i) {
                let candidate = y[j] - costs[i * m + j];
                if candidate > best {
                    best = candidate;
                }
            }
            let delta = (best - y[i]).abs();
            if delta > tolerance {
                changed = true;
            }
            last_change = last_change.max(delta);
            y[i] = best;
        }
        if !changed {
            let active = binding_modes(continuation, &y, costs);
            return Ok(Resolution {
                values: y,
                active,
                sweeps: sweep,
            });
        }
    }
    Err(SweepCapExceeded {
        sweeps: max_sweeps,
        last_change,
    })
}

/// For each mode with `y_i > c_i`, the lowest-index `j` maximizing
/// `y_j - g_ij`.
pub fn binding_modes(continuation: &[f64], y: &[f64], costs: &[f64]) -> Vec<Option<usize>> {
    let m = y.len();
    (0..m)
        .map(|i| {
            if y[i] <= continuation[i] {
                return None;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in (0..m).filter(|&j| j != i) {
                let v = y[j] - costs[i * m + j];
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            best.map(|(j, _)| j)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_is_untouched() {
        let r = resolve(&[3.0], &[0.0], 1e-9, 5).unwrap();
        assert_eq!(r.values, vec![3.0]);
        assert_eq!(r.active, vec![None]);
        assert_eq!(r.sweeps, 1);
    }

    #[test]
    fn two_mode_switch() {
        let r = resolve(&[1.0, -1.0], &[0.0, 0.5, 0.5, 0.0], 0.0, 10).unwrap();
        assert_eq!(r.values, vec![1.0, 0.5]);
        assert_eq!(r.active, vec![None, Some(0)]);
    }

    #[test]
    fn chain_through_cheaper_route() {
        // 1 -> 3 directly costs 5, via 2 costs 1 + 1
        let g = [0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        let r = resolve(&[0.0, 0.0, 10.0], &g, 0.0, 10).unwrap();
        assert_eq!(r.values, vec![8.0, 9.0, 10.0]);
        assert_eq!(r.active, vec![Some(1), Some(2), None]);
        assert!(r.sweeps <= 3);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let g = [0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let r = resolve(&[0.0, 5.0, 5.0], &g, 0.0, 10).unwrap();
        assert_eq!(r.active[0], Some(1));
    }

    #[test]
    fn free_loop_never_settles_when_costs_negative() {
        let g = [0.0, -1.0, -1.0, 0.0];
        assert!(resolve(&[0.0, 0.0], &g, 1e-9, 20).is_err());
    }

    proptest::proptest! {
        #[test]
        fn settles_within_mode_count_sweeps(
            m in 2usize..6,
            raw_costs in proptest::collection::vec(0.01f64..2.0, 36),
            cont in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let mut g = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        g[i * m + j] = raw_costs[i * 6 + j];
                    }
                }
            }
            let r = resolve(&cont[..m], &g, 1e-9, 64).unwrap();
            proptest::prop_assert!(r.sweeps <= m);
            for i in 0..m {
                proptest::prop_assert!(r.values[i] >= cont[i]);
                for j in (0..m).filter(|&j| j != i) {
                    proptest::prop_assert!(r.values[i] >= r.values[j] - g[i * m + j]);
                }
            }
        }
    }
}
