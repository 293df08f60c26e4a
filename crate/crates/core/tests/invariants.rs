mod common;

use common::Spec;
use oblique::oracle::{build_lattice, lattice_dp, LatticeOptions};
use oblique::validate::{check_non_free_loop, check_terminal_consistency, estimate_lipschitz, ProbeBox};
use proptest::prelude::*;

fn costs_strategy(m: usize, lo: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..3.0, m * m)
}

fn with_costs(m: usize, costs: &[f64], terminals: &[String]) -> Spec<'static> {
    let drivers = vec!["0"; m];
    let terms: Vec<&str> = terminals.iter().map(String::as_str).collect();
    let mut spec = Spec::new(&drivers, &terms);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                spec.costs[i][j] = format!("{} + 0.1*sin(x1)^2", costs[i * m + j]);
            }
        }
    }
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn positive_costs_never_loop(m in 2usize..5, costs in costs_strategy(4, 0.05), xs in proptest::collection::vec(-3.0f64..3.0, 1..6)) {
        let spec = with_costs(m, &costs, &vec!["0".to_string(); m]);
        let samples: Vec<(f64, Vec<f64>)> = xs.iter().enumerate().map(|(n, &x)| (n as f64 * 0.2, vec![x])).collect();
        let report = check_non_free_loop(&spec.build(), &samples).unwrap();
        prop_assert!(report.passed);
    }

    #[test]
    fn terminal_check_ignores_common_shift(m in 2usize..4, costs in costs_strategy(3, 0.0), hs in proptest::collection::vec(-2.0f64..2.0, 3), shift in -5.0f64..5.0) {
        let base: Vec<String> = (0..m).map(|i| format!("{} * x1", hs[i])).collect();
        let moved: Vec<String> = (0..m).map(|i| format!("{} * x1 + {shift}", hs[i])).collect();
        let samples: Vec<Vec<f64>> = (-4..=4).map(|i| vec![i as f64 * 0.5]).collect();
        let a = check_terminal_consistency(&with_costs(m, &costs, &base).build(), &samples).unwrap();
        let b = check_terminal_consistency(&with_costs(m, &costs, &moved).build(), &samples).unwrap();
        prop_assert_eq!(a.passed, b.passed);
        prop_assert_eq!(a.violations.len(), b.violations.len());
    }

    #[test]
    fn lipschitz_estimate_is_a_lower_bound(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let driver = format!("{a}*y1 + {b}*z1 + x1");
        let p = Spec::new(&[driver.as_str()], &["0"]).build();
        let est = estimate_lipschitz(&p, &ProbeBox::unit(&p), 64, seed);
        prop_assert!(est <= a.abs().max(b.abs()).max((a * a + b * b).sqrt()) + 1e-12);
    }

    #[test]
    fn dp_shifts_with_terminals(c in -3.0f64..3.0, g in 0.05f64..1.0) {
        let base = Spec::new(&["1", "x1"], &["x1", "0.5*x1"]).uniform_cost(&g.to_string());
        let moved = Spec::new(&["1", "x1"], &[&format!("x1 + {c}"), &format!("0.5*x1 + {c}")]).uniform_cost(&g.to_string());
        let p = base.build();
        let lat = build_lattice(&p, 0.0, 0.2, 6, &LatticeOptions::default()).unwrap();
        let a = lattice_dp(&p, &lat, None).unwrap().root();
        let b = lattice_dp(&moved.build(), &lat, None).unwrap().root();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((v - u - c).abs() < 1e-12);
        }
    }
}
