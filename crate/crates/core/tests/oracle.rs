mod common;

use common::Spec;
use oblique::oracle::{
    build_lattice, enumerate_strategies, euler_paths, evaluate_strategy, lattice_dp, lsmc_solve, switching_cost,
    LatticeOptions, LsmcOptions, Strategy,
};

fn two_mode(g: &str) -> oblique::SwitchingProblem {
    Spec::new(&["1", "-1"], &["0", "0"]).uniform_cost(g).build()
}

#[test]
fn strategy_values() {
    let p = two_mode("0.5");
    let lat = build_lattice(&p, 0.0, 0.0, 8, &LatticeOptions::default()).unwrap();
    assert_eq!(evaluate_strategy(&Strategy::stay(0), &p, &lat, None).unwrap(), 1.0);
    let to_two = Strategy {
        initial_mode: 0,
        switches: vec![(0, 1)],
    };
    assert_eq!(evaluate_strategy(&to_two, &p, &lat, None).unwrap(), -1.5);
    let to_one = Strategy {
        initial_mode: 1,
        switches: vec![(0, 0)],
    };
    assert_eq!(evaluate_strategy(&to_one, &p, &lat, None).unwrap(), 0.5);
}

#[test]
fn cost_process() {
    let mut spec = Spec::new(&["0", "0", "0"], &["0", "0", "0"]);
    spec.costs[0][1] = "0.5".into();
    spec.costs[1][2] = "0.7".into();
    let p = spec.build();
    let times = [0.0, 0.5, 1.0];
    let path = vec![vec![0.0], vec![0.1], vec![0.2]];
    let none = switching_cost(&Strategy::stay(0), &p, &times, &path).unwrap();
    assert_eq!(none.total, 0.0);
    let one = Strategy {
        initial_mode: 2,
        switches: vec![(1, 0)],
    };
    assert_eq!(switching_cost(&one, &p, &times, &path).unwrap().total, 1.0);
    let two = Strategy {
        initial_mode: 0,
        switches: vec![(0, 1), (1, 2)],
    };
    let c = switching_cost(&two, &p, &times, &path).unwrap();
    assert!((c.total - 1.2).abs() < 1e-15);
    assert_eq!(c.running, vec![0.5, 1.2, 1.2]);
    let at_horizon = Strategy {
        initial_mode: 0,
        switches: vec![(2, 1)],
    };
    assert!(switching_cost(&at_horizon, &p, &times, &path).is_err());
}

#[test]
fn enumeration_examples() {
    let p = two_mode("0.5");
    let lat = build_lattice(&p, 0.0, 0.0, 5, &LatticeOptions::default()).unwrap();
    let e1 = enumerate_strategies(&p, &lat, 0, 10, None).unwrap();
    assert_eq!(e1.value, 1.0);
    assert_eq!(e1.best, Strategy::stay(0));
    let e2 = enumerate_strategies(&p, &lat, 1, 10, None).unwrap();
    assert_eq!(e2.value, 0.5);
    assert_eq!(e2.best.switches, vec![(0, 0)]);

    let dp = lattice_dp(&p, &lat, None).unwrap();
    assert_eq!(dp.root(), vec![1.0, 0.5]);
    assert_eq!(dp.active[1][0][0], Some(0));

    let p = two_mode("2");
    let lat = build_lattice(&p, 0.0, 0.0, 5, &LatticeOptions::default()).unwrap();
    let e = enumerate_strategies(&p, &lat, 1, 10, None).unwrap();
    assert_eq!(e.value, -1.0);
    assert_eq!(e.best, Strategy::stay(1));
}

#[test]
fn guard_and_driver_restrictions() {
    let p = Spec::new(&["0", "0", "0"], &["0", "0", "0"]).build();
    let lat = build_lattice(&p, 0.0, 0.0, 12, &LatticeOptions::default()).unwrap();
    assert_eq!(
        enumerate_strategies(&p, &lat, 0, 40, None).unwrap_err().code(),
        "enumeration_guard"
    );
    let z = Spec::new(&["z1"], &["x1"]).build();
    let lat = build_lattice(&z, 0.0, 0.0, 3, &LatticeOptions::default()).unwrap();
    assert_eq!(
        evaluate_strategy(&Strategy::stay(0), &z, &lat, None)
            .unwrap_err()
            .code(),
        "z_dependent_driver"
    );
    let y = Spec::new(&["y1"], &["x1"]).build();
    assert_eq!(
        evaluate_strategy(&Strategy::stay(0), &y, &lat, None)
            .unwrap_err()
            .code(),
        "y_dependent_driver"
    );
}

#[test]
fn lattice_martingale() {
    let p = Spec::new(&["0"], &["x1"]).build();
    let lat = build_lattice(&p, 0.0, 0.7, 30, &LatticeOptions::default()).unwrap();
    let dp = lattice_dp(&p, &lat, None).unwrap();
    assert!((dp.root()[0] - 0.7).abs() < 1e-12);
}

#[test]
fn state_dependent_dp_properties() {
    let spec = Spec::new(&["sin(x1)", "0.3 - x1"], &["abs(x1)", "abs(x1) + 0.1"]).uniform_cost("0.2 + 0.1*x1^2");
    let p = spec.build();
    let lat = build_lattice(&p, 0.0, 0.1, 12, &LatticeOptions::default()).unwrap();
    let dp = lattice_dp(&p, &lat, None).unwrap();
    for n in 0..=12 {
        for (idx, &x) in lat.layers[n].states.iter().enumerate() {
            for i in 0..2 {
                for j in (0..2).filter(|&j| j != i) {
                    let g = p.cost(i, j, lat.layers[n].t, &[x]).unwrap();
                    if n < 12 {
                        assert!(dp.values[i][n][idx] >= dp.values[j][n][idx] - g);
                    }
                }
            }
        }
    }
    // shifting every terminal shifts every value
    let shifted = Spec::new(&["sin(x1)", "0.3 - x1"], &["abs(x1) + 1.5", "abs(x1) + 1.6"])
        .uniform_cost("0.2 + 0.1*x1^2")
        .build();
    let ds = lattice_dp(&shifted, &lat, None).unwrap();
    for (a, b) in dp.root().iter().zip(ds.root()) {
        assert!((b - a - 1.5).abs() < 1e-12);
    }
    // raising costs never raises values
    let dearer = Spec::new(&["sin(x1)", "0.3 - x1"], &["abs(x1)", "abs(x1) + 0.1"])
        .uniform_cost("0.3 + 0.1*x1^2")
        .build();
    let dd = lattice_dp(&dearer, &lat, None).unwrap();
    for i in 0..2 {
        for n in 0..=12 {
            for (a, b) in dp.values[i][n].iter().zip(&dd.values[i][n]) {
                assert!(b <= a);
            }
        }
    }
}

#[test]
fn frozen_values_make_y_dependence_exact() {
    let spec = Spec::new(&["0.5*y2 + 1", "0.5*y1 - 1"], &["0", "0.2"]).uniform_cost("0.4");
    let p = spec.build();
    let lat = build_lattice(&p, 0.0, 0.0, 4, &LatticeOptions::default()).unwrap();
    let explicit = lattice_dp(&p, &lat, None).unwrap();
    let frozen = lattice_dp(&p, &lat, Some(&explicit)).unwrap();
    for i0 in 0..2 {
        let e = enumerate_strategies(&p, &lat, i0, 8, Some(&explicit)).unwrap();
        assert_eq!(e.value, frozen.root()[i0]);
    }
}

#[test]
fn euler_path_examples() {
    let still = Spec::new(&["0"], &["0"]);
    let mut still = still;
    still.sigma = "0";
    let b = euler_paths(&still.build(), 0.0, &[1.25], 10, 5, 3).unwrap();
    assert!(b.states.iter().all(|&x| x == 1.25));

    let mut ode = Spec::new(&["0"], &["0"]);
    ode.sigma = "0";
    ode.drift = "2";
    let b = euler_paths(&ode.build(), 0.0, &[0.5], 8, 3, 3).unwrap();
    for path in 0..3 {
        assert_eq!(b.states[[8, path, 0]], 2.5);
    }

    let p = Spec::new(&["0"], &["0"]).build();
    let m = 100_000;
    let b = euler_paths(&p, 0.0, &[0.0], 4, m, 11).unwrap();
    let finals: Vec<f64> = (0..m).map(|i| b.states[[4, i, 0]]).collect();
    let mean = finals.iter().sum::<f64>() / m as f64;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    assert!(mean.abs() < 3.0 / (m as f64).sqrt());
    assert!((var - 1.0).abs() < 0.05);

    let again = euler_paths(&p, 0.0, &[0.0], 4, 1000, 11).unwrap();
    let once = euler_paths(&p, 0.0, &[0.0], 4, 1000, 11).unwrap();
    assert_eq!(again, once);
    let text = once.to_text();
    assert!(text.starts_with("path,n,x1,dB1\n0,0,0,"));
}

#[test]
fn lsmc_martingale_and_switching() {
    let p = Spec::new(&["0"], &["x1"]).build();
    let paths = euler_paths(&p, 0.0, &[0.4], 10, 20_000, 5).unwrap();
    let r = lsmc_solve(&p, &paths, &LsmcOptions::default(), None).unwrap();
    assert!((r.values[0] - 0.4).abs() <= 3.0 * r.std_errors[0], "{:?}", r);

    let p = two_mode("0.5");
    let paths = euler_paths(&p, 0.0, &[0.0], 10, 5_000, 5).unwrap();
    let r = lsmc_solve(&p, &paths, &LsmcOptions::default(), None).unwrap();
    // constant data: every path carries the same value
    assert!((r.values[0] - 1.0).abs() < 1e-9);
    assert!((r.values[1] - 0.5).abs() < 1e-9);
    assert_eq!(r.std_errors, vec![1e-12, 1e-12]);
}

#[test]
fn lsmc_linear_driver_in_z() {
    let p = Spec::new(&["z1"], &["x1"]).build();
    let paths = euler_paths(&p, 0.0, &[0.0], 20, 50_000, 9).unwrap();
    let r = lsmc_solve(&p, &paths, &LsmcOptions::default(), None).unwrap();
    assert!((r.values[0] - 1.0).abs() <= 3.0 * r.std_errors[0], "{:?}", r);
}

#[test]
fn lsmc_standard_error_scaling() {
    let p = Spec::new(&["0"], &["max(x1, 0)"]).build();
    // enough replicates that the error estimates themselves are steady
    let opts = LsmcOptions {
        bootstrap: 100,
        ..LsmcOptions::default()
    };
    let small = lsmc_solve(&p, &euler_paths(&p, 0.0, &[0.0], 5, 5_000, 21).unwrap(), &opts, None).unwrap();
    let large = lsmc_solve(&p, &euler_paths(&p, 0.0, &[0.0], 5, 20_000, 22).unwrap(), &opts, None).unwrap();
    let ratio = large.std_errors[0] / small.std_errors[0];
    assert!((0.35..=0.7).contains(&ratio), "ratio {ratio}");
}
