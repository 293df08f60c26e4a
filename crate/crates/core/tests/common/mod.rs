#![allow(dead_code)]

use oblique::{parse_problem, SwitchingProblem};

/// One-dimensional problem with `b = 0`, `sigma = 1` unless overridden.
pub struct Spec<'a> {
    pub drift: &'a str,
    pub sigma: &'a str,
    pub horizon: f64,
    pub drivers: Vec<String>,
    pub costs: Vec<Vec<String>>,
    pub terminals: Vec<String>,
    pub lipschitz: f64,
}

impl<'a> Spec<'a> {
    pub fn new(drivers: &[&str], terminals: &[&str]) -> Spec<'a> {
        let m = drivers.len();
        Spec {
            drift: "0",
            sigma: "1",
            horizon: 1.0,
            drivers: drivers.iter().map(|s| s.to_string()).collect(),
            costs: (0..m)
                .map(|i| (0..m).map(|j| if i == j { "0".into() } else { "1".into() }).collect())
                .collect(),
            terminals: terminals.iter().map(|s| s.to_string()).collect(),
            lipschitz: 0.0,
        }
    }

    pub fn uniform_cost(mut self, g: &str) -> Self {
        let m = self.drivers.len();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    self.costs[i][j] = g.to_string();
                }
            }
        }
        self
    }

    pub fn text(&self) -> String {
        let m = self.drivers.len();
        let mut s = format!(
            "[problem]\nk = 1\nd = 1\nm = {m}\nT = {}\n[drift]\nb1 = \"{}\"\n[diffusion]\nsigma11 = \"{}\"\n[drivers]\n",
            self.horizon, self.drift, self.sigma
        );
        for (i, f) in self.drivers.iter().enumerate() {
            s += &format!("f{} = \"{f}\"\n", i + 1);
        }
        s += "[costs]\n";
        for (i, row) in self.costs.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                s += &format!("g{}_{} = \"{g}\"\n", i + 1, j + 1);
            }
        }
        s += "[terminals]\n";
        for (i, h) in self.terminals.iter().enumerate() {
            s += &format!("h{} = \"{h}\"\n", i + 1);
        }
        s += &format!("[constants]\nC = {}\n", self.lipschitz);
        s
    }

    pub fn build(&self) -> SwitchingProblem {
        parse_problem(&self.text()).expect("test problem parses")
    }
}
