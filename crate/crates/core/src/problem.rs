//! Problem data model and the problem-file reader.
//!
//! A problem file is a sequence of `key = value` lines grouped under the
//! sections `[problem]`, `[drift]`, `[diffusion]`, `[drivers]`, `[costs]`,
//! `[terminals]` and `[constants]`. Expression values may be quoted.
//!
//! ```text
//! [problem]
//! k = 1
//! d = 1
//! m = 2
//! T = 1
//! box = "-4:4"
//!
//! [drift]
//! b1 = "0"
//!
//! [diffusion]
//! sigma11 = "1"
//!
//! [drivers]
//! f1 = "1"
//! f2 = "-1"
//!
//! [costs]
//! g11 = "0"
//! g12 = "0.5"
//! g21 = "0.5"
//! g22 = "0"
//!
//! [terminals]
//! h1 = "0"
//! h2 = "0"
//!
//! [constants]
//! C = 0
//! p = 1
//! ```
//!
//! Two-index keys (`sigmaIJ`, `gIJ`) may separate the indices with `_`,
//! which is required once an index exceeds 9.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::{Env, EvalError, Expr, ParseError, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: {source}")]
    Expression {
        line: usize,
        column: usize,
        source: ParseError,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("missing field: {0}")]
    Missing(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

/// Axis-aligned box `[lo, hi]` per state coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        DomainBox { bounds }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        DomainBox {
            bounds: vec![(lo, hi); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Parses `lo:hi[,lo:hi]`.
    pub fn parse(text: &str) -> Result<DomainBox, String> {
        let bounds = text
            .split(',')
            .map(|part| {
                let (lo, hi) = part
                    .split_once(':')
                    .ok_or_else(|| format!("expected lo:hi, got '{part}'"))?;
                let lo: f64 = lo.trim().parse().map_err(|_| format!("bad bound '{lo}'"))?;
                let hi: f64 = hi.trim().parse().map_err(|_| format!("bad bound '{hi}'"))?;
                if !(lo < hi) {
                    return Err(format!("empty interval {lo}:{hi}"));
                }
                Ok((lo, hi))
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(DomainBox { bounds })
    }
}

impl fmt::Display for DomainBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{lo:?}:{hi:?}")?;
        }
        Ok(())
    }
}

/// Full datum of a switching problem: the state SDE, the per-mode drivers,
/// switching costs and terminal payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingProblem {
    /// Spatial dimension `k`.
    pub state_dim: usize,
    /// Brownian dimension `d`.
    pub brownian_dim: usize,
    pub mode_count: usize,
    pub horizon: f64,
    /// `b(t, x)`, one expression per state coordinate.
    pub drift: Vec<Expr>,
    /// `sigma(t, x)`, `k` rows of `d` expressions.
    pub diffusion: Vec<Vec<Expr>>,
    /// `f_i(t, x, y, z)`.
    pub drivers: Vec<Expr>,
    /// `g_ij(t, x)`, `m` rows of `m` expressions.
    pub costs: Vec<Vec<Expr>>,
    /// `h_i(x)`.
    pub terminals: Vec<Expr>,
    /// Declared common Lipschitz constant of the drivers in `(y, z)`.
    pub lipschitz_const: f64,
    pub growth_exponent: u32,
    /// Domain box declared in the file, if any.
    pub domain: Option<DomainBox>,
}

impl SwitchingProblem {
    pub fn parse(text: &str) -> Result<SwitchingProblem, ProblemError> {
        parse_problem(text)
    }

    pub fn drift_at(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let env = Env::new(t, x, &[], &[]);
        for (o, e) in out.iter_mut().zip(&self.drift) {
            *o = e.eval(&env)?;
        }
        Ok(())
    }

    /// Writes `sigma(t, x)` row-major (`k * d` entries).
    pub fn diffusion_at(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let env = Env::new(t, x, &[], &[]);
        let d = self.brownian_dim;
        for (r, row) in self.diffusion.iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                out[r * d + c] = e.eval(&env)?;
            }
        }
        Ok(())
    }

    pub fn driver(&self, mode: usize, t: f64, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64, EvalError> {
        self.drivers[mode].eval(&Env::new(t, x, y, z))
    }

    pub fn cost(&self, from: usize, to: usize, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        self.costs[from][to].eval(&Env::new(t, x, &[], &[]))
    }

    pub fn terminal(&self, mode: usize, x: &[f64]) -> Result<f64, EvalError> {
        self.terminals[mode].eval(&Env {
            t: None,
            x,
            y: &[],
            z: &[],
        })
    }

    pub fn drivers_depend_on_y(&self) -> bool {
        self.drivers.iter().any(Expr::mentions_y)
    }

    pub fn drivers_depend_on_z(&self) -> bool {
        self.drivers.iter().any(Expr::mentions_z)
    }

    /// True when no coefficient depends on the state `x`.
    pub fn is_state_independent(&self) -> bool {
        self.drift
            .iter()
            .chain(self.diffusion.iter().flatten())
            .chain(&self.drivers)
            .chain(self.costs.iter().flatten())
            .chain(&self.terminals)
            .all(|e| !e.mentions_x())
    }

    /// Domain box, falling back to `[-5, 5]^k`.
    pub fn domain_or_default(&self) -> DomainBox {
        self.domain
            .clone()
            .unwrap_or_else(|| DomainBox::cube(self.state_dim, -5.0, 5.0))
    }
}

impl fmt::Display for SwitchingProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (k, d, m) = (self.state_dim, self.brownian_dim, self.mode_count);
        writeln!(f, "[problem]")?;
        writeln!(f, "k = {k}")?;
        writeln!(f, "d = {d}")?;
        writeln!(f, "m = {m}")?;
        writeln!(f, "T = {:?}", self.horizon)?;
        if let Some(b) = &self.domain {
            writeln!(f, "box = \"{b}\"")?;
        }
        writeln!(f, "\n[drift]")?;
        for (i, e) in self.drift.iter().enumerate() {
            writeln!(f, "b{} = \"{e}\"", i + 1)?;
        }
        writeln!(f, "\n[diffusion]")?;
        for (r, row) in self.diffusion.iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                writeln!(f, "sigma{}_{} = \"{e}\"", r + 1, c + 1)?;
            }
        }
        writeln!(f, "\n[drivers]")?;
        for (i, e) in self.drivers.iter().enumerate() {
            writeln!(f, "f{} = \"{e}\"", i + 1)?;
        }
        writeln!(f, "\n[costs]")?;
        for (i, row) in self.costs.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                writeln!(f, "g{}_{} = \"{e}\"", i + 1, j + 1)?;
            }
        }
        writeln!(f, "\n[terminals]")?;
        for (i, e) in self.terminals.iter().enumerate() {
            writeln!(f, "h{} = \"{e}\"", i + 1)?;
        }
        writeln!(f, "\n[constants]")?;
        writeln!(f, "C = {:?}", self.lipschitz_const)?;
        writeln!(f, "p = {}", self.growth_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Problem,
    Drift,
    Diffusion,
    Drivers,
    Costs,
    Terminals,
    Constants,
}

impl Section {
    fn from_name(name: &str) -> Option<Section> {
        Some(match name {
            "problem" => Section::Problem,
            "drift" => Section::Drift,
            "diffusion" => Section::Diffusion,
            "drivers" => Section::Drivers,
            "costs" => Section::Costs,
            "terminals" => Section::Terminals,
            "constants" => Section::Constants,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    /// Column of the first character of `value`.
    column: usize,
}

/// Reads a problem file. See the module docs for the format.
pub fn parse_problem(text: &str) -> Result<SwitchingProblem, ProblemError> {
    let mut entries: BTreeMap<(Section, String), Entry> = BTreeMap::new();
    let mut section: Option<Section> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ProblemError::Syntax {
                line: line_no,
                column: indent + 1,
                message: "unterminated section header".into(),
            })?;
            section = Some(Section::from_name(name.trim()).ok_or_else(|| ProblemError::Syntax {
                line: line_no,
                column: indent + 2,
                message: format!("unknown section '{}'", name.trim()),
            })?);
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ProblemError::Syntax {
                line: line_no,
                column: indent + 1,
                message: "expected 'key = value'".into(),
            });
        };
        let sec = section.ok_or_else(|| ProblemError::Syntax {
            line: line_no,
            column: indent + 1,
            message: "entry before any section header".into(),
        })?;
        let key = line[..eq].trim().to_string();
        if key.is_empty() {
            return Err(ProblemError::Syntax {
                line: line_no,
                column: eq + 1,
                message: "empty key".into(),
            });
        }
        let after = &line[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let mut value = after.trim().to_string();
        let mut column = eq + 2 + lead;
        if let Some(inner) = value.strip_prefix('"') {
            let inner = inner.strip_suffix('"').ok_or_else(|| ProblemError::Syntax {
                line: line_no,
                column,
                message: "unterminated string".into(),
            })?;
            value = inner.to_string();
            column += 1;
        }
        if value.is_empty() {
            return Err(ProblemError::Syntax {
                line: line_no,
                column,
                message: format!("empty value for '{key}'"),
            });
        }
        let entry = Entry {
            value,
            line: line_no,
            column,
        };
        if entries.insert((sec, key.clone()), entry).is_some() {
            return Err(ProblemError::Syntax {
                line: line_no,
                column: indent + 1,
                message: format!("duplicate key '{key}'"),
            });
        }
    }

    Builder { entries }.build()
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

struct Builder {
    entries: BTreeMap<(Section, String), Entry>,
}

/// Which variables an expression kind may reference.
#[derive(Clone, Copy)]
struct Scope {
    t: bool,
    k: usize,
    m: usize,
    d: usize,
}

impl Builder {
    fn take(&mut self, sec: Section, key: &str) -> Option<Entry> {
        self.entries.remove(&(sec, key.to_string()))
    }

    fn require(&mut self, sec: Section, key: &str, what: &str) -> Result<Entry, ProblemError> {
        self.take(sec, key)
            .ok_or_else(|| ProblemError::Missing(what.to_string()))
    }

    fn integer(&mut self, key: &str, what: &str) -> Result<Option<usize>, ProblemError> {
        let Some(e) = self.take(Section::Problem, key) else {
            return Ok(None);
        };
        let v: usize = e.value.trim().parse().map_err(|_| ProblemError::Syntax {
            line: e.line,
            column: e.column,
            message: format!("{what} must be a positive integer, got '{}'", e.value),
        })?;
        if v == 0 {
            return Err(ProblemError::Invalid(format!("{what} must be at least 1")));
        }
        Ok(Some(v))
    }

    fn number(e: &Entry, what: &str) -> Result<f64, ProblemError> {
        e.value.trim().parse().map_err(|_| ProblemError::Syntax {
            line: e.line,
            column: e.column,
            message: format!("{what} must be a number, got '{}'", e.value),
        })
    }

    fn expression(e: &Entry, key: &str, scope: Scope) -> Result<Expr, ProblemError> {
        let expr = Expr::parse(&e.value).map_err(|source| ProblemError::Expression {
            line: e.line,
            column: e.column + source.column() - 1,
            source,
        })?;
        for var in expr.variables() {
            let ok = match var {
                Var::T => scope.t,
                Var::X(i) => i < scope.k,
                Var::Y(i) => i < scope.m,
                Var::Z(i) => i < scope.d,
            };
            if !ok {
                return Err(ProblemError::Dimension(format!(
                    "'{key}' (line {}) references {var}, which is not available (k={}, m={}, d={})",
                    e.line, scope.k, scope.m, scope.d
                )));
            }
        }
        Ok(expr)
    }

    /// Two-index key lookup accepting `nameIJ` and `nameI_J`.
    fn take_pair(&mut self, sec: Section, name: &str, i: usize, j: usize) -> Option<(String, Entry)> {
        let mut keys = vec![format!("{name}{}_{}", i + 1, j + 1)];
        if i < 9 && j < 9 {
            keys.push(format!("{name}{}{}", i + 1, j + 1));
        }
        keys.into_iter().find_map(|k| self.take(sec, &k).map(|e| (k, e)))
    }

    fn build(mut self) -> Result<SwitchingProblem, ProblemError> {
        let k = self
            .integer("k", "k")?
            .ok_or_else(|| ProblemError::Missing("[problem] k".into()))?;
        let m = self
            .integer("m", "m")?
            .ok_or_else(|| ProblemError::Missing("[problem] m".into()))?;
        let d = self.integer("d", "d")?.unwrap_or(k);
        let horizon_entry = self.require(Section::Problem, "T", "[problem] T")?;
        let horizon = Self::number(&horizon_entry, "T")?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(ProblemError::Invalid(format!(
                "horizon T must be positive, got {horizon}"
            )));
        }
        let domain = match self.take(Section::Problem, "box") {
            Some(e) => {
                let b = DomainBox::parse(&e.value).map_err(|message| ProblemError::Syntax {
                    line: e.line,
                    column: e.column,
                    message,
                })?;
                if b.dim() != k {
                    return Err(ProblemError::Dimension(format!(
                        "box has {} intervals but k = {k}",
                        b.dim()
                    )));
                }
                Some(b)
            }
            None => None,
        };

        let coeff = Scope { t: true, k, m: 0, d: 0 };
        let driver_scope = Scope { t: true, k, m, d };
        let terminal_scope = Scope {
            t: false,
            k,
            m: 0,
            d: 0,
        };

        let drift = (0..k)
            .map(|i| {
                let key = format!("b{}", i + 1);
                let e = self.require(Section::Drift, &key, &format!("[drift] {key}"))?;
                Self::expression(&e, &key, coeff)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut diffusion = Vec::with_capacity(k);
        for r in 0..k {
            let mut row = Vec::with_capacity(d);
            for c in 0..d {
                let (key, e) = self.take_pair(Section::Diffusion, "sigma", r, c).ok_or_else(|| {
                    ProblemError::Dimension(format!(
                        "[diffusion] sigma{}_{} missing: sigma must be {k}x{d}",
                        r + 1,
                        c + 1
                    ))
                })?;
                row.push(Self::expression(&e, &key, coeff)?);
            }
            diffusion.push(row);
        }

        let drivers = (0..m)
            .map(|i| {
                let key = format!("f{}", i + 1);
                let e = self.require(Section::Drivers, &key, &format!("[drivers] {key}"))?;
                Self::expression(&e, &key, driver_scope)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let costs_present = self.entries.keys().any(|(s, _)| *s == Section::Costs);
        let mut costs = Vec::with_capacity(m);
        for i in 0..m {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                let expr = match self.take_pair(Section::Costs, "g", i, j) {
                    Some((key, e)) => Self::expression(&e, &key, coeff)?,
                    // a single mode has nothing to switch to
                    None if m == 1 && !costs_present => Expr::Num(0.0),
                    None if i == j => {
                        return Err(ProblemError::Missing(format!(
                            "[costs] g{}{} (diagonal entries must be written explicitly)",
                            i + 1,
                            j + 1
                        )))
                    }
                    None => {
                        return Err(ProblemError::Missing(format!(
                            "cost pair g{}{} (every ordered pair of modes needs a cost)",
                            i + 1,
                            j + 1
                        )))
                    }
                };
                row.push(expr);
            }
            costs.push(row);
        }

        let terminals = (0..m)
            .map(|i| {
                let key = format!("h{}", i + 1);
                let e = self.require(Section::Terminals, &key, &format!("[terminals] {key}"))?;
                Self::expression(&e, &key, terminal_scope)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let lipschitz_const = match self.take(Section::Constants, "C") {
            Some(e) => {
                let c = Self::number(&e, "C")?;
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(ProblemError::Invalid(format!("C must be nonnegative, got {c}")));
                }
                c
            }
            None => 0.0,
        };
        let growth_exponent = match self.take(Section::Constants, "p") {
            Some(e) => {
                let p: u32 = e.value.trim().parse().map_err(|_| ProblemError::Syntax {
                    line: e.line,
                    column: e.column,
                    message: format!("p must be a positive integer, got '{}'", e.value),
                })?;
                if p == 0 {
                    return Err(ProblemError::Invalid("p must be at least 1".into()));
                }
                p
            }
            None => 1,
        };

        if let Some(((_, key), e)) = self.entries.iter().next() {
            return Err(ProblemError::Syntax {
                line: e.line,
                column: 1,
                message: format!("unexpected key '{key}' for k={k}, d={d}, m={m}"),
            });
        }

        Ok(SwitchingProblem {
            state_dim: k,
            brownian_dim: d,
            mode_count: m,
            horizon,
            drift,
            diffusion,
            drivers,
            costs,
            terminals,
            lipschitz_const,
            growth_exponent,
            domain,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
k = 1
m = 1
T = 1

[drift]
b1 = "0"

[diffusion]
sigma11 = "1"

[drivers]
f1 = "0"

[terminals]
h1 = "x1"
"#;

    #[test]
    fn minimal_file() {
        let p = parse_problem(MINIMAL).unwrap();
        assert_eq!(p.mode_count, 1);
        assert_eq!(p.state_dim, 1);
        assert_eq!(p.brownian_dim, 1);
        assert_eq!(p.horizon, 1.0);
        assert_eq!(p.driver(0, 0.3, &[2.0], &[5.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(p.terminal(0, &[2.5]).unwrap(), 2.5);
        assert_eq!(p.cost(0, 0, 0.0, &[0.0]).unwrap(), 0.0);
        assert_eq!(p.lipschitz_const, 0.0);
    }

    fn two_mode(extra_costs: &str, f1: &str) -> String {
        format!(
            r#"
[problem]
k = 1
d = 1
m = 2
T = 1
[drift]
b1 = "0"
[diffusion]
sigma11 = "1"
[drivers]
f1 = "{f1}"
f2 = "-1"
[costs]
{extra_costs}
[terminals]
h1 = "0"
h2 = "0"
"#
        )
    }

    #[test]
    fn missing_cost_pair() {
        let text = two_mode("g11 = \"0\"\ng22 = \"0\"\ng12 = 0.5", "1");
        match parse_problem(&text) {
            Err(ProblemError::Missing(msg)) => assert!(msg.contains("g21"), "{msg}"),
            other => panic!("expected missing g21, got {other:?}"),
        }
    }

    #[test]
    fn missing_diagonal_cost() {
        let text = two_mode("g12 = 0.5\ng21 = 0.5\ng22 = 0", "1");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Missing(m)) if m.contains("g11")));
    }

    #[test]
    fn driver_with_y_and_z() {
        let text = two_mode("g11 = 0\ng12 = 0.5\ng21 = 0.5\ng22 = 0", "y2 - y1 + z1");
        let p = parse_problem(&text).unwrap();
        assert!(p.drivers_depend_on_y() && p.drivers_depend_on_z());
        assert_eq!(p.driver(0, 0.0, &[0.0], &[1.0, 3.0], &[0.5]).unwrap(), 2.5);
    }

    #[test]
    fn dimension_errors() {
        let text = MINIMAL.replace("f1 = \"0\"", "f1 = \"z2\"");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Dimension(_))));
        let text = MINIMAL.replace("h1 = \"x1\"", "h1 = \"x1 + t\"");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Dimension(_))));
        let text = MINIMAL.replace("sigma11", "sigma12");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Dimension(_))));
        let text = MINIMAL.replace("k = 1", "k = 1\nd = 2");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Dimension(_))));
    }

    #[test]
    fn syntax_error_location() {
        let text = MINIMAL.replace("f1 = \"0\"", "f1 = \"1 + * 2\"");
        match parse_problem(&text) {
            Err(ProblemError::Expression { line, column, .. }) => {
                assert_eq!(line, 14);
                assert_eq!(column, 11);
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("[drift]", "[drfit]");
        assert!(matches!(
            parse_problem(&text),
            Err(ProblemError::Syntax { line: 7, .. })
        ));
        let text = MINIMAL.replace("b1 = \"0\"", "b1 \"0\"");
        assert!(matches!(
            parse_problem(&text),
            Err(ProblemError::Syntax { line: 8, .. })
        ));
    }

    #[test]
    fn missing_mandatory() {
        let text = MINIMAL.replace("T = 1", "");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Missing(_))));
        let text = MINIMAL.replace("h1 = \"x1\"", "");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Missing(_))));
    }

    #[test]
    fn comments_and_unexpected_keys() {
        let text = MINIMAL.replace("b1 = \"0\"", "b1 = \"0\" # no drift\n# whole line");
        assert!(parse_problem(&text).is_ok());
        let text = MINIMAL.replace("b1 = \"0\"", "b1 = \"0\"\nb2 = \"1\"");
        assert!(matches!(parse_problem(&text), Err(ProblemError::Syntax { .. })));
    }

    #[test]
    fn display_round_trips() {
        let text = two_mode("g11 = 0\ng12 = 0.5\ng21 = \"0.5 + t\"\ng22 = 0", "max(y2, 0) * x1");
        let text = text.replace("T = 1", "T = 1\nbox = \"-3:3\"");
        let p = parse_problem(&text).unwrap();
        let again = parse_problem(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }
}
