//! Closed-form coefficient expressions.
//!
//! Expressions are small infix formulas over the variables `t`, `x1..xk`,
//! `y1..ym` and `z1..zd`. Precedence from tightest to loosest is
//! `^` (right associative), unary `-`, `* /`, `+ -`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character '{ch}' at column {column}")]
    UnexpectedChar { ch: char, column: usize },
    #[error("unexpected {found} at column {column}, expected {expected}")]
    UnexpectedToken {
        found: String,
        expected: &'static str,
        column: usize,
    },
    #[error("unknown identifier '{name}' at column {column}")]
    UnknownIdentifier { name: String, column: usize },
    #[error("function '{name}' takes {expected} argument(s), got {got} (column {column})")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
        column: usize,
    },
    #[error("invalid number '{text}' at column {column}")]
    BadNumber { text: String, column: usize },
}

impl ParseError {
    /// One-based column of the offending token.
    pub fn column(&self) -> usize {
        match self {
            ParseError::UnexpectedChar { column, .. }
            | ParseError::UnexpectedToken { column, .. }
            | ParseError::UnknownIdentifier { column, .. }
            | ParseError::Arity { column, .. }
            | ParseError::BadNumber { column, .. } => *column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(Var),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} of non-positive argument {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("non-finite result")]
    NonFinite,
}

/// A free variable. Indices are zero-based; they print one-based (`x1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X(usize),
    Y(usize),
    Z(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(i) => write!(f, "y{}", i + 1),
            Var::Z(i) => write!(f, "z{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Max,
    Min,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "max" => Func::Max,
            "min" => Func::Min,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Max => "max",
            Func::Min => "min",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Max | Func::Min => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variable values for one evaluation. Variables whose slice is too short
/// are unbound.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub t: Option<f64>,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
}

impl<'a> Env<'a> {
    pub fn new(t: f64, x: &'a [f64], y: &'a [f64], z: &'a [f64]) -> Self {
        Env { t: Some(t), x, y, z }
    }

    fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::T => self.t,
            Var::X(i) => self.x.get(i).copied(),
            Var::Y(i) => self.y.get(i).copied(),
            Var::Z(i) => self.z.get(i).copied(),
        }
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        match parser.peek() {
            Token::End => Ok(expr),
            other => Err(ParseError::UnexpectedToken {
                found: other.describe(),
                expected: "end of expression",
                column: parser.column(),
            }),
        }
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        let v = self.eval_inner(env)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluates with a name-keyed binding map (`"t"`, `"x1"`, ...).
    pub fn eval_map(&self, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
        let vars = self.variables();
        let mut max_idx = [0usize; 3];
        for var in &vars {
            match *var {
                Var::X(i) => max_idx[0] = max_idx[0].max(i + 1),
                Var::Y(i) => max_idx[1] = max_idx[1].max(i + 1),
                Var::Z(i) => max_idx[2] = max_idx[2].max(i + 1),
                Var::T => {}
            }
        }
        // unreferenced gaps are filled with NaN; they are never read
        let collect = |make: fn(usize) -> Var, n: usize| -> Result<Vec<f64>, EvalError> {
            (0..n)
                .map(|i| {
                    let var = make(i);
                    match bindings.get(&var.to_string()) {
                        Some(v) => Ok(*v),
                        None if vars.contains(&var) => Err(EvalError::Unbound(var)),
                        None => Ok(f64::NAN),
                    }
                })
                .collect()
        };
        let x = collect(Var::X, max_idx[0])?;
        let y = collect(Var::Y, max_idx[1])?;
        let z = collect(Var::Z, max_idx[2])?;
        let env = Env {
            t: bindings.get("t").copied(),
            x: &x,
            y: &y,
            z: &z,
        };
        self.eval(&env)
    }

    fn eval_inner(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(var) => env.get(*var).ok_or(EvalError::Unbound(*var)),
            Expr::Neg(e) => Ok(-e.eval_inner(env)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval_inner(env)?;
                let b = b.eval_inner(env)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::DivisionByZero)
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => {
                        let v = pow(a, b);
                        if v.is_nan() {
                            Err(EvalError::Domain { func: "pow", arg: a })
                        } else {
                            Ok(v)
                        }
                    }
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval_inner(env)?;
                match func {
                    Func::Abs => Ok(a.abs()),
                    Func::Exp => Ok(a.exp()),
                    Func::Log => {
                        if a <= 0.0 {
                            Err(EvalError::Domain { func: "log", arg: a })
                        } else {
                            Ok(a.ln())
                        }
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            Err(EvalError::Domain { func: "sqrt", arg: a })
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Max => Ok(a.max(args[1].eval_inner(env)?)),
                    Func::Min => Ok(a.min(args[1].eval_inner(env)?)),
                }
            }
        }
    }

    /// Free variables, sorted and deduplicated.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn mentions_t(&self) -> bool {
        self.variables().contains(&Var::T)
    }

    pub fn mentions_x(&self) -> bool {
        self.variables().iter().any(|v| matches!(v, Var::X(_)))
    }

    pub fn mentions_y(&self) -> bool {
        self.variables().iter().any(|v| matches!(v, Var::Y(_)))
    }

    pub fn mentions_z(&self) -> bool {
        self.variables().iter().any(|v| matches!(v, Var::Z(_)))
    }

    /// True when the expression is a bare numeric literal.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(e) => e.as_constant().map(|v| -v),
            _ => None,
        }
    }
}

// Integer exponents go through powi so that e.g. (-2)^3 is defined.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Fully parenthesised output; parsing it back yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier '{s}'"),
            Token::Op(c) => format!("operator '{c}'"),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::Comma => "','".into(),
            Token::End => "end of expression".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part: e, E followed by optional sign and digits
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| ParseError::BadNumber {
                text: s.clone(),
                column,
            })?;
            out.push((Token::Num(v), column));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), column));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Token::Op(c),
            '(' => Token::LParen,
            ')' => Token::RParen,
            ',' => Token::Comma,
            _ => return Err(ParseError::UnexpectedChar { ch: c, column }),
        };
        out.push((tok, column));
        i += 1;
    }
    out.push((Token::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn column(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, want: Token, expected: &'static str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            Err(ParseError::UnexpectedToken {
                found: self.peek().describe(),
                expected,
                column: self.column(),
            })
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Op('+') => BinOp::Add,
                Token::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Op('*') => BinOp::Mul,
                Token::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Op('-') {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // power := primary ('^' unary)?
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Token::Op('^') {
            self.advance();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let column = self.column();
        match self.advance() {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::LParen => {
                let e = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(e)
            }
            Token::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Token::LParen, "'(' after function name")?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Token::Comma {
                        self.advance();
                        args.push(self.expr()?);
                    }
                    self.expect(Token::RParen, "')'")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            name,
                            expected: func.arity(),
                            got: args.len(),
                            column,
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    parse_var(&name)
                        .map(Expr::Var)
                        .ok_or(ParseError::UnknownIdentifier { name, column })
                }
            }
            other => Err(ParseError::UnexpectedToken {
                found: other.describe(),
                expected: "number, variable, function or '('",
                column,
            }),
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    if name == "t" {
        return Some(Var::T);
    }
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    let idx = idx - 1;
    match head {
        "x" => Some(Var::X(idx)),
        "y" => Some(Var::Y(idx)),
        "z" => Some(Var::Z(idx)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval_at(text: &str, pairs: &[(&str, f64)]) -> Result<f64, EvalError> {
        let map: HashMap<String, f64> = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Expr::parse(text).unwrap().eval_map(&map)
    }

    #[test]
    fn basic_values() {
        assert_eq!(eval_at("x1^2 + 1", &[("x1", 2.0)]).unwrap(), 5.0);
        assert_eq!(eval_at("max(y1, y2 - 0.5)", &[("y1", 0.0), ("y2", 0.3)]).unwrap(), 0.0);
        assert_eq!(eval_at("exp(0)", &[]).unwrap(), 1.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(eval_at("-2^2", &[]).unwrap(), -4.0);
        assert_eq!(eval_at("2^3^2", &[]).unwrap(), 512.0);
        assert_eq!(eval_at("1 - 2 - 3", &[]).unwrap(), -4.0);
        assert_eq!(eval_at("8 / 4 / 2", &[]).unwrap(), 1.0);
        assert_eq!(eval_at("2 * -3", &[]).unwrap(), -6.0);
        assert_eq!(eval_at("2^-1", &[]).unwrap(), 0.5);
        assert_eq!(eval_at("(-2)^3", &[]).unwrap(), -8.0);
        assert_eq!(eval_at("1.5e2 + 2E-1", &[]).unwrap(), 150.2);
    }

    #[test]
    fn eval_errors() {
        assert_eq!(eval_at("1 / (x1 - 1)", &[("x1", 1.0)]), Err(EvalError::DivisionByZero));
        assert!(matches!(
            eval_at("log(0)", &[]),
            Err(EvalError::Domain { func: "log", .. })
        ));
        assert!(matches!(
            eval_at("sqrt(-1)", &[]),
            Err(EvalError::Domain { func: "sqrt", .. })
        ));
        assert_eq!(eval_at("x2 + 1", &[("x1", 1.0)]), Err(EvalError::Unbound(Var::X(1))));
        assert_eq!(eval_at("t", &[]), Err(EvalError::Unbound(Var::T)));
    }

    #[test]
    fn parse_errors_carry_columns() {
        let e = Expr::parse("1 + $").unwrap_err();
        assert_eq!(e.column(), 5);
        let e = Expr::parse("1 + w1").unwrap_err();
        assert!(matches!(e, ParseError::UnknownIdentifier { column: 5, .. }));
        let e = Expr::parse("max(1)").unwrap_err();
        assert!(matches!(e, ParseError::Arity { .. }));
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("x0").is_err());
    }

    #[test]
    fn dependency_queries() {
        let e = Expr::parse("y2 - y1 + z1").unwrap();
        assert!(e.mentions_y() && e.mentions_z());
        assert!(!e.mentions_x() && !e.mentions_t());
        assert_eq!(e.variables(), vec![Var::Y(0), Var::Y(1), Var::Z(0)]);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Num),
            (0usize..3).prop_map(|i| Expr::Var(Var::X(i))),
            (0usize..3).prop_map(|i| Expr::Var(Var::Y(i))),
            Just(Expr::Var(Var::T)),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone(), 0usize..5).prop_map(|(a, b, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][k];
                    Expr::Binary(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), 0usize..6).prop_map(|(a, k)| {
                    let f = [Func::Abs, Func::Exp, Func::Log, Func::Sqrt, Func::Sin, Func::Cos][k];
                    Expr::Call(f, vec![a])
                }),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip(e in arb_expr()) {
            let once = Expr::parse(&e.to_string()).unwrap();
            prop_assert_eq!(&once, &e);
            let twice = Expr::parse(&once.to_string()).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
