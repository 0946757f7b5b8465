//! Growth-function expressions over one variable: parsing, extended-range
//! evaluation, the regular-variation index and the β exponent.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | atom ('^' atom)?
//! atom   := number | var | name | fn '(' expr ')' | '(' expr ')'
//! fn     := exp | log | sqrt | floor | cos
//! ```
//!
//! `var` is `n` (with `x`, `k`, `t` accepted as aliases). Names resolve to
//! caller bindings first, then to the constants `pi` and `e`. `log` is the
//! natural logarithm.

use crate::error::{Error, Result};
use crate::numerics::{log_add_exp, log_sub_exp};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Named constants available to expressions.
pub type Bindings = BTreeMap<String, f64>;

const VAR_NAMES: [&str; 4] = ["n", "x", "k", "t"];

/// Logs beyond this magnitude are kept in log form.
const LOG_SWITCH: f64 = 700.0;

/// A real number that falls back to `±exp(ln)` once it leaves the f64 range.
///
/// Ordinary values stay as plain floats so integer-valued arithmetic (for
/// instance `floor(sqrt(400))`) is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XReal {
    Plain(f64),
    Log { neg: bool, ln: f64 },
}

impl XReal {
    pub fn from_f64(v: f64) -> XReal {
        XReal::Plain(v)
    }

    /// The positive value `exp(ln)`.
    pub fn from_ln(ln: f64) -> XReal {
        XReal::from_parts(false, ln)
    }

    fn from_parts(neg: bool, ln: f64) -> XReal {
        if ln == f64::NEG_INFINITY {
            XReal::Plain(0.0)
        } else if ln.abs() < LOG_SWITCH {
            let v = ln.exp();
            XReal::Plain(if neg { -v } else { v })
        } else {
            XReal::Log { neg, ln }
        }
    }

    pub fn signum(&self) -> i32 {
        match *self {
            XReal::Plain(v) if v > 0.0 => 1,
            XReal::Plain(v) if v < 0.0 => -1,
            XReal::Plain(_) => 0,
            XReal::Log { neg, .. } => {
                if neg {
                    -1
                } else {
                    1
                }
            }
        }
    }

    /// `ln |v|`.
    pub fn ln_abs(&self) -> f64 {
        match *self {
            XReal::Plain(v) => v.abs().ln(),
            XReal::Log { ln, .. } => ln,
        }
    }

    /// Nearest float; may be infinite or zero for log-form values.
    pub fn to_f64(&self) -> f64 {
        match *self {
            XReal::Plain(v) => v,
            XReal::Log { neg, ln } => {
                let v = ln.exp();
                if neg {
                    -v
                } else {
                    v
                }
            }
        }
    }

    pub fn neg(self) -> XReal {
        match self {
            XReal::Plain(v) => XReal::Plain(-v),
            XReal::Log { neg, ln } => XReal::Log { neg: !neg, ln },
        }
    }

    pub fn add(self, other: XReal) -> XReal {
        if let (XReal::Plain(a), XReal::Plain(b)) = (self, other) {
            let s = a + b;
            if s.is_finite() {
                return XReal::Plain(s);
            }
        }
        let (sa, sb) = (self.signum(), other.signum());
        if sa == 0 {
            return other;
        }
        if sb == 0 {
            return self;
        }
        let (la, lb) = (self.ln_abs(), other.ln_abs());
        if sa == sb {
            return XReal::from_parts(sa < 0, log_add_exp(la, lb));
        }
        if la == lb {
            return XReal::Plain(0.0);
        }
        if la > lb {
            XReal::from_parts(sa < 0, log_sub_exp(la, lb))
        } else {
            XReal::from_parts(sb < 0, log_sub_exp(lb, la))
        }
    }

    pub fn sub(self, other: XReal) -> XReal {
        self.add(other.neg())
    }

    pub fn mul(self, other: XReal) -> XReal {
        if let (XReal::Plain(a), XReal::Plain(b)) = (self, other) {
            let p = a * b;
            if p.is_finite() && (p != 0.0 || a == 0.0 || b == 0.0) {
                return XReal::Plain(p);
            }
        }
        let (sa, sb) = (self.signum(), other.signum());
        if sa == 0 || sb == 0 {
            return XReal::Plain(0.0);
        }
        XReal::from_parts((sa < 0) != (sb < 0), self.ln_abs() + other.ln_abs())
    }

    pub fn div(self, other: XReal) -> Result<XReal> {
        let sb = other.signum();
        if sb == 0 {
            return Err(Error::Domain("division by zero".into()));
        }
        if let (XReal::Plain(a), XReal::Plain(b)) = (self, other) {
            let q = a / b;
            if q.is_finite() && (q != 0.0 || a == 0.0) {
                return Ok(XReal::Plain(q));
            }
        }
        let sa = self.signum();
        if sa == 0 {
            return Ok(XReal::Plain(0.0));
        }
        Ok(XReal::from_parts((sa < 0) != (sb < 0), self.ln_abs() - other.ln_abs()))
    }

    pub fn pow(self, ex: XReal) -> Result<XReal> {
        let e = ex.to_f64();
        if let XReal::Plain(b) = self {
            if e.is_finite() {
                let r = b.powf(e);
                if r.is_finite() && !r.is_nan() && (r != 0.0 || b == 0.0) {
                    return Ok(XReal::Plain(r));
                }
            }
        }
        let s = self.signum();
        if s == 0 {
            return if e > 0.0 { Ok(XReal::Plain(0.0)) } else { Err(Error::Domain("0 to a non-positive power".into())) };
        }
        let odd = if s < 0 {
            if !e.is_finite() || e.fract() != 0.0 {
                return Err(Error::Domain("negative base with non-integer exponent".into()));
            }
            (e / 2.0).fract() != 0.0
        } else {
            false
        };
        let lb = self.ln_abs();
        if lb == 0.0 {
            return Ok(XReal::Plain(if odd { -1.0 } else { 1.0 }));
        }
        let ln = e * lb;
        if ln.is_nan() || ln == f64::INFINITY {
            return Err(Error::Overflow("power exceeds the extended range".into()));
        }
        Ok(XReal::from_parts(odd, ln))
    }

    pub fn exp(self) -> Result<XReal> {
        let v = self.to_f64();
        if v == f64::INFINITY || v.is_nan() {
            return Err(Error::Overflow("exp argument exceeds the float range".into()));
        }
        if v.abs() < LOG_SWITCH {
            Ok(XReal::Plain(v.exp()))
        } else {
            Ok(XReal::from_parts(false, v))
        }
    }

    pub fn ln(self) -> Result<XReal> {
        if self.signum() <= 0 {
            return Err(Error::Domain("log of a non-positive value".into()));
        }
        Ok(XReal::Plain(self.ln_abs()))
    }

    pub fn sqrt(self) -> Result<XReal> {
        match self {
            XReal::Plain(v) if v >= 0.0 => Ok(XReal::Plain(v.sqrt())),
            XReal::Log { neg: false, ln } => Ok(XReal::from_parts(false, ln / 2.0)),
            _ => Err(Error::Domain("sqrt of a negative value".into())),
        }
    }

    pub fn floor(self) -> XReal {
        match self {
            XReal::Plain(v) => XReal::Plain(v.floor()),
            XReal::Log { neg, ln } if ln > 0.0 => XReal::Log { neg, ln },
            XReal::Log { neg, .. } => XReal::Plain(if neg { -1.0 } else { 0.0 }),
        }
    }

    pub fn cos(self) -> Result<XReal> {
        match self {
            XReal::Plain(v) if v.abs() < 9.0e15 => Ok(XReal::Plain(v.cos())),
            _ => Err(Error::Domain("cos of an argument beyond 2^53".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Floor,
    Cos,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "floor" => Func::Floor,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Floor => "floor",
            Func::Cos => "cos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// A bound constant, printed by name.
    Name(String, f64),
    Var,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    /// Function call with the source position of the function name.
    Call(Func, Box<Expr>, usize),
}

impl Expr {
    pub fn eval(&self, n: XReal) -> Result<XReal> {
        match self {
            Expr::Num(v) | Expr::Name(_, v) => Ok(XReal::Plain(*v)),
            Expr::Var => Ok(n),
            Expr::Neg(e) => Ok(e.eval(n)?.neg()),
            Expr::Bin(op, l, r) => {
                let a = l.eval(n)?;
                let b = r.eval(n)?;
                match op {
                    Op::Add => Ok(a.add(b)),
                    Op::Sub => Ok(a.sub(b)),
                    Op::Mul => Ok(a.mul(b)),
                    Op::Div => a.div(b),
                    Op::Pow => a.pow(b),
                }
            }
            Expr::Call(f, arg, _) => {
                let v = arg.eval(n)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Floor => Ok(v.floor()),
                    Func::Cos => v.cos(),
                }
            }
        }
    }

    fn contains(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Neg(e) | Expr::Call(_, e, _) => e.contains(pred),
            Expr::Bin(_, l, r) => l.contains(pred) || r.contains(pred),
            _ => false,
        }
    }

    pub fn has_var(&self) -> bool {
        self.contains(&|e| matches!(e, Expr::Var))
    }

    pub fn has_func(&self, f: Func) -> bool {
        self.contains(&|e| matches!(e, Expr::Call(g, _, _) if *g == f))
    }

    /// Value of a variable-free subtree.
    pub fn const_value(&self) -> Option<f64> {
        if self.has_var() {
            return None;
        }
        self.eval(XReal::Plain(0.0)).ok().map(|v| v.to_f64())
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(Op::Add | Op::Sub, ..) => 1,
            Expr::Bin(Op::Mul | Op::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(Op::Pow, ..) => 4,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.prec() < min_prec {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) => write!(f, "{}", v),
            Expr::Name(s, _) => write!(f, "{}", s),
            Expr::Var => write!(f, "n"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.write_at(f, 3)
            }
            Expr::Bin(op, l, r) => {
                let (sym, p) = match op {
                    Op::Add => (" + ", 1),
                    Op::Sub => (" - ", 1),
                    Op::Mul => ("*", 2),
                    Op::Div => ("/", 2),
                    Op::Pow => ("^", 4),
                };
                if *op == Op::Pow {
                    l.write_at(f, 5)?;
                    write!(f, "{}", sym)?;
                    r.write_at(f, 5)
                } else {
                    l.write_at(f, p)?;
                    write!(f, "{}", sym)?;
                    r.write_at(f, p + 1)
                }
            }
            Expr::Call(func, arg, _) => {
                write!(f, "{}(", func.name())?;
                arg.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Syntax { pos: start, msg: format!("bad number '{s}'") })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(Error::Syntax { pos: i, msg: format!("unexpected character '{c}'") });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    bindings: &'a Bindings,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => Op::Add,
                Tok::Sym('-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => Op::Mul,
                Tok::Sym('/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            let ex = self.atom()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(ex)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.at += 1;
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.at += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                self.at += 1;
                if let Some(f) = Func::from_name(&name) {
                    if !self.eat('(') {
                        return self.err(format!("expected '(' after {name}"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return self.err("expected ')'");
                    }
                    return Ok(Expr::Call(f, Box::new(arg), pos));
                }
                if VAR_NAMES.contains(&name.as_str()) {
                    return Ok(Expr::Var);
                }
                if let Some(v) = self.bindings.get(&name) {
                    return Ok(Expr::Name(name, *v));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Name(name, std::f64::consts::PI)),
                    "e" => Ok(Expr::Name(name, std::f64::consts::E)),
                    _ => Err(Error::Syntax { pos, msg: format!("unbound name '{name}'") }),
                }
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Sym(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

/// floor and cos may appear only as the root or under an exp/pow root, and
/// never inside one another.
fn check_nesting(root: &Expr) -> Result<()> {
    let root_ok = matches!(root, Expr::Call(Func::Exp, ..) | Expr::Bin(Op::Pow, ..));
    fn walk(e: &Expr, is_root: bool, root_ok: bool, inside: bool) -> Result<()> {
        match e {
            Expr::Call(f @ (Func::Floor | Func::Cos), arg, pos) => {
                if inside {
                    return Err(Error::Syntax { pos: *pos, msg: format!("{} nested inside floor/cos", f.name()) });
                }
                if !(is_root || root_ok) {
                    return Err(Error::Syntax {
                        pos: *pos,
                        msg: format!("{} allowed only at top level or under an exp/pow root", f.name()),
                    });
                }
                walk(arg, false, root_ok, true)
            }
            Expr::Call(_, arg, _) | Expr::Neg(arg) => walk(arg, false, root_ok, inside),
            Expr::Bin(_, l, r) => {
                walk(l, false, root_ok, inside)?;
                walk(r, false, root_ok, inside)
            }
            _ => Ok(()),
        }
    }
    walk(root, true, root_ok, false)
}

/// Parse without validating or probing.
pub fn parse_expr(text: &str, bindings: &Bindings) -> Result<Expr> {
    for name in bindings.keys() {
        if VAR_NAMES.contains(&name.as_str()) || Func::from_name(name).is_some() {
            return Err(Error::Precondition(format!("binding '{name}' shadows a reserved name")));
        }
    }
    let mut p = Parser { toks: tokenize(text)?, at: 0, bindings };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

/// A parsed growth function `n ↦ f(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFn {
    expr: Expr,
    source: String,
    n_min: u64,
}

fn probe_points() -> Vec<u64> {
    let mut pts: Vec<u64> = (1..=1000).collect();
    let mut x = 1000.0f64;
    while x < 1e6 {
        x *= 1.05;
        pts.push(x.ceil().min(1e6) as u64);
    }
    pts.dedup();
    pts
}

impl GrowthFn {
    pub fn parse(text: &str) -> Result<GrowthFn> {
        GrowthFn::parse_with(text, &Bindings::new())
    }

    pub fn parse_with(text: &str, bindings: &Bindings) -> Result<GrowthFn> {
        let expr = parse_expr(text, bindings)?;
        check_nesting(&expr)?;
        GrowthFn::from_expr(expr, text.to_string())
    }

    /// Wrap an expression tree, detecting `n_min` by probing.
    pub fn from_expr(expr: Expr, source: String) -> Result<GrowthFn> {
        let pts = probe_points();
        let ok = |n: u64| match expr.eval(XReal::Plain(n as f64)) {
            Ok(v) => v.signum() > 0,
            Err(Error::Overflow(_)) => true,
            Err(_) => false,
        };
        let mut first_good = 0;
        for (i, &n) in pts.iter().enumerate() {
            if !ok(n) {
                first_good = i + 1;
            }
        }
        if first_good >= pts.len() {
            return Err(Error::Domain(format!("'{source}' is not positive and finite for any n_min <= 10^6")));
        }
        Ok(GrowthFn { expr, source, n_min: pts[first_good] })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn n_min(&self) -> u64 {
        self.n_min
    }

    /// Canonical printed form.
    pub fn pretty(&self) -> String {
        self.expr.to_string()
    }

    pub fn has_floor(&self) -> bool {
        self.expr.has_func(Func::Floor)
    }

    pub fn eval_x(&self, n: XReal) -> Result<XReal> {
        self.expr.eval(n)
    }

    /// Plain value; infinite when it leaves the float range.
    pub fn eval(&self, n: f64) -> Result<f64> {
        Ok(self.expr.eval(XReal::Plain(n))?.to_f64())
    }

    /// `log f(n)`, exact through exp/pow roots far beyond the float range.
    pub fn log_eval(&self, n: f64) -> Result<f64> {
        if n < self.n_min as f64 {
            return Err(Error::Domain(format!("n = {n} is below n_min = {}", self.n_min)));
        }
        let v = self.expr.eval(XReal::Plain(n))?;
        if v.signum() <= 0 {
            return Err(Error::Domain(format!("'{}' is not positive at n = {n}", self.source)));
        }
        Ok(v.ln_abs())
    }

    /// The growth function `log f`: peels an exp root, otherwise wraps in log.
    pub fn log_of(&self) -> Result<GrowthFn> {
        let (expr, source) = match &self.expr {
            Expr::Call(Func::Exp, inner, _) => ((**inner).clone(), inner.to_string()),
            e => (Expr::Call(Func::Log, Box::new(e.clone()), 0), format!("log({})", self.source)),
        };
        GrowthFn::from_expr(expr, source)
    }

    /// The growth function `exp f`.
    pub fn exp_of(&self) -> Result<GrowthFn> {
        let expr = Expr::Call(Func::Exp, Box::new(self.expr.clone()), 0);
        let source = expr.to_string();
        GrowthFn::from_expr(expr, source)
    }
}

/// Estimates of `x f'(x)/f(x)` on the grid `x = 2^j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegVarReport {
    /// `(x, estimate)` pairs.
    #[serde(serialize_with = "ser_pairs")]
    pub rho_estimates: Vec<(f64, f64)>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub rho: f64,
    pub infinite: bool,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub confidence_width: f64,
    pub critical: bool,
}

fn ser_pairs<S: serde::Serializer>(v: &[(f64, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    let out: Vec<[serde_json::Value; 2]> =
        v.iter().map(|(a, b)| [crate::report::num(*a), crate::report::num(*b)]).collect();
    serde::Serialize::serialize(&out, s)
}

pub const DEFAULT_J_MAX: u32 = 512;
pub const DEFAULT_CRITICAL_BAND: f64 = 0.02;
const INFINITE_RHO: f64 = 1e6;

/// Regular-variation index with the default critical band.
pub fn estimate_rho(f: &GrowthFn, j_max: u32) -> Result<RegVarReport> {
    estimate_rho_with(f, j_max, DEFAULT_CRITICAL_BAND)
}

/// Index `ρ = lim x f'(x)/f(x)` from central differences of `g(u) = log f(e^u)`.
///
/// The differences use steps `ln 2` and `2 ln 2`, combined by Richardson
/// extrapolation, so every sample point is a power of two. The limit is
/// taken by Aitken's Δ² on the estimates at `j/4, j/2, j`, which is exact
/// for corrections of the form `C u^{-γ}`.
pub fn estimate_rho_with(f: &GrowthFn, j_max: u32, band: f64) -> Result<RegVarReport> {
    if f.has_floor() {
        return Err(Error::Precondition(
            "floor-bearing growth functions are exempt from the index estimate".into(),
        ));
    }
    let top = j_max as usize + 2;
    let mut g: Vec<Option<f64>> = vec![None; top + 1];
    for (j, slot) in g.iter_mut().enumerate() {
        let x = (j as f64).exp2();
        if x < f.n_min() as f64 {
            continue;
        }
        match f.eval_x(XReal::Plain(x)) {
            Ok(v) if v.signum() > 0 => *slot = Some(v.ln_abs()),
            Ok(_) => {}
            Err(Error::Overflow(_)) => break,
            Err(e) => return Err(e),
        }
    }
    // the contiguous valid run ending at the last valid point
    let last = match g.iter().rposition(Option::is_some) {
        Some(l) => l,
        None => return Err(Error::Domain(format!("'{}' has no valid grid points", f.source()))),
    };
    let mut first = last;
    while first > 0 && g[first - 1].is_some() {
        first -= 1;
    }
    if last < first + 12 {
        return Err(Error::Domain(format!("'{}' has too few valid grid points", f.source())));
    }
    let gv: Vec<f64> = (first..=last).map(|j| g[j].unwrap()).collect();
    let half = gv.len() / 2;
    for i in half..gv.len() - 1 {
        if gv[i + 1] < gv[i] {
            return Err(Error::NonMonotone(format!(
                "'{}' decreases between 2^{} and 2^{}",
                f.source(),
                first + i,
                first + i + 1
            )));
        }
    }
    let h = std::f64::consts::LN_2;
    let mut est = Vec::new();
    for i in 2..gv.len() - 2 {
        let d1 = (gv[i + 1] - gv[i - 1]) / (2.0 * h);
        let d2 = (gv[i + 2] - gv[i - 2]) / (4.0 * h);
        let r = (4.0 * d1 - d2) / 3.0;
        est.push(((first + i) as u32, r));
    }
    let rho_estimates: Vec<(f64, f64)> = est.iter().map(|&(j, r)| ((j as f64).exp2(), r)).collect();
    let n = est.len();
    let (r_last, j_last) = (est[n - 1].1, est[n - 1].0);
    let growing = n >= 3 && est[n - 1].1 > est[n - 2].1 && est[n - 2].1 > est[n - 3].1;
    if r_last > INFINITE_RHO && growing {
        return Ok(RegVarReport {
            rho_estimates,
            rho: f64::INFINITY,
            infinite: true,
            confidence_width: 0.0,
            critical: false,
        });
    }
    let at = |j: u32| est.iter().find(|e| e.0 == j).map(|e| e.1);
    let ja = j_last / 4;
    let (rho, width) = match (at(ja), at(2 * ja), at(4 * ja)) {
        (Some(ra), Some(rb), Some(rc)) => {
            let d1 = ra - rb;
            let d2 = rb - rc;
            let q = if d1.abs() > 1e-14 { d2 / d1 } else { f64::NAN };
            if q > 0.0 && q < 1.0 {
                let rho = rc - d2 * q / (1.0 - q);
                (rho, (rho - rc).abs())
            } else {
                (rc, d2.abs())
            }
        }
        _ => (r_last, (r_last - est[n.saturating_sub(2)].1).abs()),
    };
    Ok(RegVarReport { rho_estimates, rho, infinite: false, confidence_width: width, critical: (rho - 0.5).abs() <= band })
}

/// Values of `log φ(k)` for `k = 1..=m`, zero below the domain of `log φ`.
fn log_phi_values(lphi: &GrowthFn, m: usize) -> Result<Vec<XReal>> {
    (1..=m)
        .map(|k| {
            if (k as u64) < lphi.n_min() {
                Ok(XReal::Plain(0.0))
            } else {
                lphi.eval_x(XReal::Plain(k as f64))
            }
        })
        .collect()
}

/// Limsup estimate with the trace it was taken from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaEstimate {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub beta: f64,
    /// Ratio at `n = 1..=N`; NaN where the denominator is not positive.
    #[serde(skip)]
    pub trace: Vec<f64>,
    pub window: (usize, usize),
}

fn window_max(trace: &[f64], n: usize) -> f64 {
    let lo = n.div_ceil(2).max(1);
    trace[lo - 1..n].iter().cloned().filter(|v| !v.is_nan()).fold(f64::NAN, f64::max)
}

/// β: limsup of the ratio of alternating sums of `log φ`.
pub fn beta(phi: &GrowthFn, n: usize) -> Result<BetaEstimate> {
    beta_from_log(&phi.log_of()?, n)
}

/// β with `log φ` supplied directly.
pub fn beta_from_log(lphi: &GrowthFn, n: usize) -> Result<BetaEstimate> {
    if n < 2 {
        return Err(Error::Precondition("beta needs N >= 2".into()));
    }
    let vals = log_phi_values(lphi, n + 1)?;
    // cum[k] = vals[k] + vals[k-2] + ... (1-based)
    let mut cum = vec![XReal::Plain(0.0); n + 2];
    for k in 1..=n + 1 {
        let prev = if k >= 2 { cum[k - 2] } else { XReal::Plain(0.0) };
        cum[k] = prev.add(vals[k - 1]);
    }
    let trace: Vec<f64> = (1..=n)
        .map(|m| {
            let den = cum[m];
            if den.signum() <= 0 {
                return f64::NAN;
            }
            cum[m + 1].div(den).map(|r| r.to_f64()).unwrap_or(f64::NAN)
        })
        .collect();
    let beta = window_max(&trace, n);
    Ok(BetaEstimate { beta, trace, window: (n.div_ceil(2), n) })
}

/// The simplified exponent `1 + limsup log φ(n+1) / Σ_{k≤n} log φ(k)`.
pub fn beta_simplified(phi: &GrowthFn, n: usize) -> Result<f64> {
    beta_simplified_from_log(&phi.log_of()?, n)
}

pub fn beta_simplified_from_log(lphi: &GrowthFn, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition("beta_simplified needs N >= 2".into()));
    }
    let vals = log_phi_values(lphi, n + 1)?;
    let mut total = XReal::Plain(0.0);
    let mut trace = Vec::with_capacity(n);
    for m in 1..=n {
        total = total.add(vals[m - 1]);
        trace.push(if total.signum() > 0 {
            vals[m].div(total).map(|r| r.to_f64()).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        });
    }
    Ok(1.0 + window_max(&trace, n))
}
