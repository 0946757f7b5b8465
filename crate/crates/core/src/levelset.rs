//! Representative points of the Cantor-type constructions behind the lower
//! bounds, emitted as quotient sequences. Each generator picks the lowest
//! admissible quotient in its window, so outputs are deterministic.
//!
//! Quotients are materialised exactly while they fit under the digit cap;
//! past that, `log_a` keeps going and `exhausted_at` marks the first
//! log-only index.

use crate::cf::{cap_bits, QuotientSequence, DEFAULT_DIGIT_CAP};
use crate::error::{Error, Result};
use crate::growth::{estimate_rho, GrowthFn, XReal, DEFAULT_J_MAX};
use crate::numerics::{big_from_ln, ln_biguint, log_sub_exp};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::Serialize;
use std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstructionSpec {
    /// `a_{k²}` near `φ(k²)`, ones elsewhere; `blocks` values of `k`.
    ESparse { phi: GrowthFn, blocks: usize },
    /// `a_n` in `(√φ(n) − √(φ(n)/n), √φ(n) + √(φ(n)/n)]` for every `n`.
    BFull { phi: GrowthFn, terms: usize },
    /// `a_n` just above `e^{αn/2 − α/4}` from `N₂` on.
    Upsilon { alpha: f64, terms: usize },
    /// `a_n = ⌈d_n⌉` with `d_n d_{n+1} = φ(n) − φ(n−1)`.
    DRecursion { phi: GrowthFn, terms: usize },
    /// The sparse construction for `ψ(n) = e^{c⌊√n⌋}`.
    PsiSqrt { c: f64, blocks: usize },
}

impl ConstructionSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ConstructionSpec::ESparse { .. } => "e-sparse",
            ConstructionSpec::BFull { .. } => "b-full",
            ConstructionSpec::Upsilon { .. } => "upsilon",
            ConstructionSpec::DRecursion { .. } => "d-rec",
            ConstructionSpec::PsiSqrt { .. } => "psi-sqrt",
        }
    }

    /// The growth function the generated point tracks.
    pub fn target(&self) -> Result<GrowthFn> {
        match self {
            ConstructionSpec::ESparse { phi, .. }
            | ConstructionSpec::BFull { phi, .. }
            | ConstructionSpec::DRecursion { phi, .. } => Ok(phi.clone()),
            ConstructionSpec::Upsilon { alpha, .. } => GrowthFn::parse(&format!("exp({alpha}*n)")),
            ConstructionSpec::PsiSqrt { c, .. } => psi_sqrt(*c),
        }
    }
}

/// `ψ(n) = exp(c·floor(sqrt(n)))`.
pub fn psi_sqrt(c: f64) -> Result<GrowthFn> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    GrowthFn::parse(&format!("exp({c}*floor(sqrt(n)))"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generated {
    #[serde(serialize_with = "ser_seq")]
    pub seq: QuotientSequence,
    /// `log a_n` for every emitted term, including log-only ones.
    #[serde(serialize_with = "crate::report::ser_vec_f64")]
    pub log_a: Vec<f64>,
    /// First index where the construction's window applies.
    pub start_index: usize,
    /// `log d_n` for the d-recursion.
    #[serde(serialize_with = "ser_opt_vec", skip_serializing_if = "Option::is_none")]
    pub d_trace: Option<Vec<f64>>,
}

fn ser_seq<S: serde::Serializer>(q: &QuotientSequence, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&q.to_json(), s)
}

fn ser_opt_vec<S: serde::Serializer>(v: &Option<Vec<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(xs) => crate::report::ser_vec_f64(xs, s),
        None => s.serialize_none(),
    }
}

/// Collects quotients, switching to log-only past the digit cap.
struct Emitter {
    exact: Vec<BigUint>,
    log_a: Vec<f64>,
    exhausted_at: Option<usize>,
    cap_bits: u64,
}

impl Emitter {
    fn new() -> Self {
        Emitter { exact: Vec::new(), log_a: Vec::new(), exhausted_at: None, cap_bits: cap_bits(DEFAULT_DIGIT_CAP) }
    }

    fn push_exact(&mut self, a: BigUint) {
        if self.exhausted_at.is_none() && a.bits() <= self.cap_bits {
            self.log_a.push(ln_biguint(&a));
            self.exact.push(a);
        } else {
            let l = ln_biguint(&a);
            self.push_log(l);
        }
    }

    fn push_log(&mut self, l: f64) {
        if self.exhausted_at.is_none() {
            self.exhausted_at = Some(self.log_a.len() + 1);
        }
        self.log_a.push(l);
    }

    /// Smallest integer `≥ v` given `ln v`, exact or log-only by size.
    fn push_ceil_ln(&mut self, ln_v: f64) {
        if self.exhausted_at.is_none() && ln_v / LN_2 < self.cap_bits as f64 - 64.0 {
            self.push_exact(ceil_from_ln(ln_v));
        } else {
            self.push_log(ln_v);
        }
    }

    fn finish(self, id: String, start_index: usize, d_trace: Option<Vec<f64>>) -> Generated {
        let mut seq = QuotientSequence::generated(id, self.exact);
        seq.exhausted_at = self.exhausted_at;
        Generated { seq, log_a: self.log_a, start_index, d_trace }
    }
}

/// An integer `≥ exp(ln_v)`, tight to the relative precision of `ln_v`.
fn ceil_from_ln(ln_v: f64) -> BigUint {
    if ln_v < 36.0 {
        return BigUint::from(ln_v.exp().ceil() as u64);
    }
    // big_from_ln loses about |ln_v|·ε in the exponent; step past it
    big_from_ln(ln_v + ln_v.abs() * 1e-15) + BigUint::one()
}

/// `(floor, ceil)` of a value that is plain or in log form.
fn floor_ceil(v: XReal) -> (BigUint, BigUint) {
    match v {
        XReal::Plain(x) if x < 4.0e15 => (BigUint::from(x.floor() as u64), BigUint::from(x.ceil() as u64)),
        _ => {
            let l = v.ln_abs();
            let f = big_from_ln(l);
            (f.clone(), f + BigUint::one())
        }
    }
}

pub fn generate(spec: &ConstructionSpec) -> Result<Generated> {
    match spec {
        ConstructionSpec::ESparse { phi, blocks } => gen_e_sparse(phi, *blocks),
        ConstructionSpec::BFull { phi, terms } => gen_b_full(phi, *terms),
        ConstructionSpec::Upsilon { alpha, terms } => gen_upsilon(*alpha, *terms),
        ConstructionSpec::DRecursion { phi, terms } => gen_d_recursion(phi, *terms),
        ConstructionSpec::PsiSqrt { c, blocks } => gen_e_sparse(&psi_sqrt(*c)?, *blocks),
    }
}

/// Sparse construction on `n_k = k²`: `a_{k²}` is `⌈φ(k²)⌉` clamped into
/// `[s_k, s_k + s_k/k]` with `s_k = ⌊φ(k²)⌋`; all other quotients are 1.
/// Emits `K² + 1` terms so that `L_{K²}` is determined.
pub fn gen_e_sparse(phi: &GrowthFn, blocks: usize) -> Result<Generated> {
    if blocks == 0 {
        return Err(Error::Precondition("at least one block is required".into()));
    }
    let total = blocks * blocks + 1;
    let mut out = Emitter::new();
    let mut start = None;
    let mut next_k = 1usize;
    for n in 1..=total {
        let k = next_k;
        if n != k * k || n == total {
            out.push_exact(BigUint::one());
            continue;
        }
        next_k += 1;
        if (n as u64) < phi.n_min() {
            out.push_exact(BigUint::one());
            continue;
        }
        start.get_or_insert(n);
        let v = phi.eval_x(XReal::from_f64(n as f64))?;
        let (s, c) = floor_ceil(v);
        if s < BigUint::one() {
            return Err(Error::Domain(format!("floor(phi(k^2)) < 1 at n = {n}")));
        }
        let upper = &s + &s / BigUint::from(k);
        out.push_exact(c.min(upper));
    }
    let start = start.ok_or_else(|| Error::Construction { n: total as u64, msg: "no block reaches n_min".into() })?;
    Ok(out.finish(format!("e-sparse:{}", phi.source()), start, None))
}

/// Every quotient in `(s_n − t_n, s_n + t_n]` with `s_n = √φ(n)`,
/// `t_n = √(φ(n)/n)`; the lowest admissible integer is taken.
pub fn gen_b_full(phi: &GrowthFn, terms: usize) -> Result<Generated> {
    if terms < 2 {
        return Err(Error::Precondition("at least two terms are required".into()));
    }
    if (terms as u64) < 2 * phi.n_min() {
        return Err(Error::Precondition(format!("terms must be at least 2·n_min = {}", 2 * phi.n_min())));
    }
    // φ(n)/n strictly increasing on the second half
    let mut prev = f64::NEG_INFINITY;
    for n in terms.div_ceil(2)..=terms {
        let v = phi.log_eval(n as f64)? - (n as f64).ln();
        if !(v > prev) {
            return Err(Error::Precondition(format!("phi(n)/n is not strictly increasing at n = {n}")));
        }
        prev = v;
    }
    let mut out = Emitter::new();
    for n in 1..=terms {
        if (n as u64) < phi.n_min() {
            out.push_exact(BigUint::one());
            continue;
        }
        let v = phi.eval_x(XReal::from_f64(n as f64))?;
        let nf = n as f64;
        match v {
            XReal::Plain(x) if x < 1.0e30 => {
                let s = x.sqrt();
                let t = (x / nf).sqrt();
                let a = ((s - t).floor() + 1.0).max(1.0);
                if a > s + t {
                    return Err(Error::Construction { n: n as u64, msg: "window (s-t, s+t] contains no integer".into() });
                }
                out.push_exact(BigUint::from(a as u64));
            }
            _ => {
                // ln(s − t) = ln s + ln(1 − 1/√n); the window is wide here
                let ls = 0.5 * v.ln_abs();
                let l_lo = ls + (-(1.0 / nf.sqrt())).ln_1p();
                out.push_ceil_ln(l_lo + 1e-12);
            }
        }
    }
    Ok(out.finish(format!("b-full:{}", phi.source()), 1, None))
}

/// Smallest `n` with `e^{αn/2}/n ≥ 2`.
pub fn upsilon_start(alpha: f64) -> usize {
    (1..).find(|&n| alpha * n as f64 / 2.0 - (n as f64).ln() >= LN_2).unwrap()
}

/// `a_n = ⌈e^{αn/2 − α/4}⌉` from `N₂` on, checked against the open window
/// `(e^{αn/2 − α/4}, e^{αn/2}(e^{−α/4} + 1/n))`; ones before `N₂`.
pub fn gen_upsilon(alpha: f64, terms: usize) -> Result<Generated> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let n2 = upsilon_start(alpha);
    let mut out = Emitter::new();
    for n in 1..=terms {
        if n < n2 {
            out.push_exact(BigUint::one());
            continue;
        }
        let nf = n as f64;
        let l_lo = alpha * nf / 2.0 - alpha / 4.0;
        let l_hi = alpha * nf / 2.0 + ((-alpha / 4.0).exp() + 1.0 / nf).ln();
        let before = out.log_a.len();
        out.push_ceil_ln(l_lo);
        let la = out.log_a[before];
        assert!(la >= l_lo - 1e-9 * l_lo.abs().max(1.0));
        if la >= l_hi {
            return Err(Error::Construction { n: n as u64, msg: "open window contains no integer".into() });
        }
    }
    Ok(out.finish(format!("upsilon:{alpha}"), n2, None))
}

/// `a_n = ⌈d_n⌉` from the first even `N₁` past which `d_n ≥ 2` and
/// `d_n / log φ(n−1) ≥ 3` hold throughout; ones before. `log d_n` follows
/// `log d_{n+1} = log(φ(n) − φ(n−1)) − log d_n`, `d_1 = 1`, `d_2 = φ(1)`.
pub fn gen_d_recursion(phi: &GrowthFn, terms: usize) -> Result<Generated> {
    if terms < 4 {
        return Err(Error::Precondition("at least four terms are required".into()));
    }
    let lphi = phi.log_of()?;
    let rep = estimate_rho(&lphi, DEFAULT_J_MAX)?;
    if !(rep.rho > 1.0) {
        return Err(Error::Domain(format!("the d-recursion needs log phi with index > 1, got {}", rep.rho)));
    }
    let lp = |n: usize| phi.log_eval(n as f64);
    let mut ld = vec![0.0, lp(1)?];
    for n in 2..=terms {
        let (a, b) = (lp(n)?, lp(n - 1)?);
        if !(a > b) {
            return Err(Error::Domain(format!("phi(n) - phi(n-1) <= 0 at n = {n}")));
        }
        ld.push(log_sub_exp(a, b) - ld[n - 1]);
    }
    // conditions at every n in [N₁, terms]
    let ok = |n: usize| -> Result<bool> {
        let l_tilde = lphi.log_eval((n - 1) as f64).unwrap_or(f64::NEG_INFINITY);
        Ok(ld[n - 1] >= LN_2 && ld[n - 1] - l_tilde >= 3f64.ln())
    };
    let mut n1 = None;
    for n in (2..=terms).rev() {
        if !ok(n)? {
            break;
        }
        if n % 2 == 0 {
            n1 = Some(n);
        }
    }
    let n1 = n1.ok_or_else(|| Error::Construction {
        n: terms as u64,
        msg: "the start conditions d_n >= 2, d_n/log phi(n-1) >= 3 never hold through the end".into(),
    })?;
    let mut out = Emitter::new();
    for n in 1..=terms {
        if n < n1 {
            out.push_exact(BigUint::one());
        } else {
            out.push_ceil_ln(ld[n - 1]);
        }
    }
    Ok(out.finish(format!("d-rec:{}", phi.source()), n1, Some(ld)))
}

/// Largest `n` for which `a_1..a_{n+1}` are exact.
pub fn last_exact_checkpoint(g: &Generated) -> usize {
    g.seq.len().saturating_sub(1)
}

/// `a_n` as f64 when small enough, for reporting.
pub fn quotient_f64(g: &Generated, n: usize) -> f64 {
    g.seq.quotients.get(n - 1).and_then(|a| a.to_f64()).unwrap_or(g.log_a[n - 1].exp())
}
