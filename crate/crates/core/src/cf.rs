//! Exact continued-fraction expansion, convergents and cylinder intervals.

use crate::error::{Error, Result};
use crate::numerics::{ln_biguint, log_add_exp};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use serde_json::{json, Number, Value};
use std::str::FromStr;

/// Default cap on exact integers, in decimal digits.
pub const DEFAULT_DIGIT_CAP: u64 = 100_000;

/// Bit length corresponding to a decimal digit cap.
pub fn cap_bits(digit_cap: u64) -> u64 {
    (digit_cap as f64 * std::f64::consts::LOG2_10).ceil() as u64
}

/// Where a quotient sequence came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Rational { p: BigUint, q: BigUint },
    RealInterval { lo: BigRational, hi: BigRational, bits: Option<u64> },
    Generated { id: String },
}

/// Partial quotients `a_1, a_2, ...` with provenance.
///
/// `exhausted_at` is the 1-based index of the first quotient that could not be
/// determined from the available precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientSequence {
    pub quotients: Vec<BigUint>,
    pub source: Source,
    pub exhausted_at: Option<usize>,
}

impl QuotientSequence {
    pub fn generated(id: impl Into<String>, quotients: Vec<BigUint>) -> Self {
        QuotientSequence {
            quotients,
            source: Source::Generated { id: id.into() },
            exhausted_at: None,
        }
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }

    /// `a_i` with 1-based `i`.
    pub fn a(&self, i: usize) -> &BigUint {
        &self.quotients[i - 1]
    }

    pub fn to_json(&self) -> Value {
        let qs: Vec<Value> = self
            .quotients
            .iter()
            .map(|q| Value::Number(Number::from_str(&q.to_string()).expect("integer literal")))
            .collect();
        let source = match &self.source {
            Source::Rational { p, q } => json!({"kind": "rational", "p": p.to_string(), "q": q.to_string()}),
            Source::RealInterval { lo, hi, bits } => json!({
                "kind": "real-interval",
                "lo": lo.to_string(),
                "hi": hi.to_string(),
                "bits": bits,
            }),
            Source::Generated { id } => json!({"kind": "generated", "id": id}),
        };
        json!({"quotients": qs, "source": source, "exhausted_at": self.exhausted_at})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Precondition(format!("quotient sequence JSON: {m}"));
        let arr = v
            .get("quotients")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing quotients array"))?;
        let mut quotients = Vec::with_capacity(arr.len());
        for q in arr {
            let text = match q {
                Value::Number(n) => n.to_string(),
                Value::String(s) => s.clone(),
                _ => return Err(bad("quotient is not an integer")),
            };
            let a = BigUint::from_str(&text).map_err(|_| bad("quotient is not an integer"))?;
            if a.is_zero() {
                return Err(bad("quotient 0"));
            }
            quotients.push(a);
        }
        let src = v.get("source").cloned().unwrap_or(Value::Null);
        let field = |k: &str| src.get(k).and_then(Value::as_str).map(str::to_string);
        let source = match field("kind").as_deref() {
            Some("rational") => Source::Rational {
                p: field("p").and_then(|s| s.parse().ok()).ok_or_else(|| bad("rational p"))?,
                q: field("q").and_then(|s| s.parse().ok()).ok_or_else(|| bad("rational q"))?,
            },
            Some("real-interval") => Source::RealInterval {
                lo: field("lo").and_then(|s| s.parse().ok()).ok_or_else(|| bad("interval lo"))?,
                hi: field("hi").and_then(|s| s.parse().ok()).ok_or_else(|| bad("interval hi"))?,
                bits: src.get("bits").and_then(Value::as_u64),
            },
            _ => Source::Generated { id: field("id").unwrap_or_else(|| "input".into()) },
        };
        let exhausted_at = v.get("exhausted_at").and_then(Value::as_u64).map(|x| x as usize);
        Ok(QuotientSequence { quotients, source, exhausted_at })
    }
}

impl Serialize for QuotientSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Convenience conversion of machine integers into quotients.
pub fn big(v: &[u64]) -> Vec<BigUint> {
    v.iter().map(|&x| BigUint::from(x)).collect()
}

/// Canonical expansion of `p/q` in `(0, 1)`; the fraction is reduced first.
pub fn expand_rational(p: &BigUint, q: &BigUint) -> Result<QuotientSequence> {
    if p.is_zero() || p >= q {
        return Err(Error::Domain(format!("{p}/{q} is not in (0, 1)")));
    }
    let g = p.gcd(q);
    let (p, q) = (p / &g, q / &g);
    let mut quotients = Vec::new();
    let (mut num, mut den) = (p.clone(), q.clone());
    while !num.is_zero() {
        let (a, r) = den.div_rem(&num);
        quotients.push(a);
        den = num;
        num = r;
    }
    Ok(QuotientSequence { quotients, source: Source::Rational { p, q }, exhausted_at: None })
}

/// Quotients shared by every real in `[n_lo/d_lo, n_hi/d_hi]`.
///
/// Returns the quotients and the 1-based index where the endpoint expansions
/// first disagree, if that happens before `max_terms`.
///
/// Runs of quotients are taken from the leading 127 bits (Lehmer's method)
/// and kept only if the resulting cofactors leave both endpoint pairs as
/// valid Euclid states; otherwise one exact division step is taken.
pub(crate) fn expand_fractions(
    mut n_lo: BigUint,
    mut d_lo: BigUint,
    mut n_hi: BigUint,
    mut d_hi: BigUint,
    max_terms: usize,
) -> (Vec<BigUint>, Option<usize>) {
    let mut out = Vec::new();
    while out.len() < max_terms {
        let z_lo = n_lo.is_zero();
        let z_hi = n_hi.is_zero();
        if z_lo && z_hi {
            return (out, None);
        }
        if z_lo || z_hi {
            let k = out.len() + 1;
            return (out, Some(k));
        }
        if let Some(batch) = lehmer_batch(&d_lo, &n_lo, max_terms - out.len()) {
            if let (Some((x_lo, y_lo)), Some((x_hi, y_hi))) =
                (batch.apply(&d_lo, &n_lo), batch.apply(&d_hi, &n_hi))
            {
                out.extend(batch.quotients.iter().map(|&q| BigUint::from(q)));
                (d_lo, n_lo, d_hi, n_hi) = (x_lo, y_lo, x_hi, y_hi);
                continue;
            }
        }
        let (a_lo, r_lo) = d_lo.div_rem(&n_lo);
        let (a_hi, r_hi) = d_hi.div_rem(&n_hi);
        if a_lo != a_hi {
            let k = out.len() + 1;
            return (out, Some(k));
        }
        out.push(a_lo);
        d_lo = std::mem::replace(&mut n_lo, r_lo);
        d_hi = std::mem::replace(&mut n_hi, r_hi);
    }
    (out, None)
}

/// Quotients guessed from leading bits, with cofactors
/// `x = s0·d + t0·n`, `y = s1·d + t1·n` (one coefficient of each pair is
/// non-positive).
struct LehmerBatch {
    quotients: Vec<u64>,
    s0: i128,
    t0: i128,
    s1: i128,
    t1: i128,
}

impl LehmerBatch {
    /// The pair after the batch, if it is a valid Euclid state `0 < y < x`.
    fn apply(&self, d: &BigUint, n: &BigUint) -> Option<(BigUint, BigUint)> {
        let x = combine(self.s0, d, self.t0, n)?;
        let y = combine(self.s1, d, self.t1, n)?;
        (!y.is_zero() && y < x).then_some((x, y))
    }
}

/// `s·d + t·n` when it is non-negative; `s` and `t` have opposite signs.
fn combine(s: i128, d: &BigUint, t: i128, n: &BigUint) -> Option<BigUint> {
    let term = |c: i128, v: &BigUint| v * BigUint::from(c.unsigned_abs());
    match (s >= 0, t >= 0) {
        (true, true) => Some(term(s, d) + term(t, n)),
        (true, false) => {
            let (p, m) = (term(s, d), term(t, n));
            (p >= m).then(|| p - m)
        }
        (false, true) => {
            let (p, m) = (term(t, n), term(s, d));
            (p >= m).then(|| p - m)
        }
        (false, false) => None,
    }
}

const LEHMER_FLOOR: u128 = 1 << 64;

fn lehmer_batch(d: &BigUint, n: &BigUint, limit: usize) -> Option<LehmerBatch> {
    let bits = d.bits();
    if bits <= 128 {
        return None;
    }
    let shift = bits - 127;
    let mut x = (d >> shift).to_u128()?;
    let mut y = (n >> shift).to_u128()?;
    let (mut s0, mut t0, mut s1, mut t1) = (1i128, 0i128, 0i128, 1i128);
    let mut quotients = Vec::new();
    while quotients.len() < limit && y >= LEHMER_FLOOR {
        let q = x / y;
        let r = x - q * y;
        if r < LEHMER_FLOOR || q > u64::MAX as u128 {
            break;
        }
        let q = q as i128;
        (s0, t0, s1, t1) = (s1, t1, s0 - q * s1, t0 - q * t1);
        (x, y) = (y, r);
        quotients.push(q as u64);
    }
    (!quotients.is_empty()).then_some(LehmerBatch { quotients, s0, t0, s1, t1 })
}

fn to_unsigned(x: &BigInt) -> BigUint {
    x.to_biguint().expect("non-negative")
}

/// Expansion valid for every real in `[lo, hi]`.
pub fn expand_real(lo: &BigRational, hi: &BigRational, max_terms: usize) -> Result<QuotientSequence> {
    expand_real_with_bits(lo, hi, max_terms, None)
}

pub(crate) fn expand_real_with_bits(
    lo: &BigRational,
    hi: &BigRational,
    max_terms: usize,
    bits: Option<u64>,
) -> Result<QuotientSequence> {
    if !lo.is_positive() || lo > hi || hi >= &BigRational::one() {
        return Err(Error::Domain(format!("need 0 < lo <= hi < 1, got [{lo}, {hi}]")));
    }
    let (quotients, exhausted_at) = expand_fractions(
        to_unsigned(lo.numer()),
        to_unsigned(lo.denom()),
        to_unsigned(hi.numer()),
        to_unsigned(hi.denom()),
        max_terms,
    );
    Ok(QuotientSequence {
        quotients,
        source: Source::RealInterval { lo: lo.clone(), hi: hi.clone(), bits },
        exhausted_at,
    })
}

/// The rational `p_n/q_n` with the given quotients.
pub fn reconstruct(quotients: &[BigUint]) -> BigRational {
    let (p, q) = pq(quotients);
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// `(p_n, q_n)` by the forward recursion.
fn pq(quotients: &[BigUint]) -> (BigUint, BigUint) {
    let (p, q, _, _) = pq_pair(quotients);
    (p, q)
}

/// `(p_n, q_n, p_{n-1}, q_{n-1})`.
fn pq_pair(quotients: &[BigUint]) -> (BigUint, BigUint, BigUint, BigUint) {
    let (mut p1, mut p0) = (BigUint::one(), BigUint::zero());
    let (mut q1, mut q0) = (BigUint::zero(), BigUint::one());
    for a in quotients {
        let p = a * &p0 + &p1;
        let q = a * &q0 + &q1;
        p1 = std::mem::replace(&mut p0, p);
        q1 = std::mem::replace(&mut q0, q);
    }
    (p0, q0, p1, q1)
}

/// `p_n/q_n` with an exact pair while `q_n` is under the digit cap and
/// `log q_n` throughout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergent {
    #[serde(serialize_with = "ser_opt_big")]
    pub p: Option<BigUint>,
    #[serde(serialize_with = "ser_opt_big")]
    pub q: Option<BigUint>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub log_q: f64,
    pub index: usize,
}

fn ser_opt_big<S: Serializer>(x: &Option<BigUint>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

/// Convergents `k = 1..=n` with the default digit cap.
pub fn convergents(quotients: &[BigUint], n: usize) -> Result<Vec<Convergent>> {
    convergents_capped(quotients, n, DEFAULT_DIGIT_CAP)
}

/// Convergents `k = 1..=n`; exact integers are dropped once `q_k` exceeds
/// `digit_cap` decimal digits and `log q_k` continues by log-domain recursion.
pub fn convergents_capped(quotients: &[BigUint], n: usize, digit_cap: u64) -> Result<Vec<Convergent>> {
    if n > quotients.len() {
        return Err(Error::InsufficientQuotients { needed: n, available: quotients.len() });
    }
    let limit = cap_bits(digit_cap);
    let mut out = Vec::with_capacity(n);
    let (mut p1, mut p0) = (BigUint::one(), BigUint::zero());
    let (mut q1, mut q0) = (BigUint::zero(), BigUint::one());
    let (mut lq1, mut lq0) = (f64::NEG_INFINITY, 0.0f64);
    let mut exact = true;
    for (i, a) in quotients[..n].iter().enumerate() {
        if exact {
            let p = a * &p0 + &p1;
            let q = a * &q0 + &q1;
            if q.bits() > limit {
                exact = false;
            } else {
                p1 = std::mem::replace(&mut p0, p);
                q1 = std::mem::replace(&mut q0, q);
                lq1 = lq0;
                lq0 = ln_biguint(&q0);
                out.push(Convergent { p: Some(p0.clone()), q: Some(q0.clone()), log_q: lq0, index: i + 1 });
                continue;
            }
        }
        let lq = log_add_exp(ln_biguint(a) + lq0, lq1);
        lq1 = lq0;
        lq0 = lq;
        out.push(Convergent { p: None, q: None, log_q: lq0, index: i + 1 });
    }
    Ok(out)
}

/// The order-n cylinder `I_n(a_1..a_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub quotients: Vec<BigUint>,
    /// `p_n/q_n`
    pub endpoint_a: BigRational,
    /// `(p_n + p_{n-1})/(q_n + q_{n-1})`
    pub endpoint_b: BigRational,
    pub length: BigRational,
    pub log_length: f64,
}

impl Cylinder {
    pub fn order(&self) -> usize {
        self.quotients.len()
    }

    /// Left endpoint, which is `endpoint_a` for even `n`.
    pub fn left(&self) -> &BigRational {
        if self.order() % 2 == 0 {
            &self.endpoint_a
        } else {
            &self.endpoint_b
        }
    }

    pub fn right(&self) -> &BigRational {
        if self.order() % 2 == 0 {
            &self.endpoint_b
        } else {
            &self.endpoint_a
        }
    }

    /// Even order: `[a, b)`; odd order: `(b, a]`.
    pub fn left_closed(&self) -> bool {
        self.order() % 2 == 0
    }

    pub fn right_closed(&self) -> bool {
        self.order() % 2 == 1
    }

    /// Whether the real `x` lies in the cylinder, honouring open ends.
    pub fn contains(&self, x: &BigRational) -> bool {
        let above = if self.left_closed() { x >= self.left() } else { x > self.left() };
        let below = if self.right_closed() { x <= self.right() } else { x < self.right() };
        above && below
    }

    /// Exact check of `2^{-(2n+1)} Π a_k^{-2} <= |I_n| <= Π a_k^{-2}`.
    pub fn satisfies_length_sandwich(&self) -> bool {
        let n = self.order();
        let prod: BigUint = self.quotients.iter().fold(BigUint::one(), |acc, a| acc * a);
        let prod_sq = &prod * &prod;
        // |I_n| = 1/D with D = q_n (q_n + q_{n-1}) = length denominator
        let d = to_unsigned(self.length.denom());
        debug_assert!(self.length.numer().is_one());
        prod_sq <= d && d <= (prod_sq << (2 * n + 1))
    }
}

fn check_quotients(qs: &[BigUint]) -> Result<()> {
    if qs.is_empty() {
        return Err(Error::Precondition("cylinder needs at least one quotient".into()));
    }
    if qs.iter().any(Zero::is_zero) {
        return Err(Error::Domain("partial quotients must be >= 1".into()));
    }
    Ok(())
}

fn cylinder_capped(quotients: &[BigUint], digit_cap: u64) -> Result<Cylinder> {
    check_quotients(quotients)?;
    let (p, q, pm, qm) = pq_pair(quotients);
    let d = &q * (&q + &qm);
    if d.bits() > 2 * cap_bits(digit_cap) {
        return Err(Error::Overflow(format!("cylinder denominator exceeds {digit_cap} digits")));
    }
    let log_length = -ln_biguint(&d);
    let ratio = |a: BigUint, b: BigUint| BigRational::new(BigInt::from(a), BigInt::from(b));
    Ok(Cylinder {
        quotients: quotients.to_vec(),
        endpoint_a: ratio(p.clone(), q.clone()),
        endpoint_b: ratio(p + pm, q + qm),
        length: ratio(BigUint::one(), d),
        log_length,
    })
}

/// Cylinder with exact endpoints and length `1/(q_n(q_n + q_{n-1}))`.
pub fn cylinder(quotients: &[BigUint]) -> Result<Cylinder> {
    cylinder_capped(quotients, DEFAULT_DIGIT_CAP)
}

/// `|I_{n+k}(prefix‖suffix)| / (|I_n(prefix)| · |I_k(suffix)|)`.
pub fn distortion_ratio(prefix: &[BigUint], suffix: &[BigUint]) -> Result<f64> {
    if prefix.is_empty() || suffix.is_empty() {
        return Err(Error::Precondition("prefix and suffix must both be nonempty".into()));
    }
    let joined: Vec<BigUint> = prefix.iter().chain(suffix).cloned().collect();
    let whole = cylinder(&joined)?;
    let a = cylinder(prefix)?;
    let b = cylinder(suffix)?;
    let r = whole.length / (a.length * b.length);
    Ok(ratio_to_f64(&r))
}

/// Float value of a positive rational, through logs so huge parts are safe.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let n = to_unsigned(&r.numer().abs());
    let d = to_unsigned(r.denom());
    sign * (ln_biguint(&n) - ln_biguint(&d)).exp()
}
