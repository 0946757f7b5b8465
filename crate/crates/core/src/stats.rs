//! Products of consecutive partial quotients: `L_n = max a_i a_{i+1}`,
//! `S_n = Σ a_i a_{i+1}` (both over `i ≤ n`), the Dirichlet-improvability
//! test, and small combinatorial oracles.

use crate::cf::convergents;
use crate::error::{Error, Result};
use crate::growth::{GrowthFn, XReal};
use crate::numerics::{ln_biguint, pairwise_sum};
use crate::report::fmt12;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::fmt::Write as _;

fn ser_big<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductStats {
    pub n: usize,
    #[serde(serialize_with = "ser_big")]
    pub l_n: BigUint,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub log_l_n: f64,
    #[serde(serialize_with = "ser_big")]
    pub s_n: BigUint,
    /// Smallest `i` with `a_i a_{i+1} = L_n`.
    pub argmax_index: usize,
    /// `max_{i≤n} a_i`.
    #[serde(serialize_with = "ser_big")]
    pub t_n: BigUint,
}

/// Streaming `L_n`, `S_n`, argmax and `T_n`.
#[derive(Debug, Clone, Default)]
pub struct ProductTracker {
    n: usize,
    l: BigUint,
    s: BigUint,
    argmax: usize,
    t: BigUint,
}

impl ProductTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advance from `n-1` to `n` given `a_n` and `a_{n+1}`.
    pub fn push(&mut self, a_n: &BigUint, a_next: &BigUint) {
        self.n += 1;
        let p = a_n * a_next;
        if self.n == 1 || p > self.l {
            self.l = p.clone();
            self.argmax = self.n;
        }
        self.s += p;
        if *a_n > self.t {
            self.t = a_n.clone();
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> &BigUint {
        &self.l
    }

    pub fn s(&self) -> &BigUint {
        &self.s
    }

    pub fn snapshot(&self) -> ProductStats {
        ProductStats {
            n: self.n,
            l_n: self.l.clone(),
            log_l_n: ln_biguint(&self.l),
            s_n: self.s.clone(),
            argmax_index: self.argmax,
            t_n: self.t.clone(),
        }
    }
}

fn need(qs: &[BigUint], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    if qs.len() < n + 1 {
        return Err(Error::InsufficientQuotients { needed: n + 1, available: qs.len() });
    }
    Ok(())
}

/// Exact statistics at `n`; needs `n+1` quotients.
pub fn product_stats(qs: &[BigUint], n: usize) -> Result<ProductStats> {
    need(qs, n)?;
    let mut t = ProductTracker::new();
    for i in 0..n {
        t.push(&qs[i], &qs[i + 1]);
    }
    Ok(t.snapshot())
}

/// `log L_n` for `n = 1..=N`.
pub fn log_l_series(qs: &[BigUint], n: usize) -> Result<Vec<f64>> {
    need(qs, n)?;
    let mut out = Vec::with_capacity(n);
    let mut best = BigUint::zero();
    let mut log_best = f64::NEG_INFINITY;
    for i in 0..n {
        let p = &qs[i] * &qs[i + 1];
        if p > best {
            log_best = ln_biguint(&p);
            best = p;
        }
        out.push(log_best);
    }
    Ok(out)
}

/// `(n, L_n/φ(n))` for `n = max(1, n_min)..=N`, computed as
/// `exp(log L_n − log φ(n))`.
pub fn ratio_track(qs: &[BigUint], phi: &GrowthFn, n: usize) -> Result<Vec<(usize, f64)>> {
    let logs = log_l_series(qs, n)?;
    let skip = (phi.n_min() as usize).saturating_sub(1);
    logs.iter()
        .enumerate()
        .skip(skip)
        .map(|(i, &ll)| {
            let m = i + 1;
            let lp = phi.log_eval(m as f64)?;
            Ok((m, (ll - lp).exp()))
        })
        .collect()
}

/// Indices where the Dirichlet product test fires.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletReport {
    pub hits: Vec<usize>,
    /// Within the log-domain guard band; not decided either way.
    pub borderline: Vec<usize>,
    pub outer: bool,
}

pub const DIRICHLET_BAND: f64 = 1e-12;

/// Indices `n ≤ N` with `a_n a_{n+1} ≥ x/(1−x)` where `x = q_n Ψ(q_n)`
/// (threshold divided by 4 when `outer`).
pub fn dirichlet_report(qs: &[BigUint], psi: &GrowthFn, n: usize, outer: bool) -> Result<DirichletReport> {
    need(qs, n)?;
    let convs = convergents(qs, n)?;
    let mut hits = Vec::new();
    let mut borderline = Vec::new();
    for (i, c) in convs.iter().enumerate() {
        let m = i + 1;
        let q = match &c.q {
            Some(q) if q.bits() < 1000 => XReal::from_f64(q.to_f64().unwrap()),
            _ => XReal::from_ln(c.log_q),
        };
        let x = q.mul(psi.eval_x(q)?);
        let xf = x.to_f64();
        if x.signum() <= 0 || xf >= 1.0 {
            return Err(Error::Domain(format!("q_n Psi(q_n) is not in (0, 1) at n = {m}")));
        }
        let scale: f64 = if outer { 4.0 } else { 1.0 };
        let ln_thr = x.ln_abs() - (-xf).ln_1p() - scale.ln();
        let p = &qs[i] * &qs[i + 1];
        let ln_p = ln_biguint(&p);
        let d = ln_p - ln_thr;
        let thr = xf / ((1.0 - xf) * scale);
        let plain = matches!(x, XReal::Plain(_)) && thr.is_finite() && thr > 0.0 && p.bits() <= 53;
        if plain && p.to_f64().unwrap() >= thr {
            hits.push(m);
        } else if d.abs() <= DIRICHLET_BAND {
            borderline.push(m);
        } else if !plain && d > 0.0 {
            hits.push(m);
        }
    }
    Ok(DirichletReport { hits, borderline, outer })
}

/// Ordered pairs `(a, b)` with `ab = n`, i.e. the number of divisors.
pub fn divisor_count(n: u64) -> u64 {
    assert!(n >= 1, "divisor_count needs n >= 1");
    let mut m = n;
    let mut count = 1;
    let mut p = 2u64;
    while p * p <= m {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        count *= e + 1;
        p += if p == 2 { 1 } else { 2 };
    }
    if m > 1 {
        count *= 2;
    }
    count
}

pub const COMPOSITION_LIMIT: f64 = 1e7;

fn binomial_f64(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ ∏ i_k^{-2s}` over compositions `i_1 + ... + i_n = m`, by enumeration.
pub fn composition_sum(m: u64, n: u64, s: f64) -> Result<f64> {
    if n < 1 || m < n {
        return Err(Error::Precondition(format!("composition_sum needs m >= n >= 1 (m = {m}, n = {n})")));
    }
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::Precondition(format!("composition_sum needs s in (1/2, 1), got {s}")));
    }
    let count = binomial_f64(m - 1, n - 1);
    if count > COMPOSITION_LIMIT {
        return Err(Error::Size(format!("{count} compositions exceed the limit of 10^7")));
    }
    let w: Vec<f64> = (0..=m).map(|i| (i as f64).powf(-2.0 * s)).collect();
    fn go(left: u64, parts: u64, prod: f64, w: &[f64], acc: &mut f64) {
        if parts == 1 {
            *acc += prod * w[left as usize];
            return;
        }
        for i in 1..=left - (parts - 1) {
            go(left - i, parts - 1, prod * w[i as usize], w, acc);
        }
    }
    let mut acc = 0.0;
    go(m, n, 1.0, &w, &mut acc);
    Ok(acc)
}

/// The bound `(9/2 (2 + ζ(2s)))^n m^{-2s}`.
pub fn composition_bound(m: u64, n: u64, s: f64) -> f64 {
    (4.5 * (2.0 + crate::numerics::zeta(2.0 * s))).powi(n as i32) * (m as f64).powf(-2.0 * s)
}

/// `n!` exactly.
pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// `ln n!`: exact integer for `n ≤ 170`, pairwise sum of logs beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 170 {
        ln_biguint(&factorial(n))
    } else {
        let logs: Vec<f64> = (2..=n).map(|k| (k as f64).ln()).collect();
        pairwise_sum(&logs)
    }
}

/// `(ln lower, ln n!, ln upper)` for `√(2π) n^{n+1/2} e^{-n} ≤ n! ≤ e n^{n+1/2} e^{-n}`.
pub fn stirling_sandwich(n: u64) -> (f64, f64, f64) {
    let x = n as f64;
    let core = (x + 0.5) * x.ln() - x;
    (0.5 * (2.0 * std::f64::consts::PI).ln() + core, ln_factorial(n), 1.0 + core)
}

/// CSV rows `n,L_n,S_n,argmax,ratio` for `n = 1..=N`; `ratio` is empty
/// without a growth function.
pub fn stats_csv(qs: &[BigUint], n: usize, phi: Option<&GrowthFn>) -> Result<String> {
    need(qs, n)?;
    let mut out = String::from("n,L_n,S_n,argmax,ratio\n");
    let mut t = ProductTracker::new();
    for i in 0..n {
        t.push(&qs[i], &qs[i + 1]);
        let ratio = match phi {
            Some(f) if (i + 1) as u64 >= f.n_min() => fmt12((ln_biguint(t.l()) - f.log_eval((i + 1) as f64)?).exp()),
            _ => String::new(),
        };
        writeln!(out, "{},{},{},{},{}", i + 1, t.l, t.s, t.argmax, ratio).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::big;

    #[test]
    fn product_examples() {
        let s = product_stats(&big(&[1, 2, 3, 4, 5]), 4).unwrap();
        assert_eq!((s.l_n, s.s_n, s.argmax_index), (BigUint::from(20u32), BigUint::from(40u32), 4));
        let s = product_stats(&big(&[1; 11]), 10).unwrap();
        assert_eq!((s.l_n, s.s_n, s.argmax_index), (BigUint::one(), BigUint::from(10u32), 1));
        let s = product_stats(&big(&[3, 1, 4, 1, 5]), 4).unwrap();
        assert_eq!((s.l_n, s.s_n, s.argmax_index), (BigUint::from(5u32), BigUint::from(16u32), 4));
        assert_eq!(s.t_n, BigUint::from(4u32));
        assert!(matches!(
            product_stats(&big(&[1, 2]), 2),
            Err(Error::InsufficientQuotients { needed: 3, available: 2 })
        ));
    }

    #[test]
    fn argmax_ties_go_left() {
        let s = product_stats(&big(&[2, 2, 1, 4, 1]), 4).unwrap();
        assert_eq!(s.argmax_index, 1);
    }

    #[test]
    fn ratio_examples() {
        let ones = big(&[1; 21]);
        for (_, r) in ratio_track(&ones, &GrowthFn::parse("1").unwrap(), 20).unwrap() {
            assert_eq!(r, 1.0);
        }
        let qs: Vec<BigUint> = (1..=31u64).map(BigUint::from).collect();
        for (_, r) in ratio_track(&qs, &GrowthFn::parse("n*(n+1)").unwrap(), 30).unwrap() {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_examples() {
        let golden = big(&[1; 31]);
        let psi = GrowthFn::parse("0.5/t").unwrap();
        let r = dirichlet_report(&golden, &psi, 30, false).unwrap();
        let mut all: Vec<usize> = r.hits.iter().chain(&r.borderline).cloned().collect();
        all.sort();
        assert_eq!(all, (1..=30).collect::<Vec<_>>());
        let r = dirichlet_report(&golden, &psi, 30, true).unwrap();
        assert_eq!(r.hits, (1..=30).collect::<Vec<_>>());
        let qs = big(&[2, 1, 3, 1, 1, 7, 2, 1, 1, 4, 1]);
        let r = dirichlet_report(&qs, &GrowthFn::parse("1/(2*t^2)").unwrap(), 10, false).unwrap();
        assert_eq!(r.hits, (1..=10).collect::<Vec<_>>());
        assert!(matches!(
            dirichlet_report(&golden, &GrowthFn::parse("2/t").unwrap(), 5, false),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(divisor_count(6), 4);
        assert_eq!(divisor_count(1), 1);
        assert_eq!(divisor_count(12), 6);
        assert_eq!(divisor_count(97), 2);
        assert_eq!(divisor_count(1 << 20), 21);
    }

    #[test]
    fn composition_examples() {
        let v = composition_sum(3, 2, 0.75).unwrap();
        assert!((v - 2.0 / 2f64.powf(1.5)).abs() < 1e-15);
        assert_eq!(composition_sum(7, 7, 0.6).unwrap(), 1.0);
        assert!(composition_sum(30, 4, 0.75).unwrap() <= composition_bound(30, 4, 0.75));
        assert!(matches!(composition_sum(200, 10, 0.75), Err(Error::Size(_))));
        assert!(matches!(composition_sum(3, 4, 0.75), Err(Error::Precondition(_))));
    }

    #[test]
    fn stirling_small() {
        for n in 1..=170 {
            let (lo, f, hi) = stirling_sandwich(n);
            assert!(lo <= f && f <= hi, "n = {n}");
        }
    }

    #[test]
    fn csv_rows() {
        let csv = stats_csv(&big(&[3, 1, 4, 1, 5]), 4, None).unwrap();
        assert_eq!(csv.lines().nth(4).unwrap(), "4,5,16,4,");
    }
}
