//! Floating-point helpers: logs of big integers, stable log-sums, a fixed-shape
//! summation tree and the Hurwitz zeta function.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use std::f64::consts::LN_2;

/// Natural log of a big unsigned integer; `-inf` for zero.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap() as f64;
    top.ln() + shift as f64 * LN_2
}

/// Integer close to `exp(ln_v)`.
///
/// Exact to the nearest integer while the value is below 2^52; beyond that
/// the relative error is that of the f64 argument.
pub fn big_from_ln(ln_v: f64) -> BigUint {
    assert!(ln_v.is_finite(), "big_from_ln on non-finite log {ln_v}");
    if ln_v < 43.0 {
        let v = ln_v.exp().round();
        return BigUint::from(v.max(0.0) as u64);
    }
    let e = (ln_v / LN_2).floor() as u64 - 60;
    let m = (ln_v - e as f64 * LN_2).exp();
    BigUint::from(m as u64) << e
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when they are equal.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b);
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp_m1()).ln()
}

/// Sum with a balanced binary tree whose shape depends only on `xs.len()`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `ln Σ e^{x_i}` using [`pairwise_sum`] after shifting by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    let shifted: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    m + pairwise_sum(&shifted).ln()
}

// B_{2j} / (2j)!
const BERNOULLI_OVER_FACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (q+k)^{-s}` for `s > 1`, `q > 0`, by
/// Euler-Maclaurin summation after shifting `q` past 10.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta needs s > 1, q > 0");
    let mut head = 0.0;
    let mut a = q;
    while a < 10.0 {
        head += a.powf(-s);
        a += 1.0;
    }
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // rising factorial s(s+1)...(s+2j-2) times a^{-s-2j+1}
    let mut rising = s;
    let mut power = a.powf(-s - 1.0);
    let a2 = a * a;
    for (j, c) in BERNOULLI_OVER_FACT.iter().enumerate() {
        tail += c * rising * power;
        let k = 2.0 * j as f64 + 1.0;
        rising *= (s + k) * (s + k + 1.0);
        power /= a2;
    }
    head + tail
}

/// Riemann zeta for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ln_of_big_integers() {
        let x = BigUint::from(10u32).pow(400);
        assert!((ln_biguint(&x) - 400.0 * 10f64.ln()).abs() < 1e-10);
        assert_eq!(ln_biguint(&BigUint::from(1u32)), 0.0);
        assert_eq!(ln_biguint(&BigUint::zero()), f64::NEG_INFINITY);
    }

    #[test]
    fn big_from_ln_roundtrip() {
        assert_eq!(big_from_ln(17155f64.ln()), BigUint::from(17155u32));
        let x = big_from_ln(1000.0);
        assert!((ln_biguint(&x) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn log_sums() {
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + LN_2)).abs() < 1e-12);
        assert!((log_sub_exp(2f64.ln() + 5.0, 5.0) - 5.0).abs() < 1e-12);
        assert_eq!(log_sub_exp(3.0, 3.0), f64::NEG_INFINITY);
        let xs = [0.0, 1.0, 2.0];
        let direct = (1.0 + 1f64.exp() + 2f64.exp()).ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-13);
        // ζ(2, 1/2) = 3ζ(2)
        assert!((hurwitz_zeta(2.0, 0.5) - PI * PI / 2.0).abs() < 1e-12);
        // near the pole ζ(s) ≈ 1/(s-1) + γ
        let s = 1.001;
        assert!((zeta(s) - (1000.0 + 0.5772156649)).abs() < 1e-2);
        // ζ(s, q) - ζ(s, q+1) = q^{-s}
        let d = hurwitz_zeta(1.3, 7.25) - hurwitz_zeta(1.3, 8.25);
        assert!((d - 7.25f64.powf(-1.3)).abs() < 1e-14);
    }

    #[test]
    fn pairwise_matches_sequential_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }
}
