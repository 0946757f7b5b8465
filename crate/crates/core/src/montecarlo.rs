//! Monte-Carlo drivers for the almost-everywhere statements: sampling
//! uniform points, the `S_n − L_n` and `liminf L_n` normalisations, and
//! Gauss-Kuzmin digit frequencies.
//!
//! Sample `i` draws from ChaCha20 seeded with `seed` on stream `i`, so
//! every sample is independent of the worker count. Summaries use medians
//! because `L_n` and `S_n` have no finite mean.

use crate::cf::{expand_fractions, QuotientSequence, Source};
use crate::error::{Error, Result};
use crate::numerics::ln_biguint;
use crate::stats::ProductTracker;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_PRECISION_BITS: u64 = 64;
/// Bits drawn per requested quotient. Typical `log q_n ≈ 1.19 n`, so the
/// order-`n` cylinder has width about `e^{-2.37 n} ≈ 2^{-3.43 n}`.
pub const BITS_PER_QUOTIENT: u64 = 4;
pub const MAX_DOUBLINGS: u32 = 5;
/// Quotients skipped per sample before counting digit frequencies.
pub const BURN_IN: usize = 16;
pub const RECOMMENDED_SAMPLES: usize = 30;

/// `1/(2 log 2)`.
pub fn target_constant() -> f64 {
    1.0 / (2.0 * std::f64::consts::LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Expansion of a uniform dyadic interval.
    Exact,
    /// Independent Gauss-Kuzmin quotients; approximate, since quotients
    /// under the Gauss measure are not independent.
    IidGaussKuzmin,
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOpts {
    pub precision_bits: u64,
    pub mode: SampleMode,
}

impl Default for SampleOpts {
    fn default() -> Self {
        SampleOpts { precision_bits: DEFAULT_PRECISION_BITS, mode: SampleMode::Exact }
    }
}

fn rng_for(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_bits(rng: &mut ChaCha20Rng, bits: u64) -> BigUint {
    let mut bytes = vec![0u8; bits.div_ceil(8) as usize];
    rng.fill_bytes(&mut bytes);
    let m = BigUint::from_bytes_le(&bytes);
    m >> (bytes.len() as u64 * 8 - bits)
}

/// A uniform point to `n_terms` quotients (stream 0 of `seed`).
pub fn random_point(seed: u64, n_terms: usize) -> Result<QuotientSequence> {
    sample_point(seed, 0, n_terms, DEFAULT_PRECISION_BITS)
}

/// Draw `B = 4 n_terms + precision_bits` bits, expand the dyadic interval
/// `[m/2^B, (m+1)/2^B]`, and append `B` more bits from the same stream
/// whenever the endpoints part before `n_terms` quotients.
pub fn sample_point(seed: u64, index: u64, n_terms: usize, precision_bits: u64) -> Result<QuotientSequence> {
    if n_terms == 0 {
        return Err(Error::Precondition("n_terms must be at least 1".into()));
    }
    let mut rng = rng_for(seed, index);
    let step = BITS_PER_QUOTIENT * n_terms as u64 + precision_bits;
    let mut bits = step;
    let mut m = draw_bits(&mut rng, bits);
    for doubling in 0..=MAX_DOUBLINGS {
        if !m.is_zero() {
            let den = BigUint::one() << bits;
            let (mut quotients, _) = expand_fractions(m.clone(), den.clone(), &m + 1u32, den.clone(), n_terms);
            if quotients.len() >= n_terms {
                quotients.truncate(n_terms);
                let lo = BigRational::new_raw(m.clone().into(), den.clone().into());
                let hi = BigRational::new_raw((&m + 1u32).into(), den.into());
                return Ok(QuotientSequence {
                    quotients,
                    source: Source::RealInterval { lo, hi, bits: Some(bits) },
                    exhausted_at: None,
                });
            }
        }
        if doubling == MAX_DOUBLINGS {
            break;
        }
        let extra = draw_bits(&mut rng, bits);
        m = (m << bits) | extra;
        bits *= 2;
    }
    Err(Error::PrecisionExhausted(format!(
        "sample {index}: {n_terms} quotients not determined after {MAX_DOUBLINGS} precision doublings"
    )))
}

/// `n` independent Gauss-Kuzmin quotients, `a = ⌊1/(2^u − 1)⌋`.
pub fn sample_iid(seed: u64, index: u64, n_terms: usize) -> Vec<BigUint> {
    let mut rng = rng_for(seed, index);
    (0..n_terms)
        .map(|_| {
            let u = loop {
                let u: f64 = rng.gen();
                if u > 0.0 {
                    break u;
                }
            };
            let a = (1.0 / (u.exp2() - 1.0)).floor().max(1.0);
            BigUint::from_f64(a).unwrap_or_else(BigUint::one)
        })
        .collect()
}

/// Apply `f` to the quotients of every sample, in sample order.
pub fn map_samples<T: Send>(
    seed: u64,
    samples: usize,
    n_terms: usize,
    opts: &SampleOpts,
    f: impl Fn(&[BigUint]) -> T + Sync,
) -> Result<Vec<T>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let qs = match opts.mode {
                SampleMode::Exact => sample_point(seed, i, n_terms, opts.precision_bits)?.quotients,
                SampleMode::IidGaussKuzmin => sample_iid(seed, i, n_terms),
            };
            Ok(f(&qs))
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    pub samples: usize,
    pub n: usize,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub median: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub q1: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub q3: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub iqr: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub target: f64,
    /// `median / target`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub ratio_to_target: f64,
    pub below_recommended: bool,
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl TrendSummary {
    fn from_values(values: Vec<f64>, n: usize) -> TrendSummary {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75));
        let target = target_constant();
        TrendSummary {
            samples: values.len(),
            n,
            median,
            q1,
            q3,
            iqr: q3 - q1,
            target,
            ratio_to_target: median / target,
            below_recommended: values.len() < RECOMMENDED_SAMPLES,
            values,
        }
    }
}

/// `(S_n − L_n) / (n (ln n)²)` for one point.
pub fn sll_value(qs: &[BigUint], n: usize) -> f64 {
    let mut t = ProductTracker::new();
    for i in 0..n {
        t.push(&qs[i], &qs[i + 1]);
    }
    let diff = t.s() - t.l();
    let nf = n as f64;
    diff.to_f64().unwrap_or(f64::INFINITY) / (nf * nf.ln().powi(2))
}

/// Running minimum of `L_m ln ln m / (m ln m)` over `m ∈ [⌈n/10⌉, n]`,
/// one entry per `m`.
pub fn liminf_l_trace(qs: &[BigUint], n: usize) -> Vec<f64> {
    let lo = n.div_ceil(10).max(3);
    let mut best = BigUint::zero();
    let mut log_best = f64::NEG_INFINITY;
    let mut run = f64::INFINITY;
    let mut out = Vec::with_capacity(n + 1 - lo);
    for m in 1..=n {
        let p = &qs[m - 1] * &qs[m];
        if p > best {
            log_best = ln_biguint(&p);
            best = p;
        }
        if m >= lo {
            let mf = m as f64;
            let v = (log_best + mf.ln().ln().ln() - mf.ln() - mf.ln().ln()).exp();
            run = run.min(v);
            out.push(run);
        }
    }
    out
}

fn check_n(n: usize) -> Result<()> {
    if n < 16 {
        return Err(Error::Precondition(format!("n must be at least 16, got {n}")));
    }
    Ok(())
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    Ok(())
}

pub fn sll_trend(samples: usize, n: usize, seed: u64) -> Result<TrendSummary> {
    sll_trend_with(samples, n, seed, &SampleOpts::default())
}

pub fn sll_trend_with(samples: usize, n: usize, seed: u64, opts: &SampleOpts) -> Result<TrendSummary> {
    check_samples(samples)?;
    check_n(n)?;
    let v = map_samples(seed, samples, n + 1, opts, |qs| sll_value(qs, n))?;
    Ok(TrendSummary::from_values(v, n))
}

pub fn liminf_l_trend(samples: usize, n: usize, seed: u64) -> Result<TrendSummary> {
    liminf_l_trend_with(samples, n, seed, &SampleOpts::default())
}

pub fn liminf_l_trend_with(samples: usize, n: usize, seed: u64, opts: &SampleOpts) -> Result<TrendSummary> {
    check_samples(samples)?;
    check_n(n)?;
    let v = map_samples(seed, samples, n + 1, opts, |qs| *liminf_l_trace(qs, n).last().unwrap())?;
    Ok(TrendSummary::from_values(v, n))
}

/// Both trends from one pass over the samples; identical to the separate calls.
pub fn both_trends(samples: usize, n: usize, seed: u64, opts: &SampleOpts) -> Result<(TrendSummary, TrendSummary)> {
    check_samples(samples)?;
    check_n(n)?;
    let v = map_samples(seed, samples, n + 1, opts, |qs| (sll_value(qs, n), *liminf_l_trace(qs, n).last().unwrap()))?;
    let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
    Ok((TrendSummary::from_values(a, n), TrendSummary::from_values(b, n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigitRow {
    pub k: u64,
    pub count: u64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub frequency: f64,
    /// `log₂(1 + 1/(k(k+2)))`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub expected: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub sigma: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub z: f64,
    pub within_3sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigitFreq {
    pub total: u64,
    pub burn_in: usize,
    pub rows: Vec<DigitRow>,
}

pub fn gauss_kuzmin(k: u64) -> f64 {
    let kf = k as f64;
    (1.0 + 1.0 / (kf * (kf + 2.0))).log2()
}

/// Frequencies of `a_i = k`, `k = 1..=k_max`, pooled over samples after a
/// burn-in of [`BURN_IN`] quotients each.
pub fn digit_freq(samples: usize, n: usize, seed: u64, k_max: u64, opts: &SampleOpts) -> Result<DigitFreq> {
    check_samples(samples)?;
    let counts = map_samples(seed, samples, n + BURN_IN, opts, |qs| count_digits(&qs[BURN_IN..], k_max))?;
    let mut total = vec![0u64; k_max as usize];
    for c in &counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(digit_rows(&total, (samples * n) as u64))
}

pub fn count_digits(qs: &[BigUint], k_max: u64) -> Vec<u64> {
    let mut c = vec![0u64; k_max as usize];
    for a in qs {
        if let Some(v) = a.to_u64() {
            if v >= 1 && v <= k_max {
                c[(v - 1) as usize] += 1;
            }
        }
    }
    c
}

pub fn digit_rows(counts: &[u64], total: u64) -> DigitFreq {
    let rows = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let k = i as u64 + 1;
            let p = gauss_kuzmin(k);
            let frequency = count as f64 / total as f64;
            let sigma = (p * (1.0 - p) / total as f64).sqrt();
            let z = (frequency - p) / sigma;
            DigitRow { k, count, frequency, expected: p, sigma, z, within_3sigma: z.abs() <= 3.0 }
        })
        .collect();
    DigitFreq { total, burn_in: BURN_IN, rows }
}
