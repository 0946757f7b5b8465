//! Pressure of the Gauss map, `P(θ) = lim (1/n) log Σ q_n^{-2θ}`, by two
//! independent estimators, and the root of `P(θ) = c(θ − 1/2)`.
//!
//! The cylinder estimator writes the partition sum through the reversed
//! convergent recursion: with `r_k = q_{k-1}/q_k`,
//! `Σ q_n^{-s} = F_n(0)` where `F_0 = 1` and
//! `F_k(r) = Σ_a (a+r)^{-s} F_{k-1}(1/(a+r))`. Every `F_k` is decreasing on
//! `[0, 1]`, so evaluating on a grid and rounding the argument to the
//! neighbouring nodes gives upper and lower envelopes. Sub- and
//! supermultiplicativity of `F_n(0)` and `F_n(1)` then bracket `P(θ)`.
//!
//! The operator estimator discretises the same transfer operator with
//! linear interpolation and takes the leading eigenvalue by power iteration.

use crate::error::{Error, Result};
use crate::numerics::{hurwitz_zeta, pairwise_sum};
use rayon::prelude::*;
use serde::Serialize;

/// Smallest admissible `θ`.
pub const THETA_MIN: f64 = 0.501;
pub const DEFAULT_BUDGET: u64 = 100_000_000;
pub const DEFAULT_GRID: usize = 512;
pub const MAX_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CylinderSum,
    TransferOperator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureEstimate {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub theta: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub lo: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub hi: f64,
    /// Point estimate inside `[lo, hi]`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub estimate: f64,
    pub depth_n: Option<usize>,
    pub alphabet_m: usize,
    pub grid: usize,
    pub method: Method,
    /// Contribution of quotients above `M` to `hi`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub tail_correction: f64,
    /// `hi − lo` for cylinder sums; Collatz-Wielandt spread for the operator.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub bracket_width: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta >= THETA_MIN) || !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be at least {THETA_MIN}, got {theta}")));
    }
    Ok(())
}

/// Exact `log Σ_{a ∈ {1..M}^n} q_n^{-2θ}` by depth-first enumeration.
pub fn cylinder_sum_exact(theta: f64, n: usize, m: usize, budget: u64) -> Result<f64> {
    check_theta(theta)?;
    if n == 0 || m == 0 {
        return Err(Error::Precondition("depth and alphabet must be positive".into()));
    }
    let leaves = (m as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if leaves > budget {
        return Err(Error::BudgetExceeded { required: leaves, budget });
    }
    let s = 2.0 * theta;
    fn dfs(depth: usize, q_prev: f64, q: f64, m: usize, s: f64, acc: &mut f64) {
        if depth == 0 {
            *acc += q.powf(-s);
            return;
        }
        for a in 1..=m {
            dfs(depth - 1, q, a as f64 * q + q_prev, m, s, acc);
        }
    }
    let parts: Vec<f64> = (1..=m)
        .into_par_iter()
        .map(|a1| {
            let mut acc = 0.0;
            dfs(n - 1, 1.0, a1 as f64, m, s, &mut acc);
            acc
        })
        .collect();
    Ok(pairwise_sum(&parts).ln())
}

/// Options for [`pressure_cylinder_with`].
#[derive(Debug, Clone, Copy)]
pub struct CylinderOpts {
    pub grid: usize,
    pub budget: u64,
    /// Include quotients above `M` through a Hurwitz-zeta tail.
    pub tail: bool,
}

impl Default for CylinderOpts {
    fn default() -> Self {
        CylinderOpts { grid: DEFAULT_GRID, budget: DEFAULT_BUDGET, tail: true }
    }
}

/// Envelopes of `F_k` on the grid `i/G`.
#[derive(Debug, Clone)]
pub(crate) struct Envelopes {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Upper envelope without the tail.
    pub upper_bare: Vec<f64>,
}

/// Envelopes at levels `n-1` and `n`.
pub(crate) fn cylinder_envelopes(theta: f64, n: usize, m: usize, opts: &CylinderOpts) -> (Envelopes, Envelopes) {
    let g = opts.grid;
    let s = 2.0 * theta;
    let gg = (g * g) as u64;
    // for node i and quotient a: weight and the cells bracketing 1/(a + i/G)
    let rows: Vec<Vec<(f64, usize, usize)>> = (0..=g)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / g as f64;
            (1..=m)
                .map(|a| {
                    let den = (a * g + i) as u64;
                    let j = (gg / den) as usize;
                    let jl = if gg % den == 0 { j } else { j + 1 };
                    ((a as f64 + x).powf(-s), j, jl.min(g))
                })
                .collect()
        })
        .collect();
    let tail: Vec<f64> = (0..=g)
        .map(|i| if opts.tail { hurwitz_zeta(s, (m + 1) as f64 + i as f64 / g as f64) } else { 0.0 })
        .collect();
    let tail_node = g.div_ceil(m + 1);
    let ones = vec![1.0; g + 1];
    let mut prev = Envelopes { lower: ones.clone(), upper: ones.clone(), upper_bare: ones };
    let mut cur = prev.clone();
    for _ in 0..n {
        let (lo, up, bare) = (&cur.lower, &cur.upper, &cur.upper_bare);
        let next: Vec<(f64, f64, f64)> = rows
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                let (mut l, mut u, mut b) = (0.0, 0.0, 0.0);
                for &(w, j, jl) in row {
                    u += w * up[j];
                    b += w * bare[j];
                    l += w * lo[jl];
                }
                (l + tail[i] * lo[tail_node], u + tail[i] * up[0], b)
            })
            .collect();
        let nxt = Envelopes {
            lower: next.iter().map(|t| t.0).collect(),
            upper: next.iter().map(|t| t.1).collect(),
            upper_bare: next.iter().map(|t| t.2).collect(),
        };
        prev = std::mem::replace(&mut cur, nxt);
    }
    (prev, cur)
}

/// Cylinder-sum estimate with the default grid, budget and tail.
pub fn pressure_cylinder(theta: f64, n: usize, m: usize) -> Result<PressureEstimate> {
    pressure_cylinder_with(theta, n, m, &CylinderOpts::default())
}

/// Bracket `[(1/n) log F_n(1), (1/n) log F_n(0)]` for `P(θ)`, with the
/// ratio `F_n(0)/F_{n-1}(0)` (averaged over both envelopes) as the point
/// estimate.
pub fn pressure_cylinder_with(theta: f64, n: usize, m: usize, opts: &CylinderOpts) -> Result<PressureEstimate> {
    check_theta(theta)?;
    if n == 0 || n > MAX_DEPTH {
        return Err(Error::Precondition(format!("depth must be in 1..={MAX_DEPTH}, got {n}")));
    }
    if m == 0 || opts.grid == 0 {
        return Err(Error::Precondition("alphabet and grid must be positive".into()));
    }
    let work = (n as u64).saturating_mul(opts.grid as u64 + 1).saturating_mul(m as u64);
    if work > opts.budget {
        return Err(Error::BudgetExceeded { required: work, budget: opts.budget });
    }
    let (prev, cur) = cylinder_envelopes(theta, n, m, opts);
    let g = opts.grid;
    let nf = n as f64;
    let lo = cur.lower[g].ln() / nf;
    let hi = cur.upper[0].ln() / nf;
    let estimate = if n == 1 {
        0.5 * (lo + hi)
    } else {
        let ru = (cur.upper[0] / prev.upper[0]).ln();
        let rl = (cur.lower[0] / prev.lower[0]).ln();
        (0.5 * (ru + rl)).clamp(lo, hi)
    };
    Ok(PressureEstimate {
        theta,
        lo,
        hi,
        estimate,
        depth_n: Some(n),
        alphabet_m: m,
        grid: g,
        method: Method::CylinderSum,
        tail_correction: (cur.upper[0].ln() - cur.upper_bare[0].ln()) / nf,
        bracket_width: hi - lo,
    })
}

/// Options for [`pressure_operator_with`].
#[derive(Debug, Clone, Copy)]
pub struct OperatorOpts {
    pub grid: usize,
    pub iters: usize,
    /// Fold quotients above `max(M, G)` into the first cell via Hurwitz zeta.
    pub tail: bool,
}

impl Default for OperatorOpts {
    fn default() -> Self {
        OperatorOpts { grid: 128, iters: 500, tail: true }
    }
}

pub const SPREAD_LIMIT: f64 = 1e-6;

/// Transfer-operator estimate over the alphabet `1..=M` only.
pub fn pressure_operator(theta: f64, m: usize, grid: usize, iters: usize) -> Result<PressureEstimate> {
    pressure_operator_with(theta, m, &OperatorOpts { grid, iters, tail: false })
}

fn operator_matrix(theta: f64, m: usize, opts: &OperatorOpts) -> Vec<f64> {
    let g = opts.grid;
    let s = 2.0 * theta;
    let m_eff = if opts.tail { m.max(g) } else { m };
    let gf = g as f64;
    (0..=g)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = i as f64 / gf;
            let mut row = vec![0.0; g + 1];
            for a in 1..=m_eff {
                let y = 1.0 / (a as f64 + x);
                let t = y * gf;
                let j = (t.floor() as usize).min(g - 1);
                let fr = t - j as f64;
                let w = (a as f64 + x).powf(-s);
                row[j] += w * (1.0 - fr);
                row[j + 1] += w * fr;
            }
            if opts.tail {
                let q = (m_eff + 1) as f64 + x;
                let z1 = hurwitz_zeta(s + 1.0, q);
                row[0] += hurwitz_zeta(s, q) - gf * z1;
                row[1] += gf * z1;
            }
            row
        })
        .collect()
}

/// Leading eigenvalue of the interpolated operator; `lo = hi = log λ`.
pub fn pressure_operator_with(theta: f64, m: usize, opts: &OperatorOpts) -> Result<PressureEstimate> {
    check_theta(theta)?;
    if m == 0 || opts.grid < 2 || opts.iters == 0 {
        return Err(Error::Precondition("alphabet, iterations and grid (>= 2) must be positive".into()));
    }
    let g = opts.grid;
    let a = operator_matrix(theta, m, opts);
    let mut f = vec![1.0; g + 1];
    let mut spread = f64::INFINITY;
    let mut log_lambda = 0.0;
    for _ in 0..opts.iters {
        let next: Vec<f64> = a
            .par_chunks(g + 1)
            .map(|row| row.iter().zip(&f).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
        for (u, v) in next.iter().zip(&f) {
            let r = u / v;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        spread = (rmax / rmin).ln();
        log_lambda = 0.5 * (rmax.ln() + rmin.ln());
        let top = next.iter().cloned().fold(0.0, f64::max);
        f = next.into_iter().map(|v| v / top).collect();
        if spread <= 1e-13 {
            break;
        }
    }
    if !(spread <= SPREAD_LIMIT) {
        return Err(Error::NonConvergence { spread, iters: opts.iters });
    }
    let tail_correction = 0.0;
    Ok(PressureEstimate {
        theta,
        lo: log_lambda,
        hi: log_lambda,
        estimate: log_lambda,
        depth_n: None,
        alphabet_m: m,
        grid: g,
        method: Method::TransferOperator,
        tail_correction,
        bracket_width: spread,
    })
}

/// One rung of the refinement ladder used by [`solve_theta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Level {
    pub cyl_depth: usize,
    pub cyl_alphabet: usize,
    pub cyl_grid: usize,
    pub op_alphabet: usize,
    pub op_grid: usize,
}

pub const LEVELS: [Level; 3] = [
    Level { cyl_depth: 8, cyl_alphabet: 100, cyl_grid: 512, op_alphabet: 200, op_grid: 128 },
    Level { cyl_depth: 10, cyl_alphabet: 200, cyl_grid: 1024, op_alphabet: 400, op_grid: 256 },
    Level { cyl_depth: 12, cyl_alphabet: 400, cyl_grid: 2048, op_alphabet: 800, op_grid: 512 },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaSolution {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub c: f64,
    /// Root from the cylinder estimator.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub theta: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub theta_operator: f64,
    /// `P̂(θ) − c(θ − 1/2)` at the reported root.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub residual: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub bracket_width: f64,
    pub level: Level,
    pub warnings: Vec<String>,
}

/// Bisection on a decreasing function over `[THETA_MIN, 1]`.
fn bisect(f: &dyn Fn(f64) -> Result<f64>, width: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = (THETA_MIN, 1.0);
    let fa = f(a)?;
    let fb = f(b)?;
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::NoSignChange(format!(
            "F({a}) = {fa:.6}, F({b}) = {fb:.6}; the root is outside the bracket or the estimator is too coarse"
        )));
    }
    while b - a > width {
        let mid = 0.5 * (a + b);
        if f(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b), b - a))
}

/// Root of `P(θ) = c(θ − 1/2)` on `(1/2, 1)`.
///
/// Both estimators are bisected at increasing resolution until each root
/// moves by less than `tol`; the two roots must then agree within `2·tol`.
pub fn solve_theta(c: f64, tol: f64) -> Result<ThetaSolution> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    if !(tol >= 1e-4) {
        return Err(Error::Precondition(format!("tol must be at least 1e-4, got {tol}")));
    }
    let width = tol / 16.0;
    let mut warnings = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    let mut result = None;
    for (k, lv) in LEVELS.iter().enumerate() {
        let cyl_opts = CylinderOpts { grid: lv.cyl_grid, ..CylinderOpts::default() };
        let op_opts = OperatorOpts { grid: lv.op_grid, ..OperatorOpts::default() };
        let f_cyl = |t: f64| -> Result<f64> {
            Ok(pressure_cylinder_with(t, lv.cyl_depth, lv.cyl_alphabet, &cyl_opts)?.estimate - c * (t - 0.5))
        };
        let f_op = |t: f64| -> Result<f64> {
            Ok(pressure_operator_with(t, lv.op_alphabet, &op_opts)?.estimate - c * (t - 0.5))
        };
        let (tc, wc) = bisect(&f_cyl, width)?;
        let (to, _) = bisect(&f_op, width)?;
        let stable = matches!(last, Some((pc, po)) if (tc - pc).abs() < tol && (to - po).abs() < tol);
        result = Some((tc, to, wc, *lv, f_cyl(tc)?));
        if stable {
            break;
        }
        if k + 1 == LEVELS.len() {
            warnings.push("refinement ladder exhausted before successive roots agreed within tol".into());
        }
        last = Some((tc, to));
    }
    let (tc, to, wc, level, residual) = result.expect("at least one level");
    if (tc - to).abs() > 2.0 * tol {
        return Err(Error::EstimatorDisagreement { cylinder: tc, operator: to, allowed: 2.0 * tol });
    }
    if tc < THETA_MIN + 10.0 * tol {
        warnings.push(format!("root lies within {} of the singularity at 1/2", THETA_MIN - 0.5 + 10.0 * tol));
    }
    Ok(ThetaSolution { c, theta: tc, theta_operator: to, residual, bracket_width: wc, level, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::zeta;

    #[test]
    fn exact_sum_small() {
        // depth 1: Σ_{a≤M} a^{-2}
        let v = cylinder_sum_exact(1.0, 1, 1000, DEFAULT_BUDGET).unwrap();
        let direct: f64 = (1..=1000).map(|a| (a as f64).powi(-2)).sum();
        assert!((v - direct.ln()).abs() < 1e-14);
        assert!(matches!(
            cylinder_sum_exact(1.0, 8, 100, DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { required: 10_000_000_000_000_000, .. })
        ));
    }

    #[test]
    fn envelopes_bracket_exact_truncated_sum() {
        for &(theta, n, m) in &[(1.0, 3, 20), (0.6, 4, 12), (0.8, 2, 50)] {
            let exact = cylinder_sum_exact(theta, n, m, DEFAULT_BUDGET).unwrap();
            let opts = CylinderOpts { grid: 64, tail: false, ..Default::default() };
            let (_, env) = cylinder_envelopes(theta, n, m, &opts);
            assert!(env.lower[0].ln() <= exact + 1e-12 && exact <= env.upper[0].ln() + 1e-12);
        }
    }

    #[test]
    fn depth_one_matches_zeta() {
        let p = pressure_cylinder(1.0, 1, 100).unwrap();
        assert!((p.hi - zeta(2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn anchor_at_one() {
        let p = pressure_cylinder(1.0, 8, 100).unwrap();
        assert!(p.lo <= 0.0 && 0.0 <= p.hi, "{p:?}");
        assert!(p.bracket_width <= 0.15);
        assert!(p.estimate.abs() < 1e-3);
    }

    #[test]
    fn operator_examples() {
        let p = pressure_operator(1.0, 1, 128, 500).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((p.estimate - 2.0 * golden.ln()).abs() < 1e-3, "{}", p.estimate);
        let p = pressure_operator(1.0, 10_000, 512, 500).unwrap();
        assert!(p.estimate.abs() <= 0.01, "{}", p.estimate);
    }

    #[test]
    fn estimators_agree() {
        let a = pressure_operator_with(0.75, 200, &OperatorOpts::default()).unwrap();
        let b = pressure_cylinder(0.75, 10, 200).unwrap();
        assert!((a.estimate - b.estimate).abs() < 0.05);
    }

    #[test]
    fn theta_examples() {
        let t = solve_theta(1.0, 5e-3).unwrap();
        assert!(t.theta > 0.5 && t.theta < 1.0);
        assert!((t.theta - t.theta_operator).abs() <= 1e-2);
        assert!(solve_theta(0.01, 5e-3).unwrap().theta >= 0.98);
        assert!(solve_theta(100.0, 5e-3).unwrap().theta <= 0.52 + 0.01);
        assert!(matches!(solve_theta(-1.0, 5e-3), Err(Error::Domain(_))));
    }
}
