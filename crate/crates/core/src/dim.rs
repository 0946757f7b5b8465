//! Dimension formulas: the Liao-Rams ratio, Cantor-set lower and covering
//! upper bounds, and routing of a growth function to its closed-form
//! dimension.
//!
//! Every liminf/limsup here is an estimator: a running extremum over the
//! second half `[N/2, N]` of the probe range.

use crate::error::{Error, Result};
use crate::growth::{beta, beta_simplified, estimate_rho_with, Expr, Func, GrowthFn, Op, RegVarReport};
use crate::pressure::{solve_theta, ThetaSolution};
use serde::Serialize;

/// A liminf or limsup read off a finite window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowEstimate {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    pub window: (usize, usize),
}

/// `log f(k)` for `k = 1..=n`.
pub fn log_values(f: &GrowthFn, n: usize) -> Result<Vec<f64>> {
    (1..=n).map(|k| f.log_eval(k as f64)).collect()
}

fn window_min(vals: impl Iterator<Item = (usize, f64)>, n: usize) -> WindowEstimate {
    let lo = n.div_ceil(2).max(1);
    let value = vals.filter(|(k, _)| *k >= lo && *k <= n).map(|(_, v)| v).fold(f64::INFINITY, f64::min);
    WindowEstimate { value, window: (lo, n) }
}

/// Smallest relative gap `(s − t)/s` accepted on the window.
pub const MIN_RELATIVE_GAP: f64 = 1e-3;

/// `liminf Σ_{k≤n} log t_k / (2 Σ_{k≤n+1} log s_k − log t_{n+1})` from
/// `log s_k`, `log t_k` for `k = 1..=N+1`.
pub fn liao_rams(log_s: &[f64], log_t: &[f64], n: usize) -> Result<WindowEstimate> {
    if n < 2 || log_s.len() < n + 1 || log_t.len() < n + 1 {
        return Err(Error::Precondition(format!("liao_rams needs N >= 2 and N+1 = {} terms", n + 1)));
    }
    for k in 0..=n {
        if !(log_t[k] < log_s[k]) {
            return Err(Error::Domain(format!("t_k >= s_k at k = {}", k + 1)));
        }
        if k + 1 >= n / 2 && -(log_t[k] - log_s[k]).exp_m1() < MIN_RELATIVE_GAP {
            return Err(Error::Domain(format!(
                "(s_k - t_k)/s_k falls below {MIN_RELATIVE_GAP} at k = {}; the window is degenerate",
                k + 1
            )));
        }
    }
    let mut sum_t = 0.0;
    let mut sum_s = log_s[0];
    let mut ratios = Vec::with_capacity(n);
    for m in 1..=n {
        sum_t += log_t[m - 1];
        sum_s += log_s[m];
        ratios.push((m, sum_t / (2.0 * sum_s - log_t[m])));
    }
    Ok(window_min(ratios.into_iter(), n))
}

/// [`liao_rams`] with `s`, `t` given as growth functions.
pub fn liao_rams_fn(s: &GrowthFn, t: &GrowthFn, n: usize) -> Result<WindowEstimate> {
    liao_rams(&log_values(s, n + 1)?, &log_values(t, n + 1)?, n)
}

/// `liminf log(m_1 ⋯ m_{n−1}) / −log(m_n θ_n)` for a Cantor set with `m_n`
/// children per level separated by gaps `θ_n`.
pub fn falconer_lower(log_m: &[f64], log_theta: &[f64], n: usize) -> Result<WindowEstimate> {
    if n < 2 || log_m.len() < n || log_theta.len() < n {
        return Err(Error::Precondition(format!("falconer_lower needs N >= 2 and {n} terms")));
    }
    for k in 0..n {
        if log_m[k] < 2f64.ln() - 1e-12 {
            return Err(Error::Domain(format!("m_n < 2 at n = {}", k + 1)));
        }
        if k > 0 && !(log_theta[k] < log_theta[k - 1]) {
            return Err(Error::Domain(format!("theta_n is not strictly decreasing at n = {}", k + 1)));
        }
    }
    let mut acc = 0.0;
    let mut vals = Vec::with_capacity(n);
    for k in 1..=n {
        let denom = -(log_m[k - 1] + log_theta[k - 1]);
        vals.push((k, if denom > 0.0 { acc / denom } else { f64::INFINITY }));
        acc += log_m[k - 1];
    }
    Ok(window_min(vals.into_iter(), n))
}

/// `liminf log n_k / −log δ_k` for covers by `n_k` sets of diameter `δ_k`.
pub fn covering_upper(log_counts: &[f64], log_diams: &[f64], k_max: usize) -> Result<WindowEstimate> {
    if k_max < 2 || log_counts.len() < k_max || log_diams.len() < k_max {
        return Err(Error::Precondition(format!("covering_upper needs K >= 2 and {k_max} terms")));
    }
    for k in 1..k_max {
        if !(log_diams[k] < log_diams[k - 1]) {
            return Err(Error::Domain(format!("diameters are not strictly decreasing at k = {}", k + 1)));
        }
    }
    let vals = (1..=k_max).map(|k| (k, log_counts[k - 1] / -log_diams[k - 1]));
    Ok(window_min(vals, k_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    #[serde(rename = "T1.2-case1")]
    T12Case1,
    #[serde(rename = "T1.2-case2")]
    T12Case2,
    #[serde(rename = "T1.2-case3")]
    T12Case3,
    #[serde(rename = "T1.3")]
    T13,
    #[serde(rename = "T1.4")]
    T14,
    #[serde(rename = "critical-unresolved")]
    CriticalUnresolved,
}

/// Parameters the routing used.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Inputs {
    #[serde(serialize_with = "crate::report::ser_opt_f64", skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(serialize_with = "crate::report::ser_opt_f64", skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_n: Option<usize>,
    #[serde(serialize_with = "crate::report::ser_opt_f64", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(serialize_with = "crate::report::ser_opt_f64", skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(serialize_with = "crate::report::ser_opt_f64", skip_serializing_if = "Option::is_none")]
    pub theta_operator: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimReport {
    /// `None` when the route is unresolved; see `candidates`.
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub value: Option<f64>,
    #[serde(serialize_with = "crate::report::ser_vec_f64")]
    pub candidates: Vec<f64>,
    pub theorem: Theorem,
    pub inputs: Inputs,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct DispatchOpts {
    pub critical_band: f64,
    pub j_max: u32,
    pub theta_tol: f64,
    pub beta_start: usize,
    pub beta_cap: usize,
    pub beta_tol: f64,
}

impl Default for DispatchOpts {
    fn default() -> Self {
        DispatchOpts {
            critical_band: crate::growth::DEFAULT_CRITICAL_BAND,
            j_max: crate::growth::DEFAULT_J_MAX,
            theta_tol: 5e-3,
            beta_start: 1024,
            beta_cap: 1 << 20,
            beta_tol: 1e-4,
        }
    }
}

/// β from doubling `N` until the estimate moves by at most `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveBeta {
    pub beta: f64,
    pub n: usize,
    pub stable: bool,
}

fn stable_pair(a: f64, b: f64, tol: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= tol
}

pub fn beta_adaptive(phi: &GrowthFn, start: usize, cap: usize, tol: f64) -> Result<AdaptiveBeta> {
    adaptive(|n| beta(phi, n).map(|b| b.beta), start, cap, tol)
}

pub fn beta_simplified_adaptive(phi: &GrowthFn, start: usize, cap: usize, tol: f64) -> Result<AdaptiveBeta> {
    adaptive(|n| beta_simplified(phi, n), start, cap, tol)
}

fn adaptive(f: impl Fn(usize) -> Result<f64>, start: usize, cap: usize, tol: f64) -> Result<AdaptiveBeta> {
    let mut n = start.max(2);
    let mut prev = f(n)?;
    while n * 2 <= cap {
        n *= 2;
        let cur = f(n)?;
        if stable_pair(prev, cur, tol) {
            return Ok(AdaptiveBeta { beta: cur, n, stable: true });
        }
        prev = cur;
    }
    Ok(AdaptiveBeta { beta: prev, n, stable: false })
}

/// `c` when `φ = exp(c·floor(sqrt(n)))` (in either factor order).
pub fn match_psi_sqrt(phi: &GrowthFn) -> Option<f64> {
    let is_floor_sqrt = |e: &Expr| match e {
        Expr::Call(Func::Floor, inner, _) => {
            matches!(&**inner, Expr::Call(Func::Sqrt, v, _) if matches!(**v, Expr::Var))
        }
        _ => false,
    };
    let Expr::Call(Func::Exp, inner, _) = phi.expr() else {
        return None;
    };
    if is_floor_sqrt(inner) {
        return Some(1.0);
    }
    if let Expr::Bin(Op::Mul, l, r) = &**inner {
        if is_floor_sqrt(r) {
            return l.const_value();
        }
        if is_floor_sqrt(l) {
            return r.const_value();
        }
    }
    None
}

/// Residuals `r − 1/2` over the upper half of the grid: `Some(sign)` when
/// they keep one sign and shrink in magnitude.
fn critical_trend(rep: &RegVarReport) -> Option<i32> {
    let est = &rep.rho_estimates;
    let tail = &est[est.len() / 2..];
    let d: Vec<f64> = tail.iter().map(|(_, r)| r - 0.5).collect();
    let sign = if d.iter().all(|&x| x > 1e-8) {
        1
    } else if d.iter().all(|&x| x < -1e-8) {
        -1
    } else {
        return None;
    };
    let decaying = d.windows(2).all(|w| w[1].abs() <= w[0].abs() * (1.0 + 1e-9));
    decaying.then_some(sign)
}

pub fn dispatch(phi: &GrowthFn) -> Result<DimReport> {
    dispatch_with(phi, &DispatchOpts::default())
}

/// Route `φ` to the applicable closed form.
///
/// Floor-bearing `exp(c·floor(sqrt(n)))` goes to the pressure equation.
/// Otherwise the index `ρ` of `log φ` decides: `ρ < 1/2 → 1`,
/// `1/2 < ρ ≤ 1 → 1/2`, `ρ > 1 → 1/(1+β)`. Inside the critical band the
/// sign of the slowly varying correction picks between the two
/// `ρ = 1/2` families, or the report stays unresolved.
pub fn dispatch_with(phi: &GrowthFn, opts: &DispatchOpts) -> Result<DimReport> {
    let mut inputs = Inputs::default();
    let mut warnings = Vec::new();
    if phi.has_floor() {
        let c = match_psi_sqrt(phi).ok_or_else(|| {
            Error::Domain(format!("'{}' is floor-bearing but not of the form exp(c*floor(sqrt(n)))", phi.source()))
        })?;
        let ThetaSolution { theta, theta_operator, warnings: w, .. } = solve_theta(c, opts.theta_tol)?;
        inputs.c = Some(c);
        inputs.theta = Some(theta);
        inputs.theta_operator = Some(theta_operator);
        return Ok(DimReport { value: Some(theta), candidates: vec![], theorem: Theorem::T14, inputs, warnings: w });
    }
    let lphi = phi.log_of()?;
    let rep = estimate_rho_with(&lphi, opts.j_max, opts.critical_band)?;
    inputs.rho = Some(rep.rho);
    let done = |value: f64, theorem, inputs, warnings| {
        Ok(DimReport { value: Some(value), candidates: vec![], theorem, inputs, warnings })
    };
    if rep.critical {
        return match critical_trend(&rep) {
            Some(1) => done(0.5, Theorem::T13, inputs, warnings),
            Some(_) => done(1.0, Theorem::T13, inputs, warnings),
            None => Ok(DimReport {
                value: None,
                candidates: vec![1.0, 0.5],
                theorem: Theorem::CriticalUnresolved,
                inputs,
                warnings,
            }),
        };
    }
    if rep.rho < 0.5 {
        return done(1.0, Theorem::T12Case1, inputs, warnings);
    }
    if rep.rho <= 1.0 + 1e-6 {
        return done(0.5, Theorem::T12Case2, inputs, warnings);
    }
    let b = beta_adaptive(phi, opts.beta_start, opts.beta_cap, opts.beta_tol)?;
    if !b.stable {
        warnings.push(format!("beta did not stabilise to {} before N = {}", opts.beta_tol, b.n));
    }
    inputs.beta = Some(b.beta);
    inputs.beta_n = Some(b.n);
    done(1.0 / (1.0 + b.beta), Theorem::T12Case3, inputs, warnings)
}
