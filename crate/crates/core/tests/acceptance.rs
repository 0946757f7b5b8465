//! Acceptance run: criteria 1 to 12 on a one-thread pool, then again on an
//! eight-thread pool for criterion 13. One line per criterion; exits
//! non-zero if any criterion fails.

use cfprod::cf::{big, cylinder, distortion_ratio};
use cfprod::dim::{beta_adaptive, beta_simplified_adaptive, dispatch, liao_rams, Theorem};
use cfprod::growth::GrowthFn;
use cfprod::levelset::{gen_b_full, gen_d_recursion, gen_e_sparse, gen_upsilon, last_exact_checkpoint};
use cfprod::montecarlo::{both_trends, digit_freq, target_constant, SampleOpts};
use cfprod::pressure::{
    pressure_cylinder, pressure_cylinder_with, pressure_operator_with, solve_theta, CylinderOpts, OperatorOpts, LEVELS,
};
use cfprod::stats::{composition_bound, composition_sum, divisor_count, factorial, ratio_track, stirling_sandwich};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;
use std::time::{Duration, Instant};

const SEED: u64 = 20_240_601;

/// Outcome of one criterion: pass flag, a human summary and a canonical
/// record of every number computed, compared across pool sizes.
struct Check {
    pass: bool,
    detail: String,
    record: String,
}

impl Check {
    fn new() -> Self {
        Check { pass: true, detail: String::new(), record: String::new() }
    }

    fn require(&mut self, ok: bool, what: impl AsRef<str>) {
        if !ok {
            self.pass = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            write!(self.detail, "FAILED {}", what.as_ref()).unwrap();
        }
    }

    fn note(&mut self, s: impl AsRef<str>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(s.as_ref());
    }

    fn rec(&mut self, key: &str, v: impl std::fmt::Debug) {
        writeln!(self.record, "{key}={v:?}").unwrap();
    }
}

fn g(s: &str) -> GrowthFn {
    GrowthFn::parse(s).unwrap()
}

fn c1() -> Check {
    let mut c = Check::new();
    let mut sum = BigRational::zero();
    for a in 1..=10_000u64 {
        sum += cylinder(&big(&[a])).unwrap().length;
    }
    let want = BigRational::new(BigInt::from(10_000), BigInt::from(10_001));
    c.rec("sum", &sum);
    c.require(sum == want, format!("sum = {sum}"));
    c.note(format!("sum = {sum}"));
    c
}

fn c2() -> Check {
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=12);
        let a: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=9)).collect();
        if !cylinder(&big(&a)).unwrap().satisfies_length_sandwich() {
            bad += 1;
        }
    }
    c.rec("violations", bad);
    c.require(bad == 0, format!("{bad} violations"));
    c.note("10000 cylinders checked exactly");
    c
}

fn c3() -> Check {
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let total = rng.gen_range(2..=10);
        let split = rng.gen_range(1..total);
        let a: Vec<u64> = (0..total).map(|_| rng.gen_range(1..=20)).collect();
        let r = distortion_ratio(&big(&a[..split]), &big(&a[split..])).unwrap();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    c.rec("range", (lo, hi));
    c.require((0.5..=2.0).contains(&lo) && (0.5..=2.0).contains(&hi), format!("range [{lo}, {hi}]"));
    c.note(format!("ratios in [{lo:.4}, {hi:.4}]"));
    c
}

fn c4() -> Check {
    let mut c = Check::new();
    let p = pressure_cylinder(1.0, 8, 100).unwrap();
    c.rec("bracket", (p.lo, p.hi, p.estimate));
    c.require(p.lo <= 0.0 && 0.0 <= p.hi, "bracket misses 0");
    c.require(p.bracket_width <= 0.15, format!("width {}", p.bracket_width));
    c.note(format!("[{:.5}, {:.5}], width {:.5}", p.lo, p.hi, p.bracket_width));
    c
}

fn c5() -> Check {
    let mut c = Check::new();
    let ps: Vec<f64> = (0..14).map(|i| pressure_cylinder(0.55 + 0.05 * i as f64, 6, 200).unwrap().estimate).collect();
    c.rec("p", &ps);
    let decreasing = ps.windows(2).all(|w| w[1] < w[0]);
    let min_d2 = ps.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min);
    c.require(decreasing, "strict decrease");
    c.require(min_d2 >= -1e-9, format!("second difference {min_d2:e}"));
    c.note(format!("P(0.55) = {:.4}, P(1.2) = {:.4}, min second difference {min_d2:.3e}", ps[0], ps[13]));
    c
}

fn c6() -> Check {
    let mut c = Check::new();
    let l = LEVELS[0];
    let mut worst = 0.0f64;
    for theta in [0.6, 0.75, 0.9, 1.0] {
        let a = pressure_cylinder_with(theta, l.cyl_depth, l.cyl_alphabet, &CylinderOpts {
            grid: l.cyl_grid,
            ..Default::default()
        })
        .unwrap();
        let b = pressure_operator_with(theta, l.op_alphabet, &OperatorOpts { grid: l.op_grid, ..Default::default() })
            .unwrap();
        c.rec(&format!("theta {theta}"), (a.estimate, b.estimate));
        worst = worst.max((a.estimate - b.estimate).abs());
    }
    c.require(worst < 0.05, format!("difference {worst}"));
    c.note(format!("largest difference {worst:.2e}"));
    c
}

fn c7() -> Check {
    let mut c = Check::new();
    let tol = 5e-3;
    let t0 = solve_theta(0.01, tol).unwrap();
    c.rec("c=0.01", (t0.theta, t0.theta_operator));
    c.require(t0.theta >= 0.97, format!("theta(0.01) = {}", t0.theta));
    let mut prev = f64::INFINITY;
    let mut last = 0.0;
    for cc in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0] {
        let s = solve_theta(cc, tol).unwrap();
        c.rec(&format!("c={cc}"), (s.theta, s.theta_operator));
        c.require(s.theta <= prev, format!("not monotone at c = {cc}"));
        c.require((s.theta - s.theta_operator).abs() <= 2.0 * tol, format!("estimators disagree at c = {cc}"));
        prev = s.theta;
        last = s.theta;
    }
    c.require(last <= 0.53, format!("theta(100) = {last}"));
    c.note(format!("theta(0.01) = {:.4}, theta(100) = {last:.4}", t0.theta));
    c
}

fn c8() -> Check {
    let mut c = Check::new();
    // closed-form values reached through a finite-window beta are compared at 1e-3
    let cases: [(&str, f64, bool); 7] = [
        ("exp(x^2*log(x))", 0.5, false),
        ("exp(2^(x^0.5))", 0.5, false),
        ("exp(2^x)", 1.0 / 3.0, false),
        ("exp(2^(x^2))", 0.0, true),
        ("exp(2^n)", 1.0 / 3.0, false),
        ("exp(sqrt(n)/log(n))", 1.0, true),
        ("exp(sqrt(n)*log(n))", 0.5, true),
    ];
    for (src, want, exact) in cases {
        let r = dispatch(&g(src)).unwrap();
        let v = r.value.unwrap_or(f64::NAN);
        c.rec(src, (v, r.theorem));
        let ok = if exact { v == want } else { (v - want).abs() <= 1e-3 };
        c.require(ok, format!("{src} gave {v}"));
    }
    let r = dispatch(&g("exp(sqrt(n)/log(n))")).unwrap();
    c.require(r.theorem == Theorem::T13, "sqrt(n)/log(n) not routed to the critical theorem");
    let osc = g("exp(n^2*(log(2) + (log(3) - log(2))*(1 + cos(pi*n))/2))");
    let b = beta_adaptive(&osc, 1024, 1 << 20, 1e-4).unwrap();
    let s = beta_simplified_adaptive(&osc, 1024, 1 << 20, 1e-4).unwrap();
    c.rec("osc", (b.beta, b.n, s.beta, s.n));
    let target = 3f64.ln() / 2f64.ln();
    c.require((b.beta - target).abs() <= 1e-3, format!("beta = {}", b.beta));
    c.require((s.beta - 1.0).abs() <= 1e-3, format!("simplified = {}", s.beta));
    c.note(format!("oscillating beta {:.5} (N = {}), simplified {:.5}", b.beta, b.n, s.beta));
    c
}

fn c9() -> Check {
    let mut c = Check::new();
    let n = 10_000;
    let ls: Vec<f64> = (1..=n + 1).map(|k| 2.0 * k as f64).collect();
    let lt: Vec<f64> = (1..=n + 1).map(|k| k as f64).collect();
    let v = liao_rams(&ls, &lt, n).unwrap().value;
    c.rec("closed", v);
    c.require((v - 0.25).abs() < 1e-3, format!("closed form {v}"));
    // s = sqrt(phi), t = sqrt(phi/n), phi = exp(n^0.8); k = 1 dropped since t_1 = s_1
    let n = 100_000;
    let ls: Vec<f64> = (2..=n + 2).map(|k| 0.5 * (k as f64).powf(0.8)).collect();
    let lt: Vec<f64> = (2..=n + 2).map(|k| 0.5 * ((k as f64).powf(0.8) - (k as f64).ln())).collect();
    let w = liao_rams(&ls, &lt, n).unwrap().value;
    c.rec("b_full", w);
    c.require((w - 0.5).abs() < 5e-3, format!("b_full pair {w}"));
    let (mut ls2, mut lt2) = (ls.clone(), lt.clone());
    for k in 0..10 {
        ls2[k] += 3.0 + k as f64;
        lt2[k] -= 1.0;
    }
    let p = liao_rams(&ls2, &lt2, n).unwrap().value;
    c.rec("perturbed", p);
    c.require((p - w).abs() < 1e-3, format!("prefix moved estimate by {}", (p - w).abs()));
    c.note(format!("closed form {v:.5}, exp(n^0.8) pair {w:.5}, prefix shift {:.1e}", (p - w).abs()));
    c
}

fn c10() -> Check {
    let mut c = Check::new();
    let at = |qs: &[num_bigint::BigUint], phi: &GrowthFn, n: usize| *ratio_track(qs, phi, n).unwrap().last().map(|(_, r)| r).unwrap();

    let phi = g("exp(sqrt(n)/log(n))");
    let e = gen_e_sparse(&phi, 20).unwrap();
    let r1 = at(&e.seq.quotients, &phi, 400);

    let phi2 = g("exp(n^0.8)");
    let b = gen_b_full(&phi2, 201).unwrap();
    let r2 = at(&b.seq.quotients, &phi2, 200);

    let u = gen_upsilon(1.0, 101).unwrap();
    let r3 = at(&u.seq.quotients, &g("exp(n)"), 100);

    let phi4 = g("exp(2^n)");
    let d = gen_d_recursion(&phi4, 40).unwrap();
    let n4 = last_exact_checkpoint(&d);
    let r4 = at(&d.seq.quotients, &phi4, n4);

    c.rec("ratios", (r1, r2, r3, n4, r4));
    c.require((0.9..=1.1).contains(&r1), format!("e-sparse {r1}"));
    c.require((0.9..=1.1).contains(&r2), format!("b-full {r2}"));
    c.require((0.95..=1.05).contains(&r3), format!("upsilon {r3}"));
    c.require((0.9..=1.1).contains(&r4), format!("d-recursion {r4} at n = {n4}"));
    c.note(format!("e-sparse {r1:.4}, b-full {r2:.4}, upsilon {r3:.4}, d-recursion {r4:.4} at n = {n4}"));
    c
}

fn composition_dp(m: usize, n: usize, s: f64) -> f64 {
    let mut f = vec![0.0; m + 1];
    f[0] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; m + 1];
        for total in 1..=m {
            next[total] = (1..=total).map(|i| f[total - i] * (i as f64).powf(-2.0 * s)).sum();
        }
        f = next;
    }
    f[m]
}

fn c11() -> Check {
    let mut c = Check::new();
    let mut worst = 0.0f64;
    for s in [0.6, 0.75, 0.9] {
        for n in 1..=5u64 {
            for m in n..=30 {
                let v = composition_sum(m, n, s).unwrap();
                let dp = composition_dp(m as usize, n as usize, s);
                c.require((v - dp).abs() <= 1e-12 * dp, format!("enumeration vs oracle at m={m} n={n} s={s}"));
                let bound = composition_bound(m, n, s);
                c.require(v <= bound, format!("bound at m={m} n={n} s={s}"));
                worst = worst.max(v / bound);
            }
        }
    }
    c.rec("worst", worst);
    for n in 1..=170u64 {
        let (lo, _, hi) = stirling_sandwich(n);
        let f = factorial(n).to_f64().unwrap();
        c.require(lo.exp() <= f * (1.0 + 1e-14) && f <= hi.exp() * (1.0 + 1e-14), format!("Stirling at {n}"));
    }
    for n in 1..=10_000u64 {
        let naive = (1..=n).filter(|d| n % d == 0).count() as u64;
        c.require(divisor_count(n) == naive, format!("divisor_count({n})"));
    }
    c.note(format!("largest sum/bound {worst:.3e}; Stirling n <= 170; divisors n <= 10^4"));
    c
}

fn c12() -> Check {
    let mut c = Check::new();
    let opts = SampleOpts::default();
    let f = digit_freq(10, 10_000, SEED, 3, &opts).unwrap();
    let again = digit_freq(10, 10_000, SEED, 3, &opts).unwrap();
    c.require(f == again, "digit frequencies not reproducible");
    for r in &f.rows {
        c.rec(&format!("k={}", r.k), (r.count, r.frequency));
        c.require(r.within_3sigma, format!("k = {} at z = {:.2}", r.k, r.z));
    }
    let (sll, lim) = both_trends(100, 100_000, SEED, &opts).unwrap();
    c.rec("sll", (&sll.values, sll.median));
    c.rec("liminf", (&lim.values, lim.median));
    let t = target_constant();
    c.require(sll.median >= t / 2.0 && sll.median <= 2.0 * t, format!("sll median {}", sll.median));
    c.require(lim.median >= t / 3.0 && lim.median <= 3.0 * t, format!("liminf median {}", lim.median));
    c.note(format!(
        "P(a=1) = {:.4}; sll median {:.4}; liminf median {:.4}; target {t:.5}",
        f.rows[0].frequency, sll.median, lim.median
    ));
    c
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

fn criteria() -> Vec<Criterion> {
    let s = Duration::from_secs;
    vec![
        Criterion { id: 1, name: "cylinder conservation", limit: s(1), run: c1 },
        Criterion { id: 2, name: "length sandwich", limit: s(10), run: c2 },
        Criterion { id: 3, name: "bounded distortion", limit: s(10), run: c3 },
        Criterion { id: 4, name: "pressure anchor", limit: s(60), run: c4 },
        Criterion { id: 5, name: "pressure shape", limit: s(60), run: c5 },
        Criterion { id: 6, name: "estimator cross-validation", limit: s(120), run: c6 },
        Criterion { id: 7, name: "theta(c) endpoints and monotonicity", limit: s(600), run: c7 },
        Criterion { id: 8, name: "dispatch table", limit: s(60), run: c8 },
        Criterion { id: 9, name: "Liao-Rams evaluator", limit: s(30), run: c9 },
        Criterion { id: 10, name: "generator envelopes", limit: s(60), run: c10 },
        Criterion { id: 11, name: "combinatorial oracles", limit: s(30), run: c11 },
        Criterion { id: 12, name: "Monte-Carlo trends", limit: s(600), run: c12 },
    ]
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn main() {
    let mut failed = 0;
    let mut records = Vec::new();
    let single = pool(1);
    for cr in criteria() {
        let start = Instant::now();
        let check = single.install(cr.run);
        let elapsed = start.elapsed();
        let pass = check.pass && elapsed <= cr.limit;
        let timing = if elapsed <= cr.limit { String::new() } else { format!("; over the {:?} limit", cr.limit) };
        println!(
            "criterion {:>2} {} {} ({:.2} s): {}{timing}",
            cr.id,
            if pass { "PASS" } else { "FAIL" },
            cr.name,
            elapsed.as_secs_f64(),
            check.detail
        );
        failed += usize::from(!pass);
        records.push(check.record);
    }
    let eight = pool(8);
    let start = Instant::now();
    let diverged: Vec<u32> = criteria()
        .into_iter()
        .zip(&records)
        .filter(|(cr, rec)| eight.install(cr.run).record != **rec)
        .map(|(cr, _)| cr.id)
        .collect();
    let pass = diverged.is_empty();
    println!(
        "criterion 13 {} determinism across 1 and 8 workers ({:.2} s): {}",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        if pass { "all records byte-identical".to_string() } else { format!("records differ for {diverged:?}") }
    );
    failed += usize::from(!pass);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
