use cfprod::growth::GrowthFn;
use cfprod::levelset::{generate, ConstructionSpec};
use num_bigint::BigUint;
use num_traits::One;

fn g(s: &str) -> GrowthFn {
    GrowthFn::parse(s).unwrap()
}

fn specs() -> Vec<ConstructionSpec> {
    vec![
        ConstructionSpec::ESparse { phi: g("exp(sqrt(n)/log(n))"), blocks: 20 },
        ConstructionSpec::BFull { phi: g("exp(n^0.8)"), terms: 200 },
        ConstructionSpec::Upsilon { alpha: 1.0, terms: 101 },
        ConstructionSpec::DRecursion { phi: g("exp(2^n)"), terms: 20 },
        ConstructionSpec::PsiSqrt { c: 1.5, blocks: 15 },
    ]
}

#[test]
fn generators_are_deterministic() {
    for spec in specs() {
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b, "{}", spec.kind());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn e_sparse_is_one_off_squares() {
    let out = generate(&specs()[0]).unwrap();
    for (i, a) in out.seq.quotients.iter().enumerate() {
        let n = i + 1;
        let r = (n as f64).sqrt().round() as usize;
        if r * r != n {
            assert!(a.is_one(), "a_{n} = {a}");
        }
    }
}

#[test]
fn upsilon_increases_past_start() {
    let out = generate(&specs()[2]).unwrap();
    let qs: &[BigUint] = &out.seq.quotients;
    for n in out.start_index + 1..=qs.len() {
        assert!(qs[n - 2] < qs[n - 1], "n = {n}");
    }
}

#[test]
fn b_full_window_in_exact_arithmetic() {
    // s − t < a ≤ s + t  ⇔  (a − s)² < t² = φ/n on the relevant side; with
    // φ = e^{n^0.8} irrational, check a² bounds through f64 logs with margin
    let phi = g("exp(n^0.8)");
    let out = generate(&specs()[1]).unwrap();
    for n in 1..=200usize {
        let x = phi.eval(n as f64).unwrap();
        let (s, t) = (x.sqrt(), (x / n as f64).sqrt());
        let a: f64 = out.seq.a(n).to_string().parse().unwrap();
        assert!(s - t < a && a <= s + t, "n = {n}");
    }
}
