//! Number formatting for reports: every float is written with 12 significant
//! digits so outputs are byte-stable.

use serde::Serializer;
use serde_json::{Number, Value};
use std::str::FromStr;

/// Decimal text with 12 significant digits; exponent form outside
/// `[1e-5, 1e12)`. Non-finite values render as `inf`, `-inf`, `nan`.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').unwrap();
    let e: i32 = exp.parse().unwrap();
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// JSON value for a float: a number with 12 significant digits, or a string
/// for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt12(x)).expect("formatted float parses"))
    } else {
        Value::String(fmt12(x))
    }
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&num(*x), s)
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_vec_f64<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let v: Vec<Value> = xs.iter().map(|x| num(*x)).collect();
    serde::Serialize::serialize(&v, s)
}
