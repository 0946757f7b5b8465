//! `cfprod`: command-line front end for the continued-fraction toolkit.
//!
//! Exit status is 0 on success, 2 for precondition and input errors, 3 for
//! budget, precision or resolution exhaustion, 1 for I/O failures.

use cfprod::cf::{expand_rational, expand_real, QuotientSequence};
use cfprod::dim::{covering_upper, dispatch_with, falconer_lower, liao_rams_fn, log_values, DispatchOpts};
use cfprod::growth::{beta, beta_simplified, estimate_rho, Bindings, GrowthFn, DEFAULT_J_MAX};
use cfprod::levelset::{generate, ConstructionSpec, Generated};
use cfprod::montecarlo::{
    digit_freq, liminf_l_trend_with, sample_point, sll_trend_with, SampleMode, SampleOpts, TrendSummary,
};
use cfprod::pressure::{
    pressure_cylinder_with, pressure_operator_with, solve_theta, CylinderOpts, OperatorOpts, PressureEstimate,
    DEFAULT_BUDGET,
};
use cfprod::report::fmt12;
use cfprod::stats::{dirichlet_report, product_stats, ratio_track, stats_csv};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::{BigInt, BigUint};
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "cfprod", version, about = "Continued fractions, partial-quotient products and dimension formulas")]
struct Cli {
    /// JSON file with defaults for the global flags; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for sampled points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Extra bits drawn per sampled point beyond 4 per quotient.
    #[arg(long, global = true)]
    precision_bits: Option<u64>,
    /// Output format; goes before the subcommand.
    #[arg(long, value_enum)]
    out: Option<Format>,
    /// Growth-function binding, e.g. `--let c=1.5`; repeatable.
    #[arg(long = "let", global = true, value_name = "NAME=VALUE")]
    lets: Vec<String>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

/// Contents of `--config`.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    workers: Option<usize>,
    precision_bits: Option<u64>,
    out: Option<Format>,
    #[serde(rename = "let", default)]
    lets: BTreeMap<String, f64>,
}

struct Settings {
    seed: u64,
    precision_bits: u64,
    format: Format,
    bindings: Bindings,
}

#[derive(Subcommand)]
enum Command {
    /// Continued-fraction expansion of a rational, an interval or a sampled point.
    Expand {
        #[command(flatten)]
        input: QuotientInput,
    },
    /// L_n, S_n and argmax rows for a quotient sequence.
    Stats {
        #[command(flatten)]
        input: QuotientInput,
        /// Prefix length (defaults to all available products).
        #[arg(long)]
        n: Option<usize>,
        /// Growth function for the L_n/phi(n) column.
        #[arg(long)]
        phi: Option<String>,
    },
    /// Pressure estimate at one theta.
    Pressure {
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        alphabet: usize,
        #[arg(long, value_enum, default_value = "cyl")]
        method: MethodArg,
        /// Grid size (512 for cyl, 128 for op).
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        /// Drop the Hurwitz-zeta tail for quotients above the alphabet.
        #[arg(long)]
        no_tail: bool,
    },
    /// Root theta(c) of P(theta) = c(theta - 1/2).
    Theta {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
    },
    /// Hausdorff dimension of the level set of phi.
    Dim {
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = cfprod::growth::DEFAULT_CRITICAL_BAND)]
        critical_band: f64,
    },
    /// Individual dimension formulas and growth-function exponents.
    Formula {
        #[command(subcommand)]
        which: FormulaCmd,
    },
    /// Construct a point of a level set.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Target growth function (e-sparse, b-full, d-rec).
        #[arg(long)]
        phi: Option<String>,
        /// Rate for upsilon.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Constant for psi-sqrt.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Terms, or blocks k for e-sparse and psi-sqrt.
        #[arg(long)]
        terms: usize,
        /// Write the JSON sequence here instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo trends for uniformly sampled points.
    Montecarlo {
        #[command(subcommand)]
        which: McCmd,
    },
    /// Indices where a_n a_{n+1} reaches the Dirichlet threshold for psi.
    Dirichlet {
        #[command(flatten)]
        input: QuotientInput,
        #[arg(long)]
        psi: String,
        #[arg(long)]
        n: Option<usize>,
        /// Use the outer threshold instead of the inner one.
        #[arg(long)]
        outer: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct QuotientSource {
    /// Comma-separated quotients.
    #[arg(long, value_delimiter = ',')]
    quotients: Option<Vec<String>>,
    /// A rational p/q in (0, 1).
    #[arg(long)]
    rational: Option<String>,
    /// Endpoints of an interval, each p/q or a decimal.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    interval: Option<Vec<String>>,
    /// A uniformly sampled point from --seed.
    #[arg(long)]
    random: bool,
    /// JSON quotient sequence, as written by `expand` or `generate`.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct QuotientInput {
    #[command(flatten)]
    source: QuotientSource,
    /// Quotients to produce for --interval and --random.
    #[arg(long, default_value_t = 50)]
    terms: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cyl,
    Op,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    ESparse,
    BFull,
    Upsilon,
    DRec,
    PsiSqrt,
}

#[derive(Subcommand)]
enum FormulaCmd {
    /// Liao-Rams ratio for windows (s_k - t_k, s_k + t_k].
    LiaoRams {
        #[arg(long)]
        s: String,
        #[arg(long)]
        t: String,
        #[arg(long = "N")]
        n: usize,
    },
    /// Cantor-set lower bound from children counts m_n and gaps theta_n.
    Falconer {
        #[arg(long)]
        m: String,
        #[arg(long)]
        theta: String,
        #[arg(long = "N")]
        n: usize,
    },
    /// Covering upper bound from counts n_k and diameters.
    Covering {
        #[arg(long)]
        counts: String,
        #[arg(long)]
        diams: String,
        #[arg(long = "K")]
        k: usize,
    },
    /// Beta exponent of phi.
    Beta {
        #[arg(long)]
        phi: String,
        #[arg(long = "N", default_value_t = 1000)]
        n: usize,
    },
    /// Simplified beta exponent of phi.
    BetaSimplified {
        #[arg(long)]
        phi: String,
        #[arg(long = "N", default_value_t = 1000)]
        n: usize,
    },
    /// Regular-variation index of f.
    Rho {
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = DEFAULT_J_MAX)]
        j_max: u32,
    },
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    n: usize,
    /// Independent Gauss-Kuzmin quotients instead of exact expansion (approximate).
    #[arg(long)]
    iid: bool,
}

#[derive(Subcommand)]
enum McCmd {
    /// (S_n - L_n)/(n (ln n)^2) across samples.
    Sll(McArgs),
    /// Running minimum of L_m ln ln m/(m ln m) over [n/10, n].
    LiminfL(McArgs),
    /// Frequencies of a_i = k against the Gauss-Kuzmin masses.
    DigitFreq {
        #[command(flatten)]
        args: McArgs,
        #[arg(long, default_value_t = 3)]
        k_max: u64,
    },
}

enum Failure {
    Lib(cfprod::Error),
    Input(String),
    Io(String),
}

impl From<cfprod::Error> for Failure {
    fn from(e: cfprod::Error) -> Self {
        Failure::Lib(e)
    }
}

type Res<T> = Result<T, Failure>;

fn input_err<T>(msg: impl Into<String>) -> Res<T> {
    Err(Failure::Input(msg.into()))
}

fn settings(cli: &Cli) -> Res<Settings> {
    let cfg: Config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Input(format!("config {}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    let mut bindings = cfg.lets;
    for l in &cli.lets {
        let Some((name, value)) = l.split_once('=') else {
            return input_err(format!("--let expects NAME=VALUE, got {l:?}"));
        };
        let v: f64 = value.trim().parse().map_err(|_| Failure::Input(format!("--let {name}: {value:?} is not a number")))?;
        bindings.insert(name.trim().to_string(), v);
    }
    if let Some(w) = cli.workers.or(cfg.workers) {
        if w == 0 {
            return input_err("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Io(format!("worker pool: {e}")))?;
    }
    Ok(Settings {
        seed: cli.seed.or(cfg.seed).unwrap_or(1),
        precision_bits: cli.precision_bits.or(cfg.precision_bits).unwrap_or(cfprod::montecarlo::DEFAULT_PRECISION_BITS),
        format: cli.out.or(cfg.out).unwrap_or(Format::Json),
        bindings,
    })
}

fn parse_fn(text: &str, s: &Settings) -> Res<GrowthFn> {
    Ok(GrowthFn::parse_with(text, &s.bindings)?)
}

/// `p/q` or a finite decimal, exactly.
fn parse_rational(text: &str) -> Res<num_rational::BigRational> {
    let bad = || Failure::Input(format!("{text:?} is not a rational p/q or a decimal"));
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q == BigInt::from(0) {
            return Err(bad());
        }
        return Ok(num_rational::BigRational::new(p, q));
    }
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let den = BigInt::from(10).pow(frac.len() as u32);
    Ok(num_rational::BigRational::new(num, den))
}

fn quotients(input: &QuotientInput, s: &Settings) -> Res<QuotientSequence> {
    let src = &input.source;
    if let Some(list) = &src.quotients {
        let mut qs = Vec::with_capacity(list.len());
        for item in list {
            let a = BigUint::from_str(item.trim()).map_err(|_| Failure::Input(format!("quotient {item:?}")))?;
            if a == BigUint::from(0u32) {
                return input_err("quotients must be at least 1");
            }
            qs.push(a);
        }
        return Ok(QuotientSequence::generated("cli", qs));
    }
    if let Some(r) = &src.rational {
        let x = parse_rational(r)?;
        let (p, q) = (x.numer().to_biguint(), x.denom().to_biguint());
        let (Some(p), Some(q)) = (p, q) else { return input_err(format!("{r} is not in (0, 1)")) };
        return Ok(expand_rational(&p, &q)?);
    }
    if let Some(iv) = &src.interval {
        return Ok(expand_real(&parse_rational(&iv[0])?, &parse_rational(&iv[1])?, input.terms)?);
    }
    if src.random {
        return Ok(sample_point(s.seed, 0, input.terms, s.precision_bits)?);
    }
    if let Some(path) = &src.input {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        return Ok(QuotientSequence::from_json(&v)?);
    }
    input_err("no quotient source given")
}

fn to_json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn csv_row(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

fn pressure_csv(p: &PressureEstimate) -> String {
    let v = serde_json::to_value(p).expect("serializable");
    let keys = ["theta", "lo", "hi", "estimate", "depth_n", "alphabet_m", "grid", "method", "tail_correction", "bracket_width"];
    let cell = |k: &str| match &v[k] {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        x => x.to_string(),
    };
    csv_row(&keys.map(str::to_string)) + &csv_row(&keys.map(cell))
}

fn trend_csv(t: &TrendSummary) -> String {
    let mut s = String::from("sample,value\n");
    for (i, v) in t.values.iter().enumerate() {
        writeln!(s, "{i},{}", fmt12(*v)).unwrap();
    }
    s
}

fn generated_json(g: &Generated) -> Value {
    let mut v = g.seq.to_json();
    let extra = serde_json::to_value(g).expect("serializable");
    for k in ["log_a", "start_index", "d_trace"] {
        if let Some(x) = extra.get(k) {
            v[k] = x.clone();
        }
    }
    v
}

fn run(cli: &Cli) -> Res<String> {
    let s = settings(cli)?;
    let csv = s.format == Format::Csv;
    match &cli.cmd {
        Command::Expand { input } => {
            let qs = quotients(input, &s)?;
            if csv {
                let mut out = String::from("i,a_i\n");
                for (i, a) in qs.quotients.iter().enumerate() {
                    writeln!(out, "{},{a}", i + 1).unwrap();
                }
                Ok(out)
            } else {
                Ok(to_json(&qs.to_json()))
            }
        }
        Command::Stats { input, n, phi } => {
            let qs = quotients(input, &s)?;
            let n = n.unwrap_or(qs.len().saturating_sub(1));
            let phi = phi.as_deref().map(|p| parse_fn(p, &s)).transpose()?;
            if csv {
                return Ok(stats_csv(&qs.quotients, n, phi.as_ref())?);
            }
            let st = product_stats(&qs.quotients, n)?;
            let mut v = serde_json::to_value(&st).expect("serializable");
            if let Some(f) = &phi {
                let r = ratio_track(&qs.quotients, f, n)?;
                v["ratio"] = r.last().map_or(Value::Null, |(_, x)| cfprod::report::num(*x));
            }
            Ok(to_json(&v))
        }
        Command::Pressure { theta, depth, alphabet, method, grid, budget, iters, no_tail } => {
            let p = match method {
                MethodArg::Cyl => {
                    let opts = CylinderOpts { grid: grid.unwrap_or(cfprod::pressure::DEFAULT_GRID), budget: *budget, tail: !no_tail };
                    pressure_cylinder_with(*theta, *depth, *alphabet, &opts)?
                }
                MethodArg::Op => {
                    let opts = OperatorOpts { grid: grid.unwrap_or(128), iters: *iters, tail: !no_tail };
                    pressure_operator_with(*theta, *alphabet, &opts)?
                }
            };
            Ok(if csv { pressure_csv(&p) } else { to_json(&p) })
        }
        Command::Theta { c, tol } => {
            let t = solve_theta(*c, *tol)?;
            if csv {
                let head = ["c", "theta", "theta_operator", "residual", "bracket_width", "cyl_depth", "warnings"];
                let row = [
                    fmt12(t.c),
                    fmt12(t.theta),
                    fmt12(t.theta_operator),
                    fmt12(t.residual),
                    fmt12(t.bracket_width),
                    t.level.cyl_depth.to_string(),
                    format!("\"{}\"", t.warnings.join("; ")),
                ];
                return Ok(csv_row(&head.map(str::to_string)) + &csv_row(&row));
            }
            Ok(to_json(&t))
        }
        Command::Dim { phi, critical_band } => {
            let opts = DispatchOpts { critical_band: *critical_band, ..DispatchOpts::default() };
            let r = dispatch_with(&parse_fn(phi, &s)?, &opts)?;
            if csv {
                let v = serde_json::to_value(&r).expect("serializable");
                let value = r.value.map(fmt12).unwrap_or_default();
                let cands: Vec<String> = r.candidates.iter().map(|c| fmt12(*c)).collect();
                return Ok(format!("value,theorem,candidates\n{value},{},{}\n", v["theorem"].as_str().unwrap_or(""), cands.join(" ")));
            }
            Ok(to_json(&r))
        }
        Command::Formula { which } => formula(which, &s),
        Command::Generate { kind, phi, alpha, c, terms, out } => {
            let need_phi = || -> Res<GrowthFn> {
                match phi {
                    Some(p) => parse_fn(p, &s),
                    None => input_err("--phi is required for this kind"),
                }
            };
            let spec = match kind {
                KindArg::ESparse => ConstructionSpec::ESparse { phi: need_phi()?, blocks: *terms },
                KindArg::BFull => ConstructionSpec::BFull { phi: need_phi()?, terms: *terms },
                KindArg::Upsilon => ConstructionSpec::Upsilon { alpha: *alpha, terms: *terms },
                KindArg::DRec => ConstructionSpec::DRecursion { phi: need_phi()?, terms: *terms },
                KindArg::PsiSqrt => ConstructionSpec::PsiSqrt { c: *c, blocks: *terms },
            };
            let g = generate(&spec)?;
            let text = if csv {
                let mut t = String::from("n,a_n,log_a_n\n");
                for (i, la) in g.log_a.iter().enumerate() {
                    let a = g.seq.quotients.get(i).map(|a| a.to_string()).unwrap_or_default();
                    writeln!(t, "{},{a},{}", i + 1, fmt12(*la)).unwrap();
                }
                t
            } else {
                to_json(&generated_json(&g))
            };
            match out {
                Some(path) => {
                    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Montecarlo { which } => {
            let opts = |a: &McArgs| SampleOpts {
                precision_bits: s.precision_bits,
                mode: if a.iid { SampleMode::IidGaussKuzmin } else { SampleMode::Exact },
            };
            let t = match which {
                McCmd::Sll(a) => sll_trend_with(a.samples, a.n, s.seed, &opts(a))?,
                McCmd::LiminfL(a) => liminf_l_trend_with(a.samples, a.n, s.seed, &opts(a))?,
                McCmd::DigitFreq { args, k_max } => {
                    let f = digit_freq(args.samples, args.n, s.seed, *k_max, &opts(args))?;
                    if !csv {
                        return Ok(to_json(&f));
                    }
                    let mut out = String::from("k,count,frequency,expected,sigma,z,within_3sigma\n");
                    for r in &f.rows {
                        let cells = [fmt12(r.frequency), fmt12(r.expected), fmt12(r.sigma), fmt12(r.z)];
                        writeln!(out, "{},{},{},{}", r.k, r.count, cells.join(","), r.within_3sigma).unwrap();
                    }
                    return Ok(out);
                }
            };
            Ok(if csv { trend_csv(&t) } else { to_json(&t) })
        }
        Command::Dirichlet { input, psi, n, outer } => {
            let qs = quotients(input, &s)?;
            let n = n.unwrap_or(qs.len().saturating_sub(1));
            let r = dirichlet_report(&qs.quotients, &parse_fn(psi, &s)?, n, *outer)?;
            if !csv {
                return Ok(to_json(&r));
            }
            let mut rows: Vec<(usize, &str)> =
                r.hits.iter().map(|&i| (i, "hit")).chain(r.borderline.iter().map(|&i| (i, "borderline"))).collect();
            rows.sort();
            let mut out = String::from("n,status\n");
            for (i, st) in rows {
                writeln!(out, "{i},{st}").unwrap();
            }
            Ok(out)
        }
    }
}

fn formula(which: &FormulaCmd, s: &Settings) -> Res<String> {
    let window = |w: cfprod::dim::WindowEstimate| -> String {
        if s.format == Format::Csv {
            format!("value,window_lo,window_hi\n{},{},{}\n", fmt12(w.value), w.window.0, w.window.1)
        } else {
            to_json(&w)
        }
    };
    let scalar = |name: &str, v: f64| -> String {
        if s.format == Format::Csv {
            format!("{name}\n{}\n", fmt12(v))
        } else {
            to_json(&json!({ name: cfprod::report::num(v) }))
        }
    };
    Ok(match which {
        FormulaCmd::LiaoRams { s: sx, t, n } => window(liao_rams_fn(&parse_fn(sx, s)?, &parse_fn(t, s)?, *n)?),
        FormulaCmd::Falconer { m, theta, n } => {
            let lm = log_values(&parse_fn(m, s)?, *n)?;
            let lt = log_values(&parse_fn(theta, s)?, *n)?;
            window(falconer_lower(&lm, &lt, *n)?)
        }
        FormulaCmd::Covering { counts, diams, k } => {
            let lc = log_values(&parse_fn(counts, s)?, *k)?;
            let ld = log_values(&parse_fn(diams, s)?, *k)?;
            window(covering_upper(&lc, &ld, *k)?)
        }
        FormulaCmd::Beta { phi, n } => {
            let b = beta(&parse_fn(phi, s)?, *n)?;
            if s.format == Format::Csv {
                scalar("beta", b.beta)
            } else {
                to_json(&b)
            }
        }
        FormulaCmd::BetaSimplified { phi, n } => scalar("beta_simplified", beta_simplified(&parse_fn(phi, s)?, *n)?),
        FormulaCmd::Rho { f, j_max } => {
            let r = estimate_rho(&parse_fn(f, s)?, *j_max)?;
            if s.format == Format::Csv {
                format!("rho,infinite,critical\n{},{},{}\n", fmt12(r.rho), r.infinite, r.critical)
            } else {
                to_json(&r)
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (msg, code) = match f {
                Failure::Lib(e) => (e.to_string(), e.exit_code()),
                Failure::Input(m) => (m, 2),
                Failure::Io(m) => (m, 1),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
