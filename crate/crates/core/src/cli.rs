//! Command-line front end. `run` returns the process exit code:
//! 0 success/pass, 1 fail, 2 inconclusive, 3 input or resource error.

use std::fmt::Write as _;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cantor::{parse_set, CantorSpec};
use crate::expr::{default_names, Function, SearchLimits};
use crate::interval::{Interval, Rational};
use crate::presets::{catalog, reproduce};
use crate::theorem::{check_main, check_scaled, CheckOptions, ConditionReport};
use crate::thickness::thickness;
use crate::verify::{
    budget_from_env, find_miss_certificate, image_cover, real_line_cover, CertifyOutcome, CoverOptions, CoverReport,
    LineVerdict,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "thicklab", version, about = "Thickness of Cantor sets and images f(K1, ..., Kd)")]
pub struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Thickness of one set.
    Thickness {
        #[arg(long)]
        set: String,
        /// Construction depth for enumerated bounds.
        #[arg(long, default_value_t = 3)]
        depth: u32,
    },
    /// Derivative-ratio condition for f on the given sets.
    Check {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        search: Search,
        /// Thickness depth for sets without a closed form.
        #[arg(long, default_value_t = 3)]
        depth: u32,
        /// Rescale hulls to [0, 1], composing f with the affine maps.
        #[arg(long)]
        normalize: bool,
    },
    /// Enclose f(K1, ..., Kd) at a construction depth.
    Cover {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[command(flatten)]
        budget: Budget,
        /// Restrict gap reporting to `lo,hi`.
        #[arg(long)]
        window: Option<String>,
        /// Outward-rounded doubles instead of exact rationals.
        #[arg(long)]
        float: bool,
        /// Drop boxes with a denominator enclosing zero.
        #[arg(long)]
        excise_zero: bool,
    },
    /// Certify that z is not in f(K1, ..., Kd).
    Certify {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        z: String,
        #[arg(long, default_value_t = 12)]
        max_depth: u32,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        excise_zero: bool,
    },
    /// Cover a window of the line by pieces over the integer part of one
    /// continued-fraction argument.
    LineCover {
        #[command(flatten)]
        target: Target,
        /// 0-based index of the continued-fraction argument that varies.
        #[arg(long)]
        varying: usize,
        #[arg(long, default_value = "-5,5")]
        window: String,
        #[command(flatten)]
        search: Search,
    },
    /// Run a named reproduction preset.
    Reproduce { preset: String },
    /// List the presets and their expected outcomes.
    ListPresets,
}

#[derive(Debug, Args)]
pub struct Target {
    /// Expression in x, y (d = 2), x, y, z (d = 3) or x1..x{d-1}, z.
    #[arg(long = "f")]
    pub f: String,
    /// Set: alias (C, C+1, K(1/4), K(1/2,1/5), F1(7)), inline JSON or a file path.
    #[arg(long = "set", required = true)]
    pub sets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct Search {
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 40)]
    pub max_depth: u32,
}

#[derive(Debug, Args)]
pub struct Budget {
    /// Box budget (default: THICKLAB_BUDGET or 2^24).
    #[arg(long)]
    pub budget: Option<u64>,
}

impl Budget {
    fn get(&self) -> u64 {
        self.budget.unwrap_or_else(budget_from_env)
    }
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Reads a set from a file path if one exists, else parses it inline.
pub fn load_set(arg: &str) -> Result<CantorSpec, String> {
    let text = if !arg.trim_start().starts_with('{') && Path::new(arg).is_file() {
        std::fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?
    } else {
        arg.to_string()
    };
    parse_set(&text).map_err(|e| e.to_string())
}

fn load(target: &Target) -> Result<(Function, Vec<CantorSpec>), Failure> {
    let specs: Vec<CantorSpec> = target.sets.iter().map(|s| load_set(s)).collect::<Result<_, _>>()?;
    let f = Function::parse(&target.f, &default_names(specs.len()))?;
    if f.arity() != specs.len() {
        return Err(Failure(format!("expression has arity {} but {} sets were given", f.arity(), specs.len())));
    }
    Ok((f, specs))
}

fn parse_window(text: &str) -> Result<Interval, Failure> {
    let (a, b) = text.split_once(',').ok_or_else(|| Failure(format!("window `{text}` is not `lo,hi`")))?;
    Ok(Interval::exact(a.trim().parse::<Rational>()?, b.trim().parse::<Rational>()?)?)
}

fn limits(s: &Search) -> Result<SearchLimits, Failure> {
    if !(s.tol > 0.0) {
        return Err(Failure("--tol must be positive".into()));
    }
    Ok(SearchLimits { tol: s.tol, max_depth: s.max_depth, ..SearchLimits::default() })
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String, out: &mut String) {
    if json {
        out.push_str(&serde_json::to_string_pretty(value).expect("reports serialize"));
        out.push('\n');
    } else {
        out.push_str(&text());
    }
}

fn iv(i: &Interval) -> String {
    let (a, b) = i.endpoint_strings();
    format!("[{a}, {b}]")
}

fn open(i: &Interval) -> String {
    let (a, b) = i.endpoint_strings();
    format!("({a}, {b})")
}

/// Composes `f` with the maps sending `[0, 1]` onto each exact hull and
/// rescales the sets to `[0, 1]`. `None` if some hull is not exact.
pub fn normalize(f: &Function, specs: &[CantorSpec]) -> Option<(Function, Vec<CantorSpec>)> {
    let mut maps = Vec::new();
    let mut out = Vec::new();
    for s in specs {
        let hull = s.hull();
        let (lo, hi) = hull.exact_bounds()?;
        let w = hi - lo;
        maps.push((w.clone(), lo.clone()));
        out.push(s.apply_affine(w.recip(), -(lo / &w)).ok()?);
    }
    let g = f.compose_affine(&maps);
    let g = Function::parse(&g.to_string(), &g.names).ok()?;
    Some((g, out))
}

fn check_text(r: &ConditionReport) -> String {
    let mut s = format!("verdict: {}\n", r.verdict);
    let _ = writeln!(s, "H: {}", iv(&r.predicted_hull));
    for (k, t) in r.tau.iter().enumerate() {
        let _ = writeln!(s, "tau[{k}]: {}", iv(&t.0));
    }
    for v in &r.per_variable {
        let req = v.required.as_ref().map_or("empty".to_string(), |x| iv(&x.0));
        let got = v.achieved.as_ref().map_or("undetermined".to_string(), |x| iv(&x.0));
        let _ = writeln!(s, "variable {}: ratio {got}, required {req}: {}", v.i, v.verdict);
    }
    if let Some(w) = &r.failure_witness {
        let _ = writeln!(s, "witness box: {}", w.iter().map(iv).collect::<Vec<_>>().join(" x "));
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn cover_text(r: &CoverReport) -> String {
    let mut s = format!("depth {}: {} boxes\n", r.depth, r.boxes_evaluated);
    let _ = writeln!(s, "H: {}", iv(&r.hull_h));
    let _ = writeln!(s, "enclosure: {}", r.enclosure.iter().map(iv).collect::<Vec<_>>().join(" u "));
    let _ = writeln!(s, "total length: {}", iv(&r.total_length));
    if r.excised_boxes > 0 {
        let _ = writeln!(s, "excised boxes: {} (enclosure covers the remaining boxes only)", r.excised_boxes);
    }
    if r.gaps_in_h.is_empty() {
        let _ = writeln!(s, "no gap found in H at this depth (evidence, not proof)");
    } else {
        for g in &r.gaps_in_h {
            let _ = writeln!(s, "gap {} (certified: the image is not all of H)", open(g));
        }
    }
    s
}

fn execute(cli: &Cli, out: &mut String) -> Result<i32, Failure> {
    let json = cli.json;
    match &cli.command {
        Command::Thickness { set, depth } => {
            let spec = load_set(set)?;
            let r = thickness(&spec, *depth)?;
            emit(json, &r, || {
                let mut s = format!("{spec}: tau = {}{}\n", iv(&r.value), if r.exact { " (exact)" } else { "" });
                if let Some(w) = &r.witness {
                    let _ = writeln!(s, "witness at step {}: gap {} between {} and {}", w.step, open(&w.gap), iv(&w.left), iv(&w.right));
                }
                s
            }, out);
            Ok(EXIT_PASS)
        }
        Command::Check { target, search, depth, normalize: norm } => {
            let (mut f, mut specs) = load(target)?;
            let opts = CheckOptions { limits: limits(search)?, thickness_depth: *depth, ..CheckOptions::default() };
            let report = if *norm {
                match normalize(&f, &specs) {
                    Some((g, s)) => {
                        if !json {
                            let _ = writeln!(out, "normalized f: {g}");
                        }
                        (f, specs) = (g, s);
                        check_main(&f, &specs, &opts)?
                    }
                    None => check_scaled(&f, &specs, &opts)?,
                }
            } else {
                check_main(&f, &specs, &opts)?
            };
            emit(json, &report, || check_text(&report), out);
            Ok(report.verdict.exit_code())
        }
        Command::Cover { target, depth, budget, window, float, excise_zero } => {
            let (f, specs) = load(target)?;
            let opts = CoverOptions {
                budget: budget.get(),
                float: *float,
                excise_zero_denominators: *excise_zero,
                window: window.as_deref().map(parse_window).transpose()?,
                ..CoverOptions::default()
            };
            let r = image_cover(&f, &specs, *depth, &opts)?;
            emit(json, &r, || cover_text(&r), out);
            Ok(EXIT_PASS)
        }
        Command::Certify { target, z, max_depth, budget, excise_zero } => {
            let (f, specs) = load(target)?;
            let z = Interval::point(z.trim().parse::<Rational>()?);
            let opts = CoverOptions { budget: budget.get(), excise_zero_denominators: *excise_zero, ..CoverOptions::default() };
            let r = find_miss_certificate(&f, &specs, &z, *max_depth, &opts)?;
            emit(json, &r, || match &r {
                CertifyOutcome::Certified(c) => format!(
                    "certified at depth {} ({} boxes): {}\n",
                    c.depth, c.boxes_checked, c.statement
                ),
                CertifyOutcome::NotFound { max_depth, boxes_checked } => format!(
                    "no certificate up to depth {max_depth} ({boxes_checked} boxes); inconclusive\n"
                ),
            }, out);
            Ok(match r {
                CertifyOutcome::Certified(_) => EXIT_PASS,
                CertifyOutcome::NotFound { .. } => EXIT_INCONCLUSIVE,
            })
        }
        Command::LineCover { target, varying, window, search } => {
            let (f, specs) = load(target)?;
            let opts = CheckOptions { limits: limits(search)?, ..CheckOptions::default() };
            match real_line_cover(&f, &specs, *varying, &parse_window(window)?, &opts) {
                Ok(r) => {
                    emit(json, &r, || {
                        let mut s = String::new();
                        for p in &r.pieces {
                            let _ = writeln!(s, "t = {}: {}", p.t, iv(&p.inner));
                        }
                        let _ = writeln!(s, "verdict: {}", if r.verdict == LineVerdict::CoversWindow { "covers-window" } else { "uncovered" });
                        s
                    }, out);
                    Ok(if r.verdict == LineVerdict::CoversWindow { EXIT_PASS } else { EXIT_FAIL })
                }
                Err(crate::verify::VerifyError::PieceNotInterval { t, verdict, report }) => {
                    emit(json, &serde_json::json!({ "error": "piece_not_interval", "t": t, "check": report }), || {
                        format!("piece t = {t} is not certified to be an interval (check verdict {verdict})\n{}", check_text(&report))
                    }, out);
                    Ok(EXIT_FAIL)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Reproduce { preset } => {
            let r = reproduce(preset)?;
            emit(json, &r, || {
                format!(
                    "{}: {}\nexpected: {}\nobserved: {}\n{}\n",
                    r.name,
                    r.summary,
                    r.expected,
                    r.observed,
                    if r.passed { "PASS" } else { "FAIL" }
                )
            }, out);
            Ok(if r.passed { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::ListPresets => {
            let all = catalog();
            emit(json, &all, || {
                all.iter().map(|p| format!("{:<22} {}\n{:<22} expect: {}\n", p.name, p.summary, "", p.expected)).collect()
            }, out);
            Ok(EXIT_PASS)
        }
    }
}

/// Runs a parsed command, writing the report to `out` and errors to `err`.
pub fn run(cli: &Cli, out: &mut String, err: &mut String) -> i32 {
    if cli.threads > 0 {
        // Fails harmlessly if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match execute(cli, out) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    let (mut out, mut err) = (String::new(), String::new());
    let code = run(&cli, &mut out, &mut err);
    print!("{out}");
    eprint!("{err}");
    code
}
