//! Batch front end. Every subcommand reads its parameters from a flat
//! `key = value` config file, then from `key=value` items on the command
//! line, then from flags, later sources overriding earlier ones.
//!
//! Exit codes: 0 success, 1 parse or input error, 2 output degraded by the
//! precision budget, 3 construction obstructed.
//!
//! Numbers are written as exact rationals or `(lo, hi)` pairs; decimal
//! renderings appear only as strings next to the exact value.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::contfrac::{ContinuedFraction, QuotientSource};
use crate::dims::{self, DimValue, DimensionReport};
use crate::error::{Error, Result};
use crate::exactnum::{decimal, parse_rational, DyadicInterval, ExactReal, Rational, DEFAULT_BUDGET};
use crate::funcspace::{classify_cd, ApproxFunction};
use crate::kurzweil::{classify, series_partial, TailModel, VerdictTag};
use crate::lattice::{
    badness_profile, min_table, rational_point_dist, records_from_table, AffineSystem, Gamma, ScanOptions,
};
use crate::witness;

#[derive(Parser, Debug)]
#[command(name = "dioph", version, about = "Exact Diophantine approximation scans, constructions and formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum table, badness profile and series ledger of a system.
    Scan(Common),
    /// Explicit constructions: gamma, psi-c, psi-d, phi-dense, truncate, ball, merge.
    Witness(Common),
    /// Convergent table of a continued-fraction literal.
    Cf(Common),
    /// Dimension formulas and series classifiers.
    Dim(Common),
    /// Convergent or divergent class of a function, and series verdicts.
    Classify(Common),
    /// Cross-checks the kernels against brute-force oracles.
    Verify(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Mode or literal, followed by `key=value` parameters.
    items: Vec<String>,
    /// Flat `key = value` file; flags and items override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// System file (`m`, `n`, `A`, `gamma` lines).
    #[arg(long)]
    system: Option<String>,
    /// Approximation function, e.g. `pow:1,2` or `step:[(5,1/4)]`.
    #[arg(long)]
    psi: Option<String>,
    /// Horizon `T` of scans and sums.
    #[arg(long)]
    tmax: Option<String>,
    /// Precision budget in bits (at least 32).
    #[arg(long)]
    budget: Option<String>,
    /// Worker threads for shell evaluation.
    #[arg(long)]
    workers: Option<String>,
    /// Output directory (scan) or file (witness psi-c).
    #[arg(long)]
    out: Option<String>,
    /// Output format of tables.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed of the random sweeps in `verify`.
    #[arg(long)]
    seed: Option<String>,
    /// Norm cap for witness searches.
    #[arg(long)]
    cap: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Parameters of one run after merging config file, items and flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    /// Items without `=`, in order.
    pub positional: Vec<String>,
    pub params: BTreeMap<String, String>,
}

impl RunConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                let x: u64 = v.trim().parse().map_err(|_| Error::invalid(format!("{key} must be a non-negative integer, got '{v}'")))?;
                Ok(x)
            }
        }
    }

    fn positive_or(&self, key: &str, default: u64) -> Result<u64> {
        let x = self.u64_or(key, default)?;
        if x == 0 {
            return Err(Error::invalid(format!("{key} must be positive")));
        }
        Ok(x)
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.positive_or(key, default as u64)? as usize)
    }

    fn rational(&self, key: &str) -> Result<Option<Rational>> {
        self.get(key).map(|v| parse_rational(v.trim())).transpose()
    }

    fn big_or(&self, key: &str, default: BigInt) -> Result<BigInt> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_big(v),
        }
    }

    pub fn budget(&self) -> Result<u32> {
        let b = self.u64_or("budget", u64::from(DEFAULT_BUDGET))?;
        if b < 32 {
            return Err(Error::invalid("budget must be at least 32 bits"));
        }
        u32::try_from(b).map_err(|_| Error::invalid("budget too large"))
    }

    pub fn scan_options(&self) -> Result<ScanOptions> {
        Ok(ScanOptions { budget: self.budget()?, workers: self.usize_or("workers", 1)? })
    }

    pub fn format(&self, default: Format) -> Result<Format> {
        match self.get("format") {
            None => Ok(default),
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            Some(f) => Err(Error::invalid(format!("unknown format '{f}'"))),
        }
    }

    fn mode(&self) -> Option<&str> {
        self.positional.first().map(String::as_str)
    }
}

/// Integers as decimal digits or `b^e`.
fn parse_big(v: &str) -> Result<BigInt> {
    let v = v.trim();
    if let Some((b, e)) = v.split_once('^') {
        let b: BigInt = b.parse().map_err(|_| Error::invalid(format!("bad base in '{v}'")))?;
        let e: usize = e.parse().map_err(|_| Error::invalid(format!("bad exponent in '{v}'")))?;
        return Ok(num_traits::pow(b, e));
    }
    v.parse().map_err(|_| Error::invalid(format!("expected an integer, got '{v}'")))
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(normalize_key(k.trim()), v.trim().to_string());
    }
    Ok(out)
}

fn normalize_key(k: &str) -> String {
    match k {
        "T" => "tmax".into(),
        "k" => "K".into(),
        other => other.to_string(),
    }
}

fn build_config(command: &str, c: &Common) -> Result<RunConfig> {
    let mut params = match &c.config {
        Some(p) => parse_config_text(&read_file(p)?)?,
        None => BTreeMap::new(),
    };
    let mut positional = Vec::new();
    for item in &c.items {
        match item.split_once('=') {
            Some((k, v)) if !k.is_empty() && !k.contains(':') => {
                params.insert(normalize_key(k), v.to_string());
            }
            _ => positional.push(item.clone()),
        }
    }
    let flags = [
        ("system", &c.system),
        ("psi", &c.psi),
        ("tmax", &c.tmax),
        ("budget", &c.budget),
        ("workers", &c.workers),
        ("out", &c.out),
        ("seed", &c.seed),
        ("cap", &c.cap),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            params.insert(k.to_string(), v.clone());
        }
    }
    if let Some(f) = c.format {
        params.insert("format".into(), if f == Format::Csv { "csv".into() } else { "json".into() });
    }
    let cfg = RunConfig { command: command.to_string(), positional, params };
    cfg.budget()?;
    Ok(cfg)
}

fn read_file(p: impl AsRef<Path>) -> Result<String> {
    let p = p.as_ref();
    fs::read_to_string(p).map_err(|e| Error::invalid(format!("cannot read {}: {e}", p.display())))
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::InvalidInput(_) => 1,
        Error::PrecisionExhausted(_) | Error::GenerationOverflow(_) | Error::UndecidedMembership(_) => 2,
        Error::NotFoundWithinCap { .. } | Error::NoSuchN(_) | Error::DivergentTail(_) => 3,
    }
}

/// Output of a successful command: text for stdout and whether precision
/// degraded some of it.
struct Outcome {
    stdout: String,
    degraded: bool,
}

impl Outcome {
    fn text(s: String) -> Self {
        Outcome { stdout: s, degraded: false }
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, common) = match &cli.command {
        Command::Scan(c) => ("scan", c),
        Command::Witness(c) => ("witness", c),
        Command::Cf(c) => ("cf", c),
        Command::Dim(c) => ("dim", c),
        Command::Classify(c) => ("classify", c),
        Command::Verify(c) => ("verify", c),
    };
    let result = build_config(name, common).and_then(|cfg| execute(&cfg));
    match result {
        Ok(out) => {
            let mut so = std::io::stdout().lock();
            let _ = so.write_all(out.stdout.as_bytes());
            if out.degraded {
                eprintln!("warning: some values hit the precision budget; flagged rows are enclosures only");
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a merged configuration.
fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command.as_str() {
        "scan" => cmd_scan(cfg),
        "witness" => cmd_witness(cfg),
        "cf" => cmd_cf(cfg),
        "dim" => cmd_dim(cfg),
        "classify" => cmd_classify(cfg),
        "verify" => cmd_verify(cfg),
        other => Err(Error::invalid(format!("unknown command '{other}'"))),
    }
}

/// The system from `system=FILE`, or a one-dimensional one from `alpha=`
/// and optional `gamma=`.
fn load_system(cfg: &RunConfig) -> Result<AffineSystem> {
    if let Some(path) = cfg.get("system") {
        let text = read_file(path)?;
        return AffineSystem::parse(&text)
            .map_err(|(line, col, msg)| Error::parse(col, format!("{path}: line {line}, column {col}: {msg}")));
    }
    let alpha = cfg
        .get("alpha")
        .or_else(|| cfg.positional.iter().map(String::as_str).find(|p| is_real_literal(p)))
        .ok_or_else(|| Error::invalid("no system: pass --system FILE or alpha=LITERAL"))?;
    let a = ExactReal::parse(alpha)?;
    let g = match cfg.get("gamma") {
        Some(g) => ExactReal::parse(g)?,
        None => ExactReal::zero(),
    };
    AffineSystem::one_dim(a, g)
}

fn is_real_literal(s: &str) -> bool {
    ExactReal::parse(s).is_ok()
}

fn load_psi(cfg: &RunConfig) -> Result<ApproxFunction> {
    let spec = cfg
        .get("psi")
        .or_else(|| cfg.positional.iter().map(String::as_str).find(|p| ApproxFunction::parse(p).is_ok()))
        .ok_or_else(|| Error::invalid("no approximation function: pass --psi SPEC"))?;
    ApproxFunction::parse(spec)
}

/// A ψ file: the function literal on the first non-comment line.
pub fn read_psi_file(path: &str) -> Result<(String, ApproxFunction)> {
    let text = read_file(path)?;
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::invalid(format!("{path}: no function spec")))?;
    Ok((text.clone(), ApproxFunction::parse(line)?))
}

fn iv_json(iv: &DyadicInterval) -> Value {
    json!([iv.lo().to_string(), iv.hi().to_string()])
}

fn rat_json(x: &Rational) -> Value {
    Value::String(x.to_string())
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn emit(cfg: &RunConfig, text: String) -> Result<Outcome> {
    match cfg.get("out") {
        Some(p) => {
            write_out(Path::new(p), &text)?;
            Ok(Outcome::text(String::new()))
        }
        None => Ok(Outcome::text(text)),
    }
}

fn cmd_scan(cfg: &RunConfig) -> Result<Outcome> {
    let sys = load_system(cfg)?;
    let opts = cfg.scan_options()?;
    let t_max = cfg.positive_or("tmax", 1000)?;
    let l = cfg.positive_or("l", 1)?;
    let format = cfg.format(Format::Csv)?;
    let table = min_table(&sys, l, t_max, &opts)?;
    let bad = badness_profile(&sys, t_max, &opts)?;
    let ledger = series_partial(&sys, l, t_max, &opts)?;
    let degraded = table.any_exhausted() || bad.exhausted || ledger.exhausted;
    let mut files: Vec<(&str, String)> = Vec::new();
    match format {
        Format::Csv => {
            files.push(("min_table.csv", table.to_csv(sys.n)));
            files.push(("badness.csv", bad.to_csv(sys.n)));
            files.push(("series.csv", ledger.to_csv()));
            if l == 1 {
                let rec = records_from_table(&table)?;
                let mut s = String::from("t,lo,hi");
                for i in 1..=sys.n {
                    s.push_str(&format!(",q{i}"));
                }
                s.push('\n');
                for r in &rec.entries {
                    s.push_str(&format!("{},{},{}", r.t, r.value.lo(), r.value.hi()));
                    for c in &r.q {
                        s.push_str(&format!(",{c}"));
                    }
                    s.push('\n');
                }
                files.push(("records.csv", s));
            }
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| json!({"t": r.t.to_string(), "min": iv_json(&r.value), "argmin": r.argmin.iter().map(|c| c.to_string()).collect::<Vec<_>>(), "exhausted": r.exhausted}))
                .collect();
            files.push(("min_table.json", to_json_text(&json!({"l": l.to_string(), "rows": rows}))));
            files.push((
                "badness.json",
                to_json_text(&json!({"certificate_c": rat_json(&bad.certificate_c), "certificate_c_decimal": decimal(&bad.certificate_c, 6), "tail_from": bad.tail_from.to_string(), "global_c": rat_json(&bad.global_c), "exhausted": bad.exhausted})),
            ));
            let lr: Vec<Value> = ledger
                .rows
                .iter()
                .map(|r| json!({"t": r.t.to_string(), "term": iv_json(&r.term), "partial": iv_json(&r.partial)}))
                .collect();
            files.push(("series.json", to_json_text(&json!({"l": l.to_string(), "horizon": t_max.to_string(), "rows": lr}))));
        }
    }
    let summary = format!(
        "system:\n{}certificate_c = {} (~{}) over {} <= |q| <= {t_max}\nglobal_c = {}\nS_{l}(T={t_max}) in [{}, {}]\nexhausted = {degraded}\n",
        sys.to_spec(),
        bad.certificate_c,
        decimal(&bad.certificate_c, 6),
        bad.tail_from,
        bad.global_c,
        ledger.partial.lo(),
        ledger.partial.hi()
    );
    let stdout = match cfg.get("out") {
        Some(dir) => {
            let dir = Path::new(dir);
            fs::create_dir_all(dir).map_err(|e| Error::invalid(format!("cannot create {}: {e}", dir.display())))?;
            for (name, text) in &files {
                write_out(&dir.join(name), text)?;
            }
            write_out(&dir.join("summary.txt"), &summary)?;
            summary
        }
        None => {
            let mut s = String::new();
            for (name, text) in &files {
                s.push_str(&format!("# {name}\n{text}"));
            }
            s
        }
    };
    Ok(Outcome { stdout, degraded })
}

fn default_cap() -> BigInt {
    num_traits::pow(BigInt::from(10), 60)
}

fn cmd_witness(cfg: &RunConfig) -> Result<Outcome> {
    let mode = cfg.mode().ok_or_else(|| Error::invalid("witness needs a mode: gamma, psi-c, psi-d, phi-dense, truncate, ball or merge"))?;
    let json_out = cfg.format(Format::Csv)? == Format::Json;
    match mode {
        "gamma" => witness_gamma(cfg, json_out),
        "psi-c" => witness_psi_c(cfg, json_out),
        "psi-d" => witness_psi_d(cfg, json_out),
        "phi-dense" => witness_phi_dense(cfg, json_out),
        "truncate" => witness_truncate(cfg, json_out),
        "ball" => witness_ball(cfg, json_out),
        "merge" => witness_merge(cfg),
        other => Err(Error::invalid(format!("unknown witness mode '{other}'"))),
    }
}

/// Adds the badness certificate of the system to an obstruction error.
fn obstruction(sys: &AffineSystem, opts: &ScanOptions, err: Error) -> Error {
    match err {
        Error::NotFoundWithinCap { cap, deepest, blocking } => {
            let cert = match badness_profile(sys, 2000, opts) {
                Ok(b) => format!(
                    "; Bad certificate: inf over 1 <= |q| <= 2000 of |q|^n <Aq-gamma>^m >= {} (~{})",
                    b.global_c,
                    decimal(&b.global_c, 6)
                ),
                Err(_) => String::new(),
            };
            Error::NotFoundWithinCap { cap, deepest, blocking: format!("{blocking}{cert}") }
        }
        other => other,
    }
}

fn witness_json(ws: &witness::WitnessSequence) -> Value {
    let entries: Vec<Value> = ws
        .entries
        .iter()
        .map(|e| {
            json!({
                "q": e.q.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "norm": e.norm.to_string(),
                "dist": iv_json(&e.dist),
                "weighted": iv_json(&e.weighted),
            })
        })
        .collect();
    Value::Array(entries)
}

fn witness_gamma(cfg: &RunConfig, json_out: bool) -> Result<Outcome> {
    let sys = load_system(cfg)?;
    let opts = cfg.scan_options()?;
    let k = cfg.usize_or("K", 3)?;
    let cap = cfg.big_or("cap", default_cap())?;
    let ws = witness::build_greedy_gamma_sequence(&sys, k, &cap, &opts).map_err(|e| obstruction(&sys, &opts, e))?;
    let gw = witness::construct_gamma(&sys, &ws, k, opts.budget.max(256))?;
    let text = if json_out {
        to_json_text(&json!({
            "witnesses": witness_json(&ws),
            "gamma": gw.value.iter().map(iv_json).collect::<Vec<_>>(),
            "tail_bound": rat_json(&gw.tail_bound),
            "p": gw.p.iter().map(|p| p.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }))
    } else {
        let mut s = ws.to_text();
        for (i, v) in gw.value.iter().enumerate() {
            s.push_str(&format!("gamma_{} in [{}, {}] +- {}\n", i + 1, v.lo(), v.hi(), gw.tail_bound));
        }
        s
    };
    emit(cfg, text)
}

fn witness_psi_c(cfg: &RunConfig, json_out: bool) -> Result<Outcome> {
    let sys = load_system(cfg)?;
    let opts = cfg.scan_options()?;
    let count = cfg.usize_or("count", 4)?;
    let cap = cfg.big_or("cap", default_cap())?;
    let ws = witness::find_c_witness_sequence(&sys, count, &cap, &opts).map_err(|e| obstruction(&sys, &opts, e))?;
    let pc = witness::construct_psi_c(&ws)?;
    let spec = pc.psi.to_spec(sys.m).expect("step functions have a spec");
    let cert = format!(
        "# certificate\n# decreasing = {}\n# finite_sum = {}\n# sum_bound = {}\n# finite_sum <= sum_bound: {}\n# witnesses_below_psi = {}\n",
        pc.decreasing,
        pc.finite_sum,
        pc.sum_bound,
        pc.finite_sum <= pc.sum_bound,
        pc.witness_ok.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")
    );
    if json_out {
        let v = json!({
            "psi": spec,
            "witnesses": witness_json(&ws),
            "decreasing": pc.decreasing,
            "finite_sum": rat_json(&pc.finite_sum),
            "sum_bound": rat_json(&pc.sum_bound),
            "witness_ok": pc.witness_ok,
            "certified": pc.all_certified(),
        });
        return emit(cfg, to_json_text(&v));
    }
    match cfg.get("out") {
        Some(p) => {
            write_out(Path::new(p), &format!("{spec}\n"))?;
            Ok(Outcome::text(format!("{}{cert}", ws.to_text())))
        }
        None => Ok(Outcome::text(format!("{spec}\n{cert}"))),
    }
}

fn witness_psi_d(cfg: &RunConfig, json_out: bool) -> Result<Outcome> {
    let sys = load_system(cfg)?;
    let opts = cfg.scan_options()?;
    let l0 = cfg.positive_or("l0", 1)?;
    let t_max = cfg.positive_or("tmax", 1000)?;
    let d = witness::construct_psi_d(&sys, l0, t_max, &opts)?;
    let spec = d.psi.to_spec(sys.m).expect("step functions have a spec");
    if json_out {
        return emit(cfg, to_json_text(&json!({"psi": spec, "degenerate": d.degenerate})));
    }
    emit(cfg, format!("{spec}\n# degenerate = {}\n", d.degenerate))
}

fn witness_phi_dense(cfg: &RunConfig, json_out: bool) -> Result<Outcome> {
    let sys = load_system(cfg)?;
    let opts = cfg.scan_options()?;
    let psi = load_psi(cfg)?;
    let eps = cfg.rational("eps")?.unwrap_or_else(|| Rational::new(1.into(), 10.into()));
    let count = cfg.usize_or("count", 4)?;
    let cap = cfg.big_or("cap", default_cap())?;
    let dense = witness::construct_phi_dense(&psi, &sys, &eps, count, &cap, &opts).map_err(|e| obstruction(&sys, &opts, e))?;
    let bumps: Vec<Value> = match &dense.phi {
        ApproxFunction::Bumped { bumps, .. } => bumps
            .iter()
            .map(|(lo, hi, add)| json!({"lo": lo.to_string(), "hi": hi.to_string(), "add": rat_json(add)}))
            .collect(),
        _ => Vec::new(),
    };
    let v = json!({
        "psi": psi.to_string(),
        "eps": rat_json(&eps),
        "bumps": bumps,
        "distance": iv_json(&dense.distance),
        "distance_below_eps": dense.distance.hi() < &eps,
        "witness_ok": dense.witness_ok,
    });
    if json_out {
        return emit(cfg, to_json_text(&v));
    }
    let mut s = format!("psi = {psi}\neps = {eps}\n");
    if let Value::Array(b) = &v["bumps"] {
        for x in b {
            s.push_str(&format!("bump ({}, {}] += {}\n", x["lo"].as_str().unwrap_or(""), x["hi"].as_str().unwrap_or(""), x["add"].as_str().unwrap_or("")));
        }
    }
    s.push_str(&format!("d(phi, psi) in [{}, {}]\n", dense.distance.lo(), dense.distance.hi()));
    s.push_str(&format!("witnesses_below_phi = {}\n", dense.witness_ok.iter().all(|&b| b)));
    emit(cfg, s)
}

fn witness_truncate(cfg: &RunConfig, json_out: bool) -> Result<Outcome> {
    let psi = load_psi(cfg)?;
    let eps = cfg.rational("eps")?.unwrap_or_else(|| Rational::new(1.into(), 10.into()));
    let opts = cfg.scan_options()?;
    let sys = if cfg.get("system").is_some() || cfg.get("alpha").is_some() { Some(load_system(cfg)?) } else { None };
    let (m, n) = match &sys {
        Some(s) => (s.m, s.n),
        None => (cfg.usize_or("m", 1)?, cfg.usize_or("n", 1)?),
    };
    let t = witness::truncate_to_exterior(&psi, m, n, &eps, sys.as_ref().map(|s| (s, &opts)))?;
    let sols = t.solutions_below.as_ref().map(|c| json!([c.lo.to_string(), c.hi.to_string()]));
    if json_out {
        let v = json!({"cut": t.cut.to_string(), "distance": iv_json(&t.distance), "solutions_below_cut": sols});
        return emit(cfg, to_json_text(&v));
    }
    let mut s = format!("N = {}\nd(phi, psi) in [{}, {}]\n", t.cut, t.distance.lo(), t.distance.hi());
    if let Some(c) = &t.solutions_below {
        s.push_str(&format!("solutions with |q| < N in [{}, {}]\nsolutions with |q| >= N = 0\n", c.lo, c.hi));
    }
    emit(cfg, s)
}

fn witness_ball(cfg: &RunConfig, json_out: bool) -> Result<Outcome> {
    let sys = load_system(cfg)?;
    let opts = cfg.scan_options()?;
    let psi = load_psi(cfg)?;
    let k = cfg.usize_or("K", 3)?;
    let cap = cfg.positive_or("cap", 1000)?;
    let b = witness::ball_radius_ck(&psi, &sys, k, cap, &opts)?;
    if json_out {
        let sols: Vec<Value> = b
            .solutions
            .iter()
            .map(|s| json!({"q": s.q.iter().map(|x| x.to_string()).collect::<Vec<_>>(), "dist": iv_json(&s.dist), "margin": rat_json(&s.margin)}))
            .collect();
        return emit(cfg, to_json_text(&json!({"delta": rat_json(&b.delta), "solutions": sols})));
    }
    let mut s = format!("delta = {}\n", b.delta);
    for sol in &b.solutions {
        let q: Vec<String> = sol.q.iter().map(|x| x.to_string()).collect();
        s.push_str(&format!("q = [{}] margin = {}\n", q.join(","), sol.margin));
    }
    emit(cfg, s)
}

fn witness_merge(cfg: &RunConfig) -> Result<Outcome> {
    let files: Vec<&String> = cfg.positional.iter().skip(1).collect();
    if files.is_empty() {
        return Err(Error::invalid("merge needs at least one psi file"));
    }
    let m = cfg.usize_or("m", 1)?;
    let n = cfg.usize_or("n", 1)?;
    let list: Vec<ApproxFunction> = files.iter().map(|f| read_psi_file(f).map(|(_, p)| p)).collect::<Result<_>>()?;
    let merged = witness::merge_common_psi(&list, m, n)?;
    let body = match merged.psi.to_spec(m) {
        Some(s) => format!("{s}\n"),
        None => format!("{}\n", merged.psi),
    };
    let text = if list.len() == 1 {
        body
    } else {
        format!(
            "{body}# merged_sum in [{}, {}]\n# sum_of_sums in [{}, {}]\n# certified = {}\n",
            merged.merged_sum.lo(),
            merged.merged_sum.hi(),
            merged.sum_of_sums.lo(),
            merged.sum_of_sums.hi(),
            merged.certified
        )
    };
    emit(cfg, text)
}

fn cmd_cf(cfg: &RunConfig) -> Result<Outcome> {
    let lit = cfg
        .get("alpha")
        .or(cfg.mode())
        .ok_or_else(|| Error::invalid("cf needs a literal such as golden or liouville:10"))?;
    let k = cfg.usize_or("K", 10)?;
    let cf = ContinuedFraction::parse(lit)?;
    let table = cf.convergents(k)?;
    let text = match cfg.format(Format::Csv)? {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| json!({"k": r.k.to_string(), "a": r.a.to_string(), "p": r.p.to_string(), "q": r.q.to_string()}))
                .collect();
            to_json_text(&json!({"alpha": cf.source().spec(), "rows": rows}))
        }
    };
    emit(cfg, text)
}

fn report_json(r: &DimensionReport) -> Value {
    let (lo, hi) = r.value.bounds();
    let value = match &r.value {
        DimValue::Exact(x) => json!({"exact": rat_json(x)}),
        DimValue::Bracket(..) => json!({"lo": rat_json(&lo), "hi": rat_json(&hi)}),
    };
    json!({
        "formula": r.formula_id,
        "value": value,
        "decimal": [decimal(&lo, 6), decimal(&hi, 6)],
        "hypotheses": r.hypotheses.iter().map(|(h, ok)| json!({"check": h, "holds": ok})).collect::<Vec<_>>(),
        "warnings": r.warnings,
    })
}

/// Continued fraction for dimension windows: growth literals get a cap that
/// fits the window.
fn window_cf(lit: &str, k: usize) -> Result<ContinuedFraction> {
    let cf = ContinuedFraction::parse(lit)?;
    match cf.source() {
        QuotientSource::Growth(v) => {
            let start: Vec<u64> = v.iter().map(|a| a.try_into().map_err(|_| Error::invalid("growth start too large"))).collect::<Result<_>>()?;
            dims::growth_cf_for_window(&start, k)
        }
        _ => Ok(cf),
    }
}

fn cmd_dim(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = serde_json::Map::new();
    if let (Some(_), Some(_)) = (cfg.get("m"), cfg.get("n")) {
        let m = cfg.usize_or("m", 1)?;
        let n = cfg.usize_or("n", 1)?;
        if m * n > 1 {
            out.insert("sing".into(), rat_json(&dims::dim_sing_homog(m, n)?));
        }
        if m > n {
            out.insert("omega_lower".into(), rat_json(&dims::dim_omega_gamma_lower(m, n)?));
        }
        if let Some(kappa) = cfg.rational("kappa")? {
            out.insert("sing_inhomog_lower".into(), rat_json(&dims::dim_sing_inhomog_lower(m, n, &kappa)?));
        }
        if let Some(psi) = cfg.get("psi") {
            let psi = ApproxFunction::parse(psi)?;
            let side = dims::kg_classifier(&psi, m, n)?;
            out.insert("kg".into(), Value::String(format!("{side:?}")));
            if let Some(s) = cfg.rational("s")? {
                let (class, e) = dims::kimkim_classifier(&psi, m, n, &s)?;
                out.insert("kimkim".into(), json!({"class": format!("{class:?}"), "exponent": rat_json(&e)}));
            }
        }
    }
    if let Some(w) = cfg.get("w") {
        let w = if w == "inf" { None } else { Some(parse_rational(w)?) };
        let (upper, exact) = dims::dim_omega_alpha_bounds(w.as_ref())?;
        out.insert("omega_alpha_upper".into(), rat_json(&upper));
        out.insert("omega_alpha_growth".into(), rat_json(&exact));
    }
    if let Some(tau) = cfg.rational("tau")? {
        let lit = cfg.get("alpha").or(cfg.mode()).ok_or_else(|| Error::invalid("tau needs a continued fraction: alpha=LITERAL"))?;
        let k = cfg.usize_or("K", 20)?;
        let cf = window_cf(lit, k)?;
        out.insert("simplified".into(), report_json(&dims::simplified_dim_expr(&cf, &tau, k)?));
        if tau != Rational::one() {
            match dims::dim_u_tau_estimate(&cf, &tau, k) {
                Ok(r) => {
                    out.insert("u_tau".into(), report_json(&r));
                }
                Err(e @ Error::InvalidInput(_)) => {
                    out.insert("u_tau".into(), json!({"error": e.to_string()}));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("dim needs m= and n=, w=, or alpha= with tau="));
    }
    let v = Value::Object(out);
    let text = match cfg.format(Format::Json)? {
        Format::Json => format!("{}\n", serde_json::to_string(&v).expect("json values serialize")),
        Format::Csv => {
            let mut s = String::from("key,value\n");
            for (k, x) in v.as_object().expect("object") {
                s.push_str(&format!("{k},\"{}\"\n", x.to_string().replace('"', "'")));
            }
            s
        }
    };
    emit(cfg, text)
}

fn cmd_classify(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = serde_json::Map::new();
    let mut degraded = false;
    let has_system = cfg.get("system").is_some() || cfg.get("alpha").is_some();
    let psi = if cfg.get("psi").is_some() || cfg.positional.iter().any(|p| ApproxFunction::parse(p).is_ok()) {
        Some(load_psi(cfg)?)
    } else {
        None
    };
    if let Some(psi) = &psi {
        let m = cfg.usize_or("m", 1)?;
        let n = cfg.usize_or("n", 1)?;
        let c = classify_cd(psi, m, n)?;
        out.insert("psi".into(), Value::String(psi.to_string()));
        out.insert("class".into(), Value::String(c.tag.as_str().into()));
        out.insert("cutoff".into(), Value::String(c.cutoff.to_string()));
        out.insert("partial".into(), iv_json(&c.partial));
        if let Some(t) = &c.tail {
            out.insert("tail".into(), iv_json(t));
        }
        if let Some((k, s)) = &c.divergence {
            out.insert("divergence_term".into(), json!({"c": rat_json(k), "s": rat_json(s)}));
        }
    }
    if has_system {
        let sys = load_system(cfg)?;
        let opts = cfg.scan_options()?;
        let l = cfg.positive_or("l", 1)?;
        let t_max = cfg.positive_or("tmax", 1000)?;
        let model = match cfg.get("tail") {
            None | Some("none") => TailModel::None,
            Some("zero") => TailModel::ExactZero,
            Some(a) => TailModel::PowerTail(parse_rational(a)?),
        };
        let v = classify(&sys, l, t_max, &model, &opts)?;
        let mut rec = serde_json::Map::new();
        rec.insert("verdict".into(), Value::String(v.tag_str().into()));
        match &v.tag {
            VerdictTag::ConvergedWithBound(b) => {
                rec.insert("bound".into(), rat_json(b));
            }
            VerdictTag::DivergedWithWitness { c, shift } => {
                rec.insert("c".into(), rat_json(c));
                rec.insert("shift".into(), Value::String(shift.to_string()));
            }
            VerdictTag::Undecided => {}
        }
        rec.insert("l".into(), Value::String(v.l.to_string()));
        rec.insert("horizon".into(), Value::String(v.horizon.to_string()));
        rec.insert("partial".into(), iv_json(&v.partial));
        rec.insert("note".into(), Value::String(v.note.clone()));
        rec.insert("assumptions".into(), json!(v.assumptions));
        out.insert("series".into(), Value::Object(rec));
        degraded = v.note.contains("budget");
    }
    if out.is_empty() {
        return Err(Error::invalid("classify needs a function (--psi) or a system"));
    }
    let text = format!("{}\n", serde_json::to_string(&Value::Object(out)).expect("json values serialize"));
    let mut o = emit(cfg, text)?;
    o.degraded = degraded;
    Ok(o)
}

/// One cross-check of the verify suite.
struct Check {
    name: String,
    ok: bool,
    detail: String,
}

/// `M_1(t)` by enumerating the whole box `‖q‖ ≤ t`, rational systems only.
fn brute_min(sys: &AffineSystem, t: i64) -> Rational {
    let n = sys.n;
    let mut best: Option<Rational> = None;
    let mut q = vec![-t; n];
    loop {
        if q.iter().any(|&x| x != 0) {
            let qb: Vec<BigInt> = q.iter().map(|&x| BigInt::from(x)).collect();
            let d = rational_point_dist(sys, &qb).expect("rational system");
            if best.as_ref().map_or(true, |b| &d < b) {
                best = Some(d);
            }
        }
        let mut i = 0;
        while i < n {
            q[i] += 1;
            if q[i] <= t {
                break;
            }
            q[i] = -t;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    best.expect("t >= 1")
}

fn random_rational_system(rng: &mut ChaCha8Rng, m: usize, n: usize, max_den: i64) -> Result<AffineSystem> {
    let pick = |rng: &mut ChaCha8Rng| {
        let d = rng.gen_range(1..=max_den);
        let p = rng.gen_range(0..d);
        ExactReal::rational(Rational::new(p.into(), d.into()))
    };
    let a: Vec<Vec<ExactReal>> = (0..m).map(|_| (0..n).map(|_| pick(rng)).collect()).collect();
    let g: Vec<ExactReal> = (0..m).map(|_| pick(rng)).collect();
    AffineSystem::new(m, n, a, Gamma::Values(g))
}

fn verify_min_tables(rng: &mut ChaCha8Rng, count: usize, opts: &ScanOptions) -> Result<Check> {
    let t_max = 6u64;
    for i in 0..count {
        let m = rng.gen_range(1..=2);
        let n = rng.gen_range(1..=2);
        let sys = random_rational_system(rng, m, n, 30)?;
        let tab = min_table(&sys, 1, t_max, opts)?;
        for row in &tab.rows {
            let want = brute_min(&sys, row.t as i64);
            if row.value != DyadicInterval::point(want.clone()) {
                return Ok(Check {
                    name: "min_table".into(),
                    ok: false,
                    detail: format!("system {i} at t={}: kernel {:?}, brute force {want}", row.t, row.value),
                });
            }
        }
    }
    Ok(Check { name: "min_table".into(), ok: true, detail: format!("{count} random rational systems, T={t_max}") })
}

fn verify_sandwich(rng: &mut ChaCha8Rng, count: usize) -> Result<Check> {
    for _ in 0..count {
        let len = rng.gen_range(1..=4);
        let quot: Vec<u64> = (0..len).map(|_| rng.gen_range(1..=9)).collect();
        let cf = ContinuedFraction::periodic(&quot)?;
        for k in 1..=15 {
            let d = cf.qk_dist(k)?;
            let lo = Rational::new(BigInt::one(), cf.q(k + 1)? + cf.q(k)?);
            let hi = Rational::new(BigInt::one(), cf.q(k + 1)?);
            if !d.strictly_inside(&lo, &hi) {
                return Ok(Check { name: "cf_sandwich".into(), ok: false, detail: format!("cf:{quot:?} k={k}") });
            }
        }
    }
    Ok(Check { name: "cf_sandwich".into(), ok: true, detail: format!("{count} periodic expansions, k <= 15") })
}

fn verify_formulas() -> Result<Check> {
    let r = |a: i64, b: i64| Rational::new(a.into(), b.into());
    let ok = dims::dim_sing_homog(2, 1)? == r(4, 3)
        && dims::dim_sing_homog(1, 2)? == r(4, 3)
        && dims::dim_sing_homog(2, 2)? == r(3, 1)
        && dims::dim_omega_gamma_lower(2, 1)? == r(2, 9);
    Ok(Check { name: "dim_formulas".into(), ok, detail: "closed forms at (2,1), (1,2), (2,2)".into() })
}

fn verify_series(rng: &mut ChaCha8Rng, opts: &ScanOptions) -> Result<Check> {
    // Series ledger terms against brute-force minima.
    let sys = random_rational_system(rng, 1, 1, 40)?;
    let led = series_partial(&sys, 1, 20, opts)?;
    let mut total = Rational::zero();
    for t in 1..=20 {
        total += brute_min(&sys, t);
    }
    let ok = led.partial == DyadicInterval::point(total.clone());
    Ok(Check { name: "series_partial".into(), ok, detail: format!("S_1(T=20) = {total}") })
}

fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.u64_or("seed", 0)?;
    let count = cfg.usize_or("count", 20)?;
    let opts = cfg.scan_options()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        verify_min_tables(&mut rng, count, &opts)?,
        verify_sandwich(&mut rng, count)?,
        verify_formulas()?,
        verify_series(&mut rng, &opts)?,
    ];
    let mut s = String::new();
    for c in &checks {
        s.push_str(&format!("{} {}: {}\n", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    if checks.iter().all(|c| c.ok) {
        emit(cfg, s)
    } else {
        let _ = std::io::stdout().write_all(s.as_bytes());
        Err(Error::invalid("oracle cross-check failed"))
    }
}
