//! The twelve acceptance criteria, one `PASS`/`FAIL` line each.
//!
//! Runs without the libtest harness so every line reaches the console; the
//! process exits non-zero when any criterion fails.

mod common;

use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use dioph::contfrac::ContinuedFraction;
use dioph::dims::{dim_omega_gamma_lower, dim_sing_homog, growth_cf_for_window, simplified_dim_expr};
use dioph::exactnum::{rat, ExactReal, Rational};
use dioph::funcspace::{count_solutions, metric_d, ApproxFunction};
use dioph::kurzweil::{prefix_inequality_check, prefix_inequality_sweep, series_partial};
use dioph::lattice::{badness_profile, min_table, record_minima, AffineSystem, ScanOptions, Verdict};
use dioph::witness::{
    ball_radius_ck, build_greedy_gamma_sequence, construct_gamma, construct_phi_dense, construct_psi_c,
    find_c_witness_sequence, gamma_series_bound, truncate_to_exterior,
};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use common::RawSystem;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn one_dim(alpha: &str) -> AffineSystem {
    AffineSystem::one_dim(ExactReal::parse(alpha).unwrap(), ExactReal::zero()).unwrap()
}

fn big(x: u64) -> BigInt {
    BigInt::from(x)
}

fn oracle_equivalence() -> Outcome {
    let corpus = common::corpus();
    let start = Instant::now();
    let opts = ScanOptions::default();
    for (i, raw) in corpus.iter().enumerate() {
        let table = min_table(&raw.to_system(), 1, 15, &opts).map_err(err)?;
        let naive = common::naive_min_table(raw, 1, 15);
        for (row, (value, q)) in table.rows.iter().zip(&naive) {
            ensure(row.value.is_point() && row.value.lo() == value, || {
                format!("system {i} t={}: got [{}, {}], oracle {value}", row.t, row.value.lo(), row.value.hi())
            })?;
            ensure(&row.argmin == q, || format!("system {i} t={}: argmin {:?}, oracle {q:?}", row.t, row.argmin))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("100 systems, T=15, {:.2}s", elapsed.as_secs_f64()))
}

fn cf_sandwich() -> Outcome {
    let mut r = common::rng(0x5eed_0002);
    let mut checked = 0;
    for _ in 0..50 {
        let period: Vec<u64> = (0..30).map(|_| r.gen_range(1..=9)).collect();
        let cf = ContinuedFraction::periodic(&period).map_err(err)?;
        for k in 1..=25 {
            let (qk, qk1) = (cf.q(k).map_err(err)?, cf.q(k + 1).map_err(err)?);
            let lo = Rational::new(BigInt::one(), &qk1 + &qk);
            let hi = Rational::new(BigInt::one(), qk1.clone());
            let d = cf.qk_dist(k).map_err(err)?;
            ensure(d.strictly_inside(&lo, &hi), || format!("period {period:?} k={k}: [{}, {}]", d.lo(), d.hi()))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (cf, k) pairs"))
}

fn golden_certificate() -> Outcome {
    let sys = one_dim("golden");
    let opts = ScanOptions::default();
    let bad = badness_profile(&sys, 10_000, &opts).map_err(err)?;
    // Oracle: q⟨qα⟩ over the same window from a rational approximation of α.
    let (alpha, e) = common::golden_rational();
    let mut oracle: Option<Rational> = None;
    for q in bad.tail_from..=10_000u64 {
        let x = &alpha * Rational::from_integer(big(q));
        let f = x.fract();
        let d = f.clone().min(Rational::one() - f);
        let v = d * Rational::from_integer(big(q));
        if oracle.as_ref().map_or(true, |o| &v < o) {
            oracle = Some(v);
        }
    }
    let oracle = oracle.unwrap();
    let slack = &e * Rational::from_integer(big(10_000 * 10_000));
    ensure(bad.certificate_c <= &oracle + &slack, || format!("certificate {} above oracle {oracle}", bad.certificate_c))?;
    ensure(&oracle - &bad.certificate_c < rat(1, 1_000_000), || "certificate looser than 1e-6".into())?;
    ensure(bad.certificate_c >= rat(447, 1000) && bad.certificate_c <= rat(448, 1000), || {
        format!("certificate {} outside [0.447, 0.448]", common::to_f64(&bad.certificate_c))
    })?;
    let rec = record_minima(&sys, 10_000, &opts).map_err(err)?;
    let ts: Vec<u64> = rec.entries.iter().map(|r| r.t).collect();
    ensure(ts == common::fibonacci_up_to(10_000), || format!("records {ts:?}"))?;
    Ok(format!(
        "certificate_c = {:.6} over {} <= |q| <= 10^4, {} records",
        common::to_f64(&bad.certificate_c),
        bad.tail_from,
        ts.len()
    ))
}

fn psi_c_certificates() -> Outcome {
    let sys = one_dim("liouville:10");
    let ws = find_c_witness_sequence(&sys, 4, &big(1_000_000), &ScanOptions::default()).map_err(err)?;
    ensure(ws.verify(), || "witness inequalities fail on recheck".into())?;
    let pc = construct_psi_c(&ws).map_err(err)?;
    ensure(pc.decreasing, || "psi not non-increasing".into())?;
    ensure(pc.witness_ok.iter().all(|&b| b), || format!("witness checks {:?}", pc.witness_ok))?;
    ensure(pc.finite_sum <= rat(15, 16), || format!("finite part {}", pc.finite_sum))?;
    ensure(pc.all_certified(), || "not all certified".into())?;
    let norms: Vec<String> = ws.entries.iter().map(|e| e.norm.to_string()).collect();
    Ok(format!("norms {}, finite part {}", norms.join(","), pc.finite_sum))
}

fn gamma_round_trip() -> Outcome {
    const K: usize = 3;
    let sys = one_dim("liouville:10");
    let cap = BigInt::from(10u64).pow(400);
    let ws = build_greedy_gamma_sequence(&sys, K + 2, &cap, &ScanOptions::default()).map_err(err)?;
    ensure(ws.verify(), || "greedy displays fail on recheck".into())?;
    let gw = construct_gamma(&sys, &ws, K, 1024).map_err(err)?;
    let target = sys.with_gamma(gw.as_gamma()).map_err(err)?;
    let n_k = ws.prefix_norm(K).to_u64().ok_or("N_K exceeds u64")?;
    // The window [N_K, N_K+200] lies in the block (N_K, N_{K+1}] (plus t = N_K),
    // where q_1+⋯+q_K is admissible once its norm is exactly N_K.
    let head: BigInt = ws.entries[..K].iter().map(|e| e.q[0].clone()).sum();
    ensure(head.abs() == big(n_k), || format!("|q_1+...+q_K| = {head}, N_K = {n_k}"))?;
    let ledger = series_partial(&target, n_k, n_k + 200, &ScanOptions::with_budget(1024)).map_err(err)?;
    let bound = gamma_series_bound(&ws, K - 1);
    let later_blocks = gamma_series_bound(&ws, K);
    ensure(ledger.partial.hi() < &bound, || {
        format!(
            "partial <= {:.3e} not below bound {:.3e}",
            common::to_f64(ledger.partial.hi()),
            common::to_f64(&bound)
        )
    })?;
    Ok(format!(
        "N_K = {n_k}, partial <= {:.3e} < {:.3e}; blocks past N_(K+1) alone give {}",
        common::to_f64(ledger.partial.hi()),
        common::to_f64(&bound),
        if later_blocks.is_zero() { "0".to_string() } else { format!("~2^{}", log2_approx(&later_blocks)) }
    ))
}

fn log2_approx(x: &Rational) -> i64 {
    x.numer().bits() as i64 - x.denom().bits() as i64
}

fn dense_approximant() -> Outcome {
    let sys = one_dim("liouville:10");
    let psi = ApproxFunction::parse("pow:1,2").unwrap();
    let eps = rat(1, 10);
    let opts = ScanOptions::default();
    let dense = construct_phi_dense(&psi, &sys, &eps, 4, &BigInt::from(10u64).pow(30), &opts).map_err(err)?;
    let d = metric_d(&dense.phi, &psi, 1, 1).map_err(err)?;
    ensure(d.hi() < &eps, || format!("d(phi, psi) <= {}", d.hi()))?;
    ensure(dense.witness_ok.iter().all(|&b| b), || format!("witnesses {:?}", dense.witness_ok))?;
    let tr = truncate_to_exterior(&psi, 1, 1, &eps, Some((&sys, &opts))).map_err(err)?;
    let dt = metric_d(&tr.phi, &psi, 1, 1).map_err(err)?;
    ensure(dt.hi() < &eps, || format!("d(phi', psi) <= {}", dt.hi()))?;
    let cut = tr.cut.to_u64().ok_or("cut exceeds u64")?;
    let below = count_solutions(&sys, &tr.phi, cut - 1, &opts).map_err(err)?;
    let wide = count_solutions(&sys, &tr.phi, cut + 1000, &opts).map_err(err)?;
    ensure(wide == below, || format!("solutions up to N-1 {below:?}, up to N+1000 {wide:?}"))?;
    ensure(tr.solutions_below == Some(below), || "reported count differs".into())?;
    Ok(format!(
        "d(phi,psi) <= {:.4}, N = {cut}, d(phi',psi) <= {:.4}, {} solutions all below N",
        common::to_f64(d.hi()),
        common::to_f64(dt.hi()),
        below.lo
    ))
}

/// Heights of a step function, one per norm `1..=len`, as `m`-th powers.
fn step_from_heights(h: &[Rational]) -> ApproxFunction {
    let steps = h.iter().enumerate().map(|(i, v)| (big(i as u64 + 1), v.clone())).collect();
    ApproxFunction::step(steps).expect("non-increasing heights")
}

fn openness_radius() -> Outcome {
    const LEN: usize = 30;
    let mut r = common::rng(0x5eed_0007);
    let opts = ScanOptions::default();
    let mut systems = 0;
    let mut perturbations = 0;
    let mut attempts = 0;
    while systems < 20 {
        attempts += 1;
        ensure(attempts < 200, || "too few systems admit three solutions".into())?;
        let raw = common::random_system(&mut r, &[1, 2], &[1, 2], 50);
        let sys = raw.to_system();
        let base: Vec<Rational> = (0..LEN).map(|i| if i < 10 { rat(1, 9) } else { rat(1, 25) }).collect();
        let psi = step_from_heights(&base);
        let ball = match ball_radius_ck(&psi, &sys, 3, LEN as u64, &opts) {
            Ok(b) => b,
            Err(dioph::Error::NotFoundWithinCap { .. }) => continue,
            Err(e) => return Err(err(e)),
        };
        systems += 1;
        let weight = |t: usize| Rational::from_integer(num_traits::pow(big(t as u64), raw.n - 1));
        let mut accepted = 0;
        while accepted < 100 {
            // Spend a random share of the radius on a few random norms, mostly
            // downwards, then restore monotonicity.
            let share = Rational::new(r.gen_range(1..1000).into(), 1000.into());
            let picks = r.gen_range(1..=6);
            let mut h = base.clone();
            for _ in 0..picks {
                let t = r.gen_range(1..=LEN);
                let amount = &ball.delta * &share / Rational::from_integer(big(picks)) / weight(t);
                if r.gen_bool(0.8) {
                    h[t - 1] = (&h[t - 1] - amount).max(Rational::zero());
                } else {
                    h[t - 1] = &h[t - 1] + amount;
                }
            }
            for i in (0..LEN - 1).rev() {
                if h[i] < h[i + 1] {
                    h[i] = h[i + 1].clone();
                }
            }
            let d: Rational = (1..=LEN).map(|t| weight(t) * (&h[t - 1] - &base[t - 1]).abs()).sum();
            if d >= ball.delta {
                continue;
            }
            let phi = step_from_heights(&h);
            let dl = metric_d(&phi, &psi, raw.m, raw.n).map_err(err)?;
            ensure(dl.contains(&d), || format!("library metric [{}, {}] misses {d}", dl.lo(), dl.hi()))?;
            for s in &ball.solutions {
                let q: Vec<i64> = s.q.iter().map(|x| x.to_i64().unwrap()).collect();
                let (num, den) = common::point_dist(&raw, &q);
                let dist_m = num_traits::pow(Rational::new(num.into(), den.into()), raw.m);
                let t = common::sup_norm(&q) as usize;
                ensure(dist_m < h[t - 1], || format!("solution {q:?} lost under d = {d} < delta = {}", ball.delta))?;
            }
            let c = count_solutions(&sys, &phi, LEN as u64, &opts).map_err(err)?;
            ensure(c.lo >= 3, || format!("only {} solutions remain", c.lo))?;
            accepted += 1;
            perturbations += 1;
        }
    }
    Ok(format!("{systems} systems, {perturbations} perturbations, 0 violations"))
}

fn dimension_formulas() -> Outcome {
    let closed = |m: i64, n: i64| rat(m * n, 1) * (Rational::one() - rat(1, m + n));
    for (m, n, want) in [(2, 1, rat(4, 3)), (1, 2, rat(4, 3)), (2, 2, rat(3, 1))] {
        let got = dim_sing_homog(m, n).map_err(err)?;
        ensure(got == want && got == closed(m as i64, n as i64), || format!("({m},{n}) -> {got}"))?;
    }
    let low = dim_omega_gamma_lower(2, 1).map_err(err)?;
    ensure(low == rat(2, 9), || format!("(2,1) lower bound {low}"))?;
    Ok("4/3, 4/3, 3 and 2/9".into())
}

fn super_exponential_dimension() -> Outcome {
    let start = Instant::now();
    let cf = growth_cf_for_window(&[2], 20).map_err(err)?;
    let third = rat(1, 3);
    let mut seen = Vec::new();
    for tau in [rat(99, 100), rat(101, 100)] {
        let rep = simplified_dim_expr(&cf, &tau, 20).map_err(err)?;
        let (lo, hi) = rep.value.bounds();
        ensure((&lo - &third).abs() < rat(1, 20) && (&hi - &third).abs() < rat(1, 20), || {
            format!("tau = {tau}: [{:.5}, {:.5}]", common::to_f64(&lo), common::to_f64(&hi))
        })?;
        seen.push(format!("tau={tau}: {:.5}", common::to_f64(&lo)));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{}, {:.2}s", seen.join(", "), elapsed.as_secs_f64()))
}

fn prefix_inequalities() -> Outcome {
    let mut r = common::rng(0x5eed_000a);
    let opts = ScanOptions { workers: 4, ..ScanOptions::default() };
    let mut checked = 0;
    for i in 0..25 {
        let raw = common::random_system(&mut r, &[1, 2, 3], &[1, 2, 3], 50);
        let sys = raw.to_system();
        let sweep = prefix_inequality_sweep(&sys, 10, 10, 50, &opts).map_err(err)?;
        ensure(sweep.len() == 55 * 41, || format!("system {i}: {} cases", sweep.len()))?;
        for &(l, l0, t, v) in &sweep {
            ensure(v == Verdict::True, || format!("system {i}: l={l} l0={l0} T={t} gives {}", v.as_str()))?;
        }
        // Spot-check the batched verdicts against the single-case entry point.
        let (l, l0, t) = (r.gen_range(1..=10u64), 0, r.gen_range(10..=50u64));
        let l0 = r.gen_range(l..=10u64).max(l0);
        let single = prefix_inequality_check(&sys, l, l0, t, &opts).map_err(err)?;
        ensure(single == Verdict::True, || format!("system {i}: single check l={l} l0={l0} T={t}"))?;
        checked += sweep.len();
    }
    Ok(format!("25 systems, {checked} (l, l0, T) cases"))
}

fn cli_binary() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_dioph"))
}

fn obstruction_contract() -> Outcome {
    let mut notes = Vec::new();
    for mode in ["gamma", "psi-c"] {
        let out = Command::new(cli_binary())
            .args(["witness", mode, "alpha=golden", "--cap", "100000"])
            .output()
            .map_err(err)?;
        let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
        ensure(out.status.code() == Some(3), || format!("{mode}: exit {:?}\n{text}", out.status.code()))?;
        ensure(text.contains("Bad certificate"), || format!("{mode}: no Bad certificate in output\n{text}"))?;
        notes.push(format!("{mode} -> 3"));
    }
    Ok(notes.join(", "))
}

fn scan_csvs(raw: &RawSystem, workers: usize) -> Result<String, String> {
    let sys = raw.to_system();
    let opts = ScanOptions { workers, ..ScanOptions::default() };
    let t = min_table(&sys, 1, 15, &opts).map_err(err)?;
    let b = badness_profile(&sys, 15, &opts).map_err(err)?;
    let s = series_partial(&sys, 1, 15, &opts).map_err(err)?;
    Ok(format!("{}{}{}", t.to_csv(sys.n), b.to_csv(sys.n), s.to_csv()))
}

fn cli_scan(spec: &str, dir: &std::path::Path, workers: usize) -> Result<Vec<(String, Vec<u8>)>, String> {
    let sys_file = dir.join("system.txt");
    fs::write(&sys_file, spec).map_err(err)?;
    let out_dir = dir.join(format!("w{workers}"));
    let out = Command::new(cli_binary())
        .arg("scan")
        .arg("--system")
        .arg(&sys_file)
        .args(["--tmax", "15", "--workers", &workers.to_string(), "--out"])
        .arg(&out_dir)
        .output()
        .map_err(err)?;
    ensure(out.status.code() == Some(0), || format!("scan exit {:?}", out.status.code()))?;
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out_dir)
        .map_err(err)?
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let corpus = common::corpus();
    for (i, raw) in corpus.iter().enumerate() {
        let serial = scan_csvs(raw, 1)?;
        for w in [2, 8] {
            ensure(scan_csvs(raw, w)? == serial, || format!("system {i}: workers {w} differ"))?;
        }
    }
    let tmp = std::env::temp_dir().join(format!("dioph-acceptance-{}", std::process::id()));
    fs::create_dir_all(&tmp).map_err(err)?;
    for (i, raw) in corpus.iter().enumerate().step_by(10) {
        let spec = raw.to_system().to_spec();
        let serial = cli_scan(&spec, &tmp, 1)?;
        for w in [2, 8] {
            ensure(cli_scan(&spec, &tmp, w)? == serial, || format!("cli scan of system {i}: workers {w} differ"))?;
        }
    }
    let _ = fs::remove_dir_all(&tmp);
    Ok("100 systems in-process, 10 through the CLI, workers 1/2/8".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("oracle equivalence of min_table", oracle_equivalence),
        ("continued-fraction sandwich", cf_sandwich),
        ("golden badness certificate and records", golden_certificate),
        ("psi in C construction certificates", psi_c_certificates),
        ("gamma witness round trip", gamma_round_trip),
        ("dense approximant and truncation", dense_approximant),
        ("openness radius", openness_radius),
        ("dimension formulas", dimension_formulas),
        ("super-exponential dimension window", super_exponential_dimension),
        ("all-or-nothing prefix inequality", prefix_inequalities),
        ("obstruction exit codes", obstruction_contract),
        ("determinism across workers", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {:>2} {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
