//! Shell enumeration over `q ∈ ℤⁿ` in the supremum norm and the running minima
//! `M_l(t) = min_{l≤‖q‖≤t} ⟨Aq−γ⟩`, with badness profiles, record minima,
//! Dirichlet tests and the trivial-member construction built on top.
//!
//! Every entry of `A` and `γ` is put over one common even denominator `D`, so
//! a point evaluation is integer arithmetic on numerators. Rational systems are
//! exact; continued-fraction entries are rounded outward at a precision that
//! keeps `Aq − γ` within `2^(-budget)` for every `q` in the scanned range.
//! Shells are visited in lexicographic order and reductions are sequential in
//! that order, so results do not depend on the worker count.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exactnum::{
    compare, interval_dist, parse_rational, pow_enclosure, shift_col, Cmp, DistEnclosure,
    DyadicInterval, ExactReal, Rational, DEFAULT_BUDGET,
};
use crate::funcspace::ApproxFunction;

/// How the target `γ` is given.
#[derive(Clone, Debug, PartialEq)]
pub enum Gamma {
    /// Exact components.
    Values(Vec<ExactReal>),
    /// Components known only up to an enclosure (for instance a constructed
    /// target with a tail bound).
    Enclosed(Vec<DyadicInterval>),
    /// `γ = A q₀` modulo `ℤᵐ`; distances are evaluated as `⟨A(q − q₀)⟩`.
    Orbit(Vec<BigInt>),
}

/// The pair `(A, γ)` with `A` an `m × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSystem {
    pub m: usize,
    pub n: usize,
    /// Row-major, `m` rows of `n` entries.
    pub a: Vec<Vec<ExactReal>>,
    pub gamma: Gamma,
}

impl AffineSystem {
    pub fn new(m: usize, n: usize, a: Vec<Vec<ExactReal>>, gamma: Gamma) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("m and n must be positive"));
        }
        if a.len() != m || a.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("A must be {m}x{n}")));
        }
        for x in a.iter().flatten() {
            check_unit(x)?;
        }
        match &gamma {
            Gamma::Values(v) => {
                if v.len() != m {
                    return Err(Error::invalid(format!("gamma must have {m} components")));
                }
                for x in v {
                    check_unit(x)?;
                }
            }
            Gamma::Enclosed(v) => {
                if v.len() != m {
                    return Err(Error::invalid(format!("gamma must have {m} components")));
                }
            }
            Gamma::Orbit(v) => {
                if v.len() != n {
                    return Err(Error::invalid(format!("orbit point must have {n} components")));
                }
            }
        }
        Ok(AffineSystem { m, n, a, gamma })
    }

    /// `m = n = 1` system `(α, γ)`.
    pub fn one_dim(alpha: ExactReal, gamma: ExactReal) -> Result<Self> {
        Self::new(1, 1, vec![vec![alpha]], Gamma::Values(vec![gamma]))
    }

    /// `γ = 0`.
    pub fn homogeneous(m: usize, n: usize, a: Vec<Vec<ExactReal>>) -> Result<Self> {
        Self::new(m, n, a, Gamma::Values(vec![ExactReal::zero(); m]))
    }

    pub fn with_gamma(&self, gamma: Gamma) -> Result<Self> {
        Self::new(self.m, self.n, self.a.clone(), gamma)
    }

    /// True when `γ` is exactly `0` modulo `ℤᵐ`, so `⟨A(−q)−γ⟩ = ⟨Aq−γ⟩`.
    pub fn is_homogeneous(&self) -> bool {
        match &self.gamma {
            Gamma::Values(v) => v.iter().all(ExactReal::is_zero),
            Gamma::Enclosed(_) => false,
            Gamma::Orbit(q0) => q0.iter().all(Zero::is_zero),
        }
    }

    /// True when every distance is an exact rational.
    pub fn is_rational(&self) -> bool {
        let a_ok = self.a.iter().flatten().all(|x| x.as_rational().is_some());
        let g_ok = match &self.gamma {
            Gamma::Values(v) => v.iter().all(|x| x.as_rational().is_some()),
            Gamma::Enclosed(v) => v.iter().all(DyadicInterval::is_point),
            Gamma::Orbit(_) => true,
        };
        a_ok && g_ok
    }

    /// Parses the text format: `key = value` lines with keys `m`, `n`, `A`
    /// (row-major, whitespace-separated literals) and `gamma` (literals,
    /// `[lo,hi]` enclosures, or `orbit:[q1,...]`). `#` starts a comment.
    pub fn parse(text: &str) -> std::result::Result<Self, (usize, usize, String)> {
        let mut m: Option<(usize, usize)> = None;
        let mut n: Option<(usize, usize)> = None;
        let mut a_tok: Option<(usize, Vec<(usize, String)>)> = None;
        let mut g_tok: Option<(usize, Vec<(usize, String)>)> = None;
        for (li, raw) in text.lines().enumerate() {
            let line_no = li + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            let eq = line
                .find('=')
                .ok_or((line_no, 1, "expected key = value".to_string()))?;
            let key = line[..eq].trim();
            let value_off = eq + 1;
            let toks = tokenize(&line[value_off..], value_off);
            match key {
                "m" | "n" => {
                    let (col, tok) = toks
                        .first()
                        .cloned()
                        .ok_or((line_no, value_off + 1, format!("missing value for {key}")))?;
                    let v: usize = tok
                        .parse()
                        .map_err(|_| (line_no, col, format!("{key} must be a positive integer")))?;
                    if key == "m" {
                        m = Some((v, line_no));
                    } else {
                        n = Some((v, line_no));
                    }
                }
                "A" => a_tok = Some((line_no, toks)),
                "gamma" => g_tok = Some((line_no, toks)),
                other => {
                    let col = line.find(other).unwrap_or(0) + 1;
                    return Err((line_no, col, format!("unknown key '{other}'")));
                }
            }
        }
        let last = text.lines().count().max(1);
        let (m, m_line) = m.ok_or((last, 1, "missing key m".to_string()))?;
        let (n, n_line) = n.ok_or((last, 1, "missing key n".to_string()))?;
        if m == 0 {
            return Err((m_line, 1, "m must be positive".into()));
        }
        if n == 0 {
            return Err((n_line, 1, "n must be positive".into()));
        }
        let (a_line, a_toks) = a_tok.ok_or((last, 1, "missing key A".to_string()))?;
        if a_toks.len() != m * n {
            return Err((a_line, 1, format!("A needs {} entries, found {}", m * n, a_toks.len())));
        }
        let mut entries = Vec::with_capacity(m * n);
        for (col, tok) in &a_toks {
            let x = ExactReal::parse(tok).map_err(|e| located(a_line, *col, e))?;
            check_unit(&x).map_err(|e| (a_line, *col, e.to_string()))?;
            entries.push(x);
        }
        let a: Vec<Vec<ExactReal>> = entries.chunks(n).map(|c| c.to_vec()).collect();
        let gamma = match g_tok {
            None => Gamma::Values(vec![ExactReal::zero(); m]),
            Some((g_line, toks)) => parse_gamma(g_line, &toks, m, n)?,
        };
        AffineSystem::new(m, n, a, gamma).map_err(|e| (last, 1, e.to_string()))
    }

    /// Text form accepted by [`AffineSystem::parse`].
    pub fn to_spec(&self) -> String {
        let a: Vec<String> = self.a.iter().flatten().map(ExactReal::spec).collect();
        let g = match &self.gamma {
            Gamma::Values(v) => v.iter().map(ExactReal::spec).collect::<Vec<_>>().join(" "),
            Gamma::Enclosed(v) => v
                .iter()
                .map(|iv| format!("[{},{}]", iv.lo(), iv.hi()))
                .collect::<Vec<_>>()
                .join(" "),
            Gamma::Orbit(q) => format!(
                "orbit:[{}]",
                q.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
            ),
        };
        format!("m = {}\nn = {}\nA = {}\ngamma = {}\n", self.m, self.n, a.join(" "), g)
    }
}

fn located(line: usize, col: usize, e: Error) -> (usize, usize, String) {
    match e {
        Error::Parse { col: c, msg } => (line, col + c - 1, msg),
        other => (line, col, other.to_string()),
    }
}

fn parse_gamma(
    line: usize,
    toks: &[(usize, String)],
    m: usize,
    n: usize,
) -> std::result::Result<Gamma, (usize, usize, String)> {
    if let Some((col, tok)) = toks.first() {
        if let Some(rest) = tok.strip_prefix("orbit:") {
            let inner = rest
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or((line, col + 6, "expected orbit:[q1,...]".to_string()))?;
            let mut q = Vec::new();
            for part in inner.split(',') {
                let v: BigInt = part
                    .trim()
                    .parse()
                    .map_err(|_| (line, *col, format!("bad orbit coordinate '{part}'")))?;
                q.push(v);
            }
            if q.len() != n {
                return Err((line, *col, format!("orbit point needs {n} coordinates")));
            }
            return Ok(Gamma::Orbit(q));
        }
    }
    if toks.len() != m {
        return Err((line, 1, format!("gamma needs {m} entries, found {}", toks.len())));
    }
    if toks.iter().any(|(_, t)| t.starts_with('[')) {
        let mut out = Vec::new();
        for (col, tok) in toks {
            let inner = tok
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or((line, *col, "expected [lo,hi]".to_string()))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or((line, *col, "expected [lo,hi]".to_string()))?;
            let lo = parse_rational(a.trim()).map_err(|e| located(line, col + 1, e))?;
            let hi = parse_rational(b.trim())
                .map_err(|e| located(line, col + 2 + a.len(), e))?;
            out.push(DyadicInterval::new(lo, hi).map_err(|e| (line, *col, e.to_string()))?);
        }
        return Ok(Gamma::Enclosed(out));
    }
    let mut out = Vec::new();
    for (col, tok) in toks {
        let x = ExactReal::parse(tok).map_err(|e| located(line, *col, shift_col(e, 0)))?;
        check_unit(&x).map_err(|e| (line, *col, e.to_string()))?;
        out.push(x);
    }
    Ok(Gamma::Values(out))
}

/// Splits on whitespace, keeping bracketed groups intact; columns are 1-based.
fn tokenize(s: &str, offset: usize) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        if ch.is_whitespace() && depth == 0 {
            if !cur.is_empty() {
                out.push((offset + start + 1, std::mem::take(&mut cur)));
            }
            continue;
        }
        if cur.is_empty() {
            start = i;
        }
        match ch {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.is_empty() {
        out.push((offset + start + 1, cur));
    }
    out
}

fn check_unit(x: &ExactReal) -> Result<()> {
    if let Some(r) = x.as_rational() {
        if r.is_negative() || r >= &Rational::one() {
            return Err(Error::invalid(format!("entry {r} is outside [0,1)")));
        }
    }
    Ok(())
}

/// Points of `ℤⁿ` with `‖q‖ = t`, in lexicographic order. `(2t+1)ⁿ − (2t−1)ⁿ`
/// of them for `t ≥ 1`.
pub fn shell_points(n: usize, t: u64) -> Vec<Vec<i64>> {
    shell_points_half(n, t, false)
}

/// As [`shell_points`]; with `negative_half` only the points whose first
/// non-zero coordinate is negative (one of each pair `±q`).
pub fn shell_points_half(n: usize, t: u64, negative_half: bool) -> Vec<Vec<i64>> {
    let t = t as i64;
    let mut out = Vec::new();
    if t == 0 {
        if !negative_half {
            out.push(vec![0; n]);
        }
        return out;
    }
    let mut cur = vec![0i64; n];
    fn rec(
        i: usize,
        n: usize,
        t: i64,
        hit: bool,
        signed: bool,
        negative_half: bool,
        cur: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if i == n {
            if hit {
                out.push(cur.clone());
            }
            return;
        }
        let last = i + 1 == n;
        // With the half restriction and an all-zero prefix, the coordinate
        // may not be positive.
        let upper = if negative_half && !signed { 0 } else { t };
        let mut c = -t;
        while c <= upper {
            let is_hit = c.abs() == t;
            if last && !hit && !is_hit {
                c = if c < t { t } else { t + 1 };
                if c > upper {
                    break;
                }
                continue;
            }
            if negative_half && !signed && last && c == 0 {
                c += 1;
                continue;
            }
            cur[i] = c;
            rec(i + 1, n, t, hit || is_hit, signed || c != 0, negative_half, cur, out);
            c += 1;
        }
        cur[i] = 0;
    }
    rec(0, n, t, false, false, negative_half, &mut cur, &mut out);
    out
}

/// Scan settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanOptions {
    /// Target absolute precision (bits) of every evaluated `Aq − γ`.
    pub budget: u32,
    /// Worker threads for shell evaluation; `1` evaluates serially.
    pub workers: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            budget: DEFAULT_BUDGET,
            workers: 1,
        }
    }
}

impl ScanOptions {
    pub fn with_budget(budget: u32) -> Self {
        ScanOptions {
            budget,
            ..Self::default()
        }
    }
}

/// Numerator form of a point distance: `⟨Aq−γ⟩ ∈ [lo, hi] / D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointValue {
    pub q: Vec<i64>,
    pub lo: BigInt,
    pub hi: BigInt,
    pub exhausted: bool,
}

trait Num:
    Clone + Ord + Integer + Signed + From<i64> + Send + Sync + std::fmt::Debug
{
    fn to_big(&self) -> BigInt;
    fn from_big(x: &BigInt) -> Option<Self>;
}

impl Num for i128 {
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn from_big(x: &BigInt) -> Option<Self> {
        x.to_i128()
    }
}

impl Num for BigInt {
    fn to_big(&self) -> BigInt {
        self.clone()
    }
    fn from_big(x: &BigInt) -> Option<Self> {
        Some(x.clone())
    }
}

/// Entry numerators over the common denominator.
#[derive(Clone, Debug)]
struct Kernel<N: Num> {
    den: N,
    half: N,
    a_lo: Vec<Vec<N>>,
    a_hi: Vec<Vec<N>>,
    g_lo: Vec<N>,
    g_hi: Vec<N>,
    orbit: Option<Vec<N>>,
}

impl<N: Num> Kernel<N> {
    fn convert(k: &Kernel<BigInt>) -> Option<Kernel<N>> {
        let v = |x: &Vec<BigInt>| x.iter().map(N::from_big).collect::<Option<Vec<N>>>();
        Some(Kernel {
            den: N::from_big(&k.den)?,
            half: N::from_big(&k.half)?,
            a_lo: k.a_lo.iter().map(v).collect::<Option<_>>()?,
            a_hi: k.a_hi.iter().map(v).collect::<Option<_>>()?,
            g_lo: v(&k.g_lo)?,
            g_hi: v(&k.g_hi)?,
            orbit: match &k.orbit {
                Some(o) => Some(v(o)?),
                None => None,
            },
        })
    }

    /// Row-wise enclosure numerators of `Aq − γ`.
    fn rows(&self, q: &[N]) -> Vec<(N, N)> {
        let shifted: Vec<N>;
        let q = match &self.orbit {
            Some(o) => {
                shifted = q.iter().zip(o).map(|(a, b)| a.clone() - b.clone()).collect();
                &shifted[..]
            }
            None => q,
        };
        let zero = N::from(0);
        (0..self.a_lo.len())
            .map(|i| {
                let mut lo = zero.clone() - self.g_hi[i].clone();
                let mut hi = zero.clone() - self.g_lo[i].clone();
                for (j, qj) in q.iter().enumerate() {
                    if qj.is_zero() {
                        continue;
                    }
                    if qj.is_positive() {
                        lo = lo + qj.clone() * self.a_lo[i][j].clone();
                        hi = hi + qj.clone() * self.a_hi[i][j].clone();
                    } else {
                        lo = lo + qj.clone() * self.a_hi[i][j].clone();
                        hi = hi + qj.clone() * self.a_lo[i][j].clone();
                    }
                }
                (lo, hi)
            })
            .collect()
    }

    /// `(lo, hi, exhausted)` numerators of `⟨Aq − γ⟩`.
    fn dist(&self, q: &[N]) -> (N, N, bool) {
        let mut best: Option<(N, N, bool)> = None;
        for (lo, hi) in self.rows(q) {
            let d = self.interval_dist(&lo, &hi);
            best = Some(match best {
                None => d,
                Some((a, b, f)) => (a.max(d.0), b.max(d.1), f || d.2),
            });
        }
        best.expect("m >= 1")
    }

    fn interval_dist(&self, lo: &N, hi: &N) -> (N, N, bool) {
        let den = &self.den;
        let k = lo.div_floor(den);
        let l = lo.clone() - k.clone() * den.clone();
        let u = hi.clone() - k * den.clone();
        let zero = N::from(0);
        if u.clone() - l.clone() >= *den {
            return (zero, self.half.clone(), true);
        }
        let f = |y: &N| {
            let r = y.mod_floor(den);
            let s = den.clone() - r.clone();
            if r < s {
                r
            } else {
                s
            }
        };
        let fl = f(&l);
        let fu = f(&u);
        let contains_int = l.is_zero() || (l <= *den && *den <= u);
        let h = &self.half;
        let h3 = h.clone() + den.clone();
        let contains_half = (l <= *h && *h <= u) || (l <= h3 && h3 <= u);
        let dlo = if contains_int { zero } else { fl.clone().min(fu.clone()) };
        let dhi = if contains_half { h.clone() } else { fl.max(fu) };
        (dlo, dhi, contains_half && l < u)
    }
}

enum KernelImpl {
    Small(Kernel<i128>),
    Big(Kernel<BigInt>),
}

/// Distance evaluator for one system, valid for `‖q‖ ≤ horizon`.
pub struct Evaluator {
    m: usize,
    n: usize,
    den: BigInt,
    symmetric: bool,
    exact: bool,
    kernel: KernelImpl,
}

fn lcm_den(acc: &mut BigInt, r: &Rational) {
    *acc = acc.lcm(r.denom());
}

impl Evaluator {
    pub fn new(sys: &AffineSystem, horizon: &BigInt, budget: u32) -> Result<Self> {
        let mut den = BigInt::one();
        let mut has_cf = false;
        for x in sys.a.iter().flatten() {
            match x {
                ExactReal::Rational(r) => lcm_den(&mut den, r),
                ExactReal::Cf(_) => has_cf = true,
            }
        }
        match &sys.gamma {
            Gamma::Values(v) => {
                for x in v {
                    match x {
                        ExactReal::Rational(r) => lcm_den(&mut den, r),
                        ExactReal::Cf(_) => has_cf = true,
                    }
                }
            }
            Gamma::Enclosed(v) => {
                for iv in v {
                    lcm_den(&mut den, iv.lo());
                    lcm_den(&mut den, iv.hi());
                }
            }
            Gamma::Orbit(_) => {}
        }
        // Orbit points enlarge the effective range of q − q0.
        let mut range = horizon.clone().max(BigInt::one());
        if let Gamma::Orbit(q0) = &sys.gamma {
            let big = q0.iter().map(|x| x.abs()).max().unwrap_or_default();
            range += big;
        }
        let prec = if has_cf {
            let extra = range.bits() + (sys.n as u64).max(1).ilog2() as u64 + 3;
            let p = u64::from(budget) + extra;
            den = &den << p as usize;
            Some(u32::try_from(p).map_err(|_| Error::invalid("precision too large"))?)
        } else {
            None
        };
        if den.is_odd() {
            den = &den << 1usize;
        }
        let num_of = |x: &ExactReal| -> Result<(BigInt, BigInt)> {
            match x {
                ExactReal::Rational(r) => {
                    let v = (r * Rational::from_integer(den.clone())).to_integer();
                    Ok((v.clone(), v))
                }
                ExactReal::Cf(_) => {
                    let iv = x.refine(prec.expect("cf entry implies precision"))?;
                    let d = Rational::from_integer(den.clone());
                    Ok(((iv.lo() * &d).floor().to_integer(), (iv.hi() * &d).ceil().to_integer()))
                }
            }
        };
        let mut a_lo = Vec::new();
        let mut a_hi = Vec::new();
        let mut exact = true;
        for row in &sys.a {
            let mut lo_r = Vec::new();
            let mut hi_r = Vec::new();
            for x in row {
                let (lo, hi) = num_of(x)?;
                exact &= lo == hi;
                lo_r.push(lo);
                hi_r.push(hi);
            }
            a_lo.push(lo_r);
            a_hi.push(hi_r);
        }
        let (g_lo, g_hi, orbit) = match &sys.gamma {
            Gamma::Values(v) => {
                let mut lo_v = Vec::new();
                let mut hi_v = Vec::new();
                for x in v {
                    let (lo, hi) = num_of(x)?;
                    exact &= lo == hi;
                    lo_v.push(lo);
                    hi_v.push(hi);
                }
                (lo_v, hi_v, None)
            }
            Gamma::Enclosed(v) => {
                let d = Rational::from_integer(den.clone());
                let lo_v: Vec<BigInt> = v.iter().map(|iv| (iv.lo() * &d).to_integer()).collect();
                let hi_v: Vec<BigInt> = v.iter().map(|iv| (iv.hi() * &d).to_integer()).collect();
                exact &= lo_v == hi_v;
                (lo_v, hi_v, None)
            }
            Gamma::Orbit(q0) => (vec![BigInt::zero(); sys.m], vec![BigInt::zero(); sys.m], Some(q0.clone())),
        };
        let big = Kernel {
            half: &den >> 1usize,
            den: den.clone(),
            a_lo,
            a_hi,
            g_lo,
            g_hi,
            orbit,
        };
        // i128 is safe when |numerator| · n · range stays far below 2^127.
        let max_num = big
            .a_lo
            .iter()
            .chain(big.a_hi.iter())
            .flatten()
            .chain(big.g_lo.iter())
            .chain(big.g_hi.iter())
            .map(|x| x.bits())
            .max()
            .unwrap_or(0)
            .max(den.bits());
        let need = max_num + range.bits() + (sys.n as u64).ilog2() as u64 + 4;
        let kernel = if need < 120 {
            match Kernel::<i128>::convert(&big) {
                Some(k) => KernelImpl::Small(k),
                None => KernelImpl::Big(big),
            }
        } else {
            KernelImpl::Big(big)
        };
        Ok(Evaluator {
            m: sys.m,
            n: sys.n,
            den,
            symmetric: sys.is_homogeneous(),
            exact,
            kernel,
        })
    }

    pub fn den(&self) -> &BigInt {
        &self.den
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Whether `⟨A(−q)−γ⟩ = ⟨Aq−γ⟩` may be used.
    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn eval(&self, q: &[i64]) -> PointValue {
        let (lo, hi, exhausted) = match &self.kernel {
            KernelImpl::Small(k) => {
                let qq: Vec<i128> = q.iter().map(|&x| x as i128).collect();
                let (a, b, f) = k.dist(&qq);
                (BigInt::from(a), BigInt::from(b), f)
            }
            KernelImpl::Big(k) => {
                let qq: Vec<BigInt> = q.iter().map(|&x| BigInt::from(x)).collect();
                k.dist(&qq)
            }
        };
        PointValue {
            q: q.to_vec(),
            lo,
            hi,
            exhausted,
        }
    }

    /// Distance enclosure at an arbitrary integer point.
    pub fn eval_big(&self, q: &[BigInt]) -> DistEnclosure {
        let (lo, hi, exhausted) = match &self.kernel {
            KernelImpl::Small(k) => {
                let qq: Option<Vec<i128>> = q.iter().map(|x| x.to_i128()).collect();
                match qq {
                    Some(qq) if q.iter().all(|x| x.bits() < 40) => {
                        let (a, b, f) = k.dist(&qq);
                        (a.to_big(), b.to_big(), f)
                    }
                    _ => {
                        let bk = Kernel::<BigInt> {
                            den: k.den.to_big(),
                            half: k.half.to_big(),
                            a_lo: k.a_lo.iter().map(|r| r.iter().map(Num::to_big).collect()).collect(),
                            a_hi: k.a_hi.iter().map(|r| r.iter().map(Num::to_big).collect()).collect(),
                            g_lo: k.g_lo.iter().map(Num::to_big).collect(),
                            g_hi: k.g_hi.iter().map(Num::to_big).collect(),
                            orbit: k.orbit.as_ref().map(|o| o.iter().map(Num::to_big).collect()),
                        };
                        bk.dist(q)
                    }
                }
            }
            KernelImpl::Big(k) => k.dist(q),
        };
        DistEnclosure {
            interval: self.to_interval(&lo, &hi),
            exhausted,
        }
    }

    /// Row-wise enclosures of `Aq − γ` itself (not reduced modulo 1).
    pub fn rows_big(&self, q: &[BigInt]) -> Vec<DyadicInterval> {
        let raw: Vec<(BigInt, BigInt)> = match &self.kernel {
            KernelImpl::Small(k) => {
                let bk = Kernel::<BigInt> {
                    den: k.den.to_big(),
                    half: k.half.to_big(),
                    a_lo: k.a_lo.iter().map(|r| r.iter().map(Num::to_big).collect()).collect(),
                    a_hi: k.a_hi.iter().map(|r| r.iter().map(Num::to_big).collect()).collect(),
                    g_lo: k.g_lo.iter().map(Num::to_big).collect(),
                    g_hi: k.g_hi.iter().map(Num::to_big).collect(),
                    orbit: k.orbit.as_ref().map(|o| o.iter().map(Num::to_big).collect()),
                };
                bk.rows(q)
            }
            KernelImpl::Big(k) => k.rows(q),
        };
        raw.iter().map(|(lo, hi)| self.to_interval(lo, hi)).collect()
    }

    pub fn to_interval(&self, lo: &BigInt, hi: &BigInt) -> DyadicInterval {
        DyadicInterval::spanning(
            Rational::new(lo.clone(), self.den.clone()),
            Rational::new(hi.clone(), self.den.clone()),
        )
    }

    /// Visits shells `t = l..=t_max` in order, handing each shell's point
    /// values (in lexicographic order) to `f`. With `use_symmetry` on a
    /// homogeneous system only one point of each pair `±q` is visited, namely
    /// the lexicographically smaller one.
    pub fn for_each_shell<F>(
        &self,
        l: u64,
        t_max: u64,
        use_symmetry: bool,
        workers: usize,
        mut f: F,
    ) -> Result<()>
    where
        F: FnMut(u64, &[PointValue]) -> ControlFlow<()>,
    {
        let half = use_symmetry && self.symmetric;
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::invalid(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        let mut t = l;
        while t <= t_max {
            let mut batch: Vec<(u64, Vec<Vec<i64>>)> = Vec::new();
            let mut size = 0usize;
            while t <= t_max && (size < 4096 || batch.is_empty()) {
                let pts = shell_points_half(self.n, t, half);
                size += pts.len();
                batch.push((t, pts));
                t += 1;
            }
            let flat: Vec<&Vec<i64>> = batch.iter().flat_map(|(_, p)| p.iter()).collect();
            let values: Vec<PointValue> = match &pool {
                Some(p) if flat.len() > 64 => {
                    p.install(|| flat.par_iter().map(|q| self.eval(q)).collect())
                }
                _ => flat.iter().map(|q| self.eval(q)).collect(),
            };
            let mut off = 0;
            for (tt, pts) in &batch {
                let slice = &values[off..off + pts.len()];
                off += pts.len();
                if let ControlFlow::Break(()) = f(*tt, slice) {
                    return Ok(());
                }
            }
        }
        Ok(())
    }
}

/// Distance enclosure of `⟨Aq−γ⟩` at one point, with `budget` bits of
/// absolute precision.
pub fn point_dist(sys: &AffineSystem, q: &[BigInt], budget: u32) -> Result<DistEnclosure> {
    let norm = sup_norm(q);
    let ev = Evaluator::new(sys, &norm, budget)?;
    Ok(ev.eval_big(q))
}

pub fn sup_norm(q: &[BigInt]) -> BigInt {
    q.iter().map(|x| x.abs()).max().unwrap_or_default()
}

pub fn sup_norm_i64(q: &[i64]) -> u64 {
    q.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
}

/// Running-minimum state over numerators, with the documented tie-breaking.
#[derive(Clone, Debug)]
struct RunningMin {
    lo: BigInt,
    hi: BigInt,
    q: Vec<i64>,
    exhausted: bool,
}

impl RunningMin {
    /// Merges a candidate with key `[lo, hi]`.
    fn merge(state: &mut Option<RunningMin>, lo: &BigInt, hi: &BigInt, q: &[i64], flag: bool) {
        match state {
            None => {
                *state = Some(RunningMin {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    q: q.to_vec(),
                    exhausted: flag,
                })
            }
            Some(b) => {
                if hi < &b.lo {
                    *b = RunningMin {
                        lo: lo.clone(),
                        hi: hi.clone(),
                        q: q.to_vec(),
                        exhausted: flag,
                    };
                } else if lo > &b.hi {
                } else {
                    let exact_tie = lo == hi && b.lo == b.hi && lo == &b.lo;
                    if !exact_tie {
                        b.exhausted = true;
                        if lo < &b.lo {
                            b.lo = lo.clone();
                        }
                        if hi < &b.hi {
                            b.hi = hi.clone();
                        }
                    }
                    if q < &b.q[..] {
                        b.q = q.to_vec();
                    }
                    b.exhausted |= flag;
                }
            }
        }
    }
}

/// One row of a minimum table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinRow {
    pub t: u64,
    pub value: DyadicInterval,
    pub argmin: Vec<i64>,
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinTable {
    pub l: u64,
    pub rows: Vec<MinRow>,
}

impl MinTable {
    pub fn any_exhausted(&self) -> bool {
        self.rows.iter().any(|r| r.exhausted)
    }

    /// Row for horizon `t`, if tabulated.
    pub fn at(&self, t: u64) -> Option<&MinRow> {
        if t < self.l {
            return None;
        }
        self.rows.get((t - self.l) as usize)
    }

    /// CSV with columns `t,lo,hi,q1..qn`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut s = String::from("t,lo,hi");
        for i in 1..=n {
            let _ = write!(s, ",q{i}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{}", r.t, r.value.lo(), r.value.hi());
            for c in &r.argmin {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

/// `M_l(t)` for `l ≤ t ≤ T`, computed shell by shell.
pub fn min_table(sys: &AffineSystem, l: u64, t_max: u64, opts: &ScanOptions) -> Result<MinTable> {
    if l < 1 || l > t_max {
        return Err(Error::invalid(format!("need 1 <= l <= T, got l={l}, T={t_max}")));
    }
    let ev = Evaluator::new(sys, &BigInt::from(t_max), opts.budget)?;
    min_table_with(&ev, l, t_max, opts.workers)
}

pub(crate) fn min_table_with(ev: &Evaluator, l: u64, t_max: u64, workers: usize) -> Result<MinTable> {
    let mut state: Option<RunningMin> = None;
    let mut rows = Vec::with_capacity((t_max - l + 1) as usize);
    ev.for_each_shell(l, t_max, true, workers, |t, pts| {
        for p in pts {
            RunningMin::merge(&mut state, &p.lo, &p.hi, &p.q, p.exhausted);
        }
        let b = state.as_ref().expect("shells are non-empty");
        rows.push(MinRow {
            t,
            value: ev.to_interval(&b.lo, &b.hi),
            argmin: b.q.clone(),
            exhausted: b.exhausted,
        });
        ControlFlow::Continue(())
    })?;
    Ok(MinTable { l, rows })
}

/// `M_l` tables for every `1 ≤ l ≤ l_max` from a single scan: each point is
/// merged into every running state that has started, so ties resolve exactly
/// as in [`min_table_with`].
pub(crate) fn min_tables_with(ev: &Evaluator, l_max: u64, t_max: u64, workers: usize) -> Result<Vec<MinTable>> {
    let l_max = l_max.min(t_max);
    let mut states: Vec<Option<RunningMin>> = vec![None; l_max as usize];
    let mut tables: Vec<MinTable> = (1..=l_max).map(|l| MinTable { l, rows: Vec::new() }).collect();
    ev.for_each_shell(1, t_max, true, workers, |t, pts| {
        let live = t.min(l_max) as usize;
        for p in pts {
            for st in &mut states[..live] {
                RunningMin::merge(st, &p.lo, &p.hi, &p.q, p.exhausted);
            }
        }
        for (st, table) in states[..live].iter().zip(&mut tables) {
            let b = st.as_ref().expect("shells are non-empty");
            table.rows.push(MinRow {
                t,
                value: ev.to_interval(&b.lo, &b.hi),
                argmin: b.q.clone(),
                exhausted: b.exhausted,
            });
        }
        ControlFlow::Continue(())
    })?;
    Ok(tables)
}

/// One strict improvement of `M_1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub t: u64,
    pub q: Vec<i64>,
    pub value: DyadicInterval,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordSequence {
    pub entries: Vec<Record>,
    pub horizon: u64,
    /// Set when some change of `M_1` could not be classified as a strict
    /// improvement at the budget.
    pub exhausted: bool,
}

/// Strict-improvement times of `M_1` up to `T`, from a table with `l = 1`.
pub fn records_from_table(table: &MinTable) -> Result<RecordSequence> {
    if table.l != 1 {
        return Err(Error::invalid("records need a table with l = 1"));
    }
    let mut entries: Vec<Record> = Vec::new();
    let mut exhausted = false;
    for row in &table.rows {
        match entries.last() {
            None => entries.push(Record {
                t: row.t,
                q: row.argmin.clone(),
                value: row.value.clone(),
            }),
            Some(last) => match compare(&row.value, &last.value) {
                Cmp::Less => entries.push(Record {
                    t: row.t,
                    q: row.argmin.clone(),
                    value: row.value.clone(),
                }),
                Cmp::Overlap if row.value != last.value => exhausted = true,
                _ => {}
            },
        }
    }
    Ok(RecordSequence {
        entries,
        horizon: table.rows.last().map(|r| r.t).unwrap_or(0),
        exhausted,
    })
}

pub fn record_minima(sys: &AffineSystem, t_max: u64, opts: &ScanOptions) -> Result<RecordSequence> {
    let table = min_table(sys, 1, t_max, opts)?;
    records_from_table(&table)
}

/// `B(t) = min_{1≤‖q‖≤t} ‖q‖ⁿ⟨Aq−γ⟩ᵐ` with the certificate `B(T).lo`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadnessProfile {
    /// `B(t) = min_{1≤‖q‖≤t} ‖q‖ⁿ⟨Aq−γ⟩ᵐ`.
    pub rows: Vec<MinRow>,
    /// Lower endpoint of `min_{s≤‖q‖≤T} ‖q‖ⁿ⟨Aq−γ⟩ᵐ` with `s = ⌈√T⌉`: the
    /// window stand-in for the liminf, free of the first few small norms.
    pub certificate_c: Rational,
    pub tail_from: u64,
    /// `B(T).lo`, the infimum over every norm up to `T`.
    pub global_c: Rational,
    pub exhausted: bool,
}

impl BadnessProfile {
    pub fn to_csv(&self, n: usize) -> String {
        MinTable {
            l: 1,
            rows: self.rows.clone(),
        }
        .to_csv(n)
    }
}

pub fn badness_profile(sys: &AffineSystem, t_max: u64, opts: &ScanOptions) -> Result<BadnessProfile> {
    if t_max < 1 {
        return Err(Error::invalid("T must be at least 1"));
    }
    let ev = Evaluator::new(sys, &BigInt::from(t_max), opts.budget)?;
    badness_with(&ev, t_max, opts.workers)
}

pub(crate) fn badness_with(ev: &Evaluator, t_max: u64, workers: usize) -> Result<BadnessProfile> {
    let (m, n) = ev.dims();
    let den_m = num_traits::pow(ev.den().clone(), m);
    let tail_from = BigInt::from(t_max).sqrt().to_u64().unwrap_or(1).max(1);
    let tail_from = if tail_from * tail_from < t_max { tail_from + 1 } else { tail_from };
    let mut state: Option<RunningMin> = None;
    let mut tail: Option<RunningMin> = None;
    let mut rows = Vec::new();
    let mut exhausted = false;
    ev.for_each_shell(1, t_max, true, workers, |t, pts| {
        let tn = num_traits::pow(BigInt::from(t), n);
        for p in pts {
            let lo = &tn * num_traits::pow(p.lo.clone(), m);
            let hi = &tn * num_traits::pow(p.hi.clone(), m);
            RunningMin::merge(&mut state, &lo, &hi, &p.q, p.exhausted);
            if t >= tail_from {
                RunningMin::merge(&mut tail, &lo, &hi, &p.q, p.exhausted);
            }
        }
        let b = state.as_ref().expect("non-empty shells");
        exhausted |= b.exhausted;
        rows.push(MinRow {
            t,
            value: DyadicInterval::spanning(
                Rational::new(b.lo.clone(), den_m.clone()),
                Rational::new(b.hi.clone(), den_m.clone()),
            ),
            argmin: b.q.clone(),
            exhausted: b.exhausted,
        });
        ControlFlow::Continue(())
    })?;
    let global_c = rows.last().map(|r| r.value.lo().clone()).unwrap_or_default();
    let tail = tail.expect("the tail window contains T");
    exhausted |= tail.exhausted;
    Ok(BadnessProfile {
        rows,
        certificate_c: Rational::new(tail.lo, den_m),
        tail_from,
        global_c,
        exhausted,
    })
}

/// Three-valued outcome of an enclosure-based test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    True,
    False,
    Undecided,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::Undecided => "undecided",
        }
    }
}

/// Largest `R ≥ 0` with `Rⁿ ≤ T`.
pub fn int_root_floor(t: u64, n: usize) -> u64 {
    BigInt::from(t).nth_root(n as u32).to_u64().unwrap_or(0)
}

/// Decides `⟨min⟩ᵐ < bound` from enclosures.
fn decide_less(min: &DyadicInterval, m: usize, bound: &DyadicInterval) -> Verdict {
    let p = min.pow_nonneg(m as u32);
    match compare(&p, bound) {
        Cmp::Less => Verdict::True,
        Cmp::Greater => Verdict::False,
        Cmp::Overlap => {
            if p.lo() >= bound.hi() {
                Verdict::False
            } else {
                Verdict::Undecided
            }
        }
    }
}

/// For each `T`: is there `q` with `1 ≤ ‖q‖ⁿ ≤ T` and `⟨Aq−γ⟩ᵐ < ψ(T)`?
pub fn dirichlet_test(
    sys: &AffineSystem,
    psi: &ApproxFunction,
    t_list: &[u64],
    opts: &ScanOptions,
) -> Result<Vec<(u64, Verdict)>> {
    let r_max = t_list.iter().map(|&t| int_root_floor(t, sys.n)).max().unwrap_or(0);
    let table = if r_max >= 1 {
        Some(min_table(sys, 1, r_max, opts)?)
    } else {
        None
    };
    let mut out = Vec::new();
    for &t in t_list {
        let r = int_root_floor(t, sys.n);
        let v = match (&table, r) {
            (_, 0) => Verdict::False,
            (Some(tab), r) => {
                let row = tab.at(r).expect("tabulated");
                let bound = psi.value(&BigInt::from(t), sys.m, DEFAULT_BITS)?;
                decide_less(&row.value, sys.m, &bound)
            }
            (None, _) => Verdict::False,
        };
        out.push((t, v));
    }
    Ok(out)
}

const DEFAULT_BITS: u32 = 64;

/// Per-`ε` summary of the scaled Dirichlet condition `ψ(T') = ε T'^(−κ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingularityRow {
    pub eps: Rational,
    pub holds: usize,
    pub fails: usize,
    pub undecided: usize,
    pub fraction: Rational,
    /// Thresholds `T'` where the condition fails (all of them, ascending).
    pub failing: Vec<u64>,
}

pub fn singularity_scan(
    sys: &AffineSystem,
    kappa: &Rational,
    eps_list: &[Rational],
    t_max: u64,
    opts: &ScanOptions,
) -> Result<Vec<SingularityRow>> {
    if kappa.is_negative() {
        return Err(Error::invalid("kappa must be non-negative"));
    }
    if t_max < 1 {
        return Err(Error::invalid("T must be at least 1"));
    }
    let r_max = int_root_floor(t_max, sys.n).max(1);
    let table = min_table(sys, 1, r_max, opts)?;
    let powers: Vec<DyadicInterval> = (1..=t_max)
        .map(|t| pow_enclosure(&Rational::from_integer(BigInt::from(t)), &-kappa.clone(), DEFAULT_BITS))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for eps in eps_list {
        if !eps.is_positive() {
            return Err(Error::invalid("eps must be positive"));
        }
        let (mut holds, mut fails, mut undecided) = (0, 0, 0);
        let mut failing = Vec::new();
        for t in 1..=t_max {
            let r = int_root_floor(t, sys.n);
            let v = if r == 0 {
                Verdict::False
            } else {
                let bound = powers[(t - 1) as usize].scale(eps);
                decide_less(&table.at(r).expect("tabulated").value, sys.m, &bound)
            };
            match v {
                Verdict::True => holds += 1,
                Verdict::False => {
                    fails += 1;
                    failing.push(t);
                }
                Verdict::Undecided => undecided += 1,
            }
        }
        out.push(SingularityRow {
            eps: eps.clone(),
            holds,
            fails,
            undecided,
            fraction: Rational::new(BigInt::from(holds), BigInt::from(t_max)),
            failing,
        });
    }
    Ok(out)
}

/// `A` with first column `γ` and zeros elsewhere, so that `q = (1, k, 0, …)`
/// gives `Aq − γ = 0` for every `k`.
pub fn build_trivial_member(gamma: Vec<ExactReal>, n: usize) -> Result<AffineSystem> {
    if n < 2 {
        return Err(Error::invalid("the trivial member needs n >= 2"));
    }
    let m = gamma.len();
    let a = gamma
        .iter()
        .map(|g| {
            let mut row = vec![ExactReal::zero(); n];
            row[0] = g.clone();
            row
        })
        .collect();
    AffineSystem::new(m, n, a, Gamma::Values(gamma))
}

/// Exact distance of a rational system at `q`, evaluated directly in rational
/// arithmetic (no common denominator); used to cross-check the kernel.
pub fn rational_point_dist(sys: &AffineSystem, q: &[BigInt]) -> Option<Rational> {
    let mut best = Rational::zero();
    for i in 0..sys.m {
        let mut v = Rational::zero();
        let shift: Vec<BigInt> = match &sys.gamma {
            Gamma::Orbit(q0) => q.iter().zip(q0).map(|(a, b)| a - b).collect(),
            _ => q.to_vec(),
        };
        for (j, qj) in shift.iter().enumerate() {
            v += sys.a[i][j].as_rational()? * Rational::from_integer(qj.clone());
        }
        match &sys.gamma {
            Gamma::Values(g) => v -= g[i].as_rational()?,
            Gamma::Enclosed(g) if g[i].is_point() => v -= g[i].lo(),
            Gamma::Enclosed(_) => return None,
            Gamma::Orbit(_) => {}
        }
        let d = interval_dist(&DyadicInterval::point(v)).interval.lo().clone();
        if d > best {
            best = d;
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;

    fn r(s: &str) -> ExactReal {
        ExactReal::parse(s).unwrap()
    }

    #[test]
    fn shell_examples() {
        assert_eq!(shell_points(1, 3), vec![vec![-3], vec![3]]);
        assert_eq!(shell_points(2, 1).len(), 8);
        assert_eq!(shell_points(3, 2).len(), 98);
        let s = shell_points(2, 2);
        let mut sorted = s.clone();
        sorted.sort();
        assert_eq!(s, sorted);
    }

    #[test]
    fn single_scan_tables_match_per_l_tables() {
        let sys = AffineSystem::new(
            1,
            2,
            vec![vec![r("golden"), r("2/7")]],
            Gamma::Values(vec![r("1/3")]),
        )
        .unwrap();
        let ev = Evaluator::new(&sys, &BigInt::from(12), 64).unwrap();
        let all = min_tables_with(&ev, 5, 12, 2).unwrap();
        for (i, table) in all.iter().enumerate() {
            assert_eq!(table, &min_table_with(&ev, i as u64 + 1, 12, 1).unwrap());
        }
    }

    #[test]
    fn half_shell_is_negative_half() {
        for n in 1..=3 {
            for t in 1..=3 {
                let full = shell_points(n, t);
                let half = shell_points_half(n, t, true);
                assert_eq!(half.len() * 2, full.len());
                for q in &half {
                    let first = q.iter().find(|&&c| c != 0).unwrap();
                    assert!(*first < 0);
                }
            }
        }
    }

    #[test]
    fn one_third_min_table() {
        let sys = AffineSystem::one_dim(r("1/3"), ExactReal::zero()).unwrap();
        let t = min_table(&sys, 1, 6, &ScanOptions::default()).unwrap();
        assert_eq!(t.rows[0].value, DyadicInterval::point(rat(1, 3)));
        assert_eq!(t.rows[1].value, DyadicInterval::point(rat(1, 3)));
        for row in &t.rows[2..] {
            assert_eq!(row.value, DyadicInterval::zero());
        }
        assert_eq!(t.rows[2].argmin, vec![-3]);
    }

    #[test]
    fn golden_records_are_fibonacci() {
        let sys = AffineSystem::one_dim(r("golden"), ExactReal::zero()).unwrap();
        let rec = record_minima(&sys, 100, &ScanOptions::default()).unwrap();
        let ts: Vec<u64> = rec.entries.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
        assert!(!rec.exhausted);
    }

    #[test]
    fn half_gives_zero_badness() {
        let sys = AffineSystem::one_dim(r("1/2"), ExactReal::zero()).unwrap();
        let b = badness_profile(&sys, 10, &ScanOptions::default()).unwrap();
        assert_eq!(b.rows[0].value, DyadicInterval::point(rat(1, 2)));
        for row in &b.rows[1..] {
            assert_eq!(row.value, DyadicInterval::zero());
        }
    }

    #[test]
    fn trivial_member_examples() {
        let sys = build_trivial_member(vec![r("1/2")], 2).unwrap();
        let q = [BigInt::from(1), BigInt::from(5)];
        assert_eq!(point_dist(&sys, &q, 64).unwrap().interval, DyadicInterval::zero());
        let t = min_table(&sys, 1, 5, &ScanOptions::default()).unwrap();
        assert!(t.rows.iter().all(|row| row.value == DyadicInterval::zero()));
        let sys = build_trivial_member(vec![r("1/3"), r("2/3")], 3).unwrap();
        let q = [BigInt::from(1), BigInt::from(7), BigInt::from(0)];
        assert_eq!(point_dist(&sys, &q, 64).unwrap().interval, DyadicInterval::zero());
        assert!(build_trivial_member(vec![r("1/2")], 1).is_err());
    }

    #[test]
    fn orbit_target_hits_zero_at_the_orbit_point() {
        let sys = AffineSystem::new(1, 1, vec![vec![r("2/7")]], Gamma::Orbit(vec![BigInt::from(3)])).unwrap();
        let d = point_dist(&sys, &[BigInt::from(3)], 64).unwrap();
        assert_eq!(d.interval, DyadicInterval::zero());
        let d = point_dist(&sys, &[BigInt::from(4)], 64).unwrap();
        assert_eq!(d.interval, DyadicInterval::point(rat(2, 7)));
    }

    #[test]
    fn parse_system_file() {
        let text = "# golden\nm = 1\nn = 2\nA = golden 1/3\ngamma = 1/5\n";
        let sys = AffineSystem::parse(text).unwrap();
        assert_eq!(sys.n, 2);
        assert_eq!(AffineSystem::parse(&sys.to_spec()).unwrap(), sys);
        let bad = "m = 1\nn = 1\nA = 1/0\n";
        let (line, col, _) = AffineSystem::parse(bad).unwrap_err();
        assert_eq!((line, col), (3, 7));
        let enc = "m = 1\nn = 1\nA = 1/3\ngamma = [1/5,2/5]\n";
        assert!(matches!(AffineSystem::parse(enc).unwrap().gamma, Gamma::Enclosed(_)));
        let orb = "m = 1\nn = 2\nA = 1/3 golden\ngamma = orbit:[1,2]\n";
        assert!(matches!(AffineSystem::parse(orb).unwrap().gamma, Gamma::Orbit(_)));
    }

    #[test]
    fn serial_and_parallel_tables_agree() {
        let sys = AffineSystem::homogeneous(2, 2, vec![vec![r("1/7"), r("golden")], vec![r("3/11"), r("2/9")]]).unwrap();
        let a = min_table(&sys, 1, 12, &ScanOptions { budget: 128, workers: 1 }).unwrap();
        let b = min_table(&sys, 1, 12, &ScanOptions { budget: 128, workers: 4 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn golden_dirichlet_fails_at_small_eps() {
        let sys = AffineSystem::one_dim(r("golden"), ExactReal::zero()).unwrap();
        let psi = ApproxFunction::power_law(rat(1, 10), rat(1, 1)).unwrap();
        let v = dirichlet_test(&sys, &psi, &[10, 100, 1000], &ScanOptions::default()).unwrap();
        assert!(v.iter().all(|(_, x)| *x == Verdict::False));
        let one = ApproxFunction::power_law(rat(1, 1), rat(0, 1)).unwrap();
        let v = dirichlet_test(&sys, &one, &[1, 5, 50], &ScanOptions::default()).unwrap();
        assert!(v.iter().all(|(_, x)| *x == Verdict::True));
    }
}
