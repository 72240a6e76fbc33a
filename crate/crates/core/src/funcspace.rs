//! Decreasing approximation functions `ψ: ℕ → ℝ≥0`, handled through their
//! `m`-th powers.
//!
//! Every representation compiles to a [`Profile`]: consecutive integer ranges
//! `(lo, hi]` on which `ψ(q)ᵐ = k + Σ cⱼ q^(−eⱼ)` with rational data. Range
//! sums of `qⁿ⁻¹ψ(q)ᵐ` use exact power sums for the constant part and exact
//! terms or an integral sandwich for the power part, so the series, the metric
//! and the classification never need to touch individual points of long
//! ranges.

use std::fmt;
use std::ops::ControlFlow;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{compare, ln_enclosure, parse_rational, pow_enclosure, Cmp, DyadicInterval, Rational};
use crate::lattice::{AffineSystem, Evaluator, ScanOptions};

/// Ranges with at most this many integers are summed term by term.
const EXACT_TERMS: u64 = 64;
/// Relative precision (bits) of irrational power evaluations.
const REL_BITS: u32 = 96;

/// A non-increasing `ψ`. Step heights are stored as `m`-th powers; the
/// exponent `m` is supplied when the function is evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ApproxFunction {
    /// `ψ(q) = c·q^(−a)`.
    PowerLaw { c: Rational, a: Rational },
    /// `ψ(q)ᵐ = hᵢ` on `(bᵢ₋₁, bᵢ]` with `b₀ = 0`, and `0` past the last break.
    Step { steps: Vec<(BigInt, Rational)> },
    /// As `Step`, continued by `c·q^(−a)` past the last break.
    StepTail {
        steps: Vec<(BigInt, Rational)>,
        c: Rational,
        a: Rational,
    },
    /// `ψ(q)ᵐ = base(q)ᵐ + add` on each `(lo, hi]`.
    Bumped {
        base: Box<ApproxFunction>,
        bumps: Vec<(BigInt, BigInt, Rational)>,
    },
    /// `base` on `q < cut`, `0` from `cut` on.
    Truncated { base: Box<ApproxFunction>, cut: BigInt },
    /// Pointwise maximum.
    Max(Vec<ApproxFunction>),
}

impl ApproxFunction {
    pub fn power_law(c: Rational, a: Rational) -> Result<Self> {
        if c.is_negative() {
            return Err(Error::invalid("power law coefficient must be non-negative"));
        }
        if a.is_negative() {
            return Err(Error::invalid("power law exponent must be non-negative"));
        }
        Ok(ApproxFunction::PowerLaw { c, a })
    }

    pub fn step(steps: Vec<(BigInt, Rational)>) -> Result<Self> {
        check_steps(&steps)?;
        Ok(ApproxFunction::Step { steps })
    }

    pub fn step_tail(steps: Vec<(BigInt, Rational)>, c: Rational, a: Rational) -> Result<Self> {
        check_steps(&steps)?;
        if c.is_negative() || a.is_negative() {
            return Err(Error::invalid("tail must be a non-negative, non-increasing power law"));
        }
        Ok(ApproxFunction::StepTail { steps, c, a })
    }

    pub fn zero() -> Self {
        ApproxFunction::Step { steps: Vec::new() }
    }

    /// Parses `pow:c,a`, `step:[(b1,h1),...]` or `steptail:[(b1,h1),...]|pow:c,a`,
    /// with step heights given as `m`-th powers.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("pow:") {
            let (c, a) = parse_pow(rest, 5)?;
            return ApproxFunction::power_law(c, a);
        }
        if let Some(rest) = s.strip_prefix("steptail:") {
            let bar = rest
                .find('|')
                .ok_or_else(|| Error::parse(10, "expected '|pow:c,a' after the steps"))?;
            let steps = parse_steps(&rest[..bar], 10)?;
            let tail = &rest[bar + 1..];
            let off = 10 + bar + 1;
            let tail = tail
                .strip_prefix("pow:")
                .ok_or_else(|| Error::parse(off, "expected pow:c,a"))?;
            let (c, a) = parse_pow(tail, off + 4)?;
            return ApproxFunction::step_tail(steps, c, a);
        }
        if let Some(rest) = s.strip_prefix("step:") {
            let steps = parse_steps(rest, 6)?;
            return ApproxFunction::step(steps);
        }
        Err(Error::parse(1, "expected pow:, step: or steptail:"))
    }

    /// Text form for the three basic representations; composites are written
    /// as a step function when they have finite support and constant pieces.
    pub fn to_spec(&self, m: usize) -> Option<String> {
        let steps_str = |steps: &[(BigInt, Rational)]| {
            let parts: Vec<String> = steps.iter().map(|(b, h)| format!("({b},{h})")).collect();
            format!("[{}]", parts.join(","))
        };
        match self {
            ApproxFunction::PowerLaw { c, a } => Some(format!("pow:{c},{a}")),
            ApproxFunction::Step { steps } => Some(format!("step:{}", steps_str(steps))),
            ApproxFunction::StepTail { steps, c, a } => {
                Some(format!("steptail:{}|pow:{c},{a}", steps_str(steps)))
            }
            _ => {
                let p = self.compile(m).ok()?;
                let (last, body) = p.pieces.split_last()?;
                if !last.form.is_zero() || body.iter().any(|pc| !pc.form.terms.is_empty()) {
                    return None;
                }
                let steps: Vec<(BigInt, Rational)> = body
                    .iter()
                    .map(|pc| (pc.hi.clone().expect("finite"), pc.form.k.clone()))
                    .collect();
                Some(format!("step:{}", steps_str(&steps)))
            }
        }
    }

    /// Piecewise form of `ψᵐ`.
    pub fn compile(&self, m: usize) -> Result<Profile> {
        if m == 0 {
            return Err(Error::invalid("m must be positive"));
        }
        let pieces = match self {
            ApproxFunction::PowerLaw { c, a } => vec![Piece {
                lo: BigInt::zero(),
                hi: None,
                form: Form::power(num_traits::pow(c.clone(), m), a * Rational::from_integer(m.into())),
            }],
            ApproxFunction::Step { steps } => step_pieces(steps, Form::zero()),
            ApproxFunction::StepTail { steps, c, a } => step_pieces(
                steps,
                Form::power(num_traits::pow(c.clone(), m), a * Rational::from_integer(m.into())),
            ),
            ApproxFunction::Bumped { base, bumps } => {
                let mut b = bumps.clone();
                b.sort_by(|x, y| x.0.cmp(&y.0));
                let mut bump_pieces = Vec::new();
                let mut cur = BigInt::zero();
                for (lo, hi, add) in &b {
                    if lo < &cur || hi <= lo || add.is_negative() {
                        return Err(Error::invalid("bumps must be disjoint, non-empty and non-negative"));
                    }
                    if lo > &cur {
                        bump_pieces.push(Piece { lo: cur.clone(), hi: Some(lo.clone()), form: Form::zero() });
                    }
                    bump_pieces.push(Piece { lo: lo.clone(), hi: Some(hi.clone()), form: Form::constant(add.clone()) });
                    cur = hi.clone();
                }
                bump_pieces.push(Piece { lo: cur, hi: None, form: Form::zero() });
                let base = base.compile(m)?;
                overlay(&base.pieces, &bump_pieces)
                    .into_iter()
                    .map(|(lo, hi, f, g)| Piece { lo, hi, form: f.add(&g) })
                    .collect()
            }
            ApproxFunction::Truncated { base, cut } => {
                if cut < &BigInt::one() {
                    return Err(Error::invalid("truncation point must be at least 1"));
                }
                let base = base.compile(m)?;
                let end = cut - 1;
                let mut out: Vec<Piece> = Vec::new();
                for p in base.pieces {
                    if p.lo >= end {
                        break;
                    }
                    let hi = match &p.hi {
                        Some(h) if h <= &end => h.clone(),
                        _ => end.clone(),
                    };
                    out.push(Piece { lo: p.lo, hi: Some(hi), form: p.form });
                }
                out.push(Piece { lo: end, hi: None, form: Form::zero() });
                out
            }
            ApproxFunction::Max(list) => {
                let mut it = list.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::invalid("max of an empty list"))?
                    .compile(m)?;
                let mut acc = first.pieces;
                for f in it {
                    let other = f.compile(m)?;
                    let mut merged = Vec::new();
                    for (lo, hi, f1, f2) in overlay(&acc, &other.pieces) {
                        let diff = f1.sub(&f2);
                        for (a, b, s) in sign_split(&diff, &lo, hi.as_ref())? {
                            let pick = if s >= 0 { f1.clone() } else { f2.clone() };
                            merged.push(Piece { lo: a, hi: b, form: pick });
                        }
                    }
                    acc = merged;
                }
                acc
            }
        };
        Ok(Profile { m, pieces: coalesce(pieces) })
    }

    /// Encloses `ψ(q)ᵐ`.
    pub fn pow_m(&self, q: &BigInt, m: usize) -> Result<DyadicInterval> {
        self.compile(m)?.eval(q)
    }

    /// Encloses `ψ(q)` itself, taking an `m`-th root at `bits` bits.
    pub fn value(&self, q: &BigInt, m: usize, bits: u32) -> Result<DyadicInterval> {
        let p = self.pow_m(q, m)?;
        root_enclosure(&p, m, bits)
    }
}

impl fmt::Display for ApproxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproxFunction::Bumped { base, bumps } => write!(f, "bumped({base}, {} bumps)", bumps.len()),
            ApproxFunction::Truncated { base, cut } => write!(f, "truncated({base}, {cut})"),
            ApproxFunction::Max(list) => {
                let parts: Vec<String> = list.iter().map(|x| x.to_string()).collect();
                write!(f, "max({})", parts.join(", "))
            }
            other => write!(f, "{}", other.to_spec(1).unwrap_or_default()),
        }
    }
}

fn check_steps(steps: &[(BigInt, Rational)]) -> Result<()> {
    let mut prev_b = BigInt::zero();
    let mut prev_h: Option<&Rational> = None;
    for (b, h) in steps {
        if b <= &prev_b {
            return Err(Error::invalid("breakpoints must be strictly increasing positive integers"));
        }
        if h.is_negative() {
            return Err(Error::invalid("step heights must be non-negative"));
        }
        if let Some(p) = prev_h {
            if h > p {
                return Err(Error::invalid("step heights must be non-increasing"));
            }
        }
        prev_b = b.clone();
        prev_h = Some(h);
    }
    Ok(())
}

fn parse_pow(s: &str, col: usize) -> Result<(Rational, Rational)> {
    let (c, a) = s
        .split_once(',')
        .ok_or_else(|| Error::parse(col, "expected c,a"))?;
    let cv = parse_rational(c.trim()).map_err(|e| crate::exactnum::shift_col(e, col - 1))?;
    let av = parse_rational(a.trim()).map_err(|e| crate::exactnum::shift_col(e, col + c.len()))?;
    Ok((cv, av))
}

fn parse_steps(s: &str, col: usize) -> Result<Vec<(BigInt, Rational)>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::parse(col, "expected [(b,h),...]"))?;
    let mut out = Vec::new();
    let mut rest = inner;
    let mut off = col + 1;
    while !rest.trim().is_empty() {
        let open = rest.find('(').ok_or_else(|| Error::parse(off, "expected '('"))?;
        let close = rest.find(')').ok_or_else(|| Error::parse(off + open, "unclosed '('"))?;
        let body = &rest[open + 1..close];
        let (b, h) = body
            .split_once(',')
            .ok_or_else(|| Error::parse(off + open + 1, "expected (b,h)"))?;
        let bv: BigInt = b
            .trim()
            .parse()
            .map_err(|_| Error::parse(off + open + 1, format!("bad breakpoint '{}'", b.trim())))?;
        let hv = parse_rational(h.trim())
            .map_err(|e| crate::exactnum::shift_col(e, off + open + 1 + b.len()))?;
        out.push((bv, hv));
        let next = &rest[close + 1..];
        let skip = next.find(|ch: char| ch != ',' && !ch.is_whitespace()).unwrap_or(next.len());
        off += close + 1 + skip;
        rest = &next[skip..];
    }
    Ok(out)
}

fn step_pieces(steps: &[(BigInt, Rational)], tail: Form) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut lo = BigInt::zero();
    for (b, h) in steps {
        out.push(Piece { lo: lo.clone(), hi: Some(b.clone()), form: Form::constant(h.clone()) });
        lo = b.clone();
    }
    out.push(Piece { lo, hi: None, form: tail });
    out
}

/// `k + Σ c·q^(−e)`, normalized: distinct non-zero exponents, non-zero
/// coefficients, sorted by exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Form {
    pub k: Rational,
    pub terms: Vec<(Rational, Rational)>,
}

impl Form {
    pub fn zero() -> Self {
        Form { k: Rational::zero(), terms: Vec::new() }
    }

    pub fn constant(k: Rational) -> Self {
        Form { k, terms: Vec::new() }
    }

    pub fn power(c: Rational, e: Rational) -> Self {
        Form::normalized(Rational::zero(), vec![(c, e)])
    }

    fn normalized(mut k: Rational, terms: Vec<(Rational, Rational)>) -> Self {
        let mut out: Vec<(Rational, Rational)> = Vec::new();
        for (c, e) in terms {
            if c.is_zero() {
                continue;
            }
            if e.is_zero() {
                k += c;
                continue;
            }
            match out.iter_mut().find(|(_, e2)| *e2 == e) {
                Some(t) => t.0 += c,
                None => out.push((c, e)),
            }
        }
        out.retain(|(c, _)| !c.is_zero());
        out.sort_by(|a, b| a.1.cmp(&b.1));
        Form { k, terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.k.is_zero() && self.terms.is_empty()
    }

    pub fn add(&self, other: &Form) -> Form {
        let mut t = self.terms.clone();
        t.extend(other.terms.iter().cloned());
        Form::normalized(&self.k + &other.k, t)
    }

    pub fn sub(&self, other: &Form) -> Form {
        let mut t = self.terms.clone();
        t.extend(other.terms.iter().map(|(c, e)| (-c.clone(), e.clone())));
        Form::normalized(&self.k - &other.k, t)
    }

    /// Encloses the value at a positive integer.
    pub fn eval(&self, q: &BigInt) -> Result<DyadicInterval> {
        self.eval_bits(q, REL_BITS)
    }

    fn eval_bits(&self, q: &BigInt, rel: u32) -> Result<DyadicInterval> {
        let mut acc = DyadicInterval::point(self.k.clone());
        for (c, e) in &self.terms {
            let p = pow_rel(q, &-e.clone(), rel)?;
            acc = acc.add(&p.scale(c));
        }
        Ok(acc)
    }

    /// Sign at `q`, refining the evaluation when needed.
    fn sign_at(&self, q: &BigInt) -> Result<i8> {
        for rel in [REL_BITS, 512, 2048] {
            let v = self.eval_bits(q, rel)?;
            if v.lo().is_positive() {
                return Ok(1);
            }
            if v.hi().is_negative() {
                return Ok(-1);
            }
            if v.is_point() {
                return Ok(0);
            }
        }
        if self.vanishes_at(q) {
            return Ok(0);
        }
        Err(Error::PrecisionExhausted(format!("sign of a difference at q={q}")))
    }

    /// Exact zero test for `k + c·q^(−e)` and `c₁q^(−e₁) + c₂q^(−e₂)`, which
    /// reduce to `q^(r/s) = x`, i.e. `q^r = x^s`.
    fn vanishes_at(&self, q: &BigInt) -> bool {
        let (d, x) = match (self.terms.as_slice(), self.k.is_zero()) {
            ([(c, e)], false) => (-e.clone(), -(&self.k / c)),
            ([(c1, e1), (c2, e2)], true) => (e2 - e1, -(c2 / c1)),
            _ => return false,
        };
        if !x.is_positive() {
            return false;
        }
        let (Some(r), Some(s)) = (d.numer().to_i64(), d.denom().to_usize()) else {
            return false;
        };
        if r.unsigned_abs() > 4096 || s > 4096 {
            return false;
        }
        let base = Rational::from_integer(q.clone());
        let lhs = if r >= 0 {
            num_traits::pow(base, r as usize)
        } else {
            num_traits::pow(base.recip(), r.unsigned_abs() as usize)
        };
        lhs == num_traits::pow(x, s)
    }

    /// Sign of the value as `q → ∞`.
    fn limit_sign(&self) -> i8 {
        if let Some((c, e)) = self.terms.first() {
            if e.is_negative() {
                return sign_of(c);
            }
        }
        if !self.k.is_zero() {
            return sign_of(&self.k);
        }
        self.terms.first().map(|(c, _)| sign_of(c)).unwrap_or(0)
    }
}

fn sign_of(x: &Rational) -> i8 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Encloses `q^e` with roughly `rel` bits of relative precision.
pub(crate) fn pow_rel(q: &BigInt, e: &Rational, rel: u32) -> Result<DyadicInterval> {
    let x = Rational::from_integer(q.clone());
    if e.is_integer() {
        return pow_enclosure(&x, e, 0);
    }
    let mag = e.abs().ceil().to_integer().to_u64().unwrap_or(u64::MAX);
    let extra = if e.is_negative() { mag.saturating_mul(q.bits()) } else { 0 };
    let bits = u32::try_from(u64::from(rel) + extra).map_err(|_| Error::invalid("power too small to enclose"))?;
    pow_enclosure(&x, e, bits)
}

fn root_enclosure(p: &DyadicInterval, m: usize, bits: u32) -> Result<DyadicInterval> {
    if m == 1 {
        return Ok(p.clone());
    }
    let inv = Rational::new(BigInt::one(), BigInt::from(m));
    let lo = pow_enclosure(&p.lo().clone().max(Rational::zero()), &inv, bits)?;
    let hi = pow_enclosure(&p.hi().clone().max(Rational::zero()), &inv, bits)?;
    DyadicInterval::new(lo.lo().clone(), hi.hi().clone())
}

/// `ψᵐ = form` on the integers of `(lo, hi]`; `hi = None` means unbounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub lo: BigInt,
    pub hi: Option<BigInt>,
    pub form: Form,
}

/// Compiled `ψᵐ` covering all `q ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Profile {
    pub m: usize,
    pub pieces: Vec<Piece>,
}

fn coalesce(pieces: Vec<Piece>) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::new();
    for p in pieces {
        if let Some(h) = &p.hi {
            if h <= &p.lo {
                continue;
            }
        }
        match out.last_mut() {
            Some(last) if last.form == p.form => last.hi = p.hi,
            _ => out.push(p),
        }
    }
    out
}

/// Common refinement of two piece lists.
fn overlay(a: &[Piece], b: &[Piece]) -> Vec<(BigInt, Option<BigInt>, Form, Form)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut lo = BigInt::zero();
    while i < a.len() && j < b.len() {
        let (ha, hb) = (&a[i].hi, &b[j].hi);
        let hi = match (ha, hb) {
            (None, None) => None,
            (Some(x), None) => Some(x.clone()),
            (None, Some(y)) => Some(y.clone()),
            (Some(x), Some(y)) => Some(x.min(y).clone()),
        };
        out.push((lo.clone(), hi.clone(), a[i].form.clone(), b[j].form.clone()));
        match &hi {
            None => break,
            Some(h) => {
                if ha.as_ref() == Some(h) {
                    i += 1;
                }
                if hb.as_ref() == Some(h) {
                    j += 1;
                }
                lo = h.clone();
            }
        }
    }
    out
}

/// Splits the integers of `(lo, hi]` into runs on which `f` has one sign.
/// Zeros are attached to a neighbouring run.
fn sign_split(f: &Form, lo: &BigInt, hi: Option<&BigInt>) -> Result<Vec<(BigInt, Option<BigInt>, i8)>> {
    if f.terms.is_empty() {
        return Ok(vec![(lo.clone(), hi.cloned(), sign_of(&f.k))]);
    }
    if f.terms.len() > 2 {
        return Err(Error::invalid("sign analysis supports at most two power terms"));
    }
    let mut monotone_runs: Vec<(BigInt, Option<BigInt>)> = Vec::new();
    if f.terms.len() == 2 {
        // The derivative times q^(e1+1) is −e1c1 − e2c2·q^(e1−e2), monotone in q.
        let (c1, e1) = &f.terms[0];
        let (c2, e2) = &f.terms[1];
        let h = Form::normalized(-(e1 * c1), vec![(-(e2 * c2), e2 - e1)]);
        let start = lo + 1;
        let s0 = h.sign_at(&start)?;
        let sl = match hi {
            Some(b) => h.sign_at(b)?,
            None => h.limit_sign(),
        };
        if s0 == sl || s0 == 0 || sl == 0 {
            monotone_runs.push((lo.clone(), hi.cloned()));
        } else {
            let cut = last_with(&h, &start, hi, |s| s != sl)?;
            monotone_runs.push((lo.clone(), Some(cut.clone())));
            monotone_runs.push((cut, hi.cloned()));
        }
    } else {
        monotone_runs.push((lo.clone(), hi.cloned()));
    }
    let mut out = Vec::new();
    for (a, b) in monotone_runs {
        if let Some(bb) = &b {
            if bb <= &a {
                continue;
            }
        }
        let start = &a + 1;
        let s0 = f.sign_at(&start)?;
        let sl = match &b {
            Some(bb) => f.sign_at(bb)?,
            None => f.limit_sign(),
        };
        if s0 == sl || s0 == 0 || sl == 0 {
            let s = if s0 != 0 { s0 } else { sl };
            out.push((a, b, s));
        } else {
            let cut = last_with(f, &start, b.as_ref(), |s| s != sl)?;
            out.push((a, Some(cut.clone()), s0));
            out.push((cut, b, sl));
        }
    }
    Ok(out)
}

/// Largest integer `x ≥ start` (and `≤ hi`) with `pred(sign(f(x)))`, for a
/// predicate that holds at `start` and fails eventually, monotonically.
fn last_with(f: &Form, start: &BigInt, hi: Option<&BigInt>, pred: impl Fn(i8) -> bool) -> Result<BigInt> {
    let mut good = start.clone();
    let mut bad = match hi {
        Some(b) => b.clone(),
        None => {
            let mut x = start * 2 + 1;
            let mut steps = 0;
            while pred(f.sign_at(&x)?) {
                good = x.clone();
                x = &x * 2;
                steps += 1;
                if steps > 4096 {
                    return Err(Error::PrecisionExhausted("sign change not located".into()));
                }
            }
            x
        }
    };
    while &bad - &good > BigInt::one() {
        let mid: BigInt = (&good + &bad) >> 1usize;
        if pred(f.sign_at(&mid)?) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// `Σ_{q=1}^{N} q^k` for `k ≥ 0`.
pub fn power_sum(n: &BigInt, k: u32) -> BigInt {
    if !n.is_positive() {
        return BigInt::zero();
    }
    let mut sums: Vec<Rational> = Vec::new();
    let np1 = Rational::from_integer(n + 1);
    for j in 0..=k {
        let mut acc = num_traits::pow(np1.clone(), (j + 1) as usize) - Rational::one();
        for (i, s) in sums.iter().enumerate() {
            acc -= Rational::from_integer(binomial(j + 1, i as u32)) * s;
        }
        sums.push(acc / Rational::from_integer(BigInt::from(j + 1)));
    }
    sums.pop().expect("k+1 entries").to_integer()
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// `∫_x^y t^(−s) dt` for `1 ≤ x < y`; `y = None` is `+∞` and needs `s > 1`.
fn integral(x: &BigInt, y: Option<&BigInt>, s: &Rational) -> Result<DyadicInterval> {
    if s.is_one() {
        let y = y.ok_or_else(|| Error::DivergentTail("harmonic tail".into()))?;
        return ln_enclosure(&Rational::new(y.clone(), x.clone()), REL_BITS);
    }
    let one_minus = Rational::one() - s;
    let fx = pow_rel(x, &one_minus, REL_BITS)?;
    match y {
        Some(y) => Ok(pow_rel(y, &one_minus, REL_BITS)?.sub(&fx).scale(&one_minus.recip())),
        None => {
            if s <= &Rational::one() {
                return Err(Error::DivergentTail(format!("Σ q^(-{s}) diverges")));
            }
            Ok(fx.scale(&(-one_minus).recip()))
        }
    }
}

/// Encloses `Σ q^(−s)` over the integers of `(lo, hi]`.
pub fn power_range_sum(lo: &BigInt, hi: Option<&BigInt>, s: &Rational) -> Result<DyadicInterval> {
    if let Some(h) = hi {
        if h <= lo {
            return Ok(DyadicInterval::zero());
        }
    }
    if hi.is_none() && s <= &Rational::one() {
        return Err(Error::DivergentTail(format!("Σ q^(-{s}) diverges")));
    }
    if s.is_integer() && !s.is_positive() {
        let h = hi.expect("checked above");
        let k = (-s).to_integer().to_u32().ok_or_else(|| Error::invalid("exponent too large"))?;
        return Ok(DyadicInterval::point(Rational::from_integer(power_sum(h, k) - power_sum(lo, k))));
    }
    if let Some(h) = hi {
        if h - lo <= BigInt::from(EXACT_TERMS) {
            let mut acc = DyadicInterval::zero();
            let mut q = lo + 1;
            while &q <= h {
                acc = acc.add(&pow_rel(&q, &-s.clone(), REL_BITS)?);
                q += 1;
            }
            return Ok(acc);
        }
    }
    if s.is_positive() {
        // Sum the largest terms exactly; the sandwich below is loose by
        // about the first term it covers.
        let mid = lo + BigInt::from(EXACT_TERMS);
        let head = power_range_sum(lo, Some(&mid), s)?;
        return Ok(head.add(&decreasing_sandwich(&mid, hi, s)?));
    }
    // Increasing terms: ∫_a^b ≤ Σ ≤ ∫_{a+1}^{b+1}.
    let a1 = lo + 1;
    let h = hi.expect("checked above");
    let lower = if lo.is_zero() {
        pow_rel(&a1, &-s.clone(), REL_BITS)?.add(&integral(&a1, Some(h), s)?)
    } else {
        integral(lo, Some(h), s)?
    };
    let upper = integral(&a1, Some(&(h + 1)), s)?;
    Ok(DyadicInterval::spanning(lower.lo().clone(), upper.hi().clone()))
}

/// `∫_{a+1}^{b+1} ≤ Σ_{a<q≤b} q^(−s) ≤ f(a+1) + ∫_{a+1}^{b}` for `s > 0`.
fn decreasing_sandwich(lo: &BigInt, hi: Option<&BigInt>, s: &Rational) -> Result<DyadicInterval> {
    let a1 = lo + 1;
    let first = pow_rel(&a1, &-s.clone(), REL_BITS)?;
    let lower = integral(&a1, hi.map(|h| h + 1).as_ref(), s)?;
    let upper = first.add(&integral(&a1, hi, s)?);
    Ok(DyadicInterval::spanning(lower.lo().clone(), upper.hi().clone()))
}

/// `Σ qⁿ⁻¹·form(q)` over `(lo, hi]`.
fn weighted_sum(form: &Form, lo: &BigInt, hi: Option<&BigInt>, n: usize) -> Result<DyadicInterval> {
    let mut acc = DyadicInterval::zero();
    if !form.k.is_zero() {
        let h = hi.ok_or_else(|| Error::DivergentTail("constant tail".into()))?;
        let cnt = power_sum(h, (n - 1) as u32) - power_sum(lo, (n - 1) as u32);
        acc = acc.add(&DyadicInterval::point(&form.k * Rational::from_integer(cnt)));
    }
    for (c, e) in &form.terms {
        let s = e - Rational::from_integer(BigInt::from(n - 1));
        acc = acc.add(&power_range_sum(lo, hi, &s)?.scale(c));
    }
    Ok(acc)
}

impl Profile {
    fn piece_at(&self, q: &BigInt) -> &Piece {
        let idx = self.pieces.partition_point(|p| match &p.hi {
            Some(h) => h < q,
            None => false,
        });
        &self.pieces[idx.min(self.pieces.len() - 1)]
    }

    /// Encloses `ψ(q)ᵐ` for `q ≥ 1`.
    pub fn eval(&self, q: &BigInt) -> Result<DyadicInterval> {
        if !q.is_positive() {
            return Err(Error::invalid("ψ is evaluated at positive integers"));
        }
        self.piece_at(q).form.eval(q)
    }

    /// Last `q` with `ψ(q) > 0`, or `None` when the support is unbounded.
    pub fn support_end(&self) -> Option<BigInt> {
        let last = self.pieces.last().expect("non-empty");
        if !last.form.is_zero() {
            return None;
        }
        Some(
            self.pieces
                .iter()
                .rev()
                .find(|p| !p.form.is_zero())
                .and_then(|p| p.hi.clone())
                .unwrap_or_default(),
        )
    }

    /// Checks `ψ(q+1)ᵐ ≤ ψ(q)ᵐ` on every piece and across every breakpoint,
    /// and `ψ ≥ 0`.
    pub fn is_non_increasing(&self) -> Result<bool> {
        for (i, p) in self.pieces.iter().enumerate() {
            if p.form.terms.iter().any(|(c, e)| c.is_negative() || e.is_negative()) {
                return Ok(false);
            }
            if p.form.k.is_negative() {
                return Ok(false);
            }
            if let (Some(h), Some(next)) = (&p.hi, self.pieces.get(i + 1)) {
                let here = p.form.eval(h)?;
                let there = next.form.eval(&(h + 1))?;
                match compare(&there, &here) {
                    Cmp::Greater => return Ok(false),
                    Cmp::Overlap if there.lo() > here.hi() || !(there.hi() <= here.lo()) => {
                        if there != here {
                            return Err(Error::PrecisionExhausted(format!("monotonicity at q={h}")));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(true)
    }

    /// `Σ_{q∈(lo,hi]} qⁿ⁻¹ψ(q)ᵐ`.
    pub fn weighted_range(&self, lo: &BigInt, hi: Option<&BigInt>, n: usize) -> Result<DyadicInterval> {
        let mut acc = DyadicInterval::zero();
        for p in &self.pieces {
            let a = p.lo.clone().max(lo.clone());
            let b = match (&p.hi, hi) {
                (None, None) => None,
                (Some(x), None) => Some(x.clone()),
                (None, Some(y)) => Some(y.clone()),
                (Some(x), Some(y)) => Some(x.min(y).clone()),
            };
            if let Some(bb) = &b {
                if bb <= &a {
                    continue;
                }
            }
            if p.form.is_zero() {
                continue;
            }
            acc = acc.add(&weighted_sum(&p.form, &a, b.as_ref(), n)?);
        }
        Ok(acc)
    }
}

/// Membership in the convergent class `𝒞` or the divergent class `𝒟`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassTag {
    InC,
    InD,
    NotMonotone,
}

impl ClassTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassTag::InC => "InC",
            ClassTag::InD => "InD",
            ClassTag::NotMonotone => "NotMonotone",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub tag: ClassTag,
    /// Last breakpoint before the tail piece.
    pub cutoff: BigInt,
    /// `Σ_{q ≤ cutoff} qⁿ⁻¹ψ(q)ᵐ`.
    pub partial: DyadicInterval,
    /// Enclosure of the tail sum, for `InC`.
    pub tail: Option<DyadicInterval>,
    /// Per-term lower bound `c·q^(−s)` with `s ≤ 1` certifying divergence, for `InD`.
    pub divergence: Option<(Rational, Rational)>,
}

/// Decides `Σ qⁿ⁻¹ψ(q)ᵐ < ∞` from the tail piece.
pub fn classify_cd(psi: &ApproxFunction, m: usize, n: usize) -> Result<Classification> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let prof = psi.compile(m)?;
    let last = prof.pieces.last().expect("non-empty");
    let cutoff = last.lo.clone();
    let partial = prof.weighted_range(&BigInt::zero(), Some(&cutoff), n)?;
    if !prof.is_non_increasing()? {
        return Ok(Classification { tag: ClassTag::NotMonotone, cutoff, partial, tail: None, divergence: None });
    }
    let nm1 = Rational::from_integer(BigInt::from(n - 1));
    if !last.form.k.is_zero() {
        return Ok(Classification {
            tag: ClassTag::InD,
            cutoff,
            partial,
            tail: None,
            divergence: Some((last.form.k.clone(), -nm1)),
        });
    }
    match last.form.terms.first() {
        None => Ok(Classification { tag: ClassTag::InC, cutoff, partial, tail: Some(DyadicInterval::zero()), divergence: None }),
        Some((c, e)) => {
            let s = e - &nm1;
            if s > Rational::one() {
                let tail = weighted_sum(&last.form, &cutoff, None, n)?;
                Ok(Classification { tag: ClassTag::InC, cutoff, partial, tail: Some(tail), divergence: None })
            } else {
                Ok(Classification { tag: ClassTag::InD, cutoff, partial, tail: None, divergence: Some((c.clone(), s)) })
            }
        }
    }
}

/// Partial sum up to `T` and the tail beyond it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesValue {
    pub partial: DyadicInterval,
    pub tail: DyadicInterval,
}

impl SeriesValue {
    pub fn total(&self) -> DyadicInterval {
        self.partial.add(&self.tail)
    }
}

/// `Σ_{q=1}^{T} qⁿ⁻¹ψ(q)ᵐ` (exact whenever the pieces allow) and the tail.
pub fn series_value(psi: &ApproxFunction, m: usize, n: usize, t: &BigInt) -> Result<SeriesValue> {
    let prof = psi.compile(m)?;
    let partial = exact_partial(&prof, t, n)?;
    let tail = prof.weighted_range(t, None, n)?;
    Ok(SeriesValue { partial, tail })
}

/// Partial sum up to `T`, summing power pieces term by term when `T` is small.
pub fn exact_partial(prof: &Profile, t: &BigInt, n: usize) -> Result<DyadicInterval> {
    if t <= &BigInt::from(4096) {
        let mut acc = DyadicInterval::zero();
        for p in &prof.pieces {
            if &p.lo >= t {
                break;
            }
            let hi = match &p.hi {
                Some(h) if h < t => h.clone(),
                _ => t.clone(),
            };
            if p.form.is_zero() {
                continue;
            }
            let cnt = power_sum(&hi, (n - 1) as u32) - power_sum(&p.lo, (n - 1) as u32);
            acc = acc.add(&DyadicInterval::point(&p.form.k * Rational::from_integer(cnt)));
            for (c, e) in &p.form.terms {
                let mut q = &p.lo + 1;
                while q <= hi {
                    let w = pow_rel(&q, &-(e - Rational::from_integer(BigInt::from(n - 1))), REL_BITS)?;
                    acc = acc.add(&w.scale(c));
                    q += 1;
                }
            }
        }
        Ok(acc)
    } else {
        prof.weighted_range(&BigInt::zero(), Some(t), n)
    }
}

/// `d(ψ₁, ψ₂) = Σ qⁿ⁻¹|ψ₁(q)ᵐ − ψ₂(q)ᵐ|`.
pub fn metric_d(psi1: &ApproxFunction, psi2: &ApproxFunction, m: usize, n: usize) -> Result<DyadicInterval> {
    let a = psi1.compile(m)?;
    let b = psi2.compile(m)?;
    metric_profiles(&a, &b, n)
}

pub fn metric_profiles(a: &Profile, b: &Profile, n: usize) -> Result<DyadicInterval> {
    let mut acc = DyadicInterval::zero();
    for (lo, hi, f, g) in overlay(&a.pieces, &b.pieces) {
        let diff = f.sub(&g);
        if diff.is_zero() {
            continue;
        }
        for (x, y, s) in sign_split(&diff, &lo, hi.as_ref())? {
            if s == 0 {
                continue;
            }
            let part = weighted_sum(&diff, &x, y.as_ref(), n)?;
            let part = if s < 0 { part.neg() } else { part };
            let clipped = DyadicInterval::spanning(part.lo().clone().max(Rational::zero()), part.hi().clone().max(Rational::zero()));
            acc = acc.add(&clipped);
        }
    }
    Ok(acc)
}

/// Bounds on `#{q : 1 ≤ ‖q‖ ≤ Q, ⟨Aq−γ⟩ < ψ(‖q‖)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolutionCount {
    /// Points where the strict inequality is certified.
    pub lo: u64,
    /// `lo` plus the undecided points.
    pub hi: u64,
}

pub fn count_solutions(sys: &AffineSystem, psi: &ApproxFunction, q_max: u64, opts: &ScanOptions) -> Result<SolutionCount> {
    let prof = psi.compile(sys.m)?;
    let ev = Evaluator::new(sys, &BigInt::from(q_max), opts.budget)?;
    count_with(&ev, &prof, q_max, opts.workers)
}

pub(crate) fn count_with(ev: &Evaluator, prof: &Profile, q_max: u64, workers: usize) -> Result<SolutionCount> {
    let m = prof.m;
    let den_m = Rational::from_integer(num_traits::pow(ev.den().clone(), m));
    let mut lo = 0u64;
    let mut hi = 0u64;
    let mut err: Option<Error> = None;
    ev.for_each_shell(1, q_max, false, workers, |t, pts| {
        let bound = match prof.eval(&BigInt::from(t)) {
            Ok(b) => b,
            Err(e) => {
                err = Some(e);
                return ControlFlow::Break(());
            }
        };
        // Compare numerators: dist^m·D^m against ψ^m·D^m.
        let b_lo = bound.lo() * &den_m;
        let b_hi = bound.hi() * &den_m;
        for p in pts {
            let d_hi = Rational::from_integer(num_traits::pow(p.hi.clone(), m));
            let d_lo = Rational::from_integer(num_traits::pow(p.lo.clone(), m));
            if d_hi < b_lo {
                lo += 1;
                hi += 1;
            } else if d_lo < b_hi {
                hi += 1;
            }
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(SolutionCount { lo, hi })
}
