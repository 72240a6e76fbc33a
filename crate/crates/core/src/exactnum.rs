//! Exact rationals, rational enclosures of irrationals, and the nearest-integer
//! distance `⟨x⟩` with decidable comparisons under a precision budget.
//!
//! Irrational numbers only enter through continued-fraction streams (see
//! [`crate::contfrac`]). Every quantity that cannot be computed exactly is
//! carried as a [`DyadicInterval`] with rational endpoints, and comparisons that
//! the enclosures cannot decide come back as [`Cmp::Overlap`].

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::contfrac::ContinuedFraction;
use crate::error::{Error, Result};

/// Arbitrary-precision rational, always stored in lowest terms with a positive
/// denominator.
pub type Rational = num_rational::BigRational;

/// Default precision budget in bits.
pub const DEFAULT_BUDGET: u32 = 256;

/// Relative precision (in bits) used by [`log2_bracket`] callers that do not
/// ask for something specific.
pub const LOG_BITS: u32 = 18;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int<T: Into<BigInt>>(n: T) -> Rational {
    Rational::from_integer(n.into())
}

pub fn half() -> Rational {
    rat(1, 2)
}

/// `2^(-p)` as an exact rational.
pub fn two_pow_neg(p: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << p as usize)
}

/// Closed interval `[lo, hi]` with exact rational endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicInterval {
    lo: Rational,
    hi: Rational,
}

impl DyadicInterval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid(format!("interval endpoints reversed: [{lo}, {hi}]")));
        }
        Ok(DyadicInterval { lo, hi })
    }

    /// Builds the interval spanned by two endpoints given in either order.
    pub fn spanning(a: Rational, b: Rational) -> Self {
        if a <= b {
            DyadicInterval { lo: a, hi: b }
        } else {
            DyadicInterval { lo: b, hi: a }
        }
    }

    pub fn point(x: Rational) -> Self {
        DyadicInterval {
            lo: x.clone(),
            hi: x,
        }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn into_bounds(self) -> (Rational, Rational) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn is_subset_of(&self, other: &DyadicInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// True when the interval lies strictly inside the open interval `(a, b)`.
    pub fn strictly_inside(&self, a: &Rational, b: &Rational) -> bool {
        a < &self.lo && &self.hi < b
    }

    pub fn add(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn neg(&self) -> DyadicInterval {
        DyadicInterval {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    pub fn add_scalar(&self, x: &Rational) -> DyadicInterval {
        DyadicInterval {
            lo: &self.lo + x,
            hi: &self.hi + x,
        }
    }

    pub fn scale(&self, k: &Rational) -> DyadicInterval {
        Self::spanning(&self.lo * k, &self.hi * k)
    }

    pub fn mul(&self, other: &DyadicInterval) -> DyadicInterval {
        let c = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = c.iter().min().cloned().unwrap_or_default();
        let hi = c.iter().max().cloned().unwrap_or_default();
        DyadicInterval { lo, hi }
    }

    /// Quotient of two intervals; the divisor must not contain zero.
    pub fn div(&self, other: &DyadicInterval) -> Result<DyadicInterval> {
        if other.contains(&Rational::zero()) {
            return Err(Error::invalid("interval division by an interval containing 0"));
        }
        let inv = Self::spanning(other.hi.recip(), other.lo.recip());
        Ok(self.mul(&inv))
    }

    /// `k`-th power of a non-negative interval.
    pub fn pow_nonneg(&self, k: u32) -> DyadicInterval {
        debug_assert!(!self.lo.is_negative());
        DyadicInterval {
            lo: num_traits::pow(self.lo.clone(), k as usize),
            hi: num_traits::pow(self.hi.clone(), k as usize),
        }
    }

    /// Pointwise maximum: encloses `max(x, y)` for `x ∈ self`, `y ∈ other`.
    pub fn max_with(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: self.lo.clone().max(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Pointwise minimum: encloses `min(x, y)` for `x ∈ self`, `y ∈ other`.
    pub fn min_with(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().min(other.hi.clone()),
        }
    }

    pub fn hull(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Widens both endpoints by `r ≥ 0`.
    pub fn widen(&self, r: &Rational) -> DyadicInterval {
        DyadicInterval {
            lo: &self.lo - r,
            hi: &self.hi + r,
        }
    }

    /// Rounds the endpoints outward to multiples of `2^(−bits)`, keeping
    /// long accumulations cheap.
    pub fn round_out(&self, bits: u32) -> DyadicInterval {
        let scale = BigInt::one() << bits as usize;
        let s = Rational::from_integer(scale.clone());
        let lo = (&self.lo * &s).floor().to_integer();
        let hi = (&self.hi * &s).ceil().to_integer();
        DyadicInterval {
            lo: Rational::new(lo, scale.clone()),
            hi: Rational::new(hi, scale),
        }
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

/// Three-way comparison of enclosures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Less,
    Greater,
    Overlap,
}

/// `Less` iff `a.hi < b.lo`, `Greater` iff `a.lo > b.hi`, otherwise `Overlap`
/// (touching endpoints and equal points overlap).
pub fn compare(a: &DyadicInterval, b: &DyadicInterval) -> Cmp {
    if a.hi < b.lo {
        Cmp::Less
    } else if a.lo > b.hi {
        Cmp::Greater
    } else {
        Cmp::Overlap
    }
}

/// A real number known exactly: either a rational or a continued fraction.
#[derive(Clone, Debug)]
pub enum ExactReal {
    Rational(Rational),
    Cf(Arc<ContinuedFraction>),
}

impl PartialEq for ExactReal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ExactReal::Rational(a), ExactReal::Rational(b)) => a == b,
            (ExactReal::Cf(a), ExactReal::Cf(b)) => Arc::ptr_eq(a, b) || a.source() == b.source(),
            _ => false,
        }
    }
}

impl ExactReal {
    pub fn rational(x: Rational) -> Self {
        ExactReal::Rational(x)
    }

    pub fn cf(cf: ContinuedFraction) -> Self {
        ExactReal::Cf(Arc::new(cf))
    }

    pub fn zero() -> Self {
        ExactReal::Rational(Rational::zero())
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            ExactReal::Rational(r) => Some(r),
            ExactReal::Cf(_) => None,
        }
    }

    pub fn as_cf(&self) -> Option<&Arc<ContinuedFraction>> {
        match self {
            ExactReal::Cf(c) => Some(c),
            ExactReal::Rational(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExactReal::Rational(r) if r.is_zero())
    }

    /// Parses `p/q`, an integer, `cf:[a1,a2,...]`, `golden`, `liouville:b` or
    /// `growth:[a1,...]`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let lead = s.len() - s.trim_start().len();
        if t.starts_with("cf:")
            || t == "golden"
            || t.starts_with("liouville:")
            || t.starts_with("growth:")
        {
            return ContinuedFraction::parse(t)
                .map(ExactReal::cf)
                .map_err(|e| shift_col(e, lead));
        }
        parse_rational(t).map(ExactReal::Rational).map_err(|e| shift_col(e, lead))
    }

    /// Spec string that [`ExactReal::parse`] maps back to the same value.
    pub fn spec(&self) -> String {
        match self {
            ExactReal::Rational(r) => r.to_string(),
            ExactReal::Cf(c) => c.source().spec(),
        }
    }

    pub fn refine(&self, precision: u32) -> Result<DyadicInterval> {
        refine(self, precision)
    }
}

impl fmt::Display for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec())
    }
}

pub(crate) fn shift_col(e: Error, by: usize) -> Error {
    match e {
        Error::Parse { col, msg } => Error::Parse { col: col + by, msg },
        other => other,
    }
}

/// Parses `p/q` or a bare integer. Columns in errors are 1-based offsets into `s`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let (num_s, den_s, den_off) = match s.find('/') {
        Some(i) => (&s[..i], Some(&s[i + 1..]), i + 1),
        None => (s, None, 0),
    };
    let num: BigInt = parse_int(num_s, 0)?;
    let den: BigInt = match den_s {
        Some(d) => parse_int(d, den_off)?,
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(Error::parse(den_off + 1, "zero denominator"));
    }
    Ok(Rational::new(num, den))
}

pub(crate) fn parse_int(s: &str, offset: usize) -> Result<BigInt> {
    if s.is_empty() {
        return Err(Error::parse(offset + 1, "expected an integer"));
    }
    for (i, ch) in s.char_indices() {
        let ok = ch.is_ascii_digit() || (i == 0 && (ch == '-' || ch == '+'));
        if !ok {
            return Err(Error::parse(offset + i + 1, format!("unexpected character '{ch}'")));
        }
    }
    s.parse::<BigInt>()
        .map_err(|_| Error::parse(offset + 1, format!("malformed integer '{s}'")))
}

/// Encloses `x` in an interval of width at most `2^(-precision)`. Rationals
/// give zero-width intervals; continued fractions give the interval between
/// two consecutive convergents, which is nested in `precision`.
pub fn refine(x: &ExactReal, precision: u32) -> Result<DyadicInterval> {
    if precision == 0 {
        return Err(Error::invalid("precision must be at least 1"));
    }
    match x {
        ExactReal::Rational(r) => Ok(DyadicInterval::point(r.clone())),
        ExactReal::Cf(cf) => cf.refine(precision),
    }
}

/// Enclosure of a nearest-integer distance together with the budget flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistEnclosure {
    pub interval: DyadicInterval,
    /// Set when the enclosure straddles a half-integer, so the nearest integer
    /// could not be decided at the available precision.
    pub exhausted: bool,
}

/// Encloses `{⟨y⟩ : y ∈ iv}`.
pub fn interval_dist(iv: &DyadicInterval) -> DistEnclosure {
    let h = half();
    let k = iv.lo.floor();
    let l = &iv.lo - &k;
    let u = &iv.hi - &k;
    let one = Rational::one();
    if &u - &l >= one {
        return DistEnclosure {
            interval: DyadicInterval::new(Rational::zero(), h).expect("ordered"),
            exhausted: true,
        };
    }
    let f = |y: &Rational| {
        let fr = y - y.floor();
        let g = &one - &fr;
        if fr < g {
            fr
        } else {
            g
        }
    };
    let fl = f(&l);
    let fu = f(&u);
    let contains_int = l.is_zero() || (l <= one && one <= u);
    let three_halves = rat(3, 2);
    let contains_half = (l <= h && h <= u) || (l <= three_halves && three_halves <= u);
    let lo = if contains_int {
        Rational::zero()
    } else {
        fl.clone().min(fu.clone())
    };
    let hi = if contains_half { h } else { fl.max(fu) };
    DistEnclosure {
        interval: DyadicInterval { lo, hi },
        exhausted: contains_half && l < u,
    }
}

/// Encloses `⟨x⟩ = min_p |x − p|`. Half-integers give exactly `1/2`.
pub fn nearest_int_dist(x: &ExactReal, budget: u32) -> Result<DistEnclosure> {
    let iv = refine(x, budget)?;
    Ok(interval_dist(&iv))
}

/// Encloses `⟨y⟩ = max_i ⟨y_i⟩` (supremum norm).
pub fn vec_dist(y: &[ExactReal], budget: u32) -> Result<DistEnclosure> {
    if y.is_empty() {
        return Err(Error::invalid("vec_dist needs at least one component"));
    }
    let mut acc: Option<DistEnclosure> = None;
    for c in y {
        let d = nearest_int_dist(c, budget)?;
        acc = Some(match acc {
            None => d,
            Some(a) => DistEnclosure {
                interval: a.interval.max_with(&d.interval),
                exhausted: a.exhausted || d.exhausted,
            },
        });
    }
    Ok(acc.expect("non-empty"))
}

/// Nearest integer to `x`, with exact half-integer ties going to the even one.
pub fn nearest_int_even(x: &Rational) -> BigInt {
    let fl = x.floor();
    let fr = x - &fl;
    let base = fl.to_integer();
    let h = half();
    if fr < h {
        base
    } else if fr > h {
        base + 1
    } else if base.is_even() {
        base
    } else {
        base + 1
    }
}

/// Nearest integer for every point of `iv`, if that integer is unique.
pub fn interval_nearest_int(iv: &DyadicInterval) -> Option<BigInt> {
    let a = nearest_int_even(&iv.lo);
    let b = nearest_int_even(&iv.hi);
    if a != b {
        return None;
    }
    let h = half();
    let a_r = Rational::from_integer(a.clone());
    // Both endpoints round to `a`; reject if a half-integer tie lies inside.
    if (&iv.lo - &a_r).abs() == h && iv.lo != iv.hi {
        return None;
    }
    if (&iv.hi - &a_r).abs() == h && iv.lo != iv.hi {
        return None;
    }
    Some(a)
}

/// Certified bracket of `log2(n)` for `n ≥ 1`, from bit lengths of a power of
/// `n`: `⌊log2 n^r⌋ / r ≤ log2 n ≤ ⌈log2 n^r⌉ / r` with `r` chosen so that the
/// width is about `2^(-rel_bits)` relative to `log2 n`.
pub fn log2_bracket(n: &BigInt, rel_bits: u32) -> (Rational, Rational) {
    assert!(n.is_positive(), "log2_bracket needs a positive integer");
    if n.is_one() {
        return (Rational::zero(), Rational::zero());
    }
    let bits = n.bits();
    if n.trailing_zeros() == Some(bits - 1) {
        let e = rat_int(BigInt::from(bits - 1));
        return (e.clone(), e);
    }
    let target = 1u64 << rel_bits;
    let mut r: u64 = 1;
    while bits * r < target {
        r *= 2;
    }
    let pw = num_traits::pow(n.clone(), r as usize);
    let b = pw.bits();
    let den = BigInt::from(r);
    (
        Rational::new(BigInt::from(b - 1), den.clone()),
        Rational::new(BigInt::from(b), den),
    )
}

/// Certified bracket of `log2(x)` for a positive rational.
pub fn log2_bracket_rational(x: &Rational, rel_bits: u32) -> (Rational, Rational) {
    assert!(x.is_positive(), "log2 of a non-positive rational");
    let (nl, nh) = log2_bracket(x.numer(), rel_bits);
    let (dl, dh) = log2_bracket(x.denom(), rel_bits);
    (nl - dh, nh - dl)
}

/// Interval form of [`log2_bracket_rational`] applied to an enclosure.
pub fn log2_interval(iv: &DyadicInterval, rel_bits: u32) -> Result<DyadicInterval> {
    if !iv.lo.is_positive() {
        return Err(Error::PrecisionExhausted(
            "log2 of an enclosure that reaches 0".into(),
        ));
    }
    let (a, _) = log2_bracket_rational(&iv.lo, rel_bits);
    let (_, b) = log2_bracket_rational(&iv.hi, rel_bits);
    DyadicInterval::new(a, b)
}

/// Encloses `x^e` for rational `x ≥ 0` and rational `e`, using integer `v`-th
/// roots at `bits` bits after the binary point. Exact when the root is exact.
pub fn pow_enclosure(x: &Rational, e: &Rational, bits: u32) -> Result<DyadicInterval> {
    if x.is_negative() {
        return Err(Error::invalid("pow_enclosure of a negative base"));
    }
    if e.is_zero() {
        return Ok(DyadicInterval::point(Rational::one()));
    }
    if x.is_zero() {
        if e.is_negative() {
            return Err(Error::invalid("0 raised to a negative power"));
        }
        return Ok(DyadicInterval::zero());
    }
    let u = e.numer().clone();
    let v = e.denom().clone();
    let u_abs: usize = usize::try_from(u.magnitude().clone())
        .map_err(|_| Error::invalid("exponent numerator too large"))?;
    let mut y = num_traits::pow(x.clone(), u_abs);
    if u.sign() == Sign::Minus {
        y = y.recip();
    }
    if v.is_one() {
        return Ok(DyadicInterval::point(y));
    }
    let v_u32: u32 = u32::try_from(v).map_err(|_| Error::invalid("exponent denominator too large"))?;
    let nn = y.numer().clone();
    let dd = y.denom().clone();
    let scale = BigInt::one() << (bits as usize * v_u32 as usize);
    let big = nn * num_traits::pow(dd.clone(), v_u32 as usize - 1) * scale;
    let r = big.nth_root(v_u32);
    let exact = num_traits::pow(r.clone(), v_u32 as usize) == big;
    let den = dd * (BigInt::one() << bits as usize);
    let lo = Rational::new(r.clone(), den.clone());
    let hi = if exact { lo.clone() } else { Rational::new(r + 1, den) };
    DyadicInterval::new(lo, hi)
}

/// Encloses `2·atanh(y) = ln((1+y)/(1−y))` for rational `0 ≤ y ≤ 1/3`.
fn two_atanh(y: &Rational, bits: u32) -> DyadicInterval {
    let y2 = y * y;
    let mut pow = y.clone();
    let mut acc = Rational::zero();
    let tol = two_pow_neg(bits + 4);
    let mut j: u64 = 0;
    loop {
        acc += &pow / Rational::from_integer(BigInt::from(2 * j + 1));
        pow *= &y2;
        j += 1;
        if pow <= tol {
            break;
        }
    }
    // Remainder ≤ y^(2j+1) / ((2j+1)(1 − y²)) ≤ y^(2j+1)·(9/8)/(2j+1).
    let rem = &pow * rat(9, 8) / Rational::from_integer(BigInt::from(2 * j + 1));
    DyadicInterval {
        lo: &acc * BigInt::from(2),
        hi: (acc + rem) * BigInt::from(2),
    }
    .round_out(bits + 2)
}

/// Encloses `ln x` for rational `x > 0`, with absolute width about
/// `2^(−bits)` (plus a term proportional to `log₂ x`).
pub fn ln_enclosure(x: &Rational, bits: u32) -> Result<DyadicInterval> {
    if !x.is_positive() {
        return Err(Error::invalid("logarithm of a non-positive number"));
    }
    let mut k: i64 = x.numer().bits() as i64 - x.denom().bits() as i64;
    let two = Rational::from_integer(BigInt::from(2));
    let scale_by = |k: i64| -> Rational {
        if k >= 0 {
            x / Rational::from_integer(BigInt::one() << k as usize)
        } else {
            x * Rational::from_integer(BigInt::one() << (-k) as usize)
        }
    };
    let mut z = scale_by(k);
    while z >= two {
        k += 1;
        z = scale_by(k);
    }
    while z < Rational::one() {
        k -= 1;
        z = scale_by(k);
    }
    let extra = 64 - (k.unsigned_abs().max(1)).leading_zeros();
    let ln2 = two_atanh(&rat(1, 3), bits + extra);
    let y = (&z - Rational::one()) / (&z + Rational::one());
    let lz = two_atanh(&y, bits + 2);
    Ok(ln2.scale(&Rational::from_integer(BigInt::from(k))).add(&lz))
}

/// Decimal rendering for human-readable output only.
pub fn decimal(x: &Rational, digits: usize) -> String {
    let neg = x.is_negative();
    let a = x.abs();
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (a * Rational::from_integer(scale.clone())).round().to_integer();
    let (ip, fp) = scaled.div_rem(&scale);
    let mut s = String::new();
    if neg && !(ip.is_zero() && fp.is_zero()) {
        s.push('-');
    }
    s.push_str(&ip.to_string());
    if digits > 0 {
        let f = fp.to_string();
        s.push('.');
        for _ in f.len()..digits {
            s.push('0');
        }
        s.push_str(&f);
    }
    s
}
