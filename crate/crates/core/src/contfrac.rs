//! Continued fractions `[0; a_1, a_2, ...]` given by a quotient source, their
//! convergent tables, the two-sided estimate of `⟨q_k α⟩`, the best
//! approximation property, and window estimates of the irrationality exponent.
//!
//! Indices follow `p_{-1} = 1, q_{-1} = 0, p_0 = 0, q_0 = 1` and
//! `p_k = a_k p_{k-1} + p_{k-2}`, `q_k = a_k q_{k-1} + q_{k-2}`.

use std::fmt::Write as _;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{
    interval_dist, log2_bracket, parse_int, DyadicInterval, Rational, LOG_BITS,
};

/// Default cap on convergent denominators, in bits.
pub const DEFAULT_CAP_BITS: u64 = 4096;

/// Where the partial quotients come from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum QuotientSource {
    /// The listed quotients repeated forever; `[1]` is the golden ratio.
    Periodic(Vec<BigInt>),
    /// The listed quotients, then `a_{k+1} = q_k`.
    Growth(Vec<BigInt>),
    /// `Σ_{k≥1} b^(-k!)`.
    Liouville(BigInt),
}

impl QuotientSource {
    pub fn spec(&self) -> String {
        let list = |v: &[BigInt]| {
            v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
        };
        match self {
            QuotientSource::Periodic(v) if v.len() == 1 && v[0].is_one() => "golden".to_string(),
            QuotientSource::Periodic(v) => format!("cf:[{}]", list(v)),
            QuotientSource::Growth(v) => format!("growth:[{}]", list(v)),
            QuotientSource::Liouville(b) => format!("liouville:{b}"),
        }
    }
}

#[derive(Debug, Default)]
struct Cache {
    /// `a[0] = 0`, then `a_1, a_2, ...`.
    a: Vec<BigInt>,
    p: Vec<BigInt>,
    q: Vec<BigInt>,
    /// Truncation level reached by the Liouville generator.
    level: u32,
    /// Quotients `[0, a_1, ...]` certified by the Liouville generator.
    certified: Vec<BigInt>,
}

/// An irrational number in `(0, 1)` given by its partial quotients. The cache
/// of generated quotients only ever grows.
#[derive(Debug)]
pub struct ContinuedFraction {
    source: QuotientSource,
    cap_bits: u64,
    cache: RwLock<Cache>,
}

impl Clone for ContinuedFraction {
    fn clone(&self) -> Self {
        ContinuedFraction::with_cap(self.source.clone(), self.cap_bits)
    }
}

/// One row of a convergent table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvergentRow {
    pub k: usize,
    pub a: BigInt,
    pub p: BigInt,
    pub q: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvergentTable {
    pub rows: Vec<ConvergentRow>,
}

impl ConvergentTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,a_k,p_k,q_k\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.k, r.a, r.p, r.q);
        }
        s
    }
}

/// Window statistics of `log q_{k+1} / log q_k`, each as a certified bracket.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentEstimate {
    pub window_limsup: DyadicInterval,
    pub window_liminf: DyadicInterval,
    pub k_first: usize,
    pub k_last: usize,
    pub horizon: usize,
}

impl ContinuedFraction {
    pub fn new(source: QuotientSource) -> Self {
        Self::with_cap(source, DEFAULT_CAP_BITS)
    }

    pub fn with_cap(source: QuotientSource, cap_bits: u64) -> Self {
        ContinuedFraction {
            source,
            cap_bits,
            cache: RwLock::new(Cache::default()),
        }
    }

    pub fn golden() -> Self {
        Self::new(QuotientSource::Periodic(vec![BigInt::one()]))
    }

    pub fn periodic(quotients: &[u64]) -> Result<Self> {
        let v: Vec<BigInt> = quotients.iter().map(|&a| BigInt::from(a)).collect();
        check_quotients(&v, 0)?;
        Ok(Self::new(QuotientSource::Periodic(v)))
    }

    pub fn growth(start: &[u64]) -> Result<Self> {
        let v: Vec<BigInt> = start.iter().map(|&a| BigInt::from(a)).collect();
        check_quotients(&v, 0)?;
        Ok(Self::new(QuotientSource::Growth(v)))
    }

    pub fn liouville(base: u64) -> Result<Self> {
        if base < 2 {
            return Err(Error::invalid("Liouville base must be at least 2"));
        }
        Ok(Self::new(QuotientSource::Liouville(BigInt::from(base))))
    }

    pub fn source(&self) -> &QuotientSource {
        &self.source
    }

    pub fn cap_bits(&self) -> u64 {
        self.cap_bits
    }

    /// Parses `golden`, `cf:[a1,...]` (optionally ending in `...`),
    /// `growth:[a1,...]` and `liouville:b`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "golden" {
            return Ok(Self::golden());
        }
        if let Some(rest) = s.strip_prefix("liouville:") {
            let b = parse_int(rest, "liouville:".len())?;
            if b < BigInt::from(2) {
                return Err(Error::parse("liouville:".len() + 1, "base must be at least 2"));
            }
            return Ok(Self::new(QuotientSource::Liouville(b)));
        }
        if let Some(rest) = s.strip_prefix("cf:") {
            let v = parse_list(rest, 3)?;
            return Ok(Self::new(QuotientSource::Periodic(v)));
        }
        if let Some(rest) = s.strip_prefix("growth:") {
            let v = parse_list(rest, 7)?;
            return Ok(Self::new(QuotientSource::Growth(v)));
        }
        Err(Error::parse(1, format!("unknown continued-fraction literal '{s}'")))
    }

    /// Upper bound on every partial quotient, when the source has one.
    pub fn quotient_bound(&self) -> Option<BigInt> {
        match &self.source {
            QuotientSource::Periodic(v) => v.iter().max().cloned(),
            _ => None,
        }
    }

    /// Makes sure `a_1..a_k`, `p_0..p_k`, `q_0..q_k` are cached.
    pub fn ensure(&self, k: usize) -> Result<()> {
        {
            let c = self.cache.read().expect("cache lock");
            if c.q.len() > k {
                return Ok(());
            }
        }
        let mut c = self.cache.write().expect("cache lock");
        if c.a.is_empty() {
            c.a.push(BigInt::zero());
            c.p.push(BigInt::zero());
            c.q.push(BigInt::one());
        }
        while c.q.len() <= k {
            let j = c.q.len();
            let a = self.next_quotient(&mut c, j)?;
            let (p1, q1) = (c.p[j - 1].clone(), c.q[j - 1].clone());
            let (p2, q2) = if j >= 2 {
                (c.p[j - 2].clone(), c.q[j - 2].clone())
            } else {
                (BigInt::one(), BigInt::zero())
            };
            let q = &a * &q1 + q2;
            if q.bits() > self.cap_bits {
                return Err(Error::GenerationOverflow(format!(
                    "q_{j} of {} exceeds 2^{}",
                    self.source.spec(),
                    self.cap_bits
                )));
            }
            let p = &a * &p1 + p2;
            c.a.push(a);
            c.p.push(p);
            c.q.push(q);
        }
        Ok(())
    }

    fn next_quotient(&self, c: &mut Cache, j: usize) -> Result<BigInt> {
        match &self.source {
            QuotientSource::Periodic(v) => Ok(v[(j - 1) % v.len()].clone()),
            QuotientSource::Growth(v) => {
                if j <= v.len() {
                    Ok(v[j - 1].clone())
                } else {
                    Ok(c.q[j - 1].clone())
                }
            }
            QuotientSource::Liouville(b) => {
                while c.certified.len() <= j {
                    let level = c.level + 1;
                    let prefix = self.liouville_prefix(b, level)?;
                    c.level = level;
                    if prefix.len() > c.certified.len() {
                        c.certified = prefix;
                    }
                }
                Ok(c.certified[j].clone())
            }
        }
    }

    /// Quotients `[0, a_1, ..., a_r]` shared by every number between the
    /// level-`level` truncation `L` and `L + 2 b^(-(level+1)!)`, which
    /// bracket the Liouville number.
    fn liouville_prefix(&self, b: &BigInt, level: u32) -> Result<Vec<BigInt>> {
        let mut fact: u64 = 1;
        for i in 2..=u64::from(level) + 1 {
            fact = fact.checked_mul(i).ok_or_else(|| self.overflow())?;
        }
        let exp_bits = (b.bits() as f64) * fact as f64;
        if exp_bits > (16 * self.cap_bits + 64) as f64 {
            return Err(self.overflow());
        }
        let mut lo = Rational::zero();
        let mut f: u64 = 1;
        for k in 1..=u64::from(level) {
            f *= k;
            lo += Rational::new(BigInt::one(), num_traits::pow(b.clone(), f as usize));
        }
        let hi = &lo
            + Rational::new(BigInt::from(2), num_traits::pow(b.clone(), fact as usize));
        let ea = rational_cf(&lo);
        let eb = rational_cf(&hi);
        let mut out = Vec::new();
        for (x, y) in ea[..ea.len() - 1].iter().zip(eb[..eb.len() - 1].iter()) {
            if x != y {
                break;
            }
            out.push(x.clone());
        }
        Ok(out)
    }

    fn overflow(&self) -> Error {
        Error::GenerationOverflow(format!(
            "{} needs quotients beyond the 2^{} cap",
            self.source.spec(),
            self.cap_bits
        ))
    }

    pub fn quotient(&self, k: usize) -> Result<BigInt> {
        self.ensure(k)?;
        Ok(self.cache.read().expect("cache lock").a[k].clone())
    }

    /// `(p_k, q_k)`.
    pub fn convergent(&self, k: usize) -> Result<(BigInt, BigInt)> {
        self.ensure(k)?;
        let c = self.cache.read().expect("cache lock");
        Ok((c.p[k].clone(), c.q[k].clone()))
    }

    pub fn q(&self, k: usize) -> Result<BigInt> {
        Ok(self.convergent(k)?.1)
    }

    /// Interval between consecutive convergents `p_k/q_k` and
    /// `p_{k+1}/q_{k+1}` with the smallest `k` for which its width
    /// `1/(q_k q_{k+1})` is at most `2^(-precision)`.
    pub fn refine(&self, precision: u32) -> Result<DyadicInterval> {
        let mut k = 0usize;
        loop {
            let (p0, q0) = self.convergent(k)?;
            let (p1, q1) = self.convergent(k + 1)?;
            if (&q0 * &q1).bits() > u64::from(precision) {
                return Ok(DyadicInterval::spanning(
                    Rational::new(p0, q0),
                    Rational::new(p1, q1),
                ));
            }
            k += 1;
        }
    }

    /// Convergent rows for `k = 0..=K`.
    pub fn convergents(&self, k_max: usize) -> Result<ConvergentTable> {
        self.ensure(k_max)?;
        let c = self.cache.read().expect("cache lock");
        let rows = (0..=k_max)
            .map(|k| ConvergentRow {
                k,
                a: c.a[k].clone(),
                p: c.p[k].clone(),
                q: c.q[k].clone(),
            })
            .collect();
        Ok(ConvergentTable { rows })
    }

    /// Exact enclosure of `⟨q_k α⟩ = |q_k α − p_k|`. The number lies between the
    /// convergents of index `k+3` and `k+4`, and `x ↦ |q_k x − p_k|` is
    /// monotone there, so the values at those convergents bracket it strictly
    /// inside `(1/(q_{k+1}+q_k), 1/q_{k+1})`.
    pub fn qk_dist(&self, k: usize) -> Result<DyadicInterval> {
        let (pk, qk) = self.convergent(k)?;
        let at = |j: usize| -> Result<Rational> {
            let (pj, qj) = self.convergent(j)?;
            Ok(Rational::new((&qk * &pj - &pk * &qj).abs(), qj))
        };
        Ok(DyadicInterval::spanning(at(k + 3)?, at(k + 4)?))
    }

    /// Checks `⟨q_k α⟩ ≤ ⟨n α⟩` for every `1 ≤ n ≤ N`, where `N < q_{k+1}`.
    pub fn best_approx_check(&self, k: usize, n_max: &BigInt) -> Result<bool> {
        let qk1 = self.q(k + 1)?;
        if n_max >= &qk1 {
            return Err(Error::invalid(format!("N = {n_max} must be below q_(k+1) = {qk1}")));
        }
        let qk = self.q(k)?;
        let dk = self.qk_dist(k)?;
        let mut n = BigInt::one();
        while &n <= n_max {
            if n != qk && !self.dist_at_least(&n, &dk)? {
                return Ok(false);
            }
            n += 1;
        }
        Ok(true)
    }

    /// Decides `⟨n α⟩ ≥ x` for every `x` in `d`, by refinement.
    fn dist_at_least(&self, n: &BigInt, d: &DyadicInterval) -> Result<bool> {
        let n_r = Rational::from_integer(n.clone());
        let mut prec = 64 + n.bits() as u32;
        while prec <= 1 << 14 {
            let iv = self.refine(prec)?.scale(&n_r);
            let dn = interval_dist(&iv).interval;
            if d.hi() <= dn.lo() {
                return Ok(true);
            }
            if dn.hi() < d.lo() {
                return Ok(false);
            }
            prec *= 2;
        }
        Err(Error::PrecisionExhausted(format!(
            "cannot compare ⟨{n}α⟩ with the convergent distance"
        )))
    }

    /// A copy that shares nothing but reuses the cached prefix.
    pub fn clone_shared(&self) -> ContinuedFraction {
        let c = self.cache.read().expect("cache lock");
        ContinuedFraction {
            source: self.source.clone(),
            cap_bits: self.cap_bits,
            cache: RwLock::new(Cache {
                a: c.a.clone(),
                p: c.p.clone(),
                q: c.q.clone(),
                level: c.level,
                certified: c.certified.clone(),
            }),
        }
    }

    /// Window statistics of `log q_{k+1}/log q_k` over
    /// `max(2, ⌊K/2⌋+1) ≤ k ≤ K−1`, with logarithms bracketed through bit
    /// lengths. The early part of the table is left out because short
    /// denominators carry no information about the limit.
    pub fn irrationality_exponent_estimate(&self, horizon: usize) -> Result<ExponentEstimate> {
        if horizon < 3 {
            return Err(Error::invalid("horizon K must be at least 3"));
        }
        self.ensure(horizon)?;
        let k_first = (horizon / 2 + 1).max(2);
        let k_last = horizon - 1;
        let logs: Vec<(Rational, Rational)> = (k_first..=horizon)
            .map(|k| self.q(k).map(|q| log2_bracket(&q, LOG_BITS)))
            .collect::<Result<_>>()?;
        let mut sup: Option<DyadicInterval> = None;
        let mut inf: Option<DyadicInterval> = None;
        for i in 0..logs.len() - 1 {
            let (a_lo, a_hi) = &logs[i];
            let (b_lo, b_hi) = &logs[i + 1];
            let r = DyadicInterval::new(b_lo / a_hi, b_hi / a_lo)?;
            sup = Some(match sup {
                None => r.clone(),
                Some(s) => s.max_with(&r),
            });
            inf = Some(match inf {
                None => r,
                Some(s) => s.min_with(&r),
            });
        }
        Ok(ExponentEstimate {
            window_limsup: sup.expect("non-empty window"),
            window_liminf: inf.expect("non-empty window"),
            k_first,
            k_last,
            horizon,
        })
    }
}

fn check_quotients(v: &[BigInt], offset: usize) -> Result<()> {
    if v.is_empty() {
        return Err(Error::parse(offset + 1, "empty quotient list"));
    }
    if v.iter().any(|a| !a.is_positive()) {
        return Err(Error::parse(offset + 1, "partial quotients must be at least 1"));
    }
    Ok(())
}

fn parse_list(s: &str, offset: usize) -> Result<Vec<BigInt>> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::parse(offset + 1, "expected [a1,a2,...]"))?;
    let mut out = Vec::new();
    let mut pos = offset + 1;
    let items: Vec<&str> = inner.split(',').collect();
    for (i, item) in items.iter().enumerate() {
        let t = item.trim();
        let lead = item.len() - item.trim_start().len();
        if t == "..." && i + 1 == items.len() && i > 0 {
            break;
        }
        if t.is_empty() && items.len() == 1 {
            break;
        }
        let a = parse_int(t, pos + lead)?;
        if !a.is_positive() {
            return Err(Error::parse(pos + lead + 1, "partial quotients must be at least 1"));
        }
        out.push(a);
        pos += item.len() + 1;
    }
    check_quotients(&out, offset)?;
    Ok(out)
}

/// Full expansion `[c_0; c_1, ..., c_s]` of a non-negative rational.
pub fn rational_cf(x: &Rational) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut n = x.numer().clone();
    let mut d = x.denom().clone();
    while !d.is_zero() {
        let (a, r) = n.div_mod_floor(&d);
        out.push(a);
        n = d;
        d = r;
    }
    out
}

/// Display-only float of a bracket midpoint.
pub fn approx_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
