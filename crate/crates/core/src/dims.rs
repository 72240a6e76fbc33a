//! Dimension formulas in closed form, window evaluations of the liminf
//! expressions for the rotation targets `𝒰_τ[α]`, and the exponent tests
//! that decide convergence of the measure series for power laws.
//!
//! Logarithms of convergent denominators are bracketed through bit lengths,
//! so every window quantity is reported as a certified `(lo, hi)` pair.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::contfrac::ContinuedFraction;
use crate::error::{Error, Result};
use crate::exactnum::{interval_dist, log2_bracket, DyadicInterval, Rational, LOG_BITS};
use crate::funcspace::ApproxFunction;

/// Exact value or certified bracket.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DimValue {
    Exact(Rational),
    Bracket(Rational, Rational),
}

impl DimValue {
    pub fn bounds(&self) -> (Rational, Rational) {
        match self {
            DimValue::Exact(x) => (x.clone(), x.clone()),
            DimValue::Bracket(lo, hi) => (lo.clone(), hi.clone()),
        }
    }

    fn from_interval(iv: &DyadicInterval) -> Self {
        if iv.is_point() {
            DimValue::Exact(iv.lo().clone())
        } else {
            DimValue::Bracket(iv.lo().clone(), iv.hi().clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionReport {
    pub formula_id: &'static str,
    pub value: DimValue,
    /// Hypotheses checked on the window, with their outcome.
    pub hypotheses: Vec<(String, bool)>,
    pub warnings: Vec<String>,
}

impl DimensionReport {
    fn exact(formula_id: &'static str, v: Rational) -> Self {
        DimensionReport { formula_id, value: DimValue::Exact(v), hypotheses: Vec::new(), warnings: Vec::new() }
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.iter().all(|(_, ok)| *ok)
    }
}

fn r(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("m and n must be positive"));
    }
    Ok(())
}

/// `mn(1 − 1/(m+n))`, the dimension of the singular `m×n` matrices and of
/// the homogeneous set of the main theorem.
pub fn dim_sing_homog(m: usize, n: usize) -> Result<Rational> {
    check_dims(m, n)?;
    if m * n == 1 {
        return Err(Error::invalid("m = n = 1: the singular set is [0,1)∩Q, no dimension formula"));
    }
    let (mr, nr) = (r(m as i64), r(n as i64));
    Ok(&mr * &nr * (Rational::one() - Rational::one() / (&mr + &nr)))
}

/// `m(n−1) + m((m−n)/(m+n))²`, the lower bound for the inhomogeneous set at
/// a fixed target when `m > n`.
pub fn dim_omega_gamma_lower(m: usize, n: usize) -> Result<Rational> {
    check_dims(m, n)?;
    if m <= n {
        return Err(Error::invalid("the lower bound needs m > n"));
    }
    let (mr, nr) = (r(m as i64), r(n as i64));
    let ratio = (&mr - &nr) / (&mr + &nr);
    Ok(&mr * (&nr - Rational::one()) + &mr * &ratio * &ratio)
}

/// `m(n−1) + m((m−nκ)/(m+nκ))²` for `0 ≤ κ < m/n`.
pub fn dim_sing_inhomog_lower(m: usize, n: usize, kappa: &Rational) -> Result<Rational> {
    check_dims(m, n)?;
    let (mr, nr) = (r(m as i64), r(n as i64));
    if kappa.is_negative() || kappa * &nr >= mr {
        return Err(Error::invalid(format!("kappa = {kappa} outside [0, m/n)")));
    }
    let nk = &nr * kappa;
    let ratio = (&mr - &nk) / (&mr + &nk);
    Ok(&mr * (&nr - Rational::one()) + &mr * &ratio * &ratio)
}

/// `(2/(w+1), 1/(w+1))`: the upper bound for the one-dimensional set at
/// irrationality exponent `w`, and its value under super-exponential growth.
/// `None` stands for `w = +∞`.
pub fn dim_omega_alpha_bounds(w: Option<&Rational>) -> Result<(Rational, Rational)> {
    match w {
        None => Ok((Rational::zero(), Rational::zero())),
        Some(w) if w < &Rational::one() => Err(Error::invalid("irrationality exponent is at least 1")),
        Some(w) => {
            let d = w + Rational::one();
            Ok((r(2) / &d, Rational::one() / d))
        }
    }
}

/// Which membership inequality selects the subsequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionRule {
    /// `n⟨nα⟩^τ < 1`, for `τ < 1`.
    Below,
    /// `n^τ⟨nα⟩ < 2`, for `τ > 1`.
    Above,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsequenceSelection {
    pub rule: SelectionRule,
    pub tau: Rational,
    /// Convergent indices `k` (`1 ≤ k ≤ K`) whose `q_k` is selected.
    pub indices: Vec<usize>,
    /// Convergent indices examined and rejected.
    pub rejected: Vec<usize>,
}

/// Decides `x^a ≤ y^b` for positive integers, exactly when the powers are
/// small and through logarithm brackets otherwise.
fn pow_le(x: &BigInt, a: u64, y: &BigInt, b: u64) -> Option<bool> {
    if x.bits() * a + y.bits() * b <= 1 << 16 {
        return Some(num_traits::pow(x.clone(), a as usize) <= num_traits::pow(y.clone(), b as usize));
    }
    let (xl, xh) = log2_bracket(x, LOG_BITS);
    let (yl, yh) = log2_bracket(y, LOG_BITS);
    let (ar, br) = (Rational::from_integer(a.into()), Rational::from_integer(b.into()));
    if &ar * xh <= &br * yl {
        Some(true)
    } else if &ar * xl > &br * yh {
        Some(false)
    } else {
        None
    }
}

fn tau_parts(tau: &Rational) -> Result<(u64, u64)> {
    match (tau.numer().to_u64(), tau.denom().to_u64()) {
        (Some(a), Some(b)) if a > 0 => Ok((a, b)),
        _ => Err(Error::invalid(format!("tau = {tau} must be a positive rational with 64-bit parts"))),
    }
}

/// Membership of `q_k` under `rule`, or `None` when undecided. The
/// sandwich `1/(q_{k+1}+q_k) < ⟨q_kα⟩ < 1/q_{k+1}` is tried first, then
/// enclosures of `α` at increasing precision.
fn member(cf: &ContinuedFraction, k: usize, rule: SelectionRule, tau: &Rational) -> Result<Option<bool>> {
    let (a, b) = tau_parts(tau)?;
    let qk = cf.q(k)?;
    let qk1 = cf.q(k + 1)?;
    let sum = &qk1 + &qk;
    // With d < U and d > L for ⟨q_kα⟩ = d:
    // Below: q·d^τ < 1 ⇔ q^b·d^a < 1; certified by q^b ≤ U^(−a), refuted by q^b ≥ L^(−a).
    // Above: q^τ·d < 2 ⇔ q^a·d^b < 2^b; certified by q^a ≤ (2/U)^b, refuted by q^a ≥ (2/L)^b.
    let (yes, no) = match rule {
        SelectionRule::Below => (pow_le(&qk, b, &qk1, a), pow_le(&sum, a, &qk, b)),
        SelectionRule::Above => (pow_le(&qk, a, &(&qk1 * 2), b), pow_le(&(&sum * 2), b, &qk, a)),
    };
    if yes == Some(true) {
        return Ok(Some(true));
    }
    if no == Some(true) {
        return Ok(Some(false));
    }
    let qr = Rational::from_integer(qk.clone());
    let (aa, bb) = (a as i32, b as i32);
    let lhs = |dv: &Rational| -> Rational {
        match rule {
            SelectionRule::Below => qr.pow(bb) * dv.pow(aa),
            SelectionRule::Above => qr.pow(aa) * dv.pow(bb),
        }
    };
    let bound = match rule {
        SelectionRule::Below => Rational::one(),
        SelectionRule::Above => Rational::from_integer(BigInt::from(2)).pow(bb),
    };
    let mut prec = 64 + 2 * qk1.bits() as u32;
    while prec <= 1 << 14 {
        let iv = match cf.refine(prec) {
            Ok(iv) => iv.scale(&qr),
            Err(Error::GenerationOverflow(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let d = interval_dist(&iv).interval;
        if lhs(d.hi()) < bound {
            return Ok(Some(true));
        }
        if lhs(d.lo()) >= bound {
            return Ok(Some(false));
        }
        prec *= 2;
    }
    Ok(None)
}

/// The maximal subsequence of `q_1, …, q_K` meeting the membership rule of
/// the side of `1` that `τ` lies on.
pub fn select_subsequence(cf: &ContinuedFraction, tau: &Rational, k_max: usize) -> Result<SubsequenceSelection> {
    let rule = if tau < &Rational::one() {
        SelectionRule::Below
    } else if tau > &Rational::one() {
        SelectionRule::Above
    } else {
        return Err(Error::invalid("tau = 1 has no selection rule"));
    };
    tau_parts(tau)?;
    let mut indices = Vec::new();
    let mut rejected = Vec::new();
    let mut undecided = Vec::new();
    for k in 1..=k_max {
        match member(cf, k, rule, tau)? {
            Some(true) => indices.push(k),
            Some(false) => rejected.push(k),
            None => undecided.push(k),
        }
    }
    if !undecided.is_empty() {
        return Err(Error::UndecidedMembership(undecided));
    }
    Ok(SubsequenceSelection { rule, tau: tau.clone(), indices, rejected })
}

fn log2_iv(x: &BigInt) -> DyadicInterval {
    let (lo, hi) = log2_bracket(x, LOG_BITS);
    DyadicInterval::spanning(lo, hi)
}

/// Bracket of `log2 ⟨q_kα⟩` from the sandwich, `(−log2(q_{k+1}+q_k), −log2 q_{k+1})`.
fn log2_dist(cf: &ContinuedFraction, k: usize) -> Result<DyadicInterval> {
    let qk1 = cf.q(k + 1)?;
    let sum = &qk1 + cf.q(k)?;
    let (lo, _) = log2_bracket(&sum, LOG_BITS);
    let (_, hi) = log2_bracket(&qk1, LOG_BITS);
    Ok(DyadicInterval::spanning(-lo, -hi))
}

fn window_start(len: usize) -> usize {
    (len / 2).max(1)
}

fn quotient_iv(num: &DyadicInterval, den: &DyadicInterval) -> Result<DyadicInterval> {
    if !den.lo().is_positive() {
        return Err(Error::PrecisionExhausted("denominator bracket reaches 0".into()));
    }
    num.div(den)
}

/// `((w/τ−1)/(w²−1), (1/τ+1)/(w+1))` for `τ ≤ 1` and `(0, (w/τ−1)/(w²−1))`
/// for `τ > 1`, at an exact `w > 1`.
pub fn u_tau_bounds(w: &Rational, tau: &Rational) -> Result<(Rational, Rational)> {
    if w <= &Rational::one() {
        return Err(Error::invalid("the bounds need w > 1"));
    }
    let one = Rational::one();
    let mid = (w / tau - &one) / (w * w - &one);
    if tau <= &one {
        Ok((mid, (one.clone() / tau + &one) / (w + &one)))
    } else {
        Ok((Rational::zero(), mid))
    }
}

/// The liminf expression of the `𝒰_τ[α]` dimension over the upper half of
/// the selected subsequence, cross-checked against the bounds at the window
/// estimate of `w`.
pub fn dim_u_tau_estimate(cf: &ContinuedFraction, tau: &Rational, k_max: usize) -> Result<DimensionReport> {
    if !tau.is_positive() {
        return Err(Error::invalid("tau must be positive"));
    }
    let w = cf.irrationality_exponent_estimate(k_max)?.window_limsup;
    let one = Rational::one();
    if tau > w.hi() {
        let mut rep = DimensionReport::exact("u_tau:above_w", Rational::zero());
        rep.hypotheses.push((format!("tau > w (window w <= {})", w.hi()), true));
        return Ok(rep);
    }
    if &(tau * w.hi()) < &one {
        let mut rep = DimensionReport::exact("u_tau:below_inverse_w", one);
        rep.hypotheses.push((format!("tau < 1/w (window w <= {})", w.hi()), true));
        return Ok(rep);
    }
    if tau == &one || tau >= w.lo() || &(tau * w.lo()) <= &one {
        return Err(Error::invalid(format!(
            "tau = {tau} is not separated from 1, 1/w or w on the window (w in [{}, {}])",
            w.lo(),
            w.hi()
        )));
    }
    let sel = select_subsequence(cf, tau, k_max)?;
    if sel.indices.len() < 2 {
        return Err(Error::invalid("fewer than two selected denominators on the window"));
    }
    let inv_tau = one.clone() / tau;
    let logs_n: Vec<DyadicInterval> = sel.indices.iter().map(|&k| cf.q(k).map(|q| log2_iv(&q))).collect::<Result<_>>()?;
    let logs_d: Vec<DyadicInterval> = sel.indices.iter().map(|&k| log2_dist(cf, k)).collect::<Result<_>>()?;
    let mut prefix = DyadicInterval::zero();
    let mut best: Option<DyadicInterval> = None;
    for i in 0..sel.indices.len() {
        if i >= window_start(sel.indices.len()) {
            let den = logs_n[i].sub(&logs_d[i]);
            let num = match sel.rule {
                SelectionRule::Below => logs_n[i].scale(&(&one + &inv_tau)).add(&prefix),
                SelectionRule::Above => prefix.neg(),
            };
            let e = quotient_iv(&num, &den)?;
            best = Some(match best {
                None => e,
                Some(b) => b.min_with(&e),
            });
        }
        let term = match sel.rule {
            SelectionRule::Below => logs_n[i].scale(&inv_tau).add(&logs_d[i]),
            SelectionRule::Above => logs_n[i].add(&logs_d[i].scale(&inv_tau)),
        };
        prefix = prefix.add(&term);
    }
    let est = best.expect("window is non-empty");
    let (b_lo_a, b_hi_a) = u_tau_bounds(w.lo(), tau)?;
    let (b_lo_b, b_hi_b) = u_tau_bounds(w.hi(), tau)?;
    let lower = b_lo_a.min(b_lo_b);
    let upper = b_hi_a.max(b_hi_b);
    let within = est.hi() >= &lower && est.lo() <= &upper;
    let mut rep = DimensionReport {
        formula_id: match sel.rule {
            SelectionRule::Below => "u_tau:below_one",
            SelectionRule::Above => "u_tau:above_one",
        },
        value: DimValue::from_interval(&est),
        hypotheses: vec![(format!("1/w < tau < w on the window (w in [{}, {}])", w.lo(), w.hi()), true)],
        warnings: Vec::new(),
    };
    rep.hypotheses.push((format!("estimate meets the bounds bracket [{lower}, {upper}]"), within));
    Ok(rep)
}

/// Window liminf of `log q_{k+1}/log q_k` must reach this for the
/// simplified expression to be used without a warning.
pub fn growth_threshold() -> Rational {
    Rational::new(5.into(), 4.into())
}

/// `((1/τ)log q_k + (1/τ−1)Σ_{j=2}^{k−1} log q_j)/(log q_k + log q_{k+1})`,
/// minimised over the upper half of `2 ≤ k ≤ K`.
pub fn simplified_dim_expr(cf: &ContinuedFraction, tau: &Rational, k_max: usize) -> Result<DimensionReport> {
    if !tau.is_positive() {
        return Err(Error::invalid("tau must be positive"));
    }
    if k_max < 3 {
        return Err(Error::invalid("K must be at least 3"));
    }
    let logs: Vec<DyadicInterval> = (0..=k_max + 1).map(|k| cf.q(k).map(|q| log2_iv(&q))).collect::<Result<_>>()?;
    let one = Rational::one();
    let inv_tau = one.clone() / tau;
    let c = &inv_tau - &one;
    let first = (k_max / 2 + 1).max(2);
    let mut ratio: Option<DyadicInterval> = None;
    for k in first..=k_max {
        let rk = quotient_iv(&logs[k + 1], &logs[k])?;
        ratio = Some(ratio.map_or(rk.clone(), |x| x.min_with(&rk)));
    }
    let ratio = ratio.expect("non-empty window");
    let mut sum = DyadicInterval::zero();
    let mut best: Option<DyadicInterval> = None;
    for k in 2..=k_max {
        if k >= first {
            let num = logs[k].scale(&inv_tau).add(&sum.scale(&c));
            let e = quotient_iv(&num, &logs[k].add(&logs[k + 1]))?;
            best = Some(best.map_or(e.clone(), |b| b.min_with(&e)));
        }
        sum = sum.add(&logs[k]);
    }
    let growth_ok = ratio.lo() >= &growth_threshold();
    let mut warnings = Vec::new();
    if !growth_ok {
        warnings.push(format!(
            "window liminf of log q_(k+1)/log q_k is {} to {}; below {} the simplification is unjustified",
            ratio.lo(),
            ratio.hi(),
            growth_threshold()
        ));
    }
    if tau == &one {
        warnings.push("tau = 1 lies outside the range where the expression is proved".into());
    }
    Ok(DimensionReport {
        formula_id: "u_tau:simplified",
        value: DimValue::from_interval(&best.expect("non-empty window")),
        hypotheses: vec![(format!("super-exponential growth on the window (ratio >= {})", growth_threshold()), growth_ok)],
        warnings,
    })
}

/// A continued fraction with `a_{k+1} = q_k` after `start`, with a cap large
/// enough for windows up to `K`.
pub fn growth_cf_for_window(start: &[u64], k_max: usize) -> Result<ContinuedFraction> {
    let v: Vec<BigInt> = start.iter().map(|&a| BigInt::from(a)).collect();
    if v.is_empty() || v.iter().any(|a| a.is_zero()) {
        return Err(Error::invalid("growth start quotients must be positive"));
    }
    let shift = u32::try_from(k_max + 4).ok().filter(|&s| s < 40).ok_or_else(|| Error::invalid("K too large"))?;
    Ok(ContinuedFraction::with_cap(crate::contfrac::QuotientSource::Growth(v), 8u64 << shift))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesClass {
    Converges,
    Diverges,
}

/// The exponent `e` with terms of the Hausdorff-measure series behaving like
/// `T^e` for `ψ(T) = cT^(−a)`: `e = a − 2 + (mn − s)(1/n + a/m)`.
pub fn kimkim_exponent(a: &Rational, m: usize, n: usize, s: &Rational) -> Rational {
    let (mr, nr) = (r(m as i64), r(n as i64));
    a - r(2) + (&mr * &nr - s) * (Rational::one() / &nr + a / &mr)
}

fn power_law_exponent(psi: &ApproxFunction) -> Result<Rational> {
    match psi {
        ApproxFunction::PowerLaw { c, a } if c.is_positive() => Ok(a.clone()),
        ApproxFunction::PowerLaw { .. } => Err(Error::invalid("power law coefficient must be positive")),
        _ => Err(Error::invalid("exponent classifiers need a power law")),
    }
}

/// Converges iff `e < −1`; `e = −1` is the harmonic series and diverges.
pub fn kimkim_classifier(psi: &ApproxFunction, m: usize, n: usize, s: &Rational) -> Result<(SeriesClass, Rational)> {
    check_dims(m, n)?;
    let mn = r((m * n) as i64);
    if s.is_negative() || s > &mn {
        return Err(Error::invalid(format!("s = {s} outside [0, mn]")));
    }
    let e = kimkim_exponent(&power_law_exponent(psi)?, m, n, s);
    let class = if e < r(-1) { SeriesClass::Converges } else { SeriesClass::Diverges };
    Ok((class, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureSide {
    /// `Σ q^(n−1)ψ(q)^m < ∞`.
    ZeroMeasureSide,
    FullMeasureSide,
}

/// `Σ q^(n−1)·c^m·q^(−am)` converges iff `am > n`.
pub fn kg_classifier(psi: &ApproxFunction, m: usize, n: usize) -> Result<MeasureSide> {
    check_dims(m, n)?;
    let a = power_law_exponent(psi)?;
    Ok(if a * r(m as i64) > r(n as i64) { MeasureSide::ZeroMeasureSide } else { MeasureSide::FullMeasureSide })
}
