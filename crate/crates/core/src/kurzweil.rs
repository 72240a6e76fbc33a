//! Partial sums of `S_l(A,γ) = Σ_{t≥l} tⁿ⁻¹ M_l(t)ᵐ`, their record-regrouped
//! form, the prefix inequality linking different `l`, a decreasing-sequence
//! diagnostic, the trend of `tⁿ M_1(t)ᵐ`, and convergence verdicts that never
//! claim more than a certificate supports.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{ln_enclosure, DyadicInterval, ExactReal, Rational};
use crate::funcspace::{pow_rel, power_range_sum, power_sum};
use crate::lattice::{min_table_with, min_tables_with, AffineSystem, Evaluator, Gamma, MinTable, RecordSequence, ScanOptions, Verdict};

/// One term of a ledger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerRow {
    pub t: u64,
    pub term: DyadicInterval,
    pub partial: DyadicInterval,
}

/// Contribution of one record block `t_k ≤ t < t_{k+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordBlock {
    pub t_start: u64,
    pub t_end: u64,
    pub value: DyadicInterval,
    pub contribution: DyadicInterval,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesLedger {
    pub l: u64,
    pub horizon: u64,
    pub rows: Vec<LedgerRow>,
    pub blocks: Vec<RecordBlock>,
    pub partial: DyadicInterval,
    pub exhausted: bool,
}

impl SeriesLedger {
    /// CSV with columns `t,term_lo,term_hi,partial_lo,partial_hi`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,term_lo,term_hi,partial_lo,partial_hi\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.t,
                r.term.lo(),
                r.term.hi(),
                r.partial.lo(),
                r.partial.hi()
            );
        }
        s
    }
}

fn weight(t: u64, n: usize) -> Rational {
    Rational::from_integer(num_traits::pow(BigInt::from(t), n - 1))
}

fn ledger_from_table(table: &MinTable, m: usize, n: usize) -> SeriesLedger {
    let mut partial = DyadicInterval::zero();
    let mut rows = Vec::with_capacity(table.rows.len());
    for r in &table.rows {
        let term = r.value.pow_nonneg(m as u32).scale(&weight(r.t, n));
        partial = partial.add(&term);
        rows.push(LedgerRow {
            t: r.t,
            term,
            partial: partial.clone(),
        });
    }
    SeriesLedger {
        l: table.l,
        horizon: table.rows.last().map(|r| r.t).unwrap_or(table.l),
        rows,
        blocks: Vec::new(),
        partial,
        exhausted: table.any_exhausted(),
    }
}

/// `P_l(T) = Σ_{t=l}^{T} tⁿ⁻¹ M_l(t)ᵐ`.
pub fn series_partial(sys: &AffineSystem, l: u64, t_max: u64, opts: &ScanOptions) -> Result<SeriesLedger> {
    let table = crate::lattice::min_table(sys, l, t_max, opts)?;
    Ok(ledger_from_table(&table, sys.m, sys.n))
}

/// `P_1(T)` summed block by block over the records: each record value is
/// weighted by `Σ_{t=t_k}^{t_{k+1}−1} tⁿ⁻¹`.
pub fn series_regrouped(records: &RecordSequence, m: usize, n: usize, t_max: u64) -> Result<SeriesLedger> {
    let first = records
        .entries
        .first()
        .ok_or_else(|| Error::invalid("empty record sequence"))?;
    if first.t != 1 {
        return Err(Error::invalid("records must start at t = 1"));
    }
    if records.horizon < t_max {
        return Err(Error::invalid(format!(
            "records cover t <= {}, need {t_max}",
            records.horizon
        )));
    }
    let mut blocks = Vec::new();
    let mut partial = DyadicInterval::zero();
    for (i, rec) in records.entries.iter().enumerate() {
        if rec.t > t_max {
            break;
        }
        let end = records
            .entries
            .get(i + 1)
            .map(|r| r.t - 1)
            .unwrap_or(t_max)
            .min(t_max);
        let w = power_sum(&BigInt::from(end), (n - 1) as u32) - power_sum(&BigInt::from(rec.t - 1), (n - 1) as u32);
        let contribution = rec.value.pow_nonneg(m as u32).scale(&Rational::from_integer(w));
        partial = partial.add(&contribution);
        blocks.push(RecordBlock {
            t_start: rec.t,
            t_end: end,
            value: rec.value.clone(),
            contribution,
        });
    }
    Ok(SeriesLedger {
        l: 1,
        horizon: t_max,
        rows: Vec::new(),
        blocks,
        partial,
        exhausted: records.exhausted,
    })
}

/// Checks `P_l(T) ≤ Σ_{t=l}^{l₀} tⁿ⁻¹M_l(t)ᵐ + P_{l₀}(T)` on enclosures.
pub fn prefix_inequality_check(sys: &AffineSystem, l: u64, l0: u64, t_max: u64, opts: &ScanOptions) -> Result<Verdict> {
    if !(1 <= l && l <= l0 && l0 <= t_max) {
        return Err(Error::invalid(format!("need 1 <= l <= l0 <= T, got {l}, {l0}, {t_max}")));
    }
    let ev = Evaluator::new(sys, &BigInt::from(t_max), opts.budget)?;
    let full = ledger_from_table(&min_table_with(&ev, l, t_max, opts.workers)?, sys.m, sys.n);
    let tail = ledger_from_table(&min_table_with(&ev, l0, t_max, opts.workers)?, sys.m, sys.n);
    Ok(prefix_verdict(&full, &tail, l, l0, t_max))
}

fn prefix_verdict(full: &SeriesLedger, tail: &SeriesLedger, l: u64, l0: u64, t: u64) -> Verdict {
    let prefix = &full.rows[(l0 - l) as usize].partial;
    let rhs = prefix.add(&tail.rows[(t - l0) as usize].partial);
    let lhs = &full.rows[(t - l) as usize].partial;
    if lhs.hi() <= rhs.lo() {
        Verdict::True
    } else if lhs.lo() > rhs.hi() {
        Verdict::False
    } else {
        Verdict::Undecided
    }
}

/// The prefix inequality for every `l ≤ l₀ ≤ l_max` and `T ∈ [t_lo, t_hi]`
/// (with `l₀ ≤ T`), from a single scan feeding one `M_l` table per `l`.
pub fn prefix_inequality_sweep(
    sys: &AffineSystem,
    l_max: u64,
    t_lo: u64,
    t_hi: u64,
    opts: &ScanOptions,
) -> Result<Vec<(u64, u64, u64, Verdict)>> {
    if l_max == 0 || t_lo == 0 || t_lo > t_hi {
        return Err(Error::invalid("need l_max >= 1 and 1 <= t_lo <= t_hi"));
    }
    let ev = Evaluator::new(sys, &BigInt::from(t_hi), opts.budget)?;
    let ledgers: Vec<SeriesLedger> = min_tables_with(&ev, l_max, t_hi, opts.workers)?
        .iter()
        .map(|t| ledger_from_table(t, sys.m, sys.n))
        .collect();
    let mut out = Vec::new();
    for l in 1..=l_max.min(t_hi) {
        for l0 in l..=l_max.min(t_hi) {
            for t in t_lo.max(l0)..=t_hi {
                let v = prefix_verdict(&ledgers[(l - 1) as usize], &ledgers[(l0 - 1) as usize], l, l0, t);
                out.push((l, l0, t, v));
            }
        }
    }
    Ok(out)
}

/// A non-negative sequence `a_t`, `t ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecreasingSequence {
    /// `c·t^(−e)`.
    Power { c: Rational, e: Rational },
    /// `c / (t^e · ln(t+1)^k)`.
    PowerLog { c: Rational, e: Rational, k: u32 },
    /// Explicit values `a_1, a_2, …`.
    Table(Vec<Rational>),
}

const SEQ_BITS: u32 = 160;

impl DecreasingSequence {
    pub fn term(&self, t: u64) -> Result<DyadicInterval> {
        let tb = BigInt::from(t);
        match self {
            DecreasingSequence::Power { c, e } => Ok(pow_rel(&tb, &-e.clone(), SEQ_BITS)?.scale(c)),
            DecreasingSequence::PowerLog { c, e, k } => {
                let p = pow_rel(&tb, &-e.clone(), SEQ_BITS)?.scale(c);
                let lg = ln_enclosure(&Rational::from_integer(BigInt::from(t + 1)), SEQ_BITS)?;
                p.div(&lg.pow_nonneg(*k))
            }
            DecreasingSequence::Table(v) => v
                .get((t - 1) as usize)
                .map(|x| DyadicInterval::point(x.clone()))
                .ok_or_else(|| Error::invalid(format!("table has no entry for t={t}"))),
        }
    }

    /// Whether `Σ tⁿ⁻¹a_t < ∞`, when the closed form decides it.
    pub fn weighted_sum_converges(&self, n: usize) -> Option<bool> {
        let nn = Rational::from_integer(BigInt::from(n));
        match self {
            DecreasingSequence::Power { c, e } => Some(c.is_zero() || e > &nn),
            DecreasingSequence::PowerLog { c, e, k } => Some(c.is_zero() || e > &nn || (e == &nn && *k > 1)),
            DecreasingSequence::Table(_) => Some(true),
        }
    }
}

/// Maximum of an enclosed quantity over `t_lo ≤ t ≤ t_hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrendWindow {
    pub t_lo: u64,
    pub t_hi: u64,
    pub max: DyadicInterval,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OlivierReport {
    pub horizon: u64,
    /// `Σ_{t=1}^{T} tⁿ⁻¹a_t`.
    pub partial: DyadicInterval,
    /// Dyadic windows `[2^j, 2^(j+1))` with the maximum of `tⁿa_t`.
    pub windows: Vec<TrendWindow>,
    /// `max_{T/2 ≤ t ≤ T} tⁿa_t`.
    pub final_window: DyadicInterval,
    /// `Some(true)` when convergence of the weighted sum is known from the
    /// closed form or from the caller's bound on the partial sums.
    pub hypothesis: Option<bool>,
    /// The sequence is non-increasing on `[1, T]` (certified).
    pub decreasing: bool,
    /// Convergent hypothesis holds but `tⁿa_t` stays above the tolerance on
    /// the final window.
    pub violation: bool,
}

/// Partial sums and the trend of `tⁿa_t` for a non-increasing sequence with
/// convergent `Σ tⁿ⁻¹a_t`; under that hypothesis `tⁿa_t → 0`.
pub fn olivier_check(
    seq: &DecreasingSequence,
    n: usize,
    t_max: u64,
    partial_bound: Option<&Rational>,
    tol: &Rational,
) -> Result<OlivierReport> {
    if n == 0 || t_max < 2 {
        return Err(Error::invalid("need n >= 1 and T >= 2"));
    }
    let mut partial = DyadicInterval::zero();
    let mut windows: Vec<TrendWindow> = Vec::new();
    let mut final_window: Option<DyadicInterval> = None;
    let mut decreasing = true;
    let mut prev: Option<DyadicInterval> = None;
    let half = t_max / 2;
    for t in 1..=t_max {
        let a = seq.term(t)?;
        if let Some(p) = &prev {
            if a.lo() > p.hi() {
                decreasing = false;
            }
        }
        partial = partial.add(&a.scale(&weight(t, n))).round_out(SEQ_BITS);
        let tn = a.scale(&Rational::from_integer(num_traits::pow(BigInt::from(t), n)));
        let j = 63 - t.leading_zeros();
        let lo_t = 1u64 << j;
        match windows.last_mut() {
            Some(w) if w.t_lo == lo_t => w.max = w.max.max_with(&tn),
            _ => windows.push(TrendWindow {
                t_lo: lo_t,
                t_hi: (lo_t << 1) - 1,
                max: tn.clone(),
            }),
        }
        if t >= half {
            final_window = Some(match final_window {
                None => tn,
                Some(f) => f.max_with(&tn),
            });
        }
        prev = Some(a);
    }
    if let Some(w) = windows.last_mut() {
        w.t_hi = w.t_hi.min(t_max);
    }
    let hypothesis = match partial_bound {
        Some(b) => Some(partial.hi() <= b && seq.weighted_sum_converges(n) != Some(false)),
        None => seq.weighted_sum_converges(n),
    };
    let final_window = final_window.expect("T >= 2");
    let violation = hypothesis == Some(true) && decreasing && final_window.lo() > tol;
    Ok(OlivierReport {
        horizon: t_max,
        partial,
        windows,
        final_window,
        hypothesis,
        decreasing,
        violation,
    })
}

/// `tⁿ M_1(t)ᵐ` rows and their maxima over dyadic windows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingTrend {
    pub rows: Vec<(u64, DyadicInterval)>,
    pub windows: Vec<TrendWindow>,
}

pub fn sing_trend(sys: &AffineSystem, t_max: u64, opts: &ScanOptions) -> Result<SingTrend> {
    let table = crate::lattice::min_table(sys, 1, t_max, opts)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    let mut windows: Vec<TrendWindow> = Vec::new();
    for r in &table.rows {
        let v = r
            .value
            .pow_nonneg(sys.m as u32)
            .scale(&Rational::from_integer(num_traits::pow(BigInt::from(r.t), sys.n)));
        let lo_t = 1u64 << (63 - r.t.leading_zeros());
        match windows.last_mut() {
            Some(w) if w.t_lo == lo_t => w.max = w.max.max_with(&v),
            _ => windows.push(TrendWindow {
                t_lo: lo_t,
                t_hi: ((lo_t << 1) - 1).min(t_max),
                max: v.clone(),
            }),
        }
        rows.push((r.t, v));
    }
    Ok(SingTrend { rows, windows })
}

/// What the caller is willing to assume about `M_l` beyond the horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TailModel {
    None,
    /// `M_l` has reached an exact zero.
    ExactZero,
    /// `M_l(t) ≤ M_l(T)·(T/t)^a` for all `t > T`.
    PowerTail(Rational),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerdictTag {
    /// `S_l ≤ bound`.
    ConvergedWithBound(Rational),
    /// `tⁿ⁻¹M_l(t)ᵐ ≥ c·(t + shift)^(−1)` for every `t ≥ l`, a divergent
    /// lower series.
    DivergedWithWitness { c: Rational, shift: BigInt },
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvergenceVerdict {
    pub tag: VerdictTag,
    pub l: u64,
    pub horizon: u64,
    pub partial: DyadicInterval,
    pub note: String,
    /// Hypotheses the verdict relies on that are not checked.
    pub assumptions: Vec<String>,
}

impl ConvergenceVerdict {
    pub fn tag_str(&self) -> &'static str {
        match self.tag {
            VerdictTag::ConvergedWithBound(_) => "ConvergedWithBound",
            VerdictTag::DivergedWithWitness { .. } => "DivergedWithWitness",
            VerdictTag::Undecided => "Undecided",
        }
    }
}

/// Rigorous lower bound `c` with `q⟨qα⟩ ≥ c` for every `q ≥ 1`, available
/// when the partial quotients are bounded by a known constant.
pub fn bounded_type_constant(alpha: &ExactReal) -> Option<Rational> {
    let cf = alpha.as_cf()?;
    let bound = cf.quotient_bound()?;
    Some(Rational::new(BigInt::one(), bound + 2))
}

/// Convergence verdict for `S_l(A,γ)` from the data up to `T`.
pub fn classify(sys: &AffineSystem, l: u64, t_max: u64, model: &TailModel, opts: &ScanOptions) -> Result<ConvergenceVerdict> {
    let table = crate::lattice::min_table(sys, l, t_max, opts)?;
    let ledger = ledger_from_table(&table, sys.m, sys.n);
    let partial = ledger.partial.clone();
    let mut verdict = ConvergenceVerdict {
        tag: VerdictTag::Undecided,
        l,
        horizon: t_max,
        partial: partial.clone(),
        note: String::new(),
        assumptions: Vec::new(),
    };

    let zero_at = table.rows.iter().find(|r| r.value == DyadicInterval::zero()).map(|r| r.t);
    if let Some(t0) = zero_at {
        // M_l is non-increasing, so every later term vanishes.
        let bound = ledger.rows[(t0 - l) as usize].partial.hi().clone();
        verdict.tag = VerdictTag::ConvergedWithBound(bound);
        verdict.note = format!("M_l(t) = 0 exactly from t = {t0}; the tail vanishes");
        return Ok(verdict);
    }
    if *model == TailModel::ExactZero {
        verdict.note = "an exact zero was declared but not reached within the horizon".into();
        return Ok(verdict);
    }
    if let TailModel::PowerTail(a) = model {
        let am = a * Rational::from_integer(BigInt::from(sys.m));
        let n_r = Rational::from_integer(BigInt::from(sys.n));
        if am > n_r {
            let last = table.rows.last().expect("non-empty table");
            let s = &am - &n_r + Rational::one();
            let tail = power_range_sum(&BigInt::from(t_max), None, &s)?;
            let scale = pow_rel(&BigInt::from(t_max), &am, 128)?;
            let mt = DyadicInterval::point(last.value.hi().clone()).pow_nonneg(sys.m as u32);
            let bound = partial.add(&mt.mul(&scale).mul(&tail));
            verdict.tag = VerdictTag::ConvergedWithBound(bound.hi().clone());
            verdict.note = format!("partial sum plus the declared tail M(t) <= M(T)(T/t)^{a}");
            verdict.assumptions.push(format!("M_l(t) <= M_l(T)*(T/t)^{a} for t > T"));
            return Ok(verdict);
        }
        verdict.note = format!("declared tail exponent {a} has a*m <= n; no bound");
        return Ok(verdict);
    }

    if sys.m == 1 && sys.n == 1 {
        let shift = match &sys.gamma {
            Gamma::Values(v) if v[0].is_zero() => Some(BigInt::zero()),
            Gamma::Orbit(q0) if BigInt::from(l) > q0[0].abs() => Some(q0[0].abs()),
            _ => None,
        };
        if let (Some(c), Some(shift)) = (bounded_type_constant(&sys.a[0][0]), shift) {
            // For l ≤ |q| ≤ t, q ≠ q0: ⟨(q−q0)α⟩ ≥ c/|q−q0| ≥ c/(t+|q0|).
            verdict.tag = VerdictTag::DivergedWithWitness {
                c: c.clone(),
                shift: shift.clone(),
            };
            verdict.note = format!(
                "bounded partial quotients give q<q·alpha> >= {c} for all q >= 1, so M_l(t) >= {c}/(t+{shift}) and the series dominates a harmonic tail"
            );
            if !shift.is_zero() {
                verdict
                    .assumptions
                    .push("the target lies in the orbit of the displayed point".into());
            }
            return Ok(verdict);
        }
    }
    verdict.note = "no certificate applies at this horizon".into();
    verdict
        .assumptions
        .push("<Aq-gamma> > 0 for all q != 0 (needed to extend any verdict across l)".into());
    Ok(verdict)
}

/// `Σ_{t=l}^{T} c/(t+shift)`, a lower bound matching a divergence witness.
pub fn witness_lower_sum(c: &Rational, shift: &BigInt, l: u64, t_max: u64) -> Result<DyadicInterval> {
    let lo = BigInt::from(l - 1) + shift;
    let hi = BigInt::from(t_max) + shift;
    let s = power_range_sum(&lo, Some(&hi), &Rational::one())?;
    Ok(s.scale(c))
}

/// Convenience for callers that hold a horizon as `BigInt`.
pub fn horizon_u64(t: &BigInt) -> Result<u64> {
    t.to_u64().ok_or_else(|| Error::invalid("horizon exceeds u64"))
}
