//! Explicit constructions: a divergent-class `ψ₀` below the running minima,
//! a convergent-class `ψ` from a witness sequence, the greedy sequence and the
//! target `γ = Σ (Aq_k − p_k)` it defines, dense approximants, exterior
//! truncations, radii of the sets with `k` certified solutions, and pointwise
//! maxima of several functions.
//!
//! Witness searches visit norms in increasing order and, within a norm, points
//! in lexicographic order. One-dimensional homogeneous systems with a
//! continued-fraction entry are searched through multiples of convergent
//! denominators instead: any `q` with `q⟨qα⟩ < 1/2` has that form, so the
//! search reaches norms far beyond any shell scan.

use std::ops::ControlFlow;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::contfrac::ContinuedFraction;
use crate::error::{Error, Result};
use crate::exactnum::{decimal, interval_dist, interval_nearest_int, two_pow_neg, DyadicInterval, Rational};
use crate::funcspace::{
    count_solutions, metric_d, power_sum, ApproxFunction, Profile, SolutionCount,
};
use crate::lattice::{min_table, sup_norm, AffineSystem, Evaluator, Gamma, ScanOptions};

/// Which inequalities the entries of a sequence satisfy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessMode {
    /// `‖q_i‖ⁿ⟨Aq_i−γ⟩ᵐ < scale/2^i` with strictly increasing norms.
    CWitness { scale: Rational },
    /// `‖q_{k+1}‖ ≥ (k+1)(‖q_1‖+⋯+‖q_k‖)+1` and
    /// `‖q_{k+1}‖ⁿ⟨Aq_{k+1}⟩ᵐ < 2^(−m)‖q_k‖ⁿ⟨Aq_k⟩ᵐ`.
    GammaGreedy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessEntry {
    pub q: Vec<BigInt>,
    pub norm: BigInt,
    /// Enclosure of `⟨Aq−γ⟩`.
    pub dist: DyadicInterval,
    /// Enclosure of `‖q‖ⁿ⟨Aq−γ⟩ᵐ`.
    pub weighted: DyadicInterval,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessSequence {
    pub mode: WitnessMode,
    pub m: usize,
    pub n: usize,
    pub entries: Vec<WitnessEntry>,
}

impl WitnessSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Re-checks every defining inequality of the mode on the stored
    /// enclosures.
    pub fn verify(&self) -> bool {
        let mut prev: Option<&WitnessEntry> = None;
        let mut norm_sum = BigInt::zero();
        for (i, e) in self.entries.iter().enumerate() {
            let idx = i + 1;
            let ok = match &self.mode {
                WitnessMode::CWitness { scale } => {
                    let bound = scale * two_pow_neg(idx as u32);
                    e.weighted.hi() < &bound && prev.map_or(true, |p| p.norm < e.norm)
                }
                WitnessMode::GammaGreedy => match prev {
                    None => e.dist.lo().is_positive() && e.dist.hi() < &Rational::new(1.into(), 2.into()),
                    Some(p) => {
                        let need = BigInt::from(i) * &norm_sum + 1;
                        let ratio = p.weighted.lo() * two_pow_neg(self.m as u32);
                        e.norm >= need && e.weighted.hi() < &ratio && e.dist.lo().is_positive()
                    }
                },
            };
            if !ok {
                return false;
            }
            norm_sum += &e.norm;
            prev = Some(e);
        }
        true
    }

    /// `‖q_1‖ + ⋯ + ‖q_k‖`.
    pub fn prefix_norm(&self, k: usize) -> BigInt {
        self.entries[..k].iter().map(|e| e.norm.clone()).sum()
    }

    /// Text form: one `q;norm;dist_lo;dist_hi` line per entry.
    pub fn to_text(&self) -> String {
        let mode = match &self.mode {
            WitnessMode::CWitness { scale } => format!("cwitness scale={scale}"),
            WitnessMode::GammaGreedy => "gamma-greedy".to_string(),
        };
        let mut s = format!("mode = {mode}\nm = {}\nn = {}\n", self.m, self.n);
        for e in &self.entries {
            let q: Vec<String> = e.q.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!(
                "q = [{}] norm = {} dist = [{}, {}] weighted_hi = {}\n",
                q.join(","),
                e.norm,
                e.dist.lo(),
                e.dist.hi(),
                e.weighted.hi()
            ));
        }
        s
    }
}

fn weighted_of(norm: &BigInt, dist: &DyadicInterval, m: usize, n: usize) -> DyadicInterval {
    dist.pow_nonneg(m as u32)
        .scale(&Rational::from_integer(num_traits::pow(norm.clone(), n)))
}

/// Result of one minimal-norm search.
enum Search {
    Found(WitnessEntry),
    /// Nothing certified up to the cap; the smallest certified lower bound of
    /// `‖q‖ⁿ⟨Aq−γ⟩ᵐ` seen on the way.
    NotFound { blocking: Option<Rational> },
}

/// The system when it is `m = n = 1`, `γ = 0` with a continued-fraction
/// entry.
fn legendre_cf(sys: &AffineSystem) -> Option<&ContinuedFraction> {
    if sys.m != 1 || sys.n != 1 || !sys.is_homogeneous() {
        return None;
    }
    if let Gamma::Orbit(_) = sys.gamma {
        return None;
    }
    sys.a[0][0].as_cf().map(|a| a.as_ref())
}

/// Smallest `q ≥ min_norm` with `q⟨qα⟩ < thr ≤ 1/2`, among multiples
/// `d·q_k` of convergent denominators.
fn legendre_search(cf: &ContinuedFraction, min_norm: &BigInt, cap: &BigInt, thr: &Rational) -> Result<Search> {
    let mut best: Option<(BigInt, DyadicInterval)> = None;
    let mut blocking: Option<Rational> = None;
    let mut k = 0usize;
    loop {
        let qk = match cf.q(k) {
            Ok(q) => q,
            Err(Error::GenerationOverflow(_)) => break,
            Err(e) => return Err(e),
        };
        if &qk > cap || best.as_ref().is_some_and(|(b, _)| &qk > b) {
            break;
        }
        let d = Integer::div_ceil(min_norm, &qk).max(BigInt::one());
        let cand = &d * &qk;
        if &cand <= cap && best.as_ref().map_or(true, |(b, _)| &cand < b) {
            let dist_k = match cf.qk_dist(k) {
                Ok(x) => x,
                Err(Error::GenerationOverflow(_)) => break,
                Err(e) => return Err(e),
            };
            let dist = dist_k.scale(&Rational::from_integer(d.clone()));
            let val = weighted_of(&cand, &dist, 1, 1);
            if val.hi() < thr {
                best = Some((cand, dist));
            } else if blocking.as_ref().map_or(true, |b| val.lo() < b) {
                blocking = Some(val.lo().clone());
            }
        }
        k += 1;
    }
    Ok(match best {
        Some((norm, dist)) => Search::Found(WitnessEntry {
            q: vec![-norm.clone()],
            weighted: weighted_of(&norm, &dist, 1, 1),
            norm,
            dist,
        }),
        None => {
            // Points that are not multiples of convergent denominators have
            // q⟨qα⟩ ≥ 1/2.
            let half = Rational::new(1.into(), 2.into());
            Search::NotFound {
                blocking: Some(blocking.map_or(half.clone(), |b| b.min(half))),
            }
        }
    })
}

/// Shell scan for the first point (by norm, then lexicographically) with
/// `min_norm ≤ ‖q‖ ≤ cap` accepted by `accept(t, lo, hi)` on numerators over
/// `D`; also returns the least `tⁿ·loᵐ/Dᵐ` seen.
fn shell_search(
    sys: &AffineSystem,
    min_norm: &BigInt,
    cap: &BigInt,
    opts: &ScanOptions,
    accept: impl Fn(u64, &BigInt, &BigInt, &BigInt) -> bool,
) -> Result<Search> {
    let cap_u = cap
        .to_u64()
        .ok_or_else(|| Error::invalid("shell searches need a cap below 2^64"))?;
    let from = min_norm.to_u64().unwrap_or(u64::MAX).max(1);
    if from > cap_u {
        return Ok(Search::NotFound { blocking: None });
    }
    let ev = Evaluator::new(sys, cap, opts.budget)?;
    let den = ev.den().clone();
    let (m, n) = (sys.m, sys.n);
    let mut found: Option<(Vec<i64>, BigInt, BigInt)> = None;
    let mut blocking: Option<(BigInt, u64)> = None;
    ev.for_each_shell(from, cap_u, true, opts.workers, |t, pts| {
        for p in pts {
            if accept(t, &p.lo, &p.hi, &den) {
                found = Some((p.q.clone(), p.lo.clone(), p.hi.clone()));
                return ControlFlow::Break(());
            }
            let key = num_traits::pow(BigInt::from(t), n) * num_traits::pow(p.lo.clone(), m);
            if blocking.as_ref().map_or(true, |(b, _)| &key < b) {
                blocking = Some((key, t));
            }
        }
        ControlFlow::Continue(())
    })?;
    let den_m = Rational::from_integer(num_traits::pow(den.clone(), m));
    Ok(match found {
        Some((q, lo, hi)) => {
            let q: Vec<BigInt> = q.into_iter().map(BigInt::from).collect();
            let norm = sup_norm(&q);
            let dist = ev.to_interval(&lo, &hi);
            Search::Found(WitnessEntry {
                weighted: weighted_of(&norm, &dist, m, n),
                q,
                norm,
                dist,
            })
        }
        None => Search::NotFound {
            blocking: blocking.map(|(b, _)| Rational::from_integer(b) / den_m),
        },
    })
}

/// First `q` with `‖q‖ ≥ min_norm` and `‖q‖ⁿ⟨Aq−γ⟩ᵐ < thr`, certified.
fn search_weighted(
    sys: &AffineSystem,
    min_norm: &BigInt,
    cap: &BigInt,
    thr: &Rational,
    need_positive: bool,
    opts: &ScanOptions,
) -> Result<Search> {
    if let Some(cf) = legendre_cf(sys) {
        if thr <= &Rational::new(1.into(), 2.into()) {
            return legendre_search(cf, min_norm, cap, thr);
        }
    }
    let (m, n) = (sys.m, sys.n);
    let thr = thr.clone();
    shell_search(sys, min_norm, cap, opts, move |t, lo, hi, den| {
        if need_positive && lo.is_zero() {
            return false;
        }
        // tⁿ·hiᵐ < thr·Dᵐ
        let lhs = Rational::from_integer(num_traits::pow(BigInt::from(t), n) * num_traits::pow(hi.clone(), m));
        lhs < &thr * Rational::from_integer(num_traits::pow(den.clone(), m))
    })
}

fn blocking_str(b: &Option<Rational>) -> String {
    match b {
        Some(x) => format!("{x} (~{})", decimal(x, 6)),
        None => "none".into(),
    }
}

/// Up to `count` points with `‖q_i‖ⁿ⟨Aq_i−γ⟩ᵐ < scale/2^i` and strictly
/// increasing norms, each of least norm. Fails with the deepest index reached
/// and the smallest weighted distance certified beyond it.
pub fn find_c_witness_sequence_scaled(
    sys: &AffineSystem,
    count: usize,
    scale: &Rational,
    cap: &BigInt,
    opts: &ScanOptions,
) -> Result<WitnessSequence> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    if !scale.is_positive() {
        return Err(Error::invalid("scale must be positive"));
    }
    let mut entries: Vec<WitnessEntry> = Vec::new();
    for i in 1..=count {
        let thr = scale * two_pow_neg(i as u32);
        let min_norm = entries.last().map_or(BigInt::one(), |e| &e.norm + 1);
        match search_weighted(sys, &min_norm, cap, &thr, false, opts)? {
            Search::Found(e) => entries.push(e),
            Search::NotFound { blocking } => {
                return Err(Error::NotFoundWithinCap {
                    cap: cap.to_string(),
                    deepest: i - 1,
                    blocking: format!("need weighted distance < {thr}; least certified value {}", blocking_str(&blocking)),
                })
            }
        }
    }
    Ok(WitnessSequence {
        mode: WitnessMode::CWitness { scale: scale.clone() },
        m: sys.m,
        n: sys.n,
        entries,
    })
}

pub fn find_c_witness_sequence(sys: &AffineSystem, count: usize, cap: &BigInt, opts: &ScanOptions) -> Result<WitnessSequence> {
    find_c_witness_sequence_scaled(sys, count, &Rational::one(), cap, opts)
}

/// `K` greedy terms for a homogeneous system: the first is the least `q`
/// with `0 < ⟨Aq⟩ < 1/2`, each later one the least `q` meeting the growth
/// and ratio conditions.
pub fn build_greedy_gamma_sequence(sys: &AffineSystem, k_terms: usize, cap: &BigInt, opts: &ScanOptions) -> Result<WitnessSequence> {
    if !sys.is_homogeneous() {
        return Err(Error::invalid("the greedy sequence is built for gamma = 0"));
    }
    if k_terms == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let (m, n) = (sys.m, sys.n);
    let first = shell_search(sys, &BigInt::one(), &cap.clone().min(BigInt::from(u32::MAX)), opts, |_, lo, hi, den| {
        lo.is_positive() && (hi.clone() << 1usize) < *den
    })?;
    let mut entries = match first {
        Search::Found(e) => vec![e],
        Search::NotFound { .. } => {
            return Err(Error::NotFoundWithinCap {
                cap: cap.to_string(),
                deepest: 0,
                blocking: "no q with 0 < <Aq> < 1/2".into(),
            })
        }
    };
    let mut norm_sum = entries[0].norm.clone();
    for k in 1..k_terms {
        let min_norm = BigInt::from(k + 1) * &norm_sum + 1;
        let thr = entries[k - 1].weighted.lo() * two_pow_neg(m as u32);
        match search_weighted(sys, &min_norm, cap, &thr, true, opts)? {
            Search::Found(e) => {
                norm_sum += &e.norm;
                entries.push(e);
            }
            Search::NotFound { blocking } => {
                return Err(Error::NotFoundWithinCap {
                    cap: cap.to_string(),
                    deepest: k,
                    blocking: format!(
                        "need norm >= {min_norm} with weighted distance < {thr}; least certified value {}",
                        blocking_str(&blocking)
                    ),
                })
            }
        }
    }
    let ws = WitnessSequence { mode: WitnessMode::GammaGreedy, m, n, entries };
    debug_assert!(ws.verify());
    Ok(ws)
}

/// A `K`-term enclosure of `γ = Σ_k (Aq_k − p_k)` with a tail bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaWitness {
    pub k: usize,
    /// Per coordinate, an enclosure of the `K`-term sum shifted into `[0, 1)`.
    pub value: Vec<DyadicInterval>,
    /// Bound on `Σ_{k>K} ⟨Aq_k⟩`.
    pub tail_bound: Rational,
    /// Nearest-integer vectors `p_k`.
    pub p: Vec<Vec<BigInt>>,
}

impl GammaWitness {
    /// Enclosures of the full infinite sum, `value ± tail_bound`.
    pub fn enclosure(&self) -> Vec<DyadicInterval> {
        self.value.iter().map(|v| v.widen(&self.tail_bound)).collect()
    }

    pub fn as_gamma(&self) -> Gamma {
        Gamma::Enclosed(self.enclosure())
    }
}

/// Sums `Aq_k − p_k` for `k ≤ K`, with `p_k` the nearest integer vector
/// (ties to even).
pub fn construct_gamma(sys: &AffineSystem, ws: &WitnessSequence, k_terms: usize, budget: u32) -> Result<GammaWitness> {
    if ws.mode != WitnessMode::GammaGreedy {
        return Err(Error::invalid("construct_gamma needs a greedy sequence"));
    }
    if k_terms == 0 || k_terms > ws.len() {
        return Err(Error::invalid(format!("K = {k_terms} outside 1..={}", ws.len())));
    }
    let horizon = ws.entries[..k_terms].iter().map(|e| e.norm.clone()).max().unwrap_or_default();
    let ev = Evaluator::new(sys, &horizon, budget)?;
    let mut sums = vec![DyadicInterval::zero(); sys.m];
    let mut ps = Vec::new();
    for e in &ws.entries[..k_terms] {
        let rows = ev.rows_big(&e.q);
        let mut p = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            let pi = interval_nearest_int(r).ok_or_else(|| {
                Error::PrecisionExhausted(format!("nearest integer of a row of Aq at q = {:?}", e.q))
            })?;
            sums[i] = sums[i].add(&r.add_scalar(&-Rational::from_integer(pi.clone())));
            p.push(pi);
        }
        ps.push(p);
    }
    let value = sums
        .iter()
        .map(|s| {
            let f = s.lo().floor();
            s.add_scalar(&-f)
        })
        .collect();
    let next = ws.entries.get(k_terms).unwrap_or(&ws.entries[k_terms - 1]);
    let tail_bound = next.dist.hi() * Rational::from_integer(2.into());
    Ok(GammaWitness { k: k_terms, value, tail_bound, p: ps })
}

/// `ψ₀` with `ψ₀ᵐ` equal to the lower endpoint of `M_{l0}(t)ᵐ` for
/// `l0 ≤ t ≤ T`, constant below `l0` and zero past `T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiD {
    pub psi: ApproxFunction,
    /// The function vanishes at `T`, so it carries no information.
    pub degenerate: bool,
}

pub fn construct_psi_d(sys: &AffineSystem, l0: u64, t_max: u64, opts: &ScanOptions) -> Result<PsiD> {
    let table = min_table(sys, l0, t_max, opts)?;
    let mut steps: Vec<(BigInt, Rational)> = Vec::new();
    let mut cur: Option<Rational> = None;
    for row in &table.rows {
        let h = num_traits::pow(row.value.lo().clone(), sys.m);
        if let Some(c) = &cur {
            if *c != h {
                let last_t = row.t - 1;
                steps.push((BigInt::from(last_t), c.clone()));
            }
        }
        cur = Some(h);
    }
    let last = cur.unwrap_or_default();
    let degenerate = last.is_zero();
    steps.push((BigInt::from(t_max), last));
    steps.retain(|(_, h)| !h.is_zero());
    Ok(PsiD { psi: ApproxFunction::step(steps)?, degenerate })
}

/// A convergent-class step function built from a witness sequence, with the
/// three certificates checked on the finite data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiC {
    pub psi: ApproxFunction,
    pub decreasing: bool,
    /// `Σ_{q ≤ ‖q_J‖} qⁿ⁻¹ψ(q)ᵐ`, exact.
    pub finite_sum: Rational,
    /// `1 − 2^(−J)`.
    pub sum_bound: Rational,
    /// `⟨Aq_i−γ⟩ᵐ < ψ(‖q_i‖)ᵐ`, per witness.
    pub witness_ok: Vec<bool>,
}

impl PsiC {
    pub fn all_certified(&self) -> bool {
        self.decreasing && self.finite_sum <= self.sum_bound && self.witness_ok.iter().all(|&b| b)
    }
}

/// Block `j` of the result has `ψᵐ = 1/(2^j‖q_j‖ⁿ)` on `(‖q_{j−1}‖, ‖q_j‖]`.
pub fn construct_psi_c(ws: &WitnessSequence) -> Result<PsiC> {
    if !matches!(ws.mode, WitnessMode::CWitness { .. }) {
        return Err(Error::invalid("construct_psi_c needs a C-witness sequence"));
    }
    if ws.len() < 2 {
        return Err(Error::invalid("construct_psi_c needs at least two witnesses"));
    }
    if !ws.verify() {
        return Err(Error::invalid("witness sequence violates its defining inequalities"));
    }
    let (m, n) = (ws.m, ws.n);
    let steps: Vec<(BigInt, Rational)> = ws
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let h = two_pow_neg((i + 1) as u32) / Rational::from_integer(num_traits::pow(e.norm.clone(), n));
            (e.norm.clone(), h)
        })
        .collect();
    let psi = ApproxFunction::step(steps.clone())?;
    let prof = psi.compile(m)?;
    let decreasing = prof.is_non_increasing()?;
    let last = &ws.entries.last().expect("non-empty").norm;
    let sum = prof.weighted_range(&BigInt::zero(), Some(last), n)?;
    debug_assert!(sum.is_point());
    let witness_ok = ws
        .entries
        .iter()
        .zip(&steps)
        .map(|(e, (_, h))| &num_traits::pow(e.dist.hi().clone(), m) < h)
        .collect();
    Ok(PsiC {
        psi,
        decreasing,
        finite_sum: sum.hi().clone(),
        sum_bound: Rational::one() - two_pow_neg(ws.len() as u32),
        witness_ok,
    })
}

/// `φ` with `φᵐ = ψᵐ + ε/(2^j‖q_j‖ⁿ)` on `(‖q_{j−1}‖, ‖q_j‖]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseApprox {
    pub phi: ApproxFunction,
    pub witnesses: WitnessSequence,
    /// `d(φ, ψ)`, exact.
    pub distance: DyadicInterval,
    /// `⟨Aq_j−γ⟩ᵐ < φ(‖q_j‖)ᵐ`, per witness.
    pub witness_ok: Vec<bool>,
}

pub fn construct_phi_dense(
    psi: &ApproxFunction,
    sys: &AffineSystem,
    eps: &Rational,
    count: usize,
    cap: &BigInt,
    opts: &ScanOptions,
) -> Result<DenseApprox> {
    let ws = find_c_witness_sequence_scaled(sys, count, eps, cap, opts)?;
    let (m, n) = (sys.m, sys.n);
    let mut bumps = Vec::new();
    let mut prev = BigInt::zero();
    for (i, e) in ws.entries.iter().enumerate() {
        let add = eps * two_pow_neg((i + 1) as u32) / Rational::from_integer(num_traits::pow(e.norm.clone(), n));
        bumps.push((prev.clone(), e.norm.clone(), add));
        prev = e.norm.clone();
    }
    let phi = ApproxFunction::Bumped { base: Box::new(psi.clone()), bumps };
    let distance = metric_d(&phi, psi, m, n)?;
    let prof = phi.compile(m)?;
    let mut witness_ok = Vec::new();
    for e in &ws.entries {
        let v = prof.eval(&e.norm)?;
        witness_ok.push(&num_traits::pow(e.dist.hi().clone(), m) < v.lo());
    }
    Ok(DenseApprox { phi, witnesses: ws, distance, witness_ok })
}

/// `φ = ψ` below `N` and `0` from `N` on, with `d(φ,ψ) < ε`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExteriorTruncation {
    pub phi: ApproxFunction,
    pub cut: BigInt,
    pub distance: DyadicInterval,
    /// Solutions of `φ` with `‖q‖ < N`, when a system was supplied.
    pub solutions_below: Option<SolutionCount>,
}

pub fn truncate_to_exterior(
    psi: &ApproxFunction,
    m: usize,
    n: usize,
    eps: &Rational,
    sys: Option<(&AffineSystem, &ScanOptions)>,
) -> Result<ExteriorTruncation> {
    if !eps.is_positive() {
        return Err(Error::invalid("eps must be positive"));
    }
    let prof = psi.compile(m)?;
    let cut = match prof.support_end() {
        Some(end) => end + 1,
        None => find_cut(&prof, n, eps)?,
    };
    let phi = ApproxFunction::Truncated { base: Box::new(psi.clone()), cut: cut.clone() };
    let distance = metric_d(&phi, psi, m, n)?;
    let solutions_below = match sys {
        Some((s, opts)) => {
            let below = (&cut - BigInt::one()).to_u64().ok_or_else(|| Error::invalid("N too large to count below"))?;
            if below == 0 {
                Some(SolutionCount { lo: 0, hi: 0 })
            } else {
                Some(count_solutions(s, &phi, below, opts)?)
            }
        }
        None => None,
    };
    Ok(ExteriorTruncation { phi, cut, distance, solutions_below })
}

/// Least `N` whose certified tail `Σ_{q≥N} qⁿ⁻¹ψ(q)ᵐ` is below `ε`.
fn find_cut(prof: &Profile, n: usize, eps: &Rational) -> Result<BigInt> {
    let tail_ok = |cut: &BigInt| -> Result<bool> {
        match prof.weighted_range(&(cut - 1), None, n) {
            Ok(t) => Ok(t.hi() < eps),
            Err(Error::DivergentTail(msg)) => Err(Error::NoSuchN(msg)),
            Err(e) => Err(e),
        }
    };
    let mut hi = BigInt::one();
    let mut steps = 0;
    while !tail_ok(&hi)? {
        hi <<= 1usize;
        steps += 1;
        if steps > 4096 {
            return Err(Error::NoSuchN("tail never drops below eps".into()));
        }
    }
    let mut lo = &hi >> 1usize;
    if lo.is_zero() {
        return Ok(hi);
    }
    // tail_ok(lo) is false, tail_ok(hi) is true.
    while &hi - &lo > BigInt::one() {
        let mid: BigInt = (&lo + &hi) >> 1usize;
        if tail_ok(&mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A certified solution of `⟨Aq−γ⟩ < ψ(‖q‖)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub q: Vec<BigInt>,
    pub norm: BigInt,
    pub dist: DyadicInterval,
    /// Lower bound of `ψ(‖q‖)ᵐ − ⟨Aq−γ⟩ᵐ`.
    pub margin: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallRadius {
    pub delta: Rational,
    pub solutions: Vec<Solution>,
}

/// The first `k` certified solutions (by norm, then lexicographically) and
/// `δ = min_i ‖q_i‖ⁿ⁻¹(ψ(‖q_i‖)ᵐ − upper⟨Aq_i−γ⟩ᵐ)`: any `φ` with
/// `d(φ,ψ) < δ` keeps all of them.
pub fn ball_radius_ck(psi: &ApproxFunction, sys: &AffineSystem, k: usize, cap: u64, opts: &ScanOptions) -> Result<BallRadius> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let (m, n) = (sys.m, sys.n);
    let prof = psi.compile(m)?;
    let ev = Evaluator::new(sys, &BigInt::from(cap), opts.budget)?;
    let den_m = Rational::from_integer(num_traits::pow(ev.den().clone(), m));
    let mut sols: Vec<Solution> = Vec::new();
    let mut err: Option<Error> = None;
    ev.for_each_shell(1, cap, false, opts.workers, |t, pts| {
        let tb = BigInt::from(t);
        let bound = match prof.eval(&tb) {
            Ok(b) => b,
            Err(e) => {
                err = Some(e);
                return ControlFlow::Break(());
            }
        };
        for p in pts {
            let d_m = Rational::from_integer(num_traits::pow(p.hi.clone(), m)) / &den_m;
            if &d_m < bound.lo() {
                let q: Vec<BigInt> = p.q.iter().map(|&x| BigInt::from(x)).collect();
                sols.push(Solution {
                    q,
                    norm: tb.clone(),
                    dist: ev.to_interval(&p.lo, &p.hi),
                    margin: bound.lo() - d_m,
                });
                if sols.len() == k {
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    if sols.len() < k {
        return Err(Error::NotFoundWithinCap {
            cap: cap.to_string(),
            deepest: sols.len(),
            blocking: format!("only {} certified solutions with norm <= {cap}", sols.len()),
        });
    }
    let delta = sols
        .iter()
        .map(|s| Rational::from_integer(num_traits::pow(s.norm.clone(), n - 1)) * &s.margin)
        .min()
        .expect("k >= 1");
    Ok(BallRadius { delta, solutions: sols })
}

/// `δ` for given solution data, the closed form used by [`ball_radius_ck`].
pub fn radius_from_margins(items: &[(BigInt, Rational)], n: usize) -> Option<Rational> {
    items
        .iter()
        .map(|(norm, margin)| Rational::from_integer(num_traits::pow(norm.clone(), n - 1)) * margin)
        .min()
}

/// Pointwise maximum with its series compared against the sum of the
/// individual series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergedPsi {
    pub psi: ApproxFunction,
    pub merged_sum: DyadicInterval,
    pub sum_of_sums: DyadicInterval,
    /// `merged_sum ≤ sum_of_sums` is certified.
    pub certified: bool,
}

pub fn merge_common_psi(list: &[ApproxFunction], m: usize, n: usize) -> Result<MergedPsi> {
    if list.is_empty() {
        return Err(Error::invalid("nothing to merge"));
    }
    let series = |f: &ApproxFunction| -> Result<DyadicInterval> {
        f.compile(m)?.weighted_range(&BigInt::zero(), None, n)
    };
    let sums: Vec<DyadicInterval> = list.iter().map(series).collect::<Result<_>>()?;
    let sum_of_sums = sums.iter().fold(DyadicInterval::zero(), |a, b| a.add(b));
    if list.len() == 1 {
        return Ok(MergedPsi {
            psi: list[0].clone(),
            merged_sum: sums[0].clone(),
            sum_of_sums,
            certified: true,
        });
    }
    let psi = ApproxFunction::Max(list.to_vec());
    let merged_sum = series(&psi)?;
    let certified = merged_sum.hi() <= sum_of_sums.lo();
    Ok(MergedPsi { psi, merged_sum, sum_of_sums, certified })
}

/// `⟨Aq−γ⟩ᵐ < ψ(‖q‖)ᵐ` for each entry.
pub fn still_solutions(psi: &ApproxFunction, entries: &[WitnessEntry], m: usize) -> Result<Vec<bool>> {
    let prof = psi.compile(m)?;
    entries
        .iter()
        .map(|e| Ok(&num_traits::pow(e.dist.hi().clone(), m) < prof.eval(&e.norm)?.lo()))
        .collect()
}

/// The finite part `2ᵐ·c₂·Σ_{i=from}^{J−1} ‖q_{i+1}‖ⁿ⟨Aq_{i+1}⟩ᵐ` of the bound
/// on the series of the constructed target, with `c₂` the largest ratio
/// `Σ_{t=a}^{b} tⁿ⁻¹ / bⁿ` over the blocks (`1` when `n = 1`). Uses lower
/// endpoints of the distances.
pub fn gamma_series_bound(ws: &WitnessSequence, from: usize) -> Rational {
    let (m, n) = (ws.m, ws.n);
    let mut c2 = Rational::one();
    if n > 1 {
        for w in ws.entries.windows(2) {
            let (a, b) = (&w[0].norm, &w[1].norm);
            let s = power_sum(b, (n - 1) as u32) - power_sum(a, (n - 1) as u32);
            let r = Rational::new(s, num_traits::pow(b.clone(), n));
            if r > c2 {
                c2 = r;
            }
        }
    }
    let mut total = Rational::zero();
    for i in from..ws.len().saturating_sub(1) {
        let next = &ws.entries[i + 1];
        total += weighted_of(&next.norm, &next.dist, m, n).lo().clone();
    }
    Rational::from_integer(num_traits::pow(BigInt::from(2), m)) * c2 * total
}

/// Distance enclosure of the constructed target at `q`, used to recheck
/// that partial sums `q_1+⋯+q_i` approximate it.
pub fn gamma_dist_at(sys: &AffineSystem, gw: &GammaWitness, q: &[BigInt], budget: u32) -> Result<DyadicInterval> {
    let s = sys.with_gamma(gw.as_gamma())?;
    let ev = Evaluator::new(&s, &sup_norm(q), budget)?;
    Ok(ev.eval_big(q).interval)
}

/// `⟨x⟩` enclosure helper re-exported for construction checks.
pub fn dist_of(iv: &DyadicInterval) -> DyadicInterval {
    interval_dist(iv).interval
}
