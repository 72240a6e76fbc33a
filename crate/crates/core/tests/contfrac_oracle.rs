//! Continued fractions against truncation oracles and brute-force scans.

mod common;

use dioph::contfrac::ContinuedFraction;
use dioph::exactnum::{compare, rat, Cmp, DyadicInterval, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use proptest::prelude::*;

fn period() -> impl Strategy<Value = Vec<u64>> {
    proptest::collection::vec(1u64..=9, 1..=8)
}

/// First `len` quotients of the periodic expansion.
fn unrolled(p: &[u64], len: usize) -> Vec<u64> {
    p.iter().cycle().take(len).copied().collect()
}

/// `⟨x⟩` of an exact rational.
fn dist(x: &Rational) -> Rational {
    let f = x - x.floor();
    f.clone().min(Rational::one() - f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convergents_follow_the_recurrence(p in period()) {
        let cf = ContinuedFraction::periodic(&p).unwrap();
        let a = unrolled(&p, 30);
        let want = common::denominators(&a);
        let table = cf.convergents(30).unwrap();
        for row in &table.rows[1..] {
            prop_assert_eq!(&row.q, &want[row.k]);
        }
        for k in 1..30 {
            let (pk, qk) = cf.convergent(k).unwrap();
            let exact = common::cf_value(&a[..k]);
            prop_assert_eq!(Rational::new(pk, qk), exact);
        }
    }

    #[test]
    fn qk_dist_encloses_the_truncation_oracle(p in period(), k in 1usize..=20) {
        let cf = ContinuedFraction::periodic(&p).unwrap();
        let a = unrolled(&p, k + 40);
        let q = common::denominators(&a);
        // |α − x_N| < 1/q_N², so ⟨q_k α⟩ is within q_k/q_N² of ⟨q_k x_N⟩.
        let x = common::cf_value(&a);
        let err = Rational::new(q[k].clone(), &q[k + 40] * &q[k + 40]);
        let centre = dist(&(&x * Rational::from_integer(q[k].clone())));
        let oracle = DyadicInterval::new(&centre - &err, &centre + &err).unwrap();
        let got = cf.qk_dist(k).unwrap();
        prop_assert!(compare(&got, &oracle) == Cmp::Overlap);
        let lo = Rational::new(BigInt::one(), &q[k + 1] + &q[k]);
        let hi = Rational::new(BigInt::one(), q[k + 1].clone());
        prop_assert!(got.strictly_inside(&lo, &hi));
    }

    #[test]
    fn distances_decrease_strictly(p in period()) {
        let cf = ContinuedFraction::periodic(&p).unwrap();
        for k in 1..25 {
            let a = cf.qk_dist(k).unwrap();
            let b = cf.qk_dist(k + 1).unwrap();
            prop_assert!(compare(&b, &a) == Cmp::Less, "k = {}", k);
        }
    }

    #[test]
    fn best_approximation_matches_exhaustive_scan(p in period()) {
        let cf = ContinuedFraction::periodic(&p).unwrap();
        let a = unrolled(&p, 40);
        let x = common::cf_value(&a);
        let mut k = 1;
        while cf.q(k + 1).unwrap() <= BigInt::from(3000) {
            let qk = cf.q(k).unwrap();
            let next = cf.q(k + 1).unwrap().to_u64().unwrap();
            let dk = dist(&(&x * Rational::from_integer(qk.clone())));
            let qk_u = qk.to_u64().unwrap();
            let beaten = (1..next).any(|n| n != qk_u && dist(&(&x * Rational::from_integer(n.into()))) <= dk);
            prop_assert!(!beaten, "k = {}", k);
            prop_assert!(cf.best_approx_check(k, &BigInt::from(next - 1)).unwrap());
            k += 1;
        }
    }

    #[test]
    fn refinement_nests(p in period(), bits in 8u32..=200) {
        let cf = ContinuedFraction::periodic(&p).unwrap();
        let coarse = cf.refine(bits).unwrap();
        let fine = cf.refine(bits + 1).unwrap();
        prop_assert!(fine.is_subset_of(&coarse));
        let x = common::cf_value(&unrolled(&p, 200));
        let (pk, qk) = cf.convergent(20).unwrap();
        let (pk1, qk1) = cf.convergent(21).unwrap();
        let (u, v) = (Rational::new(pk, qk), Rational::new(pk1, qk1));
        prop_assert!((x.clone() - &u).signum() != (x - &v).signum());
    }
}

#[test]
fn golden_sandwich_example() {
    let g = ContinuedFraction::golden();
    assert_eq!(g.q(5).unwrap(), BigInt::from(8));
    assert!(g.qk_dist(5).unwrap().strictly_inside(&rat(1, 21), &rat(1, 13)));
}

#[test]
fn exponent_windows() {
    let g = ContinuedFraction::golden().irrationality_exponent_estimate(30).unwrap();
    assert!(g.window_limsup.lo() >= &rat(1, 1) && g.window_limsup.hi() < &rat(11, 10));
    let growth = ContinuedFraction::parse("growth:[2]").unwrap().irrationality_exponent_estimate(12).unwrap();
    assert!((growth.window_limsup.lo() - rat(2, 1)).abs() < rat(1, 10));
    // Σ 10^(−k!) reaches the ratio 4 once the window holds the jump from
    // q ≈ 10^24 to q ≈ 10^96, and 5 at the next jump.
    let l = ContinuedFraction::liouville(10).unwrap();
    let e16 = l.irrationality_exponent_estimate(16).unwrap();
    assert!(e16.window_limsup.lo() >= &rat(39, 10));
    let e32 = l.irrationality_exponent_estimate(32).unwrap();
    assert!(e32.window_limsup.lo() >= &rat(49, 10));
    // The first five convergents interleave small quotients.
    let e5 = l.irrationality_exponent_estimate(5).unwrap();
    assert!(e5.window_limsup.hi() < &rat(13, 10));
}

#[test]
fn liouville_truncations_approximate_fast() {
    // Truncation denominators 10^{k!}: ⟨10^{k!}α⟩ < 10^{-(k+1)!+k!+1}.
    let l = ContinuedFraction::liouville(10).unwrap();
    let alpha = l.refine(4000).unwrap();
    let mut fact = 1u32;
    for k in 1..=5u32 {
        fact *= k;
        let q = Rational::from_integer(BigInt::from(10).pow(fact));
        let d = dioph::exactnum::interval_dist(&alpha.scale(&q)).interval;
        let bound = Rational::new(BigInt::from(10), BigInt::from(10).pow(fact * (k + 1) - fact));
        assert!(d.hi() < &bound, "k = {k}");
    }
}
