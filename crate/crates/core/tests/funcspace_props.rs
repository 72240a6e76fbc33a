//! Approximation functions: exact sums, the series metric and solution counts.

mod common;

use dioph::exactnum::{compare, rat, Cmp, DyadicInterval, Rational};
use dioph::funcspace::{
    classify_cd, count_solutions, metric_d, power_range_sum, power_sum, series_value, ApproxFunction, ClassTag,
};
use dioph::lattice::ScanOptions;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use common::RawSystem;

/// Steps as `(break, height)` with integer breaks and heights `h/80`,
/// non-increasing.
fn steps() -> impl Strategy<Value = Vec<(u64, i64)>> {
    (1usize..=4)
        .prop_flat_map(|k| (proptest::collection::vec(1u64..=6, k), proptest::collection::vec(1i64..=40, k)))
        .prop_map(|(gaps, mut hs)| {
            hs.sort_unstable_by(|a, b| b.cmp(a));
            let mut b = 0;
            gaps.into_iter()
                .zip(hs)
                .map(|(g, h)| {
                    b += g;
                    (b, h)
                })
                .collect()
        })
}

fn to_psi(s: &[(u64, i64)]) -> ApproxFunction {
    ApproxFunction::step(s.iter().map(|&(b, h)| (BigInt::from(b), rat(h, 80))).collect()).unwrap()
}

/// `ψ(q)ᵐ` of a step list, read off directly.
fn height(s: &[(u64, i64)], q: u64) -> Rational {
    s.iter().find(|&&(b, _)| q <= b).map_or(Rational::zero(), |&(_, h)| rat(h, 80))
}

/// `c·q^(−a)` with `a > 2`, so every difference series converges for `n ≤ 2`.
fn power_law() -> impl Strategy<Value = ApproxFunction> {
    (1i64..=8, 1i64..=4, 1i64..=12, 1i64..=4)
        .prop_map(|(c, cd, a, ad)| ApproxFunction::power_law(rat(c, cd), rat(2, 1) + rat(a, ad)).unwrap())
}

fn contains(iv: &DyadicInterval, x: &Rational) -> bool {
    iv.lo() <= x && x <= iv.hi()
}

/// Box oracle for the number of `q ≠ 0`, `‖q‖ ≤ Q`, with `⟨Aq−γ⟩ᵐ < ψ(‖q‖)ᵐ`.
fn naive_count(raw: &RawSystem, s: &[(u64, i64)], q_max: i64) -> u64 {
    let mut count = 0;
    for q in common::box_points(raw.n, q_max) {
        let t = common::sup_norm(&q);
        if t == 0 {
            continue;
        }
        let (num, den) = common::point_dist(raw, &q);
        let d = Rational::new(BigInt::from(num), BigInt::from(den));
        if num_traits::pow(d, raw.m) < height(s, t as u64) {
            count += 1;
        }
    }
    count
}

fn raw_system() -> impl Strategy<Value = RawSystem> {
    let entry = (1i64..=20).prop_flat_map(|q| (0..q, Just(q)));
    (1usize..=2, 1usize..=2).prop_flat_map(move |(m, n)| {
        (
            proptest::collection::vec(proptest::collection::vec(entry.clone(), n), m),
            proptest::collection::vec(entry.clone(), m),
        )
            .prop_map(move |(a, gamma)| RawSystem { m, n, a, gamma })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_metric_matches_the_direct_sum(a in steps(), b in steps(), n in 1usize..=3, m in 1usize..=2) {
        let end = a.last().unwrap().0.max(b.last().unwrap().0);
        let mut want = Rational::zero();
        for q in 1..=end {
            let w = Rational::from_integer(BigInt::from(q).pow((n - 1) as u32));
            want += w * (height(&a, q) - height(&b, q)).abs();
        }
        let got = metric_d(&to_psi(&a), &to_psi(&b), m, n).unwrap();
        prop_assert_eq!(got, DyadicInterval::point(want));
    }

    #[test]
    fn metric_is_symmetric_and_vanishes_on_the_diagonal(f in power_law(), g in power_law(), n in 1usize..=2) {
        let fg = metric_d(&f, &g, 1, n).unwrap();
        let gf = metric_d(&g, &f, 1, n).unwrap();
        prop_assert!(compare(&fg, &gf) == Cmp::Overlap);
        prop_assert_eq!(metric_d(&f, &f, 1, n).unwrap(), DyadicInterval::zero());
    }

    #[test]
    fn metric_triangle_inequality(f in power_law(), g in power_law(), h in power_law()) {
        let fh = metric_d(&f, &h, 1, 1).unwrap();
        let via = metric_d(&f, &g, 1, 1).unwrap().add(&metric_d(&g, &h, 1, 1).unwrap());
        prop_assert!(fh.lo() <= via.hi());
    }

    #[test]
    fn inverse_square_sums_are_enclosed(lo in 0u64..200, len in 0u64..400) {
        let hi = lo + len;
        let want: Rational = (lo + 1..=hi).map(|q| rat(1, (q * q) as i64)).sum();
        let got = power_range_sum(&BigInt::from(lo), Some(&BigInt::from(hi)), &rat(2, 1)).unwrap();
        prop_assert!(contains(&got, &want), "({lo}, {hi}]: {got:?}");
    }

    #[test]
    fn integer_power_sums_are_exact(n in 0u64..300, k in 0u32..=5) {
        let want: BigInt = (1..=n).map(|q| BigInt::from(q).pow(k)).sum();
        prop_assert_eq!(power_sum(&BigInt::from(n), k), want);
    }

    #[test]
    fn step_counts_match_the_box_oracle(raw in raw_system(), s in steps(), q_max in 1i64..=8) {
        let got = count_solutions(&raw.to_system(), &to_psi(&s), q_max as u64, &ScanOptions::default()).unwrap();
        let want = naive_count(&raw, &s, q_max);
        prop_assert_eq!((got.lo, got.hi), (want, want));
    }

    #[test]
    fn counts_grow_with_the_box_and_with_psi(raw in raw_system(), q_max in 1u64..=8, c in 1i64..=6) {
        let sys = raw.to_system();
        let opts = ScanOptions::default();
        let small = ApproxFunction::power_law(rat(c, 10), rat(1, 1)).unwrap();
        let big = ApproxFunction::power_law(rat(c + 1, 10), rat(1, 1)).unwrap();
        let a = count_solutions(&sys, &small, q_max, &opts).unwrap();
        let b = count_solutions(&sys, &small, q_max + 1, &opts).unwrap();
        let d = count_solutions(&sys, &big, q_max, &opts).unwrap();
        prop_assert!(a.lo <= a.hi);
        prop_assert!(a.lo <= b.lo && a.hi <= b.hi);
        prop_assert!(a.lo <= d.lo && a.hi <= d.hi);
    }
}

#[test]
fn classification_examples() {
    let cases = [
        ("pow:1,1", 1, 1, ClassTag::InD),
        ("pow:1,2", 1, 1, ClassTag::InC),
        ("pow:1,1/2", 2, 1, ClassTag::InD),
        ("pow:1,3/4", 2, 1, ClassTag::InC),
        ("pow:1,1", 1, 2, ClassTag::InD),
        ("pow:1,3/2", 2, 2, ClassTag::InC),
        ("pow:1,0", 1, 1, ClassTag::InD),
        ("step:[(3,1/4),(10,1/9)]", 1, 3, ClassTag::InC),
        ("steptail:[(5,1/2)]|pow:1,1", 1, 1, ClassTag::InD),
        ("steptail:[(5,1/2)]|pow:1,3", 1, 2, ClassTag::InC),
    ];
    for (s, m, n, want) in cases {
        let c = classify_cd(&ApproxFunction::parse(s).unwrap(), m, n).unwrap();
        assert_eq!(c.tag, want, "{s} m={m} n={n}");
        assert_eq!(c.tail.is_some(), want == ClassTag::InC);
    }
}

#[test]
fn basel_sum_is_enclosed() {
    // Σ 1/q² = π²/6.
    let pi2_6 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    for t in [10u64, 100, 5000] {
        let v = series_value(&ApproxFunction::parse("pow:1,2").unwrap(), 1, 1, &BigInt::from(t)).unwrap();
        let total = v.total();
        assert!(common::to_f64(total.lo()) <= pi2_6 + 1e-12 && common::to_f64(total.hi()) >= pi2_6 - 1e-12, "T = {t}");
        assert!(v.tail.lo().is_positive());
    }
}

#[test]
fn step_partial_sums_are_exact() {
    let psi = ApproxFunction::parse("step:[(3,1/4),(10,1/9)]").unwrap();
    let v = series_value(&psi, 1, 2, &BigInt::from(6)).unwrap();
    // (1+2+3)/4 + (4+5+6)/9.
    assert_eq!(v.partial, DyadicInterval::point(rat(3, 2) + rat(15, 9)));
    assert_eq!(v.tail, DyadicInterval::point(rat(7 + 8 + 9 + 10, 9)));
}
