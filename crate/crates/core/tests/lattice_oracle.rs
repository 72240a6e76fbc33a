//! Lattice scans against box enumeration, plus the scan invariants.

mod common;

use dioph::exactnum::{rat, DyadicInterval, ExactReal, Rational};
use dioph::funcspace::ApproxFunction;
use dioph::lattice::{
    badness_profile, build_trivial_member, dirichlet_test, min_table, record_minima, shell_points, singularity_scan,
    AffineSystem, Gamma, ScanOptions, Verdict,
};
use num_bigint::BigInt;
use proptest::prelude::*;

use common::RawSystem;

fn raw_system(m: usize, n: usize) -> impl Strategy<Value = RawSystem> {
    let entry = (1i64..=30).prop_flat_map(|q| (0..q, Just(q)));
    (
        proptest::collection::vec(proptest::collection::vec(entry.clone(), n), m),
        proptest::collection::vec(entry, m),
    )
        .prop_map(move |(a, gamma)| RawSystem { m, n, a, gamma })
}

fn any_raw_system() -> impl Strategy<Value = RawSystem> {
    (1usize..=2, 1usize..=2).prop_flat_map(|(m, n)| raw_system(m, n))
}

fn one_dim(alpha: &str) -> AffineSystem {
    AffineSystem::one_dim(ExactReal::parse(alpha).unwrap(), ExactReal::zero()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_table_matches_box_oracle_for_any_l(raw in any_raw_system(), l in 1u64..=6, extra in 0u64..=6) {
        let t_max = l + extra;
        let table = min_table(&raw.to_system(), l, t_max, &ScanOptions::default()).unwrap();
        let naive = common::naive_min_table(&raw, l as i64, t_max as i64);
        prop_assert_eq!(table.rows.len(), naive.len());
        for (row, (value, q)) in table.rows.iter().zip(&naive) {
            prop_assert_eq!(&row.value, &DyadicInterval::point(value.clone()));
            prop_assert_eq!(&row.argmin, q);
        }
    }

    #[test]
    fn minima_monotone_in_t_and_l(raw in any_raw_system(), t_max in 3u64..=10) {
        let sys = raw.to_system();
        let opts = ScanOptions::default();
        let tables: Vec<_> = (1..=3).map(|l| min_table(&sys, l, t_max, &opts).unwrap()).collect();
        for table in &tables {
            for w in table.rows.windows(2) {
                prop_assert!(w[1].value.hi() <= w[0].value.hi());
            }
        }
        for pair in tables.windows(2) {
            for t in pair[1].l..=t_max {
                prop_assert!(pair[0].at(t).unwrap().value.lo() <= pair[1].at(t).unwrap().value.lo());
            }
        }
    }

    #[test]
    fn records_are_the_distinct_values_of_the_minimum(raw in any_raw_system(), t_max in 1u64..=12) {
        let sys = raw.to_system();
        let opts = ScanOptions::default();
        let table = min_table(&sys, 1, t_max, &opts).unwrap();
        let mut distinct: Vec<(u64, DyadicInterval)> = Vec::new();
        for row in &table.rows {
            if distinct.last().map_or(true, |(_, v)| v != &row.value) {
                distinct.push((row.t, row.value.clone()));
            }
        }
        let rec = record_minima(&sys, t_max, &opts).unwrap();
        let got: Vec<(u64, DyadicInterval)> = rec.entries.iter().map(|r| (r.t, r.value.clone())).collect();
        prop_assert_eq!(got, distinct);
        for r in &rec.entries {
            prop_assert_eq!(common::sup_norm(&r.q), r.t as i64);
        }
    }

    #[test]
    fn worker_count_does_not_change_rows(raw in any_raw_system(), workers in 2usize..=6) {
        let sys = raw.to_system();
        let serial = min_table(&sys, 1, 9, &ScanOptions::default()).unwrap();
        let parallel = min_table(&sys, 1, 9, &ScanOptions { workers, ..ScanOptions::default() }).unwrap();
        prop_assert_eq!(serial, parallel);
    }
}

#[test]
fn shell_counts_sum_to_the_box() {
    for n in 1..=3usize {
        let mut total = 0usize;
        for t in 1..=6u64 {
            let shell = shell_points(n, t);
            assert!(shell.iter().all(|q| common::sup_norm(q) == t as i64));
            let mut sorted = shell.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted, shell, "lexicographic and duplicate-free");
            total += shell.len();
        }
        assert_eq!(total, 13usize.pow(n as u32) - 1);
    }
}

#[test]
fn golden_records_are_fibonacci_and_argmins_attain_them() {
    let rec = record_minima(&one_dim("golden"), 100, &ScanOptions::default()).unwrap();
    let ts: Vec<u64> = rec.entries.iter().map(|r| r.t).collect();
    assert_eq!(ts, vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
    for w in rec.entries.windows(2) {
        assert!(w[1].value.hi() < w[0].value.lo());
    }
}

#[test]
fn rational_zero_minima() {
    let opts = ScanOptions::default();
    let third = min_table(&one_dim("1/3"), 1, 10, &opts).unwrap();
    assert_eq!(third.at(2).unwrap().value, DyadicInterval::point(rat(1, 3)));
    assert!((3..=10).all(|t| third.at(t).unwrap().value == DyadicInterval::zero()));
    let rec = record_minima(&one_dim("1/3"), 10, &opts).unwrap();
    assert_eq!(rec.entries.last().unwrap().t, 3);
    let half = badness_profile(&one_dim("1/2"), 20, &opts).unwrap();
    assert!(half.rows.iter().filter(|r| r.t >= 2).all(|r| r.value == DyadicInterval::zero()));
}

#[test]
fn orbit_target_makes_badness_vanish() {
    let golden = one_dim("golden");
    let shifted = golden.with_gamma(Gamma::Orbit(vec![BigInt::from(7)])).unwrap();
    let bad = badness_profile(&shifted, 50, &ScanOptions::default()).unwrap();
    assert!(bad.rows.iter().filter(|r| r.t >= 7).all(|r| r.value.lo() == &Rational::from_integer(0.into())));
    assert!(bad.rows.iter().filter(|r| r.t < 7).all(|r| r.value.lo() > &Rational::from_integer(0.into())));
}

#[test]
fn trivial_members_have_exact_zeros() {
    let cases: [(Vec<&str>, usize, Vec<i64>); 3] = [
        (vec!["1/2"], 2, vec![1, 5]),
        (vec!["0", "0"], 2, vec![1, 0]),
        (vec!["1/3", "2/3"], 3, vec![1, 7, 0]),
    ];
    for (gamma, n, q) in cases {
        let g: Vec<ExactReal> = gamma.iter().map(|s| ExactReal::parse(s).unwrap()).collect();
        let sys = build_trivial_member(g, n).unwrap();
        let raw = RawSystem {
            m: sys.m,
            n,
            a: sys
                .a
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|x| {
                            let r = x.as_rational().unwrap();
                            (r.numer().try_into().unwrap(), r.denom().try_into().unwrap())
                        })
                        .collect()
                })
                .collect(),
            gamma: gamma
                .iter()
                .map(|s| {
                    let r = dioph::exactnum::parse_rational(s).unwrap();
                    (r.numer().try_into().unwrap(), r.denom().try_into().unwrap())
                })
                .collect(),
        };
        assert_eq!(common::point_dist(&raw, &q).0, 0, "gamma {gamma:?}, q {q:?}");
        let table = min_table(&sys, 1, 6, &ScanOptions::default()).unwrap();
        assert!(table.rows.iter().all(|r| r.value == DyadicInterval::zero()));
    }
    assert!(build_trivial_member(vec![ExactReal::zero()], 1).is_err());
}

#[test]
fn dirichlet_examples() {
    let opts = ScanOptions::default();
    let ts: Vec<u64> = vec![1, 10, 100, 1000];
    let trivial = build_trivial_member(vec![ExactReal::parse("1/2").unwrap()], 2).unwrap();
    let tiny = ApproxFunction::parse("pow:1/1000,3").unwrap();
    assert!(dirichlet_test(&trivial, &tiny, &ts, &opts).unwrap().iter().all(|(_, v)| *v == Verdict::True));
    let one = ApproxFunction::parse("pow:1,0").unwrap();
    assert!(dirichlet_test(&one_dim("golden"), &one, &ts, &opts).unwrap().iter().all(|(_, v)| *v == Verdict::True));
    // q⟨qα⟩ ≥ 0.38 for golden, so ⟨qα⟩ < 1/(10T) with q ≤ T never holds.
    let psi = ApproxFunction::parse("pow:1/10,1").unwrap();
    let v = dirichlet_test(&one_dim("golden"), &psi, &(1..=1000).step_by(37).collect::<Vec<_>>(), &opts).unwrap();
    assert!(v.iter().all(|(_, v)| *v == Verdict::False));
}

#[test]
fn singularity_scan_examples() {
    let opts = ScanOptions::default();
    let trivial = build_trivial_member(vec![ExactReal::parse("1/3").unwrap()], 2).unwrap();
    let rows = singularity_scan(&trivial, &rat(1, 1), &[rat(1, 10), rat(1, 1000)], 200, &opts).unwrap();
    assert!(rows.iter().all(|r| r.fails == 0 && r.undecided == 0));
    let rows = singularity_scan(&one_dim("golden"), &rat(0, 1), &[rat(1, 1)], 200, &opts).unwrap();
    assert!(rows.iter().all(|r| r.fails == 0));
    let rows = singularity_scan(&one_dim("golden"), &rat(1, 1), &[rat(1, 10)], 500, &opts).unwrap();
    assert!(rows[0].fails > 0 && rows[0].failing.iter().any(|&t| t > 250));
}
