//! Independent oracles and generators shared by the integration suites.
//!
//! Nothing here calls into the library's evaluation code: distances are
//! computed row by row with `i128` fractions over each row's own common
//! denominator, and lattice points are enumerated as a full box.

#![allow(dead_code)]

use dioph::exactnum::{ExactReal, Rational};
use dioph::lattice::{AffineSystem, Gamma};
use num_bigint::BigInt;
use num_integer::Integer;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// A rational system as plain `(num, den)` pairs.
#[derive(Clone, Debug)]
pub struct RawSystem {
    pub m: usize,
    pub n: usize,
    pub a: Vec<Vec<(i64, i64)>>,
    pub gamma: Vec<(i64, i64)>,
}

impl RawSystem {
    pub fn to_system(&self) -> AffineSystem {
        let lit = |&(p, q): &(i64, i64)| ExactReal::Rational(Rational::new(p.into(), q.into()));
        let a = self.a.iter().map(|row| row.iter().map(lit).collect()).collect();
        let gamma = Gamma::Values(self.gamma.iter().map(lit).collect());
        AffineSystem::new(self.m, self.n, a, gamma).expect("valid system")
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry(r: &mut ChaCha8Rng, max_den: i64) -> (i64, i64) {
    let q = r.gen_range(1..=max_den);
    (r.gen_range(0..q), q)
}

/// Random system with `m, n` drawn from the given ranges and entries `p/q`,
/// `1 ≤ q ≤ max_den`, `0 ≤ p < q`.
pub fn random_system(r: &mut ChaCha8Rng, ms: &[usize], ns: &[usize], max_den: i64) -> RawSystem {
    let m = ms[r.gen_range(0..ms.len())];
    let n = ns[r.gen_range(0..ns.len())];
    let a = (0..m).map(|_| (0..n).map(|_| entry(r, max_den)).collect()).collect();
    let gamma = (0..m).map(|_| entry(r, max_den)).collect();
    RawSystem { m, n, a, gamma }
}

/// The criterion-1 corpus: 100 systems, `m, n ∈ {1,2,3}`, denominators ≤ 50.
pub fn corpus() -> Vec<RawSystem> {
    let mut r = rng(0x5eed_0001);
    (0..100).map(|_| random_system(&mut r, &[1, 2, 3], &[1, 2, 3], 50)).collect()
}

/// `⟨x⟩` for `x = num/den`, as a reduced pair.
fn frac_dist(num: i128, den: i128) -> (i128, i128) {
    let r = num.rem_euclid(den);
    let d = r.min(den - r);
    let g = d.gcd(&den);
    (d / g, den / g)
}

fn less(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

/// `⟨Aq−γ⟩` under the sup norm.
pub fn point_dist(sys: &RawSystem, q: &[i64]) -> (i128, i128) {
    let mut worst = (0i128, 1i128);
    for (row, g) in sys.a.iter().zip(&sys.gamma) {
        let den = row.iter().fold(g.1 as i128, |l, &(_, d)| l.lcm(&(d as i128)));
        let mut num = -(g.0 as i128) * (den / g.1 as i128);
        for (&(p, d), &qj) in row.iter().zip(q) {
            num += p as i128 * (den / d as i128) * qj as i128;
        }
        let d = frac_dist(num, den);
        if less(worst, d) {
            worst = d;
        }
    }
    worst
}

/// Every `q` with `‖q‖ ≤ t_max`, lexicographic, including `0`.
pub fn box_points(n: usize, t_max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-t_max..=t_max).map(move |x| {
                    let mut v = p.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

pub fn sup_norm(q: &[i64]) -> i64 {
    q.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// Rows `t = l..=t_max` of `M_l(t)` with the lexicographically smallest
/// minimiser, from one pass over the full box.
pub fn naive_min_table(sys: &RawSystem, l: i64, t_max: i64) -> Vec<(Rational, Vec<i64>)> {
    let mut best: Option<((i128, i128), Vec<i64>)> = None;
    let mut per_norm: Vec<Option<((i128, i128), Vec<i64>)>> = vec![None; (t_max + 1) as usize];
    for q in box_points(sys.n, t_max) {
        let t = sup_norm(&q);
        if t < l {
            continue;
        }
        let d = point_dist(sys, &q);
        let slot = &mut per_norm[t as usize];
        // Box order is lexicographic, so only strict improvements replace.
        if slot.as_ref().map_or(true, |(b, _)| less(d, *b)) {
            *slot = Some((d, q));
        }
    }
    let mut out = Vec::new();
    for t in l..=t_max {
        if let Some((d, q)) = per_norm[t as usize].take() {
            best = match best {
                None => Some((d, q)),
                Some((b, bq)) => {
                    if less(d, b) || (!less(b, d) && q < bq) {
                        Some((d, q))
                    } else {
                        Some((b, bq))
                    }
                }
            };
        }
        let (d, q) = best.clone().expect("non-empty shell");
        out.push((Rational::new(BigInt::from(d.0), BigInt::from(d.1)), q));
    }
    out
}

/// Golden-ratio convergent `F_k / F_{k+1}` with `F_{k+1}` past `10^40`,
/// together with the error bound `1/F_{k+1}²`.
pub fn golden_rational() -> (Rational, Rational) {
    let (mut a, mut b) = (BigInt::from(1), BigInt::from(1));
    let target = BigInt::from(10).pow(40);
    while b < target {
        let c = &a + &b;
        a = b;
        b = c;
    }
    let err = Rational::new(BigInt::from(1), &b * &b);
    (Rational::new(a, b), err)
}

pub fn fibonacci_up_to(limit: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let (mut a, mut b) = (1u64, 2u64);
    while a <= limit {
        out.push(a);
        let c = a + b;
        a = b;
        b = c;
    }
    out
}

/// Convergent denominators `q_0 = 1, q_1 = a_1, …` of `[0; a_1, a_2, …]`.
pub fn denominators(quotients: &[u64]) -> Vec<BigInt> {
    let mut q = vec![BigInt::from(1), BigInt::from(quotients[0])];
    for &a in &quotients[1..] {
        let next = BigInt::from(a) * &q[q.len() - 1] + &q[q.len() - 2];
        q.push(next);
    }
    q
}

/// `[0; a_1, …, a_N]` as an exact rational.
pub fn cf_value(quotients: &[u64]) -> Rational {
    let mut x = Rational::from_integer(BigInt::from(0));
    for &a in quotients.iter().rev() {
        x = Rational::from_integer(BigInt::from(1)) / (Rational::from_integer(BigInt::from(a)) + x);
    }
    x
}

pub fn to_f64(x: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}
