//! Integer primitives: gcd/lcm, Euler's totient, divisors and Ramanujan sums.

use std::f64::consts::TAU;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Least common multiple of a nonempty set. Returns 1 for an empty slice.
pub fn lcm_of_set(ps: &[u64]) -> u64 {
    ps.iter().fold(1, |acc, &p| lcm(acc, p))
}

/// Euler's totient, with `totient(1) == 1`.
pub fn totient(p: u64) -> u64 {
    assert!(p >= 1, "totient is defined for p >= 1");
    let mut n = p;
    let mut result = p;
    let mut f = 2;
    while f * f <= n {
        if n % f == 0 {
            while n % f == 0 {
                n /= f;
            }
            result -= result / f;
        }
        f += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// All divisors of `p` in increasing order.
pub fn divisors(p: u64) -> Vec<u64> {
    assert!(p >= 1, "divisors are defined for p >= 1");
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= p {
        if p % d == 0 {
            small.push(d);
            if d != p / d {
                large.push(p / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// `sum_{j=1}^{p} phi(j)`: the number of atoms in a dictionary with largest period `p`.
pub fn totient_prefix_sum(p: u64) -> u64 {
    (1..=p).map(totient).sum()
}

/// The trigonometric sum `sum_{1<=k<=q, gcd(k,q)=1} cos(2 pi k n / q)` before rounding.
///
/// The imaginary parts cancel in conjugate pairs, so this is the full value of
/// the exponential sum.
pub fn ramanujan_sum_unrounded(q: u64, n: u64) -> f64 {
    assert!(q >= 1, "Ramanujan sums are defined for q >= 1");
    let r = n % q;
    (1..=q).filter(|&k| gcd(k, q) == 1).map(|k| (TAU * ((k * r) % q) as f64 / q as f64).cos()).sum()
}

/// Ramanujan sum `c_q(n)`, an integer sequence periodic in `n` with period `q`.
pub fn ramanujan_sum(q: u64, n: u64) -> i64 {
    ramanujan_sum_unrounded(q, n).round() as i64
}

/// One cycle `c_q(0), ..., c_q(q-1)`.
pub fn ramanujan_cycle(q: u64) -> Vec<i64> {
    (0..q).map(|n| ramanujan_sum(q, n)).collect()
}
