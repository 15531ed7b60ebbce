//! Index sets of nested periodic dictionaries and the admissible period-set
//! family `Q_k(m)`.
//!
//! All indices here are 1-based column indices.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numtheory::{divisors, totient, totient_prefix_sum};

/// `I_p`: the `phi(p)` consecutive atoms of period `p`.
pub fn index_set(p: u64) -> Vec<usize> {
    assert!(p >= 1);
    let start = totient_prefix_sum(p - 1) as usize + 1;
    (start..start + totient(p) as usize).collect()
}

/// `S_p`: the support of a single period-`p` signal, the union of `I_q` over `q | p`.
///
/// `|S_p| == p`.
pub fn single_period_support(p: u64) -> Vec<usize> {
    divisors(p).into_iter().flat_map(index_set).collect()
}

/// A set of hidden periods `T` together with its divisor closure `D_T` and
/// support `S_T`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PeriodSet {
    periods: Vec<u64>,
    divisor_closure: Vec<u64>,
    support: Vec<usize>,
}

impl PeriodSet {
    /// Build from hidden periods. The periods must be nonempty, positive and
    /// pairwise non-divisible.
    pub fn new(periods: &[u64]) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::InvalidPeriods("the period set is empty".into()));
        }
        if periods.contains(&0) {
            return Err(Error::InvalidPeriods("periods must be positive".into()));
        }
        let sorted: BTreeSet<u64> = periods.iter().copied().collect();
        if sorted.len() != periods.len() {
            return Err(Error::InvalidPeriods(format!("repeated period in {periods:?}")));
        }
        let sorted: Vec<u64> = sorted.into_iter().collect();
        for (i, &a) in sorted.iter().enumerate() {
            for &b in &sorted[i + 1..] {
                if b % a == 0 {
                    return Err(Error::DivisibilityViolation(a, b));
                }
            }
        }
        Ok(Self::from_sorted_unchecked(sorted))
    }

    fn from_sorted_unchecked(periods: Vec<u64>) -> Self {
        let divisor_closure: Vec<u64> =
            periods.iter().flat_map(|&p| divisors(p)).collect::<BTreeSet<_>>().into_iter().collect();
        let support = divisor_closure.iter().flat_map(|&q| index_set(q)).collect();
        PeriodSet { periods, divisor_closure, support }
    }

    pub fn periods(&self) -> &[u64] {
        &self.periods
    }

    /// `D_T`, ascending.
    pub fn divisor_closure(&self) -> &[u64] {
        &self.divisor_closure
    }

    /// `S_T`, ascending 1-based atom indices.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Number of hidden periods `m`.
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn max_period(&self) -> u64 {
        *self.periods.last().expect("period sets are nonempty")
    }

    /// 0-based column indices of the support, for internal matrix access.
    pub(crate) fn columns(&self) -> Vec<usize> {
        self.support.iter().map(|&j| j - 1).collect()
    }
}

fn fmt_set<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    f.write_str("{")?;
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{x}")?;
    }
    f.write_str("}")
}

/// `{3,5}|D={1,3,5}|S={1,3,4,7,8,9,10}`
impl fmt::Display for PeriodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_set(f, &self.periods)?;
        f.write_str("|D=")?;
        fmt_set(f, &self.divisor_closure)?;
        f.write_str("|S=")?;
        fmt_set(f, &self.support)
    }
}

/// `Q_k(m)` restricted to periods in `1..=p_max`: every size-`m`, pairwise
/// non-divisible subset `T` with `|S_T| <= k`, in lexicographic order.
pub fn enumerate_qkm(p_max: u64, m: usize, k: usize) -> Vec<PeriodSet> {
    if m == 0 || k == 0 || p_max == 0 {
        return Vec::new();
    }
    // |S_T| >= max(T), so no element may exceed k
    let hi = p_max.min(k as u64);
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(m);
    let mut closure = BTreeSet::new();
    extend_qkm(1, hi, m, k, &mut chosen, &mut closure, &mut out);
    out
}

fn extend_qkm(
    from: u64,
    hi: u64,
    m: usize,
    k: usize,
    chosen: &mut Vec<u64>,
    closure: &mut BTreeSet<u64>,
    out: &mut Vec<PeriodSet>,
) {
    if chosen.len() == m {
        out.push(PeriodSet::from_sorted_unchecked(chosen.clone()));
        return;
    }
    let remaining = (m - chosen.len()) as u64;
    let mut p = from;
    while p + remaining - 1 <= hi {
        // p > every chosen element, so only chosen | p can violate non-divisibility
        if chosen.iter().all(|&c| p % c != 0) {
            let added: Vec<u64> = divisors(p).into_iter().filter(|q| !closure.contains(q)).collect();
            let size: u64 = closure.iter().chain(&added).map(|&q| totient(q)).sum();
            if size as usize <= k {
                closure.extend(&added);
                chosen.push(p);
                extend_qkm(p + 1, hi, m, k, chosen, closure, out);
                chosen.pop();
                for q in &added {
                    closure.remove(q);
                }
            }
        }
        p += 1;
    }
}
