//! Sufficient conditions for exact support recovery and the coefficient
//! thresholds that guarantee recovery under noise.
//!
//! Every condition is reported as a [`BoundVerdict`]. The left-hand side is
//! always reported, even when the derivation behind it does not apply; in that
//! case `valid` is false and `holds` is false too.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::coherence::{Coherence, NestedProfiles};
use crate::error::{Error, Result};
use crate::support::{enumerate_qkm, PeriodSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `(2k - 1) mu < 1`
    ClassicMu,
    /// `mu_1(k) + mu_1(k - 1) < 1`
    ClassicMu1,
    /// `zeta_{k,m} + nu_{k,m} < 1`
    Thm1,
    /// restricted per-period bound for one `T`
    Thm2,
    /// the restricted bound maximized over `Q_k(m)`
    Cor1,
    /// `zeta_{k,m}(s) + nu_{k,m}(s - 1) < 1`
    Refined,
}

impl Condition {
    pub const ALL: [Condition; 6] =
        [Self::ClassicMu, Self::ClassicMu1, Self::Thm1, Self::Thm2, Self::Cor1, Self::Refined];

    pub fn name(self) -> &'static str {
        match self {
            Self::ClassicMu => "classic-mu",
            Self::ClassicMu1 => "classic-mu1",
            Self::Thm1 => "thm1",
            Self::Thm2 => "thm2",
            Self::Cor1 => "cor1",
            Self::Refined => "refined",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown condition '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub name: Condition,
    pub lhs: f64,
    pub holds: bool,
    pub valid: bool,
    pub detail: String,
}

impl BoundVerdict {
    fn new(name: Condition, lhs: f64, valid: bool, detail: String) -> Self {
        BoundVerdict { name, lhs, holds: valid && lhs < 1.0, valid, detail }
    }
}

pub fn classic_coherence_condition(mu: f64, k: usize) -> BoundVerdict {
    assert!(mu >= 0.0, "mu must be nonnegative");
    let lhs = (2 * k).saturating_sub(1) as f64 * mu;
    BoundVerdict::new(Condition::ClassicMu, lhs, true, format!("mu={mu}"))
}

pub fn classic_cumulative_condition(coh: &Coherence, k: usize) -> Result<BoundVerdict> {
    assert!(k >= 1, "k must be positive");
    let a = coh.cumulative_coherence(k)?;
    let b = coh.cumulative_coherence(k - 1)?;
    Ok(BoundVerdict::new(Condition::ClassicMu1, a + b, true, format!("mu1(k)={a} mu1(k-1)={b}")))
}

/// Evaluated from precomputed profiles of `Q_{k_max}(m)`, `k <= k_max`.
pub fn theorem1_from_profiles(profiles: &NestedProfiles, k: usize) -> Result<BoundVerdict> {
    let zeta = profiles.npi(k)?;
    let nu = profiles.npa(k)?;
    Ok(BoundVerdict::new(
        Condition::Thm1,
        zeta.value + nu.value,
        nu.value < 1.0,
        format!("zeta={} at {:?} nu={} at {:?}", zeta.value, zeta.periods.periods(), nu.value, nu.periods.periods()),
    ))
}

pub fn theorem1_condition(coh: &Coherence, k: usize, m: usize) -> Result<BoundVerdict> {
    theorem1_from_profiles(&coh.profiles(m, k), k)
}

/// `(zeta_p, nu_p)` for every `p` in `1..=p_max`.
#[derive(Debug, Clone)]
pub struct RestrictedTable {
    values: Vec<(f64, f64)>,
}

impl RestrictedTable {
    pub fn new(coh: &Coherence) -> Self {
        RestrictedTable { values: crate::coherence::restricted_table(coh) }
    }

    pub fn from_values(values: Vec<(f64, f64)>) -> Self {
        RestrictedTable { values }
    }

    pub fn zeta(&self, p: u64) -> f64 {
        self.values[p as usize - 1].0
    }

    pub fn nu(&self, p: u64) -> f64 {
        self.values[p as usize - 1].1
    }

    pub fn p_max(&self) -> u64 {
        self.values.len() as u64
    }

    /// Terms of the restricted bound for `T`.
    pub fn terms(&self, t: &PeriodSet) -> RestrictedTerms {
        let ps = t.periods();
        let sum_zeta: f64 = ps.iter().map(|&p| self.zeta(p)).sum();
        let max_nu = ps.iter().map(|&p| self.nu(p)).fold(f64::NEG_INFINITY, f64::max);
        let min_zeta = ps.iter().map(|&p| self.zeta(p)).fold(f64::INFINITY, f64::min);
        let neumann = ps.iter().map(|&p| self.nu(p) + sum_zeta - self.zeta(p)).fold(f64::NEG_INFINITY, f64::max);
        RestrictedTerms { sum_zeta, max_nu, min_zeta, neumann }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedTerms {
    pub sum_zeta: f64,
    pub max_nu: f64,
    pub min_zeta: f64,
    /// `max_j (nu_j + sum_{i != j} zeta_i)`; the derivation needs it below 1.
    pub neumann: f64,
}

impl RestrictedTerms {
    pub fn lhs(&self) -> f64 {
        2.0 * self.sum_zeta + self.max_nu - self.min_zeta
    }

    /// The two denominator factors of the restricted noise thresholds.
    pub fn denominators(&self) -> (f64, f64) {
        (1.0 - 2.0 * self.sum_zeta - self.max_nu + self.min_zeta, 1.0 - self.sum_zeta - self.max_nu + self.min_zeta)
    }

    pub fn valid(&self) -> bool {
        self.neumann < 1.0
    }
}

pub fn theorem2_from_table(table: &RestrictedTable, t: &PeriodSet) -> BoundVerdict {
    let terms = table.terms(t);
    BoundVerdict::new(
        Condition::Thm2,
        terms.lhs(),
        terms.valid(),
        format!("T={:?} sum_zeta={} max_nu={} min_zeta={}", t.periods(), terms.sum_zeta, terms.max_nu, terms.min_zeta),
    )
}

pub fn theorem2_condition(coh: &Coherence, t: &PeriodSet) -> BoundVerdict {
    let table =
        RestrictedTable::from_values(
            (1..=t.max_period())
                .map(|p| {
                    if t.periods().contains(&p) {
                        (coh.restricted_inter(p), coh.restricted_intra(p))
                    } else {
                        (0.0, 0.0)
                    }
                })
                .collect(),
        );
    theorem2_from_table(&table, t)
}

/// Maximum of the restricted bound over the members of `Q_k(m)`.
pub fn corollary1_from_members<'a>(
    table: &RestrictedTable,
    members: impl IntoIterator<Item = &'a PeriodSet>,
    k: usize,
    m: usize,
) -> Result<BoundVerdict> {
    let mut best: Option<(f64, &PeriodSet)> = None;
    let mut valid = true;
    for t in members {
        let terms = table.terms(t);
        valid &= terms.valid();
        if best.is_none_or(|(b, _)| terms.lhs() > b) {
            best = Some((terms.lhs(), t));
        }
    }
    let (lhs, t) = best.ok_or(Error::EmptyQkm { k, m })?;
    Ok(BoundVerdict::new(Condition::Cor1, lhs, valid, format!("T={:?}", t.periods())))
}

pub fn corollary1_condition(coh: &Coherence, k: usize, m: usize) -> Result<BoundVerdict> {
    let members = enumerate_qkm(coh.p_max(), m, k);
    let table = RestrictedTable::new(coh);
    corollary1_from_members(&table, &members, k, m)
}

pub fn refined_from_profiles(profiles: &NestedProfiles, k: usize, s: usize) -> Result<BoundVerdict> {
    let zeta = profiles.cnpi(k, s)?;
    let nu = if s == 1 { 0.0 } else { profiles.cnpa(k, s - 1)?.value };
    Ok(BoundVerdict::new(
        Condition::Refined,
        zeta.value + nu,
        nu < 1.0,
        format!("s={s} zeta(s)={} nu(s-1)={nu}", zeta.value),
    ))
}

pub fn refined_condition(coh: &Coherence, k: usize, m: usize, s: usize) -> Result<BoundVerdict> {
    if s == 0 || s > k {
        return Err(Error::SOutOfRange { s, k });
    }
    refined_from_profiles(&coh.profiles(m, k), k, s)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("noise bound must be finite and nonnegative, got {eps}")));
    }
    Ok(())
}

/// `2 eps / ((1 - zeta - nu)(1 - nu))` from the nested measures of `Q_k(m)`.
pub fn bounded_noise_threshold_npi(coh: &Coherence, k: usize, m: usize, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let profiles = coh.profiles(m, k);
    let verdict = theorem1_from_profiles(&profiles, k)?;
    if !verdict.holds {
        return Err(Error::ConditionNotMet(format!("thm1 lhs = {} (valid = {})", verdict.lhs, verdict.valid)));
    }
    let zeta = profiles.npi(k)?.value;
    let nu = profiles.npa(k)?.value;
    Ok(2.0 * eps / ((1.0 - zeta - nu) * (1.0 - nu)))
}

/// The restricted threshold for one period set `T`.
pub fn bounded_noise_threshold_restricted(coh: &Coherence, t: &PeriodSet, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let table = RestrictedTable::from_values(
        (1..=t.max_period()).map(|p| (coh.restricted_inter(p), coh.restricted_intra(p))).collect(),
    );
    restricted_threshold_from_table(&table, t, eps)
}

pub fn restricted_threshold_from_table(table: &RestrictedTable, t: &PeriodSet, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let terms = table.terms(t);
    if !(terms.valid() && terms.lhs() < 1.0) {
        return Err(Error::ConditionNotMet(format!("thm2 lhs = {} (valid = {})", terms.lhs(), terms.valid())));
    }
    let (d1, d2) = terms.denominators();
    Ok(2.0 * eps / (d1 * d2))
}

/// `sigma * sqrt(L + 2 sqrt(L ln L))`: the l2 ball holding white Gaussian noise
/// with high probability.
pub fn gaussian_radius(sigma: f64, len: usize) -> f64 {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    assert!(len >= 2, "the radius needs at least two samples");
    let l = len as f64;
    sigma * (l + 2.0 * (l * l.ln()).sqrt()).sqrt()
}

pub fn gaussian_threshold_restricted(coh: &Coherence, t: &PeriodSet, sigma: f64, len: usize) -> Result<f64> {
    bounded_noise_threshold_restricted(coh, t, gaussian_radius(sigma, len))
}

/// The nested-measure threshold evaluated at the Gaussian radius. No published
/// result states this form; it follows by substituting the radius for `eps`.
pub fn gaussian_threshold_npi_extrapolated(coh: &Coherence, k: usize, m: usize, sigma: f64, len: usize) -> Result<f64> {
    bounded_noise_threshold_npi(coh, k, m, gaussian_radius(sigma, len))
}
