//! Coherence measures of a normalized dictionary.
//!
//! Everything here is a maximization over inner-product magnitudes
//! `|<k_i, k_j>|`, so the full Gram matrix is computed once per dictionary and
//! shared by all measures. The nested measures (inter/intra coherence over
//! `Q_k(m)` and their cumulative `s`-term refinements) are evaluated through
//! per-period-set profiles: for each `T` the best `s`-term sums are computed
//! once for every `s`, and any `(k, s)` query is a maximum over the members
//! with `|S_T| <= k`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::dictionary::NpdDictionary;
use crate::error::{Error, Result};
use crate::linalg;
use crate::parallel::par_map;
use crate::support::{enumerate_qkm, single_period_support, PeriodSet};

/// Norm tolerance for accepting a dictionary as normalized.
const NORM_TOLERANCE: f64 = 1e-10;

/// Gram matrix of a normalized dictionary plus its magnitudes.
#[derive(Debug, Clone)]
pub struct Coherence {
    gram: DMatrix<Complex64>,
    /// `|<k_i, k_j>|` with a zero diagonal. Symmetric, so column `i` is row `i`.
    magnitude: DMatrix<f64>,
    p_max: u64,
}

impl Coherence {
    pub fn new(dict: &NpdDictionary) -> Result<Self> {
        dict.require_normalized()?;
        let gram = linalg::gram(dict.matrix(), dict.is_real());
        if gram.diagonal().iter().any(|d| (d.re - 1.0).abs() > NORM_TOLERANCE) {
            return Err(Error::NotNormalized);
        }
        let mut magnitude = gram.map(|z| z.norm());
        magnitude.fill_diagonal(0.0);
        Ok(Coherence { gram, magnitude, p_max: dict.p_max() })
    }

    pub fn n_atoms(&self) -> usize {
        self.gram.ncols()
    }

    pub fn p_max(&self) -> u64 {
        self.p_max
    }

    /// The complex Gram matrix `K^H K`.
    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    /// `|<k_i, k_j>|` for 1-based atoms.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.gram[(i - 1, i - 1)].norm()
        } else {
            self.magnitude[(i - 1, j - 1)]
        }
    }

    fn column(&self, i: usize) -> &[f64] {
        let n = self.n_atoms();
        &self.magnitude.as_slice()[i * n..(i + 1) * n]
    }

    /// `mu`: the largest inner-product magnitude between distinct atoms.
    pub fn mutual_coherence(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }

    /// `mu_1(k)`: for each atom the sum of its `k` largest magnitudes against
    /// other atoms, maximized over atoms. `mu_1(0) = 0`.
    pub fn cumulative_coherence(&self, k: usize) -> Result<f64> {
        let n = self.n_atoms();
        if k + 1 > n {
            return Err(Error::KTooLarge { k, max: n.saturating_sub(1) });
        }
        if k == 0 {
            return Ok(0.0);
        }
        let mut best = 0.0f64;
        let mut buf = Vec::with_capacity(n - 1);
        for i in 0..n {
            buf.clear();
            buf.extend(self.column(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v));
            best = best.max(top_sum(&mut buf, k));
        }
        Ok(best)
    }

    /// `zeta_p`: the largest total magnitude of an atom outside `S_p` against `S_p`.
    pub fn restricted_inter(&self, p: u64) -> f64 {
        let set = PeriodSet::new(&[p]).expect("single periods are always valid");
        let profile = SupportProfile::compute(self, set);
        profile.inter_full()
    }

    /// `nu_p`: the largest total magnitude of an atom of `S_p` against the rest of `S_p`.
    pub fn restricted_intra(&self, p: u64) -> f64 {
        let set = PeriodSet::new(&[p]).expect("single periods are always valid");
        SupportProfile::compute(self, set).intra_full()
    }

    /// Profiles of every `T` in `Q_{k_max}(m)`; answers all nested queries with `k <= k_max`.
    pub fn profiles(&self, m: usize, k_max: usize) -> NestedProfiles {
        let sets = enumerate_qkm(self.p_max, m, k_max);
        let profiles = par_map(sets, |t| SupportProfile::compute(self, t));
        NestedProfiles { m, k_max, profiles, erc: None }
    }

    /// `zeta_{k,m}`.
    pub fn npi(&self, k: usize, m: usize) -> Result<f64> {
        Ok(self.profiles(m, k).npi(k)?.value)
    }

    /// `nu_{k,m}`.
    pub fn npa(&self, k: usize, m: usize) -> Result<f64> {
        Ok(self.profiles(m, k).npa(k)?.value)
    }

    /// `zeta_{k,m}(s)`.
    pub fn cnpi(&self, k: usize, m: usize, s: usize) -> Result<f64> {
        Ok(self.profiles(m, k).cnpi(k, s)?.value)
    }

    /// `nu_{k,m}(s)`.
    pub fn cnpa(&self, k: usize, m: usize, s: usize) -> Result<f64> {
        Ok(self.profiles(m, k).cnpa(k, s)?.value)
    }

    /// `||K_S^+ K_{S^c}||_{1,1}`: the largest l1 norm of the least-squares
    /// coefficients of an outside atom on the atoms of `S` (1-based).
    pub fn erc_value(&self, support: &[usize]) -> Result<f64> {
        let n = self.n_atoms();
        let inside: Vec<usize> = support.iter().map(|&j| j - 1).collect();
        let mut is_inside = vec![false; n];
        for &j in &inside {
            is_inside[j] = true;
        }
        let outside: Vec<usize> = (0..n).filter(|&j| !is_inside[j]).collect();
        if outside.is_empty() {
            return Ok(0.0);
        }
        let g_ss = self.gram.select_rows(&inside).select_columns(&inside);
        let g_sc = self.gram.select_rows(&inside).select_columns(&outside);
        let z = linalg::solve_gram(&g_ss, &g_sc)?;
        Ok(z.column_iter().map(|col| col.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max))
    }

    /// `M_k(m)`: the ERC value maximized over `Q_k(m)`.
    pub fn erc_baseline(&self, k: usize, m: usize) -> Result<f64> {
        let mut profiles = self.profiles(m, k);
        profiles.compute_erc(self)?;
        Ok(profiles.erc_baseline(k)?.value)
    }

    /// Smallest eigenvalue of the Gram matrix of the atoms in `S` (1-based), clamped at 0.
    pub fn min_eig_gram(&self, support: &[usize]) -> f64 {
        let cols: Vec<usize> = support.iter().map(|&j| j - 1).collect();
        let g = self.gram.select_rows(&cols).select_columns(&cols);
        linalg::hermitian_eigenvalues(g)[0].max(0.0)
    }
}

/// Sum of the `s` largest values. Reorders `values`.
fn top_sum(values: &mut [f64], s: usize) -> f64 {
    let s = s.min(values.len());
    if s == 0 {
        return 0.0;
    }
    if s < values.len() {
        values.select_nth_unstable_by(s - 1, |a, b| b.total_cmp(a));
    }
    values[..s].iter().sum()
}

/// Descending prefix sums: `out[s-1]` is the sum of the `s` largest values.
fn accumulate_sorted_max(values: &mut [f64], into: &mut [f64]) {
    values.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (slot, v) in into.iter_mut().zip(values.iter()) {
        acc += v;
        if acc > *slot {
            *slot = acc;
        }
    }
}

/// Best `s`-term inter and intra sums for one period set.
#[derive(Debug, Clone)]
pub struct SupportProfile {
    periods: PeriodSet,
    /// `inter[s-1] = max_{i not in S} (sum of the s largest |<k_i,k_j>|, j in S)`, `s = 1..=|S|`
    inter: Vec<f64>,
    /// `intra[s-1] = max_{i in S} (sum of the s largest |<k_i,k_j>|, j in S, j != i)`, `s = 1..|S|`
    intra: Vec<f64>,
}

impl SupportProfile {
    fn compute(coh: &Coherence, periods: PeriodSet) -> Self {
        let n = coh.n_atoms();
        let cols = periods.columns();
        let size = cols.len();
        let mut in_support = vec![false; n];
        for &j in &cols {
            in_support[j] = true;
        }
        let mut inter = vec![0.0; size];
        let mut intra = vec![0.0; size.saturating_sub(1)];
        let mut buf = Vec::with_capacity(size);
        for (i, &inside) in in_support.iter().enumerate() {
            let column = coh.column(i);
            buf.clear();
            if inside {
                buf.extend(cols.iter().filter(|&&j| j != i).map(|&j| column[j]));
                accumulate_sorted_max(&mut buf, &mut intra);
            } else {
                buf.extend(cols.iter().map(|&j| column[j]));
                accumulate_sorted_max(&mut buf, &mut inter);
            }
        }
        SupportProfile { periods, inter, intra }
    }

    pub fn periods(&self) -> &PeriodSet {
        &self.periods
    }

    pub fn support_size(&self) -> usize {
        self.periods.support().len()
    }

    /// Best inter sum using at most `s` atoms of the support.
    pub fn inter_at(&self, s: usize) -> f64 {
        if s == 0 || self.inter.is_empty() {
            return 0.0;
        }
        self.inter[s.min(self.inter.len()) - 1]
    }

    /// Best intra sum using at most `s` other atoms of the support.
    pub fn intra_at(&self, s: usize) -> f64 {
        if s == 0 || self.intra.is_empty() {
            return 0.0;
        }
        self.intra[s.min(self.intra.len()) - 1]
    }

    pub fn inter_full(&self) -> f64 {
        self.inter_at(self.support_size())
    }

    pub fn intra_full(&self) -> f64 {
        self.intra_at(self.support_size())
    }
}

/// A maximum together with the (lexicographically first) period set attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    pub periods: PeriodSet,
}

/// Profiles of all period sets of `Q_{k_max}(m)`.
#[derive(Debug, Clone)]
pub struct NestedProfiles {
    m: usize,
    k_max: usize,
    profiles: Vec<SupportProfile>,
    erc: Option<Vec<f64>>,
}

impl NestedProfiles {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn all(&self) -> &[SupportProfile] {
        &self.profiles
    }

    /// Members of `Q_k(m)`, in lexicographic order.
    pub fn members(&self, k: usize) -> impl Iterator<Item = &SupportProfile> {
        self.profiles.iter().filter(move |p| p.support_size() <= k)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        assert!(k <= self.k_max, "k = {k} exceeds the profiled range {}", self.k_max);
        if self.members(k).next().is_none() {
            return Err(Error::EmptyQkm { k, m: self.m });
        }
        Ok(())
    }

    fn maximize(&self, k: usize, f: impl Fn(&SupportProfile) -> f64) -> Result<Extremum> {
        self.check_k(k)?;
        let mut best: Option<(f64, &SupportProfile)> = None;
        for p in self.members(k) {
            let v = f(p);
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, p));
            }
        }
        let (value, p) = best.expect("checked nonempty");
        Ok(Extremum { value, periods: p.periods.clone() })
    }

    fn check_s(k: usize, s: usize) -> Result<()> {
        if s == 0 || s > k {
            return Err(Error::SOutOfRange { s, k });
        }
        Ok(())
    }

    /// `zeta_{k,m}`
    pub fn npi(&self, k: usize) -> Result<Extremum> {
        self.maximize(k, SupportProfile::inter_full)
    }

    /// `nu_{k,m}`
    pub fn npa(&self, k: usize) -> Result<Extremum> {
        self.maximize(k, SupportProfile::intra_full)
    }

    /// `zeta_{k,m}(s)`, `1 <= s <= k`
    pub fn cnpi(&self, k: usize, s: usize) -> Result<Extremum> {
        Self::check_s(k, s)?;
        self.maximize(k, |p| p.inter_at(s))
    }

    /// `nu_{k,m}(s)`, `1 <= s <= k`
    pub fn cnpa(&self, k: usize, s: usize) -> Result<Extremum> {
        Self::check_s(k, s)?;
        self.maximize(k, |p| p.intra_at(s))
    }

    /// Evaluate the ERC value of every profiled period set.
    pub fn compute_erc(&mut self, coh: &Coherence) -> Result<()> {
        if self.erc.is_some() {
            return Ok(());
        }
        let sets: Vec<&PeriodSet> = self.profiles.iter().map(|p| &p.periods).collect();
        let values = par_map(sets, |t| {
            coh.erc_value(t.support()).map_err(|e| match e {
                Error::SingularGram { cond, .. } => Error::SingularGram { cond, periods: Some(t.periods().to_vec()) },
                other => other,
            })
        });
        self.erc = Some(values.into_iter().collect::<Result<Vec<_>>>()?);
        Ok(())
    }

    /// ERC values aligned with [`NestedProfiles::all`], once computed.
    pub fn erc_values(&self) -> Option<&[f64]> {
        self.erc.as_deref()
    }

    /// `M_k(m)`. Requires [`NestedProfiles::compute_erc`].
    pub fn erc_baseline(&self, k: usize) -> Result<Extremum> {
        self.check_k(k)?;
        let erc = self.erc.as_ref().expect("compute_erc must be called first");
        let mut best: Option<(f64, usize)> = None;
        for (idx, p) in self.profiles.iter().enumerate() {
            if p.support_size() <= k && best.is_none_or(|(b, _)| erc[idx] > b) {
                best = Some((erc[idx], idx));
            }
        }
        let (value, idx) = best.expect("checked nonempty");
        Ok(Extremum { value, periods: self.profiles[idx].periods.clone() })
    }
}

/// A batch of coherence measures over requested grids.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CoherenceReport {
    pub mu: f64,
    pub mu1: BTreeMap<usize, f64>,
    pub zeta_km: BTreeMap<(usize, usize), f64>,
    pub nu_km: BTreeMap<(usize, usize), f64>,
    pub zeta_p: BTreeMap<u64, f64>,
    pub nu_p: BTreeMap<u64, f64>,
    pub cnpi: BTreeMap<(usize, usize, usize), f64>,
    pub cnpa: BTreeMap<(usize, usize, usize), f64>,
    pub erc_baseline: BTreeMap<(usize, usize), f64>,
}

/// Which grids a [`CoherenceReport`] covers. Points with an empty `Q_k(m)` are skipped.
#[derive(Debug, Clone, Default)]
pub struct ReportRequest {
    pub ks: Vec<usize>,
    pub ms: Vec<usize>,
    pub periods: Vec<u64>,
    pub cumulative: bool,
    pub with_erc: bool,
}

impl CoherenceReport {
    pub fn compute(coh: &Coherence, req: &ReportRequest) -> Result<Self> {
        let mut report = CoherenceReport { mu: coh.mutual_coherence(), ..Default::default() };
        for &k in &req.ks {
            if k < coh.n_atoms() {
                report.mu1.insert(k, coh.cumulative_coherence(k)?);
            }
        }
        for &p in &req.periods {
            report.zeta_p.insert(p, coh.restricted_inter(p));
            report.nu_p.insert(p, coh.restricted_intra(p));
        }
        let k_max = req.ks.iter().copied().max().unwrap_or(0);
        for &m in &req.ms {
            let mut profiles = coh.profiles(m, k_max);
            if req.with_erc {
                profiles.compute_erc(coh)?;
            }
            for &k in &req.ks {
                let Ok(npi) = profiles.npi(k) else { continue };
                report.zeta_km.insert((k, m), npi.value);
                report.nu_km.insert((k, m), profiles.npa(k)?.value);
                if req.with_erc {
                    report.erc_baseline.insert((k, m), profiles.erc_baseline(k)?.value);
                }
                if req.cumulative {
                    for s in 1..=k {
                        report.cnpi.insert((k, m, s), profiles.cnpi(k, s)?.value);
                        report.cnpa.insert((k, m, s), profiles.cnpa(k, s)?.value);
                    }
                }
            }
        }
        Ok(report)
    }

    /// Invariants every report must satisfy.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let all = std::iter::once(self.mu)
            .chain(self.mu1.values().copied())
            .chain(self.zeta_km.values().copied())
            .chain(self.nu_km.values().copied())
            .chain(self.zeta_p.values().copied())
            .chain(self.nu_p.values().copied())
            .chain(self.cnpi.values().copied())
            .chain(self.cnpa.values().copied())
            .chain(self.erc_baseline.values().copied());
        for v in all {
            if !(v >= 0.0) {
                return Err(format!("negative or NaN measure {v}"));
            }
        }
        let mut prev = 0.0;
        for (k, v) in &self.mu1 {
            if *v + 1e-12 < prev {
                return Err(format!("mu1 decreases at k = {k}"));
            }
            prev = *v;
        }
        for map in [&self.cnpi, &self.cnpa] {
            for (&(k, m, s), &v) in map {
                if let Some(&next) = map.get(&(k, m, s + 1)) {
                    if next + 1e-12 < v {
                        return Err(format!("cumulative measure decreases in s at k={k} m={m} s={s}"));
                    }
                }
            }
        }
        for (&(k, m, s), &v) in &self.cnpi {
            if s == k {
                let full = self.zeta_km[&(k, m)];
                if (v - full).abs() > 1e-12 {
                    return Err(format!("cnpi(k={k},m={m},s=k) = {v} != npi = {full}"));
                }
            }
        }
        for (&(k, m, s), &v) in &self.cnpa {
            if s == k {
                let full = self.nu_km[&(k, m)];
                if (v - full).abs() > 1e-12 {
                    return Err(format!("cnpa(k={k},m={m},s=k) = {v} != npa = {full}"));
                }
            }
        }
        Ok(())
    }
}

/// `zeta_p`, `nu_p` for `p = 1..=p_max`, indexed by `p - 1`.
pub fn restricted_table(coh: &Coherence) -> Vec<(f64, f64)> {
    let sets: Vec<PeriodSet> = (1..=coh.p_max()).map(|p| PeriodSet::new(&[p]).expect("valid")).collect();
    par_map(sets, |t| {
        let prof = SupportProfile::compute(coh, t);
        (prof.inter_full(), prof.intra_full())
    })
}

/// Support `S_p` helper re-exported for callers that only know the period.
pub fn support_of_period(p: u64) -> Vec<usize> {
    single_period_support(p)
}
