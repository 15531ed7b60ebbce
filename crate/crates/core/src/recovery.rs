//! Sparse recovery: orthogonal matching pursuit, basis pursuit and
//! least squares on a fixed support.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::dictionary::NpdDictionary;
use crate::error::{Error, Result};
use crate::linalg;
use crate::numtheory::lcm_of_set;

/// Stopping rules for OMP. Any combination may be set; the first one that
/// triggers ends the run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StopRule {
    pub sparsity: Option<usize>,
    pub residual_norm: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl StopRule {
    pub fn sparsity(k: usize) -> Self {
        StopRule { sparsity: Some(k), ..Default::default() }
    }

    pub fn residual(eps: f64) -> Self {
        StopRule { residual_norm: Some(eps), ..Default::default() }
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = Some(n);
        self
    }

    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        if self.sparsity.is_none() && self.residual_norm.is_none() && self.max_iterations.is_none() {
            return Err(Error::InvalidStopRule("no rule given".into()));
        }
        if let Some(k) = self.sparsity {
            if k > n_atoms {
                return Err(Error::InvalidStopRule(format!("sparsity {k} exceeds the {n_atoms} atoms")));
            }
        }
        if let Some(eps) = self.residual_norm {
            if !(eps >= 0.0) {
                return Err(Error::InvalidStopRule(format!("residual bound {eps} is negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Sparsity,
    ResidualNorm,
    /// The explicit iteration cap, the implicit cap `min(L, N)`, or a residual
    /// that no remaining atom correlates with.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    /// Ascending 1-based atom indices.
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`.
    pub coefficients: Vec<Complex64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl RecoveryResult {
    /// Length-`n` coefficient vector.
    pub fn to_dense(&self, n: usize) -> DVector<Complex64> {
        let mut x = DVector::zeros(n);
        for (&j, &c) in self.support.iter().zip(&self.coefficients) {
            x[j - 1] = c;
        }
        x
    }

    /// Distinct periods of the selected atoms.
    pub fn periods(&self, dict: &NpdDictionary) -> Vec<u64> {
        periods_of_support(dict, &self.support)
    }

    /// The period of the recovered signal: the lcm of the periods present.
    pub fn estimated_period(&self, dict: &NpdDictionary) -> u64 {
        lcm_of_set(&self.periods(dict))
    }
}

pub fn periods_of_support(dict: &NpdDictionary, support: &[usize]) -> Vec<u64> {
    let mut ps: Vec<u64> = support.iter().map(|&j| dict.atom_period(j)).collect();
    ps.sort_unstable();
    ps.dedup();
    ps
}

/// `K^H r` through real products; for real dictionaries the imaginary part is skipped.
struct Correlator {
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
}

impl Correlator {
    fn new(dict: &NpdDictionary) -> Self {
        let k = dict.matrix();
        Correlator { re: k.map(|z| z.re), im: (!dict.is_real()).then(|| k.map(|z| z.im)) }
    }

    fn apply(&self, r: &DVector<Complex64>) -> DVector<Complex64> {
        let rr = r.map(|z| z.re);
        let ri = r.map(|z| z.im);
        let mut out_re = self.re.tr_mul(&rr);
        let mut out_im = self.re.tr_mul(&ri);
        if let Some(b) = &self.im {
            out_re += b.tr_mul(&ri);
            out_im -= b.tr_mul(&rr);
        }
        out_re.zip_map(&out_im, Complex64::new)
    }
}

/// Iterations between full refactorizations of the selected Gram matrix.
const REFACTOR_EVERY: usize = 10;

/// Reusable OMP solver for one dictionary.
pub struct Omp<'a> {
    dict: &'a NpdDictionary,
    correlator: Correlator,
}

impl<'a> Omp<'a> {
    pub fn new(dict: &'a NpdDictionary) -> Result<Self> {
        dict.require_normalized()?;
        Ok(Omp { dict, correlator: Correlator::new(dict) })
    }

    pub fn solve(&self, y: &DVector<Complex64>, stop: &StopRule) -> Result<RecoveryResult> {
        let k = self.dict.matrix();
        let (len, n) = k.shape();
        stop.validate(n)?;
        if y.len() != len {
            return Err(Error::Dimension(format!("signal has {} samples, dictionary has {len} rows", y.len())));
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("signal contains non-finite samples".into()));
        }
        let cap = stop.max_iterations.unwrap_or(usize::MAX).min(len.min(n));
        let y_norm = y.norm();

        let mut selected: Vec<usize> = Vec::new();
        let mut is_selected = vec![false; n];
        // lower-triangular factor of the selected Gram matrix, grown a row at a time
        let mut chol = DMatrix::<Complex64>::zeros(0, 0);
        let mut rhs: Vec<Complex64> = Vec::new();
        let mut x = DVector::<Complex64>::zeros(0);
        let mut residual = y.clone();
        let mut res_norm = y_norm;

        let reason = loop {
            if stop.residual_norm.is_some_and(|eps| res_norm <= eps) {
                break StopReason::ResidualNorm;
            }
            if stop.sparsity.is_some_and(|s| selected.len() >= s) {
                break StopReason::Sparsity;
            }
            if selected.len() >= cap {
                break StopReason::MaxIterations;
            }

            let corr = self.correlator.apply(&residual);
            let mut best = None;
            let mut best_val = 0.0;
            for (j, c) in corr.iter().enumerate() {
                let v = c.norm();
                if !is_selected[j] && v > best_val {
                    best_val = v;
                    best = Some(j);
                }
            }
            let Some(j) = best.filter(|_| best_val > 1e-14 * y_norm.max(f64::MIN_POSITIVE)) else {
                break StopReason::MaxIterations;
            };

            let atom = k.column(j);
            let g: DVector<Complex64> =
                DVector::from_iterator(selected.len(), selected.iter().map(|&i| k.column(i).dotc(&atom)));
            selected.push(j);
            is_selected[j] = true;
            rhs.push(atom.dotc(y));

            if selected.len() % REFACTOR_EVERY == 0 {
                chol = self.factor_selected(&selected)?;
            } else {
                let w = if selected.len() > 1 {
                    chol.solve_lower_triangular(&g).expect("factor has a nonzero diagonal")
                } else {
                    DVector::zeros(0)
                };
                let d2 = atom.norm_squared() - w.norm_squared();
                // the new Schur complement bounds the smallest eigenvalue from above
                if d2 < 1.0 / linalg::MAX_GRAM_CONDITION {
                    return Err(Error::SingularGram {
                        cond: 1.0 / d2.max(0.0),
                        periods: Some(self.periods(&selected)),
                    });
                }
                let s = selected.len();
                chol = chol.resize(s, s, Complex64::new(0.0, 0.0));
                for (c, wc) in w.iter().enumerate() {
                    chol[(s - 1, c)] = wc.conj();
                }
                chol[(s - 1, s - 1)] = Complex64::new(d2.sqrt(), 0.0);
            }

            let b = DVector::from_column_slice(&rhs);
            let z = chol.solve_lower_triangular(&b).expect("nonzero diagonal");
            x = chol.ad_solve_lower_triangular(&z).expect("nonzero diagonal");
            residual = y - k.select_columns(&selected) * &x;
            res_norm = residual.norm();
        };

        let mut order: Vec<usize> = (0..selected.len()).collect();
        order.sort_by_key(|&i| selected[i]);
        Ok(RecoveryResult {
            support: order.iter().map(|&i| selected[i] + 1).collect(),
            coefficients: order.iter().map(|&i| x[i]).collect(),
            residual_norm: res_norm,
            iterations: selected.len(),
            stop_reason: reason,
        })
    }

    fn periods(&self, cols: &[usize]) -> Vec<u64> {
        let support: Vec<usize> = cols.iter().map(|&j| j + 1).collect();
        periods_of_support(self.dict, &support)
    }

    fn factor_selected(&self, cols: &[usize]) -> Result<DMatrix<Complex64>> {
        let ks = self.dict.matrix().select_columns(cols);
        let g = linalg::gram(&ks, self.dict.is_real());
        let cond = linalg::condition_from_eigenvalues(&linalg::hermitian_eigenvalues(g.clone()));
        let singular = || Error::SingularGram { cond, periods: Some(self.periods(cols)) };
        if cond > linalg::MAX_GRAM_CONDITION {
            return Err(singular());
        }
        Ok(g.cholesky().ok_or_else(singular)?.unpack())
    }
}

pub fn omp(dict: &NpdDictionary, y: &DVector<Complex64>, stop: &StopRule) -> Result<RecoveryResult> {
    Omp::new(dict)?.solve(y, stop)
}

/// Iteration cap of the basis pursuit solver.
pub const BP_MAX_ITERATIONS: usize = 50_000;

/// Penalty parameter of the splitting scheme.
const BP_RHO: f64 = 1.0;

/// Iterations between attempts to certify the current support as optimal.
const CERTIFY_EVERY: usize = 25;

#[derive(Debug, Clone)]
pub struct BpSolution {
    pub x: DVector<Complex64>,
    pub iterations: usize,
}

/// Basis pursuit `min ||x||_1 s.t. Kx = y` by alternating projection onto the
/// affine constraint set and complex soft-thresholding (ADMM).
pub struct BasisPursuit<'a> {
    dict: &'a NpdDictionary,
    pinv: DMatrix<Complex64>,
}

impl<'a> BasisPursuit<'a> {
    pub fn new(dict: &'a NpdDictionary) -> Result<Self> {
        dict.require_normalized()?;
        let svd = dict.matrix().clone().svd(true, true);
        let tol = svd.singular_values.max() * 1e-10;
        let pinv = svd.pseudo_inverse(tol).map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(BasisPursuit { dict, pinv })
    }

    pub fn solve(&self, y: &DVector<Complex64>, tol: f64) -> Result<BpSolution> {
        let k = self.dict.matrix();
        let n = k.ncols();
        if y.len() != k.nrows() {
            return Err(Error::Dimension(format!("signal has {} samples, dictionary has {} rows", y.len(), k.nrows())));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        // least-norm feasible point, then x = v - K^+ (K v - y) keeps every x iterate feasible
        let x0 = &self.pinv * y;
        let project = |v: &DVector<Complex64>| -> DVector<Complex64> { v - &self.pinv * (k * v - y) };
        let shrink_t = 1.0 / BP_RHO;

        let mut z = x0.map(|c| shrink(c, shrink_t));
        let mut u = DVector::<Complex64>::zeros(n);
        for it in 1..=BP_MAX_ITERATIONS {
            let x = project(&(&z - &u));
            let z_prev = z;
            z = (&x + &u).map(|c| shrink(c, shrink_t));
            u += &x - &z;
            let primal = (&x - &z).norm();
            let dual = BP_RHO * (&z - &z_prev).norm();
            if primal <= tol && dual <= tol {
                return Ok(BpSolution { x: self.finish(x, z, y, tol), iterations: it });
            }
            if it % CERTIFY_EVERY == 0 {
                if let Some(opt) = self.certify(&z, y, tol) {
                    return Ok(BpSolution { x: opt, iterations: it });
                }
            }
        }
        let gap = (k * &z - y).norm();
        Err(Error::NoConvergence { iterations: BP_MAX_ITERATIONS, gap })
    }

    /// Least squares on the support of `z`, returned only when it is feasible
    /// and carries an optimality certificate: `w = K_S (K_S^H K_S)^-1 sgn(c)`
    /// satisfies `K_S^H w = sgn(c)`, so `|<k_j, w>| <= 1` off the support makes
    /// `w` a dual certificate for the l1 problem.
    fn certify(&self, z: &DVector<Complex64>, y: &DVector<Complex64>, tol: f64) -> Option<DVector<Complex64>> {
        let k = self.dict.matrix();
        let support = support_from_coefficients(z, 1e-6);
        if support.is_empty() || support.len() > k.nrows() {
            return None;
        }
        let ks = self.dict.select(&support);
        let c = linalg::least_squares(&ks, y).ok()?;
        if (&ks * &c - y).norm() > tol || c.iter().any(|v| v.norm() == 0.0) {
            return None;
        }
        let sgn = c.map(|v| v / v.norm());
        let g = linalg::gram(&ks, self.dict.is_real());
        let w = &ks * linalg::solve_gram(&g, &DMatrix::from_column_slice(sgn.len(), 1, sgn.as_slice())).ok()?;
        let corr = k.ad_mul(&w);
        let mut in_support = vec![false; k.ncols()];
        for &j in &support {
            in_support[j - 1] = true;
        }
        if corr.iter().enumerate().any(|(j, v)| !in_support[j] && v.norm() > 1.0 + 1e-9) {
            return None;
        }
        let mut x = DVector::zeros(k.ncols());
        for (&j, &v) in support.iter().zip(c.iter()) {
            x[j - 1] = v;
        }
        Some(x)
    }

    /// Prefer the sparse iterate, polished by least squares on its support
    /// when that stays feasible and does not increase the l1 norm.
    fn finish(
        &self,
        x: DVector<Complex64>,
        z: DVector<Complex64>,
        y: &DVector<Complex64>,
        tol: f64,
    ) -> DVector<Complex64> {
        let k = self.dict.matrix();
        let l1 = |v: &DVector<Complex64>| v.iter().map(|c| c.norm()).sum::<f64>();
        let feasible = |v: &DVector<Complex64>| (k * v - y).norm() <= tol;
        let base = if feasible(&z) { z } else { x };
        let support = support_from_coefficients(&base, 1e-9);
        if support.is_empty() || support.len() > k.nrows() {
            return base;
        }
        let Ok(c) = least_squares_on_support(self.dict, &support, y) else { return base };
        let mut polished = DVector::zeros(k.ncols());
        for (&j, &v) in support.iter().zip(c.iter()) {
            polished[j - 1] = v;
        }
        if feasible(&polished) && l1(&polished) <= l1(&base) * (1.0 + 1e-9) {
            polished
        } else {
            base
        }
    }
}

/// `z * max(1 - t/|z|, 0)`
fn shrink(z: Complex64, t: f64) -> Complex64 {
    let m = z.norm();
    if m <= t {
        Complex64::new(0.0, 0.0)
    } else {
        z * (1.0 - t / m)
    }
}

pub fn basis_pursuit(dict: &NpdDictionary, y: &DVector<Complex64>, tol: f64) -> Result<DVector<Complex64>> {
    Ok(BasisPursuit::new(dict)?.solve(y, tol)?.x)
}

/// `argmin_c ||K_S c - y||_2` for a 1-based support.
pub fn least_squares_on_support(
    dict: &NpdDictionary,
    support: &[usize],
    y: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    if y.len() != dict.len() {
        return Err(Error::Dimension(format!("signal has {} samples, dictionary has {} rows", y.len(), dict.len())));
    }
    linalg::least_squares(&dict.select(support), y).map_err(|e| match e {
        Error::SingularGram { cond, .. } => {
            Error::SingularGram { cond, periods: Some(periods_of_support(dict, support)) }
        }
        other => other,
    })
}

/// 1-based indices with `|x_i| > rel * max_j |x_j|`.
pub fn support_from_coefficients(x: &DVector<Complex64>, rel: f64) -> Vec<usize> {
    let max = x.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    x.iter().enumerate().filter(|(_, c)| c.norm() > rel * max).map(|(i, _)| i + 1).collect()
}
