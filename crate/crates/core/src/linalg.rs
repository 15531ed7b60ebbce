use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Condition number above which a Gram matrix is treated as singular.
pub(crate) const MAX_GRAM_CONDITION: f64 = 1e12;

/// `K^H K`, computed through real matrix products so the fast real GEMM path is used.
pub(crate) fn gram(k: &DMatrix<Complex64>, real: bool) -> DMatrix<Complex64> {
    let a = k.map(|z| z.re);
    let aa = a.tr_mul(&a);
    if real {
        return aa.map(|x| Complex64::new(x, 0.0));
    }
    let b = k.map(|z| z.im);
    let bb = b.tr_mul(&b);
    let ab = a.tr_mul(&b);
    let n = k.ncols();
    // (A + iB)^H (A + iB) = A'A + B'B + i (A'B - B'A), and B'A = (A'B)'
    DMatrix::from_fn(n, n, |i, j| Complex64::new(aa[(i, j)] + bb[(i, j)], ab[(i, j)] - ab[(j, i)]))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub(crate) fn condition_from_eigenvalues(ev: &[f64]) -> f64 {
    let (min, max) = (ev[0], ev[ev.len() - 1]);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve `G X = B` for a Hermitian positive definite `G`, rejecting
/// ill-conditioned systems.
pub(crate) fn solve_gram(g: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let cond = condition_from_eigenvalues(&hermitian_eigenvalues(g.clone()));
    if cond > MAX_GRAM_CONDITION {
        return Err(Error::SingularGram { cond, periods: None });
    }
    let chol = g.clone().cholesky().ok_or(Error::SingularGram { cond: f64::INFINITY, periods: None })?;
    Ok(chol.solve(b))
}

/// Least-squares solution of `A c ~= y` through the SVD of `A`, rejecting
/// systems whose Gram matrix `A^H A` is ill-conditioned.
pub(crate) fn least_squares(a: &DMatrix<Complex64>, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    if a.ncols() > a.nrows() {
        return Err(Error::SingularGram { cond: f64::INFINITY, periods: None });
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if cond > MAX_GRAM_CONDITION {
        return Err(Error::SingularGram { cond, periods: None });
    }
    svd.solve(y, 0.0).map_err(|e| Error::Dimension(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_gram_matches_direct_product() {
        let k = DMatrix::from_fn(7, 5, |r, c| Complex64::new((r * 3 + c) as f64 * 0.1, (r as f64 - c as f64).sin()));
        let direct = k.adjoint() * &k;
        assert!((gram(&k, false) - direct).norm() < 1e-12);
        let kr = k.map(|z| Complex64::new(z.re, 0.0));
        assert!((gram(&kr, true) - kr.adjoint() * &kr).norm() < 1e-12);
    }

    #[test]
    fn singular_systems_are_rejected() {
        let a = DMatrix::from_fn(4, 2, |_, _| Complex64::new(1.0, 0.0));
        let y = DVector::from_element(4, Complex64::new(1.0, 0.0));
        assert!(matches!(least_squares(&a, &y), Err(Error::SingularGram { .. })));
        let g = a.adjoint() * &a;
        assert!(matches!(solve_gram(&g, &DMatrix::identity(2, 2)), Err(Error::SingularGram { .. })));
    }
}
