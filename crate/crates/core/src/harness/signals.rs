use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dictionary::NpdDictionary;
use crate::support::PeriodSet;

/// A random coefficient with modulus at least `gamma`.
///
/// Real dictionaries: a standard normal draw pushed away from zero by
/// `sign(v) * gamma`. Complex dictionaries: modulus `|v| + gamma` with a
/// uniformly random phase.
fn coefficient(real: bool, gamma: f64, rng: &mut impl Rng) -> Complex64 {
    let v: f64 = StandardNormal.sample(rng);
    if real {
        Complex64::new(v + gamma.copysign(v), 0.0)
    } else {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        Complex64::from_polar(v.abs() + gamma, phase)
    }
}

/// A mixture of the hidden periods `T`: coefficients on every atom of `S_T`.
/// Returns `(x, y = K x)`.
pub fn gen_mixture(
    dict: &NpdDictionary,
    t: &PeriodSet,
    gamma: f64,
    rng: &mut impl Rng,
) -> (DVector<Complex64>, DVector<Complex64>) {
    gen_on_support(dict, t.support(), gamma, rng)
}

/// An `s`-sparse mixture on `S_T`: `s` atoms drawn uniformly from the
/// support. Returns `(support, x, y)` with the support ascending.
pub fn gen_sparse_mixture(
    dict: &NpdDictionary,
    t: &PeriodSet,
    s: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> (Vec<usize>, DVector<Complex64>, DVector<Complex64>) {
    let st = t.support();
    assert!(s >= 1 && s <= st.len(), "s = {s} outside 1..={}", st.len());
    let mut chosen: Vec<usize> = index::sample(rng, st.len(), s).into_iter().map(|i| st[i]).collect();
    chosen.sort_unstable();
    let (x, y) = gen_on_support(dict, &chosen, gamma, rng);
    (chosen, x, y)
}

fn gen_on_support(
    dict: &NpdDictionary,
    support: &[usize],
    gamma: f64,
    rng: &mut impl Rng,
) -> (DVector<Complex64>, DVector<Complex64>) {
    assert!(gamma >= 0.0, "the coefficient floor must be nonnegative");
    let mut x = DVector::zeros(dict.n_atoms());
    for &j in support {
        x[j - 1] = coefficient(dict.is_real(), gamma, rng);
    }
    let y = dict.matrix() * &x;
    (x, y)
}

fn noise_like(y: &DVector<Complex64>, real: bool, rng: &mut impl Rng) -> DVector<Complex64> {
    DVector::from_fn(y.len(), |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = if real { 0.0 } else { StandardNormal.sample(rng) };
        Complex64::new(re, im)
    })
}

fn is_real(y: &DVector<Complex64>) -> bool {
    y.iter().all(|z| z.im == 0.0)
}

/// `y + w` with `w` uniform on the sphere `||w||_2 = eps`. The noise is real
/// when `y` is real.
pub fn add_bounded_noise(y: &DVector<Complex64>, eps: f64, rng: &mut impl Rng) -> DVector<Complex64> {
    assert!(eps >= 0.0, "the noise bound must be nonnegative");
    if eps == 0.0 {
        return y.clone();
    }
    let w = noise_like(y, is_real(y), rng);
    y + w.unscale(w.norm()).scale(eps)
}

/// `y + w` with iid `N(0, sigma^2)` entries. The noise is real when `y` is
/// real; for complex signals real and imaginary parts each get variance
/// `sigma^2 / 2`.
pub fn add_gaussian_noise(y: &DVector<Complex64>, sigma: f64, rng: &mut impl Rng) -> DVector<Complex64> {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    if sigma == 0.0 {
        return y.clone();
    }
    let real = is_real(y);
    let scale = if real { sigma } else { sigma / std::f64::consts::SQRT_2 };
    y + noise_like(y, real, rng).scale(scale)
}

/// The smallest `p` with `v[n] == v[n + p]` (to 1e-8) for all valid `n`;
/// `v.len()` when no shorter period exists.
pub fn minimal_period(v: &[Complex64]) -> usize {
    assert!(!v.is_empty(), "the signal is empty");
    (1..v.len()).find(|&p| (0..v.len() - p).all(|n| (v[n] - v[n + p]).norm() <= 1e-8)).unwrap_or(v.len())
}
