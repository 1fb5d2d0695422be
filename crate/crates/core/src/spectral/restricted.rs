use nalgebra::DMatrix;

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_ascending;

/// Spectrum of the killed (restricted) generator on a set `A`.
///
/// `gammas` are the ascending eigenvalues of `L_A` (for unit rates, of `I - Q_A`);
/// `f` holds the matching right eigenfunctions on `A`, orthonormal in `L_2(pi|_A)`.
#[derive(Debug, Clone)]
pub struct RestrictedSpectrum {
    set: Vec<usize>,
    gammas: Vec<f64>,
    f: DMatrix<f64>,
    pi_a: Vec<f64>,
    mass: f64,
    mu: Vec<f64>,
    overlaps: Vec<f64>,
}

impl RestrictedSpectrum {
    /// The set, sorted ascending.
    pub fn set(&self) -> &[usize] {
        &self.set
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// `lambda(A)`: the smallest eigenvalue of `I - Q_A`.
    pub fn lambda(&self) -> f64 {
        self.gammas[0]
    }

    /// `beta(A) = 1 - lambda(A)`.
    pub fn beta(&self) -> f64 {
        1.0 - self.gammas[0]
    }

    pub fn t_rel(&self) -> f64 {
        1.0 / self.gammas[0]
    }

    /// `pi(A)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Quasi-stationary distribution, indexed like [`set`](Self::set).
    pub fn qsd(&self) -> &[f64] {
        &self.mu
    }

    /// `pi` restricted to `A` (not normalized), indexed like the set.
    pub fn pi_on_set(&self) -> &[f64] {
        &self.pi_a
    }

    /// Eigenfunction matrix on `A` (rows follow the set order).
    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// `c_i = <f_i, 1_A>_pi`.
    pub fn overlaps(&self) -> &[f64] {
        &self.overlaps
    }

    /// Position of a state within the set.
    pub fn position(&self, x: usize) -> Option<usize> {
        self.set.binary_search(&x).ok()
    }

    /// Expansion `sum_i a_i e^{-t gamma_i}` of the survival probability from a start law,
    /// given as `(state, weight)` pairs; mass outside `A` contributes nothing.
    pub fn survival_coefficients(&self, start: &[(usize, f64)]) -> Vec<f64> {
        let k = self.set.len();
        let mut a = vec![0.0; k];
        for &(x, w) in start {
            if let Some(px) = self.position(x) {
                for (i, ai) in a.iter_mut().enumerate() {
                    *ai += w * self.f[(px, i)] * self.overlaps[i];
                }
            }
        }
        a
    }
}

/// Restricted spectrum of a nonempty proper subset.
pub fn restricted(chain: &ChainModel, set: &[usize]) -> Result<RestrictedSpectrum> {
    let n = chain.n();
    let mut set: Vec<usize> = set.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.is_empty() || set.len() >= n {
        return Err(Error::EmptyOrFullSet);
    }
    if let Some(&bad) = set.iter().find(|&&x| x >= n) {
        return Err(Error::BadState(bad));
    }
    let l = chain.symmetrized_neg_generator();
    let pi = chain.pi();
    let k = set.len();
    let sqrt_pi: Vec<f64> = set.iter().map(|&x| pi[x].sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(k, k);
    for (i, &x) in set.iter().enumerate() {
        for (j, &y) in set.iter().enumerate() {
            s[(i, j)] = sqrt_pi[i] * l[(x, y)] / sqrt_pi[j];
        }
    }
    let (gammas, phi) = sym_eigen_ascending(s)?;
    let mut f = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for a in 0..k {
            f[(a, i)] = phi[(a, i)] / sqrt_pi[a];
        }
    }
    // Perron vector is single-signed; make it nonnegative.
    if f.column(0).sum() < 0.0 {
        f.column_mut(0).neg_mut();
    }
    let pi_a: Vec<f64> = set.iter().map(|&x| pi[x]).collect();
    let mass = pi_a.iter().sum();
    let overlaps: Vec<f64> = (0..k).map(|i| (0..k).map(|a| f[(a, i)] * pi_a[a]).sum()).collect();
    let raw: Vec<f64> = (0..k).map(|a| (phi[(a, 0)] * sqrt_pi[a]).abs()).collect();
    let total: f64 = raw.iter().sum();
    let mu = raw.into_iter().map(|v| v / total).collect();
    Ok(RestrictedSpectrum {
        set,
        gammas,
        f,
        pi_a,
        mass,
        mu,
        overlaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;

    #[test]
    fn singleton_in_two_state() {
        let r = restricted(&family::path(2).unwrap(), &[0]).unwrap();
        assert!((r.lambda() - 1.0).abs() < 1e-15);
        assert_eq!(r.qsd(), &[1.0]);
    }

    #[test]
    fn path3_pair() {
        let r = restricted(&family::path(3).unwrap(), &[0, 1]).unwrap();
        assert!((r.lambda() - (1.0 - 0.5_f64.sqrt())).abs() < 1e-14);
        assert!((r.qsd()[0] - 0.414213562373095).abs() < 1e-12);
        assert!((r.qsd()[1] - 0.585786437626905).abs() < 1e-12);
        let r = restricted(&family::path(3).unwrap(), &[1]).unwrap();
        assert!((r.lambda() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_full() {
        let c = family::path(3).unwrap();
        assert_eq!(restricted(&c, &[]).unwrap_err(), Error::EmptyOrFullSet);
        assert_eq!(restricted(&c, &[0, 1, 2]).unwrap_err(), Error::EmptyOrFullSet);
    }

    #[test]
    fn qsd_is_left_eigenvector() {
        let c = family::cycle(6).unwrap();
        let set = [0, 1, 2];
        let r = restricted(&c, &set).unwrap();
        let q = c.q();
        for (j, &y) in set.iter().enumerate() {
            let lhs: f64 = set.iter().enumerate().map(|(i, &x)| r.qsd()[i] * q[(x, y)]).sum();
            assert!((lhs - r.beta() * r.qsd()[j]).abs() < 1e-12);
        }
    }
}
