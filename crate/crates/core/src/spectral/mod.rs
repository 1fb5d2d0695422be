//! Eigendecomposition-backed semigroups.
//!
//! Everything here is built on the symmetrized generator `L = (I - Q)` (or its
//! rate-weighted analogue for generator-form chains), diagonalized in `L_2(pi)`:
//! `L f_i = gamma_i f_i` with `gamma_1 = 0`, `f_1 = 1`. For unit-rate chains the
//! eigenvalues of `Q` are `lambda_i = 1 - gamma_i`.

mod norm;
mod restricted;

pub use norm::{hypercontractive_time, two_q_norm, NormEstimate, NormOptions};
pub use restricted::{restricted, RestrictedSpectrum};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_ascending;

/// Eigenvalues closer than this are treated as equal.
pub const CLUSTER_TOL: f64 = 1e-11;
/// Eigenvalues of `P` with modulus at most this are treated as exactly zero.
const ZERO_EIGEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    Continuous,
    Discrete,
    Averaged,
}

impl TimeMode {
    pub fn name(self) -> &'static str {
        match self {
            TimeMode::Continuous => "continuous",
            TimeMode::Discrete => "discrete",
            TimeMode::Averaged => "averaged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    gammas: Vec<f64>,
    f: DMatrix<f64>,
    pi: DVector<f64>,
    reversible: bool,
    unit_rates: bool,
}

/// A transition row `K(x,.)` together with its density `K(x,.)/pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub dist: Vec<f64>,
    pub density: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn new(chain: &ChainModel) -> Result<Self> {
        let n = chain.n();
        let pi = chain.pi().clone();
        let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
        let l = chain.symmetrized_neg_generator();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                s[(x, y)] = sqrt_pi[x] * l[(x, y)] / sqrt_pi[y];
            }
        }
        let (mut gammas, phi) = sym_eigen_ascending(s)?;
        let mut f = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for x in 0..n {
                f[(x, i)] = phi[(x, i)] / sqrt_pi[x];
            }
            if i > 0 {
                orient(&mut f, i);
            }
        }
        // The top eigenpair is known exactly.
        gammas[0] = 0.0;
        f.column_mut(0).fill(1.0);
        Ok(Self {
            gammas,
            f,
            pi,
            reversible: chain.is_reversible(),
            unit_rates: !chain.is_generator_form(),
        })
    }

    pub fn n(&self) -> usize {
        self.gammas.len()
    }

    /// Ascending eigenvalues of the (symmetrized) negative generator.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Descending eigenvalues `lambda_i = 1 - gamma_i` of `Q`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.gammas.iter().map(|g| 1.0 - g).collect()
    }

    /// Column `i` is the eigenfunction `f_i`, orthonormal in `L_2(pi)`.
    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn has_unit_rates(&self) -> bool {
        self.unit_rates
    }

    /// Spectral gap of `L`; `+inf` for a single state.
    pub fn gap(&self) -> f64 {
        if self.n() < 2 {
            f64::INFINITY
        } else {
            self.gammas[1]
        }
    }

    /// Per-eigenvalue multipliers of the semigroup at time `t` in the given mode.
    pub fn weights(&self, mode: TimeMode, t: f64) -> Result<Vec<f64>> {
        match mode {
            TimeMode::Continuous => {
                check_time(t)?;
                Ok(self.gammas.iter().map(|g| (-t * g).exp()).collect())
            }
            TimeMode::Discrete => {
                let k = integer_time(t, 0)?;
                self.require_unit_rates()?;
                Ok(self.gammas.iter().map(|g| int_pow(1.0 - g, k)).collect())
            }
            TimeMode::Averaged => {
                let k = integer_time(t, 1)?;
                self.require_unit_rates()?;
                Ok(self
                    .gammas
                    .iter()
                    .map(|g| {
                        let l = 1.0 - g;
                        int_pow(l, k - 1) * (1.0 + l) / 2.0
                    })
                    .collect())
            }
        }
    }

    fn require_unit_rates(&self) -> Result<()> {
        if self.unit_rates {
            Ok(())
        } else {
            Err(Error::GeneratorForm)
        }
    }

    fn require_reversible(&self) -> Result<()> {
        if self.reversible {
            Ok(())
        } else {
            Err(Error::NotReversible)
        }
    }

    /// `K(x,.)` and its density for arbitrary spectral weights.
    pub fn row_from_weights(&self, x: usize, w: &[f64]) -> Result<KernelRow> {
        self.require_reversible()?;
        self.check_state(x)?;
        let n = self.n();
        let mut density = vec![0.0; n];
        for (i, &wi) in w.iter().enumerate() {
            let c = wi * self.f[(x, i)];
            if c == 0.0 {
                continue;
            }
            for (y, d) in density.iter_mut().enumerate() {
                *d += c * self.f[(y, i)];
            }
        }
        let dist = density.iter().zip(self.pi.iter()).map(|(d, p)| d * p).collect();
        Ok(KernelRow { dist, density })
    }

    /// `K(x,y)/pi(y) - 1` computed from the non-constant modes only.
    pub fn density_deviation(&self, x: usize, w: &[f64]) -> Result<Vec<f64>> {
        self.require_reversible()?;
        self.check_state(x)?;
        let n = self.n();
        let mut dev = vec![0.0; n];
        for (i, &wi) in w.iter().enumerate().skip(1) {
            let c = wi * self.f[(x, i)];
            if c == 0.0 {
                continue;
            }
            for (y, d) in dev.iter_mut().enumerate() {
                *d += c * self.f[(y, i)];
            }
        }
        Ok(dev)
    }

    /// `||K(x,.) - pi||_{2,pi}^2 = sum_{i>=2} w_i^2 f_i(x)^2`.
    pub fn l2_sq_from_weights(&self, x: usize, w: &[f64]) -> Result<f64> {
        self.require_reversible()?;
        self.check_state(x)?;
        Ok(w.iter().enumerate().skip(1).map(|(i, wi)| (wi * self.f[(x, i)]).powi(2)).sum())
    }

    /// Heat kernel row `H_t(x,.)`.
    pub fn heat_kernel(&self, x: usize, t: f64) -> Result<KernelRow> {
        let w = self.weights(TimeMode::Continuous, t)?;
        self.row_from_weights(x, &w)
    }

    /// `P^k(x,.)`.
    pub fn discrete_kernel(&self, x: usize, k: f64) -> Result<KernelRow> {
        let w = self.weights(TimeMode::Discrete, k)?;
        self.row_from_weights(x, &w)
    }

    /// `A_k(x,.) = (P^k + P^{k-1})(x,.)/2`.
    pub fn averaged_kernel(&self, x: usize, k: f64) -> Result<KernelRow> {
        let w = self.weights(TimeMode::Averaged, k)?;
        self.row_from_weights(x, &w)
    }

    /// Applies the semigroup with the given weights to a function: `sum_i w_i f_i <f_i, g>_pi`.
    pub fn apply(&self, w: &[f64], g: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let coef: f64 = (0..n).map(|y| self.f[(y, i)] * g[y] * self.pi[y]).sum::<f64>() * wi;
            for (x, o) in out.iter_mut().enumerate() {
                *o += coef * self.f[(x, i)];
            }
        }
        out
    }

    /// Expansion coefficients `<f_i, g>_pi`.
    pub fn coefficients(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|y| self.f[(y, i)] * g[y] * self.pi[y]).sum())
            .collect()
    }

    /// `(t_rel, t_rel_absolute)`; see [`relaxation_times`].
    pub fn relaxation_times(&self) -> RelaxationTimes {
        let t_rel = 1.0 / self.gap();
        let t_rel_absolute = if self.n() < 2 || !self.unit_rates {
            if self.n() < 2 {
                0.0
            } else {
                f64::NAN
            }
        } else {
            let l2 = 1.0 - self.gammas[1];
            let ln = 1.0 - self.gammas[self.n() - 1];
            inv_abs_log_abs(l2).max(inv_abs_log_abs(ln))
        };
        RelaxationTimes { t_rel, t_rel_absolute }
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x < self.n() {
            Ok(())
        } else {
            Err(Error::BadState(x))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationTimes {
    pub t_rel: f64,
    /// `NaN` for generator-form chains, which have no discrete-time kernel.
    pub t_rel_absolute: f64,
}

/// `|log|l||^{-1}` with `|log 0|^{-1} = 0` and `|log 1|^{-1} = +inf`.
fn inv_abs_log_abs(l: f64) -> f64 {
    let a = l.abs();
    if a <= ZERO_EIGEN_TOL {
        0.0
    } else if a >= 1.0 - ZERO_EIGEN_TOL {
        f64::INFINITY
    } else {
        1.0 / a.ln().abs()
    }
}

/// Fixes the sign of eigenfunction `i` so that its largest-magnitude entry (first on ties) is positive.
fn orient(f: &mut DMatrix<f64>, i: usize) {
    let col = f.column(i);
    let mut best = 0;
    for x in 1..col.len() {
        if col[x].abs() > col[best].abs() * (1.0 + 1e-9) {
            best = x;
        }
    }
    if col[best] < 0.0 {
        f.column_mut(i).neg_mut();
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t.is_infinite() {
        return Err(Error::BadTime(format!("{t} is not a finite time")));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

pub(crate) fn integer_time(t: f64, min: u64) -> Result<u64> {
    check_time(t)?;
    if t.fract() != 0.0 || t < min as f64 {
        return Err(Error::BadTime(format!("{t} is not an integer time >= {min}")));
    }
    Ok(t as u64)
}

pub(crate) fn int_pow(base: f64, k: u64) -> f64 {
    if k <= i32::MAX as u64 {
        base.powi(k as i32)
    } else {
        base.powf(k as f64)
    }
}

pub fn decompose(chain: &ChainModel) -> Result<SpectralDecomposition> {
    SpectralDecomposition::new(chain)
}

pub fn heat_kernel(chain: &ChainModel, x: usize, t: f64) -> Result<KernelRow> {
    check_time(t)?;
    decompose(chain)?.heat_kernel(x, t)
}

pub fn discrete_kernel(chain: &ChainModel, x: usize, t: f64) -> Result<KernelRow> {
    decompose(chain)?.discrete_kernel(x, t)
}

pub fn averaged_kernel(chain: &ChainModel, x: usize, t: f64) -> Result<KernelRow> {
    decompose(chain)?.averaged_kernel(x, t)
}

/// `t_rel = 1/(1 - lambda_2)` and `t_rel_absolute = max |log|lambda||^{-1}` over `lambda_2`, `lambda_n`.
pub fn relaxation_times(chain: &ChainModel) -> Result<RelaxationTimes> {
    Ok(decompose(chain)?.relaxation_times())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;

    fn ts() -> ChainModel {
        family::path(2).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn two_state_spectrum() {
        let d = decompose(&ts()).unwrap();
        let l = d.eigenvalues();
        assert!(close(l[0], 1.0, 1e-15) && close(l[1], -1.0, 1e-14));
        let f = d.eigenfunctions();
        assert!(close(f[(0, 1)].abs(), 1.0, 1e-14) && close(f[(0, 1)], -f[(1, 1)], 1e-14));
    }

    #[test]
    fn path3_and_clique3_spectra() {
        let l = decompose(&family::path(3).unwrap()).unwrap().eigenvalues();
        for (g, w) in l.iter().zip([1.0, 0.0, -1.0]) {
            assert!(close(*g, w, 1e-14));
        }
        let l = decompose(&family::clique(3).unwrap()).unwrap().eigenvalues();
        for (g, w) in l.iter().zip([1.0, -0.5, -0.5]) {
            assert!(close(*g, w, 1e-14));
        }
    }

    #[test]
    fn cycle4_spectrum() {
        let l = decompose(&family::cycle(4).unwrap()).unwrap().eigenvalues();
        for (g, w) in l.iter().zip([1.0, 0.0, 0.0, -1.0]) {
            assert!(close(*g, w, 1e-14));
        }
    }

    #[test]
    fn heat_kernel_two_state() {
        let d = decompose(&ts()).unwrap();
        let r = d.heat_kernel(0, 0.0).unwrap();
        assert!(close(r.dist[0], 1.0, 1e-15) && close(r.dist[1], 0.0, 1e-15));
        for &t in &[0.1, 0.7, 2.0] {
            let r = d.heat_kernel(0, t).unwrap();
            assert!(close(r.density[0], 1.0 + (-2.0 * t).exp(), 1e-14));
        }
        assert_eq!(d.heat_kernel(0, -1.0).unwrap_err(), Error::NegativeTime(-1.0));
    }

    #[test]
    fn discrete_and_averaged_two_state() {
        let d = decompose(&ts()).unwrap();
        let a = d.averaged_kernel(0, 1.0).unwrap();
        assert!(close(a.dist[0], 0.5, 1e-15) && close(a.dist[1], 0.5, 1e-15));
        let p2 = d.discrete_kernel(0, 2.0).unwrap();
        assert!(close(p2.dist[0], 1.0, 1e-14) && close(p2.dist[1], 0.0, 1e-14));
        assert!(matches!(d.discrete_kernel(0, 1.5), Err(Error::BadTime(_))));
        assert!(matches!(d.averaged_kernel(0, 0.0), Err(Error::BadTime(_))));
    }

    #[test]
    fn relaxation_examples() {
        let r = relaxation_times(&ts()).unwrap();
        assert!(close(r.t_rel, 0.5, 1e-14) && r.t_rel_absolute.is_infinite());
        let r = relaxation_times(&ts().lazy(0.5).unwrap()).unwrap();
        assert!(close(r.t_rel, 1.0, 1e-14) && r.t_rel_absolute == 0.0);
        let r = relaxation_times(&family::clique(3).unwrap()).unwrap();
        assert!(close(r.t_rel, 2.0 / 3.0, 1e-14));
    }

    #[test]
    fn generator_form_blocks_discrete() {
        let c = ts().rescale_rows(&[2.0, 1.0]).unwrap();
        let d = decompose(&c).unwrap();
        assert_eq!(d.discrete_kernel(0, 1.0).unwrap_err(), Error::GeneratorForm);
        let r = d.heat_kernel(0, 0.3).unwrap();
        assert!(close(r.dist.iter().sum::<f64>(), 1.0, 1e-14));
    }

    #[test]
    fn rescaled_heat_kernel_matches_two_state_closed_form() {
        // rates (2,1) on the flip chain: generator [[-2,2],[1,-1]], total rate 3
        let c = ts().rescale_rows(&[2.0, 1.0]).unwrap();
        let d = decompose(&c).unwrap();
        let t = 0.4;
        let r = d.heat_kernel(0, t).unwrap();
        let want = 1.0 / 3.0 + 2.0 / 3.0 * (-3.0 * t).exp();
        assert!(close(r.dist[0], want, 1e-14));
    }
}
