//! Escape-time survival curves, threshold times and expected hitting times.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::linalg::solve_refined;
use crate::spectral::{int_pow, integer_time, restricted, RestrictedSpectrum, TimeMode};

/// Where a survival curve starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    State(usize),
    /// `pi` conditioned on the set.
    StationaryOnSet,
    /// The quasi-stationary law of the set.
    QuasiStationary,
    /// Arbitrary law on the whole state space.
    Distribution(Vec<f64>),
}

/// `t -> P_start[T_{A^c} > t] = sum_i a_i e^{-t gamma_i}` (continuous) or
/// `sum_i a_i (1 - gamma_i)^k` (discrete).
#[derive(Debug, Clone, Serialize)]
pub struct SurvivalCurve {
    pub mode: TimeMode,
    pub rates: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// Probability that the start lies in the set (the value at time 0).
    pub initial: f64,
    /// `1/lambda(A)`.
    pub t_rel_set: f64,
}

impl SurvivalCurve {
    pub fn from_spectrum(spec: &RestrictedSpectrum, start: &Start, mode: TimeMode) -> Result<Self> {
        if mode == TimeMode::Averaged {
            return Err(Error::BadMode("survival curves are continuous or discrete".into()));
        }
        let set = spec.set();
        let weights: Vec<(usize, f64)> = match start {
            Start::State(x) => vec![(*x, 1.0)],
            Start::StationaryOnSet => {
                let m = spec.mass();
                set.iter().zip(spec.pi_on_set()).map(|(&x, p)| (x, p / m)).collect()
            }
            Start::QuasiStationary => set.iter().copied().zip(spec.qsd().iter().copied()).collect(),
            Start::Distribution(nu) => nu.iter().copied().enumerate().filter(|(_, w)| *w != 0.0).collect(),
        };
        let initial = weights
            .iter()
            .filter(|(x, _)| spec.position(*x).is_some())
            .map(|(_, w)| w)
            .sum();
        let coeffs = if let Start::QuasiStationary = start {
            // Exactly geometric/exponential escape.
            let mut c = vec![0.0; set.len()];
            c[0] = 1.0;
            c
        } else {
            spec.survival_coefficients(&weights)
        };
        Ok(Self {
            mode,
            rates: spec.gammas().to_vec(),
            coeffs,
            initial,
            t_rel_set: spec.t_rel(),
        })
    }

    /// Raw spectral sum (not clamped).
    pub fn raw(&self, t: f64) -> f64 {
        match self.mode {
            TimeMode::Continuous => self.rates.iter().zip(&self.coeffs).map(|(g, a)| a * (-t * g).exp()).sum(),
            _ => {
                let k = t as u64;
                self.rates.iter().zip(&self.coeffs).map(|(g, a)| a * int_pow(1.0 - g, k)).sum()
            }
        }
    }

    /// Survival probability at time `t`.
    pub fn value(&self, t: f64) -> Result<f64> {
        match self.mode {
            TimeMode::Continuous => {
                if t.is_nan() {
                    return Err(Error::BadTime("NaN".into()));
                }
                if t < 0.0 {
                    return Err(Error::NegativeTime(t));
                }
            }
            _ => {
                integer_time(t, 0)?;
            }
        }
        if t == 0.0 {
            return Ok(self.initial);
        }
        Ok(self.raw(t).clamp(0.0, self.initial))
    }
}

/// Survival curve for escaping `set` from `start`.
pub fn survival_curve(chain: &ChainModel, start: &Start, set: &[usize], mode: TimeMode) -> Result<SurvivalCurve> {
    chain.require_reversible()?;
    if mode == TimeMode::Discrete {
        chain.require_discrete()?;
    }
    if let Start::State(x) = start {
        if *x >= chain.n() {
            return Err(Error::BadState(*x));
        }
    }
    let spec = restricted(chain, set)?;
    SurvivalCurve::from_spectrum(&spec, start, mode)
}

/// `P_start[T_{A^c} > t]`. A start outside `A` gives 0.
pub fn survival(chain: &ChainModel, start: &Start, set: &[usize], t: f64, mode: TimeMode) -> Result<f64> {
    survival_curve(chain, start, set, mode)?.value(t)
}

const MAX_DOUBLINGS: usize = 200;
const DISCRETE_CAP: u64 = 1 << 52;

/// `min{t : S(t) <= target}`.
///
/// Continuous: bracket by doubling from `t_rel(A)`, then bisection to relative width 1e-13.
/// Discrete: galloping then binary search over integers. Survival is nonincreasing,
/// so both searches return the first crossing; exact ties resolve to the smaller time.
pub fn threshold_time(curve: &SurvivalCurve, target: f64) -> Result<f64> {
    if target.is_nan() || target <= 0.0 {
        return Err(Error::DomainError(format!("threshold target {target} must be positive")));
    }
    if curve.initial <= target {
        return Ok(0.0);
    }
    let below = |t: f64| curve.raw(t) <= target;
    match curve.mode {
        TimeMode::Continuous => {
            let mut hi = curve.t_rel_set.max(1e-12);
            let mut lo = 0.0;
            let mut n = 0;
            while !below(hi) {
                lo = hi;
                hi *= 2.0;
                n += 1;
                if n > MAX_DOUBLINGS {
                    return Err(Error::NumericalFailure("survival threshold bracket not found".into()));
                }
            }
            for _ in 0..400 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if below(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-13 * hi {
                    break;
                }
            }
            Ok(hi)
        }
        _ => {
            let mut hi: u64 = 1;
            let mut lo: u64 = 0;
            while !below(hi as f64) {
                lo = hi;
                hi = hi.saturating_mul(2);
                if hi > DISCRETE_CAP {
                    return Err(Error::NumericalFailure("discrete survival threshold not reached".into()));
                }
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if below(mid as f64) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi as f64)
        }
    }
}

/// `E_start[T_B^m]` for `m in {1, 2}`, by linear solves on the complement of `B`.
pub fn expected_hitting(chain: &ChainModel, start: usize, target: &[usize], mode: TimeMode, moment: u32) -> Result<f64> {
    let v = expected_hitting_all(chain, target, mode, moment)?;
    v.get(start).copied().ok_or(Error::BadState(start))
}

/// `E_x[T_B^m]` for every state `x`.
pub fn expected_hitting_all(chain: &ChainModel, target: &[usize], mode: TimeMode, moment: u32) -> Result<Vec<f64>> {
    let n = chain.n();
    if target.is_empty() {
        return Err(Error::EmptyOrFullSet);
    }
    if let Some(&bad) = target.iter().find(|&&x| x >= n) {
        return Err(Error::BadState(bad));
    }
    if !(moment == 1 || moment == 2) {
        return Err(Error::DomainError(format!("moment must be 1 or 2, got {moment}")));
    }
    match mode {
        TimeMode::Continuous => {}
        TimeMode::Discrete => chain.require_discrete()?,
        TimeMode::Averaged => return Err(Error::BadMode("hitting times are continuous or discrete".into())),
    }
    let mut in_target = vec![false; n];
    for &b in target {
        in_target[b] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&x| !in_target[x]).collect();
    let mut out = vec![0.0; n];
    if rest.is_empty() {
        return Ok(out);
    }
    let k = rest.len();
    // Continuous uses the generator r(I - P); discrete uses I - P.
    let l = match mode {
        TimeMode::Continuous => chain.neg_generator(),
        _ => DMatrix::identity(n, n) - chain.p(),
    };
    let mut m = DMatrix::<f64>::zeros(k, k);
    for (i, &x) in rest.iter().enumerate() {
        for (j, &y) in rest.iter().enumerate() {
            m[(i, j)] = l[(x, y)];
        }
    }
    let h = solve_refined(&m, &DVector::from_element(k, 1.0))?;
    let result = if moment == 1 {
        h
    } else {
        let rhs = match mode {
            TimeMode::Continuous => &h * 2.0,
            _ => h.map(|v| 2.0 * v - 1.0),
        };
        solve_refined(&m, &rhs)?
    };
    for (i, &x) in rest.iter().enumerate() {
        out[x] = result[i];
    }
    Ok(out)
}

/// Flow ratio `Phi(T_y) = pi(y) P(y,z) / pi(T_y)` across the tree edge `(y, z)`, where `subtree`
/// is the set of vertices separated from `z` by removing the edge (it contains `y`).
pub fn kac_phi(chain: &ChainModel, y: usize, z: usize, subtree: &[usize]) -> Result<f64> {
    if y >= chain.n() {
        return Err(Error::BadState(y));
    }
    if z >= chain.n() {
        return Err(Error::BadState(z));
    }
    if chain.p()[(y, z)] <= 0.0 || !subtree.contains(&y) || subtree.contains(&z) {
        return Err(Error::NotATree);
    }
    Ok(chain.conductance(y, z) / chain.mass(subtree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;

    fn ts() -> ChainModel {
        family::path(2).unwrap()
    }

    #[test]
    fn two_state_singleton_escape() {
        let c = ts();
        let curve = survival_curve(&c, &Start::State(0), &[0], TimeMode::Continuous).unwrap();
        for &t in &[0.0, 0.3, 1.7] {
            assert!((curve.value(t).unwrap() - (-t).exp()).abs() < 1e-15);
        }
        let t = threshold_time(&curve, 0.75).unwrap();
        assert!((t - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        let t = threshold_time(&curve, 0.125).unwrap();
        assert!((t - 8f64.ln()).abs() < 1e-12);
        let d = survival(&c, &Start::State(0), &[0], 1.0, TimeMode::Discrete).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn start_outside_set() {
        let c = ts();
        let curve = survival_curve(&c, &Start::State(1), &[0], TimeMode::Continuous).unwrap();
        assert_eq!(curve.value(0.0).unwrap(), 0.0);
        assert_eq!(threshold_time(&curve, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn quasi_stationary_start_is_exponential() {
        let c = family::path(3).unwrap();
        let curve = survival_curve(&c, &Start::QuasiStationary, &[0, 1], TimeMode::Continuous).unwrap();
        let lam = 1.0 - 0.5_f64.sqrt();
        for &t in &[0.5, 2.0, 5.0] {
            assert!((curve.value(t).unwrap() - (-lam * t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_threshold_gallop() {
        let c = family::path(3).unwrap().lazy(0.5).unwrap();
        let curve = survival_curve(&c, &Start::State(0), &[0], TimeMode::Discrete).unwrap();
        // geometric with parameter 1/2
        assert_eq!(threshold_time(&curve, 0.5).unwrap(), 1.0);
        assert_eq!(threshold_time(&curve, 0.2).unwrap(), 3.0);
    }

    #[test]
    fn hitting_examples() {
        let p3 = family::path(3).unwrap();
        assert!((expected_hitting(&p3, 1, &[2], TimeMode::Continuous, 1).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(expected_hitting(&p3, 2, &[2], TimeMode::Continuous, 1).unwrap(), 0.0);
        assert!((expected_hitting(&ts(), 0, &[1], TimeMode::Continuous, 1).unwrap() - 1.0).abs() < 1e-14);
        // Exp(1): second moment 2
        assert!((expected_hitting(&ts(), 0, &[1], TimeMode::Continuous, 2).unwrap() - 2.0).abs() < 1e-13);
        // discrete: T = 1 surely
        assert!((expected_hitting(&ts(), 0, &[1], TimeMode::Discrete, 2).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn kac_on_path3() {
        let p3 = family::path(3).unwrap();
        let phi = kac_phi(&p3, 1, 2, &[0, 1]).unwrap();
        assert!((phi - 1.0 / 3.0).abs() < 1e-15);
        let e = expected_hitting(&p3, 1, &[2], TimeMode::Continuous, 1).unwrap();
        assert!((phi * e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaled_time_change() {
        let c = ts();
        let fast = c.rescale_rows(&[3.0, 3.0]).unwrap();
        let a = survival_curve(&c, &Start::State(0), &[0], TimeMode::Continuous).unwrap();
        let b = survival_curve(&fast, &Start::State(0), &[0], TimeMode::Continuous).unwrap();
        for &t in &[0.1, 0.5, 1.3] {
            assert!((b.value(t).unwrap() - a.value(3.0 * t).unwrap()).abs() < 1e-12);
        }
        assert!((threshold_time(&b, 0.5).unwrap() - threshold_time(&a, 0.5).unwrap() / 3.0).abs() < 1e-12);
    }
}
