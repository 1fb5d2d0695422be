//! Maximal functions `sup_t |S_t f(x)|` of the heat semigroup and of `P^k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::sets::ConnectedSetFamily;
use crate::spectral::{SpectralDecomposition, CLUSTER_TOL};

const TAIL_TOL: f64 = 1e-13;
const GRID: usize = 512;
const DISCRETE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaximalMode {
    Continuous,
    Discrete,
    DiscreteEven,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximalProfile {
    pub mode: MaximalMode,
    pub f: Vec<f64>,
    pub f_star: Vec<f64>,
    /// Time of the sup per state (`inf` when the sup is the limit `E_pi f`).
    pub argmax_time: Vec<f64>,
    pub tolerance: f64,
}

/// `(rates, coefficients)` of `t -> S_t f(x)` with clustered rates merged.
fn exp_sum(d: &SpectralDecomposition, c: &[f64], x: usize) -> (Vec<f64>, Vec<f64>) {
    let fm = d.eigenfunctions();
    let mut rates: Vec<f64> = Vec::new();
    let mut coef: Vec<f64> = Vec::new();
    for (i, &g) in d.gammas().iter().enumerate() {
        let a = c[i] * fm[(x, i)];
        match rates.last() {
            Some(&last) if (g - last).abs() <= CLUSTER_TOL => *coef.last_mut().unwrap() += a,
            _ => {
                rates.push(g);
                coef.push(a);
            }
        }
    }
    (rates, coef)
}

/// Log-spaced sample times shared by every state, with `exp(-rate t)` tabulated.
struct TimeGrid {
    times: Vec<f64>,
    /// `table[k][j] = exp(-rates[j] times[k])`.
    table: Vec<Vec<f64>>,
}

impl TimeGrid {
    fn new(rates: &[f64], moving: f64) -> Self {
        if rates.len() < 2 || moving == 0.0 {
            return Self {
                times: Vec::new(),
                table: Vec::new(),
            };
        }
        let gmin = rates[1].max(1e-300);
        let gmax = rates[rates.len() - 1];
        let t_max = (moving / TAIL_TOL).ln().max(1.0) / gmin;
        let t_min = 1e-6 / gmax;
        let ratio = (t_max / t_min).ln();
        let times: Vec<f64> = (0..=GRID).map(|k| t_min * (ratio * k as f64 / GRID as f64).exp()).collect();
        let table = times.iter().map(|&t| rates.iter().map(|g| (-g * t).exp()).collect()).collect();
        Self { times, table }
    }
}

fn continuous_sup(rates: &[f64], coef: &[f64], grid: &TimeGrid) -> (f64, f64) {
    let phi = |t: f64| rates.iter().zip(coef).map(|(g, a)| a * (-g * t).exp()).sum::<f64>();
    let dphi = |t: f64| -rates.iter().zip(coef).map(|(g, a)| g * a * (-g * t).exp()).sum::<f64>();
    let limit = coef[0];
    let mut best = (phi(0.0).abs(), 0.0);
    if limit.abs() > best.0 {
        best = (limit.abs(), f64::INFINITY);
    }
    let moving: f64 = coef.iter().skip(1).map(|a| a.abs()).sum();
    if moving == 0.0 || rates.len() < 2 {
        return best;
    }
    let mut prev_t = 0.0;
    let mut prev_d = dphi(0.0);
    for (&t, row) in grid.times.iter().zip(&grid.table) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for ((g, a), e) in rates.iter().zip(coef).zip(row) {
            v += a * e;
            dv -= g * a * e;
        }
        if prev_d == 0.0 || prev_d.signum() != dv.signum() {
            let (mut lo, mut hi) = (prev_t, t);
            let s = prev_d.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if dphi(mid).signum() == s && s != 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-12 * hi.max(1e-300) {
                    break;
                }
            }
            let tc = 0.5 * (lo + hi);
            let vc = phi(tc).abs();
            if vc > best.0 {
                best = (vc, tc);
            }
        }
        if v.abs() > best.0 {
            best = (v.abs(), t);
        }
        prev_t = t;
        prev_d = dv;
    }
    best
}

fn discrete_sup(rates: &[f64], coef: &[f64], even: bool) -> (f64, f64) {
    let lams: Vec<f64> = rates.iter().map(|g| 1.0 - g).collect();
    let limit = coef[0];
    // Terms with |lambda| = 1 other than the constant never decay.
    let persistent: Vec<usize> = (1..lams.len()).filter(|&i| lams[i].abs() >= 1.0 - 1e-12).collect();
    let mut best = (f64::NEG_INFINITY, 0.0);
    let step = if even { 2 } else { 1 };
    let mut k: u64 = 0;
    while k <= DISCRETE_CAP {
        let mut v = 0.0;
        let mut resid = 0.0;
        for (i, (&l, &a)) in lams.iter().zip(coef).enumerate() {
            let p = l.powi(k.min(i32::MAX as u64) as i32);
            v += a * p;
            if i > 0 && !persistent.contains(&i) {
                resid += (a * p).abs();
            }
        }
        if v.abs() > best.0 {
            best = (v.abs(), k as f64);
        }
        if resid < TAIL_TOL && k >= 2 {
            break;
        }
        k += step;
    }
    // Limit values of the non-decaying part.
    let mut tail_values = vec![limit];
    if !persistent.is_empty() {
        let alt: f64 = persistent.iter().map(|&i| coef[i] * lams[i].signum()).sum();
        let same: f64 = persistent.iter().map(|&i| coef[i]).sum();
        tail_values = if even { vec![limit + same] } else { vec![limit + same, limit + alt] };
    }
    for v in tail_values {
        if v.abs() > best.0 {
            best = (v.abs(), f64::INFINITY);
        }
    }
    best
}

/// `f^*(x) = sup_t |S_t f(x)|` (continuous), `sup_k |P^k f(x)|` (discrete) or the even-`k` version.
pub fn maximal_function(chain: &ChainModel, f: &[f64], mode: MaximalMode) -> Result<MaximalProfile> {
    chain.require_reversible()?;
    if mode != MaximalMode::Continuous {
        chain.require_discrete()?;
    }
    if f.len() != chain.n() {
        return Err(Error::BadParams(format!("function has {} entries, chain has {} states", f.len(), chain.n())));
    }
    let d = SpectralDecomposition::new(chain)?;
    maximal_with(&d, f, mode)
}

pub fn maximal_with(d: &SpectralDecomposition, f: &[f64], mode: MaximalMode) -> Result<MaximalProfile> {
    let c = d.coefficients(f);
    let sums: Vec<(Vec<f64>, Vec<f64>)> = (0..d.n()).map(|x| exp_sum(d, &c, x)).collect();
    // Merging depends only on the spectrum, so every state shares the same rates.
    let grid = match mode {
        MaximalMode::Continuous => {
            let moving = sums.iter().map(|(_, a)| a.iter().skip(1).map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            TimeGrid::new(&sums[0].0, moving)
        }
        _ => TimeGrid::new(&[], 0.0),
    };
    let out: Vec<(f64, f64)> = sums
        .par_iter()
        .map(|(rates, coef)| {
            match mode {
                MaximalMode::Continuous => continuous_sup(rates, coef, &grid),
                MaximalMode::Discrete => discrete_sup(rates, coef, false),
                MaximalMode::DiscreteEven => discrete_sup(rates, coef, true),
            }
        })
        .collect();
    Ok(MaximalProfile {
        mode,
        f: f.to_vec(),
        f_star: out.iter().map(|o| o.0).collect(),
        argmax_time: out.iter().map(|o| o.1).collect(),
        tolerance: 1e-9,
    })
}

/// `||g||_{p,pi}`.
pub fn pi_norm(g: &[f64], pi: &[f64], p: f64) -> f64 {
    let s: f64 = g.iter().zip(pi).map(|(v, w)| w * v.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

#[derive(Debug, Clone, Serialize)]
pub struct SurpriseRecord {
    pub set: Vec<usize>,
    pub mass: f64,
    /// `||f_A^*||_1`.
    pub continuous: f64,
    /// `||(f_A)_*||_1 / 2`; absent for generator-form chains.
    pub discrete_half: Option<f64>,
    /// `e max(1, |log pi(A)|)`.
    pub bound: f64,
    /// `(1 - 1/e) ||f_A^*||_1 - 1`, to be at most `|log pi(A)|`.
    pub reverse: f64,
}

/// Maximal-function norms of the densities `f_A = 1_A/pi(A)` for each set of the family.
pub fn surprise_bound_check(chain: &ChainModel, family: &ConnectedSetFamily) -> Result<Vec<SurpriseRecord>> {
    chain.require_reversible()?;
    let d = SpectralDecomposition::new(chain)?;
    let pi: Vec<f64> = chain.pi().iter().copied().collect();
    let discrete = !chain.is_generator_form();
    family
        .sets
        .par_iter()
        .map(|a| {
            let mass = chain.mass(a);
            let mut f = vec![0.0; chain.n()];
            for &x in a {
                f[x] = 1.0 / mass;
            }
            let cont = pi_norm(&maximal_with(&d, &f, MaximalMode::Continuous)?.f_star, &pi, 1.0);
            let disc = if discrete {
                Some(0.5 * pi_norm(&maximal_with(&d, &f, MaximalMode::Discrete)?.f_star, &pi, 1.0))
            } else {
                None
            };
            Ok(SurpriseRecord {
                set: a.clone(),
                mass,
                continuous: cont,
                discrete_half: disc,
                bound: std::f64::consts::E * mass.ln().abs().max(1.0),
                reverse: (1.0 - (-1.0f64).exp()) * cont - 1.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;

    #[test]
    fn two_state_indicator_density() {
        let c = family::path(2).unwrap();
        let m = maximal_function(&c, &[2.0, 0.0], MaximalMode::Continuous).unwrap();
        assert!((m.f_star[0] - 2.0).abs() < 1e-12);
        assert!((m.f_star[1] - 1.0).abs() < 1e-12);
        // discrete: P f = (0, 2), so both states see 2
        let m = maximal_function(&c, &[2.0, 0.0], MaximalMode::Discrete).unwrap();
        assert!(m.f_star.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let m = maximal_function(&c, &[2.0, 0.0], MaximalMode::DiscreteEven).unwrap();
        assert!((m.f_star[0] - 2.0).abs() < 1e-12 && m.f_star[1].abs() < 1e-12);
    }

    #[test]
    fn constants_and_eigenfunctions() {
        let c = family::cycle(5).unwrap();
        let m = maximal_function(&c, &[-3.0; 5], MaximalMode::Continuous).unwrap();
        assert!(m.f_star.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let d = SpectralDecomposition::new(&c).unwrap();
        let f2: Vec<f64> = (0..5).map(|x| d.eigenfunctions()[(x, 1)]).collect();
        let m = maximal_function(&c, &f2, MaximalMode::Continuous).unwrap();
        for (fs, v) in m.f_star.iter().zip(&f2) {
            assert!((fs - v.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_dominates_samples() {
        let c = family::path(5).unwrap();
        let f = [3.0, -1.0, 0.5, 2.0, -4.0];
        let m = maximal_function(&c, &f, MaximalMode::Continuous).unwrap();
        let d = SpectralDecomposition::new(&c).unwrap();
        for k in 0..200 {
            let t = k as f64 * 0.05;
            let w = d.weights(crate::spectral::TimeMode::Continuous, t).unwrap();
            let s = d.apply(&w, &f);
            for (sx, fs) in s.iter().zip(&m.f_star) {
                assert!(sx.abs() <= fs + 1e-10);
            }
        }
    }

    #[test]
    fn surprise_two_state() {
        let c = family::path(2).unwrap();
        let fam = crate::sets::con_half(&c).unwrap();
        let r = surprise_bound_check(&c, &fam).unwrap();
        assert!((r[0].continuous - 1.5).abs() < 1e-12);
        assert!(r[0].continuous <= r[0].bound);
    }
}
