//! Lower-bound estimates of `||S_t||_{2 -> q}` by nonlinear power iteration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{SpectralDecomposition, TimeMode};
use crate::error::{Error, Result};
use crate::family::DEFAULT_SEED;
use crate::linalg::weighted_norm;

#[derive(Debug, Clone)]
pub struct NormOptions {
    pub random_starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            random_starts: 32,
            max_iter: 2000,
            tol: 1e-9,
            seed: DEFAULT_SEED,
        }
    }
}

/// Best ratio `||S_t f||_q / ||f||_2` found, with the maximizing `f >= 0` (`||f||_2 = 1`).
/// The true operator norm is at least `value`.
#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub witness: Vec<f64>,
    pub starts: usize,
}

fn normalize(f: &mut [f64], pi: &[f64]) -> bool {
    let nrm = weighted_norm(f, pi, 2.0);
    if !(nrm > 0.0 && nrm.is_finite()) {
        return false;
    }
    f.iter_mut().for_each(|v| *v /= nrm);
    true
}

/// Ascent `f <- S_t((S_t f)^{q-1})`, renormalized; each step cannot decrease the ratio
/// for nonnegative `f` (Boyd's iteration for `2 -> q` norms of positivity-preserving operators).
fn ascend(d: &SpectralDecomposition, w: &[f64], q: f64, mut f: Vec<f64>, opts: &NormOptions) -> (f64, Vec<f64>) {
    let pi: Vec<f64> = d.pi().iter().copied().collect();
    if !normalize(&mut f, &pi) {
        return (0.0, f);
    }
    let objective = |f: &[f64]| {
        let g = d.apply(w, f);
        let g: Vec<f64> = g.into_iter().map(|v| v.max(0.0)).collect();
        (weighted_norm(&g, &pi, q), g)
    };
    let (mut best, mut g) = objective(&f);
    for _ in 0..opts.max_iter {
        let h: Vec<f64> = g.iter().map(|v| v.powf(q - 1.0)).collect();
        let mut next: Vec<f64> = d.apply(w, &h).into_iter().map(|v| v.max(0.0)).collect();
        if !normalize(&mut next, &pi) {
            break;
        }
        let (val, g_next) = objective(&next);
        if !(val > best) {
            break;
        }
        let gain = val - best;
        f = next;
        g = g_next;
        best = val;
        if gain <= opts.tol * best {
            break;
        }
    }
    (best, f)
}

/// Multi-start estimate of `||S_t||_{2->q}` over nonnegative functions.
pub fn two_q_norm(d: &SpectralDecomposition, t: f64, q: f64, opts: &NormOptions) -> Result<NormEstimate> {
    if !(q > 2.0 && q.is_finite()) {
        return Err(Error::DomainError(format!("q must exceed 2, got {q}")));
    }
    let w = d.weights(TimeMode::Continuous, t)?;
    let n = d.n();
    let pi: Vec<f64> = d.pi().iter().copied().collect();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for x in 0..n {
        let mut f = vec![0.0; n];
        f[x] = 1.0;
        starts.push(f);
    }
    let fm = d.eigenfunctions();
    for i in 1..n.min(4) {
        for &eps in &[0.1, 0.5, 1.0, 3.0] {
            for sign in [1.0, -1.0] {
                starts.push((0..n).map(|x| (1.0 + sign * eps * fm[(x, i)]).max(0.0)).collect());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..n).map(|_| rng.random::<f64>()).collect());
    }
    starts.push(vec![1.0; n]);
    let results: Vec<(f64, Vec<f64>)> = starts.into_par_iter().map(|f| ascend(d, &w, q, f, opts)).collect();
    let count = results.len();
    let (value, mut witness) = results
        .into_iter()
        .fold((f64::NEG_INFINITY, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    normalize(&mut witness, &pi);
    Ok(NormEstimate {
        value,
        witness,
        starts: count,
    })
}

/// Estimate of `s_q = inf{t : ||S_t||_{2->q} <= 1}`, by bisection on the multi-start estimate.
/// Because the norm estimate is a lower bound, so is this time.
pub fn hypercontractive_time(d: &SpectralDecomposition, q: f64, opts: &NormOptions) -> Result<f64> {
    let contractive = |t: f64| -> Result<bool> { Ok(two_q_norm(d, t, q, opts)?.value <= 1.0 + 1e-9) };
    let mut hi = d.relaxation_times().t_rel.max(1e-3);
    let mut guard = 0;
    while !contractive(hi)? {
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::NumericalFailure("no contractive time found".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if contractive(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-7 * hi {
            break;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;

    #[test]
    fn two_state_time_zero() {
        let d = SpectralDecomposition::new(&family::path(2).unwrap()).unwrap();
        let e = two_q_norm(&d, 0.0, 4.0, &NormOptions::default()).unwrap();
        assert!((e.value - 2f64.powf(0.25)).abs() < 1e-9);
    }

    #[test]
    fn large_time_tends_to_one() {
        let d = SpectralDecomposition::new(&family::cycle(5).unwrap()).unwrap();
        let e = two_q_norm(&d, 60.0, 4.0, &NormOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_small_q() {
        let d = SpectralDecomposition::new(&family::path(2).unwrap()).unwrap();
        assert!(two_q_norm(&d, 0.0, 2.0, &NormOptions::default()).is_err());
    }
}
