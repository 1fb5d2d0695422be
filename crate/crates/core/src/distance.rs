//! L_p distances, relative entropy, mixing times and constrained minima of the distance to `pi`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::linalg::{bregman_from_delta, xlogx};
use crate::spectral::{SpectralDecomposition, TimeMode};

/// Cap on discrete and averaged mixing-time searches.
pub const DISCRETE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    L2,
    Linf,
    Entropy,
}

impl Metric {
    pub fn from_p(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Metric::L1)
        } else if p == 2.0 {
            Ok(Metric::L2)
        } else if p.is_infinite() && p > 0.0 {
            Ok(Metric::Linf)
        } else {
            Err(Error::BadMode(format!("p = {p} is not one of 1, 2, inf")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartSpec {
    State(usize),
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingQuery {
    pub metric: Metric,
    pub mode: TimeMode,
    pub epsilon: f64,
    pub start: StartSpec,
}

impl MixingQuery {
    pub fn new(metric: Metric, mode: TimeMode) -> Self {
        Self {
            metric,
            mode,
            epsilon: 0.5,
            start: StartSpec::WorstCase,
        }
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn from_state(mut self, x: usize) -> Self {
        self.start = StartSpec::State(x);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingTime {
    pub value: f64,
    /// Per-state mixing times (one entry for a fixed start).
    pub per_state: Vec<f64>,
    pub argmax: usize,
}

/// Distance of the time-`t` law started at `x` from `pi` in the given metric (entropy in nats).
pub fn distance(d: &SpectralDecomposition, x: usize, t: f64, metric: Metric, mode: TimeMode) -> Result<f64> {
    let w = d.weights(mode, t)?;
    if metric == Metric::L2 {
        return Ok(d.l2_sq_from_weights(x, &w)?.sqrt());
    }
    let dev = d.density_deviation(x, &w)?;
    let pi = d.pi();
    Ok(match metric {
        Metric::L1 => dev.iter().zip(pi.iter()).map(|(e, p)| p * e.abs()).sum(),
        Metric::Linf => dev.iter().fold(0.0_f64, |m, e| m.max(e.abs())),
        Metric::Entropy => dev
            .iter()
            .zip(pi.iter())
            .map(|(e, p)| p * bregman_from_delta(e.max(-1.0)))
            .sum::<f64>()
            .max(0.0),
        Metric::L2 => unreachable!(),
    })
}

/// `d_{p,x}(t) = ||K_t(x,.) - pi||_{p,pi}` for `p in {1, 2, inf}`.
pub fn lp_distance(chain: &ChainModel, x: usize, t: f64, p: f64, mode: TimeMode) -> Result<f64> {
    let metric = Metric::from_p(p)?;
    chain.require_reversible()?;
    distance(&SpectralDecomposition::new(chain)?, x, t, metric, mode)
}

/// `D(mu || pi) = sum mu log(mu/pi)` in nats, with `0 log 0 = 0`.
pub fn rel_entropy(mu: &[f64], pi: &[f64]) -> Result<f64> {
    if mu.len() != pi.len() {
        return Err(Error::BadParams("length mismatch".into()));
    }
    let mut acc = 0.0;
    for (x, (&m, &p)) in mu.iter().zip(pi).enumerate() {
        if m < 0.0 {
            return Err(Error::NegativeInput(x));
        }
        if m > 0.0 && p <= 0.0 {
            return Err(Error::SupportViolation(x));
        }
        if m > 0.0 {
            acc += xlogx(m) - m * p.ln();
        }
    }
    Ok(acc.max(0.0))
}

fn continuous_time(profile: impl Fn(f64) -> Result<f64>, eps: f64, t0: f64) -> Result<f64> {
    if profile(0.0)? <= eps {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = t0.max(1e-9);
    let mut guard = 0;
    while profile(hi)? > eps {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NumericalFailure("mixing-time bracket not found".into()));
        }
    }
    // Pre-flight monotonicity check on the bracket; refine to the first crossing if violated.
    let grid = 32;
    let samples: Vec<f64> = (0..=grid)
        .map(|i| profile(lo + (hi - lo) * i as f64 / grid as f64))
        .collect::<Result<_>>()?;
    if samples.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-15) {
        let first = samples.iter().position(|&v| v <= eps).unwrap_or(grid);
        let cell = (hi - lo) / grid as f64;
        hi = lo + cell * first as f64;
        lo = (hi - cell).max(lo);
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if profile(mid)? <= eps {
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

fn integer_time(profile: impl Fn(f64) -> Result<f64>, eps: f64, first: u64, t_rel_abs: f64) -> Result<f64> {
    if profile(first as f64)? <= eps {
        return Ok(first as f64);
    }
    let mut lo = first;
    let mut hi = first.max(1) * 2;
    loop {
        if hi >= DISCRETE_CAP {
            hi = DISCRETE_CAP;
            if profile(hi as f64)? > eps {
                return Err(Error::NotMixing {
                    epsilon: eps,
                    cap: DISCRETE_CAP,
                    t_rel_absolute: t_rel_abs,
                });
            }
            break;
        }
        if profile(hi as f64)? <= eps {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if profile(mid as f64)? <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64)
}

/// Mixing time from a single state with a prebuilt decomposition.
///
/// Continuous time uses bisection. Discrete and averaged profiles are nonincreasing
/// for reversible chains (`P` contracts every `L_p(pi)` norm and the entropy), so the
/// first crossing is found by galloping plus binary search up to [`DISCRETE_CAP`].
pub fn mixing_time_from(d: &SpectralDecomposition, x: usize, metric: Metric, mode: TimeMode, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::DomainError(format!("epsilon must be positive, got {eps}")));
    }
    if !d.is_reversible() {
        return Err(Error::NotReversible);
    }
    let profile = |t: f64| distance(d, x, t, metric, mode);
    let rt = d.relaxation_times();
    match mode {
        TimeMode::Continuous => continuous_time(profile, eps, rt.t_rel),
        TimeMode::Discrete => integer_time(profile, eps, 0, rt.t_rel_absolute),
        TimeMode::Averaged => integer_time(profile, eps, 1, rt.t_rel_absolute),
    }
}

pub fn mixing_time_with(d: &SpectralDecomposition, q: &MixingQuery) -> Result<MixingTime> {
    match q.start {
        StartSpec::State(x) => {
            if x >= d.n() {
                return Err(Error::BadState(x));
            }
            let v = mixing_time_from(d, x, q.metric, q.mode, q.epsilon)?;
            Ok(MixingTime {
                value: v,
                per_state: vec![v],
                argmax: x,
            })
        }
        StartSpec::WorstCase => {
            let per_state: Vec<f64> = (0..d.n())
                .into_par_iter()
                .map(|x| mixing_time_from(d, x, q.metric, q.mode, q.epsilon))
                .collect::<Result<_>>()?;
            let mut argmax = 0;
            for (x, &v) in per_state.iter().enumerate() {
                if v > per_state[argmax] {
                    argmax = x;
                }
            }
            Ok(MixingTime {
                value: per_state[argmax],
                per_state,
                argmax,
            })
        }
    }
}

/// `min{t : d(t) <= epsilon}` for the query (worst case over starts unless a state is given).
pub fn mixing_time(chain: &ChainModel, q: &MixingQuery) -> Result<f64> {
    chain.require_reversible()?;
    Ok(mixing_time_with(&SpectralDecomposition::new(chain)?, q)?.value)
}

/// `u(x,y) = [y + x(1-y)] log(1 + y(1-x)/x) + (1-y)(1-x) log(1-y)`.
pub fn u(x: f64, y: f64) -> f64 {
    let head = (y + x * (1.0 - y)) * (y * (1.0 - x) / x).ln_1p();
    let tail = if y >= 1.0 { 0.0 } else { (1.0 - y) * (1.0 - x) * (-y).ln_1p() };
    head + tail
}

/// Minimum L2 distance and relative entropy to `pi` over laws putting at least
/// `pi(A) + delta pi(A^c)` on a set of mass `x`: `(delta sqrt((1-x)/x), u(x, delta))`.
pub fn lagrange_minima(x: f64, delta: f64) -> Result<(f64, f64)> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::DomainError(format!("set mass {x} outside (0,1)")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::DomainError(format!("delta {delta} outside [0,1)")));
    }
    Ok((delta * ((1.0 - x) / x).sqrt(), u(x, delta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyConstants {
    /// Smallest `C'` with `u(x, min(C'/|log x|, (0.99-x)/(1-x))) >= 1/2` on `(0, 1/2]`.
    pub c_prime: f64,
    /// `sup_{x in (0,1/2]} (x |log x| + C'(1-x))`.
    pub c_ent: f64,
    /// Set mass at which `C'` binds.
    pub x_binding: f64,
}

/// Smallest `y` with `u(x, y) >= 1/2`; `u(x, .)` is increasing, so bisection applies.
pub(crate) fn required_delta(x: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if u(x, mid) >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-16 {
            break;
        }
    }
    hi
}

/// Log-spaced grid on `(0, 1/2]` from `1e-300`, with extra points near `1/2`.
pub(crate) fn c_ent_grid() -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=4000)
        .map(|i| {
            let e = -300.0 + (300.0 + 0.5f64.log10()) * i as f64 / 4000.0;
            10f64.powf(e)
        })
        .collect();
    xs.extend((0..200).map(|j| 0.5 - j as f64 * 1e-3));
    xs.retain(|&x| x > 0.0 && x <= 0.5);
    xs
}

fn derive_c_ent_uncached() -> EntropyConstants {
    let need = |x: f64| x.ln().abs() * required_delta(x);
    let xs = c_ent_grid();
    let mut best = 0;
    let vals: Vec<f64> = xs.iter().map(|&x| need(x)).collect();
    for i in 0..vals.len() {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    // Golden-section refinement of the binding point in log x.
    let lo_i = best.saturating_sub(1);
    let hi_i = (best + 1).min(xs.len() - 1);
    let (mut a, mut b) = (xs[lo_i].min(xs[hi_i]).ln(), xs[lo_i].max(xs[hi_i]).ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if need(c.exp()) > need(d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    let x_mid = (0.5 * (a + b)).exp();
    let (c_prime, x_binding) = if need(x_mid) > vals[best] {
        (need(x_mid), x_mid)
    } else {
        (vals[best], xs[best])
    };
    // x|log x| + C'(1-x) peaks at x = e^{-1-C'} with value C' + e^{-1-C'}.
    let x_star = (-1.0 - c_prime).exp();
    let c_ent = if x_star <= 0.5 {
        c_prime + x_star
    } else {
        0.5 * 2f64.ln() + 0.5 * c_prime
    };
    EntropyConstants {
        c_prime,
        c_ent,
        x_binding,
    }
}

/// The constants `(C', C_ent)` used by the entropy characterization, computed once.
pub fn derive_c_ent() -> EntropyConstants {
    static CACHE: OnceLock<EntropyConstants> = OnceLock::new();
    *CACHE.get_or_init(derive_c_ent_uncached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;

    fn ts() -> ChainModel {
        family::path(2).unwrap()
    }

    #[test]
    fn two_state_l2_closed_form() {
        let d = lp_distance(&ts(), 0, 0.5, 2.0, TimeMode::Continuous).unwrap();
        assert!((d - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn time_zero_l1() {
        let c = family::path(3).unwrap();
        for x in 0..3 {
            let d = lp_distance(&c, x, 0.0, 1.0, TimeMode::Continuous).unwrap();
            assert!((d - 2.0 * (1.0 - c.pi()[x])).abs() < 1e-14);
        }
    }

    #[test]
    fn rel_entropy_examples() {
        assert_eq!(rel_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!((rel_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(rel_entropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err(), Error::SupportViolation(1));
    }

    #[test]
    fn two_state_mixing_times() {
        let q = MixingQuery::new(Metric::L2, TimeMode::Continuous);
        let t = mixing_time(&ts(), &q).unwrap();
        assert!((t - 2f64.ln() / 2.0).abs() < 1e-12);
        let q = MixingQuery::new(Metric::L2, TimeMode::Averaged);
        assert_eq!(mixing_time(&ts(), &q).unwrap(), 1.0);
        let q = MixingQuery::new(Metric::L2, TimeMode::Discrete);
        assert!(matches!(mixing_time(&ts(), &q), Err(Error::NotMixing { .. })));
    }

    #[test]
    fn lagrange_examples() {
        let (l2, ent) = lagrange_minima(0.5, 0.5).unwrap();
        assert!((l2 - 0.5).abs() < 1e-15);
        assert!((ent - 0.130812035941137).abs() < 1e-12);
        assert_eq!(lagrange_minima(0.3, 0.0).unwrap(), (0.0, 0.0));
        assert!(lagrange_minima(0.0, 0.5).is_err());
    }

    #[test]
    fn c_ent_condition_holds_on_grid() {
        let k = derive_c_ent();
        for x in c_ent_grid() {
            let y = (k.c_prime / x.ln().abs()).min((0.99 - x) / (1.0 - x));
            assert!(u(x, y) >= 0.5 - 1e-9, "x = {x}");
            assert!(x * x.ln().abs() + k.c_prime * (1.0 - x) <= k.c_ent + 1e-12);
        }
        // a slightly smaller C' fails at the binding point
        let x = k.x_binding;
        assert!(u(x, k.c_prime * (1.0 - 1e-6) / x.ln().abs()) < 0.5);
        assert!((k.c_prime - 1.032833467).abs() < 1e-8, "{k:?}");
        assert!((k.c_ent - (k.c_prime + (-1.0 - k.c_prime).exp())).abs() < 1e-15);
    }
}
