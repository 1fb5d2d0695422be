//! Dirichlet forms, entropy, and the (modified) Log-Sobolev constants.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::family::DEFAULT_SEED;
use crate::linalg::bregman_from_delta;
use crate::sets::ConnectedSetFamily;
use crate::spectral::{restricted, SpectralDecomposition};

/// Objective values below this entropy are treated as the constant-function limit.
const ENT_FLOOR: f64 = 1e-12;
const STALL_WINDOW: usize = 50;
const NEAR_CONSTANT: f64 = 1e-2;
const LIMIT_BAND: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct LsOptions {
    pub random_starts: usize,
    /// At most this many sets (smallest `alpha(A)` first) seed indicator and Dirichlet starts.
    pub set_starts: usize,
    pub max_iter: usize,
    /// A start stops once its relative gain over a 50-step window drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            random_starts: 64,
            set_starts: 64,
            max_iter: 4000,
            tol: 1e-10,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LsResult {
    pub c_ls: f64,
    pub t_ls: f64,
    pub lower: f64,
    pub upper: f64,
    /// Best raw optimizer value before clipping to the bracket.
    pub raw: f64,
    /// True when no start beat the constant-function limit `lambda/2`.
    pub limit: bool,
    /// Minimizer (normalized, `E_pi f^2 = 1`). In the limit case this is the
    /// gap eigenfunction direction `1 + eps f_2`.
    pub witness: Vec<f64>,
    /// `E(f)/Ent(f^2)` at the witness (the limit value when `limit`).
    pub witness_ratio: f64,
    pub starts: usize,
    /// Relative spread of the three best restarts.
    pub dispersion: f64,
    pub seed: u64,
}

/// The symmetrized negative generator `I - Q` (or `(L + L*)/2` in generator form).
fn form_matrix(chain: &ChainModel) -> DMatrix<f64> {
    chain.symmetrized_neg_generator()
}

fn check_len(chain: &ChainModel, f: &[f64]) -> Result<()> {
    if f.len() != chain.n() {
        return Err(Error::BadParams(format!("function has {} entries, chain has {} states", f.len(), chain.n())));
    }
    Ok(())
}

fn form(l: &DMatrix<f64>, pi: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let n = pi.len();
    let mut s = 0.0;
    for x in 0..n {
        let mut lf = 0.0;
        for y in 0..n {
            lf += l[(x, y)] * f[y];
        }
        s += pi[x] * lf * g[x];
    }
    s
}

/// `Ent(f) = sum pi m b(f/m - 1)` with `b(h) = (1+h) log(1+h) - h`; no cancellation near constants.
fn ent(pi: &[f64], f: &[f64]) -> f64 {
    let m: f64 = pi.iter().zip(f).map(|(p, v)| p * v).sum();
    if !(m > 0.0) {
        return 0.0;
    }
    pi.iter().zip(f).map(|(p, v)| p * m * bregman_from_delta(v / m - 1.0)).sum()
}

/// `E(f, f) = 1/2 sum_{x != y} pi(x) q(x,y) (f(x) - f(y))^2` and its gradient.
fn energy_grad(l: &DMatrix<f64>, pi: &[f64], f: &[f64]) -> (f64, Vec<f64>) {
    let n = f.len();
    let mut e = 0.0;
    let mut g = vec![0.0; n];
    for x in 0..n {
        for y in 0..n {
            if x != y {
                let w = -pi[x] * l[(x, y)];
                let d = f[x] - f[y];
                e += 0.5 * w * d * d;
                g[x] += 2.0 * w * d;
            }
        }
    }
    (e, g)
}

/// `E(f, g) = <(I - Q) f, g>_pi`.
pub fn dirichlet(chain: &ChainModel, f: &[f64], g: &[f64]) -> Result<f64> {
    check_len(chain, f)?;
    check_len(chain, g)?;
    let pi: Vec<f64> = chain.pi().iter().copied().collect();
    Ok(form(&form_matrix(chain), &pi, f, g))
}

/// `Ent_pi(f) = E[f log f] - E[f] log E[f]` for `f >= 0`.
pub fn entropy(chain: &ChainModel, f: &[f64]) -> Result<f64> {
    check_len(chain, f)?;
    if let Some(x) = f.iter().position(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeInput(x));
    }
    let pi: Vec<f64> = chain.pi().iter().copied().collect();
    Ok(ent(&pi, f))
}

/// `[lambda (1 - 2 pi_*) / log(1/pi_* - 1), lambda / 2]`, the lower end taken as its
/// limit `lambda/2` when `pi_* = 1/2`.
pub fn ls_bracket(gap: f64, pi_min: f64) -> (f64, f64) {
    let upper = gap / 2.0;
    let lower = if (0.5 - pi_min).abs() < 1e-9 {
        upper
    } else {
        gap * (1.0 - 2.0 * pi_min) / (1.0 / pi_min - 1.0).ln()
    };
    (lower.min(upper), upper)
}

/// `R(f) = E(f)/Ent(f^2)` with its gradient, for the Log-Sobolev problem.
pub(crate) struct LsObjective {
    l: DMatrix<f64>,
    pi: Vec<f64>,
}

impl LsObjective {
    pub(crate) fn new(chain: &ChainModel) -> Self {
        Self {
            l: form_matrix(chain),
            pi: chain.pi().iter().copied().collect(),
        }
    }

    pub(crate) fn value(&self, f: &[f64]) -> f64 {
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let d = ent(&self.pi, &sq);
        if d < ENT_FLOOR {
            return f64::INFINITY;
        }
        energy_grad(&self.l, &self.pi, f).0 / d
    }

    /// `(R, dR/df)`; `None` when `Ent(f^2)` is below the floor.
    pub(crate) fn value_grad(&self, f: &[f64]) -> Option<(f64, Vec<f64>)> {
        let n = f.len();
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let d = ent(&self.pi, &sq);
        if d < ENT_FLOOR {
            return None;
        }
        let m: f64 = self.pi.iter().zip(&sq).map(|(p, v)| p * v).sum();
        let (e, de) = energy_grad(&self.l, &self.pi, f);
        let r = e / d;
        let grad = (0..n)
            .map(|x| {
                let de = de[x];
                let dd = if f[x] == 0.0 { 0.0 } else { 2.0 * self.pi[x] * f[x] * (sq[x] / m).ln() };
                (de - r * dd) / d
            })
            .collect();
        Some((r, grad))
    }
}

fn normalize(f: &mut [f64], pi: &[f64]) -> bool {
    let s: f64 = f.iter().zip(pi).map(|(v, p)| p * v * v).sum::<f64>().sqrt();
    if !(s > 0.0 && s.is_finite()) {
        return false;
    }
    f.iter_mut().for_each(|v| *v /= s);
    true
}

/// Descent in the coordinates `y = sqrt(pi) f` with Barzilai-Borwein steps and
/// Armijo backtracking, renormalizing after each step. `f >= 0` is kept by taking
/// absolute values, which never raises `R`.
///
/// A start stops once it is nearly constant (`Var_pi f < NEAR_CONSTANT`) with a value
/// within a relative `LIMIT_BAND` above `limit`: such runs creep toward the
/// constant-function limit and would otherwise exhaust `max_iter`.
fn descend<F>(pi: &[f64], mut f: Vec<f64>, max_iter: usize, tol: f64, limit: f64, eval: F) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = f.len();
    let sp: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    f.iter_mut().for_each(|v| *v = v.abs());
    if !normalize(&mut f, pi) {
        return (f64::INFINITY, f);
    }
    let Some((mut val, mut g)) = eval(&f) else {
        return (f64::INFINITY, f);
    };
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut checkpoint = val;
    for it in 0..max_iter {
        // Stagnation over a window: typical when drifting toward the constant-function limit.
        if it > 0 && it % STALL_WINDOW == 0 {
            if checkpoint - val <= tol * val.abs() {
                break;
            }
            checkpoint = val;
        }
        if val >= limit && val <= limit * (1.0 + LIMIT_BAND) {
            let mean: f64 = f.iter().zip(pi).map(|(v, p)| p * v).sum();
            if 1.0 - mean * mean < NEAR_CONSTANT {
                break;
            }
        }
        // gradient in y-coordinates
        let gy: Vec<f64> = (0..n).map(|x| g[x] / sp[x]).collect();
        let gnorm = gy.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-13 {
            break;
        }
        if let Some((py, pg)) = &prev {
            let y: Vec<f64> = (0..n).map(|x| f[x] * sp[x]).collect();
            let s: Vec<f64> = (0..n).map(|x| y[x] - py[x]).collect();
            let dg: Vec<f64> = (0..n).map(|x| gy[x] - pg[x]).collect();
            let ss: f64 = s.iter().map(|v| v * v).sum();
            let sg: f64 = s.iter().zip(&dg).map(|(a, b)| a * b).sum();
            if sg > 0.0 && ss > 0.0 {
                step = (ss / sg).clamp(1e-8, 1e8);
            }
        }
        let y0: Vec<f64> = (0..n).map(|x| f[x] * sp[x]).collect();
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let mut cand: Vec<f64> = (0..n).map(|x| ((y0[x] - t * gy[x]) / sp[x]).abs()).collect();
            if normalize(&mut cand, pi) {
                if let Some((v, gc)) = eval(&cand) {
                    if v <= val - 1e-4 * t * gnorm * gnorm || (v < val && t < 1e-10) {
                        accepted = Some((v, gc, cand, t));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((v, gc, cand, t_used)) = accepted else {
            break;
        };
        prev = Some((y0, gy));
        step = t_used.max(1e-8);
        let gain = val - v;
        f = cand;
        g = gc;
        val = v;
        if gain <= 1e-15 * val.abs().max(1e-300) {
            break;
        }
    }
    (val, f)
}

fn ls_starts(chain: &ChainModel, d: &SpectralDecomposition, family: Option<&ConnectedSetFamily>, opts: &LsOptions) -> Result<Vec<Vec<f64>>> {
    let n = chain.n();
    let mut starts = Vec::new();
    let fm = d.eigenfunctions();
    for i in 1..n.min(4) {
        for &s in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            for sign in [1.0, -1.0] {
                starts.push((0..n).map(|x| 1.0 + sign * s * fm[(x, i)]).collect());
            }
        }
    }
    if let Some(fam) = family {
        let mut ranked: Vec<(f64, &Vec<usize>)> = Vec::new();
        let mut specs = Vec::new();
        for a in &fam.sets {
            let r = restricted(chain, a)?;
            ranked.push((r.lambda() / r.mass().ln().abs(), a));
            specs.push(r);
        }
        let mut order: Vec<usize> = (0..ranked.len()).collect();
        order.sort_by(|&i, &j| ranked[i].0.total_cmp(&ranked[j].0).then(i.cmp(&j)));
        for &i in order.iter().take(opts.set_starts) {
            let spec = &specs[i];
            let mut ind = vec![0.05; n];
            let mut dir = vec![0.05; n];
            let mass = spec.mass();
            for (k, &x) in spec.set().iter().enumerate() {
                ind[x] += 1.0 / mass.sqrt();
                dir[x] += spec.eigenfunctions()[(k, 0)].abs();
            }
            starts.push(ind);
            starts.push(dir);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..n).map(|_| rng.random::<f64>() + 1e-3).collect());
    }
    Ok(starts)
}

/// Multi-start estimate of `c_LS = inf E(f)/Ent(f^2)`, validated against its analytic bracket.
pub fn c_ls(chain: &ChainModel, family: Option<&ConnectedSetFamily>, opts: &LsOptions) -> Result<LsResult> {
    chain.require_reversible()?;
    let d = SpectralDecomposition::new(chain)?;
    let gap = d.gap();
    let (lower, upper) = ls_bracket(gap, chain.pi_min());
    let obj = LsObjective::new(chain);
    let starts = ls_starts(chain, &d, family, opts)?;
    let count = starts.len();
    let mut results: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|f| descend(&obj.pi, f, opts.max_iter, opts.tol, upper, |g| obj.value_grad(g)))
        .collect();
    results.sort_by(|a, b| a.0.total_cmp(&b.0));
    let raw = results[0].0;
    let top: Vec<f64> = results.iter().take(3).map(|r| r.0).filter(|v| v.is_finite()).collect();
    let dispersion = if top.len() > 1 {
        (top[top.len() - 1] - top[0]) / top[0]
    } else {
        0.0
    };
    if raw < lower * (1.0 - 1e-7) - 1e-7 {
        return Err(Error::BracketViolation { estimate: raw, lower, upper });
    }
    let limit = !(raw < upper);
    let (c, witness, witness_ratio) = if limit {
        let mut w: Vec<f64> = (0..chain.n()).map(|x| 1.0 + 1e-3 * d.eigenfunctions()[(x, 1)]).collect();
        normalize(&mut w, &obj.pi);
        (upper, w, upper)
    } else {
        let w = results[0].1.clone();
        let r = obj.value(&w);
        (raw.clamp(lower, upper), w, r)
    };
    Ok(LsResult {
        c_ls: c,
        t_ls: 1.0 / c,
        lower,
        upper,
        raw,
        limit,
        witness,
        witness_ratio,
        starts: count,
        dispersion,
        seed: opts.seed,
    })
}

/// `E(e^f, f)/Ent(e^f)` with gradient; shift-invariant in `f`.
fn mls_value_grad(l: &DMatrix<f64>, pi: &[f64], f: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = f.len();
    let shift = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ef: Vec<f64> = f.iter().map(|v| (v - shift).exp()).collect();
    let m: f64 = pi.iter().zip(&ef).map(|(p, v)| p * v).sum();
    let d = ent(pi, &ef);
    if d < ENT_FLOOR * m {
        return None;
    }
    let mut lf = vec![0.0; n];
    let mut lef = vec![0.0; n];
    for x in 0..n {
        for y in 0..n {
            lf[x] += l[(x, y)] * f[y];
            lef[x] += l[(x, y)] * ef[y];
        }
    }
    let num: f64 = (0..n).map(|x| pi[x] * lef[x] * f[x]).sum();
    let r = num / d;
    let lm = m.ln();
    let grad = (0..n)
        .map(|x| {
            let dn = pi[x] * (ef[x] * lf[x] + lef[x]);
            let dd = pi[x] * ef[x] * ((f[x] - shift) - lm);
            (dn - r * dd) / d
        })
        .collect();
    Some((r, grad))
}

#[derive(Debug, Clone, Serialize)]
pub struct MlsResult {
    pub c_mls: f64,
    /// True when no start beat the near-constant limit `2 lambda`.
    pub limit: bool,
    pub witness: Vec<f64>,
    pub starts: usize,
}

/// Exploratory estimate of `c_MLS = inf E(e^f, f)/Ent(e^f)` by plain gradient descent.
pub fn c_mls(chain: &ChainModel, opts: &LsOptions) -> Result<MlsResult> {
    chain.require_reversible()?;
    let d = SpectralDecomposition::new(chain)?;
    let n = chain.n();
    let l = form_matrix(chain);
    let pi: Vec<f64> = chain.pi().iter().copied().collect();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 1..n.min(4) {
        for &s in &[0.5, 1.0, 2.0, 4.0, 8.0] {
            for sign in [1.0, -1.0] {
                starts.push((0..n).map(|x| sign * s * d.eigenfunctions()[(x, i)]).collect());
            }
        }
    }
    for x in 0..n {
        for &h in &[1.0, 3.0, 6.0] {
            let mut f = vec![0.0; n];
            f[x] = h;
            starts.push(f);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..n).map(|_| rng.random_range(-3.0..3.0)).collect());
    }
    let count = starts.len();
    let results: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|f0| {
            let mut f = f0;
            let Some((mut val, mut g)) = mls_value_grad(&l, &pi, &f) else {
                return (f64::INFINITY, f);
            };
            let mut step = 1.0;
            for _ in 0..opts.max_iter {
                let gn: f64 = (0..n).map(|x| g[x] * g[x] / pi[x]).sum();
                if gn < 1e-26 {
                    break;
                }
                let mut t = step * 2.0;
                let mut done = None;
                for _ in 0..60 {
                    let cand: Vec<f64> = (0..n).map(|x| f[x] - t * g[x] / pi[x]).collect();
                    if let Some((v, gc)) = mls_value_grad(&l, &pi, &cand) {
                        if v <= val - 1e-4 * t * gn {
                            done = Some((v, gc, cand));
                            break;
                        }
                    }
                    t *= 0.5;
                }
                let Some((v, gc, cand)) = done else { break };
                step = t;
                let gain = val - v;
                f = cand;
                g = gc;
                val = v;
                if gain <= 1e-15 * val {
                    break;
                }
            }
            (val, f)
        })
        .collect();
    let best = results
        .into_iter()
        .fold((f64::INFINITY, vec![0.0; n]), |a, r| if r.0 < a.0 { r } else { a });
    let limit_value = 2.0 * d.gap();
    let limit = !(best.0 < limit_value);
    Ok(MlsResult {
        c_mls: best.0.min(limit_value),
        limit,
        witness: best.1,
        starts: count,
    })
}

/// `2q/(q-2) r + 2 t_rel (1 + q/(q-2) log M)`, an upper bound on `t_LS` whenever
/// `||S_r||_{2->q} <= M`.
pub fn hyper_upper(t_rel: f64, q: f64, r: f64, m: f64) -> Result<f64> {
    if !(q > 2.0) {
        return Err(Error::DomainError(format!("q must exceed 2, got {q}")));
    }
    if !(m >= 1.0) || r < 0.0 {
        return Err(Error::DomainError("need M >= 1 and r >= 0".into()));
    }
    let k = q / (q - 2.0);
    Ok(2.0 * k * r + 2.0 * t_rel * (1.0 + k * m.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;
    use crate::sets::con_half;

    #[test]
    fn dirichlet_and_entropy_basics() {
        let c = family::path(2).unwrap();
        assert_eq!(dirichlet(&c, &[1.0, 1.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert_eq!(entropy(&c, &[2.0, 2.0]).unwrap(), 0.0);
        // (I - P) f = 2f for f = (1,-1); E = 2
        assert!((dirichlet(&c, &[1.0, -1.0], &[1.0, -1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(entropy(&c, &[1.0, -1.0]).unwrap_err(), Error::NegativeInput(1));
    }

    #[test]
    fn two_state_ls_is_one() {
        let c = family::path(2).unwrap();
        let r = c_ls(&c, Some(&con_half(&c).unwrap()), &LsOptions::default()).unwrap();
        assert_eq!((r.lower, r.upper), (1.0, 1.0));
        assert_eq!(r.c_ls, 1.0);
    }

    #[test]
    fn two_point_matches_closed_form() {
        let p = 0.2;
        let c = family::two_point(p).unwrap();
        let r = c_ls(&c, None, &LsOptions::default()).unwrap();
        let exact = (1.0 - 2.0 * p) / ((1.0 - p) / p).ln();
        assert!((r.c_ls - exact).abs() < 1e-7, "{} vs {exact}", r.c_ls);
        assert!((r.witness_ratio - r.c_ls).abs() < 1e-7);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = family::path(4).unwrap();
        let obj = LsObjective::new(&c);
        let f = [0.3, 1.2, 0.7, 2.0];
        let (_, g) = obj.value_grad(&f).unwrap();
        for i in 0..4 {
            let mut a = f;
            let mut b = f;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (obj.value(&a) - obj.value(&b)) / 2e-6;
            assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3));
        }
    }

    #[test]
    fn hyper_upper_examples() {
        let v = hyper_upper(0.5, 4.0, 2f64.ln() / 2.0, 7.0).unwrap();
        assert!((v - (2f64.ln() * 2.0 + 1.0 + 49f64.ln())).abs() < 1e-12);
        assert!((hyper_upper(1.0, 4.0, 0.5, 1.0).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn mls_two_state_beats_limit_or_matches() {
        let c = family::path(2).unwrap();
        let r = c_mls(&c, &LsOptions::default()).unwrap();
        assert!(r.c_mls > 0.0 && r.c_mls <= 4.0 + 1e-12);
    }
}
