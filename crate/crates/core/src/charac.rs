//! Hitting-time characterizations of mixing: the `rho` family, `kappa`, `t_ht` and `hit(eps)`.
//!
//! Every value is a max-reduction over per-`(x, A)` threshold times of escape survival curves.

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::ChainModel;
use crate::distance::{derive_c_ent, EntropyConstants};
use crate::error::{Error, Result};
use crate::hitting::{threshold_time, Start, SurvivalCurve};
use crate::sets::ConnectedSetFamily;
use crate::spectral::{restricted, RestrictedSpectrum, TimeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Rho,
    RhoEnt,
    RhoBar,
    RhoBarEnt,
    /// Started from `pi_A`; a single value rather than one per state.
    THt,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Rho => "rho",
            TargetKind::RhoEnt => "rho_ent",
            TargetKind::RhoBar => "rho_bar",
            TargetKind::RhoBarEnt => "rho_bar_ent",
            TargetKind::THt => "t_ht",
        }
    }
}

/// The survival level `g(pi(A))` a set must drop below, with a flag for targets
/// too small to represent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingTarget {
    pub kind: TargetKind,
    pub constants: EntropyConstants,
}

impl HittingTarget {
    pub fn new(kind: TargetKind) -> Self {
        Self {
            kind,
            constants: derive_c_ent(),
        }
    }

    /// `(g(a), clamped)`.
    pub fn level(&self, a: f64) -> (f64, bool) {
        let g = match self.kind {
            TargetKind::Rho => a + 0.5 * (a * (1.0 - a)).sqrt(),
            TargetKind::RhoEnt => (self.constants.c_ent / a.ln().abs()).min(0.99),
            TargetKind::RhoBar => a * a * a,
            TargetKind::RhoBarEnt => {
                let l = 1.5 - a.ln();
                1.0 / (16.0 * std::f64::consts::E.powi(2) * l * l * l)
            }
            TargetKind::THt => a.powf(0.25),
        };
        if g >= f64::MIN_POSITIVE {
            (g, false)
        } else {
            (f64::MIN_POSITIVE, true)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizationReport {
    pub kind: TargetKind,
    pub mode: TimeMode,
    /// Max over states (for `t_ht`, the single stationary-start value).
    pub value: f64,
    /// One entry per state; `t_ht` has a single entry.
    pub per_state: Vec<f64>,
    /// The set attaining each per-state value (`None` when no set binds).
    pub argmax_sets: Vec<Option<Vec<usize>>>,
    pub worst_state: usize,
    /// False when the set family was truncated, making every value a lower bound.
    pub complete: bool,
    pub target_clamped: bool,
    pub constants: EntropyConstants,
}

/// Restricted spectra of every set in the family, in family order. Pass them to the
/// `*_with` variants to avoid recomputing them per quantity.
pub fn spectra(chain: &ChainModel, family: &ConnectedSetFamily) -> Result<Vec<RestrictedSpectrum>> {
    family.sets.par_iter().map(|a| restricted(chain, a)).collect()
}

fn check_mode(chain: &ChainModel, mode: TimeMode) -> Result<()> {
    chain.require_reversible()?;
    match mode {
        TimeMode::Continuous => Ok(()),
        TimeMode::Discrete => chain.require_discrete(),
        TimeMode::Averaged => Err(Error::BadMode("characterizations are continuous or discrete".into())),
    }
}

/// Max over sets, per state, of a per-`(x, A)` time. Ties keep the earlier set in family order.
fn reduce(n: usize, hits: Vec<Vec<(usize, f64)>>) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut best = vec![0.0; n];
    let mut arg: Vec<Option<usize>> = vec![None; n];
    for (i, row) in hits.into_iter().enumerate() {
        for (x, t) in row {
            if arg[x].is_none() || t > best[x] {
                best[x] = t;
                arg[x] = Some(i);
            }
        }
    }
    (best, arg)
}

fn finish(
    target: &HittingTarget,
    mode: TimeMode,
    family: &ConnectedSetFamily,
    per_state: Vec<f64>,
    arg: Vec<Option<usize>>,
    clamped: bool,
) -> CharacterizationReport {
    let mut worst = 0;
    for (x, &v) in per_state.iter().enumerate() {
        if v > per_state[worst] {
            worst = x;
        }
    }
    CharacterizationReport {
        kind: target.kind,
        mode,
        value: per_state.get(worst).copied().unwrap_or(0.0),
        argmax_sets: arg.into_iter().map(|a| a.map(|i| family.sets[i].clone())).collect(),
        per_state,
        worst_state: worst,
        complete: family.complete,
        target_clamped: clamped,
        constants: target.constants,
    }
}

/// `max_x max_{A ∋ x} min{t : P_x[T_{A^c} > t] <= g(pi(A))}`, or for `t_ht` the
/// same with the start `pi_A` and no outer max over states.
pub fn rho_family(
    chain: &ChainModel,
    kind: TargetKind,
    family: &ConnectedSetFamily,
    mode: TimeMode,
) -> Result<CharacterizationReport> {
    rho_family_with(chain, kind, family, &spectra(chain, family)?, mode)
}

/// [`rho_family`] with precomputed [`spectra`].
pub fn rho_family_with(
    chain: &ChainModel,
    kind: TargetKind,
    family: &ConnectedSetFamily,
    specs: &[RestrictedSpectrum],
    mode: TimeMode,
) -> Result<CharacterizationReport> {
    check_mode(chain, mode)?;
    let target = HittingTarget::new(kind);
    let rows: Vec<(Vec<(usize, f64)>, bool)> = specs
        .par_iter()
        .map(|spec| {
            let (g, clamped) = target.level(spec.mass());
            let starts: Vec<(usize, Start)> = if kind == TargetKind::THt {
                vec![(0, Start::StationaryOnSet)]
            } else {
                spec.set().iter().map(|&x| (x, Start::State(x))).collect()
            };
            let mut row = Vec::with_capacity(starts.len());
            for (x, s) in starts {
                let curve = SurvivalCurve::from_spectrum(spec, &s, mode)?;
                row.push((x, threshold_time(&curve, g)?));
            }
            Ok((row, clamped))
        })
        .collect::<Result<_>>()?;
    let clamped = rows.iter().any(|r| r.1);
    let width = if kind == TargetKind::THt { 1 } else { chain.n() };
    let (per_state, arg) = reduce(width, rows.into_iter().map(|r| r.0).collect());
    Ok(finish(&target, mode, family, per_state, arg, clamped))
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaReport {
    pub mode: TimeMode,
    pub kappa: f64,
    /// The set attaining `kappa` (the minimizer of `alpha(A)`).
    pub argmin_set: Option<Vec<usize>>,
    /// `alpha(A) = lambda(A)/|log pi(A)|`, in family order.
    pub alphas: Vec<f64>,
    /// Per-set contribution to `kappa`, in family order.
    pub per_set: Vec<f64>,
    pub min_lambda: f64,
    pub complete: bool,
}

/// `kappa = max_A |log pi(A)|/lambda(A)` (continuous) or
/// `max_A log(1/pi(A))/log(1/beta(A))` with `beta = 1 - lambda(A)` (discrete).
pub fn kappa(chain: &ChainModel, family: &ConnectedSetFamily, mode: TimeMode) -> Result<KappaReport> {
    match mode {
        TimeMode::Continuous => {}
        TimeMode::Discrete => chain.require_discrete()?,
        TimeMode::Averaged => return Err(Error::BadMode("kappa is continuous or discrete".into())),
    }
    kappa_with(family, &spectra(chain, family)?, mode)
}

/// [`kappa`] with precomputed [`spectra`].
pub fn kappa_with(family: &ConnectedSetFamily, specs: &[RestrictedSpectrum], mode: TimeMode) -> Result<KappaReport> {
    let mut alphas = Vec::with_capacity(specs.len());
    let mut per_set = Vec::with_capacity(specs.len());
    let mut min_lambda = f64::INFINITY;
    for s in specs {
        let lam = s.lambda();
        let log_mass = s.mass().ln().abs();
        min_lambda = min_lambda.min(lam);
        alphas.push(lam / log_mass);
        per_set.push(match mode {
            TimeMode::Continuous => log_mass / lam,
            _ => {
                let beta = s.beta();
                if beta <= 0.0 {
                    0.0
                } else if beta >= 1.0 {
                    f64::INFINITY
                } else {
                    log_mass / (1.0 / beta).ln()
                }
            }
        });
    }
    let mut arg: Option<usize> = None;
    for (i, &v) in per_set.iter().enumerate() {
        if arg.is_none_or(|a| v > per_set[a]) {
            arg = Some(i);
        }
    }
    Ok(KappaReport {
        mode,
        kappa: arg.map(|a| per_set[a]).unwrap_or(0.0),
        argmin_set: arg.map(|a| family.sets[a].clone()),
        alphas,
        per_set,
        min_lambda,
        complete: family.complete,
    })
}

/// Which sets `hit(eps)` quantifies over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HitSelector {
    /// Hitting the sets of the family itself (mass at most 1/2).
    Literal,
    /// Hitting sets of mass at least 1/2: the complements of the family's sets.
    LargeSets,
}

#[derive(Debug, Clone, Serialize)]
pub struct HitEpsReport {
    pub selector: HitSelector,
    pub epsilon: f64,
    pub value: f64,
    pub per_state: Vec<f64>,
    pub complete: bool,
}

/// `max_x min{t : P_x[T_A > t] <= eps for every selected A}`.
///
/// For `LargeSets`, restricting to sets whose complement is connected loses nothing:
/// from `x` outside a large set, `T_A` is the escape time of the complement's component
/// containing `x`, and that component's complement is again large.
pub fn hit_eps(chain: &ChainModel, eps: f64, family: &ConnectedSetFamily, selector: HitSelector, mode: TimeMode) -> Result<HitEpsReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::DomainError(format!("epsilon {eps} outside (0,1)")));
    }
    check_mode(chain, mode)?;
    let n = chain.n();
    let rows: Vec<Vec<(usize, f64)>> = family
        .sets
        .par_iter()
        .map(|a| {
            let escape: Vec<usize> = match selector {
                HitSelector::LargeSets => a.clone(),
                HitSelector::Literal => (0..n).filter(|x| !a.contains(x)).collect(),
            };
            let spec = restricted(chain, &escape)?;
            spec.set()
                .iter()
                .map(|&x| {
                    let curve = SurvivalCurve::from_spectrum(&spec, &Start::State(x), mode)?;
                    Ok((x, threshold_time(&curve, eps)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let (per_state, _) = reduce(n, rows);
    Ok(HitEpsReport {
        selector,
        epsilon: eps,
        value: per_state.iter().copied().fold(0.0, f64::max),
        per_state,
        complete: family.complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family;
    use crate::sets::con_half;

    fn report(c: &ChainModel, kind: TargetKind) -> CharacterizationReport {
        rho_family(c, kind, &con_half(c).unwrap(), TimeMode::Continuous).unwrap()
    }

    #[test]
    fn two_state_values() {
        let c = family::path(2).unwrap();
        assert!((report(&c, TargetKind::Rho).value - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((report(&c, TargetKind::RhoBar).value - 8f64.ln()).abs() < 1e-12);
        assert!((report(&c, TargetKind::THt).value - 2f64.ln() / 4.0).abs() < 1e-12);
        assert!((report(&c, TargetKind::RhoEnt).value - (1.0f64 / 0.99).ln()).abs() < 1e-12);
        let k = kappa(&c, &con_half(&c).unwrap(), TimeMode::Continuous).unwrap();
        assert!((k.kappa - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn argmax_reproduces_value() {
        let c = family::cycle(6).unwrap();
        let r = report(&c, TargetKind::Rho);
        for x in 0..c.n() {
            let a = r.argmax_sets[x].as_ref().unwrap();
            let spec = restricted(&c, a).unwrap();
            let curve = SurvivalCurve::from_spectrum(&spec, &Start::State(x), TimeMode::Continuous).unwrap();
            let (g, _) = HittingTarget::new(TargetKind::Rho).level(spec.mass());
            assert_eq!(threshold_time(&curve, g).unwrap(), r.per_state[x]);
        }
        assert_eq!(r.value, r.per_state.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn path3_kappa() {
        let c = family::path(3).unwrap();
        let k = kappa(&c, &con_half(&c).unwrap(), TimeMode::Continuous).unwrap();
        assert!((k.kappa - 4f64.ln()).abs() < 1e-13);
        assert_eq!(k.argmin_set, Some(vec![0]));
        let lazy = c.lazy(0.5).unwrap();
        let k = kappa(&lazy, &con_half(&lazy).unwrap(), TimeMode::Discrete).unwrap();
        assert!((k.kappa - 2.0).abs() < 1e-13);
    }

    #[test]
    fn two_state_discrete_rho() {
        let c = family::path(2).unwrap();
        let r = rho_family(&c, TargetKind::Rho, &con_half(&c).unwrap(), TimeMode::Discrete).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn hit_eps_two_state() {
        let c = family::path(2).unwrap();
        let fam = con_half(&c).unwrap();
        let h = hit_eps(&c, 0.5, &fam, HitSelector::Literal, TimeMode::Continuous).unwrap();
        assert!((h.value - 2f64.ln()).abs() < 1e-12);
        let h = hit_eps(&c, 0.999_999, &fam, HitSelector::Literal, TimeMode::Continuous).unwrap();
        assert!(h.value < 1e-5);
    }

    #[test]
    fn hit_eps_large_sets_on_path3() {
        // from a, hitting {b, c} is Exp(1); from c, hitting {a, b} likewise
        let c = family::path(3).unwrap();
        let fam = con_half(&c).unwrap();
        let h = hit_eps(&c, 0.25, &fam, HitSelector::LargeSets, TimeMode::Continuous).unwrap();
        assert!((h.value - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn targets_are_valid_levels() {
        for kind in [TargetKind::Rho, TargetKind::RhoEnt, TargetKind::RhoBar, TargetKind::RhoBarEnt, TargetKind::THt] {
            let t = HittingTarget::new(kind);
            for &a in &[1e-90, 1e-12, 0.01, 0.3, 0.5] {
                let (g, clamped) = t.level(a);
                assert!(g > 0.0 && g < 1.0 && !clamped, "{kind:?} at {a}");
            }
        }
        assert!(HittingTarget::new(TargetKind::RhoBar).level(1e-300).1);
        assert!(!HittingTarget::new(TargetKind::RhoBarEnt).level(1e-300).1);
    }
}
