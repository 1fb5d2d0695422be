//! The `analyze` report: requested quantities for one chain, with the diagnostics
//! needed to judge them.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::chain::ChainModel;
use crate::charac::{hit_eps, kappa_with, rho_family_with, spectra, HitSelector, TargetKind};
use crate::distance::{derive_c_ent, mixing_time_with, Metric, MixingQuery};
use crate::error::{Error, Result};
use crate::family::DEFAULT_SEED;
use crate::logsob::{c_ls, c_mls, LsOptions};
use crate::sets::{enumerate, ConnectedSetFamily, DEFAULT_CAP};
use crate::spectral::{RestrictedSpectrum, SpectralDecomposition, TimeMode};
use crate::trees::{b_x, root_tree};

pub const SCHEMA: &str = "mixchar/1";

/// `eps` used for the `hit` quantities.
const HIT_EPS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Mixing(Metric, TimeMode),
    Charac(TargetKind, TimeMode),
    Kappa(TimeMode),
    CLs,
    TLs,
    CMls,
    TRel,
    TRelAbs,
    Hit(HitSelector),
    Tree,
}

fn mode_suffix(mode: TimeMode) -> &'static str {
    match mode {
        TimeMode::Continuous => "",
        TimeMode::Discrete => "_discrete",
        TimeMode::Averaged => "_averaged",
    }
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::L1 => "tau1",
        Metric::L2 => "tau2",
        Metric::Linf => "tau_inf",
        Metric::Entropy => "tau_ent",
    }
}

impl Quantity {
    pub fn name(&self) -> String {
        match *self {
            Quantity::Mixing(m, mode) => format!("{}{}", metric_name(m), mode_suffix(mode)),
            Quantity::Charac(k, mode) => format!("{}{}", k.name(), mode_suffix(mode)),
            Quantity::Kappa(mode) => format!("kappa{}", mode_suffix(mode)),
            Quantity::CLs => "c_ls".into(),
            Quantity::TLs => "t_ls".into(),
            Quantity::CMls => "c_mls".into(),
            Quantity::TRel => "t_rel".into(),
            Quantity::TRelAbs => "t_rel_abs".into(),
            Quantity::Hit(HitSelector::Literal) => "hit_literal".into(),
            Quantity::Hit(HitSelector::LargeSets) => "hit_large_sets".into(),
            Quantity::Tree => "tree".into(),
        }
    }

    /// Every accepted quantity name.
    pub fn all() -> Vec<Quantity> {
        let mut out = Vec::new();
        for mode in [TimeMode::Continuous, TimeMode::Discrete, TimeMode::Averaged] {
            for m in [Metric::L1, Metric::L2, Metric::Linf, Metric::Entropy] {
                out.push(Quantity::Mixing(m, mode));
            }
        }
        for mode in [TimeMode::Continuous, TimeMode::Discrete] {
            for k in [TargetKind::Rho, TargetKind::RhoEnt, TargetKind::RhoBar, TargetKind::RhoBarEnt, TargetKind::THt] {
                out.push(Quantity::Charac(k, mode));
            }
            out.push(Quantity::Kappa(mode));
        }
        out.extend([
            Quantity::CLs,
            Quantity::TLs,
            Quantity::CMls,
            Quantity::TRel,
            Quantity::TRelAbs,
            Quantity::Hit(HitSelector::Literal),
            Quantity::Hit(HitSelector::LargeSets),
            Quantity::Tree,
        ]);
        out
    }

    fn needs_family(&self) -> bool {
        matches!(self, Quantity::Charac(..) | Quantity::Kappa(_) | Quantity::CLs | Quantity::TLs | Quantity::Hit(_))
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::all()
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::BadParams(format!("unknown quantity '{s}'")))
    }
}

/// Parses a comma-separated quantity list; `all` expands to every quantity.
pub fn parse_quantities(list: &str) -> Result<Vec<Quantity>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "all" {
            out.extend(Quantity::all());
        } else {
            out.push(item.parse()?);
        }
    }
    let mut seen = Vec::new();
    out.retain(|q| {
        let fresh = !seen.contains(q);
        seen.push(*q);
        fresh
    });
    if out.is_empty() {
        return Err(Error::BadParams("empty quantity list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub seed: u64,
    pub max_subsets: usize,
    /// Mixing-time threshold (applies to every metric).
    pub epsilon: f64,
    pub ls: LsOptions,
    /// Emit per-quantity wall-clock times (makes output run-dependent).
    pub timings: bool,
    /// Record failing quantities under `errors` instead of aborting.
    pub keep_going: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            max_subsets: DEFAULT_CAP,
            epsilon: 0.5,
            ls: LsOptions::default(),
            timings: false,
            keep_going: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub n: usize,
    pub states: Vec<String>,
    pub reversible: bool,
    pub generator_form: bool,
    pub pi_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub delta: f64,
    pub sets: usize,
    pub complete: bool,
    pub cap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub schema: &'static str,
    pub chain: ChainSummary,
    pub seed: u64,
    pub epsilon: f64,
    pub constants: BTreeMap<&'static str, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySummary>,
    pub quantities: BTreeMap<String, Value>,
    pub diagnostics: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl AnalyzeReport {
    /// Scalar value of a quantity, if it has one.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.quantities.get(name).and_then(Value::as_f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Sets {
    family: ConnectedSetFamily,
    specs: Vec<RestrictedSpectrum>,
}

/// Computes the requested quantities. Any failing quantity aborts the analysis.
pub fn analyze(chain: &ChainModel, quantities: &[Quantity], cfg: &AnalyzeConfig) -> Result<AnalyzeReport> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        let now = Instant::now();
        timings.insert(name.to_string(), (now - clock).as_secs_f64() * 1e3);
        clock = now;
    };

    let d = SpectralDecomposition::new(chain)?;
    lap("decompose", &mut timings);
    let sets = if quantities.iter().any(Quantity::needs_family) {
        chain.require_reversible()?;
        let family = enumerate(chain, 0.5, cfg.max_subsets)?;
        let specs = spectra(chain, &family)?;
        lap("set_family", &mut timings);
        Some(Sets { family, specs })
    } else {
        None
    };
    let family = || &sets.as_ref().expect("family computed").family;
    let specs = || &sets.as_ref().expect("family computed").specs[..];
    let ls_opts = LsOptions {
        seed: cfg.seed,
        ..cfg.ls.clone()
    };

    let mut values = BTreeMap::new();
    let mut diag = BTreeMap::new();
    let mut errors = BTreeMap::new();
    let mut ls_cache = None;
    for q in quantities {
        let name = q.name();
        let mut step = || -> Result<()> {
            match *q {
                Quantity::Mixing(metric, mode) => {
                    let m = mixing_time_with(&d, &MixingQuery::new(metric, mode).epsilon(cfg.epsilon))?;
                    values.insert(name.clone(), json!(m.value));
                    diag.insert(name.clone(), json!({ "argmax_state": m.argmax, "per_state": m.per_state }));
                }
                Quantity::Charac(kind, mode) => {
                    let r = rho_family_with(chain, kind, family(), specs(), mode)?;
                    values.insert(name.clone(), json!(r.value));
                    diag.insert(
                        name.clone(),
                        json!({
                            "worst_state": r.worst_state,
                            "per_state": r.per_state,
                            "argmax_set": r.argmax_sets.get(r.worst_state).cloned().flatten(),
                            "target_clamped": r.target_clamped,
                            "complete": r.complete,
                        }),
                    );
                }
                Quantity::Kappa(mode) => {
                    if mode == TimeMode::Discrete {
                        chain.require_discrete()?;
                    }
                    let k = kappa_with(family(), specs(), mode)?;
                    values.insert(name.clone(), json!(k.kappa));
                    diag.insert(
                        name.clone(),
                        json!({ "argmin_set": k.argmin_set, "min_lambda": k.min_lambda, "complete": k.complete }),
                    );
                }
                Quantity::CLs | Quantity::TLs => {
                    if ls_cache.is_none() {
                        ls_cache = Some(c_ls(chain, Some(family()), &ls_opts)?);
                    }
                    let r = ls_cache.as_ref().expect("c_ls computed");
                    let v = if *q == Quantity::CLs { r.c_ls } else { r.t_ls };
                    values.insert(name.clone(), json!(v));
                    diag.insert(
                        "c_ls".into(),
                        json!({
                            "lower": r.lower,
                            "upper": r.upper,
                            "raw": r.raw,
                            "limit": r.limit,
                            "witness": r.witness,
                            "witness_ratio": r.witness_ratio,
                            "starts": r.starts,
                            "dispersion": r.dispersion,
                            "seed": r.seed,
                        }),
                    );
                }
                Quantity::CMls => {
                    let r = c_mls(chain, &ls_opts)?;
                    values.insert(name.clone(), json!(r.c_mls));
                    diag.insert(name.clone(), json!({ "limit": r.limit, "starts": r.starts, "witness": r.witness }));
                }
                Quantity::TRel => {
                    values.insert(name.clone(), json!(d.relaxation_times().t_rel));
                }
                Quantity::TRelAbs => {
                    chain.require_discrete()?;
                    values.insert(name.clone(), json!(d.relaxation_times().t_rel_absolute));
                }
                Quantity::Hit(sel) => {
                    let r = hit_eps(chain, HIT_EPS, family(), sel, TimeMode::Continuous)?;
                    values.insert(name.clone(), json!(r.value));
                    diag.insert(name.clone(), json!({ "epsilon": r.epsilon, "per_state": r.per_state, "complete": r.complete }));
                }
                Quantity::Tree => {
                    let tree = root_tree(chain)?;
                    let mut leaves = BTreeMap::new();
                    for x in tree.leaves() {
                        let p = b_x(chain, &tree, x)?;
                        leaves.insert(
                            chain.states()[x].clone(),
                            json!({ "b_x": p.b_x, "argmax_delta": p.argmax_delta, "alpha_x": p.alpha_x, "alpha_x_min": p.alpha_x_min }),
                        );
                    }
                    values.insert(name.clone(), json!({ "root": tree.root, "tie": tree.tie, "leaves": leaves }));
                }
            }
            Ok(())
        };
        if let Err(e) = step() {
            if !cfg.keep_going {
                return Err(e);
            }
            errors.insert(name.clone(), e.to_string());
        }
        lap(&name, &mut timings);
    }

    let c = derive_c_ent();
    Ok(AnalyzeReport {
        schema: SCHEMA,
        chain: ChainSummary {
            n: chain.n(),
            states: chain.states().to_vec(),
            reversible: chain.is_reversible(),
            generator_form: chain.is_generator_form(),
            pi_min: chain.pi_min(),
        },
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        constants: BTreeMap::from([("c_prime", c.c_prime), ("c_ent", c.c_ent)]),
        family: sets.as_ref().map(|s| FamilySummary {
            delta: s.family.delta,
            sets: s.family.len(),
            complete: s.family.complete,
            cap: s.family.cap,
        }),
        quantities: values,
        diagnostics: diag,
        errors,
        timings_ms: cfg.timings.then_some(timings),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_file::load_spec;

    #[test]
    fn names_round_trip() {
        for q in Quantity::all() {
            assert_eq!(q.name().parse::<Quantity>().unwrap(), q);
        }
        assert!(parse_quantities("tau2,bogus").is_err());
    }

    #[test]
    fn two_state_values() {
        let chain = load_spec(r#"{"type":"matrix","P":[[0,1],[1,0]]}"#).unwrap();
        let qs = parse_quantities("tau2,rho,kappa,c_ls").unwrap();
        let r = analyze(&chain, &qs, &AnalyzeConfig::default()).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((r.value("tau2").unwrap() - ln2 / 2.0).abs() < 1e-8);
        assert!((r.value("rho").unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-8);
        assert!((r.value("kappa").unwrap() - ln2).abs() < 1e-8);
        assert!((r.value("c_ls").unwrap() - 1.0).abs() < 1e-5);
        assert!(r.to_json().contains("\"schema\": \"mixchar/1\""));
    }

    #[test]
    fn cycle3_family_complete() {
        let chain = load_spec(r#"{"type":"family","name":"cycle","params":{"n":3}}"#).unwrap();
        let r = analyze(&chain, &parse_quantities("rho").unwrap(), &AnalyzeConfig::default()).unwrap();
        assert!(r.family.unwrap().complete);
    }

    #[test]
    fn deterministic_json() {
        let chain = load_spec(r#"{"type":"family","name":"path","params":{"n":4}}"#).unwrap();
        let qs = parse_quantities("tau2,c_ls,kappa,tree").unwrap();
        let a = analyze(&chain, &qs, &AnalyzeConfig::default()).unwrap().to_json();
        let b = analyze(&chain, &qs, &AnalyzeConfig::default()).unwrap().to_json();
        assert_eq!(a, b);
    }
}
