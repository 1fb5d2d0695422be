//! Weighted random walks on trees: central-vertex rooting, leaf cuts, `b_x`, and the
//! tree-specific checks and perturbation experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ChainModel, WeightedNetwork};
use crate::charac::kappa;
use crate::distance::{mixing_time_with, Metric, MixingQuery};
use crate::error::{Error, Result};
use crate::hitting::{expected_hitting_all, kac_phi, survival_curve, threshold_time, Start};
use crate::logsob::{c_ls, LsOptions};
use crate::sets::{con_half, enumerate, DEFAULT_CAP};
use crate::spectral::{restricted, SpectralDecomposition, TimeMode};
use crate::verify::VerificationRecord;

#[derive(Debug, Clone, Serialize)]
pub struct RootedTree {
    pub root: usize,
    /// True when two central vertices exist and the smaller index was taken.
    pub tie: bool,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// `pi(T_u)`.
    pub subtree_mass: Vec<f64>,
    pub degree: Vec<usize>,
}

impl RootedTree {
    /// `T_u`, sorted.
    pub fn subtree(&self, u: usize) -> Vec<usize> {
        let mut out = vec![u];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out.sort_unstable();
        out
    }

    /// `(u, parent(u), ..., root)`.
    pub fn path_to_root(&self, u: usize) -> Vec<usize> {
        let mut p = vec![u];
        let mut v = u;
        while let Some(w) = self.parent[v] {
            p.push(w);
            v = w;
        }
        p
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.degree.len()).filter(|&v| self.degree[v] == 1).collect()
    }
}

fn orient(adj: &[Vec<usize>], root: usize) -> (Vec<Option<usize>>, Vec<Vec<usize>>, Vec<usize>) {
    let n = adj.len();
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut order = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                children[v].push(w);
                order.push(w);
            }
        }
        i += 1;
    }
    (parent, children, order)
}

/// Roots the tree at a central vertex (every component of `T - {v}` has mass at most 1/2).
pub fn root_tree(chain: &ChainModel) -> Result<RootedTree> {
    let n = chain.n();
    let adj = chain.support_graph();
    let edges: usize = adj.iter().map(|a| a.len()).sum::<usize>() / 2;
    if n < 2 || edges != n - 1 || !chain.is_reversible() {
        return Err(Error::NotATree);
    }
    let pi = chain.pi();
    let mass_from = |order: &[usize], children: &[Vec<usize>]| {
        let mut m = vec![0.0; n];
        for &v in order.iter().rev() {
            m[v] = pi[v] + children[v].iter().map(|&c| m[c]).sum::<f64>();
        }
        m
    };
    let (_, children0, order0) = orient(&adj, 0);
    if order0.len() != n {
        return Err(Error::NotATree);
    }
    let m0 = mass_from(&order0, &children0);
    let tol = 1e-12;
    let central: Vec<usize> = (0..n)
        .filter(|&v| {
            let up = 1.0 - m0[v];
            let down = children0[v].iter().map(|&c| m0[c]).fold(0.0, f64::max);
            up.max(down) <= 0.5 + tol
        })
        .collect();
    let root = *central.first().ok_or_else(|| Error::NumericalFailure("no central vertex found".into()))?;
    let (parent, children, order) = orient(&adj, root);
    let subtree_mass = mass_from(&order, &children);
    Ok(RootedTree {
        root,
        tie: central.len() > 1,
        parent,
        children,
        subtree_mass,
        degree: adj.iter().map(|a| a.len()).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LeafCut {
    pub leaf: usize,
    pub delta: f64,
    pub x_delta: usize,
    /// Component of the leaf in `T - {x_delta}`; empty when `x_delta` is the leaf.
    pub d_set: Vec<usize>,
    /// `alpha(D_delta)`, absent for an empty `D_delta`.
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
}

/// `x_delta`: the vertex nearest `x` on its root path with `pi(T_y) >= delta`.
pub fn leaf_cut(chain: &ChainModel, tree: &RootedTree, x: usize, delta: f64) -> Result<LeafCut> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::BadDelta(delta));
    }
    if x >= tree.degree.len() {
        return Err(Error::BadState(x));
    }
    if tree.degree[x] != 1 {
        return Err(Error::DomainError(format!("state {x} is not a leaf")));
    }
    let path = tree.path_to_root(x);
    let pos = path
        .iter()
        .position(|&y| tree.subtree_mass[y] >= delta)
        .unwrap_or(path.len() - 1);
    let x_delta = path[pos];
    let (d_set, alpha, lambda) = if pos == 0 {
        (Vec::new(), None, None)
    } else {
        let d = tree.subtree(path[pos - 1]);
        let spec = restricted(chain, &d)?;
        let lam = spec.lambda();
        (d, Some(lam / spec.mass().ln().abs()), Some(lam))
    };
    Ok(LeafCut {
        leaf: x,
        delta,
        x_delta,
        d_set,
        alpha,
        lambda,
    })
}

/// `b_x(delta) = min{t : P_x[T_{x_delta} > t] <= delta^3/4}`.
pub fn b_x_delta(chain: &ChainModel, cut: &LeafCut) -> Result<f64> {
    if cut.d_set.is_empty() {
        return Ok(0.0);
    }
    let curve = survival_curve(chain, &Start::State(cut.leaf), &cut.d_set, TimeMode::Continuous)?;
    threshold_time(&curve, cut.delta.powi(3) / 4.0)
}

/// 64 log-spaced points in `(1e-4, 1/4]`.
pub fn delta_grid() -> Vec<f64> {
    let (a, b) = (1e-4f64.ln(), 0.25f64.ln());
    (1..=64).map(|i| (a + (b - a) * i as f64 / 64.0).exp()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BxProfile {
    pub leaf: usize,
    pub b_x: f64,
    pub argmax_delta: f64,
    /// `(delta, b_x(delta))` at every evaluated point.
    pub values: Vec<(f64, f64)>,
    /// `max_delta alpha_x(delta)` over the evaluated points with nonempty `D_delta`
    /// (`inf` when every `D_delta` is empty).
    pub alpha_x: f64,
    /// The smallest `alpha_x(delta)` seen; each `D_delta` lies in `Con_{1/2}`.
    pub alpha_x_min: f64,
}

/// `b_x = sup_{delta in (0,1/4]} b_x(delta)`.
///
/// Between consecutive subtree masses on the root path `x_delta` is constant and the
/// target `delta^3/4` decreases in `delta`, so the sup sits at a breakpoint
/// `delta = pi(T_y) <= 1/4` or at `1/4`. Those are evaluated alongside the grid.
pub fn b_x(chain: &ChainModel, tree: &RootedTree, x: usize) -> Result<BxProfile> {
    let mut deltas = delta_grid();
    for y in tree.path_to_root(x) {
        let m = tree.subtree_mass[y];
        if m > 0.0 && m <= 0.25 {
            deltas.push(m);
        }
    }
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let values: Vec<(f64, f64, Option<f64>)> = deltas
        .par_iter()
        .map(|&d| {
            let cut = leaf_cut(chain, tree, x, d)?;
            Ok((d, b_x_delta(chain, &cut)?, cut.alpha))
        })
        .collect::<Result<_>>()?;
    let mut best = (0.0, deltas[deltas.len() - 1]);
    let mut alpha_x = f64::NEG_INFINITY;
    let mut alpha_x_min = f64::INFINITY;
    for &(d, b, a) in &values {
        if b > best.0 {
            best = (b, d);
        }
        if let Some(a) = a {
            alpha_x = alpha_x.max(a);
            alpha_x_min = alpha_x_min.min(a);
        }
    }
    if alpha_x == f64::NEG_INFINITY {
        alpha_x = f64::INFINITY;
    }
    Ok(BxProfile {
        leaf: x,
        b_x: best.0,
        argmax_delta: best.1,
        values: values.into_iter().map(|v| (v.0, v.1)).collect(),
        alpha_x,
        alpha_x_min,
    })
}

#[derive(Debug, Clone)]
pub struct TreeCheckOptions {
    pub slack: f64,
    pub ls: LsOptions,
    /// Deltas at which the escape bound for `Con_delta` sets is checked.
    pub escape_deltas: Vec<f64>,
}

impl Default for TreeCheckOptions {
    fn default() -> Self {
        Self {
            slack: 1e-6,
            ls: LsOptions::default(),
            escape_deltas: vec![0.25, 0.125, 0.0625],
        }
    }
}

fn laplace_closed_form(coeffs: &[f64], rates: &[f64], beta: f64) -> f64 {
    1.0 + coeffs.iter().zip(rates).map(|(a, g)| beta * a / (g - beta)).sum::<f64>()
}

/// The tree lower bound and the supporting identities: Kac's formula, path additivity of
/// hitting-time moments, the second-moment bound, the Laplace bound, the large-deviation
/// bounds and the escape bound for `Con_delta` sets. Upper-bound constants are reported.
pub fn tree_theorem_check(chain: &ChainModel, opts: &TreeCheckOptions) -> Result<Vec<VerificationRecord>> {
    let tree = root_tree(chain)?;
    let s = opts.slack;
    let d = SpectralDecomposition::new(chain)?;
    let t_rel = d.relaxation_times().t_rel;
    let tau = |m: Metric| -> Result<f64> { Ok(mixing_time_with(&d, &MixingQuery::new(m, TimeMode::Continuous))?.value) };
    let tau1 = tau(Metric::L1)?;
    let tau2 = tau(Metric::L2)?;
    let fam = con_half(chain)?;
    let k = kappa(chain, &fam, TimeMode::Continuous)?;
    let ls = c_ls(chain, Some(&fam), &opts.ls)?;
    let t_ls = ls.t_ls;
    let mut out = vec![
        VerificationRecord::check("tree-lower-tau1", "tau_1 <= tau_2 on trees", tau1, tau2, s),
        VerificationRecord::check("tree-lower-tls", "t_LS/4 <= tau_2 on trees", t_ls / 4.0, tau2, s),
        VerificationRecord::report(
            "tree-upper-constant",
            "(tau_2 - tau_1)/max(t_LS, sqrt(t_LS tau_1))",
            (tau2 - tau1) / t_ls.max((t_ls * tau1).sqrt()),
        ),
    ];
    if tree.tie {
        out.push(VerificationRecord::report("tree-root-tie", "two central vertices, smaller index taken", tree.root as f64));
    }

    // Edge identities.
    let n = chain.n();
    let mut edge_mean = vec![0.0; n];
    let mut edge_var = vec![0.0; n];
    for y in 0..n {
        let Some(z) = tree.parent[y] else { continue };
        let sub = tree.subtree(y);
        let phi = kac_phi(chain, y, z, &sub)?;
        let m1 = expected_hitting_all(chain, &[z], TimeMode::Continuous, 1)?[y];
        let m2 = expected_hitting_all(chain, &[z], TimeMode::Continuous, 2)?[y];
        edge_mean[y] = m1;
        edge_var[y] = m2 - m1 * m1;
        out.push(VerificationRecord::check(format!("kac-{y}-{z}"), "|Phi(T_y) E_y[T_z] - 1| <= 1e-9", (phi * m1 - 1.0).abs(), 1e-9, 0.0));
        out.push(VerificationRecord::check(
            format!("second-moment-{y}-{z}"),
            "E_y[T_z^2] <= 4 t_rel E_y[T_z]",
            m2,
            4.0 * t_rel * m1,
            1e-8,
        ));
    }
    let root = tree.root;
    let to_root_1 = expected_hitting_all(chain, &[root], TimeMode::Continuous, 1)?;
    let to_root_2 = expected_hitting_all(chain, &[root], TimeMode::Continuous, 2)?;
    for x in tree.leaves() {
        if x == root {
            continue;
        }
        let path = tree.path_to_root(x);
        let sum_mean: f64 = path[..path.len() - 1].iter().map(|&v| edge_mean[v]).sum();
        let sum_var: f64 = path[..path.len() - 1].iter().map(|&v| edge_var[v]).sum();
        let var = to_root_2[x] - to_root_1[x] * to_root_1[x];
        out.push(VerificationRecord::check_rel(format!("path-mean-{x}"), "E_x[T_o] = sum of edge means", (to_root_1[x] - sum_mean).abs(), 0.0, 1e-8));
        out.push(VerificationRecord::check_rel(format!("path-var-{x}"), "Var_x[T_o] = sum of edge variances", (var - sum_var).abs(), 0.0, 1e-8 * var.max(1.0)));
    }

    // Per-leaf quantities.
    let alpha = 1.0 / k.kappa;
    for x in tree.leaves() {
        let prof = b_x(chain, &tree, x)?;
        out.push(VerificationRecord::check(format!("alpha-x-{x}"), "alpha_x >= alpha", alpha, prof.alpha_x, 1e-9));
        out.push(VerificationRecord::check(format!("alpha-x-delta-{x}"), "alpha(D_delta) >= alpha for every sampled delta", alpha, prof.alpha_x_min, 1e-9));
        out.push(VerificationRecord::report(
            format!("ld1-constant-{x}"),
            "(b_x - tau_1)/max(kappa, sqrt(kappa tau_1))",
            (prof.b_x - tau1) / k.kappa.max((k.kappa * tau1).sqrt()),
        ));
        // Each distinct D_delta: large deviations and the Laplace bound.
        let mut seen: Vec<usize> = Vec::new();
        for &(delta, _) in &prof.values {
            let cut = leaf_cut(chain, &tree, x, delta)?;
            if cut.d_set.is_empty() || seen.contains(&cut.x_delta) {
                continue;
            }
            seen.push(cut.x_delta);
            let lam = cut.lambda.unwrap_or(f64::NAN);
            let e = expected_hitting_all(chain, &[cut.x_delta], TimeMode::Continuous, 1)?[x];
            let curve = survival_curve(chain, &Start::State(x), &cut.d_set, TimeMode::Continuous)?;
            let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
            for i in 0..=80 {
                let t = if i <= 40 {
                    2.0 * e * i as f64 / 40.0
                } else {
                    2.0 * e + (i - 40) as f64 * 0.5 / lam
                };
                let bound = if t <= 2.0 * e { (-t * t * lam / (8.0 * e)).exp() } else { (-lam * t / 4.0).exp() };
                let v = curve.value(e + t)?;
                if v - bound > worst.0 {
                    worst = (v - bound, v, bound);
                }
            }
            out.push(VerificationRecord::check(
                format!("large-deviation-{x}-{}", cut.x_delta),
                "P_x[T_{x_delta} >= E + t] <= exp(-t^2 lambda(D)/(8E)) on [0,2E], exp(-lambda(D) t/4) beyond",
                worst.1,
                worst.2,
                1e-10,
            ));
            let mut lap = (f64::NEG_INFINITY, 0.0, 0.0);
            for &y in &cut.d_set {
                let z = tree.parent[y].ok_or(Error::NotATree)?;
                let sub = tree.subtree(y);
                let c = survival_curve(chain, &Start::State(y), &sub, TimeMode::Continuous)?;
                let ey = edge_mean[y];
                for beta in [lam / 4.0, lam / 2.0] {
                    let lhs = laplace_closed_form(&c.coeffs, &c.rates, beta);
                    let rhs = 1.0 + ey * beta * (1.0 + 2.0 * beta / lam);
                    if lhs - rhs > lap.0 {
                        lap = (lhs - rhs, lhs, rhs);
                    }
                }
                let _ = z;
            }
            out.push(VerificationRecord::check(
                format!("laplace-{x}-{}", cut.x_delta),
                "E_y[e^{beta T_z}] <= 1 + E_y[T_z] beta (1 + 2 beta/lambda(D))",
                lap.1,
                lap.2,
                1e-8,
            ));
        }
        // Escape bound for Con_delta sets containing x.
        for &delta in &opts.escape_deltas {
            let fam_d = enumerate(chain, delta, DEFAULT_CAP)?;
            let t = prof.b_x + 3.0 * k.kappa + 10.0 * t_rel;
            let mut worst: f64 = 0.0;
            for a in fam_d.sets.iter().filter(|a| a.contains(&x)) {
                let c = survival_curve(chain, &Start::State(x), a, TimeMode::Continuous)?;
                worst = worst.max(c.value(t)?);
            }
            out.push(VerificationRecord::check(
                format!("escape-{x}-{delta}"),
                "P_x[T_{A^c} > b_x + 3 kappa + 10 t_rel] < delta^3/2 for A in Con_delta",
                worst,
                delta.powi(3) / 2.0,
                1e-12,
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessRow {
    pub tree_id: usize,
    pub seed: u64,
    #[serde(rename = "M")]
    pub m: f64,
    pub tau2: f64,
    pub tau2_pert: f64,
    pub ratio: f64,
    pub tau_inf_ratio: f64,
    pub tau_ent_ratio: f64,
}

fn taus(chain: &ChainModel) -> Result<[f64; 3]> {
    let d = SpectralDecomposition::new(chain)?;
    let t = |m: Metric| -> Result<f64> { Ok(mixing_time_with(&d, &MixingQuery::new(m, TimeMode::Continuous))?.value) };
    Ok([t(Metric::L2)?, t(Metric::Linf)?, t(Metric::Entropy)?])
}

fn log_uniform<R: Rng>(rng: &mut R, m: f64) -> f64 {
    if m <= 1.0 {
        1.0
    } else {
        rng.random_range(-m.ln()..=m.ln()).exp()
    }
}

/// Multiplies each edge weight by an independent log-uniform factor in `[1/M, M]` and
/// compares `tau_2`, `tau_inf`, `tau_ent` with the original walk. Row `i` uses seed `seed + i`.
pub fn robustness_experiment(net: &WeightedNetwork, tree_id: usize, m: f64, trials: usize, seed: u64) -> Result<Vec<RobustnessRow>> {
    if !(m >= 1.0) {
        return Err(Error::DomainError(format!("M must be at least 1, got {m}")));
    }
    let base = ChainModel::from_network(net)?;
    let [t2, tinf, tent] = taus(&base)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let edges = net.edges().iter().map(|&(a, b, w)| (a, b, w * log_uniform(&mut rng, m))).collect();
            let pert = ChainModel::from_network(&WeightedNetwork::new(net.vertices().to_vec(), edges)?)?;
            let [p2, pinf, pent] = taus(&pert)?;
            Ok(RobustnessRow {
                tree_id,
                seed: seed.wrapping_add(i),
                m,
                tau2: t2,
                tau2_pert: p2,
                ratio: t2 / p2,
                tau_inf_ratio: tinf / pinf,
                tau_ent_ratio: tent / pent,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub seed: u64,
    #[serde(rename = "M")]
    pub m: f64,
    pub tau2: f64,
    pub tau2_pert: f64,
    pub ratio: f64,
    pub tau_ent_ratio: f64,
}

/// Multiplies row `x` of the generator by a log-uniform `r_x` in `[1/M, M]` and records
/// the `tau_2` and `tau_ent` ratios.
pub fn rate_experiment(chain: &ChainModel, m: f64, trials: usize, seed: u64) -> Result<Vec<RateRow>> {
    if !(m >= 1.0) {
        return Err(Error::DomainError(format!("M must be at least 1, got {m}")));
    }
    let [t2, _, tent] = taus(chain)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let r: Vec<f64> = (0..chain.n()).map(|_| log_uniform(&mut rng, m)).collect();
            let pert = chain.rescale_rows(&r)?;
            let [p2, _, pent] = taus(&pert)?;
            Ok(RateRow {
                seed: seed.wrapping_add(i),
                m,
                tau2: t2,
                tau2_pert: p2,
                ratio: t2 / p2,
                tau_ent_ratio: tent / pent,
            })
        })
        .collect()
}
