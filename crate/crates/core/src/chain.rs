//! Finite Markov chains: construction, validation and transformation.
//!
//! A [`ChainModel`] carries a jump matrix `P`, per-state jump rates `r` and the
//! stationary distribution `pi` of the continuous-time chain with generator
//! `diag(r) (P - I)`. Chains built from a matrix, a network or a named family
//! have `r = 1`, so the continuous-time chain is the usual `H_t = e^{-t(I-P)}`
//! and the discrete-time chain is driven by `P` itself. Row rescaling keeps the
//! jump matrix and changes only the rates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_refined;

const ROW_SUM_TOL: f64 = 1e-12;
const REVERSIBILITY_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainSource {
    Matrix,
    Network,
    Family(String),
    Rescaled,
}

#[derive(Debug, Clone)]
pub struct ChainModel {
    states: Vec<String>,
    p: DMatrix<f64>,
    pi: DVector<f64>,
    rates: DVector<f64>,
    reversible: bool,
    source: ChainSource,
}

/// Undirected network with positive conductances; self-loops allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    vertices: Vec<String>,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedNetwork {
    pub fn new(vertices: Vec<String>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::BadParams("network has no vertices".into()));
        }
        for &(u, v, c) in &edges {
            if u >= vertices.len() || v >= vertices.len() {
                return Err(Error::BadParams(format!("edge ({u}, {v}) references a missing vertex")));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::BadParams(format!("conductance {c} on edge ({u}, {v}) is not positive")));
            }
        }
        let net = Self { vertices, edges };
        if !net.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(net)
    }

    /// Builds a network from labelled edges; vertices are numbered in order of first appearance.
    pub fn from_labeled_edges<S: AsRef<str>>(edges: &[(S, S, f64)]) -> Result<Self> {
        let mut vertices: Vec<String> = Vec::new();
        let index = |label: &str, vertices: &mut Vec<String>| -> usize {
            match vertices.iter().position(|v| v == label) {
                Some(i) => i,
                None => {
                    vertices.push(label.to_string());
                    vertices.len() - 1
                }
            }
        };
        let mut out = Vec::with_capacity(edges.len());
        for (u, v, c) in edges {
            let iu = index(u.as_ref(), &mut vertices);
            let iv = index(v.as_ref(), &mut vertices);
            out.push((iu, iv, *c));
        }
        Self::new(vertices, out)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for &(u, v, _) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

impl ChainModel {
    /// Builds a chain from a row-stochastic, irreducible matrix.
    pub fn from_matrix(p: DMatrix<f64>) -> Result<Self> {
        let n = default_labels(p.nrows());
        Self::from_matrix_labeled(p, n, ChainSource::Matrix)
    }

    pub(crate) fn from_matrix_labeled(
        p: DMatrix<f64>,
        states: Vec<String>,
        source: ChainSource,
    ) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::NotSquare(p.nrows(), p.ncols()));
        }
        if p.nrows() == 0 {
            return Err(Error::BadParams("empty state space".into()));
        }
        validate_stochastic(&p)?;
        let components = strongly_connected_components(&p);
        if components > 1 {
            return Err(Error::Reducible { components });
        }
        let pi = stationary_distribution(&p)?;
        let rates = DVector::from_element(p.nrows(), 1.0);
        let reversible = detailed_balance(&p, &pi, &rates);
        Ok(Self {
            states,
            p,
            pi,
            rates,
            reversible,
            source,
        })
    }

    /// Random walk on a weighted network: `P(v,u) = c(v,u)/c_v`, `pi(v) = c_v/c_V`.
    pub fn from_network(net: &WeightedNetwork) -> Result<Self> {
        let n = net.vertices.len();
        let mut c = DMatrix::<f64>::zeros(n, n);
        for &(u, v, w) in &net.edges {
            if u == v {
                c[(u, u)] += w;
            } else {
                c[(u, v)] += w;
                c[(v, u)] += w;
            }
        }
        let cv: Vec<f64> = (0..n).map(|x| c.row(x).sum()).collect();
        if cv.iter().any(|&s| s <= 0.0) {
            return Err(Error::Disconnected);
        }
        let total: f64 = cv.iter().sum();
        let mut p = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                p[(x, y)] = c[(x, y)] / cv[x];
            }
        }
        let pi = DVector::from_iterator(n, cv.iter().map(|&s| s / total));
        let rates = DVector::from_element(n, 1.0);
        Ok(Self {
            states: net.vertices.clone(),
            p,
            pi,
            rates,
            reversible: true,
            source: ChainSource::Network,
        })
    }

    /// Multiplies row `x` of the generator by `r[x]`.
    ///
    /// The jump matrix is unchanged; the new stationary law is
    /// `pi~(x) = (pi(x)/r_x) / L` with `L = sum_y pi(y)/r_y`.
    pub fn rescale_rows(&self, r: &[f64]) -> Result<Self> {
        if r.len() != self.n() {
            return Err(Error::BadParams(format!(
                "expected {} rate factors, got {}",
                self.n(),
                r.len()
            )));
        }
        for (state, &rate) in r.iter().enumerate() {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::NonPositiveRate { state, rate });
            }
        }
        if !self.reversible {
            return Err(Error::NotReversible);
        }
        let rates = DVector::from_iterator(self.n(), self.rates.iter().zip(r).map(|(a, b)| a * b));
        let weights: Vec<f64> = self.pi.iter().zip(r).map(|(p, rx)| p / rx).collect();
        let total: f64 = weights.iter().sum();
        let pi = DVector::from_iterator(self.n(), weights.into_iter().map(|w| w / total));
        let reversible = detailed_balance(&self.p, &pi, &rates);
        Ok(Self {
            states: self.states.clone(),
            p: self.p.clone(),
            pi,
            rates,
            reversible,
            source: ChainSource::Rescaled,
        })
    }

    /// `a I + (1 - a) P`.
    pub fn lazy(&self, a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::BadParams(format!("laziness {a} must lie in [0, 1)")));
        }
        if self.is_generator_form() {
            return Err(Error::GeneratorForm);
        }
        let n = self.n();
        let p = DMatrix::<f64>::identity(n, n) * a + &self.p * (1.0 - a);
        let mut chain = Self::from_matrix_labeled(p, self.states.clone(), ChainSource::Family("lazy".into()))?;
        // Laziness preserves the stationary law exactly; avoid re-solving noise.
        chain.pi = self.pi.clone();
        chain.reversible = self.reversible;
        Ok(chain)
    }

    pub(crate) fn with_source(mut self, source: ChainSource) -> Self {
        self.source = source;
        self
    }

    pub(crate) fn with_labels(mut self, states: Vec<String>) -> Self {
        debug_assert_eq!(states.len(), self.n());
        self.states = states;
        self
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn pi_min(&self) -> f64 {
        self.pi.min()
    }

    pub fn rates(&self) -> &DVector<f64> {
        &self.rates
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn source(&self) -> &ChainSource {
        &self.source
    }

    /// True when some jump rate differs from 1, i.e. the chain only has continuous-time dynamics.
    pub fn is_generator_form(&self) -> bool {
        self.rates.iter().any(|&r| r != 1.0)
    }

    pub fn require_reversible(&self) -> Result<()> {
        if self.reversible {
            Ok(())
        } else {
            Err(Error::NotReversible)
        }
    }

    pub fn require_discrete(&self) -> Result<()> {
        if self.is_generator_form() {
            Err(Error::GeneratorForm)
        } else {
            Ok(())
        }
    }

    /// Mass of a set of states.
    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.pi[x]).sum()
    }

    /// `-G = diag(r) (I - P)`.
    pub fn neg_generator(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut g = DMatrix::<f64>::identity(n, n) - &self.p;
        for x in 0..n {
            let r = self.rates[x];
            g.row_mut(x).scale_mut(r);
        }
        g
    }

    /// Additive symmetrization `(L + L*)/2` of `L = -G` in `L_2(pi)`.
    /// For unit rates this is `I - Q` with `Q = (P + P*)/2`.
    pub fn symmetrized_neg_generator(&self) -> DMatrix<f64> {
        let l = self.neg_generator();
        let n = self.n();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                let adj = self.pi[y] * l[(y, x)] / self.pi[x];
                s[(x, y)] = 0.5 * (l[(x, y)] + adj);
            }
        }
        s
    }

    /// `Q = (P + P*)/2`; for generator-form chains, `I - (L + L*)/2`.
    pub fn q(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::<f64>::identity(n, n) - self.symmetrized_neg_generator()
    }

    /// Conductance `c(x,y) = pi(x) r_x P(x,y)` (symmetric for reversible chains).
    pub fn conductance(&self, x: usize, y: usize) -> f64 {
        self.pi[x] * self.rates[x] * self.p[(x, y)]
    }

    /// The conductance network of a reversible transition-matrix chain, including self-loops.
    pub fn to_network(&self) -> Result<WeightedNetwork> {
        self.require_reversible()?;
        self.require_discrete()?;
        let n = self.n();
        let mut edges = Vec::new();
        for x in 0..n {
            for y in x..n {
                let c = self.conductance(x, y);
                if c > 0.0 {
                    edges.push((x, y, c));
                }
            }
        }
        WeightedNetwork::new(self.states.clone(), edges)
    }

    /// Undirected support graph: `y` is adjacent to `x` when `P(x,y) > 0` or `P(y,x) > 0`, `x != y`.
    pub fn support_graph(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        (0..n)
            .map(|x| {
                (0..n)
                    .filter(|&y| y != x && (self.p[(x, y)] > 0.0 || self.p[(y, x)] > 0.0))
                    .collect()
            })
            .collect()
    }

    /// Maximum detailed-balance defect `max |pi(x) L(x,y) - pi(y) L(y,x)|`.
    pub fn detailed_balance_defect(&self) -> f64 {
        balance_defect(&self.p, &self.pi, &self.rates)
    }
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn validate_stochastic(p: &DMatrix<f64>) -> Result<()> {
    for row in 0..p.nrows() {
        let r = p.row(row);
        let sum: f64 = r.iter().sum();
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 0.0 || !sum.is_finite() || (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotStochastic { row, sum, min });
        }
    }
    Ok(())
}

/// Number of strongly connected components of the support digraph (Kosaraju).
pub(crate) fn strongly_connected_components(p: &DMatrix<f64>) -> usize {
    let n = p.nrows();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..n).filter(|&y| y != x && p[(x, y)] > 0.0).collect())
        .collect();
    let pred: Vec<Vec<usize>> = (0..n)
        .map(|y| (0..n).filter(|&x| x != y && p[(x, y)] > 0.0).collect())
        .collect();

    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // iterative post-order DFS
        let mut stack = vec![(start, 0usize)];
        seen[start] = true;
        while let Some((v, i)) = stack.pop() {
            if i < succ[v].len() {
                stack.push((v, i + 1));
                let w = succ[v][i];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }

    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let mut stack = vec![root];
        comp[root] = count;
        while let Some(v) = stack.pop() {
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    count
}

/// Left Perron vector of an irreducible stochastic matrix.
///
/// A few lazy power-iteration sweeps give a positive starting point; the
/// linear system `pi (I - P) = 0, sum pi = 1` then pins it down.
fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let pt = p.transpose();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..50 {
        let next = (&pt * &v + &v) * 0.5;
        let diff = (&next - &v).amax();
        v = next;
        if diff < 1e-13 {
            break;
        }
    }

    let mut a = DMatrix::<f64>::identity(n, n) - &pt;
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mut pi = match solve_refined(&a, &b) {
        Ok(x) => x,
        Err(_) => v,
    };
    for x in pi.iter_mut() {
        if *x < 0.0 && *x > -1e-14 {
            *x = 0.0;
        }
    }
    let total = pi.sum();
    pi /= total;
    if pi.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NumericalFailure(
            "stationary distribution has non-positive entries".into(),
        ));
    }
    let residual = (&pt * &pi - &pi).amax();
    if residual > STATIONARY_TOL {
        return Err(Error::NumericalFailure(format!(
            "stationary residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(pi)
}

fn balance_defect(p: &DMatrix<f64>, pi: &DVector<f64>, rates: &DVector<f64>) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0_f64;
    for x in 0..n {
        for y in (x + 1)..n {
            let fwd = pi[x] * rates[x] * p[(x, y)];
            let bwd = pi[y] * rates[y] * p[(y, x)];
            worst = worst.max((fwd - bwd).abs());
        }
    }
    worst
}

fn detailed_balance(p: &DMatrix<f64>, pi: &DVector<f64>, rates: &DVector<f64>) -> bool {
    balance_defect(p, pi, rates) <= REVERSIBILITY_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(n: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, data)
    }

    #[test]
    fn two_state_flip() {
        let c = ChainModel::from_matrix(mat(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((c.pi()[0] - 0.5).abs() < 1e-15);
        assert!(c.is_reversible());
    }

    #[test]
    fn single_state() {
        let c = ChainModel::from_matrix(mat(1, &[1.0])).unwrap();
        assert_eq!(c.pi()[0], 1.0);
        assert!(c.is_reversible());
    }

    #[test]
    fn three_path_stationary_matches_linear_solve() {
        let c = ChainModel::from_matrix(mat(3, &[0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0])).unwrap();
        // pi P = pi: pi_a = pi_b / 2, pi_c = pi_b / 2 -> (1/4, 1/2, 1/4)
        for (got, want) in c.pi().iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_non_stochastic() {
        let err = ChainModel::from_matrix(mat(2, &[0.5, 0.4, 1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NotStochastic { row: 0, .. }));
    }

    #[test]
    fn rejects_reducible() {
        let err = ChainModel::from_matrix(mat(2, &[1.0, 0.0, 0.5, 0.5])).unwrap_err();
        assert_eq!(err, Error::Reducible { components: 2 });
    }

    #[test]
    fn non_reversible_cycle_flagged() {
        let p = mat(3, &[0.0, 0.9, 0.1, 0.1, 0.0, 0.9, 0.9, 0.1, 0.0]);
        let c = ChainModel::from_matrix(p).unwrap();
        assert!(!c.is_reversible());
        assert!(c.q().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn network_path() {
        let net = WeightedNetwork::from_labeled_edges(&[("a", "b", 1.0), ("b", "c", 1.0)]).unwrap();
        let c = ChainModel::from_network(&net).unwrap();
        for (got, want) in c.pi().iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(c.is_reversible());
        assert!(c.detailed_balance_defect() <= 1e-14);
    }

    #[test]
    fn network_triangle() {
        let net = WeightedNetwork::from_labeled_edges(&[("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)])
            .unwrap();
        let c = ChainModel::from_network(&net).unwrap();
        for x in 0..3 {
            assert!((c.pi()[x] - 1.0 / 3.0).abs() < 1e-15);
            for y in 0..3 {
                let want = if x == y { 0.0 } else { 0.5 };
                assert_eq!(c.p()[(x, y)], want);
            }
        }
    }

    #[test]
    fn network_single_edge_is_two_state() {
        let net = WeightedNetwork::from_labeled_edges(&[("a", "b", 1.0)]).unwrap();
        let c = ChainModel::from_network(&net).unwrap();
        assert_eq!(c.p()[(0, 1)], 1.0);
        assert_eq!(c.pi()[0], 0.5);
    }

    #[test]
    fn network_rejects_disconnected_and_bad_weights() {
        let net = WeightedNetwork::new(vec!["a".into(), "b".into(), "c".into()], vec![(0, 1, 1.0)]);
        assert_eq!(net.unwrap_err(), Error::Disconnected);
        let net = WeightedNetwork::new(vec!["a".into(), "b".into()], vec![(0, 1, 0.0)]);
        assert!(matches!(net.unwrap_err(), Error::BadParams(_)));
    }

    #[test]
    fn rescale_identity_and_two_state() {
        let ts = ChainModel::from_matrix(mat(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let same = ts.rescale_rows(&[1.0, 1.0]).unwrap();
        assert_eq!(same.pi(), ts.pi());
        assert!(!same.is_generator_form());

        let r = ts.rescale_rows(&[2.0, 1.0]).unwrap();
        assert!((r.pi()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.pi()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.is_reversible());
        assert!(r.is_generator_form());
    }

    #[test]
    fn rescale_rejects_bad_rates() {
        let ts = ChainModel::from_matrix(mat(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!(matches!(
            ts.rescale_rows(&[0.0, 1.0]).unwrap_err(),
            Error::NonPositiveRate { state: 0, .. }
        ));
    }

    #[test]
    fn lazy_two_state() {
        let ts = ChainModel::from_matrix(mat(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let l = ts.lazy(0.5).unwrap();
        assert!(l.p().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }
}
