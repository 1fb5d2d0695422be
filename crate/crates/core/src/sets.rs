//! Enumeration of connected state sets of bounded stationary mass.
//!
//! A set `A` is connected when every `b in A` can be reached from every `a in A`
//! without leaving `A`, i.e. the digraph of `P` restricted to `A` is strongly
//! connected. Sets are grown from their smallest vertex over the undirected
//! support graph with exclusive-neighbourhood extension, so each connected
//! subgraph is produced exactly once.

use serde::Serialize;

use crate::chain::ChainModel;
use crate::error::{Error, Result};

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct ConnectedSetFamily {
    pub delta: f64,
    /// Sorted sets, ordered by size then lexicographically.
    pub sets: Vec<Vec<usize>>,
    /// False when the cap cut the enumeration short.
    pub complete: bool,
    pub cap: usize,
}

impl ConnectedSetFamily {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Strong connectivity of the restriction of `P` to `set`.
pub fn is_connected(chain: &ChainModel, set: &[usize]) -> bool {
    if set.is_empty() {
        return false;
    }
    let p = chain.p();
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; set.len()];
        seen[0] = true;
        let mut stack = vec![0];
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..set.len() {
                if seen[j] || i == j {
                    continue;
                }
                let w = if forward { p[(set[i], set[j])] } else { p[(set[j], set[i])] };
                if w > 0.0 {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    reach(true) == set.len() && reach(false) == set.len()
}

struct Enumerator<'a> {
    adj: &'a [Vec<usize>],
    pi: Vec<f64>,
    delta: f64,
    cap: usize,
    out: Vec<Vec<usize>>,
    truncated: bool,
    in_sub: Vec<bool>,
    near_sub: Vec<u32>,
}

impl Enumerator<'_> {
    fn grow(&mut self, sub: &mut Vec<usize>, mass: f64, mut ext: Vec<usize>, root: usize) {
        if self.out.len() >= self.cap {
            self.truncated = true;
            return;
        }
        self.out.push(sub.clone());
        while let Some(w) = ext.pop() {
            if self.truncated {
                return;
            }
            let m = mass + self.pi[w];
            if m > self.delta * (1.0 + 1e-12) {
                continue;
            }
            // Exclusive neighbours of w: above root, outside sub and not adjacent to sub.
            let mut next_ext = ext.clone();
            for &u in &self.adj[w] {
                if u > root && !self.in_sub[u] && self.near_sub[u] == 0 && !next_ext.contains(&u) {
                    next_ext.push(u);
                }
            }
            sub.push(w);
            self.in_sub[w] = true;
            for &u in &self.adj[w] {
                self.near_sub[u] += 1;
            }
            self.grow(sub, m, next_ext, root);
            for &u in &self.adj[w] {
                self.near_sub[u] -= 1;
            }
            self.in_sub[w] = false;
            sub.pop();
        }
    }
}

fn enumerate_inner(chain: &ChainModel, delta: f64, cap: usize) -> Result<ConnectedSetFamily> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    if cap == 0 {
        return Err(Error::BadParams("cap must be at least 1".into()));
    }
    let n = chain.n();
    let adj = chain.support_graph();
    let pi: Vec<f64> = chain.pi().iter().copied().collect();
    let mut e = Enumerator {
        adj: &adj,
        pi,
        delta,
        cap,
        out: Vec::new(),
        truncated: false,
        in_sub: vec![false; n],
        near_sub: vec![0; n],
    };
    for (root, nbrs) in adj.iter().enumerate() {
        if e.pi[root] > delta * (1.0 + 1e-12) {
            continue;
        }
        let mut sub = vec![root];
        e.in_sub[root] = true;
        for &u in nbrs {
            e.near_sub[u] += 1;
        }
        let ext: Vec<usize> = nbrs.iter().copied().filter(|&u| u > root).collect();
        let mass = e.pi[root];
        e.grow(&mut sub, mass, ext, root);
        for &u in nbrs {
            e.near_sub[u] -= 1;
        }
        e.in_sub[root] = false;
        if e.truncated {
            break;
        }
    }
    let truncated = e.truncated;
    let mut sets: Vec<Vec<usize>> = e
        .out
        .into_iter()
        .map(|mut s| {
            s.sort_unstable();
            s
        })
        .collect();
    // Weak connectivity is what the growth guarantees; keep only strongly connected sets.
    if !chain.is_reversible() {
        sets.retain(|s| is_connected(chain, s));
    }
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(ConnectedSetFamily {
        delta,
        sets,
        complete: !truncated,
        cap,
    })
}

/// All connected sets with `pi(A) <= delta`, stopping (with `complete = false`) at `cap` sets.
pub fn enumerate(chain: &ChainModel, delta: f64, cap: usize) -> Result<ConnectedSetFamily> {
    enumerate_inner(chain, delta, cap)
}

/// As [`enumerate`], but hitting the cap is an error.
pub fn enumerate_strict(chain: &ChainModel, delta: f64, cap: usize) -> Result<ConnectedSetFamily> {
    let fam = enumerate_inner(chain, delta, cap)?;
    if fam.complete {
        Ok(fam)
    } else {
        Err(Error::CapExceeded(cap))
    }
}

/// `Con_{1/2}` with the default cap.
pub fn con_half(chain: &ChainModel) -> Result<ConnectedSetFamily> {
    enumerate(chain, 0.5, DEFAULT_CAP)
}
