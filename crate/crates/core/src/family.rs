//! Named chain families used as test corpora and sweep targets.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::chain::{ChainModel, ChainSource, WeightedNetwork};
use crate::error::{Error, Result};

/// Default seed for every randomized corpus and optimizer restart.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

fn unit_network(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<WeightedNetwork> {
    let vertices = (0..n).map(|i| i.to_string()).collect();
    WeightedNetwork::new(vertices, edges.into_iter().map(|(u, v)| (u, v, 1.0)).collect())
}

fn tagged(chain: ChainModel, name: &str) -> ChainModel {
    chain.with_source(ChainSource::Family(name.to_string()))
}

/// Simple random walk on the n-cycle.
pub fn cycle(n: usize) -> Result<ChainModel> {
    if n < 3 {
        return Err(Error::BadParams(format!("cycle needs n >= 3, got {n}")));
    }
    let net = unit_network(n, (0..n).map(|i| (i, (i + 1) % n)))?;
    Ok(tagged(ChainModel::from_network(&net)?, "cycle"))
}

/// Simple random walk on the path with n vertices (reflecting ends move inward surely).
pub fn path(n: usize) -> Result<ChainModel> {
    if n < 2 {
        return Err(Error::BadParams(format!("path needs n >= 2, got {n}")));
    }
    let net = unit_network(n, (0..n - 1).map(|i| (i, i + 1)))?;
    Ok(tagged(ChainModel::from_network(&net)?, "path"))
}

/// Simple random walk on the complete graph K_n (no holding).
pub fn clique(n: usize) -> Result<ChainModel> {
    if n < 2 {
        return Err(Error::BadParams(format!("clique needs n >= 2, got {n}")));
    }
    let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
    let net = unit_network(n, edges)?;
    Ok(tagged(ChainModel::from_network(&net)?, "clique"))
}

/// Simple random walk on {0,1}^d; state labels are the bit patterns.
pub fn hypercube(d: usize) -> Result<ChainModel> {
    if !(1..=16).contains(&d) {
        return Err(Error::BadParams(format!("hypercube dimension must be in 1..=16, got {d}")));
    }
    let n = 1usize << d;
    let edges = (0..n).flat_map(|v| (0..d).map(move |b| (v, v ^ (1 << b)))).filter(|(u, v)| u < v);
    let net = unit_network(n, edges)?;
    let labels = (0..n).map(|v| format!("{v:0d$b}")).collect();
    Ok(tagged(ChainModel::from_network(&net)?.with_labels(labels), "hypercube"))
}

/// Simple random walk on the complete binary tree of the given depth (root at level 0).
pub fn binary_tree(depth: usize) -> Result<ChainModel> {
    if !(1..=16).contains(&depth) {
        return Err(Error::BadParams(format!("binary tree depth must be in 1..=16, got {depth}")));
    }
    let n = (1usize << (depth + 1)) - 1;
    let net = unit_network(n, (1..n).map(|v| ((v - 1) / 2, v)))?;
    Ok(tagged(ChainModel::from_network(&net)?, "binary_tree"))
}

/// Star with `leaves` leaves and unit weights; the center is state 0.
pub fn star(leaves: usize) -> Result<ChainModel> {
    if leaves < 1 {
        return Err(Error::BadParams("star needs at least one leaf".into()));
    }
    let net = unit_network(leaves + 1, (1..=leaves).map(|v| (0, v)))?;
    Ok(tagged(ChainModel::from_network(&net)?, "star"))
}

/// Birth-death chain: `P(i,i+1) = up[i]`, `P(i+1,i) = down[i]`, holding takes the rest.
pub fn birth_death(up: &[f64], down: &[f64]) -> Result<ChainModel> {
    if up.len() != down.len() || up.is_empty() {
        return Err(Error::BadParams("birth_death needs equal-length nonempty up/down arrays".into()));
    }
    let n = up.len() + 1;
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        if !(up[i] > 0.0 && down[i] > 0.0) {
            return Err(Error::BadParams(format!("birth_death rates at edge {i} must be positive")));
        }
        p[(i, i + 1)] = up[i];
        p[(i + 1, i)] = down[i];
    }
    for i in 0..n {
        let out: f64 = p.row(i).sum();
        if out > 1.0 + 1e-12 {
            return Err(Error::BadParams(format!("birth_death row {i} has total move probability {out}")));
        }
        p[(i, i)] = (1.0 - out).max(0.0);
    }
    let chain = ChainModel::from_matrix(p)?;
    Ok(tagged(chain, "birth_death"))
}

/// Two-state chain whose rows both equal `(p, 1 - p)`.
pub fn two_point(p: f64) -> Result<ChainModel> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::BadParams(format!("two_point needs p in (0,1), got {p}")));
    }
    let m = DMatrix::from_row_slice(2, 2, &[p, 1.0 - p, p, 1.0 - p]);
    Ok(tagged(ChainModel::from_matrix(m)?, "two_point"))
}

/// Random tree on `n` vertices: vertex `i` attaches to a uniform earlier vertex,
/// with conductance log-uniform on `[1/4, 4]`.
pub fn random_weighted_tree_network<R: Rng>(n: usize, rng: &mut R) -> Result<WeightedNetwork> {
    if n < 2 {
        return Err(Error::BadParams(format!("random tree needs n >= 2, got {n}")));
    }
    let span = 4.0_f64.ln();
    let edges = (1..n)
        .map(|v| {
            let parent = rng.random_range(0..v);
            let w = (rng.random_range(-span..=span)).exp();
            (parent, v, w)
        })
        .collect();
    WeightedNetwork::new((0..n).map(|i| i.to_string()).collect(), edges)
}

pub fn random_weighted_tree(n: usize, seed: u64) -> Result<ChainModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_weighted_tree_network(n, &mut rng)?;
    Ok(tagged(ChainModel::from_network(&net)?, "random_tree"))
}

/// `count` random weighted trees with sizes uniform in `3..=max_n`, all drawn from one stream.
pub fn random_tree_suite(count: usize, max_n: usize, seed: u64) -> Result<Vec<(WeightedNetwork, ChainModel)>> {
    if max_n < 3 {
        return Err(Error::BadParams("random tree suite needs max_n >= 3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(3..=max_n);
            let net = random_weighted_tree_network(n, &mut rng)?;
            let chain = tagged(ChainModel::from_network(&net)?, "random_tree");
            Ok((net, chain))
        })
        .collect()
}

fn get_usize(params: &Map<String, Value>, key: &str) -> Result<usize> {
    params
        .get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::BadParams(format!("missing or non-integer parameter '{key}'")))
}

fn get_f64(params: &Map<String, Value>, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::BadParams(format!("missing or non-numeric parameter '{key}'")))
}

fn get_f64_array(params: &Map<String, Value>, key: &str) -> Result<Vec<f64>> {
    let arr = params
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::BadParams(format!("missing array parameter '{key}'")))?;
    arr.iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::BadParams(format!("non-numeric entry in '{key}'"))))
        .collect()
}

/// Builds a family member by name. `lazy` is handled by the spec loader since it wraps a base chain.
pub fn family(name: &str, params: &Map<String, Value>) -> Result<ChainModel> {
    match name {
        "cycle" => cycle(get_usize(params, "n")?),
        "path" => path(get_usize(params, "n")?),
        "clique" => clique(get_usize(params, "n")?),
        "hypercube" => hypercube(get_usize(params, "d")?),
        "binary_tree" => binary_tree(get_usize(params, "depth")?),
        "star" => star(get_usize(params, "leaves")?),
        "two_point" => two_point(get_f64(params, "p")?),
        "birth_death" => birth_death(&get_f64_array(params, "up")?, &get_f64_array(params, "down")?),
        "random_tree" => {
            let seed = params.get("seed").and_then(Value::as_u64).unwrap_or(DEFAULT_SEED);
            random_weighted_tree(get_usize(params, "n")?, seed)
        }
        other => Err(Error::BadParams(format!("unknown family '{other}'"))),
    }
}

/// Family names accepted by [`family`] with a single integer size parameter, and that parameter's key.
pub fn sized_family_key(name: &str) -> Option<&'static str> {
    match name {
        "cycle" | "path" | "clique" | "random_tree" => Some("n"),
        "hypercube" => Some("d"),
        "binary_tree" => Some("depth"),
        "star" => Some("leaves"),
        _ => None,
    }
}
