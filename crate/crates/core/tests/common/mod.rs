//! Independent oracles and the shared chain corpus for the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use mixchar::chain::{ChainModel, WeightedNetwork};
use mixchar::family;
use mixchar::hitting::expected_hitting;
use mixchar::spectral::TimeMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TREE_SEED: u64 = 0xC0FFEE;

pub struct Named {
    pub id: String,
    pub chain: ChainModel,
    pub network: Option<WeightedNetwork>,
    pub tree: bool,
}

fn named(id: String, chain: ChainModel, tree: bool) -> Named {
    Named { id, chain, network: None, tree }
}

/// Cycles 3..=10, paths 2..=10, cliques 3..=8, hypercubes 2..=4, binary trees of depth 1..=3
/// and 20 random weighted trees on at most 10 vertices.
pub fn sandwich_corpus() -> Vec<Named> {
    let mut out = Vec::new();
    for n in 3..=10 {
        out.push(named(format!("cycle{n}"), family::cycle(n).unwrap(), false));
    }
    for n in 2..=10 {
        out.push(named(format!("path{n}"), family::path(n).unwrap(), true));
    }
    for n in 3..=8 {
        out.push(named(format!("clique{n}"), family::clique(n).unwrap(), false));
    }
    for d in 2..=4 {
        out.push(named(format!("hypercube{d}"), family::hypercube(d).unwrap(), false));
    }
    for depth in 1..=3 {
        out.push(named(format!("bintree{depth}"), family::binary_tree(depth).unwrap(), true));
    }
    for (i, (net, chain)) in family::random_tree_suite(20, 10, TREE_SEED).unwrap().into_iter().enumerate() {
        out.push(Named {
            id: format!("rtree{i}"),
            chain,
            network: Some(net),
            tree: true,
        });
    }
    out
}

/// Reversible chains on at most three states.
pub fn tiny_chains() -> Vec<(String, ChainModel)> {
    let mut out = vec![
        ("path2".to_string(), family::path(2).unwrap()),
        ("path3".to_string(), family::path(3).unwrap()),
        ("cycle3".to_string(), family::cycle(3).unwrap()),
        ("two_point_0.3".to_string(), family::two_point(0.3).unwrap()),
        ("two_point_0.1".to_string(), family::two_point(0.1).unwrap()),
        ("lazy_path3".to_string(), family::path(3).unwrap().lazy(0.5).unwrap()),
        ("birth_death3".to_string(), family::birth_death(&[0.3, 0.5], &[0.2, 0.6]).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..4 {
        let n = 2 + i % 2;
        let mut edges = Vec::new();
        for x in 0..n {
            for y in x..n {
                if x != y || rng.random_bool(0.5) {
                    edges.push((x, y, rng.random_range(0.2..3.0)));
                }
            }
        }
        let net = WeightedNetwork::new((0..n).map(|v| v.to_string()).collect(), edges).unwrap();
        out.push((format!("random_net{i}"), ChainModel::from_network(&net).unwrap()));
    }
    out
}

fn pi_vec(chain: &ChainModel) -> Vec<f64> {
    chain.pi().iter().copied().collect()
}

// ---------------------------------------------------------------------------
// Connected sets by brute force.

/// Strong connectivity of `P` restricted to the bitmask `mask`.
fn strongly_connected(chain: &ChainModel, mask: u32) -> bool {
    let n = chain.n();
    let members: Vec<usize> = (0..n).filter(|&x| mask >> x & 1 == 1).collect();
    let Some(&start) = members.first() else { return false };
    let reach = |forward: bool| {
        let mut seen = 1u32 << start;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &members {
                let w = if forward { chain.p()[(u, v)] } else { chain.p()[(v, u)] };
                if w > 0.0 && seen >> v & 1 == 0 {
                    seen |= 1 << v;
                    stack.push(v);
                }
            }
        }
        seen
    };
    reach(true) == mask && reach(false) == mask
}

/// Every nonempty set of mass at most `delta` whose restricted kernel is strongly connected.
pub fn brute_connected_sets(chain: &ChainModel, delta: f64) -> Vec<Vec<usize>> {
    let n = chain.n();
    assert!(n <= 20);
    let pi = pi_vec(chain);
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&x| mask >> x & 1 == 1).collect();
        let mass: f64 = set.iter().map(|&x| pi[x]).sum();
        if mass <= delta * (1.0 + 1e-12) && strongly_connected(chain, mask) {
            out.push(set);
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

// ---------------------------------------------------------------------------
// Constrained minima over the simplex.

/// Euclidean projection onto `{v >= 0, sum v = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - total) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// `min sum mu^2/pi` over `mu >= 0` on a block with fixed total, by projected gradient.
fn block_l2(pi: &[f64], total: f64) -> f64 {
    let l = 2.0 / pi.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut mu = vec![total / pi.len() as f64; pi.len()];
    for _ in 0..2_000 {
        let step: Vec<f64> = mu.iter().zip(pi).map(|(m, p)| m - 2.0 * m / p / l).collect();
        mu = project_simplex(&step, total);
    }
    mu.iter().zip(pi).map(|(m, p)| m * m / p).sum()
}

/// `min sum mu log(mu/pi)` over `mu >= 0` on a block with fixed total, by mirror descent.
fn block_kl(pi: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let mut mu = vec![total / pi.len() as f64; pi.len()];
    for _ in 0..300 {
        let mut next: Vec<f64> = mu.iter().zip(pi).map(|(m, p)| m * (-0.5 * ((m / p).ln() + 1.0)).exp()).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v *= total / s);
        mu = next;
    }
    mu.iter().zip(pi).map(|(m, p)| if *m > 0.0 { m * (m / p).ln() } else { 0.0 }).sum()
}

fn golden_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(lo).min(f(hi)).min(fc.min(fd))
}

/// Brute-force `(min ||mu/pi - 1||_2, min D(mu||pi))` over laws with `mu(A) >= pi(A) + delta pi(A^c)`.
pub fn brute_lagrange(pi: &[f64], set: &[usize], delta: f64) -> (f64, f64) {
    let inside: Vec<f64> = set.iter().map(|&x| pi[x]).collect();
    let outside: Vec<f64> = (0..pi.len()).filter(|x| !set.contains(x)).map(|x| pi[x]).collect();
    let x: f64 = inside.iter().sum();
    let floor = x + delta * (1.0 - x);
    let l2 = golden_min(floor, 1.0, |s| block_l2(&inside, s) + block_l2(&outside, 1.0 - s) - 1.0);
    let kl = golden_min(floor, 1.0, |s| block_kl(&inside, s) + block_kl(&outside, 1.0 - s));
    (l2.max(0.0).sqrt(), kl)
}

/// Random instance `(pi, A, delta)` on `n <= 6` states.
pub fn lagrange_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<usize>, f64) {
    let n = rng.random_range(2..=6);
    let mut pi: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    let k = rng.random_range(1..n);
    let set: Vec<usize> = (0..k).collect();
    let delta = rng.random_range(0.01..0.95);
    (pi, set, delta)
}

// ---------------------------------------------------------------------------
// Kac's formula on tree edges.

/// `max |Phi(T_y) E_y[T_z] - 1|` over ordered tree edges `(y, z)`, with
/// `Phi(T_y) = pi(y) P(y,z) / pi(T_y)` computed here from scratch.
pub fn kac_max_error(chain: &ChainModel) -> f64 {
    let n = chain.n();
    let pi = pi_vec(chain);
    let mut worst: f64 = 0.0;
    for y in 0..n {
        for z in 0..n {
            if y == z || chain.p()[(y, z)] <= 0.0 {
                continue;
            }
            // Component of y once the edge y-z is cut.
            let mut seen = vec![false; n];
            seen[y] = true;
            let mut stack = vec![y];
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if v != u && !seen[v] && chain.p()[(u, v)] > 0.0 && !(u == y && v == z) {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            let mass: f64 = (0..n).filter(|&v| seen[v]).map(|v| pi[v]).sum();
            let phi = pi[y] * chain.p()[(y, z)] / mass;
            let e = expected_hitting(chain, y, &[z], TimeMode::Continuous, 1).unwrap();
            worst = worst.max((phi * e - 1.0).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Log-Sobolev constant by grid search (n <= 3).

fn ls_ratio(p: &[Vec<f64>], pi: &[f64], f: &[f64]) -> Option<f64> {
    let n = f.len();
    let mut e = 0.0;
    for x in 0..n {
        for y in 0..n {
            let d = f[x] - f[y];
            e += 0.5 * pi[x] * p[x][y] * d * d;
        }
    }
    let g: Vec<f64> = f.iter().map(|v| v * v).collect();
    let m: f64 = g.iter().zip(pi).map(|(a, b)| a * b).sum();
    let ent: f64 = g
        .iter()
        .zip(pi)
        .map(|(gx, px)| {
            let h = gx / m - 1.0;
            let b = if h <= -1.0 { 1.0 } else { (1.0 + h) * h.ln_1p() - h };
            px * m * b
        })
        .sum();
    (ent > 1e-13).then(|| e / ent)
}

fn point(n: usize, a: f64, b: f64) -> Vec<f64> {
    match n {
        2 => vec![a.cos(), a.sin()],
        3 => vec![b.sin() * a.cos(), b.sin() * a.sin(), b.cos()],
        _ => unreachable!(),
    }
}

/// `inf E(f,f)/Ent(f^2)` over `f >= 0` on the unit sphere, by a dense angular grid with
/// three zoom passes around the best cell.
pub fn grid_c_ls(chain: &ChainModel) -> f64 {
    let n = chain.n();
    assert!(n == 2 || n == 3);
    let p: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| chain.p()[(x, y)]).collect()).collect();
    let pi = pi_vec(chain);
    let half = std::f64::consts::FRAC_PI_2;
    let (steps_a, steps_b) = if n == 2 { (200_000, 1) } else { (700, 700) };
    let mut box_ = (0.0, half, 0.0, half);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _pass in 0..4 {
        let (a0, a1, b0, b1) = box_;
        for i in 0..=steps_a {
            let a = a0 + (a1 - a0) * i as f64 / steps_a as f64;
            for j in 0..=steps_b {
                let b = if n == 2 { 0.0 } else { b0 + (b1 - b0) * j as f64 / steps_b as f64 };
                if let Some(r) = ls_ratio(&p, &pi, &point(n, a, b)) {
                    if r < best.0 {
                        best = (r, a, b);
                    }
                }
            }
        }
        let wa = 4.0 * (a1 - a0) / steps_a as f64;
        let wb = 4.0 * (b1 - b0) / steps_b as f64;
        box_ = ((best.1 - wa).max(0.0), (best.1 + wa).min(half), (best.2 - wb).max(0.0), (best.2 + wb).min(half));
    }
    best.0
}
