//! Planted scenarios with a known low-rank, autoregressive ground truth.
//!
//! Routers form a connected Erdős–Rényi graph. Every router has an ingress
//! and an egress link, every undirected edge contributes one link per
//! direction, and OD pair `(i, j)` with `i != j` follows the BFS shortest
//! path (ties broken towards lower router ids) from `i`'s ingress to `j`'s
//! egress. OD pairs are ordered by origin, then destination.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TomographyError};
use crate::lags::LagSet;
use crate::network::{RoutingMatrix, TrafficMatrix};

const EDGE_PROBABILITY: f64 = 0.5;
const MAX_TOPOLOGY_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub routing: RoutingMatrix,
    pub traffic: TrafficMatrix,
    pub w_true: DMatrix<f64>,
    pub h_true: DMatrix<f64>,
    pub omega_true: DMatrix<f64>,
    pub planted_rank: usize,
    pub planted_lags: LagSet,
    pub noise_level: f64,
    pub seed: u64,
}

impl SyntheticScenario {
    /// The noiseless product `W_true H_true`.
    pub fn clean_traffic(&self) -> DMatrix<f64> {
        &self.w_true * &self.h_true
    }
}

/// Builds a seeded planted scenario with `n_routers * (n_routers - 1)` OD
/// pairs. `noise_level` is the relative standard deviation of the
/// multiplicative Gaussian noise.
pub fn generate_synthetic(
    n_routers: usize,
    planted_rank: usize,
    t: usize,
    planted_lags: &LagSet,
    noise_level: f64,
    seed: u64,
) -> Result<SyntheticScenario> {
    if n_routers < 2 {
        return Err(TomographyError::Config(format!(
            "need at least 2 routers, got {n_routers}"
        )));
    }
    if planted_rank == 0 {
        return Err(TomographyError::Config("planted rank must be at least 1".into()));
    }
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(TomographyError::Config(format!(
            "noise level must be finite and nonnegative, got {noise_level}"
        )));
    }
    if !planted_lags.is_empty() {
        planted_lags.check_horizon(t)?;
    } else if t == 0 {
        return Err(TomographyError::Config("horizon must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adjacency = connected_topology(n_routers, &mut rng);
    let routing = RoutingMatrix::new(shortest_path_routing(&adjacency))?;
    let n = routing.od_pairs();

    let (h_true, omega_true) = planted_latent(planted_rank, t, planted_lags, &mut rng);
    let w_true = planted_features(n, planted_rank, &mut rng);

    let clean = &w_true * &h_true;
    let x = if noise_level == 0.0 {
        clean
    } else {
        clean.map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            (v * (1.0 + noise_level * z)).max(0.0)
        })
    };

    Ok(SyntheticScenario {
        routing,
        traffic: TrafficMatrix::new(x)?,
        w_true,
        h_true,
        omega_true,
        planted_rank,
        planted_lags: planted_lags.clone(),
        noise_level,
        seed,
    })
}

/// Binary observation mask (1 = observed) hiding each entry independently
/// with probability `missing_fraction`.
pub fn random_mask(rows: usize, cols: usize, missing_fraction: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(TomographyError::Config(format!(
            "missing fraction must lie in [0, 1), got {missing_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(DMatrix::from_fn(rows, cols, |_, _| {
        if rng.random_bool(missing_fraction) { 0.0 } else { 1.0 }
    }))
}

fn connected_topology(r: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    for _ in 0..MAX_TOPOLOGY_DRAWS {
        let mut adj = vec![Vec::new(); r];
        for i in 0..r {
            for j in i + 1..r {
                if rng.random_bool(EDGE_PROBABILITY) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        if bfs_parents(&adj, 0).iter().all(Option::is_some) {
            return adj;
        }
    }
    // Practically unreachable for the edge probability used.
    (0..r)
        .map(|i| [i.checked_sub(1), (i + 1 < r).then_some(i + 1)].into_iter().flatten().collect())
        .collect()
}

/// BFS tree from `src`, visiting neighbours in ascending id order.
fn bfs_parents(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None; adj.len()];
    parent[src] = Some(src);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let mut nbrs = adj[u].clone();
        nbrs.sort_unstable();
        for v in nbrs {
            if parent[v].is_none() {
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    parent
}

fn shortest_path_routing(adj: &[Vec<usize>]) -> DMatrix<f64> {
    let r = adj.len();
    // link ids: ingress 0..r, egress r..2r, then directed edges in (u, v) order
    let mut edge_id = std::collections::BTreeMap::new();
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs {
            edge_id.insert((u, v), 0);
        }
    }
    for (i, id) in edge_id.values_mut().enumerate() {
        *id = 2 * r + i;
    }
    let m = 2 * r + edge_id.len();
    let n = r * (r - 1);
    let mut a = DMatrix::zeros(m, n);
    let mut col = 0;
    for src in 0..r {
        let parent = bfs_parents(adj, src);
        for dst in (0..r).filter(|&d| d != src) {
            a[(src, col)] = 1.0;
            a[(r + dst, col)] = 1.0;
            let mut v = dst;
            while v != src {
                let u = parent[v].expect("topology is connected");
                a[(edge_id[&(u, v)], col)] = 1.0;
                v = u;
            }
            col += 1;
        }
    }
    a
}

fn planted_latent(
    k: usize,
    t: usize,
    lag_set: &LagSet,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let lags = lag_set.lags();
    let mut omega = DMatrix::zeros(k, lags.len());
    let mut h = DMatrix::zeros(k, t);
    for p in 0..k {
        if !lags.is_empty() {
            let raw: Vec<f64> = (0..lags.len()).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mass = rng.random_range(0.6..0.9);
            for (q, v) in raw.iter().enumerate() {
                omega[(p, q)] = mass * v / total;
            }
        }
        let level = rng.random_range(0.5..2.0);
        for s in 0..t {
            let z: f64 = rng.sample(StandardNormal);
            let innovation = level * (1.0 + 0.5 * z);
            let ar: f64 = if s < lag_set.max_lag() {
                // warm-up near the stationary mean
                let mass: f64 = omega.row(p).sum();
                mass / (1.0 - mass) * level
            } else {
                lags.iter().enumerate().map(|(q, &l)| omega[(p, q)] * h[(p, s - l)]).sum()
            };
            h[(p, s)] = (ar + innovation).max(0.0);
        }
    }
    (h, omega)
}

/// Each OD pair loads mainly on one component, assigned round-robin over a
/// shuffled order, with an occasional small secondary loading.
fn planted_features(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut w = DMatrix::zeros(n, k);
    for (slot, &j) in order.iter().enumerate() {
        let p = slot % k;
        w[(j, p)] = rng.random_range(0.5..1.5);
        if k > 1 && rng.random_bool(0.1) {
            let other = (p + 1 + rng.random_range(0..k - 1)) % k;
            w[(j, other)] = rng.random_range(0.0..0.1);
        }
    }
    w
}
