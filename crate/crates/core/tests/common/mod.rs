// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use mlx_core::{build_network, EdgeRecord, MultilayerNetwork, ScalingPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent edges with probability `p` in every layer.
pub fn random_network(rng: &mut impl Rng, n: usize, m: usize, p: f64) -> MultilayerNetwork {
    let mut edges = Vec::new();
    for l in 0..m {
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    edges.push(EdgeRecord::new(l, u, v));
                }
            }
        }
    }
    build_network(n, m, &edges).unwrap()
}

/// Set modularity summed pair by pair.
pub fn pairwise_modularity(net: &MultilayerNetwork, b: &[usize], layer: usize) -> f64 {
    let s = b.len();
    if s < 2 {
        return 0.0;
    }
    let total = net.degree_total(layer) as f64;
    let mut sum = 0.0;
    for (i, &u) in b.iter().enumerate() {
        for &v in &b[i + 1..] {
            let x = if net.has_edge(layer, u, v) { 1.0 } else { 0.0 };
            let expected = if total > 0.0 {
                net.degree(layer, u) as f64 * net.degree(layer, v) as f64 / total
            } else {
                0.0
            };
            sum += x - expected;
        }
    }
    let pairs = (s * (s - 1) / 2) as f64;
    sum / (net.n() as f64 * pairs.sqrt())
}

pub fn pairwise_score(
    net: &MultilayerNetwork,
    b: &[usize],
    layers: &[usize],
    scaling: ScalingPolicy,
) -> f64 {
    let sum: f64 = layers
        .iter()
        .map(|&l| pairwise_modularity(net, b, l).max(0.0))
        .sum();
    sum * sum / scaling.gamma(layers.len())
}

pub fn members(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Global maximum of `H` over all `(B, L)` with `|B| >= 2`.
pub fn exhaustive_maximum(net: &MultilayerNetwork, scaling: ScalingPolicy) -> f64 {
    let (n, m) = (net.n(), net.m());
    let mut best = f64::MIN;
    for bmask in 0u64..(1 << n) {
        if bmask.count_ones() < 2 {
            continue;
        }
        let b = members(bmask, n);
        let q: Vec<f64> = (0..m).map(|l| pairwise_modularity(net, &b, l)).collect();
        for lmask in 1u64..(1 << m) {
            let layers = members(lmask, m);
            let sum: f64 = layers.iter().map(|&l| q[l].max(0.0)).sum();
            best = best.max(sum * sum / scaling.gamma(layers.len()));
        }
    }
    best
}

/// Random subset of `0..n` with each element kept with probability `p`.
pub fn random_subset(rng: &mut impl Rng, n: usize, p: f64) -> Vec<usize> {
    (0..n).filter(|_| rng.gen_bool(p)).collect()
}
