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

//! Reproducible synthetic multilayer networks with planted ground truth.
//!
//! Each layer row `(layer, u)` draws its pairs `(u, v > u)` from a ChaCha8
//! stream keyed on `(seed, layer, u)`, so the sampled edge set does not
//! depend on how the work is scheduled across threads.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MlxError, Result};
use crate::metrics::VertexFamily;
use crate::network::{build_network, EdgeRecord, MultilayerNetwork};
use crate::scoring::MsbmParams;

/// Within-community connection probability of the planted-structure generators.
pub const INNER_PROB: f64 = 0.15;
/// Background connection probability.
pub const OUTER_PROB: f64 = 0.05;
/// Edge probability of the noise layers in the persistence experiment.
pub const NOISE_LAYER_PROB: f64 = 0.10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedCommunity {
    pub vertices: Vec<usize>,
    pub layers: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub communities: Vec<PlantedCommunity>,
    /// Block id per vertex for block models; empty otherwise.
    #[serde(default)]
    pub labels: Vec<usize>,
}

impl GroundTruth {
    pub fn vertex_family(&self) -> Result<VertexFamily> {
        VertexFamily::new(self.communities.iter().map(|c| c.vertices.clone()).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        GroundTruth::from_json(&fs::read_to_string(path)?)
    }
}

fn row_rng(seed: RngSeed, layer: usize, u: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.0.to_le_bytes());
    key[8..16].copy_from_slice(&(layer as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(u as u64).to_le_bytes());
    key[24..].copy_from_slice(b"mlx-edge");
    ChaCha8Rng::from_seed(key)
}

/// Samples one layer: each pair `u < v` independently with `prob(u, v)`.
fn sample_layer<F>(n: usize, layer: usize, seed: RngSeed, prob: F) -> Vec<EdgeRecord>
where
    F: Fn(usize, usize) -> f64,
{
    let mut edges = Vec::new();
    for u in 0..n {
        let mut rng = row_rng(seed, layer, u);
        for v in u + 1..n {
            if rng.gen::<f64>() < prob(u, v) {
                edges.push(EdgeRecord::new(layer, u, v));
            }
        }
    }
    edges
}

fn sample_network<F>(n: usize, m: usize, seed: RngSeed, prob: F) -> Result<MultilayerNetwork>
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    let per_layer: Vec<Vec<EdgeRecord>> = (0..m)
        .into_par_iter()
        .map(|layer| sample_layer(n, layer, seed, |u, v| prob(layer, u, v)))
        .collect();
    build_network(n, m, &per_layer.concat())
}

/// Block sizes: `⌈π₁n⌉` for block 1, the remainder split over the other
/// blocks proportionally to their weights by largest remainder.
pub fn block_sizes(n: usize, pi: &[f64]) -> Vec<usize> {
    let first = ((pi[0] * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let first = first.min(n);
    let rest = n - first;
    let tail: f64 = pi[1..].iter().sum();
    let quotas: Vec<f64> = pi[1..].iter().map(|p| rest as f64 * p / tail).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let mut short = rest - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if short == 0 {
            break;
        }
        sizes[i] += 1;
        short -= 1;
    }
    let mut out = vec![first];
    out.extend(sizes);
    out
}

fn labels_from_sizes(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(block, &s)| std::iter::repeat(block).take(s))
        .collect()
}

fn blocks_from_labels(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut blocks = vec![Vec::new(); k];
    for (u, &b) in labels.iter().enumerate() {
        blocks[b].push(u);
    }
    blocks
}

/// Block proportions used by the block-model experiments: `(0.4, 0.6)` for
/// two blocks, `(0.2, 0.1, 0.2, 0.1, 0.4)` for five, uniform otherwise.
pub fn experiment_proportions(k: usize) -> Vec<f64> {
    match k {
        2 => vec![0.4, 0.6],
        5 => vec![0.2, 0.1, 0.2, 0.1, 0.4],
        _ => vec![1.0 / k as f64; k],
    }
}

/// `k`-block matrix with `P(i,i) = inner`, `P(i,j) = outer`.
pub fn planted_matrix(k: usize, inner: f64, outer: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { inner } else { outer }).collect())
        .collect()
}

/// Homogeneous parameters with `P(i,i) = r + 0.05` and `P(i,j) = 0.05`.
pub fn msbm_params(k: usize, r: f64, m: usize) -> Result<MsbmParams> {
    if k < 2 {
        return Err(MlxError::InvalidParameter(format!("need k >= 2 blocks, got {k}")));
    }
    MsbmParams::homogeneous(
        experiment_proportions(k),
        planted_matrix(k, r + OUTER_PROB, OUTER_PROB),
        m,
    )
}

fn check_size(n: usize, m: usize) -> Result<()> {
    if n < 2 || m < 1 {
        return Err(MlxError::InvalidParameter(format!(
            "need n >= 2 and m >= 1 (got n = {n}, m = {m})"
        )));
    }
    Ok(())
}

/// Multilayer stochastic block model with block labels shared by all layers.
pub fn generate_msbm(
    n: usize,
    m: usize,
    params: &MsbmParams,
    seed: RngSeed,
) -> Result<(MultilayerNetwork, GroundTruth)> {
    check_size(n, m)?;
    if params.layers() != m {
        return Err(MlxError::InvalidParameter(format!(
            "parameters describe {} layers, asked for {m}",
            params.layers()
        )));
    }
    let k = params.blocks();
    let labels = labels_from_sizes(&block_sizes(n, params.pi()));
    let net = sample_network(n, m, seed, |layer, u, v| {
        params.prob(layer, labels[u], labels[v])
    })?;
    let all_layers: Vec<usize> = (0..m).collect();
    let communities = blocks_from_labels(&labels, k)
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|vertices| PlantedCommunity {
            vertices,
            layers: all_layers.clone(),
        })
        .collect();
    Ok((net, GroundTruth { communities, labels }))
}

/// First `round(tau * m)` layers are block-model layers (0.15 / 0.05), the
/// rest are Erdős–Rényi with `p = 0.10`. Ground truth carries only the
/// structured layers.
pub fn generate_persistence(
    n: usize,
    m: usize,
    tau: f64,
    k: usize,
    seed: RngSeed,
) -> Result<(MultilayerNetwork, GroundTruth)> {
    check_size(n, m)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(MlxError::InvalidParameter(format!("tau = {tau} outside (0, 1]")));
    }
    if k < 2 {
        return Err(MlxError::InvalidParameter(format!("need k >= 2 blocks, got {k}")));
    }
    let structured = (tau * m as f64).round() as usize;
    if structured < 1 {
        return Err(MlxError::InvalidParameter(format!(
            "tau * m = {} rounds to zero structured layers",
            tau * m as f64
        )));
    }
    let labels = labels_from_sizes(&block_sizes(n, &experiment_proportions(k)));
    let net = sample_network(n, m, seed, |layer, u, v| {
        if layer >= structured {
            NOISE_LAYER_PROB
        } else if labels[u] == labels[v] {
            INNER_PROB
        } else {
            OUTER_PROB
        }
    })?;
    let layers: Vec<usize> = (0..structured).collect();
    let communities = blocks_from_labels(&labels, k)
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|vertices| PlantedCommunity {
            vertices,
            layers: layers.clone(),
        })
        .collect();
    Ok((net, GroundTruth { communities, labels }))
}

/// One planted set of `round(fraction * n)` vertices, dense (0.15) in every
/// layer, inside a 0.05 Erdős–Rényi background.
pub fn generate_embedded(
    n: usize,
    m: usize,
    fraction: f64,
    seed: RngSeed,
) -> Result<(MultilayerNetwork, GroundTruth)> {
    check_size(n, m)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(MlxError::InvalidParameter(format!(
            "embedded fraction {fraction} outside (0, 1)"
        )));
    }
    let size = (fraction * n as f64).round() as usize;
    if size < 2 {
        return Err(MlxError::InvalidParameter(format!(
            "embedded community of {size} vertices; need at least 2"
        )));
    }
    let net = sample_network(n, m, seed, |_, u, v| {
        if u < size && v < size {
            INNER_PROB
        } else {
            OUTER_PROB
        }
    })?;
    Ok((
        net,
        GroundTruth {
            communities: vec![PlantedCommunity {
                vertices: (0..size).collect(),
                layers: (0..m).collect(),
            }],
            labels: Vec::new(),
        },
    ))
}

/// Planted-rectangle layouts of the extraction test bed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestbedCase {
    Disjoint,
    Overlapping,
    Persistent,
    NonPersistent,
    HierarchicalA,
    HierarchicalB,
}

/// Default test-bed size.
pub const TESTBED_N: usize = 1000;
pub const TESTBED_M: usize = 90;

/// `(first vertex, end vertex, first layer, end layer)` at the default
/// 1000 x 90 size, half-open.
type Rect = (usize, usize, usize, usize);

impl TestbedCase {
    pub const ALL: [TestbedCase; 6] = [
        TestbedCase::Disjoint,
        TestbedCase::Overlapping,
        TestbedCase::Persistent,
        TestbedCase::NonPersistent,
        TestbedCase::HierarchicalA,
        TestbedCase::HierarchicalB,
    ];

    pub fn numeral(self) -> &'static str {
        match self {
            TestbedCase::Disjoint => "I",
            TestbedCase::Overlapping => "II",
            TestbedCase::Persistent => "III",
            TestbedCase::NonPersistent => "IV",
            TestbedCase::HierarchicalA => "V",
            TestbedCase::HierarchicalB => "VI",
        }
    }

    /// Layout version 1. Communities are listed in their numbered order.
    pub fn layout(self) -> &'static [Rect] {
        match self {
            TestbedCase::Disjoint => &[(0, 200, 0, 30), (200, 400, 30, 60), (400, 600, 60, 90)],
            TestbedCase::Overlapping => &[(0, 300, 0, 50), (200, 500, 40, 90), (600, 800, 20, 70)],
            TestbedCase::Persistent => &[(0, 200, 0, 90), (300, 500, 0, 90), (600, 800, 0, 90)],
            TestbedCase::NonPersistent => {
                &[(0, 200, 0, 10), (200, 400, 20, 40), (500, 700, 50, 90)]
            }
            // a large community whose vertex set splits into two in the other layers
            TestbedCase::HierarchicalA => {
                &[(0, 600, 0, 45), (0, 300, 45, 90), (300, 600, 45, 90)]
            }
            // community 2 sits inside community 1's vertices and extends its layers
            TestbedCase::HierarchicalB => {
                &[(0, 300, 0, 30), (0, 150, 0, 60), (600, 800, 60, 90)]
            }
        }
    }

    /// Planted communities scaled to an `n x m` network.
    pub fn communities(self, n: usize, m: usize) -> Vec<PlantedCommunity> {
        let sv = |x: usize| (x * n + TESTBED_N / 2) / TESTBED_N;
        let sl = |x: usize| (x * m + TESTBED_M / 2) / TESTBED_M;
        self.layout()
            .iter()
            .map(|&(v0, v1, l0, l1)| PlantedCommunity {
                vertices: (sv(v0)..sv(v1)).collect(),
                layers: (sl(l0)..sl(l1)).collect(),
            })
            .collect()
    }
}

impl FromStr for TestbedCase {
    type Err = MlxError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let case = match key.as_str() {
            "i" | "1" | "disjoint" => TestbedCase::Disjoint,
            "ii" | "2" | "overlapping" => TestbedCase::Overlapping,
            "iii" | "3" | "persistent" => TestbedCase::Persistent,
            "iv" | "4" | "nonpersistent" | "non_persistent" => TestbedCase::NonPersistent,
            "v" | "5" | "hierarchical_a" => TestbedCase::HierarchicalA,
            "vi" | "6" | "hierarchical_b" => TestbedCase::HierarchicalB,
            _ => return Err(MlxError::InvalidParameter(format!("unknown test-bed case `{s}`"))),
        };
        Ok(case)
    }
}

/// Test-bed network: pairs sharing a planted community in a layer connect with
/// probability 0.15, all other pairs with 0.05.
pub fn generate_testbed(
    case: TestbedCase,
    n: usize,
    m: usize,
    seed: RngSeed,
) -> Result<(MultilayerNetwork, GroundTruth)> {
    check_size(n, m)?;
    let communities = case.communities(n, m);
    if communities
        .iter()
        .any(|c| c.vertices.len() < 2 || c.layers.is_empty())
    {
        return Err(MlxError::InvalidParameter(format!(
            "test bed {} is degenerate at n = {n}, m = {m}",
            case.numeral()
        )));
    }
    // masks[layer][u]: bit c set when u is in community c and c is active in layer
    let mut masks = vec![vec![0u64; n]; m];
    for (c, pc) in communities.iter().enumerate() {
        for &l in &pc.layers {
            for &u in &pc.vertices {
                masks[l][u] |= 1 << c;
            }
        }
    }
    let net = sample_network(n, m, seed, |layer, u, v| {
        if masks[layer][u] & masks[layer][v] != 0 {
            INNER_PROB
        } else {
            OUTER_PROB
        }
    })?;
    Ok((
        net,
        GroundTruth {
            communities,
            labels: Vec::new(),
        },
    ))
}
