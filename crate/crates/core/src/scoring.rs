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

//! Set modularity, the multilayer set score and its incremental form.
//!
//! For a vertex set `B` and layer `l` the set modularity is
//!
//! ```text
//! Q_l(B) = (1 / (n * sqrt(C(|B|, 2)))) * sum_{u<v in B} (x_l(u,v) - d_l(u) d_l(v) / sum_w d_l(w))
//! ```
//!
//! and the multilayer score is `H(B, L) = (sum_{l in L} max(Q_l(B), 0))^2 / gamma(|L|)`.
//!
//! All tallies are kept as integers; every score is evaluated from integer
//! tallies through the same floating-point path, so an incrementally predicted
//! score is bit-identical to the score recomputed after the move.

use serde::{Deserialize, Serialize};

use crate::error::{MlxError, Result};
use crate::network::MultilayerNetwork;

/// Layer-count penalty `gamma(|L|)` applied to the squared modularity sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingPolicy {
    /// `gamma(|L|) = 1`
    Constant,
    /// `gamma(|L|) = |L|`
    #[default]
    Linear,
    /// `gamma(|L|) = |L|^2`
    Quadratic,
}

impl ScalingPolicy {
    #[inline]
    pub fn gamma(self, layers: usize) -> f64 {
        let l = layers as f64;
        match self {
            ScalingPolicy::Constant => 1.0,
            ScalingPolicy::Linear => l,
            ScalingPolicy::Quadratic => l * l,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalingPolicy::Constant => "constant",
            ScalingPolicy::Linear => "linear",
            ScalingPolicy::Quadratic => "quadratic",
        }
    }
}

impl std::str::FromStr for ScalingPolicy {
    type Err = MlxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScalingPolicy::Constant),
            "linear" => Ok(ScalingPolicy::Linear),
            "quadratic" => Ok(ScalingPolicy::Quadratic),
            other => Err(MlxError::InvalidParameter(format!("unknown scaling `{other}`"))),
        }
    }
}

/// `n * sqrt(C(size, 2))`, the set-modularity normalizer. Zero when `size < 2`.
#[inline]
fn normalizer(n: usize, size: usize) -> f64 {
    if size < 2 {
        return 0.0;
    }
    let pairs = (size * (size - 1) / 2) as f64;
    n as f64 * pairs.sqrt()
}

/// Q from integer tallies. `pair_products` is `sum_{u<v in B} d(u) d(v)`.
#[inline]
fn modularity_value(intra: i64, pair_products: i64, total: u64, norm: f64) -> f64 {
    if norm == 0.0 {
        return 0.0;
    }
    let expected = if total == 0 {
        0.0
    } else {
        pair_products as f64 / total as f64
    };
    (intra as f64 - expected) / norm
}

#[inline]
fn pair_products(deg_sum: i64, deg_sq_sum: i64) -> i64 {
    (deg_sum * deg_sum - deg_sq_sum) / 2
}

/// `H_gamma` from per-layer modularities.
pub fn score_from_modularities<I>(modularities: I, scaling: ScalingPolicy) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut count = 0usize;
    let mut sum = 0.0;
    for q in modularities {
        count += 1;
        if q > 0.0 {
            sum += q;
        }
    }
    if count == 0 {
        return 0.0;
    }
    sum * sum / scaling.gamma(count)
}

fn membership(net: &MultilayerNetwork, vertices: &[usize]) -> Result<(Vec<bool>, usize)> {
    let mut member = vec![false; net.n()];
    let mut size = 0;
    for &u in vertices {
        net.check_vertex(u)?;
        if !member[u] {
            member[u] = true;
            size += 1;
        }
    }
    Ok((member, size))
}

fn layer_tallies(net: &MultilayerNetwork, member: &[bool], layer: usize) -> (i64, i64, i64) {
    let (mut intra, mut deg_sum, mut deg_sq_sum) = (0i64, 0i64, 0i64);
    for (u, _) in member.iter().enumerate().filter(|(_, &m)| m) {
        let nbrs = net.neighbors(layer, u);
        intra += nbrs.iter().filter(|&&v| v > u && member[v]).count() as i64;
        let d = nbrs.len() as i64;
        deg_sum += d;
        deg_sq_sum += d * d;
    }
    (intra, deg_sum, deg_sq_sum)
}

/// Set modularity `Q_layer(B)`; zero when `|B| < 2`.
pub fn set_modularity(net: &MultilayerNetwork, vertices: &[usize], layer: usize) -> Result<f64> {
    net.check_layer(layer)?;
    let (member, size) = membership(net, vertices)?;
    let (intra, deg_sum, deg_sq_sum) = layer_tallies(net, &member, layer);
    Ok(modularity_value(
        intra,
        pair_products(deg_sum, deg_sq_sum),
        net.degree_total(layer),
        normalizer(net.n(), size),
    ))
}

/// `Q_l(B)` for every layer of the network.
pub fn layer_modularities(net: &MultilayerNetwork, vertices: &[usize]) -> Result<Vec<f64>> {
    let (member, size) = membership(net, vertices)?;
    let norm = normalizer(net.n(), size);
    Ok((0..net.m())
        .map(|layer| {
            let (intra, deg_sum, deg_sq_sum) = layer_tallies(net, &member, layer);
            modularity_value(
                intra,
                pair_products(deg_sum, deg_sq_sum),
                net.degree_total(layer),
                norm,
            )
        })
        .collect())
}

/// Multilayer set score `H_gamma(B, L)`.
pub fn multilayer_score(
    net: &MultilayerNetwork,
    vertices: &[usize],
    layers: &[usize],
    scaling: ScalingPolicy,
) -> Result<f64> {
    if layers.is_empty() {
        return Err(MlxError::EmptyLayerSet);
    }
    for &l in layers {
        net.check_layer(l)?;
    }
    let q = layer_modularities(net, vertices)?;
    Ok(score_from_modularities(layers.iter().map(|&l| q[l]), scaling))
}

/// `1 / normalizer`, or zero when the normalizer is zero.
#[inline]
fn inverse_normalizer(n: usize, size: usize) -> f64 {
    let norm = normalizer(n, size);
    if norm == 0.0 {
        0.0
    } else {
        1.0 / norm
    }
}

/// `H` from per-layer numerators `intra - pairs / total` and `1 / normalizer`.
///
/// Every score produced by [`ScoreState`] goes through this one expression,
/// so a predicted toggled score and the score recomputed after the toggle
/// agree to the bit.
#[inline]
pub(crate) fn score_from_numerators<I>(numerators: I, inv_norm: f64, scaling: ScalingPolicy) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut count = 0usize;
    let mut sum = 0.0;
    for x in numerators {
        count += 1;
        sum += x.max(0.0);
    }
    if count == 0 {
        return 0.0;
    }
    let s = sum * inv_norm;
    s * s / scaling.gamma(count)
}

/// Incremental tallies for one vertex set, supporting O(|L|) score deltas.
///
/// Besides the per-layer sums it keeps `links[l][u] = |N(u, l) ∩ B|` for every
/// vertex, so the modularity after toggling any single vertex is available
/// without touching its neighbors. A toggle costs `O(sum_l d_l(u))`.
///
/// Tallies are small integers held exactly in `f64`, laid out layer-major so
/// that [`ScoreState::all_toggled_scores`] runs as straight vector loops.
#[derive(Clone, Debug)]
pub struct ScoreState<'a> {
    net: &'a MultilayerNetwork,
    member: Vec<bool>,
    /// `+1` for outsiders (a toggle adds), `-1` for members.
    sign: Vec<f64>,
    /// `1` for members, `0` otherwise.
    inside: Vec<f64>,
    size: usize,
    intra: Vec<i64>,
    deg_sum: Vec<i64>,
    deg_sq_sum: Vec<i64>,
    /// `1 / (2|E_l|)`, zero for an empty layer.
    inv_total: Vec<f64>,
    /// `[layer * n + u]`
    links: Vec<f64>,
    acc: Vec<f64>,
}

impl<'a> ScoreState<'a> {
    pub fn new(net: &'a MultilayerNetwork, vertices: &[usize]) -> Result<Self> {
        for &u in vertices {
            net.check_vertex(u)?;
        }
        let (n, m) = (net.n(), net.m());
        let inv_total = (0..m)
            .map(|l| match net.degree_total(l) {
                0 => 0.0,
                t => 1.0 / t as f64,
            })
            .collect();
        let mut state = ScoreState {
            net,
            member: vec![false; n],
            sign: vec![1.0; n],
            inside: vec![0.0; n],
            size: 0,
            intra: vec![0; m],
            deg_sum: vec![0; m],
            deg_sq_sum: vec![0; m],
            inv_total,
            links: vec![0.0; n * m],
            acc: Vec::new(),
        };
        for &u in vertices {
            if !state.member[u] {
                state.toggle(u);
            }
        }
        Ok(state)
    }

    pub fn network(&self) -> &'a MultilayerNetwork {
        self.net
    }

    #[inline]
    pub fn contains(&self, u: usize) -> bool {
        self.member[u]
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Current members, ascending.
    pub fn vertices(&self) -> Vec<usize> {
        self.member
            .iter()
            .enumerate()
            .filter_map(|(u, &m)| m.then_some(u))
            .collect()
    }

    pub fn intra_edges(&self, layer: usize) -> i64 {
        self.intra[layer]
    }

    pub fn deg_sum(&self, layer: usize) -> i64 {
        self.deg_sum[layer]
    }

    pub fn deg_sq_sum(&self, layer: usize) -> i64 {
        self.deg_sq_sum[layer]
    }

    /// `|N(u, layer) ∩ B|`.
    #[inline]
    pub fn links(&self, u: usize, layer: usize) -> u32 {
        self.links[layer * self.net.n() + u] as u32
    }

    /// Adds `u` if absent, removes it otherwise.
    pub fn toggle(&mut self, u: usize) {
        let n = self.net.n();
        let adding = !self.member[u];
        let sign: i64 = if adding { 1 } else { -1 };
        let step = sign as f64;
        for layer in 0..self.net.m() {
            let d = self.net.degree(layer, u) as i64;
            let links = &mut self.links[layer * n..(layer + 1) * n];
            self.intra[layer] += sign * links[u] as i64;
            self.deg_sum[layer] += sign * d;
            self.deg_sq_sum[layer] += sign * d * d;
            for &v in self.net.neighbors(layer, u) {
                links[v] += step;
            }
        }
        self.member[u] = adding;
        self.sign[u] = -step;
        self.inside[u] = if adding { 1.0 } else { 0.0 };
        if adding {
            self.size += 1;
        } else {
            self.size -= 1;
        }
    }

    /// `intra - pairs / total` for `layer`, the modularity before normalizing.
    #[inline]
    fn numerator(&self, layer: usize) -> f64 {
        let pairs = pair_products(self.deg_sum[layer], self.deg_sq_sum[layer]) as f64;
        self.intra[layer] as f64 - pairs * self.inv_total[layer]
    }

    /// `1 / (n sqrt(C(|B|, 2)))`, zero when `|B| < 2`.
    pub fn inverse_normalizer(&self) -> f64 {
        inverse_normalizer(self.net.n(), self.size)
    }

    /// Unnormalized modularity of every layer; `Q_l = numerators[l] * inverse_normalizer`.
    pub fn numerators(&self) -> Vec<f64> {
        (0..self.net.m()).map(|l| self.numerator(l)).collect()
    }

    pub fn modularity(&self, layer: usize) -> f64 {
        self.numerator(layer) * self.inverse_normalizer()
    }

    pub fn modularities(&self) -> Vec<f64> {
        let inv = self.inverse_normalizer();
        (0..self.net.m()).map(|l| self.numerator(l) * inv).collect()
    }

    /// `H(B, L)` for the current set. `layers` must be non-empty.
    pub fn score(&self, layers: &[usize], scaling: ScalingPolicy) -> f64 {
        score_from_numerators(
            layers.iter().map(|&l| self.numerator(l)),
            self.inverse_normalizer(),
            scaling,
        )
    }

    /// Numerator of `Q_layer(B △ {u})`, in the same arithmetic as the loop
    /// in [`ScoreState::all_toggled_scores`]. All intermediate values are
    /// integers below 2^53, hence exact.
    #[inline]
    fn toggled_numerator(&self, u: usize, layer: usize) -> f64 {
        let (intra, pairs, deg) = self.layer_constants(layer);
        let n = self.net.n();
        let s = self.sign[u];
        let d = self.net.degree_values(layer)[u];
        let c = self.links[layer * n + u];
        let new_intra = intra + s * c;
        let new_pairs = pairs + s * d * (deg - self.inside[u] * d);
        new_intra - new_pairs * self.inv_total[layer]
    }

    #[inline]
    fn layer_constants(&self, layer: usize) -> (f64, f64, f64) {
        (
            self.intra[layer] as f64,
            pair_products(self.deg_sum[layer], self.deg_sq_sum[layer]) as f64,
            self.deg_sum[layer] as f64,
        )
    }

    /// `H(B △ {u}, L)` without mutating the state.
    pub fn toggled_score(&self, u: usize, layers: &[usize], scaling: ScalingPolicy) -> f64 {
        let new_size = if self.member[u] {
            self.size - 1
        } else {
            self.size + 1
        };
        score_from_numerators(
            layers.iter().map(|&l| self.toggled_numerator(u, l)),
            inverse_normalizer(self.net.n(), new_size),
            scaling,
        )
    }

    /// Toggled scores for every vertex, written into `out` (length `n`).
    ///
    /// Bit-identical to [`ScoreState::toggled_score`]; the per-layer pass
    /// accumulates the positive parts for all vertices at once.
    pub fn all_toggled_scores(&mut self, layers: &[usize], scaling: ScalingPolicy, out: &mut [f64]) {
        let n = self.net.n();
        let out = &mut out[..n];
        let mut acc = std::mem::take(&mut self.acc);
        acc.clear();
        acc.resize(n, 0.0);
        for &l in layers {
            let (intra, pairs, deg) = self.layer_constants(l);
            let inv_total = self.inv_total[l];
            let links = &self.links[l * n..(l + 1) * n];
            let degs = &self.net.degree_values(l)[..n];
            let sign = &self.sign[..n];
            let inside = &self.inside[..n];
            for u in 0..n {
                let s = sign[u];
                let d = degs[u];
                let new_intra = intra + s * links[u];
                let new_pairs = pairs + s * d * (deg - inside[u] * d);
                acc[u] += (new_intra - new_pairs * inv_total).max(0.0);
            }
        }
        let add_inv = inverse_normalizer(n, self.size + 1);
        let remove_inv = inverse_normalizer(n, self.size.saturating_sub(1));
        let gamma = scaling.gamma(layers.len());
        for u in 0..n {
            let inv = if self.member[u] { remove_inv } else { add_inv };
            let s = acc[u] * inv;
            out[u] = s * s / gamma;
        }
        self.acc = acc;
    }

    /// Recomputes every tally from scratch and compares. Test hook.
    pub fn is_consistent(&self) -> bool {
        let n = self.net.n();
        if self.member.iter().filter(|&&b| b).count() != self.size {
            return false;
        }
        for u in 0..n {
            let (s, i) = if self.member[u] { (-1.0, 1.0) } else { (1.0, 0.0) };
            if self.sign[u] != s || self.inside[u] != i {
                return false;
            }
        }
        for layer in 0..self.net.m() {
            let (intra, deg_sum, deg_sq_sum) = layer_tallies(self.net, &self.member, layer);
            if (intra, deg_sum, deg_sq_sum)
                != (self.intra[layer], self.deg_sum[layer], self.deg_sq_sum[layer])
            {
                return false;
            }
            for u in 0..n {
                let c = self
                    .net
                    .neighbors(layer, u)
                    .iter()
                    .filter(|&&v| self.member[v])
                    .count() as f64;
                if c != self.links[layer * n + u] {
                    return false;
                }
            }
        }
        true
    }
}

/// `H(B △ {u}, L) − H(B, L)` from the incremental state.
pub fn score_delta(
    state: &ScoreState<'_>,
    layers: &[usize],
    u: usize,
    scaling: ScalingPolicy,
) -> Result<f64> {
    let net = state.network();
    net.check_vertex(u)?;
    if layers.is_empty() {
        return Err(MlxError::EmptyLayerSet);
    }
    for &l in layers {
        net.check_layer(l)?;
    }
    Ok(state.toggled_score(u, layers, scaling) - state.score(layers, scaling))
}

/// Block proportions and per-layer connection matrices of a multilayer SBM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsbmParams {
    pi: Vec<f64>,
    /// `p[layer][i][j]`
    p: Vec<Vec<Vec<f64>>>,
}

impl MsbmParams {
    pub fn new(pi: Vec<f64>, p: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = pi.len();
        if k < 2 {
            return Err(MlxError::InvalidParameter(format!("need at least 2 blocks, got {k}")));
        }
        if pi.iter().any(|&x| !(x > 0.0)) {
            return Err(MlxError::InvalidParameter("block proportions must be positive".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MlxError::InvalidParameter(format!(
                "block proportions sum to {total}, expected 1"
            )));
        }
        if p.is_empty() {
            return Err(MlxError::InvalidParameter("no layers given".into()));
        }
        for (layer, mat) in p.iter().enumerate() {
            if mat.len() != k || mat.iter().any(|row| row.len() != k) {
                return Err(MlxError::InvalidParameter(format!(
                    "layer {layer}: probability matrix is not {k}x{k}"
                )));
            }
            for i in 0..k {
                for j in 0..k {
                    let x = mat[i][j];
                    if !(x > 0.0 && x < 1.0) {
                        return Err(MlxError::InvalidParameter(format!(
                            "layer {layer}: P({i},{j}) = {x} outside (0, 1)"
                        )));
                    }
                    if (x - mat[j][i]).abs() > 1e-12 {
                        return Err(MlxError::InvalidParameter(format!(
                            "layer {layer}: matrix is not symmetric"
                        )));
                    }
                }
            }
        }
        Ok(MsbmParams { pi, p })
    }

    /// Same matrix in every one of `m` layers.
    pub fn homogeneous(pi: Vec<f64>, matrix: Vec<Vec<f64>>, m: usize) -> Result<Self> {
        MsbmParams::new(pi, vec![matrix; m])
    }

    pub fn blocks(&self) -> usize {
        self.pi.len()
    }

    pub fn layers(&self) -> usize {
        self.p.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn matrix(&self, layer: usize) -> &[Vec<f64>] {
        &self.p[layer]
    }

    #[inline]
    pub fn prob(&self, layer: usize, i: usize, j: usize) -> f64 {
        self.p[layer][i][j]
    }

    /// `pi^T P_layer pi`.
    pub fn kappa(&self, layer: usize) -> f64 {
        let mat = &self.p[layer];
        let mut acc = 0.0;
        for (i, pi_i) in self.pi.iter().enumerate() {
            for (j, pi_j) in self.pi.iter().enumerate() {
                acc += pi_i * mat[i][j] * pi_j;
            }
        }
        acc
    }

    /// Determinant of a 2x2 layer matrix.
    pub fn det(&self, layer: usize) -> Result<f64> {
        self.require_two_blocks()?;
        let mat = &self.p[layer];
        Ok(mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0])
    }

    fn require_two_blocks(&self) -> Result<()> {
        if self.blocks() != 2 {
            return Err(MlxError::Unsupported(format!(
                "population oracle is defined for 2 blocks, got {}",
                self.blocks()
            )));
        }
        Ok(())
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.layers() {
            return Err(MlxError::OutOfBounds {
                what: "layer",
                id: layer,
                limit: self.layers(),
            });
        }
        Ok(())
    }
}

fn check_population_args(s: f64, rho: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(MlxError::InvalidParameter(format!("set fraction s = {s} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(MlxError::InvalidParameter(format!("block-1 share rho = {rho} outside [0, 1]")));
    }
    Ok(())
}

/// Population set modularity of a set with size fraction `s` and block-1 share `rho`,
/// evaluated through its quadratic form
/// `(s/√2)(vᵀPv − (vᵀPπ)²/κ)` with `v = (rho, 1 − rho)`.
pub fn population_modularity(params: &MsbmParams, layer: usize, s: f64, rho: f64) -> Result<f64> {
    params.require_two_blocks()?;
    params.check_layer(layer)?;
    check_population_args(s, rho)?;
    let mat = params.matrix(layer);
    let v = [rho, 1.0 - rho];
    let pi = params.pi();
    let quad = |x: &[f64], y: &[f64]| -> f64 {
        (0..2)
            .map(|i| (0..2).map(|j| x[i] * mat[i][j] * y[j]).sum::<f64>())
            .sum()
    };
    let kappa = params.kappa(layer);
    let cross = quad(&v, pi);
    Ok(s / std::f64::consts::SQRT_2 * (quad(&v, &v) - cross * cross / kappa))
}

/// Closed form `(s/√2)(π₁ − ρ)² det(P)/κ` of [`population_modularity`].
pub fn population_modularity_closed_form(
    params: &MsbmParams,
    layer: usize,
    s: f64,
    rho: f64,
) -> Result<f64> {
    params.check_layer(layer)?;
    check_population_args(s, rho)?;
    let det = params.det(layer)?;
    let gap = params.pi()[0] - rho;
    Ok(s / std::f64::consts::SQRT_2 * gap * gap * det / params.kappa(layer))
}

/// Population score `(sum_{l in L} q_l)^2 / gamma(|L|)`.
pub fn population_score(
    params: &MsbmParams,
    s: f64,
    rho: f64,
    layers: &[usize],
    scaling: ScalingPolicy,
) -> Result<f64> {
    if layers.is_empty() {
        return Err(MlxError::EmptyLayerSet);
    }
    let mut sum = 0.0;
    for &l in layers {
        sum += population_modularity(params, l, s, rho)?;
    }
    Ok(sum * sum / scaling.gamma(layers.len()))
}
