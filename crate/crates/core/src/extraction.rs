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

//! Seeding and the alternating layer-set / vertex-set ascent.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MlxError, Result};
use crate::network::MultilayerNetwork;
use crate::scoring::{score_from_numerators, ScalingPolicy, ScoreState};

/// A vertex-layer set and its score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Community {
    /// Ascending vertex ids.
    pub vertices: Vec<usize>,
    /// Ascending layer ids.
    pub layers: Vec<usize>,
    pub score: f64,
}

impl Community {
    pub fn same_pair(&self, other: &Community) -> bool {
        self.vertices == other.vertices && self.layers == other.layers
    }
}

/// Candidate ordering: score descending, then smaller sets, then lexicographic.
pub fn rank_order(a: &Community, b: &Community) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.vertices.len().cmp(&b.vertices.len()))
        .then_with(|| a.vertices.cmp(&b.vertices))
        .then_with(|| a.layers.cmp(&b.layers))
}

/// Sorts by [`rank_order`] and drops repeated `(B, L)` pairs.
pub fn normalize_candidates(mut candidates: Vec<Community>) -> Vec<Community> {
    candidates.sort_by(rank_order);
    let mut seen = HashSet::new();
    candidates.retain(|c| seen.insert((c.vertices.clone(), c.layers.clone())));
    candidates
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SeedPolicy {
    /// Every closed neighborhood `N(u, l) ∪ {u}`.
    #[default]
    AllNeighborhoods,
    /// A reproducible random subset of the closed neighborhoods.
    Sampled { count: usize },
}

/// Whether a seed neighborhood includes its center vertex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// `N(u, l) ∪ {u}`
    #[default]
    Closed,
    /// `N(u, l)`
    Open,
}

/// Which vertices the vertex search scores at each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateScope {
    /// All `n` vertices.
    #[default]
    AllVertices,
    /// Members of `B` plus vertices with a neighbor in `B` in some layer of `L`.
    Frontier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub scaling: ScalingPolicy,
    pub seed_policy: SeedPolicy,
    #[serde(default)]
    pub neighborhood: Neighborhood,
    pub candidate_scope: CandidateScope,
    /// Toggle limit per vertex search; `None` means `10 * n`.
    pub max_iterations: Option<usize>,
    pub rng_seed: u64,
    pub worker_count: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            scaling: ScalingPolicy::Linear,
            seed_policy: SeedPolicy::AllNeighborhoods,
            neighborhood: Neighborhood::Closed,
            candidate_scope: CandidateScope::AllVertices,
            max_iterations: None,
            rng_seed: 0,
            worker_count: 1,
        }
    }
}

impl ExtractionConfig {
    pub fn iteration_limit(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == Some(0) {
            return Err(MlxError::InvalidParameter("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed neighborhoods in `(layer, vertex)` order, deduplicated, size ≥ 2.
pub fn seed_sets(net: &MultilayerNetwork, config: &ExtractionConfig) -> Vec<Vec<usize>> {
    let mut seen = HashSet::new();
    let mut seeds = Vec::new();
    for layer in 0..net.m() {
        for u in 0..net.n() {
            let nbrs = net.neighbors(layer, u);
            if nbrs.is_empty() {
                continue;
            }
            let mut set = Vec::with_capacity(nbrs.len() + 1);
            let pos = nbrs.partition_point(|&v| v < u);
            set.extend_from_slice(&nbrs[..pos]);
            if config.neighborhood == Neighborhood::Closed {
                set.push(u);
            }
            set.extend_from_slice(&nbrs[pos..]);
            if set.len() >= 2 && seen.insert(set.clone()) {
                seeds.push(set);
            }
        }
    }
    match config.seed_policy {
        SeedPolicy::AllNeighborhoods => seeds,
        SeedPolicy::Sampled { count } if count >= seeds.len() => seeds,
        SeedPolicy::Sampled { count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let mut picked = sample(&mut rng, seeds.len(), count).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| std::mem::take(&mut seeds[i])).collect()
        }
    }
}

/// Layer choice from per-layer numerators (`Q_l = numerators[l] * inv_norm`);
/// `previous` empty on the first pass.
fn select_layers(
    numerators: &[f64],
    inv_norm: f64,
    previous: &[usize],
    scaling: ScalingPolicy,
) -> Vec<usize> {
    let m = numerators.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| numerators[b].total_cmp(&numerators[a]).then(a.cmp(&b)));

    let prefix_score: Vec<f64> = (1..=m)
        .map(|k| score_from_numerators(order[..k].iter().map(|&l| numerators[l]), inv_norm, scaling))
        .collect();
    let k = (0..m.saturating_sub(1))
        .find(|&i| prefix_score[i] >= prefix_score[i + 1])
        .map_or(m, |i| i + 1);

    let mut proposed = order[..k].to_vec();
    proposed.sort_unstable();
    if previous.is_empty() {
        return proposed;
    }
    let score_of = |layers: &[usize]| {
        score_from_numerators(layers.iter().map(|&l| numerators[l]), inv_norm, scaling)
    };
    if score_of(&proposed) > score_of(previous) {
        proposed
    } else {
        previous.to_vec()
    }
}

fn select_for(state: &ScoreState<'_>, previous: &[usize], scaling: ScalingPolicy) -> Vec<usize> {
    select_layers(&state.numerators(), state.inverse_normalizer(), previous, scaling)
}

/// Layer Set Search for a fixed vertex set. Returns ascending layer ids.
pub fn layer_set_search(
    net: &MultilayerNetwork,
    vertices: &[usize],
    previous: &[usize],
    scaling: ScalingPolicy,
) -> Result<Vec<usize>> {
    let state = ScoreState::new(net, vertices)?;
    if state.size() < 2 {
        return Err(MlxError::SetTooSmall(state.size()));
    }
    for &l in previous {
        net.check_layer(l)?;
    }
    let mut prev = previous.to_vec();
    prev.sort_unstable();
    prev.dedup();
    Ok(select_for(&state, &prev, scaling))
}

/// Greedy single-vertex ascent on `state` for a fixed layer set.
/// Returns the number of accepted toggles.
fn ascend_vertices(
    state: &mut ScoreState<'_>,
    layers: &[usize],
    config: &ExtractionConfig,
    scratch: &mut Vec<f64>,
) -> Result<usize> {
    let net = state.network();
    let n = net.n();
    let scaling = config.scaling;
    let limit = config.iteration_limit(n);
    scratch.resize(n, 0.0);
    let mut current = state.score(layers, scaling);
    let mut toggles = 0;
    loop {
        state.all_toggled_scores(layers, scaling, scratch);
        let frontier_only = config.candidate_scope == CandidateScope::Frontier;
        let mut best: Option<(usize, f64)> = None;
        for (u, &h) in scratch.iter().enumerate() {
            if state.contains(u) {
                if state.size() <= 2 {
                    continue;
                }
            } else if frontier_only && layers.iter().all(|&l| state.links(u, l) == 0) {
                continue;
            }
            let delta = h - current;
            if delta > 0.0 && best.map_or(true, |(_, d)| delta > d) {
                best = Some((u, delta));
            }
        }
        let Some((u, _)) = best else {
            return Ok(toggles);
        };
        if toggles == limit {
            return Err(MlxError::IterationGuard {
                limit,
                vertices: state.vertices(),
                layers: layers.to_vec(),
            });
        }
        state.toggle(u);
        current = scratch[u];
        toggles += 1;
        debug_assert_eq!(current.to_bits(), state.score(layers, scaling).to_bits());
    }
}

/// Vertex Set Search for a fixed layer set. Returns ascending vertex ids.
pub fn vertex_set_search(
    net: &MultilayerNetwork,
    vertices: &[usize],
    layers: &[usize],
    config: &ExtractionConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    if layers.is_empty() {
        return Err(MlxError::EmptyLayerSet);
    }
    for &l in layers {
        net.check_layer(l)?;
    }
    let mut state = ScoreState::new(net, vertices)?;
    if state.size() < 2 {
        return Err(MlxError::SetTooSmall(state.size()));
    }
    let mut scratch = Vec::new();
    ascend_vertices(&mut state, layers, config, &mut scratch)?;
    Ok(state.vertices())
}

/// Per-phase trace of one extraction, for monotonicity checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractionTrace {
    /// Score after each layer search and each vertex search, in order.
    pub phase_scores: Vec<f64>,
}

/// Runs Extraction from `seed` to a local maximum.
///
/// Returns `None` when the fixed point has zero score (no layer has positive
/// modularity), which is not a community.
pub fn extract(
    net: &MultilayerNetwork,
    seed: &[usize],
    config: &ExtractionConfig,
) -> Result<Option<Community>> {
    extract_traced(net, seed, config).map(|(c, _)| c)
}

pub fn extract_traced(
    net: &MultilayerNetwork,
    seed: &[usize],
    config: &ExtractionConfig,
) -> Result<(Option<Community>, ExtractionTrace)> {
    config.validate()?;
    let mut state = ScoreState::new(net, seed)?;
    if state.size() < 2 {
        return Err(MlxError::SetTooSmall(state.size()));
    }
    let scaling = config.scaling;
    let mut trace = ExtractionTrace::default();
    let mut layers: Vec<usize> = Vec::new();
    let mut scratch = Vec::new();
    loop {
        let chosen = select_for(&state, &layers, scaling);
        let layers_changed = chosen != layers;
        layers = chosen;
        trace.phase_scores.push(state.score(&layers, scaling));
        let toggles = ascend_vertices(&mut state, &layers, config, &mut scratch)?;
        trace.phase_scores.push(state.score(&layers, scaling));
        if !layers_changed && toggles == 0 {
            break;
        }
    }
    let score = state.score(&layers, scaling);
    if !(score > 0.0) {
        return Ok((None, trace));
    }
    Ok((
        Some(Community {
            vertices: state.vertices(),
            layers,
            score,
        }),
        trace,
    ))
}

/// Outcome of running Extraction over every seed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractionRun {
    /// Distinct communities in [`rank_order`].
    pub communities: Vec<Community>,
    pub seeds: usize,
    /// Seeds whose search stopped at a zero-score fixed point.
    pub degenerate: usize,
    /// Seeds that hit the iteration guard.
    pub failures: usize,
}

pub(crate) fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Extraction from every seed; per-seed results merged in seed order, so the
/// output does not depend on `worker_count`.
pub fn extract_all(net: &MultilayerNetwork, config: &ExtractionConfig) -> Result<ExtractionRun> {
    config.validate()?;
    let seeds = seed_sets(net, config);
    let outcomes: Vec<Result<Option<Community>>> = with_workers(config.worker_count, || {
        seeds
            .par_iter()
            .map(|seed| extract(net, seed, config))
            .collect()
    });
    let mut run = ExtractionRun {
        seeds: seeds.len(),
        ..ExtractionRun::default()
    };
    let mut found = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(Some(c)) => found.push(c),
            Ok(None) => run.degenerate += 1,
            Err(_) => run.failures += 1,
        }
    }
    run.communities = normalize_candidates(found);
    Ok(run)
}

/// True when no single vertex toggle (keeping `|B| ≥ 2`) raises the score and
/// the layer search leaves the layer set unchanged.
pub fn is_local_maximum(
    net: &MultilayerNetwork,
    community: &Community,
    scaling: ScalingPolicy,
) -> Result<bool> {
    let state = ScoreState::new(net, &community.vertices)?;
    let current = state.score(&community.layers, scaling);
    for u in 0..net.n() {
        if state.contains(u) && state.size() <= 2 {
            continue;
        }
        if state.toggled_score(u, &community.layers, scaling) > current {
            return Ok(false);
        }
    }
    Ok(select_for(&state, &community.layers, scaling) == community.layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, EdgeRecord};
    use crate::scoring::{multilayer_score, score_from_modularities};

    fn triangle_plus_isolated() -> MultilayerNetwork {
        let e = [(0, 1), (1, 2), (0, 2)].map(|(u, v)| EdgeRecord::new(0, u, v));
        build_network(4, 1, &e).unwrap()
    }

    /// Layer search driven by fixed modularity values.
    fn select(qs: &[f64], prev: &[usize]) -> Vec<usize> {
        select_layers(qs, 1.0, prev, ScalingPolicy::Linear)
    }

    #[test]
    fn layer_search_stops_at_first_non_improving_prefix() {
        assert_eq!(select(&[0.3, 0.1, -0.05], &[]), vec![0]);
        assert_eq!(select(&[0.1, 0.3, -0.05], &[]), vec![1]);
        assert_eq!(select(&[0.1, 0.1], &[]), vec![0, 1]);
    }

    #[test]
    fn layer_search_prefix_matches_brute_force_here() {
        let qs = [0.3, 0.1, -0.05];
        let mut best = (f64::MIN, vec![]);
        for mask in 1u32..8 {
            let set: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let h = score_from_modularities(set.iter().map(|&l| qs[l]), ScalingPolicy::Linear);
            if h > best.0 {
                best = (h, set);
            }
        }
        assert_eq!(best.1, select(&qs, &[]));
    }

    #[test]
    fn layer_search_keeps_previous_when_not_strictly_better() {
        // prefix scores 0.04, 0.0392, ... so the proposal is {0} with H = 0.04,
        // while all five layers together score 0.52^2 / 5 = 0.05408
        let qs = [0.2, 0.08, 0.08, 0.08, 0.08];
        assert_eq!(select(&qs, &[]), vec![0]);
        let all = vec![0, 1, 2, 3, 4];
        assert_eq!(select(&qs, &all), all);
        // a weaker previous set is replaced
        assert_eq!(select(&qs, &[1]), vec![0]);
        // {0, 1} scores 0.08 against 0.04 for {1}
        assert_eq!(select(&[0.2, 0.2], &[1]), vec![0, 1]);
        assert_eq!(select(&[0.2, -0.1], &[0]), vec![0]);
    }

    #[test]
    fn layer_search_ties_prefer_lower_layer_ids() {
        assert_eq!(select(&[0.1, 0.3, 0.3], &[]), vec![1, 2]);
        assert_eq!(select(&[0.0, 0.0, 0.0], &[]), vec![0]);
    }

    #[test]
    fn layer_search_requires_two_vertices() {
        let net = triangle_plus_isolated();
        assert!(matches!(
            layer_set_search(&net, &[0], &[], ScalingPolicy::Linear),
            Err(MlxError::SetTooSmall(1))
        ));
    }

    #[test]
    fn seeds_are_closed_and_deduplicated() {
        let net = triangle_plus_isolated();
        let seeds = seed_sets(&net, &ExtractionConfig::default());
        assert_eq!(seeds, vec![vec![0, 1, 2]]);

        let star: Vec<_> = (1..4).map(|v| EdgeRecord::new(0, 0, v)).collect();
        let net = build_network(5, 1, &star).unwrap();
        let seeds = seed_sets(&net, &ExtractionConfig::default());
        assert_eq!(seeds, vec![vec![0, 1, 2, 3], vec![0, 1], vec![0, 2], vec![0, 3]]);
    }

    #[test]
    fn sampled_seeds_are_a_reproducible_subset() {
        let star: Vec<_> = (1..8).map(|v| EdgeRecord::new(0, 0, v)).collect();
        let net = build_network(8, 1, &star).unwrap();
        let all = seed_sets(&net, &ExtractionConfig::default());
        let config = ExtractionConfig {
            seed_policy: SeedPolicy::Sampled { count: 3 },
            rng_seed: 11,
            ..ExtractionConfig::default()
        };
        let a = seed_sets(&net, &config);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|s| all.contains(s)));
        assert_eq!(a, seed_sets(&net, &config));
    }

    #[test]
    fn vertex_search_climbs_to_the_triangle() {
        let net = triangle_plus_isolated();
        let config = ExtractionConfig::default();
        let b = vertex_set_search(&net, &[0, 1, 3], &[0], &config).unwrap();
        assert_eq!(b, vec![0, 1, 2]);
        let again = vertex_set_search(&net, &b, &[0], &config).unwrap();
        assert_eq!(again, b);
    }

    #[test]
    fn vertex_search_result_is_the_exhaustive_maximum() {
        let net = triangle_plus_isolated();
        let mut best = (f64::MIN, vec![]);
        for mask in 0u32..16 {
            let b: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
            if b.len() < 2 {
                continue;
            }
            let h = multilayer_score(&net, &b, &[0], ScalingPolicy::Linear).unwrap();
            if h > best.0 {
                best = (h, b);
            }
        }
        assert_eq!(best.1, vec![0, 1, 2]);
    }

    #[test]
    fn iteration_guard_reports_state() {
        let net = triangle_plus_isolated();
        let config = ExtractionConfig {
            max_iterations: Some(1),
            ..ExtractionConfig::default()
        };
        // {0, 3} -> needs two toggles (add 1 or 2, then the other, then drop 3)
        match vertex_set_search(&net, &[0, 3], &[0], &config) {
            Err(MlxError::IterationGuard { limit: 1, vertices, layers }) => {
                assert_eq!(layers, vec![0]);
                assert_eq!(vertices.len(), 3);
            }
            other => panic!("expected guard error, got {other:?}"),
        }
        let bad = ExtractionConfig {
            max_iterations: Some(0),
            ..ExtractionConfig::default()
        };
        assert!(vertex_set_search(&net, &[0, 1], &[0], &bad).is_err());
    }

    #[test]
    fn extraction_of_isolated_pair_is_none() {
        let net = build_network(5, 1, &[EdgeRecord::new(0, 0, 1)]).unwrap();
        let out = extract(&net, &[3, 4], &ExtractionConfig::default()).unwrap();
        assert!(out.is_none());
        assert!(extract(&net, &[3], &ExtractionConfig::default()).is_err());
    }

    #[test]
    fn extract_all_on_triangle() {
        let net = triangle_plus_isolated();
        let run = extract_all(&net, &ExtractionConfig::default()).unwrap();
        assert_eq!(run.seeds, 1);
        assert_eq!(run.communities.len(), 1);
        let c = &run.communities[0];
        assert_eq!((c.vertices.clone(), c.layers.clone()), (vec![0, 1, 2], vec![0]));
        assert!(is_local_maximum(&net, c, ScalingPolicy::Linear).unwrap());
    }

    #[test]
    fn normalize_sorts_and_deduplicates() {
        let c = |v: Vec<usize>, s: f64| Community {
            vertices: v,
            layers: vec![0],
            score: s,
        };
        let out = normalize_candidates(vec![
            c(vec![0, 1, 2], 1.0),
            c(vec![3, 4], 2.0),
            c(vec![0, 1], 1.0),
            c(vec![3, 4], 2.0),
        ]);
        let sets: Vec<_> = out.iter().map(|c| c.vertices.clone()).collect();
        assert_eq!(sets, vec![vec![3, 4], vec![0, 1], vec![0, 1, 2]]);
    }
}
