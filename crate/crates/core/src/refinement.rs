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

//! Overlap-controlled selection of extracted communities.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MlxError, Result};
use crate::extraction::{normalize_candidates, Community};

/// Number of points on the overlap grid `0.00, 0.01, ..., 1.00`.
pub const BETA_GRID_POINTS: usize = 101;

/// `i`-th grid value, `i / 100`.
pub fn beta_grid(i: usize) -> f64 {
    i as f64 / 100.0
}

pub(crate) fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// `|a ∩ b| / |a ∪ b|` for ascending id lists; 0 when both are empty.
pub fn set_jaccard(a: &[usize], b: &[usize]) -> f64 {
    let inter = intersection_size(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Generalized Jaccard match: mean of the vertex and layer Jaccard indices.
pub fn jaccard_match(a: &Community, b: &Community) -> f64 {
    0.5 * set_jaccard(&a.vertices, &b.vertices) + 0.5 * set_jaccard(&a.layers, &b.layers)
}

/// Candidates as fixed-width bitsets, for fast pairwise matches.
struct PackedFamily {
    vertex_words: usize,
    layer_words: usize,
    vertices: Vec<u64>,
    layers: Vec<u64>,
    vertex_counts: Vec<usize>,
    layer_counts: Vec<usize>,
}

fn pack_into(bits: &mut [u64], ids: &[usize]) {
    for &id in ids {
        bits[id / 64] |= 1 << (id % 64);
    }
}

fn common_bits(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
}

/// Same arithmetic as [`set_jaccard`].
#[inline]
fn jaccard_from_counts(inter: usize, a: usize, b: usize) -> f64 {
    let union = a + b - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

impl PackedFamily {
    fn new(ranked: &[Community]) -> Self {
        let width = |f: fn(&Community) -> &[usize]| {
            ranked
                .iter()
                .filter_map(|c| f(c).last())
                .max()
                .map_or(1, |&max| max / 64 + 1)
        };
        let vertex_words = width(|c| &c.vertices);
        let layer_words = width(|c| &c.layers);
        let mut vertices = vec![0u64; vertex_words * ranked.len()];
        let mut layers = vec![0u64; layer_words * ranked.len()];
        for (i, c) in ranked.iter().enumerate() {
            pack_into(&mut vertices[i * vertex_words..(i + 1) * vertex_words], &c.vertices);
            pack_into(&mut layers[i * layer_words..(i + 1) * layer_words], &c.layers);
        }
        PackedFamily {
            vertex_words,
            layer_words,
            vertices,
            layers,
            vertex_counts: ranked.iter().map(|c| c.vertices.len()).collect(),
            layer_counts: ranked.iter().map(|c| c.layers.len()).collect(),
        }
    }

    fn len(&self) -> usize {
        self.vertex_counts.len()
    }

    /// [`jaccard_match`] of candidates `i` and `j`, bit for bit.
    fn matching(&self, i: usize, j: usize) -> f64 {
        let (vw, lw) = (self.vertex_words, self.layer_words);
        let iv = common_bits(&self.vertices[i * vw..(i + 1) * vw], &self.vertices[j * vw..(j + 1) * vw]);
        let il = common_bits(&self.layers[i * lw..(i + 1) * lw], &self.layers[j * lw..(j + 1) * lw]);
        0.5 * jaccard_from_counts(iv, self.vertex_counts[i], self.vertex_counts[j])
            + 0.5 * jaccard_from_counts(il, self.layer_counts[i], self.layer_counts[j])
    }
}

/// Greedy pass over candidates already in rank order; returns kept indices.
fn refine_packed(family: &PackedFamily, beta: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..family.len() {
        if kept.iter().all(|&k| family.matching(k, i) <= beta) {
            kept.push(i);
        }
    }
    kept
}

fn refine_ranked(ranked: &[Community], beta: f64) -> Vec<usize> {
    refine_packed(&PackedFamily::new(ranked), beta)
}

/// Keeps the best-ranked candidates whose pairwise match is at most `beta`.
pub fn refine(candidates: &[Community], beta: f64) -> Result<Vec<Community>> {
    check_beta(beta)?;
    let ranked = normalize_candidates(candidates.to_vec());
    Ok(refine_ranked(&ranked, beta)
        .into_iter()
        .map(|i| ranked[i].clone())
        .collect())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(MlxError::InvalidParameter(format!("beta = {beta} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementResult {
    pub kept: Vec<Community>,
    pub beta_used: f64,
    /// `(beta_i, k(beta_i))` over the 101-point grid; empty for a fixed beta.
    pub beta_profile: Vec<(f64, usize)>,
}

impl RefinementResult {
    /// `beta\tk` rows with a header line.
    pub fn profile_tsv(&self) -> String {
        let mut s = String::from("beta\tk\n");
        for (beta, k) in &self.beta_profile {
            let _ = writeln!(s, "{beta:.2}\t{k}");
        }
        s
    }
}

/// Chooses the count that the stable-window rule selects from a k-profile.
///
/// The mode of the profile wins. When several counts share the top
/// frequency, the one with the longest run of consecutive grid points wins,
/// then the smaller count.
pub fn stable_count(profile: &[usize]) -> Option<usize> {
    let mut freq: HashMap<usize, usize> = HashMap::new();
    let mut longest_run: HashMap<usize, usize> = HashMap::new();
    let mut i = 0;
    while i < profile.len() {
        let k = profile[i];
        let mut j = i;
        while j < profile.len() && profile[j] == k {
            j += 1;
        }
        *freq.entry(k).or_default() += j - i;
        let run = longest_run.entry(k).or_default();
        *run = (*run).max(j - i);
        i = j;
    }
    freq.into_iter()
        .max_by(|&(ka, fa), &(kb, fb)| {
            fa.cmp(&fb)
                .then(longest_run[&ka].cmp(&longest_run[&kb]))
                .then(kb.cmp(&ka))
        })
        .map(|(k, _)| k)
}

/// Sweeps the overlap grid and refines at the smallest beta whose count is
/// the stable count of the profile.
pub fn default_beta(candidates: &[Community]) -> Result<RefinementResult> {
    if candidates.is_empty() {
        return Err(MlxError::InvalidParameter(
            "automatic beta needs at least one candidate".into(),
        ));
    }
    let ranked = normalize_candidates(candidates.to_vec());
    let family = PackedFamily::new(&ranked);
    let counts: Vec<usize> = (0..BETA_GRID_POINTS)
        .into_par_iter()
        .map(|i| refine_packed(&family, beta_grid(i)).len())
        .collect();
    let mode = stable_count(&counts).expect("non-empty grid");
    let index = counts.iter().position(|&k| k == mode).expect("mode occurs");
    let beta_used = beta_grid(index);
    let kept = refine_packed(&family, beta_used)
        .into_iter()
        .map(|i| ranked[i].clone())
        .collect();
    Ok(RefinementResult {
        kept,
        beta_used,
        beta_profile: counts
            .into_iter()
            .enumerate()
            .map(|(i, k)| (beta_grid(i), k))
            .collect(),
    })
}

/// Refinement at a fixed beta, packaged like [`default_beta`].
pub fn refine_fixed(candidates: &[Community], beta: f64) -> Result<RefinementResult> {
    Ok(RefinementResult {
        kept: refine(candidates, beta)?,
        beta_used: beta,
        beta_profile: Vec::new(),
    })
}
