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

//! Agreement between vertex families and misclassification counts.

use std::fmt::Write as _;

use crate::error::{MlxError, Result};
use crate::extraction::Community;
use crate::refinement::{intersection_size, set_jaccard};

/// A family of non-empty vertex sets, each stored ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexFamily {
    sets: Vec<Vec<usize>>,
}

impl VertexFamily {
    pub fn new(sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut normalized = Vec::with_capacity(sets.len());
        for (i, mut s) in sets.into_iter().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(MlxError::InvalidParameter(format!("vertex set {i} is empty")));
            }
            normalized.push(s);
        }
        Ok(VertexFamily { sets: normalized })
    }

    pub fn from_communities(communities: &[Community]) -> Result<Self> {
        VertexFamily::new(communities.iter().map(|c| c.vertices.clone()).collect())
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn size(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

fn require_nonempty(family: &VertexFamily, name: &str) -> Result<()> {
    if family.is_empty() {
        return Err(MlxError::InvalidParameter(format!("{name} family is empty")));
    }
    Ok(())
}

/// Coverage of `b` by `c`: mean over `B ∈ b` of the best Jaccard index against `c`.
pub fn coverage(b: &VertexFamily, c: &VertexFamily) -> Result<f64> {
    require_nonempty(b, "covered")?;
    require_nonempty(c, "covering")?;
    let total: f64 = b
        .sets
        .iter()
        .map(|bs| {
            c.sets
                .iter()
                .map(|cs| set_jaccard(bs, cs))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / b.size() as f64)
}

/// Symmetrized coverage.
pub fn match_score(b: &VertexFamily, c: &VertexFamily) -> Result<f64> {
    Ok(0.5 * coverage(b, c)? + 0.5 * coverage(c, b)?)
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> usize {
    a.len() + b.len() - 2 * intersection_size(a, b)
}

/// `min(|B △ C1|, |B △ C2|)` for a two-block partition `(C1, C2)` of `[n]`.
pub fn misclassification_error(b: &[usize], c1: &[usize], c2: &[usize]) -> Result<usize> {
    let norm = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (b, c1, c2) = (norm(b), norm(c1), norm(c2));
    let n = c1.len() + c2.len();
    let mut seen = vec![false; n];
    for &u in c1.iter().chain(&c2) {
        if u >= n || seen[u] {
            return Err(MlxError::InvalidParameter(
                "C1 and C2 do not partition the vertex set".into(),
            ));
        }
        seen[u] = true;
    }
    if let Some(&u) = b.iter().find(|&&u| u >= n) {
        return Err(MlxError::OutOfBounds {
            what: "vertex",
            id: u,
            limit: n,
        });
    }
    Ok(symmetric_difference(&b, &c1).min(symmetric_difference(&b, &c2)))
}

/// Vertices of `[n]` that belong to no community.
pub fn background_vertices(n: usize, communities: &[Community]) -> Vec<usize> {
    let mut covered = vec![false; n];
    for c in communities {
        for &u in &c.vertices {
            if u < n {
                covered[u] = true;
            }
        }
    }
    (0..n).filter(|&u| !covered[u]).collect()
}

/// `metric\tvalue` rows.
pub fn metrics_tsv(rows: &[(&str, f64)]) -> String {
    let mut s = String::from("metric\tvalue\n");
    for (name, value) in rows {
        let _ = writeln!(s, "{name}\t{value}");
    }
    s
}
