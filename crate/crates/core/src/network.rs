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

//! Multilayer network storage and edge-list ingestion.
//!
//! A network is a stack of `m` simple undirected graphs over the same `n`
//! registered vertices. Vertices and layers are dense 0-based ids. Edges never
//! cross layers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MlxError, Result};

/// One ingested edge row: `layer u v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub layer: usize,
    pub u: usize,
    pub v: usize,
}

impl EdgeRecord {
    pub fn new(layer: usize, u: usize, v: usize) -> Self {
        EdgeRecord { layer, u, v }
    }
}

/// Row accounting from cleaning an edge list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows: usize,
    pub self_loops_dropped: usize,
    pub duplicates_removed: usize,
}

/// String labels for datasets whose ids are names rather than dense integers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub layers: Vec<String>,
    pub vertices: Vec<String>,
}

impl LabelMap {
    pub fn vertex_id(&self, label: &str) -> Option<usize> {
        self.vertices.iter().position(|l| l == label)
    }

    pub fn layer_id(&self, label: &str) -> Option<usize> {
        self.layers.iter().position(|l| l == label)
    }
}

/// Immutable `n`-vertex, `m`-layer stack of simple graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilayerNetwork {
    n: usize,
    m: usize,
    /// `adjacency[layer][u]`, sorted ascending.
    adjacency: Vec<Vec<Vec<usize>>>,
    /// `degrees[layer][u]`.
    degrees: Vec<Vec<u64>>,
    /// `degrees` as floats, for the scoring loops.
    degree_values: Vec<Vec<f64>>,
    degree_totals: Vec<u64>,
    labels: Option<LabelMap>,
}

impl MultilayerNetwork {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Sorted neighbor list of `u` in `layer`. Panics on out-of-range ids.
    #[inline]
    pub fn neighbors(&self, layer: usize, u: usize) -> &[usize] {
        &self.adjacency[layer][u]
    }

    #[inline]
    pub fn degree(&self, layer: usize, u: usize) -> u64 {
        self.degrees[layer][u]
    }

    pub fn layer_degrees(&self, layer: usize) -> &[u64] {
        &self.degrees[layer]
    }

    /// Degrees of `u` in every layer, indexed by layer.
    #[inline]
    pub fn vertex_degrees(&self, u: usize) -> Vec<u64> {
        self.degrees.iter().map(|d| d[u]).collect()
    }

    #[inline]
    pub(crate) fn degree_values(&self, layer: usize) -> &[f64] {
        &self.degree_values[layer]
    }

    /// `2|E_layer|`.
    #[inline]
    pub fn degree_total(&self, layer: usize) -> u64 {
        self.degree_totals[layer]
    }

    pub fn degree_totals(&self) -> &[u64] {
        &self.degree_totals
    }

    pub fn edge_count(&self, layer: usize) -> usize {
        (self.degree_totals[layer] / 2) as usize
    }

    pub fn total_edges(&self) -> usize {
        (0..self.m).map(|l| self.edge_count(l)).sum()
    }

    pub fn has_edge(&self, layer: usize, u: usize, v: usize) -> bool {
        self.adjacency[layer][u].binary_search(&v).is_ok()
    }

    pub fn labels(&self) -> Option<&LabelMap> {
        self.labels.as_ref()
    }

    /// Neighborhood `N(u, layer)`: vertices adjacent to `u` in `layer`, `u` excluded.
    pub fn neighborhood(&self, u: usize, layer: usize) -> Result<&[usize]> {
        self.check_vertex(u)?;
        self.check_layer(layer)?;
        Ok(&self.adjacency[layer][u])
    }

    pub fn check_vertex(&self, u: usize) -> Result<()> {
        if u >= self.n {
            return Err(MlxError::OutOfBounds {
                what: "vertex",
                id: u,
                limit: self.n,
            });
        }
        Ok(())
    }

    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.m {
            return Err(MlxError::OutOfBounds {
                what: "layer",
                id: layer,
                limit: self.m,
            });
        }
        Ok(())
    }

    /// All edges as `u < v` records sorted by `(layer, u, v)`.
    pub fn edges(&self) -> Vec<EdgeRecord> {
        let mut out = Vec::with_capacity(self.total_edges());
        for (layer, adj) in self.adjacency.iter().enumerate() {
            for (u, nbrs) in adj.iter().enumerate() {
                for &v in nbrs.iter().filter(|&&v| v > u) {
                    out.push(EdgeRecord { layer, u, v });
                }
            }
        }
        out
    }

    /// Canonical text form: one `layer u v` line per edge, sorted, `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for e in self.edges() {
            let _ = writeln!(s, "{} {} {}", e.layer, e.u, e.v);
        }
        s
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    /// Same network with vertex `u` renamed to `perm[u]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<MultilayerNetwork> {
        if perm.len() != self.n {
            return Err(MlxError::InvalidParameter(format!(
                "permutation has length {}, expected {}",
                perm.len(),
                self.n
            )));
        }
        let edges: Vec<EdgeRecord> = self
            .edges()
            .into_iter()
            .map(|e| EdgeRecord::new(e.layer, perm[e.u], perm[e.v]))
            .collect();
        build_network(self.n, self.m, &edges)
    }
}

/// Builds a network from raw records, dropping self-loops and duplicate pairs.
pub fn build_network(n: usize, m: usize, edges: &[EdgeRecord]) -> Result<MultilayerNetwork> {
    build_network_with_report(n, m, edges).map(|(net, _)| net)
}

pub fn build_network_with_report(
    n: usize,
    m: usize,
    edges: &[EdgeRecord],
) -> Result<(MultilayerNetwork, LoadReport)> {
    if n == 0 || m == 0 {
        return Err(MlxError::InvalidParameter(format!(
            "network needs n >= 1 and m >= 1 (got n = {n}, m = {m})"
        )));
    }
    let mut report = LoadReport {
        rows: edges.len(),
        ..LoadReport::default()
    };
    let mut adjacency = vec![vec![Vec::new(); n]; m];
    for e in edges {
        if e.layer >= m {
            return Err(MlxError::OutOfBounds {
                what: "layer",
                id: e.layer,
                limit: m,
            });
        }
        for id in [e.u, e.v] {
            if id >= n {
                return Err(MlxError::OutOfBounds {
                    what: "vertex",
                    id,
                    limit: n,
                });
            }
        }
        if e.u == e.v {
            report.self_loops_dropped += 1;
            continue;
        }
        adjacency[e.layer][e.u].push(e.v);
        adjacency[e.layer][e.v].push(e.u);
    }

    let mut degrees = vec![vec![0u64; n]; m];
    let mut degree_totals = vec![0u64; m];
    let mut doubled_dupes = 0usize;
    for (layer, adj) in adjacency.iter_mut().enumerate() {
        for (u, nbrs) in adj.iter_mut().enumerate() {
            nbrs.sort_unstable();
            let before = nbrs.len();
            nbrs.dedup();
            doubled_dupes += before - nbrs.len();
            degrees[layer][u] = nbrs.len() as u64;
            degree_totals[layer] += nbrs.len() as u64;
        }
    }
    // every duplicate pair was counted once from each endpoint
    report.duplicates_removed = doubled_dupes / 2;

    let degree_values = degrees
        .iter()
        .map(|degs| degs.iter().map(|&d| d as f64).collect())
        .collect();

    Ok((
        MultilayerNetwork {
            n,
            m,
            adjacency,
            degrees,
            degree_values,
            degree_totals,
            labels: None,
        },
        report,
    ))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        Some((i + 1, fields))
    })
}

/// Parses `layer u v` rows from text. Extra columns are ignored.
pub fn parse_edge_list(
    text: &str,
    declared_n: Option<usize>,
    declared_m: Option<usize>,
) -> Result<(MultilayerNetwork, LoadReport)> {
    let mut edges = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() < 3 {
            return Err(MlxError::Parse {
                line,
                message: format!("expected `layer u v`, found {} field(s)", fields.len()),
            });
        }
        let mut ids = [0usize; 3];
        for (slot, tok) in ids.iter_mut().zip(&fields[..3]) {
            *slot = tok.parse().map_err(|_| MlxError::Parse {
                line,
                message: format!("`{tok}` is not a non-negative integer"),
            })?;
        }
        let [layer, u, v] = ids;
        if let Some(dm) = declared_m {
            if layer >= dm {
                return Err(MlxError::OutOfBounds {
                    what: "layer",
                    id: layer,
                    limit: dm,
                });
            }
        }
        if let Some(dn) = declared_n {
            if let Some(&id) = [u, v].iter().find(|&&id| id >= dn) {
                return Err(MlxError::OutOfBounds {
                    what: "vertex",
                    id,
                    limit: dn,
                });
            }
        }
        edges.push(EdgeRecord { layer, u, v });
    }
    if edges.is_empty() {
        return Err(MlxError::EmptyInput);
    }
    let n = declared_n.unwrap_or_else(|| edges.iter().map(|e| e.u.max(e.v)).max().unwrap() + 1);
    let m = declared_m.unwrap_or_else(|| edges.iter().map(|e| e.layer).max().unwrap() + 1);
    build_network_with_report(n, m, &edges)
}

/// Reads an integer edge list from disk.
pub fn load_edge_list(
    path: impl AsRef<Path>,
    declared_n: Option<usize>,
    declared_m: Option<usize>,
) -> Result<(MultilayerNetwork, LoadReport)> {
    let text = fs::read_to_string(path)?;
    parse_edge_list(&text, declared_n, declared_m)
}

/// Parses rows whose layer and vertex fields are arbitrary tokens.
///
/// Ids are assigned densely in order of first appearance and the original
/// tokens are kept in a [`LabelMap`] on the returned network.
pub fn parse_labeled_edge_list(text: &str) -> Result<(MultilayerNetwork, LoadReport)> {
    fn intern<'a>(tok: &'a str, ids: &mut HashMap<&'a str, usize>, names: &mut Vec<String>) -> usize {
        *ids.entry(tok).or_insert_with(|| {
            names.push(tok.to_string());
            names.len() - 1
        })
    }

    let mut layer_ids = HashMap::new();
    let mut vertex_ids = HashMap::new();
    let mut labels = LabelMap::default();
    let mut edges = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() < 3 {
            return Err(MlxError::Parse {
                line,
                message: format!("expected `layer u v`, found {} field(s)", fields.len()),
            });
        }
        let layer = intern(fields[0], &mut layer_ids, &mut labels.layers);
        let u = intern(fields[1], &mut vertex_ids, &mut labels.vertices);
        let v = intern(fields[2], &mut vertex_ids, &mut labels.vertices);
        edges.push(EdgeRecord { layer, u, v });
    }
    if edges.is_empty() {
        return Err(MlxError::EmptyInput);
    }
    let (mut net, report) =
        build_network_with_report(labels.vertices.len(), labels.layers.len(), &edges)?;
    net.labels = Some(labels);
    Ok((net, report))
}

pub fn load_labeled_edge_list(path: impl AsRef<Path>) -> Result<(MultilayerNetwork, LoadReport)> {
    let text = fs::read_to_string(path)?;
    parse_labeled_edge_list(&text)
}
