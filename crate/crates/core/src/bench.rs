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

//! Parameter sweeps over the synthetic experiments.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{MlxError, Result};
use crate::extraction::ExtractionConfig;
use crate::metrics::{coverage, match_score, VertexFamily};
use crate::pipeline::{run_pipeline, BetaChoice};
use crate::simgen::{
    generate_embedded, generate_msbm, generate_persistence, msbm_params, GroundTruth, RngSeed,
};
use crate::network::MultilayerNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "experiment")]
pub enum Experiment {
    /// Swept parameter: within-block excess `r`.
    Msbm { n: usize, m: usize, k: usize },
    /// Swept parameter: persistence `tau`.
    Persistence { n: usize, m: usize, k: usize },
    /// Swept parameter: embedded fraction.
    Embedded { n: usize, m: usize },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Msbm { .. } => "msbm",
            Experiment::Persistence { .. } => "persistence",
            Experiment::Embedded { .. } => "embedded",
        }
    }

    /// Metric reported per replicate.
    pub fn metric(&self) -> &'static str {
        match self {
            Experiment::Embedded { .. } => "coverage",
            _ => "match",
        }
    }

    pub fn generate(&self, value: f64, seed: RngSeed) -> Result<(MultilayerNetwork, GroundTruth)> {
        match *self {
            Experiment::Msbm { n, m, k } => generate_msbm(n, m, &msbm_params(k, value, m)?, seed),
            Experiment::Persistence { n, m, k } => generate_persistence(n, m, value, k, seed),
            Experiment::Embedded { n, m } => generate_embedded(n, m, value, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub values: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub config: ExtractionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub parameter: f64,
    pub replicate: usize,
    pub metric: &'static str,
    pub value: f64,
    pub communities: usize,
    pub runtime_ms: u128,
}

/// Per-replicate generator seed derived from the sweep seed.
pub fn replicate_seed(seed: u64, value_index: usize, replicate: usize) -> RngSeed {
    let mut x = seed
        ^ (value_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (replicate as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    RngSeed(x ^ (x >> 31))
}

/// Agreement of detected vertex sets with the planted ones: match for block
/// experiments, coverage of the planted set for the embedded experiment.
/// An empty detection scores 0.
pub fn evaluate(experiment: &Experiment, detected: &VertexFamily, truth: &GroundTruth) -> Result<f64> {
    if detected.is_empty() {
        return Ok(0.0);
    }
    let planted = truth.vertex_family()?;
    match experiment {
        Experiment::Embedded { .. } => coverage(&planted, detected),
        _ => match_score(detected, &planted),
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<BenchRow>> {
    if spec.values.is_empty() || spec.replicates == 0 {
        return Err(MlxError::InvalidParameter(
            "sweep needs at least one value and one replicate".into(),
        ));
    }
    let mut rows = Vec::with_capacity(spec.values.len() * spec.replicates);
    for (vi, &value) in spec.values.iter().enumerate() {
        for rep in 0..spec.replicates {
            let (net, truth) = spec.experiment.generate(value, replicate_seed(spec.seed, vi, rep))?;
            let started = Instant::now();
            let out = run_pipeline(&net, &spec.config, BetaChoice::Auto)?;
            let runtime_ms = started.elapsed().as_millis();
            let detected = VertexFamily::from_communities(out.communities())?;
            rows.push(BenchRow {
                parameter: value,
                replicate: rep,
                metric: spec.experiment.metric(),
                value: evaluate(&spec.experiment, &detected, &truth)?,
                communities: out.communities().len(),
                runtime_ms,
            });
        }
    }
    Ok(rows)
}

pub const BENCH_HEADER: &str = "parameter\treplicate\tmetric\tvalue\tcommunities\truntime_ms";

pub fn rows_tsv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.parameter, r.replicate, r.metric, r.value, r.communities, r.runtime_ms
        );
    }
    s
}

/// `start, start + step, ...` up to `end` inclusive, rounded to 1e-9.
pub fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || end < start {
        return Err(MlxError::InvalidParameter(format!(
            "bad range {start}..{end} step {step}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}
