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

//! End-to-end runs: extraction, refinement and the community document.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{MlxError, Result};
use crate::extraction::{extract_all, with_workers, Community, ExtractionConfig, ExtractionRun};
use crate::metrics::background_vertices;
use crate::network::MultilayerNetwork;
use crate::refinement::{
    beta_grid, default_beta, refine_fixed, RefinementResult, BETA_GRID_POINTS,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaChoice {
    /// Stable-window rule over the 0.00..1.00 grid.
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for BetaChoice {
    type Err = MlxError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(BetaChoice::Auto);
        }
        let beta: f64 = s
            .parse()
            .map_err(|_| MlxError::InvalidParameter(format!("beta `{s}` is not a number or `auto`")))?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(MlxError::InvalidParameter(format!("beta = {beta} outside [0, 1]")));
        }
        Ok(BetaChoice::Fixed(beta))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub extraction_ms: u128,
    pub refinement_ms: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub extraction: ExtractionRun,
    pub refinement: RefinementResult,
    pub background: Vec<usize>,
    pub timings: PhaseTimings,
}

impl PipelineOutput {
    pub fn communities(&self) -> &[Community] {
        &self.refinement.kept
    }

    pub fn document(&self) -> CommunitiesDoc {
        CommunitiesDoc {
            communities: self.refinement.kept.clone(),
            background: self.background.clone(),
            beta: self.refinement.beta_used,
        }
    }
}

/// Extraction from every seed followed by refinement.
pub fn run_pipeline(
    net: &MultilayerNetwork,
    config: &ExtractionConfig,
    beta: BetaChoice,
) -> Result<PipelineOutput> {
    let started = Instant::now();
    let extraction = extract_all(net, config)?;
    let extraction_ms = started.elapsed().as_millis();

    let started = Instant::now();
    let candidates = &extraction.communities;
    let refinement = match beta {
        BetaChoice::Fixed(b) => refine_fixed(candidates, b)?,
        BetaChoice::Auto if candidates.is_empty() => RefinementResult {
            kept: Vec::new(),
            beta_used: 0.0,
            beta_profile: (0..BETA_GRID_POINTS).map(|i| (beta_grid(i), 0)).collect(),
        },
        BetaChoice::Auto => with_workers(config.worker_count, || default_beta(candidates))?,
    };
    let refinement_ms = started.elapsed().as_millis();

    let background = background_vertices(net.n(), &refinement.kept);
    Ok(PipelineOutput {
        extraction,
        refinement,
        background,
        timings: PhaseTimings {
            extraction_ms,
            refinement_ms,
        },
    })
}

/// Output document: communities score-descending, ids ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunitiesDoc {
    pub communities: Vec<Community>,
    pub background: Vec<usize>,
    pub beta: f64,
}

impl CommunitiesDoc {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: CommunitiesDoc = serde_json::from_str(text)?;
        for c in &mut doc.communities {
            c.vertices.sort_unstable();
            c.layers.sort_unstable();
        }
        doc.background.sort_unstable();
        Ok(doc)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        CommunitiesDoc::from_json(&fs::read_to_string(path)?)
    }
}
