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

//! Multilayer Extraction: detection of densely connected vertex-layer
//! communities in multilayer networks.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`network`]: the immutable multilayer graph and edge-list ingestion.
//! * [`scoring`]: set modularity, the multilayer score, incremental deltas
//!   and the block-model population score.
//! * [`extraction`]: neighborhood seeding and the alternating layer/vertex
//!   ascent to a local maximum.
//! * [`refinement`]: overlap-controlled selection and automatic `beta`.
//! * [`metrics`]: coverage, match, misclassification and background.
//! * [`simgen`]: synthetic networks with planted ground truth.
//! * [`pipeline`] and [`bench`]: end-to-end runs and parameter sweeps.

pub mod bench;
pub mod error;
pub mod extraction;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod refinement;
pub mod scoring;
pub mod simgen;

pub use error::{MlxError, Result};
pub use extraction::{
    extract, extract_all, layer_set_search, seed_sets, vertex_set_search, CandidateScope,
    Community, ExtractionConfig, ExtractionRun, Neighborhood, SeedPolicy,
};
pub use metrics::{
    background_vertices, coverage, match_score, misclassification_error, VertexFamily,
};
pub use network::{
    build_network, load_edge_list, parse_edge_list, EdgeRecord, LoadReport, MultilayerNetwork,
};
pub use pipeline::{run_pipeline, BetaChoice, CommunitiesDoc, PipelineOutput};
pub use refinement::{default_beta, jaccard_match, refine, RefinementResult};
pub use scoring::{
    multilayer_score, population_modularity, population_score, score_delta, set_modularity,
    MsbmParams, ScalingPolicy, ScoreState,
};
pub use simgen::{
    generate_embedded, generate_msbm, generate_persistence, generate_testbed, GroundTruth,
    RngSeed, TestbedCase,
};
