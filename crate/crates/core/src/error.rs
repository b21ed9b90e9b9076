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

use std::io;

use thiserror::Error;

/// Errors produced anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum MlxError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{what} id {id} out of bounds (limit {limit})")]
    OutOfBounds {
        what: &'static str,
        id: usize,
        limit: usize,
    },

    #[error("input contains no edges or declarations")]
    EmptyInput,

    #[error("layer set is empty; score undefined")]
    EmptyLayerSet,

    #[error("vertex set has {0} members, need at least 2")]
    SetTooSmall(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vertex search exceeded {limit} iterations (|B| = {}, |L| = {})", vertices.len(), layers.len())]
    IterationGuard {
        limit: usize,
        vertices: Vec<usize>,
        layers: Vec<usize>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MlxError>;
