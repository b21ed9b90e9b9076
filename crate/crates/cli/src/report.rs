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

//! The per-run report emitted by every command.

use std::path::Path;

use mlx_core::network::LoadReport;
use mlx_core::ExtractionConfig;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Default, Serialize)]
pub struct Counts {
    pub seeds: usize,
    pub candidates: usize,
    pub kept: usize,
    pub background: usize,
    pub degenerate_seeds: usize,
    pub failed_seeds: usize,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: &'static str,
    pub config: ExtractionConfig,
    pub params: Map<String, Value>,
    pub timings_ms: Map<String, Value>,
    pub counts: Counts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadReport>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: &ExtractionConfig) -> Self {
        RunReport {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
            params: Map::new(),
            timings_ms: Map::new(),
            counts: Counts::default(),
            load: None,
            warnings: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn timing(&mut self, key: &str, ms: u128) {
        self.timings_ms.insert(key.to_string(), Value::from(ms as u64));
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    /// Writes the report to `path`, or to standard error.
    pub fn emit(&self, path: Option<&Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)? + "\n";
        match path {
            Some(p) => std::fs::write(p, text),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}
