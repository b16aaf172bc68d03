use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: &str = "1.0";

/// Where the data came from. Everything needed to repeat the run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    pub flags: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

/// Top-level machine report. Only `timing` varies between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub tool: Tool,
    pub command: String,
    pub inputs: Inputs,
    pub results: serde_json::Value,
    pub warnings: Vec<String>,
    /// Wall-clock milliseconds per stage.
    pub timing: BTreeMap<String, f64>,
    pub exit_code: i32,
}

impl Report {
    pub fn new(command: &str, inputs: Inputs) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool: Tool {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
            },
            command: command.to_string(),
            inputs,
            results: serde_json::Value::Null,
            warnings: Vec::new(),
            timing: BTreeMap::new(),
            exit_code: 0,
        }
    }

    /// Runs `f`, recording its duration under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timing
            .insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
