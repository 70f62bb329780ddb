use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

/// Written next to every output so a run can be repeated from it alone.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub execution: openloop::Execution,
    pub inputs: BTreeMap<&'static str, String>,
    pub outputs: BTreeMap<&'static str, String>,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, seed: u64, execution: openloop::Execution, config: impl Serialize) -> Self {
        RunManifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            execution,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: serde_json::to_value(config).expect("config serializes"),
            input_dim: None,
        }
    }

    pub fn input(mut self, key: &'static str, path: &Path) -> Self {
        self.inputs.insert(key, path.display().to_string());
        self
    }

    pub fn output(mut self, key: &'static str, path: &Path) -> Self {
        self.outputs.insert(key, path.display().to_string());
        self
    }
}
