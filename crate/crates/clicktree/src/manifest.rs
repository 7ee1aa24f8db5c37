//! Run manifests: what was run, with which resolved configuration, on which
//! files.
//!
//! Written as `key = value` lines. Run metadata uses the `manifest.` prefix,
//! which the config parser skips, and the resolved configuration follows
//! unprefixed, so `--config run.manifest` repeats the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::{RunConfig, MANIFEST_PREFIX};
use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Command options other than the model configuration.
    pub options: BTreeMap<String, String>,
    /// Resolved model configuration.
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            seed: None,
            options: BTreeMap::new(),
            config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn with_config(mut self, run: &RunConfig) -> Self {
        self.seed = Some(run.simulation.seed);
        self.config = run.pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        if let Some(rate) = run.noise_rate_cps {
            self.options.insert("noise_rate_cps".into(), rate.to_string());
        }
        self
    }

    pub fn option(mut self, key: &str, value: impl ToString) -> Self {
        self.options.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = MANIFEST_PREFIX;
        let _ = writeln!(out, "{p}command = {}", self.command);
        let _ = writeln!(out, "{p}tool_version = {}", self.tool_version);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "{p}seed = {seed}");
        }
        for (k, v) in &self.options {
            let _ = writeln!(out, "{p}option.{k} = {v}");
        }
        for path in &self.inputs {
            let _ = writeln!(out, "{p}input = {path}");
        }
        for path in &self.outputs {
            let _ = writeln!(out, "{p}output = {path}");
        }
        let _ = writeln!(out, "{p}wall_clock_s = {:.6}", self.wall_clock_s);
        for (k, v) in &self.config {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::File { path: path.into(), source })
    }
}

/// The manifest path accompanying an output file: `<output>.manifest`.
pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    name.into()
}
