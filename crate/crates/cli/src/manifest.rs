use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::FileConfig;
use crate::error::{CliError, CliResult};
use crate::Context;

/// Record of one command invocation: the effective configuration, inputs,
/// outputs and headline counts. Contains no timestamps, so reruns with the
/// same arguments produce the same bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub backend_profile: &'a str,
    pub resume: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_file: Option<String>,
    pub config: &'a FileConfig,
    pub inputs: BTreeMap<&'static str, String>,
    pub outputs: BTreeMap<&'static str, String>,
    pub counts: BTreeMap<&'static str, Value>,
}

impl<'a> RunManifest<'a> {
    pub fn new(ctx: &'a Context, command: &'a str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: ctx.cfg.seed,
            backend_profile: &ctx.cfg.backend_profile,
            resume: ctx.resume,
            config_file: ctx.config_path.as_ref().map(|p| p.display().to_string()),
            config: &ctx.cfg,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
        }
    }

    pub fn input(mut self, name: &'static str, path: &Path) -> Self {
        self.inputs.insert(name, path.display().to_string());
        self
    }

    pub fn output(mut self, name: &'static str, path: &Path) -> Self {
        self.outputs.insert(name, path.display().to_string());
        self
    }

    pub fn count(mut self, name: &'static str, value: impl Into<Value>) -> Self {
        self.counts.insert(name, value.into());
        self
    }

    pub fn write(&self, ctx: &Context) -> CliResult<()> {
        let path = ctx.out_dir.join(format!("manifest-{}.json", self.command));
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::invalid(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
