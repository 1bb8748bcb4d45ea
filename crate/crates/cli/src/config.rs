//! The `jaf` configuration document (TOML) and its layering: file, then
//! `--set` overrides, then named flags and their environment variables.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use jointaction::experiment::{ExperimentConfig, ParticipantVariation};
use jointaction::stats::RankTest;
use jointaction::Scenario;
use jointaction_server::{ServerConfig, SessionConfig, DEFAULT_PORT};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JafConfig {
    pub seed: u64,
    pub scenario: Scenario,
    pub experiment: ExperimentSection,
    pub server: ServerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub participants: u32,
    pub variation: ParticipantVariation,
    /// Worker threads; 0 uses every core, 1 runs serially.
    pub threads: usize,
    pub rank_test: RankTest,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection { participants: 37, variation: ParticipantVariation::default(), threads: 0, rank_test: RankTest::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerSection {
    pub host: String,
    pub port: u16,
    pub tick_hz: f64,
    pub snapshot_interval: f64,
    pub trace_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            tick_hz: 30.0,
            snapshot_interval: 2.0,
            trace_dir: Some(PathBuf::from("traces")),
            static_dir: None,
        }
    }
}

impl JafConfig {
    /// Reads an optional config file and applies `key.path=value` overrides.
    /// Unknown keys are errors.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<JafConfig> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                text.parse::<toml::Table>().with_context(|| format!("invalid TOML in {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut unknown = Vec::new();
        let config: JafConfig =
            serde_ignored::deserialize(toml::Value::Table(doc), |p| unknown.push(p.to_string()))
                .context("config does not match the schema")?;
        if !unknown.is_empty() {
            bail!("unknown config key(s): {}", unknown.join(", "));
        }
        config.scenario.validate().context("invalid scenario")?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            participants: self.experiment.participants,
            seed: self.seed,
            scenario: self.scenario.clone(),
            variation: self.experiment.variation,
            parallel: self.experiment.threads != 1,
        }
    }

    pub fn server_config(&self) -> ServerConfig {
        let s = &self.server;
        ServerConfig {
            host: s.host.clone(),
            port: s.port,
            tick_hz: s.tick_hz,
            trace_dir: s.trace_dir.clone(),
            static_dir: s.static_dir.clone(),
            session: SessionConfig {
                scenario: Scenario { record_gaze: true, ..self.scenario.clone() },
                default_seed: self.seed,
                snapshot_interval: s.snapshot_interval,
            },
        }
    }
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as TOML and
/// falls back to a plain string, so `--set scenario.condition=ar` works
/// without quotes.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override {assignment:?} is not of the form key.path=value");
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("override {assignment:?} has an empty key segment");
    }
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut table = doc;
    for p in parents {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override {assignment:?}: {p} is not a table"),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}
