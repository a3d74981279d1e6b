//! Run configuration files.
//!
//! ```toml
//! [run]
//! preset = "oscillatory-1-cacc"   # or an inline [scenario] table
//! out = "out"
//! formats = ["trace-csv", "summary", "plot-data"]
//! seed = 7
//!
//! [set]                           # deep-merged over the scenario
//! mu = 0.5
//! acc.h = 0.8
//!
//! [[sweep]]
//! key = "acc.h"
//! values = [0.6, 1.1]
//! ```

use std::path::PathBuf;

use platoon_core::error::SimError;
use platoon_core::scenario::ScenarioSpec;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::presets;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    TraceCsv,
    Summary,
    PlotData,
}

pub const ALL_FORMATS: [OutputFormat; 3] = [OutputFormat::TraceCsv, OutputFormat::Summary, OutputFormat::PlotData];

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Preset(String),
    Inline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ScenarioSource,
    /// Scenario with `[set]` overrides applied.
    pub base: ScenarioSpec,
    pub out: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
    pub seed: Option<u64>,
    pub sweep: Vec<SweepAxis>,
}

/// One concrete run produced by expanding the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Sub-directory label, `None` without a sweep.
    pub label: Option<String>,
    pub spec: ScenarioSpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    preset: Option<String>,
    out: Option<PathBuf>,
    formats: Option<Vec<OutputFormat>>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    key: String,
    values: Vec<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    run: RawRun,
    scenario: Option<Table>,
    #[serde(default)]
    set: Table,
    #[serde(default)]
    sweep: Vec<RawAxis>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn sim_err(section: &str, e: SimError) -> CliError {
    match e {
        SimError::Config { key, reason } if section.is_empty() => config_err(format!("{key}: {reason}")),
        SimError::Config { key, reason } => config_err(format!("{section}.{key}: {reason}")),
        other => config_err(other.to_string()),
    }
}

/// Validate with offending keys reported by their full dotted path.
pub fn validate_spec(spec: &ScenarioSpec) -> Result<(), CliError> {
    spec.acc.validate().map_err(|e| sim_err("acc", e))?;
    spec.addons.validate().map_err(|e| sim_err("addons", e))?;
    spec.grip.validate().map_err(|e| sim_err("grip", e))?;
    spec.channel.validate().map_err(|e| sim_err("channel", e))?;
    spec.lead.validate().map_err(|e| sim_err("lead", e))?;
    spec.validate().map_err(|e| sim_err("", e))
}

fn spec_to_table(spec: &ScenarioSpec) -> Table {
    match Value::try_from(spec).expect("scenario specs always serialize") {
        Value::Table(t) => t,
        _ => unreachable!("struct serializes to a table"),
    }
}

fn table_to_spec(table: Table) -> Result<ScenarioSpec, CliError> {
    let spec: ScenarioSpec = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| config_err(format!("scenario: {}", e.message())))?;
    validate_spec(&spec)?;
    Ok(spec)
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(dst)), Value::Table(src)) => merge(dst, src),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Set a dotted key. Intermediate tables must exist; unknown leaves are
/// caught when the table is turned back into a spec.
fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| config_err(format!("empty key `{key}`")))?;
    let mut cur = table;
    for p in parts {
        cur = match cur.get_mut(p) {
            Some(Value::Table(t)) => t,
            _ => return Err(config_err(format!("sweep key `{key}`: no such config section `{p}`"))),
        };
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

fn label_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;

    let (source, mut table) = match (raw.run.preset, raw.scenario) {
        (Some(_), Some(_)) => return Err(config_err("`run.preset` and `[scenario]` are mutually exclusive")),
        (None, None) => return Err(config_err("missing required key: `run.preset` or a `[scenario]` table")),
        (Some(name), None) => {
            let spec = presets::preset(&name).ok_or_else(|| config_err(format!("run.preset: unknown preset `{name}`")))?;
            (ScenarioSource::Preset(name), spec_to_table(&spec))
        }
        (None, Some(t)) => (ScenarioSource::Inline, t),
    };
    merge(&mut table, raw.set);
    let base = table_to_spec(table)?;

    let sweep = raw
        .sweep
        .into_iter()
        .map(|a| {
            if a.values.is_empty() {
                return Err(config_err(format!("sweep `{}`: values must not be empty", a.key)));
            }
            Ok(SweepAxis { key: a.key, values: a.values })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let cfg = RunConfig {
        source,
        base,
        out: raw.run.out,
        formats: raw.run.formats.unwrap_or_else(|| ALL_FORMATS.to_vec()),
        seed: raw.run.seed,
        sweep,
    };
    cfg.expand()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self, CliError> {
        let base = presets::preset(name).ok_or_else(|| config_err(format!("unknown preset `{name}`")))?;
        Ok(RunConfig {
            source: ScenarioSource::Preset(name.to_string()),
            base,
            out: None,
            formats: ALL_FORMATS.to_vec(),
            seed: None,
            sweep: Vec::new(),
        })
    }

    /// Cartesian product of the sweep axes, first axis slowest.
    pub fn expand(&self) -> Result<Vec<RunPlan>, CliError> {
        let mut base = self.base.clone();
        if let Some(seed) = self.seed {
            base.seed = seed;
        }
        if self.sweep.is_empty() {
            return Ok(vec![RunPlan { label: None, spec: base }]);
        }
        let base_table = spec_to_table(&base);
        let total: usize = self.sweep.iter().map(|a| a.values.len()).product();
        let mut plans = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut picks = vec![0; self.sweep.len()];
            for (slot, axis) in picks.iter_mut().zip(&self.sweep).rev() {
                *slot = idx % axis.values.len();
                idx /= axis.values.len();
            }
            let mut table = base_table.clone();
            let mut label = Vec::new();
            for (axis, &i) in self.sweep.iter().zip(&picks) {
                let value = axis.values[i].clone();
                label.push(format!("{}={}", axis.key, label_value(&value)));
                set_dotted(&mut table, &axis.key, value)?;
            }
            let spec = table_to_spec(table).map_err(|e| config_err(format!("sweep point {}: {e}", label.join(","))))?;
            plans.push(RunPlan { label: Some(label.join("_")), spec });
        }
        Ok(plans)
    }
}

#[derive(Serialize)]
struct InlineFile<'a> {
    scenario: &'a ScenarioSpec,
}

/// A config file that reproduces `spec` exactly.
pub fn render_config(spec: &ScenarioSpec) -> String {
    toml::to_string(&InlineFile { scenario: spec }).expect("scenario specs always serialize")
}
