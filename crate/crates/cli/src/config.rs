//! Experiment configuration files.
//!
//! A file is a JSON object with `schema_version`, optional run settings
//! (`trials`, `seed`, `out`, `emit`) and either a complete experiment or a
//! `scenario` preset whose fields are overridden by the rest of the object.
//! Unknown fields are rejected.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use reprocs_core::ExperimentConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::failure::{CliResult, Failure};

pub const SCHEMA_VERSION: u64 = 1;

/// Output kinds a run may write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Svg,
    Json,
    /// Dense sparse-part estimates, one `RPCA` file per trial.
    Xhat,
}

pub const DEFAULT_EMIT: [Emit; 3] = [Emit::Csv, Emit::Svg, Emit::Json];

/// Run settings a file may carry; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub emit: Option<Vec<Emit>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub scenario: Option<String>,
    pub experiment: ExperimentConfig,
    pub settings: FileSettings,
}

pub fn preset(name: &str) -> CliResult<ExperimentConfig> {
    ExperimentConfig::preset(name).ok_or_else(|| {
        Failure::config(format!(
            "unknown scenario {name:?} (expected one of {})",
            ExperimentConfig::PRESETS.join(", ")
        ))
    })
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn parse(text: &str) -> CliResult<Loaded> {
    let value: Value = serde_json::from_str(text).map_err(|e| Failure::config(format!("config is not valid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(Failure::config("config must be a JSON object"));
    };
    match obj.remove("schema_version") {
        Some(Value::Number(v)) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(Failure::config(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"))),
        None => return Err(Failure::config("config lacks schema_version")),
    }
    let mut settings = Map::new();
    for key in ["trials", "seed", "out", "emit"] {
        if let Some(v) = obj.remove(key) {
            settings.insert(key.into(), v);
        }
    }
    let settings: FileSettings =
        serde_json::from_value(Value::Object(settings)).map_err(|e| Failure::config(format!("invalid run settings: {e}")))?;
    if settings.trials == Some(0) {
        return Err(Failure::config("trials must be at least 1"));
    }
    let (scenario, merged) = match obj.remove("scenario") {
        Some(Value::String(name)) => {
            let mut base = serde_json::to_value(preset(&name)?).expect("presets serialize");
            merge(&mut base, Value::Object(obj));
            (Some(name), base)
        }
        Some(other) => return Err(Failure::config(format!("scenario must be a preset name, got {other}"))),
        None => (None, Value::Object(obj)),
    };
    let experiment: ExperimentConfig =
        serde_json::from_value(merged).map_err(|e| Failure::config(format!("invalid config: {e}")))?;
    experiment.validate()?;
    Ok(Loaded {
        scenario,
        experiment,
        settings,
    })
}

pub fn load(path: &Path) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(e).context(format!("reading {}", path.display())))?;
    parse(&text).map_err(|f| f.context(format!("in {}", path.display())))
}

/// The experiment as a self-contained file body.
pub fn to_file_value(cfg: &ExperimentConfig) -> Value {
    let mut obj = Map::new();
    obj.insert("schema_version".into(), SCHEMA_VERSION.into());
    if let Value::Object(fields) = serde_json::to_value(cfg).expect("config serializes") {
        obj.extend(fields);
    }
    Value::Object(obj)
}
