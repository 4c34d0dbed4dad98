//! Run configuration: mechanism fields at top level plus optional sections.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

use mia_core::model::MechanismConfig;
use mia_core::quality::OracleConfig;
use mia_core::strategy::SimulationConfig;

const SECTIONS: [&str; 2] = ["oracle", "simulation"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub mechanism: MechanismConfig,
    pub oracle: OracleConfig,
    pub simulation: SimulationConfig,
}

fn section<T: serde::de::DeserializeOwned + Default>(map: &mut Map<String, Value>, name: &str) -> Result<T> {
    match map.remove(name) {
        Some(v) => serde_json::from_value(v).with_context(|| format!("invalid \"{name}\" section")),
        None => Ok(T::default()),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let Value::Object(mut map) = serde_json::from_str(text).context("config is not valid JSON")? else {
        bail!("config must be a JSON object");
    };
    let oracle = section(&mut map, SECTIONS[0])?;
    let simulation = section(&mut map, SECTIONS[1])?;
    let Value::Object(known) = serde_json::to_value(MechanismConfig::default())? else {
        unreachable!("mechanism config serializes to an object");
    };
    let known: BTreeSet<&String> = known.keys().collect();
    let unknown: Vec<&String> = map.keys().filter(|k| !known.contains(k)).collect();
    if !unknown.is_empty() {
        bail!("unknown config fields: {unknown:?}");
    }
    let mechanism: MechanismConfig = serde_json::from_value(Value::Object(map)).context("invalid mechanism fields")?;
    mechanism.validate()?;
    Ok(RunConfig {
        mechanism,
        oracle,
        simulation,
    })
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            parse_config(&text).with_context(|| format!("config {}", p.display()))
        }
        None => Ok(RunConfig::default()),
    }
}
