//! JSONL inputs with line-numbered diagnostics.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use mia_core::model::{token_count, AgentId, DatasetDescriptor, Document};
use mia_core::utility::{AgentData, Example};

/// Parses every non-blank line of a JSONL file.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: invalid record", path.display(), k + 1)))
        .collect()
}

/// One corpus line: an agent's report and its documents.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusLine {
    pub agent_id: AgentId,
    pub reported_cost: f64,
    #[serde(default)]
    pub true_cost: Option<f64>,
    pub documents: Vec<Document>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl CorpusLine {
    pub fn dataset(&self) -> DatasetDescriptor {
        let metadata = self
            .metadata
            .iter()
            .map(|(k, v)| {
                let value = match v {
                    Value::Null => None,
                    Value::String(s) => Some(s.clone()),
                    other => Some(other.to_string()),
                };
                (k.clone(), value)
            })
            .collect();
        DatasetDescriptor::new(self.agent_id.clone(), self.documents.clone(), metadata)
    }
}

/// A reports-table row; corpus lines are accepted too.
#[derive(Debug, Clone, Deserialize)]
pub struct ReportLine {
    pub agent_id: AgentId,
    pub reported_cost: f64,
    #[serde(default)]
    pub true_cost: Option<f64>,
    #[serde(default)]
    pub token_count: Option<u64>,
    #[serde(default)]
    pub documents: Option<Vec<Document>>,
}

impl ReportLine {
    pub fn volume(&self) -> Option<u64> {
        self.token_count
            .or_else(|| self.documents.as_ref().map(|d| d.iter().map(|d| token_count(&d.text)).sum()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataLine {
    pub agent_id: AgentId,
    pub examples: Vec<Example>,
}

impl From<DataLine> for AgentData {
    fn from(l: DataLine) -> Self {
        AgentData {
            agent_id: l.agent_id,
            examples: l.examples,
        }
    }
}

/// Examples given either as one JSON array or as JSONL.
pub fn read_examples(path: &Path) -> Result<Vec<Example>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("{}: invalid example array", path.display()));
    }
    read_jsonl(path)
}

/// Errors unless every table covers the same agent ids.
pub fn check_ids<'a>(tables: &[(&str, Vec<&'a str>)]) -> Result<()> {
    use std::collections::BTreeSet;
    for (name, ids) in tables {
        let unique: BTreeSet<&str> = ids.iter().copied().collect();
        if unique.len() != ids.len() {
            bail!("{name} lists an agent id more than once");
        }
    }
    let all: BTreeSet<&str> = tables.iter().flat_map(|(_, ids)| ids.iter().copied()).collect();
    let mut problems = Vec::new();
    for (name, ids) in tables {
        let have: BTreeSet<&str> = ids.iter().copied().collect();
        let missing: Vec<&str> = all.difference(&have).copied().collect();
        if !missing.is_empty() {
            problems.push(format!("{name} is missing {}", missing.join(", ")));
        }
    }
    if !problems.is_empty() {
        bail!("agent ids differ across inputs (orphans): {}", problems.join("; "));
    }
    Ok(())
}
