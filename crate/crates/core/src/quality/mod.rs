//! Deterministic quality oracle.
//!
//! Scores a dataset on cleanliness, cluster diversity, novelty and metadata
//! richness, and combines them into a composite `q ∈ [0, 1]`. Every report
//! carries a digest of the oracle parameters and of the scored content, so
//! anyone holding both can recompute it bit for bit.

mod cluster;
mod embed;
mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use cluster::{kmeans, Clustering};
pub use embed::{cosine, embed, embed_text, Embedding, EmbeddingConfig};
pub use metrics::{
    cleanliness, count_errors, diversity, diversity_from_proportions, duplication_score,
    is_error_token, metadata_richness, novelty, recency, DiversityMode,
};

use crate::canonical::digest_of;
use crate::error::{Error, Result};
use crate::model::{AgentId, DatasetDescriptor, Document};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub agent_id: AgentId,
    pub cleanliness: f64,
    pub diversity: f64,
    pub novelty: f64,
    pub metadata_richness: f64,
    pub composite: f64,
    pub params_hash: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// `k` in `1 − min(1, k·error_rate)`.
    pub cleanliness_scale: f64,
    /// Vocabulary for the out-of-dictionary check; disabled when absent.
    pub wordlist: Option<Vec<String>>,
    pub embedding: EmbeddingConfig,
    pub diversity_mode: DiversityMode,
    pub reference_documents: Vec<String>,
    pub current_date: Option<NaiveDate>,
    pub max_date_range_days: u32,
    pub expected_fields: Vec<String>,
    pub quality_weights: [f64; 4],
    pub novelty_weights: [f64; 2],
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cleanliness_scale: 50.0,
            wordlist: None,
            embedding: EmbeddingConfig::default(),
            diversity_mode: DiversityMode::ShannonNormalized,
            reference_documents: Vec::new(),
            current_date: None,
            max_date_range_days: 3650,
            expected_fields: ["source", "date", "language", "license", "author"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            quality_weights: [0.25; 4],
            novelty_weights: [0.5, 0.5],
        }
    }
}

/// Composite `Σ w_k·sub_k`.
pub fn composite(sub_scores: [f64; 4], weights: [f64; 4]) -> f64 {
    sub_scores
        .iter()
        .zip(weights)
        .map(|(s, w)| s * w)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

#[derive(Serialize)]
struct CanonicalDataset<'a> {
    id: &'a str,
    documents: Vec<Document>,
    metadata: &'a BTreeMap<String, Option<String>>,
}

/// Digest of the dataset's canonical serialization.
pub fn content_hash(dataset: &DatasetDescriptor) -> Result<String> {
    digest_of(&CanonicalDataset {
        id: dataset.id(),
        documents: dataset
            .documents()
            .iter()
            .map(|d| Document::new(normalize_newlines(&d.text), d.date))
            .collect(),
        metadata: dataset.metadata(),
    })
}

/// An [`OracleConfig`] with its reference corpus embedded once.
#[derive(Debug, Clone)]
pub struct Oracle {
    config: OracleConfig,
    current_date: NaiveDate,
    wordlist: Option<BTreeSet<String>>,
    reference: Vec<Vec<f64>>,
    params_hash: String,
}

impl Oracle {
    pub fn new(config: OracleConfig) -> Result<Self> {
        config.embedding.validate()?;
        let current_date = config
            .current_date
            .ok_or_else(|| Error::config("oracle current_date is not set"))?;
        if !(config.cleanliness_scale > 0.0 && config.cleanliness_scale.is_finite()) {
            return Err(Error::config("cleanliness_scale must be positive"));
        }
        for (name, w) in [
            ("quality_weights", &config.quality_weights[..]),
            ("novelty_weights", &config.novelty_weights[..]),
        ] {
            if w.iter().any(|x| *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("{name} must be non-negative and sum to 1")));
            }
        }
        if config.reference_documents.is_empty() {
            return Err(Error::config("oracle reference corpus is empty"));
        }
        let reference = embed(&config.reference_documents, &config.embedding)
            .into_iter()
            .map(|e| e.vector)
            .collect();
        let wordlist = config
            .wordlist
            .as_ref()
            .map(|w| w.iter().map(|s| s.to_lowercase()).collect());
        let params_hash = digest_of(&config)?;
        Ok(Self {
            config,
            current_date,
            wordlist,
            reference,
            params_hash,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn params_hash(&self) -> &str {
        &self.params_hash
    }

    pub fn score(&self, dataset: &DatasetDescriptor) -> Result<QualityReport> {
        let cfg = &self.config;
        let clean = cleanliness(dataset, cfg.cleanliness_scale, self.wordlist.as_ref())?;
        let div = diversity(dataset, &cfg.embedding, cfg.diversity_mode)?;
        let nov = novelty(
            dataset,
            &self.reference,
            self.current_date,
            cfg.max_date_range_days,
            cfg.novelty_weights,
            &cfg.embedding,
        )?;
        let meta = metadata_richness(dataset, &cfg.expected_fields)?;
        Ok(QualityReport {
            agent_id: dataset.id().to_owned(),
            cleanliness: clean,
            diversity: div,
            novelty: nov,
            metadata_richness: meta,
            composite: composite([clean, div, nov, meta], cfg.quality_weights),
            params_hash: self.params_hash.clone(),
            content_hash: content_hash(dataset)?,
        })
    }
}

/// One-shot scoring; build an [`Oracle`] to score many datasets.
pub fn score(dataset: &DatasetDescriptor, config: &OracleConfig) -> Result<QualityReport> {
    Oracle::new(config.clone())?.score(dataset)
}
