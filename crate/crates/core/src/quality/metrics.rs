//! The four quality sub-scores.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::cluster::kmeans;
use super::embed::{cosine, embed_text, EmbeddingConfig};
use crate::canonical::sha256_hex;
use crate::error::{Error, Result};
use crate::model::{tokenize, DatasetDescriptor};

/// Longest tolerated run of one repeated character.
const MAX_CHAR_RUN: usize = 4;
/// Letter-digit tokens longer than this are treated as corruption.
const MAX_MIXED_TOKEN_LEN: usize = 12;

fn has_non_printable(token: &str) -> bool {
    token.chars().any(|c| c.is_control() || c == '\u{fffd}')
}

fn is_long_mixed(token: &str) -> bool {
    token.chars().count() > MAX_MIXED_TOKEN_LEN
        && token.chars().any(char::is_alphabetic)
        && token.chars().any(char::is_numeric)
}

fn has_long_run(token: &str) -> bool {
    let mut run = 0;
    let mut prev = None;
    for c in token.chars() {
        run = if prev == Some(c) { run + 1 } else { 1 };
        if run > MAX_CHAR_RUN {
            return true;
        }
        prev = Some(c);
    }
    false
}

fn out_of_vocabulary(token: &str, wordlist: &BTreeSet<String>) -> bool {
    let word = token.trim_matches(|c: char| !c.is_alphanumeric());
    word.chars().any(char::is_alphabetic) && !wordlist.contains(word)
}

/// Whether a normalized token counts as one error.
pub fn is_error_token(token: &str, wordlist: Option<&BTreeSet<String>>) -> bool {
    has_non_printable(token)
        || is_long_mixed(token)
        || has_long_run(token)
        || wordlist.is_some_and(|w| out_of_vocabulary(token, w))
}

pub fn count_errors(dataset: &DatasetDescriptor, wordlist: Option<&BTreeSet<String>>) -> u64 {
    dataset
        .documents()
        .iter()
        .flat_map(|d| tokenize(&d.text))
        .filter(|t| is_error_token(t, wordlist))
        .count() as u64
}

/// `clamp(1 − k·errors/tokens, 0, 1)`.
pub fn cleanliness(
    dataset: &DatasetDescriptor,
    scale_k: f64,
    wordlist: Option<&BTreeSet<String>>,
) -> Result<f64> {
    if dataset.token_count() == 0 {
        return Err(Error::data(format!("dataset {} has no tokens", dataset.id())));
    }
    let rate = count_errors(dataset, wordlist) as f64 / dataset.token_count() as f64;
    Ok((1.0 - scale_k * rate).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityMode {
    /// `1 − Σ p²`
    GiniSimpson,
    /// Shannon entropy divided by `ln k_effective`.
    #[default]
    ShannonNormalized,
}

pub fn diversity_from_proportions(proportions: &[f64], k_effective: usize, mode: DiversityMode) -> f64 {
    let value = match mode {
        DiversityMode::GiniSimpson => 1.0 - proportions.iter().map(|p| p * p).sum::<f64>(),
        DiversityMode::ShannonNormalized => {
            if k_effective <= 1 {
                return 0.0;
            }
            let h: f64 = proportions
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| -p * p.ln())
                .sum();
            h / (k_effective as f64).ln()
        }
    };
    value.clamp(0.0, 1.0)
}

/// Clusters document embeddings and scores the spread of cluster sizes.
///
/// Documents are ordered by content hash before seeding, so the result does
/// not depend on their submission order.
pub fn diversity(dataset: &DatasetDescriptor, cfg: &EmbeddingConfig, mode: DiversityMode) -> Result<f64> {
    cfg.validate()?;
    if dataset.documents().is_empty() {
        return Err(Error::data(format!("dataset {} has no documents", dataset.id())));
    }
    let mut keyed: Vec<(String, &str)> = dataset
        .documents()
        .iter()
        .map(|d| (sha256_hex(d.text.as_bytes()), d.text.as_str()))
        .collect();
    keyed.sort();
    let points: Vec<Vec<f64>> = keyed.iter().map(|(_, t)| embed_text(t, cfg).vector).collect();
    let clustering = kmeans(&points, cfg.kmeans_k, cfg.kmeans_seed, cfg.kmeans_max_iters);
    Ok(diversity_from_proportions(
        &clustering.proportions(),
        clustering.k_effective,
        mode,
    ))
}

/// Mean over documents of `clamp(1 − age/max_range, 0, 1)`.
pub fn recency(dates: &[NaiveDate], current_date: NaiveDate, max_range_days: u32) -> f64 {
    if dates.is_empty() {
        return 0.0;
    }
    let range = max_range_days as f64;
    dates
        .iter()
        .map(|d| (1.0 - (current_date - *d).num_days() as f64 / range).clamp(0.0, 1.0))
        .sum::<f64>()
        / dates.len() as f64
}

/// Mean over documents of the best cosine match in `reference`, clamped to
/// `[0, 1]`.
pub fn duplication_score(documents: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    if documents.is_empty() {
        return 0.0;
    }
    documents
        .iter()
        .map(|d| {
            reference
                .iter()
                .map(|r| cosine(d, r))
                .fold(0.0f64, f64::max)
                .clamp(0.0, 1.0)
        })
        .sum::<f64>()
        / documents.len() as f64
}

/// `w₁′·Recency + w₂′·(1 − DuplicationScore)`.
pub fn novelty(
    dataset: &DatasetDescriptor,
    reference: &[Vec<f64>],
    current_date: NaiveDate,
    max_range_days: u32,
    weights: [f64; 2],
    cfg: &EmbeddingConfig,
) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::config("novelty needs a non-empty reference corpus"));
    }
    if max_range_days == 0 {
        return Err(Error::config("max date range must be positive"));
    }
    let docs: Vec<Vec<f64>> = dataset
        .documents()
        .iter()
        .map(|d| embed_text(&d.text, cfg).vector)
        .collect();
    let fresh = recency(&dataset.doc_dates(), current_date, max_range_days);
    let dup = duplication_score(&docs, reference);
    Ok((weights[0] * fresh + weights[1] * (1.0 - dup)).clamp(0.0, 1.0))
}

/// Share of `expected_fields` present with a non-blank value.
pub fn metadata_richness(dataset: &DatasetDescriptor, expected_fields: &[String]) -> Result<f64> {
    if expected_fields.is_empty() {
        return Err(Error::config("expected metadata field list is empty"));
    }
    let filled = expected_fields
        .iter()
        .filter(|f| {
            dataset
                .metadata()
                .get(*f)
                .and_then(|v| v.as_deref())
                .is_some_and(|v| !v.trim().is_empty())
        })
        .count();
    Ok(filled as f64 / expected_fields.len() as f64)
}
