//! Hashed word n-gram embeddings.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    /// Highest word n-gram order hashed (1 = unigrams only).
    pub ngram_order: usize,
    pub kmeans_k: usize,
    pub kmeans_seed: u64,
    pub kmeans_max_iters: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dimension: 256,
            ngram_order: 2,
            kmeans_k: 50,
            kmeans_seed: 0,
            kmeans_max_iters: 100,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 8 {
            return Err(Error::config("embedding dimension must be at least 8"));
        }
        if self.ngram_order == 0 {
            return Err(Error::config("ngram_order must be positive"));
        }
        if self.kmeans_k == 0 {
            return Err(Error::config("kmeans_k must be at least 1"));
        }
        if self.kmeans_max_iters == 0 {
            return Err(Error::config("kmeans_max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    /// The document had no tokens; `vector` is all zeros.
    pub degenerate: bool,
}

fn bucket(order: usize, gram: &[String], dimension: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write_usize(order);
    for (k, tok) in gram.iter().enumerate() {
        if k > 0 {
            h.write_u8(0x1f);
        }
        h.write(tok.as_bytes());
    }
    (h.finish() % dimension as u64) as usize
}

/// Embeds one document as L2-normalized hashed n-gram counts.
pub fn embed_text(text: &str, cfg: &EmbeddingConfig) -> Embedding {
    let tokens = tokenize(text);
    let mut vector = vec![0.0; cfg.dimension];
    for order in 1..=cfg.ngram_order {
        for gram in tokens.windows(order) {
            vector[bucket(order, gram, cfg.dimension)] += 1.0;
        }
    }
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Embedding {
            vector,
            degenerate: true,
        };
    }
    vector.iter_mut().for_each(|x| *x /= norm);
    Embedding {
        vector,
        degenerate: false,
    }
}

pub fn embed<S: AsRef<str>>(documents: &[S], cfg: &EmbeddingConfig) -> Vec<Embedding> {
    documents.iter().map(|d| embed_text(d.as_ref(), cfg)).collect()
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_documents_identical_vectors() {
        let cfg = EmbeddingConfig::default();
        let e = embed(&["the quick brown fox", "the quick brown fox"], &cfg);
        assert_eq!(e[0], e[1]);
    }

    #[test]
    fn non_empty_documents_are_unit_length() {
        let cfg = EmbeddingConfig::default();
        for text in ["a", "lorem ipsum dolor sit amet", "x x x x y"] {
            let e = embed_text(text, &cfg);
            let norm: f64 = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
            assert!(!e.degenerate);
        }
    }

    #[test]
    fn empty_document_is_degenerate() {
        let e = embed_text("", &EmbeddingConfig::default());
        assert!(e.degenerate);
        assert!(e.vector.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn case_and_spacing_do_not_matter() {
        let cfg = EmbeddingConfig::default();
        assert_eq!(embed_text("Hello  World", &cfg), embed_text("hello world", &cfg));
    }

    #[test]
    fn small_dimension_rejected() {
        let cfg = EmbeddingConfig {
            dimension: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
