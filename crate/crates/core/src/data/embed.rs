//! Tokenization and averaged bag-of-words tweet embeddings.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const URL_TOKEN: &str = "<url>";
const USER_TOKEN: &str = "<user>";

/// Lowercases, collapses URLs to `<url>` and mentions to `<user>`, and splits
/// the rest on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        if lower == URL_TOKEN || lower == USER_TOKEN {
            tokens.push(lower);
        } else if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.") {
            tokens.push(URL_TOKEN.to_owned());
        } else if lower.len() > 1 && lower.starts_with('@') {
            tokens.push(USER_TOKEN.to_owned());
        } else {
            tokens.extend(
                lower
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned),
            );
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hashing,
    Table,
}

/// Serializable embedder settings. `table_path` points at a JSON object
/// `{token: [f64; dimension]}` for the table kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dimension: usize,
    pub seed: u64,
    pub table_path: Option<PathBuf>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig { kind: EmbedderKind::Hashing, dimension: 32, seed: 0, table_path: None }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Embedder> {
        match self.kind {
            EmbedderKind::Hashing => Embedder::hashing(self.dimension, self.seed),
            EmbedderKind::Table => {
                let path = self
                    .table_path
                    .as_ref()
                    .ok_or_else(|| Error::config("table embedder needs table_path"))?;
                let vectors: HashMap<String, Vec<f64>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                Embedder::table(self.dimension, vectors)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Embedder {
    /// Each token maps to a single `±1/√dim` entry chosen by an FNV-1a hash
    /// passed through a splitmix64 finalizer (raw FNV low bits only see the
    /// low bits of each byte).
    Hashing { dimension: usize, seed: u64 },
    /// Pretrained vectors; unknown tokens are skipped.
    Table { dimension: usize, vectors: HashMap<String, Vec<f64>> },
}

impl Embedder {
    pub fn hashing(dimension: usize, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        Ok(Embedder::Hashing { dimension, seed })
    }

    pub fn table(dimension: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        if let Some((tok, v)) = vectors.iter().find(|(_, v)| v.len() != dimension) {
            return Err(Error::shape(format!("vector for {tok:?} has {} entries, expected {dimension}", v.len())));
        }
        Ok(Embedder::Table { dimension, vectors })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Embedder::Hashing { dimension, .. } | Embedder::Table { dimension, .. } => *dimension,
        }
    }

    /// Adds the token's vector into `acc`; returns false for unknown tokens.
    fn accumulate(&self, token: &str, acc: &mut [f64]) -> bool {
        match self {
            Embedder::Hashing { dimension, seed } => {
                let h = crate::nn::splitmix64(fnv1a(*seed, token));
                let dim = *dimension as u64;
                let value = 1.0 / (*dimension as f64).sqrt();
                let sign = if (h / dim).is_multiple_of(2) { 1.0 } else { -1.0 };
                acc[(h % dim) as usize] += sign * value;
                true
            }
            Embedder::Table { vectors, .. } => match vectors.get(token) {
                Some(v) => {
                    for (a, x) in acc.iter_mut().zip(v) {
                        *a += x;
                    }
                    true
                }
                None => false,
            },
        }
    }
}

fn fnv1a(seed: u64, token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Mean of the known token vectors of `text`; the zero vector when no token
/// is known.
pub fn embed_tweet(text: &str, embedder: &Embedder) -> Vec<f64> {
    let mut acc = vec![0.0; embedder.dimension()];
    let mut n = 0usize;
    for tok in tokenize(text) {
        if embedder.accumulate(&tok, &mut acc) {
            n += 1;
        }
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    acc
}
