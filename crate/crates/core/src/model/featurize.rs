//! Hashed character n-gram features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturizerConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Number of hash buckets; must be a power of two.
    pub num_buckets: usize,
    /// Prefix and suffix characters wrapped around the text, or `None`.
    pub boundary_markers: Option<(char, char)>,
    pub max_chars: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            ngram_min: 1,
            ngram_max: 3,
            num_buckets: 1 << 18,
            boundary_markers: Some(('^', '$')),
            max_chars: 256,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.ngram_min && self.ngram_min <= self.ngram_max && self.ngram_max <= 5) {
            return Err(Error::Validation(format!(
                "need 1 <= ngram_min <= ngram_max <= 5, got {}..{}",
                self.ngram_min, self.ngram_max
            )));
        }
        if !self.num_buckets.is_power_of_two() {
            return Err(Error::Validation(format!(
                "num_buckets must be a power of two, got {}",
                self.num_buckets
            )));
        }
        if self.max_chars == 0 {
            return Err(Error::Validation("max_chars must be positive".into()));
        }
        Ok(())
    }
}

/// Sparse bag of hashed n-gram counts, sorted by bucket.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseFeatures {
    pub entries: Vec<(usize, f64)>,
    pub total_count: f64,
}

impl SparseFeatures {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn featurize(text: &str, cfg: &FeaturizerConfig) -> SparseFeatures {
    if text.is_empty() {
        return SparseFeatures::default();
    }
    let mut chars: Vec<char> = text.to_lowercase().chars().take(cfg.max_chars).collect();
    if let Some((pre, suf)) = cfg.boundary_markers {
        chars.insert(0, pre);
        chars.push(suf);
    }
    let mask = (cfg.num_buckets - 1) as u64;
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut buf = String::new();
    for n in cfg.ngram_min..=cfg.ngram_max {
        for window in chars.windows(n) {
            buf.clear();
            buf.extend(window);
            let bucket = (fnv1a64(buf.as_bytes()) & mask) as usize;
            *counts.entry(bucket).or_insert(0.0) += 1.0;
        }
    }
    let total_count = counts.values().sum();
    SparseFeatures {
        entries: counts.into_iter().collect(),
        total_count,
    }
}
