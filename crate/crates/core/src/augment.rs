//! Label-preserving text perturbations used to build positive pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{EntitySpan, Example};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypoOp {
    SwapAdjacent,
    Substitute,
    Insert,
    Delete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub deletion_prob: f64,
    pub typo_rate: f64,
    pub typo_ops: Vec<TypoOp>,
    pub enable_entity_replacement: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            deletion_prob: 0.15,
            typo_rate: 0.05,
            typo_ops: vec![
                TypoOp::SwapAdjacent,
                TypoOp::Substitute,
                TypoOp::Insert,
                TypoOp::Delete,
            ],
            enable_entity_replacement: true,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("deletion_prob", self.deletion_prob), ("typo_rate", self.typo_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.typo_rate > 0.0 && self.typo_ops.is_empty() {
            return Err(Error::Validation("typo_rate > 0 needs at least one typo op".into()));
        }
        if self.deletion_prob == 0.0 && self.typo_rate == 0.0 && !self.enable_entity_replacement {
            return Err(Error::Validation("at least one augmentation must be enabled".into()));
        }
        Ok(())
    }
}

/// Replacement strings per entity type, e.g. `SONG_NAME → [...]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityPool(pub BTreeMap<String, Vec<String>>);

impl EntityPool {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn get(&self, entity_type: &str) -> Option<&[String]> {
        self.0.get(entity_type).map(Vec::as_slice)
    }
}

/// Drops each whitespace token with probability `p`, always keeping at least one.
pub fn random_deletion<R: Rng + ?Sized>(text: &str, p: f64, rng: &mut R) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return text.to_string();
    }
    let kept: Vec<&str> = tokens.iter().copied().filter(|_| !rng.gen_bool(p)).collect();
    if kept.is_empty() {
        return tokens[rng.gen_range(0..tokens.len())].to_string();
    }
    kept.join(" ")
}

/// Character-level noise drawn from the text's own alphabet.
pub fn typo_noise<R: Rng + ?Sized>(text: &str, rate: f64, ops: &[TypoOp], rng: &mut R) -> String {
    if rate == 0.0 || ops.is_empty() || text.is_empty() {
        return text.to_string();
    }
    let chars: Vec<char> = text.chars().collect();
    let alphabet: Vec<char> = {
        let visible: BTreeSet<char> = chars.iter().copied().filter(|c| !c.is_whitespace()).collect();
        if visible.is_empty() {
            chars.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
        } else {
            visible.into_iter().collect()
        }
    };
    let mut out = String::with_capacity(text.len() + 4);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !rng.gen_bool(rate) {
            out.push(c);
            i += 1;
            continue;
        }
        match *ops.choose(rng).expect("non-empty ops") {
            TypoOp::SwapAdjacent if i + 1 < chars.len() => {
                out.push(chars[i + 1]);
                out.push(c);
                i += 2;
                continue;
            }
            TypoOp::SwapAdjacent => out.push(c),
            TypoOp::Substitute => out.push(*alphabet.choose(rng).expect("non-empty")),
            TypoOp::Insert => {
                out.push(c);
                out.push(*alphabet.choose(rng).expect("non-empty"));
            }
            TypoOp::Delete => {}
        }
        i += 1;
    }
    if out.is_empty() {
        text.to_string()
    } else {
        out
    }
}

/// Swaps every tagged entity for another pool entry of the same type.
pub fn entity_replacement<R: Rng + ?Sized>(ex: &Example, pool: &EntityPool, rng: &mut R) -> Example {
    let Some(spans) = ex.entity_spans.as_ref().filter(|s| !s.is_empty()) else {
        return ex.clone();
    };
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(spans[i].start));

    let mut text = ex.text.clone();
    let mut new_spans = spans.clone();
    // Pick replacements left to right so the RNG stream does not depend on rewrite order.
    let mut choices: Vec<Option<String>> = Vec::with_capacity(spans.len());
    for s in spans {
        let original = &ex.text[s.start..s.end];
        let choice = match pool.get(&s.entity_type).filter(|c| !c.is_empty()) {
            None => {
                log::warn!("no pool entries for entity type {}; span left unchanged", s.entity_type);
                None
            }
            Some(cands) => {
                let different: Vec<&String> = cands.iter().filter(|c| c.as_str() != original).collect();
                if different.is_empty() {
                    Some(cands.choose(rng).expect("non-empty").clone())
                } else {
                    Some((*different.choose(rng).expect("non-empty")).clone())
                }
            }
        };
        choices.push(choice);
    }
    for &i in &order {
        let Some(replacement) = &choices[i] else { continue };
        let s = &spans[i];
        text.replace_range(s.start..s.end, replacement);
        let shift = replacement.len() as isize - (s.end - s.start) as isize;
        new_spans[i].end = s.start + replacement.len();
        for (j, other) in spans.iter().enumerate() {
            if other.start >= s.end && j != i {
                new_spans[j].start = (new_spans[j].start as isize + shift) as usize;
                new_spans[j].end = (new_spans[j].end as isize + shift) as usize;
            }
        }
    }
    Example {
        text,
        lang: ex.lang.clone(),
        in_domain: ex.in_domain,
        entity_spans: Some(new_spans),
    }
}

/// The unchanged utterance and an augmented view of it.
///
/// The view is produced by entity replacement (when enabled and spans
/// exist), then random deletion, then typo noise. Spans are dropped from
/// the view once token or character noise has altered the text.
pub fn make_positive_pair<R: Rng + ?Sized>(
    ex: &Example,
    cfg: &AugmentConfig,
    pool: &EntityPool,
    rng: &mut R,
) -> (Example, Example) {
    let mut view = if cfg.enable_entity_replacement {
        entity_replacement(ex, pool, rng)
    } else {
        ex.clone()
    };
    let before = view.text.clone();
    let deleted = random_deletion(&view.text, cfg.deletion_prob, rng);
    let noised = typo_noise(&deleted, cfg.typo_rate, &cfg.typo_ops, rng);
    if noised != before {
        view.entity_spans = view.entity_spans.map(|_| Vec::<EntitySpan>::new());
    }
    view.text = noised;
    (ex.clone(), view)
}
