//! Corpora: JSONL ingestion, OOD subsampling, synthetic generators and
//! epoch batching.

mod batching;
mod confusable;
mod song;

pub use batching::{sample_batches, BatchSpec};
pub use confusable::{generate_confusable_corpus, ConfusableSources, ALPHABET};
pub use song::{fill_template, generate_song_corpus, parse_placeholders, TemplateSet, ARTIST_NAME, SONG_NAME};

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{EntitySpan, Example, LabelSpace, LanguageLabel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub label_space: LabelSpace,
    pub provenance: String,
}

/// One JSONL record.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    text: String,
    lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entities: Option<Vec<EntitySpan>>,
}

/// First line of generated corpus files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorHeader {
    pub generator: String,
    pub kind: String,
    pub seed: u64,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl GeneratorHeader {
    pub fn new(kind: &str, seed: u64, params: serde_json::Value) -> Self {
        Self {
            generator: format!("langsep {}", env!("CARGO_PKG_VERSION")),
            kind: kind.to_string(),
            seed,
            params,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: GeneratorHeader,
}

impl Corpus {
    pub fn new(examples: Vec<Example>, label_space: LabelSpace, provenance: impl Into<String>) -> Result<Self> {
        for (i, ex) in examples.iter().enumerate() {
            if ex.text.is_empty() {
                return Err(Error::Validation(format!("example {i} has empty text")));
            }
            if ex.in_domain != crate::domain::derive_in_domain(&ex.lang, &label_space) {
                return Err(Error::Validation(format!(
                    "example {i} has an in_domain flag inconsistent with its label"
                )));
            }
        }
        Ok(Self {
            examples,
            label_space,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Class index per example (`None` for OOD).
    pub fn class_labels(&self) -> Vec<Option<usize>> {
        self.examples.iter().map(|e| e.class_index(&self.label_space)).collect()
    }

    pub fn in_domain_count(&self) -> usize {
        self.examples.iter().filter(|e| e.in_domain).count()
    }

    /// Serializes to JSONL, optionally preceded by a generator header line.
    pub fn to_jsonl(&self, header: Option<&GeneratorHeader>) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        if let Some(h) = header {
            serde_json::to_writer(&mut out, &HeaderLine { header: h.clone() })?;
            out.push(b'\n');
        }
        for ex in &self.examples {
            let rec = Record {
                text: ex.text.clone(),
                lang: ex.lang.as_str().to_string(),
                entities: ex.entity_spans.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.push(b'\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path, header: Option<&GeneratorHeader>) -> Result<()> {
        let bytes = self.to_jsonl(header)?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the header-less JSONL serialization.
    pub fn checksum(&self) -> String {
        let bytes = self.to_jsonl(None).expect("in-memory serialization");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Splits off every `n`-th example (offset `phase`) into a second corpus.
    pub fn split_every(&self, n: usize, phase: usize) -> (Corpus, Corpus) {
        let (mut keep, mut held) = (Vec::new(), Vec::new());
        for (i, ex) in self.examples.iter().enumerate() {
            if i % n == phase {
                held.push(ex.clone());
            } else {
                keep.push(ex.clone());
            }
        }
        let mk = |examples| Corpus {
            examples,
            label_space: self.label_space.clone(),
            provenance: self.provenance.clone(),
        };
        (mk(keep), mk(held))
    }
}

/// Reads a JSONL corpus; fails on the first malformed line.
pub fn load_jsonl(path: &Path, label_space: &LabelSpace) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text, path, label_space)
}

pub fn parse_jsonl(text: &str, path: &Path, label_space: &LabelSpace) -> Result<Corpus> {
    let schema = |line: usize, msg: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut examples = Vec::new();
    let mut provenance = path.display().to_string();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(line) {
                provenance = format!("{} ({} seed {})", h.header.generator, h.header.kind, h.header.seed);
                continue;
            }
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| schema(lineno, e.to_string()))?;
        if rec.text.is_empty() {
            return Err(schema(lineno, "empty text".into()));
        }
        let lang = LanguageLabel::new(rec.lang).map_err(|e| schema(lineno, e.to_string()))?;
        let ex = Example::new(rec.text, lang, label_space, rec.entities)
            .map_err(|e| schema(lineno, e.to_string()))?;
        examples.push(ex);
    }
    Ok(Corpus {
        examples,
        label_space: label_space.clone(),
        provenance,
    })
}

/// Keeps every in-domain example and a uniform sample of OOD examples so
/// that OOD makes up `target_ood_fraction` of the result (capped at what
/// is available). Original order is preserved.
pub fn subsample_ood(corpus: &Corpus, target_ood_fraction: f64, seed: u64) -> Result<Corpus> {
    if !(target_ood_fraction > 0.0 && target_ood_fraction < 1.0) {
        return Err(Error::Contract(format!(
            "OOD fraction must lie in (0, 1), got {target_ood_fraction}"
        )));
    }
    let ood_positions: Vec<usize> = (0..corpus.len()).filter(|&i| !corpus.examples[i].in_domain).collect();
    if ood_positions.is_empty() {
        return Err(Error::Contract("corpus has no OOD examples to subsample".into()));
    }
    let n_in = corpus.in_domain_count();
    let wanted = (target_ood_fraction / (1.0 - target_ood_fraction) * n_in as f64).round() as usize;
    let take = if wanted > ood_positions.len() {
        log::warn!(
            "wanted {wanted} OOD examples but only {} are available; keeping all",
            ood_positions.len()
        );
        ood_positions.len()
    } else {
        wanted
    };
    let mut rng = crate::rng::stream(seed, &[0x00D5]);
    let mut chosen: Vec<usize> = index::sample(&mut rng, ood_positions.len(), take)
        .into_iter()
        .map(|k| ood_positions[k])
        .collect();
    chosen.sort_unstable();
    let mut keep = vec![false; corpus.len()];
    for (i, ex) in corpus.examples.iter().enumerate() {
        keep[i] = ex.in_domain;
    }
    for i in chosen {
        keep[i] = true;
    }
    Ok(Corpus {
        examples: corpus
            .examples
            .iter()
            .zip(keep)
            .filter(|&(_e, k)| k).map(|(e, _k)| e.clone())
            .collect(),
        label_space: corpus.label_space.clone(),
        provenance: format!("{} | ood-subsample f={target_ood_fraction} seed={seed}", corpus.provenance),
    })
}
