use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PairSimHistogram;
use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::model::ForwardOutputs;

/// Hashes tying an output artifact to the checkpoint and config that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub checkpoint_sha256: String,
    pub config_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// One CSV row per example: `text_sha256,lang,in_domain,z_0,...`.
pub fn export_embeddings(outputs: &[ForwardOutputs], corpus: &Corpus) -> Result<String> {
    if outputs.len() != corpus.len() {
        return Err(Error::Contract("outputs do not match corpus".into()));
    }
    let dim = outputs.first().map_or(0, |o| o.z.len());
    let mut out = String::from("text_sha256,lang,in_domain");
    for i in 0..dim {
        let _ = write!(out, ",z_{i}");
    }
    out.push('\n');
    for (o, ex) in outputs.iter().zip(&corpus.examples) {
        let _ = write!(out, "{},{},{}", sha256_hex(ex.text.as_bytes()), ex.lang, ex.in_domain);
        for v in &o.z {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Square matrix as CSV with a label header row and label first column.
pub fn matrix_csv(labels: &[String], m: &[Vec<f64>]) -> String {
    let mut out = String::from("gold\\pred");
    for l in labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(m) {
        out.push_str(l);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn histogram_csv(h: &PairSimHistogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,positive,negative\n");
    for b in 0..h.positive.len() {
        let _ = writeln!(out, "{},{},{},{}", h.edges[b], h.edges[b + 1], h.positive[b], h.negative[b]);
    }
    out
}
