//! Synthetic "languages" drawn from character-trigram Markov sources.
//!
//! Languages `l0` and `l1` form the designated confusable pair: for every
//! context, `l1`'s next-character distribution is
//! `overlap · P_l0 + (1 − overlap) · Q`, where `Q` is supported on the
//! symbols `P_l0` never emits. Other languages draw their own random
//! sparse distributions.

use rand::seq::index;
use rand::Rng;

use super::{Corpus, GeneratorHeader};
use crate::domain::{Example, LabelSpace, LanguageLabel};
use crate::error::{Error, Result};

pub const ALPHABET: [char; 20] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'r', 's', 't', 'u',
];
const SYMBOLS: usize = ALPHABET.len();
/// Word-start context symbol.
const BOS: usize = SYMBOLS;
const CONTEXTS: usize = (SYMBOLS + 1) * (SYMBOLS + 1);
const SUPPORT: usize = SYMBOLS / 2;

/// One next-symbol distribution per two-symbol context.
#[derive(Clone, Debug, PartialEq)]
struct TrigramSource {
    probs: Vec<[f64; SYMBOLS]>,
}

impl TrigramSource {
    fn context(prev2: usize, prev1: usize) -> usize {
        prev2 * (SYMBOLS + 1) + prev1
    }

    fn sample_word<R: Rng + ?Sized>(&self, len: usize, rng: &mut R, out: &mut String) {
        let (mut p2, mut p1) = (BOS, BOS);
        for _ in 0..len {
            let dist = &self.probs[Self::context(p2, p1)];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = SYMBOLS - 1;
            for (s, &p) in dist.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = s;
                    break;
                }
            }
            // Guard against rounding leaving the last bucket with zero mass.
            while dist[pick] == 0.0 {
                pick -= 1;
            }
            out.push(ALPHABET[pick]);
            p2 = p1;
            p1 = pick;
        }
    }
}

fn random_weights<R: Rng + ?Sized>(support: &[usize], rng: &mut R) -> [f64; SYMBOLS] {
    let mut w = [0.0; SYMBOLS];
    for &s in support {
        // Exponential weights, floored so no supported symbol is negligible.
        w[s] = -(1.0 - rng.gen::<f64>()).ln() + 0.05;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// The set of language sources behind a confusable corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusableSources {
    sources: Vec<TrigramSource>,
    k_in_domain: usize,
    overlap: f64,
    seed: u64,
}

impl ConfusableSources {
    /// `k_languages` in-domain languages plus `n_ood` extra OOD languages.
    pub fn new(k_languages: usize, n_ood: usize, overlap: f64, seed: u64) -> Result<Self> {
        if k_languages < 2 {
            return Err(Error::Contract(format!("need at least 2 languages, got {k_languages}")));
        }
        if !(0.0..=1.0).contains(&overlap) {
            return Err(Error::Contract(format!("overlap must lie in [0, 1], got {overlap}")));
        }
        let mut rng = crate::rng::stream(seed, &[0xC0F5]);
        let total = k_languages + n_ood;
        let mut sources: Vec<TrigramSource> = (0..total)
            .map(|_| TrigramSource {
                probs: vec![[0.0; SYMBOLS]; CONTEXTS],
            })
            .collect();
        for ctx in 0..CONTEXTS {
            let base_support: Vec<usize> = index::sample(&mut rng, SYMBOLS, SUPPORT).into_vec();
            let p0 = random_weights(&base_support, &mut rng);
            let complement: Vec<usize> = (0..SYMBOLS).filter(|s| !base_support.contains(s)).collect();
            let q = random_weights(&complement, &mut rng);
            sources[0].probs[ctx] = p0;
            for s in 0..SYMBOLS {
                sources[1].probs[ctx][s] = overlap * p0[s] + (1.0 - overlap) * q[s];
            }
            for src in sources.iter_mut().skip(2) {
                let support = index::sample(&mut rng, SYMBOLS, SUPPORT).into_vec();
                src.probs[ctx] = random_weights(&support, &mut rng);
            }
        }
        Ok(Self {
            sources,
            k_in_domain: k_languages,
            overlap,
            seed,
        })
    }

    pub fn label(i: usize) -> LanguageLabel {
        LanguageLabel::new(format!("l{i}")).expect("valid synthetic code")
    }

    pub fn label_space(&self) -> LabelSpace {
        LabelSpace::new((0..self.k_in_domain).map(Self::label).collect()).expect("k >= 2 distinct labels")
    }

    pub fn num_languages(&self) -> usize {
        self.sources.len()
    }

    /// Next-symbol distribution of language `lang` after `(prev2, prev1)`;
    /// `None` stands for the word start.
    pub fn transition(&self, lang: usize, prev2: Option<usize>, prev1: Option<usize>) -> &[f64; SYMBOLS] {
        let ctx = TrigramSource::context(prev2.unwrap_or(BOS), prev1.unwrap_or(BOS));
        &self.sources[lang].probs[ctx]
    }

    /// One utterance of 3–12 words, each 2–7 characters.
    pub fn sample_utterance<R: Rng + ?Sized>(&self, lang: usize, rng: &mut R) -> String {
        let words = rng.gen_range(3..=12);
        let mut out = String::new();
        for w in 0..words {
            if w > 0 {
                out.push(' ');
            }
            let len = rng.gen_range(2..=7);
            self.sources[lang].sample_word(len, rng, &mut out);
        }
        out
    }

    /// `n_per_lang` utterances per language, drawn from a stream keyed by `sample_seed`.
    pub fn sample(&self, n_per_lang: usize, sample_seed: u64) -> Result<(Corpus, GeneratorHeader)> {
        let space = self.label_space();
        let mut examples = Vec::with_capacity(n_per_lang * self.sources.len());
        for lang in 0..self.sources.len() {
            let mut rng = crate::rng::stream(sample_seed, &[0x5A3E, lang as u64]);
            let label = Self::label(lang);
            for _ in 0..n_per_lang {
                let text = self.sample_utterance(lang, &mut rng);
                examples.push(Example::new(text, label.clone(), &space, None)?);
            }
        }
        let header = GeneratorHeader::new(
            "confusable",
            self.seed,
            serde_json::json!({
                "k_languages": self.k_in_domain,
                "n_ood_languages": self.sources.len() - self.k_in_domain,
                "overlap": self.overlap,
                "n_per_lang": n_per_lang,
                "sample_seed": sample_seed,
            }),
        );
        let corpus = Corpus::new(
            examples,
            space,
            format!("confusable k={} overlap={} seed={}", self.k_in_domain, self.overlap, self.seed),
        )?;
        Ok((corpus, header))
    }
}

/// Corpus over `k_languages` synthetic languages whose first pair overlaps by `overlap`.
pub fn generate_confusable_corpus(
    k_languages: usize,
    overlap: f64,
    n_per_lang: usize,
    seed: u64,
) -> Result<(Corpus, GeneratorHeader)> {
    ConfusableSources::new(k_languages, 0, overlap, seed)?.sample(n_per_lang, seed)
}
