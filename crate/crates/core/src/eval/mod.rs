//! Classification metrics, embedding-space analytics and artifact export.

mod embedding;
mod export;

pub use embedding::{
    cosine, embedding_stats, knn_eval, knn_class_ranking, pair_similarity_histogram, EmbeddingStats,
    PairSimHistogram,
};
pub use export::{export_embeddings, histogram_csv, matrix_csv, sha256_file, sha256_hex, Provenance};

use serde::{Deserialize, Serialize};

use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::losses::INDOMAIN_POSITIVE;
use crate::model::ForwardOutputs;

/// Metrics over gold in-domain examples using the language head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageMetrics {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub top1: f64,
    pub top5: f64,
    /// Rows are gold classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub n_in_domain: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub in_acc: f64,
    pub n_examples: usize,
    /// Absent when the corpus has no in-domain examples.
    pub language: Option<LanguageMetrics>,
    pub metadata: ReportMetadata,
}

/// How the numbers in a report were computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub averaging: String,
    pub ood_in_language_metrics: bool,
    pub labels: Vec<String>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_stats: Option<EmbeddingStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn: Option<KnnSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnSummary {
    pub k: usize,
    pub top1: f64,
    pub top5: f64,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Rank of `gold` when classes are ordered by logit descending, ties by index.
fn rank_of(logits: &[f64], gold: usize) -> usize {
    let g = logits[gold];
    logits
        .iter()
        .enumerate()
        .filter(|&(i, &x)| x > g || (x == g && i < gold))
        .count()
}

/// Classification metrics from raw head outputs.
///
/// `labels[i]` is the gold class index or `None` for OOD.
pub fn classification_report_from_logits(
    indomain_logits: &[Vec<f64>],
    langid_logits: &[Vec<f64>],
    labels: &[Option<usize>],
    class_names: &[String],
) -> Result<EvalReport> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::Contract("cannot evaluate an empty corpus".into()));
    }
    if indomain_logits.len() != n || langid_logits.len() != n {
        return Err(Error::Contract("logit rows do not match labels".into()));
    }
    let k = class_names.len();
    let correct_domain = labels
        .iter()
        .zip(indomain_logits)
        .filter(|(l, logits)| (argmax(logits) == INDOMAIN_POSITIVE) == l.is_some())
        .count();
    let in_acc = correct_domain as f64 / n as f64;

    let gold_in: Vec<(usize, &Vec<f64>)> = labels
        .iter()
        .zip(langid_logits)
        .filter_map(|(l, logits)| l.map(|c| (c, logits)))
        .collect();
    let language = if gold_in.is_empty() {
        None
    } else {
        let mut confusion = vec![vec![0u64; k]; k];
        let (mut top1, mut top5) = (0usize, 0usize);
        for &(gold, logits) in &gold_in {
            if logits.len() != k || gold >= k {
                return Err(Error::Dimension {
                    name: "langid_logits".into(),
                    expected: vec![k],
                    found: vec![logits.len()],
                });
            }
            confusion[gold][argmax(logits)] += 1;
            let r = rank_of(logits, gold);
            top1 += usize::from(r < 1);
            top5 += usize::from(r < 5);
        }
        let mut per_class = Vec::with_capacity(k);
        let mut counted = 0usize;
        let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
            let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            if support > 0 || predicted > 0 {
                counted += 1;
                sp += precision;
                sr += recall;
                sf += f1;
            }
            per_class.push(ClassMetrics {
                label: class_names[c].clone(),
                precision,
                recall,
                f1,
                support,
            });
        }
        let m = gold_in.len() as f64;
        let denom = counted.max(1) as f64;
        Some(LanguageMetrics {
            macro_precision: sp / denom,
            macro_recall: sr / denom,
            macro_f1: sf / denom,
            top1: top1 as f64 / m,
            top5: top5 as f64 / m,
            confusion,
            per_class,
            n_in_domain: gold_in.len(),
        })
    };
    Ok(EvalReport {
        in_acc,
        n_examples: n,
        language,
        metadata: ReportMetadata {
            averaging: "macro (unweighted mean over in-domain classes with gold or predicted support)".into(),
            ood_in_language_metrics: false,
            labels: class_names.to_vec(),
            notes: vec![
                "in_acc: argmax of the in-domain head over all examples, OOD included".into(),
                "precision/recall/F1/top-k: gold in-domain examples only, language head".into(),
                "top-k ties are broken by class index".into(),
            ],
            provenance: None,
            embedding_stats: None,
            knn: None,
        },
    })
}

/// Classification metrics for model outputs over `corpus` (same order).
pub fn classification_report(outputs: &[ForwardOutputs], corpus: &Corpus) -> Result<EvalReport> {
    if outputs.len() != corpus.len() {
        return Err(Error::Contract(format!(
            "{} outputs for {} examples",
            outputs.len(),
            corpus.len()
        )));
    }
    let ind: Vec<Vec<f64>> = outputs.iter().map(|o| o.indomain_logits.clone()).collect();
    let lang: Vec<Vec<f64>> = outputs.iter().map(|o| o.langid_logits.clone()).collect();
    let names: Vec<String> = corpus.label_space.in_domain().iter().map(|l| l.to_string()).collect();
    classification_report_from_logits(&ind, &lang, &corpus.class_labels(), &names)
}

/// Divides each row by its sum; all-zero rows stay zero.
pub fn row_normalize(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let s: u64 = row.iter().sum();
            row.iter()
                .map(|&v| if s == 0 { 0.0 } else { v as f64 / s as f64 })
                .collect()
        })
        .collect()
}

/// Elementwise `a − b` of two row-normalized confusion matrices.
pub fn confusion_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::Dimension {
            name: "confusion".into(),
            expected: vec![a.len(), a.first().map_or(0, Vec::len)],
            found: vec![b.len(), b.first().map_or(0, Vec::len)],
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn one_hot(k: usize, c: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[c] = 5.0;
        v
    }

    #[test]
    fn perfect_predictions() {
        let labels = vec![Some(0), Some(1), Some(2), None, Some(1)];
        let ind: Vec<Vec<f64>> = labels.iter().map(|l| if l.is_some() { vec![0.0, 1.0] } else { vec![1.0, 0.0] }).collect();
        let lang: Vec<Vec<f64>> = labels.iter().map(|l| one_hot(3, l.unwrap_or(0))).collect();
        let r = classification_report_from_logits(&ind, &lang, &labels, &names(3)).unwrap();
        assert_eq!(r.in_acc, 1.0);
        let m = r.language.unwrap();
        assert_eq!((m.macro_precision, m.macro_recall, m.macro_f1, m.top1, m.top5), (1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(m.confusion, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
    }

    // 12-example, 3-class fixture; per-class counts worked out by hand:
    // class 0: tp 3, predicted 4, support 4 → P 3/4, R 3/4, F1 3/4
    // class 1: tp 2, predicted 5, support 4 → P 2/5, R 1/2, F1 4/9
    // class 2: tp 2, predicted 3, support 4 → P 2/3, R 1/2, F1 4/7
    #[test]
    fn hand_computed_macro_f1() {
        let gold = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
        let pred = [0, 0, 0, 1, 1, 1, 0, 2, 2, 2, 1, 1];
        let labels: Vec<Option<usize>> = gold.iter().map(|&g| Some(g)).collect();
        let lang: Vec<Vec<f64>> = pred.iter().map(|&p| one_hot(3, p)).collect();
        let ind = vec![vec![0.0, 1.0]; 12];
        let r = classification_report_from_logits(&ind, &lang, &labels, &names(3)).unwrap();
        let m = r.language.unwrap();
        let f1 = (0.75 + 4.0 / 9.0 + 4.0 / 7.0) / 3.0;
        let p = (0.75 + 0.4 + 2.0 / 3.0) / 3.0;
        let rc = (0.75 + 0.5 + 0.5) / 3.0;
        assert!((m.macro_f1 - f1).abs() < 1e-12);
        assert!((m.macro_precision - p).abs() < 1e-12);
        assert!((m.macro_recall - rc).abs() < 1e-12);
        assert!((m.top1 - 7.0 / 12.0).abs() < 1e-12);
        let trace: u64 = (0..3).map(|c| m.confusion[c][c]).sum();
        assert_eq!(trace as f64 / 12.0, m.top1);
        assert_eq!(m.top5, 1.0);
    }

    #[test]
    fn uniform_random_logits_are_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let labels: Vec<Option<usize>> = (0..n).map(|i| Some(i % 10)).collect();
        let lang: Vec<Vec<f64>> = (0..n).map(|_| (0..10).map(|_| rng.gen::<f64>()).collect()).collect();
        let ind = vec![vec![0.0, 1.0]; n];
        let m = classification_report_from_logits(&ind, &lang, &labels, &names(10)).unwrap().language.unwrap();
        assert!((m.top1 - 0.1).abs() < 0.01, "{}", m.top1);
        assert!((m.top5 - 0.5).abs() < 0.02, "{}", m.top5);
    }

    #[test]
    fn no_in_domain_examples() {
        let r = classification_report_from_logits(&[vec![1.0, 0.0]], &[vec![0.0, 0.0]], &[None], &names(2)).unwrap();
        assert!(r.language.is_none());
        assert_eq!(r.in_acc, 1.0);
    }

    #[test]
    fn confusion_diff_cases() {
        let a = vec![vec![0.5, 0.5], vec![0.0, 1.0]];
        assert!(confusion_diff(&a, &a).unwrap().iter().flatten().all(|v| *v == 0.0));
        let perfect: Vec<Vec<f64>> = (0..10).map(|i| (0..10).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let uniform = vec![vec![0.1; 10]; 10];
        let d = confusion_diff(&perfect, &uniform).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 0.9 } else { -0.1 };
                assert!((d[i][j] - want).abs() < 1e-15);
            }
        }
        assert!(confusion_diff(&a, &perfect).is_err());
    }

    #[test]
    fn confusion_diff_three_by_three() {
        let a = row_normalize(&[vec![8, 1, 1], vec![0, 5, 5], vec![0, 0, 0]]);
        let b = row_normalize(&[vec![6, 2, 2], vec![2, 6, 2], vec![1, 1, 2]]);
        let d = confusion_diff(&a, &b).unwrap();
        let want = [[0.2, -0.1, -0.1], [-0.2, -0.1, 0.3], [-0.25, -0.25, -0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((d[i][j] - want[i][j]).abs() < 1e-12, "{i},{j}");
            }
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn top5_dominates_top1(seed in 0u64..200, k in 2usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 30;
            let labels: Vec<Option<usize>> = (0..n).map(|_| if rng.gen_bool(0.8) { Some(rng.gen_range(0..k)) } else { None }).collect();
            let lang: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let ind: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
            let r = classification_report_from_logits(&ind, &lang, &labels, &names(k)).unwrap();
            if let Some(m) = r.language {
                prop_assert!(m.top5 >= m.top1);
                if k <= 5 { prop_assert_eq!(m.top5, 1.0); }
                let trace: u64 = (0..k).map(|c| m.confusion[c][c]).sum();
                prop_assert!((trace as f64 / m.n_in_domain as f64 - m.top1).abs() < 1e-12);
                for row in 0..k {
                    let gold = labels.iter().filter(|l| **l == Some(row)).count() as u64;
                    prop_assert_eq!(m.confusion[row].iter().sum::<u64>(), gold);
                }
                for v in [m.macro_precision, m.macro_recall, m.macro_f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
