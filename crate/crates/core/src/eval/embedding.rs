use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn check_rows(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if embeddings.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} embeddings for {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    if let Some(d) = embeddings.first().map(Vec::len) {
        if let Some(bad) = embeddings.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                name: "embeddings".into(),
                expected: vec![d],
                found: vec![bad.len()],
            });
        }
    }
    Ok(())
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Classes ordered by leave-one-out k-NN vote for query `i`.
///
/// Voted classes come first (votes, then summed similarity, descending).
/// Remaining classes follow by similarity to their centroid over all other points.
pub fn knn_class_ranking(embeddings: &[Vec<f64>], labels: &[usize], i: usize, k: usize) -> Vec<usize> {
    let q = &embeddings[i];
    let mut others: Vec<(usize, f64)> = (0..embeddings.len())
        .filter(|&j| j != i)
        .map(|j| (j, cosine(q, &embeddings[j])))
        .collect();
    others.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut votes: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for &(j, s) in others.iter().take(k) {
        let e = votes.entry(labels[j]).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += s;
    }
    let mut voted: Vec<(usize, usize, f64)> = votes.iter().map(|(&c, &(n, s))| (c, n, s)).collect();
    voted.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
            .then(a.0.cmp(&b.0))
    });
    let dim = q.len();
    let mut rest: Vec<(usize, f64)> = distinct(labels)
        .into_iter()
        .filter(|c| !votes.contains_key(c))
        .map(|c| {
            let mut centroid = vec![0.0; dim];
            let mut n = 0usize;
            for (j, e) in embeddings.iter().enumerate() {
                if j != i && labels[j] == c {
                    n += 1;
                    for (a, b) in centroid.iter_mut().zip(e) {
                        *a += b;
                    }
                }
            }
            let sim = if n == 0 { f64::NEG_INFINITY } else { cosine(q, &centroid) };
            (c, sim)
        })
        .collect();
    rest.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    voted.into_iter().map(|v| v.0).chain(rest.into_iter().map(|r| r.0)).collect()
}

/// Leave-one-out k-NN accuracy under cosine similarity: `(top1, top5)`.
pub fn knn_eval(embeddings: &[Vec<f64>], labels: &[usize], k: usize) -> Result<(f64, f64)> {
    check_rows(embeddings, labels)?;
    let n = embeddings.len();
    if k == 0 || k >= n {
        return Err(Error::Contract(format!("k-NN needs 0 < k < n, got k={k} with n={n}")));
    }
    let (mut top1, mut top5) = (0usize, 0usize);
    for i in 0..n {
        let ranking = knn_class_ranking(embeddings, labels, i, k);
        let r = ranking.iter().position(|&c| c == labels[i]).unwrap_or(usize::MAX);
        top1 += usize::from(r < 1);
        top5 += usize::from(r < 5);
    }
    Ok((top1 as f64 / n as f64, top5 as f64 / n as f64))
}

/// Centroid geometry of labeled embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStats {
    /// Mean cosine distance between distinct class centroids.
    pub inter: f64,
    /// Mean over classes of the mean cosine distance from members to their centroid.
    pub intra: f64,
    /// `inter / max(intra, 1e-9)`.
    pub ratio: f64,
    pub num_classes: usize,
}

pub fn embedding_stats(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<EmbeddingStats> {
    check_rows(embeddings, labels)?;
    let classes = distinct(labels);
    if classes.len() < 2 {
        return Err(Error::Contract("embedding stats need at least two classes".into()));
    }
    let dim = embeddings[0].len();
    let centroids: Vec<Vec<f64>> = classes
        .iter()
        .map(|&c| {
            let members: Vec<&Vec<f64>> = embeddings.iter().zip(labels).filter(|(_, &l)| l == c).map(|(e, _)| e).collect();
            let mut m = vec![0.0; dim];
            for e in &members {
                for (a, b) in m.iter_mut().zip(e.iter()) {
                    *a += b;
                }
            }
            m.iter_mut().for_each(|v| *v /= members.len() as f64);
            m
        })
        .collect();
    let mut inter = 0.0;
    let mut pairs = 0usize;
    for a in 0..centroids.len() {
        for b in a + 1..centroids.len() {
            inter += 1.0 - cosine(&centroids[a], &centroids[b]);
            pairs += 1;
        }
    }
    inter /= pairs as f64;
    let intra = classes
        .iter()
        .zip(&centroids)
        .map(|(&c, m)| {
            let d: Vec<f64> = embeddings
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(e, _)| 1.0 - cosine(e, m))
                .collect();
            d.iter().sum::<f64>() / d.len() as f64
        })
        .sum::<f64>()
        / classes.len() as f64;
    Ok(EmbeddingStats {
        inter,
        intra,
        ratio: inter / intra.max(1e-9),
        num_classes: classes.len(),
    })
}

/// Cosine-similarity histograms for same-class and cross-class pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSimHistogram {
    /// `bins + 1` edges spanning [-1, 1].
    pub edges: Vec<f64>,
    pub positive: Vec<u64>,
    pub negative: Vec<u64>,
    pub positive_mean: Option<f64>,
    pub negative_mean: Option<f64>,
    /// `positive_mean - negative_mean` when both exist.
    pub mean_gap: Option<f64>,
}

fn sampled_pairs(pairs: Vec<(usize, usize)>, max_pairs: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<(usize, usize)> {
    if pairs.len() <= max_pairs {
        return pairs;
    }
    let mut picks = index::sample(rng, pairs.len(), max_pairs).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| pairs[i]).collect()
}

/// Histograms of pairwise cosine similarity, at most `max_pairs` pairs per side.
///
/// Pairs are enumerated in index order and subsampled with a seeded stream,
/// so the result does not depend on what the labels are called.
pub fn pair_similarity_histogram(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    bins: usize,
    max_pairs: usize,
    seed: u64,
) -> Result<PairSimHistogram> {
    check_rows(embeddings, labels)?;
    if bins == 0 {
        return Err(Error::Validation("histogram needs at least one bin".into()));
    }
    let n = embeddings.len();
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                pos.push((i, j));
            } else {
                neg.push((i, j));
            }
        }
    }
    let mut rng = crate::rng::stream(seed, &[0x4157]);
    let pos = sampled_pairs(pos, max_pairs, &mut rng);
    let neg = sampled_pairs(neg, max_pairs, &mut rng);
    let fill = |pairs: &[(usize, usize)]| {
        let mut h = vec![0u64; bins];
        let mut sum = 0.0;
        for &(i, j) in pairs {
            let s = cosine(&embeddings[i], &embeddings[j]);
            sum += s;
            let b = (((s + 1.0) / 2.0) * bins as f64).floor();
            h[(b.max(0.0) as usize).min(bins - 1)] += 1;
        }
        let mean = (!pairs.is_empty()).then(|| sum / pairs.len() as f64);
        (h, mean)
    };
    let (positive, positive_mean) = fill(&pos);
    let (negative, negative_mean) = fill(&neg);
    Ok(PairSimHistogram {
        edges: (0..=bins).map(|b| -1.0 + 2.0 * b as f64 / bins as f64).collect(),
        positive,
        negative,
        positive_mean,
        negative_mean,
        mean_gap: positive_mean.zip(negative_mean).map(|(p, q)| p - q),
    })
}
