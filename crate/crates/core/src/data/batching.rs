use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::Corpus;
use crate::domain::Hyperparams;
use crate::error::{Error, Result};

/// Example indices forming one training batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchSpec {
    pub indices: Vec<usize>,
}

fn class_counts(batch: &[usize], labels: &[Option<usize>]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for &i in batch {
        if let Some(c) = labels[i] {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    counts
}

/// One shuffled pass over the corpus, cut into batches of `hp.batch_size`.
///
/// The shuffle is keyed by `(hp.seed, epoch)`. A class that appears only
/// once in a batch is repaired by swapping in a same-class example from a
/// later batch; singletons that cannot be repaired are left alone.
pub fn sample_batches(corpus: &Corpus, hp: &Hyperparams, epoch: usize) -> Result<Vec<BatchSpec>> {
    if hp.batch_size < 4 {
        return Err(Error::Contract(format!(
            "batch_size must be at least 4, got {}",
            hp.batch_size
        )));
    }
    if corpus.is_empty() {
        return Err(Error::Contract("cannot batch an empty corpus".into()));
    }
    let labels = corpus.class_labels();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = crate::rng::stream(hp.seed, &[0xBA7C, epoch as u64]);
    order.shuffle(&mut rng);

    let mut batches: Vec<Vec<usize>> = order.chunks(hp.batch_size).map(<[usize]>::to_vec).collect();
    for b in 0..batches.len() {
        let counts = class_counts(&batches[b], &labels);
        let singletons: Vec<usize> = counts.iter().filter(|(_, &n)| n == 1).map(|(&c, _)| c).collect();
        for class in singletons {
            if class_counts(&batches[b], &labels).get(&class) != Some(&1) {
                continue;
            }
            // Donor: a same-class example in a later batch, preferring one whose
            // batch keeps at least two of that class afterwards.
            let mut donor = None;
            for later in b + 1..batches.len() {
                let n_later = batches[later].iter().filter(|&&i| labels[i] == Some(class)).count();
                if let Some(pos) = batches[later].iter().position(|&i| labels[i] == Some(class)) {
                    let good = n_later != 2;
                    if donor.is_none() || good {
                        donor = Some((later, pos));
                    }
                    if good {
                        break;
                    }
                }
            }
            let Some((later, pos)) = donor else { continue };
            // Victim: OOD, another singleton, or a member of a class with >= 3 rows.
            let counts_now = class_counts(&batches[b], &labels);
            let victim = batches[b].iter().position(|&i| match labels[i] {
                None => true,
                Some(c) if c == class => false,
                Some(c) => counts_now[&c] == 1 || counts_now[&c] >= 3,
            });
            if let Some(v) = victim {
                let tmp = batches[b][v];
                batches[b][v] = batches[later][pos];
                batches[later][pos] = tmp;
            }
        }
    }
    Ok(batches.into_iter().map(|indices| BatchSpec { indices }).collect())
}
