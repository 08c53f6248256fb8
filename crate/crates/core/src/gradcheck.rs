//! Finite-difference check of the full objective against the analytic backward pass.

use rand::Rng;
use serde::Serialize;

use crate::domain::{Hyperparams, MarginMatrix, MarginMode};
use crate::error::Result;
use crate::model::{featurize, FeaturizerConfig, ModelConfig, ModelParams, SparseFeatures, TENSOR_NAMES};
use crate::trainer::{forward_all, objective_and_grads, objective_from_outputs};

/// Denominator floor for the relative error, so that coordinates whose true
/// gradient is (numerically) zero are judged by absolute error.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Worst coordinate found by a check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
    pub models: usize,
}

/// A small random problem: model, inputs, labels and loss settings.
#[derive(Clone, Debug)]
pub struct Problem {
    pub params: ModelParams,
    pub feats: Vec<SparseFeatures>,
    pub labels: Vec<Option<usize>>,
    pub margins: MarginMatrix,
    pub hp: Hyperparams,
}

impl Problem {
    /// Random model with up to 8 rows, `d_emb, d_hid <= 8`, and a mix of OOD rows.
    pub fn random(seed: u64) -> Self {
        let mut rng = crate::rng::stream(seed, &[0x64AD]);
        let k = rng.gen_range(2..=4);
        let cfg = ModelConfig {
            d_emb: rng.gen_range(2..=8),
            d_hid: rng.gen_range(2..=8),
            d_proj: rng.gen_range(2..=6),
        };
        let featurizer = FeaturizerConfig {
            num_buckets: 32,
            ngram_max: 2,
            ..FeaturizerConfig::default()
        };
        let mut params = ModelParams::zeros(featurizer.num_buckets, k, &cfg);
        for t in params.tensors_mut() {
            for v in &mut t.data {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
        let n = rng.gen_range(4..=8);
        let mut labels: Vec<Option<usize>> = Vec::with_capacity(n);
        for i in 0..n {
            // Pairs of the same label so both contrastive terms have positives.
            let l = if i % 2 == 1 {
                labels[i - 1]
            } else if rng.gen_bool(0.2) {
                None
            } else {
                Some(rng.gen_range(0..k))
            };
            labels.push(l);
        }
        let feats = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..10);
                let text: String = (0..len).map(|_| char::from(b'a' + rng.gen_range(0..6u8))).collect();
                featurize(&text, &featurizer)
            })
            .collect();
        let mut margins = MarginMatrix::zeros(k);
        for a in 0..k {
            for b in a + 1..k {
                let v = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.6) } else { 0.0 };
                margins.set(a, b, v);
            }
        }
        let hp = Hyperparams {
            temperature: rng.gen_range(0.07..0.5),
            lambda1: rng.gen_range(0.5..1.5),
            lambda2: rng.gen_range(0.5..1.5),
            lambda3: rng.gen_range(0.1..1.0),
            margin_mode: if rng.gen_bool(0.5) { MarginMode::AsWritten } else { MarginMode::Enforcing },
            ..Hyperparams::default()
        };
        Self {
            params,
            feats,
            labels,
            margins,
            hp,
        }
    }

    fn loss_at(&self, params: &ModelParams) -> Result<f64> {
        let outs = forward_all(params, &self.feats, None)?;
        Ok(objective_from_outputs(&outs, &self.labels, &self.margins, &self.hp)?.0.total)
    }

    /// Compares every parameter's analytic gradient with a central difference.
    pub fn check(&self, step: f64) -> Result<GradCheckReport> {
        let (_, grads) = objective_and_grads(&self.params, &self.feats, &self.labels, &self.margins, &self.hp, None)?;
        let mut report = GradCheckReport {
            max_rel_error: 0.0,
            worst_tensor: String::new(),
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            coordinates: 0,
            models: 1,
        };
        let mut probe = self.params.clone();
        for (ti, name) in TENSOR_NAMES.iter().enumerate() {
            for idx in 0..self.params.tensors()[ti].data.len() {
                let orig = self.params.tensors()[ti].data[idx];
                probe.tensors_mut()[ti].data[idx] = orig + step;
                let up = self.loss_at(&probe)?;
                probe.tensors_mut()[ti].data[idx] = orig - step;
                let down = self.loss_at(&probe)?;
                probe.tensors_mut()[ti].data[idx] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = grads.tensors()[ti].data[idx];
                let err = relative_error(analytic, numeric);
                report.coordinates += 1;
                if err > report.max_rel_error || report.worst_tensor.is_empty() {
                    report.max_rel_error = err;
                    report.worst_tensor = (*name).to_string();
                    report.worst_index = idx;
                    report.analytic = analytic;
                    report.numeric = numeric;
                }
            }
        }
        Ok(report)
    }
}

/// Runs `models` random problems derived from `seed` and keeps the worst coordinate.
pub fn grad_check_suite(seed: u64, models: usize, step: f64) -> Result<GradCheckReport> {
    let mut worst: Option<GradCheckReport> = None;
    let mut coordinates = 0;
    for m in 0..models {
        let r = Problem::random(crate::rng::derive_seed(seed, &[m as u64])).check(step)?;
        coordinates += r.coordinates;
        if worst.as_ref().is_none_or(|w| r.max_rel_error > w.max_rel_error) {
            worst = Some(r);
        }
    }
    let mut w = worst.unwrap_or(GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
        models: 0,
    });
    w.coordinates = coordinates;
    w.models = models;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_a_few_models() {
        let r = grad_check_suite(3, 4, 1e-4).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert_eq!(r.models, 4);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let p = Problem::random(5);
        let (_, mut g) = objective_and_grads(&p.params, &p.feats, &p.labels, &p.margins, &p.hp, None).unwrap();
        g.w2.data[0] += 0.1;
        let outs = forward_all(&p.params, &p.feats, None).unwrap();
        let base = objective_from_outputs(&outs, &p.labels, &p.margins, &p.hp).unwrap().0.total;
        let mut probe = p.params.clone();
        probe.w2.data[0] += 1e-4;
        let up = objective_from_outputs(&forward_all(&probe, &p.feats, None).unwrap(), &p.labels, &p.margins, &p.hp)
            .unwrap()
            .0
            .total;
        let numeric = (up - base) / 1e-4;
        assert!(relative_error(g.w2.data[0], numeric) > 1e-3);
    }
}
