//! Epoch loop over positive-pair batches: augmentation, forward pass,
//! combined loss, backward pass, clipping and AdamW under a cosine schedule.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, CheckpointMeta};
pub use optim::{adamw_step, clip_global_norm, cosine_lr, OptimizerState, BETA1, BETA2, EPSILON};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::augment::{make_positive_pair, AugmentConfig, EntityPool};
use crate::data::{sample_batches, Corpus};
use crate::domain::{Hyperparams, MarginMatrix, MarginTable};
use crate::error::{Error, Result};
use crate::losses::{combine, total_loss, BatchEmbeddings, LossBreakdown};
use crate::model::{
    backward, featurize, forward, FeaturizerConfig, ForwardOutputs, ModelConfig, ModelParams, OutputGrads,
    ParamGrads, SparseFeatures,
};

/// Everything that shapes a training run apart from the data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hyperparams: Hyperparams,
    pub margins: MarginTable,
    pub augment: AugmentConfig,
    pub featurizer: FeaturizerConfig,
    pub model: ModelConfig,
    /// Worker threads for featurization and forward passes; 1 is fully sequential.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyperparams: Hyperparams::default(),
            margins: MarginTable::default(),
            augment: AugmentConfig::default(),
            featurizer: FeaturizerConfig::default(),
            model: ModelConfig::default(),
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    pub l_indomain: f64,
    pub l_langid: f64,
    pub l_instance: f64,
    pub l_class: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
}

pub const TRAIN_LOG_HEADER: &str = "epoch,step,lr,l_indomain,l_langid,l_instance,l_class,total";

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAIN_LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.epoch, r.step, r.lr, r.l_indomain, r.l_langid, r.l_instance, r.l_class, r.total
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    /// Path of the final checkpoint when an output directory was given.
    pub checkpoint_path: Option<PathBuf>,
}

/// Forward passes for a list of feature vectors, optionally on a thread pool.
pub fn forward_all(params: &ModelParams, feats: &[SparseFeatures], pool: Option<&rayon::ThreadPool>) -> Result<Vec<ForwardOutputs>> {
    match pool {
        Some(pool) => pool.install(|| feats.par_iter().map(|f| forward(params, f)).collect()),
        None => feats.iter().map(|f| forward(params, f)).collect(),
    }
}

/// Model outputs for every example in `corpus`, in corpus order.
pub fn predict(params: &ModelParams, featurizer: &FeaturizerConfig, corpus: &Corpus) -> Result<Vec<ForwardOutputs>> {
    corpus
        .examples
        .iter()
        .map(|e| forward(params, &featurize(&e.text, featurizer)))
        .collect()
}

/// Loss and parameter gradients of the combined objective on fixed rows.
///
/// `feats[i]` is the input of row `i` and `labels[i]` its class (`None` = OOD).
pub fn objective_and_grads(
    params: &ModelParams,
    feats: &[SparseFeatures],
    labels: &[Option<usize>],
    margins: &MarginMatrix,
    hp: &Hyperparams,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(LossBreakdown, ParamGrads)> {
    let outs = forward_all(params, feats, pool)?;
    let (loss, _) = objective_from_outputs(&outs, labels, margins, hp)?;
    let og: Vec<OutputGrads> = (0..outs.len())
        .map(|i| OutputGrads {
            indomain: loss.grads_indomain_logits[i].clone(),
            langid: loss.grads_langid_logits[i].clone(),
            z: loss.grads_z[i].clone(),
        })
        .collect();
    let grads = backward(params, feats, &og)?;
    Ok((loss, grads))
}

/// Loss value only, evaluated from precomputed forward outputs.
pub fn objective_from_outputs(
    outs: &[ForwardOutputs],
    labels: &[Option<usize>],
    margins: &MarginMatrix,
    hp: &Hyperparams,
) -> Result<(LossBreakdown, BatchEmbeddings)> {
    let z: Vec<Vec<f64>> = outs.iter().map(|o| o.z.clone()).collect();
    let ind: Vec<Vec<f64>> = outs.iter().map(|o| o.indomain_logits.clone()).collect();
    let lang: Vec<Vec<f64>> = outs.iter().map(|o| o.langid_logits.clone()).collect();
    let batch = BatchEmbeddings::new(z, labels.to_vec())?;
    let loss = total_loss(&batch, &ind, &lang, margins, hp)?;
    Ok((loss, batch))
}

fn dump_batch(out_dir: Option<&Path>, epoch: usize, step: u64, corpus: &Corpus, indices: &[usize], texts: &[String]) -> Option<PathBuf> {
    let dir = out_dir?;
    let path = dir.join(format!("debug-batch-e{epoch}-s{step}.jsonl"));
    let mut body = String::new();
    for (k, &i) in indices.iter().enumerate() {
        let line = serde_json::json!({
            "index": i,
            "lang": corpus.examples[i].lang.as_str(),
            "text": corpus.examples[i].text,
            "view": texts.get(indices.len() + k),
        });
        let _ = writeln!(body, "{line}");
    }
    fs::write(&path, body).ok().map(|_| path)
}

/// Trains a fresh model on `corpus` with the combined objective.
///
/// With `out_dir`, a checkpoint is written after every epoch
/// (`epoch-<n>.ckpt`), plus `final.ckpt` and `train_log.csv` at the end.
/// Single-threaded runs are bit-for-bit reproducible under `hp.seed`;
/// multi-threaded runs are too, since only per-row forward passes fan out.
pub fn train(corpus: &Corpus, cfg: &TrainConfig, pool: &EntityPool, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let hp = &cfg.hyperparams;
    hp.validate()?;
    cfg.featurizer.validate()?;
    cfg.model.validate()?;
    cfg.augment.validate()?;
    if corpus.is_empty() {
        return Err(Error::Contract("training corpus is empty".into()));
    }
    let space = &corpus.label_space;
    let margins = cfg.margins.resolve(space)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let threads = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Validation(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut params = ModelParams::init(cfg.featurizer.num_buckets, space.num_classes(), &cfg.model, hp.seed);
    let mut state = OptimizerState::new(&params);
    let labels = corpus.class_labels();
    let anchor_feats: Vec<SparseFeatures> = corpus.examples.iter().map(|e| featurize(&e.text, &cfg.featurizer)).collect();
    let mut log = TrainLog::default();
    let mut meta = CheckpointMeta {
        hyperparams: hp.clone(),
        model: cfg.model,
        featurizer: cfg.featurizer.clone(),
        label_space: space.clone(),
        epochs_completed: 0,
    };

    for epoch in 0..hp.epochs {
        let batches = sample_batches(corpus, hp, epoch)?;
        let n_batches = batches.len();
        for (bi, batch) in batches.iter().enumerate() {
            let n = batch.indices.len();
            let mut feats = Vec::with_capacity(2 * n);
            let mut row_labels = Vec::with_capacity(2 * n);
            let mut view_texts = Vec::with_capacity(2 * n);
            let mut views = Vec::with_capacity(n);
            for &i in &batch.indices {
                let mut rng = crate::rng::stream(hp.seed, &[0xA06, epoch as u64, i as u64]);
                let (_, view) = make_positive_pair(&corpus.examples[i], &cfg.augment, pool, &mut rng);
                feats.push(anchor_feats[i].clone());
                row_labels.push(labels[i]);
                view_texts.push(corpus.examples[i].text.clone());
                views.push(view.text);
            }
            let view_feats: Vec<SparseFeatures> = match &threads {
                Some(tp) => tp.install(|| views.par_iter().map(|t| featurize(t, &cfg.featurizer)).collect()),
                None => views.iter().map(|t| featurize(t, &cfg.featurizer)).collect(),
            };
            feats.extend(view_feats);
            for &i in &batch.indices {
                row_labels.push(labels[i]);
            }
            view_texts.extend(views);

            let step = state.t + 1;
            let diverged = |what: String| {
                let dumped = dump_batch(out_dir, epoch, step, corpus, &batch.indices, &view_texts);
                Error::Numeric(format!(
                    "{what} at epoch {epoch} step {step}{}",
                    dumped.map(|p| format!("; batch written to {}", p.display())).unwrap_or_default()
                ))
            };
            let (loss, mut grads) = match objective_and_grads(&params, &feats, &row_labels, &margins, hp, threads.as_ref()) {
                Err(Error::Numeric(m)) => return Err(diverged(m)),
                r => r?,
            };
            if !loss.total.is_finite() {
                return Err(diverged(format!("total loss is {}", loss.total)));
            }
            clip_global_norm(&mut grads, hp.grad_clip);
            let lr = cosine_lr(epoch as f64 + bi as f64 / n_batches as f64, hp);
            match adamw_step(&mut params, &grads, &mut state, lr, hp.weight_decay) {
                Err(Error::Numeric(m)) => return Err(diverged(m)),
                r => r?,
            }
            params.round_to_f32();
            state.m.round_to_f32();
            state.v.round_to_f32();
            log.records.push(StepRecord {
                epoch,
                step,
                lr,
                l_indomain: loss.l_indomain,
                l_langid: loss.l_langid,
                l_instance: loss.l_instance,
                l_class: loss.l_class,
                total: loss.total,
            });
            debug_assert_eq!(loss.total, combine(hp, loss.l_indomain, loss.l_langid, loss.l_instance, loss.l_class));
        }
        meta.epochs_completed = epoch + 1;
        if let Some(dir) = out_dir {
            let ckpt = Checkpoint {
                params: params.clone(),
                state: state.clone(),
                meta: meta.clone(),
            };
            save_checkpoint(&ckpt, &dir.join(format!("epoch-{}.ckpt", epoch + 1)))?;
        }
        if let Some(last) = log.records.last() {
            log::info!("epoch {} done: step {} total loss {:.5}", epoch + 1, last.step, last.total);
        }
    }

    let checkpoint = Checkpoint {
        params,
        state,
        meta,
    };
    let checkpoint_path = match out_dir {
        Some(dir) => {
            let p = dir.join("final.ckpt");
            save_checkpoint(&checkpoint, &p)?;
            log.write_csv(&dir.join("train_log.csv"))?;
            Some(p)
        }
        None => None,
    };
    Ok(TrainOutcome {
        checkpoint,
        log,
        checkpoint_path,
    })
}
