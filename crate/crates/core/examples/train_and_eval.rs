//! End to end: synthetic corpus, training, classification report and
//! embedding-space analytics on held-out data.

use langsep::augment::{AugmentConfig, EntityPool};
use langsep::data::ConfusableSources;
use langsep::eval::{classification_report, embedding_stats, knn_eval, pair_similarity_histogram};
use langsep::model::{FeaturizerConfig, ModelConfig};
use langsep::trainer::{predict, train, TrainConfig};
use langsep::{Hyperparams, MarginMode, MarginTable};

fn main() -> langsep::Result<()> {
    // Four in-domain languages plus one OOD language; l0 and l1 overlap heavily.
    let sources = ConfusableSources::new(4, 1, 0.7, 9)?;
    let (train_set, _) = sources.sample(300, 1)?;
    let (test_set, _) = sources.sample(100, 2)?;
    let cfg = TrainConfig {
        hyperparams: Hyperparams {
            epochs: 4,
            batch_size: 64,
            lr_max: 2e-2,
            lr_min: 2e-4,
            t_max: 4,
            margin_mode: MarginMode::Enforcing,
            ..Hyperparams::default()
        },
        margins: MarginTable::new(0.4, 0.0, [(ConfusableSources::label(0), ConfusableSources::label(1))])?,
        augment: AugmentConfig {
            enable_entity_replacement: false,
            ..AugmentConfig::default()
        },
        featurizer: FeaturizerConfig {
            num_buckets: 1 << 13,
            ..FeaturizerConfig::default()
        },
        model: ModelConfig {
            d_emb: 32,
            d_hid: 64,
            d_proj: 32,
        },
        threads: 2,
    };
    let out = train(&train_set, &cfg, &EntityPool::default(), None)?;
    let last = out.log.records.last().expect("at least one step");
    println!("{} steps, final loss {:.4}", last.step, last.total);

    let outputs = predict(&out.checkpoint.params, &cfg.featurizer, &test_set)?;
    let report = classification_report(&outputs, &test_set)?;
    println!("in-domain accuracy {:.3}", report.in_acc);
    if let Some(lang) = &report.language {
        println!("macro F1 {:.3}, top-1 {:.3}, top-5 {:.3}", lang.macro_f1, lang.top1, lang.top5);
        for (c, row) in lang.per_class.iter().zip(&lang.confusion) {
            println!("  {:>3}: F1 {:.3}  confusion {:?}", c.label, c.f1, row);
        }
    }

    let (z, labels): (Vec<Vec<f64>>, Vec<usize>) = outputs
        .iter()
        .zip(test_set.class_labels())
        .filter_map(|(o, l)| l.map(|c| (o.z.clone(), c)))
        .unzip();
    let stats = embedding_stats(&z, &labels)?;
    let (top1, top5) = knn_eval(&z, &labels, 5)?;
    let hist = pair_similarity_histogram(&z, &labels, 20, 5000, 0)?;
    println!("inter {:.4}, intra {:.4}, ratio {:.2}", stats.inter, stats.intra, stats.ratio);
    println!("5-NN top-1 {top1:.3}, top-5 {top5:.3}");
    println!("mean same-class minus cross-class similarity {:.3}", hist.mean_gap.unwrap_or(f64::NAN));
    Ok(())
}
