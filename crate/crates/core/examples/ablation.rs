//! Baseline vs. full objective on a synthetic corpus with one confusable pair.
//!
//! ```text
//! cargo run --release --example ablation -- [seeds] [epochs] [n_per_lang]
//! ```

use langsep::augment::{AugmentConfig, EntityPool};
use langsep::data::ConfusableSources;
use langsep::eval::{classification_report, embedding_stats};
use langsep::model::{FeaturizerConfig, ModelConfig};
use langsep::trainer::{predict, train, TrainConfig};
use langsep::{Hyperparams, MarginMode, MarginTable, Preset};

fn main() -> langsep::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (seeds, epochs, n_per_lang) = (arg(0, 3), arg(1, 5), arg(2, 2000));

    for seed in 0..seeds as u64 {
        let sources = ConfusableSources::new(5, 0, 0.7, seed)?;
        let (train_set, _) = sources.sample(n_per_lang, seed)?;
        let (test_set, _) = sources.sample(2000, seed + 1000)?;
        for preset in [Preset::Baseline, Preset::BaselineSupCon, Preset::Full] {
            let mut hp = Hyperparams {
                epochs,
                lr_max: 2e-2,
                lr_min: 2e-4,
                seed,
                margin_mode: MarginMode::Enforcing,
                ..Hyperparams::default()
            };
            hp.apply_preset(preset);
            let cfg = TrainConfig {
                hyperparams: hp,
                margins: MarginTable::new(0.4, 0.0, [(ConfusableSources::label(0), ConfusableSources::label(1))])?,
                augment: AugmentConfig {
                    enable_entity_replacement: false,
                    ..AugmentConfig::default()
                },
                featurizer: FeaturizerConfig {
                    num_buckets: 1 << 14,
                    ..FeaturizerConfig::default()
                },
                model: ModelConfig {
                    d_emb: 32,
                    d_hid: 64,
                    d_proj: 32,
                },
                threads: 1,
            };
            let t0 = std::time::Instant::now();
            let out = train(&train_set, &cfg, &EntityPool::default(), None)?;
            let outputs = predict(&out.checkpoint.params, &cfg.featurizer, &test_set)?;
            let lang = classification_report(&outputs, &test_set)?.language.expect("in-domain test set");
            let pair_f1 = (lang.per_class[0].f1 + lang.per_class[1].f1) / 2.0;
            let z: Vec<Vec<f64>> = outputs.iter().map(|o| o.z.clone()).collect();
            let labels: Vec<usize> = test_set.class_labels().into_iter().flatten().collect();
            let stats = embedding_stats(&z, &labels)?;
            println!(
                "seed {seed} {preset:?}: macro F1 {:.4}, l0/l1 F1 {pair_f1:.4}, inter/intra {:.2} ({:.1}s)",
                lang.macro_f1,
                stats.ratio,
                t0.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
