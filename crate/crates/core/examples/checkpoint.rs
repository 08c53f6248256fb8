//! Trains briefly, writes per-epoch checkpoints and reloads the final one.

use langsep::augment::{AugmentConfig, EntityPool};
use langsep::data::generate_confusable_corpus;
use langsep::model::{FeaturizerConfig, ModelConfig};
use langsep::trainer::{load_checkpoint_for, predict, train, TrainConfig};
use langsep::{Hyperparams, MarginTable};

fn main() -> langsep::Result<()> {
    let (corpus, _) = generate_confusable_corpus(3, 0.6, 100, 5)?;
    let cfg = TrainConfig {
        hyperparams: Hyperparams {
            epochs: 2,
            batch_size: 32,
            lr_max: 1e-2,
            ..Hyperparams::default()
        },
        margins: MarginTable::zero(),
        augment: AugmentConfig {
            enable_entity_replacement: false,
            ..AugmentConfig::default()
        },
        featurizer: FeaturizerConfig {
            num_buckets: 4096,
            ..FeaturizerConfig::default()
        },
        model: ModelConfig {
            d_emb: 16,
            d_hid: 32,
            d_proj: 16,
        },
        threads: 1,
    };
    let dir = std::env::temp_dir().join("langsep-checkpoint-example");
    let out = train(&corpus, &cfg, &EntityPool::default(), Some(&dir))?;
    let path = out.checkpoint_path.expect("output directory was given");
    for entry in std::fs::read_dir(&dir).map_err(|e| langsep::Error::Validation(e.to_string()))? {
        let entry = entry.map_err(|e| langsep::Error::Validation(e.to_string()))?;
        let len = entry.metadata().map(|m| m.len()).unwrap_or(0);
        println!("{:>10} bytes  {}", len, entry.file_name().to_string_lossy());
    }

    let back = load_checkpoint_for(&path, &cfg.featurizer, corpus.label_space.num_classes(), &cfg.model)?;
    assert_eq!(back, out.checkpoint);
    let a = predict(&out.checkpoint.params, &cfg.featurizer, &corpus)?;
    let b = predict(&back.params, &back.meta.featurizer, &corpus)?;
    println!("reloaded step {}, predictions identical: {}", back.state.t, a == b);

    let smaller = ModelConfig { d_hid: 8, ..cfg.model };
    match load_checkpoint_for(&path, &cfg.featurizer, 3, &smaller) {
        Err(e) => println!("loading with the wrong layout fails: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
