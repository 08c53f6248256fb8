use langsep::augment::{AugmentConfig, EntityPool};
use langsep::data::{generate_confusable_corpus, Corpus};
use langsep::model::{FeaturizerConfig, ModelConfig};
use langsep::trainer::{load_checkpoint, predict, save_checkpoint, train, TrainConfig};
use langsep::{Error, Hyperparams, MarginTable};

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        hyperparams: Hyperparams {
            epochs: 3,
            batch_size: 24,
            lr_max: 1e-2,
            lr_min: 1e-4,
            seed,
            ..Hyperparams::default()
        },
        margins: MarginTable::zero(),
        augment: AugmentConfig {
            enable_entity_replacement: false,
            ..AugmentConfig::default()
        },
        featurizer: FeaturizerConfig {
            num_buckets: 2048,
            ..FeaturizerConfig::default()
        },
        model: ModelConfig {
            d_emb: 16,
            d_hid: 16,
            d_proj: 8,
        },
        threads: 1,
    }
}

fn corpus() -> Corpus {
    generate_confusable_corpus(3, 0.5, 60, 2).unwrap().0
}

#[test]
fn loss_goes_down() {
    let mut cfg = small_config(1);
    cfg.hyperparams.epochs = 10;
    cfg.hyperparams.t_max = 10;
    cfg.hyperparams.lr_max = 3e-2;
    let out = train(&corpus(), &cfg, &EntityPool::default(), None).unwrap();
    let recs = &out.log.records;
    let first: f64 = recs[..5].iter().map(|r| r.l_langid).sum::<f64>() / 5.0;
    let last: f64 = recs[recs.len() - 5..].iter().map(|r| r.l_langid).sum::<f64>() / 5.0;
    assert!(last < first * 0.8, "{first} -> {last}");
    assert_eq!(out.checkpoint.state.t as usize, recs.len());
    assert_eq!(out.checkpoint.meta.epochs_completed, 10);
}

#[test]
fn threads_do_not_change_results() {
    let c = corpus();
    let a = train(&c, &small_config(4), &EntityPool::default(), None).unwrap();
    let mut cfg = small_config(4);
    cfg.threads = 3;
    let b = train(&c, &cfg, &EntityPool::default(), None).unwrap();
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.log, b.log);
}

#[test]
fn seeds_matter() {
    let c = corpus();
    let a = train(&c, &small_config(1), &EntityPool::default(), None).unwrap();
    let b = train(&c, &small_config(2), &EntityPool::default(), None).unwrap();
    assert_ne!(a.checkpoint.params, b.checkpoint.params);
}

#[test]
fn parameters_stay_f32_representable() {
    let out = train(&corpus(), &small_config(1), &EntityPool::default(), None).unwrap();
    for t in out.checkpoint.params.tensors() {
        assert!(t.data.iter().all(|&v| f64::from(v as f32) == v));
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let c = corpus();
    let dir = tempfile::tempdir().unwrap();
    let out = train(&c, &small_config(3), &EntityPool::default(), Some(dir.path())).unwrap();
    let path = out.checkpoint_path.unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, out.checkpoint);
    let p1 = predict(&out.checkpoint.params, &back.meta.featurizer, &c).unwrap();
    let p2 = predict(&back.params, &back.meta.featurizer, &c).unwrap();
    assert_eq!(p1, p2);
    let again = dir.path().join("again.ckpt");
    save_checkpoint(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn diverging_run_stops_with_numeric_error() {
    let mut cfg = small_config(1);
    cfg.hyperparams.lr_max = 1e36;
    let dir = tempfile::tempdir().unwrap();
    match train(&corpus(), &cfg, &EntityPool::default(), Some(dir.path())) {
        Err(Error::Numeric(msg)) => assert!(msg.contains("debug-batch"), "{msg}"),
        other => panic!("expected a numeric error, got {other:?}"),
    }
}

#[test]
fn empty_corpus_is_rejected() {
    let c = Corpus::new(vec![], langsep::LabelSpace::from_codes(&["en", "es"]).unwrap(), "empty").unwrap();
    assert!(train(&c, &small_config(1), &EntityPool::default(), None).is_err());
}
