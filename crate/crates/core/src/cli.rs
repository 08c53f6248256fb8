//! The `langsep` command line: data generation, training, evaluation,
//! embedding export, gradient checking and report diffs.
//!
//! Exit codes: 0 on success, 1 for usage and validation errors, 2 for
//! runtime and numeric failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::augment::EntityPool;
use crate::config::RunConfig;
use crate::data::{load_jsonl, ConfusableSources, Corpus, TemplateSet};
use crate::domain::Preset;
use crate::error::{Error, Result};
use crate::eval::{
    classification_report, embedding_stats, export_embeddings, histogram_csv, knn_eval, matrix_csv,
    pair_similarity_histogram, row_normalize, sha256_file, sha256_hex, EvalReport, KnnSummary, Provenance,
};
use crate::gradcheck::grad_check_suite;
use crate::trainer::{load_checkpoint, predict, train};

pub const BUNDLED_TEMPLATES: &str = include_str!("../assets/templates.json");
pub const BUNDLED_ENTITY_POOL: &str = include_str!("../assets/entity_pool.json");
pub const RESOLVED_CONFIG: &str = "resolved-config.json";

#[derive(Debug, Parser)]
#[command(name = "langsep", version, about = "Language identification with margin-based contrastive training")]
struct Cli {
    /// JSON run configuration; missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// baseline, baseline-supcon or full.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes a synthetic corpus as JSONL.
    #[command(subcommand)]
    GenData(GenData),
    /// Trains a model and writes per-epoch checkpoints.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints an evaluation report and writes report, confusion and histogram files.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes projected embeddings as CSV.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares analytic and finite-difference gradients on random small models.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        models: usize,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Difference of two row-normalized confusion matrices (first minus second).
    ReportDiff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum GenData {
    /// Song-request utterances from templates and an entity pool.
    Song {
        #[arg(long)]
        n_per_lang: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        entity_pool: Option<PathBuf>,
    },
    /// Synthetic trigram languages with one deliberately confusable pair.
    Confusable(ConfusableArgs),
}

#[derive(Debug, Args)]
struct ConfusableArgs {
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.7)]
    overlap: f64,
    #[arg(long)]
    n_per_lang: usize,
    /// Extra languages outside the label space.
    #[arg(long, default_value_t = 0)]
    ood_languages: usize,
    /// Seed for drawing utterances; defaults to the source seed. Use a
    /// different value to draw a held-out set from the same languages.
    #[arg(long)]
    sample_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.hyperparams.seed = s;
    }
    if let Some(p) = cli.preset {
        cfg.preset = Some(p);
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.resolve_preset();
    Ok(cfg)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        None => Ok(()),
    }
}

fn sibling_dir(file: &Path) -> PathBuf {
    file.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Writes the resolved config into `dir` and returns its hash.
fn write_resolved(cfg: &RunConfig, dir: &Path) -> Result<String> {
    let json = cfg.to_json()?;
    write_file(&dir.join(RESOLVED_CONFIG), &json)?;
    Ok(sha256_hex(json.as_bytes()))
}

fn require_path(p: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = p.ok_or_else(|| Error::Validation(format!("no {what} given (flag or config paths)")))?;
    if !p.exists() {
        return Err(Error::Validation(format!("{what} {} does not exist", p.display())));
    }
    Ok(p)
}

fn entity_pool(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<EntityPool> {
    match flag.or_else(|| cfg.paths.entity_pool.clone()) {
        Some(p) => EntityPool::load(&p),
        None => Ok(serde_json::from_str(BUNDLED_ENTITY_POOL)?),
    }
}

fn load_corpus_for(cfg: &RunConfig, flag: Option<PathBuf>, fallback: Option<PathBuf>, space: &crate::LabelSpace) -> Result<Corpus> {
    let path = require_path(flag.or(fallback).or_else(|| cfg.paths.corpus.clone()), "corpus")?;
    load_jsonl(&path, space)
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli)?;
    match cli.command {
        Command::GenData(GenData::Song {
            n_per_lang,
            out,
            templates,
            entity_pool: pool_path,
        }) => {
            cfg.validate()?;
            let templates = match templates.or_else(|| cfg.paths.templates.clone()) {
                Some(p) => TemplateSet::load(&p)?,
                None => serde_json::from_str(BUNDLED_TEMPLATES)?,
            };
            let pool = entity_pool(&cfg, pool_path)?;
            let seed = cfg.hyperparams.seed;
            let (corpus, header) = crate::data::generate_song_corpus(&templates, &pool, n_per_lang, seed, &cfg.label_space)?;
            ensure_parent(&out)?;
            corpus.write_jsonl(&out, Some(&header))?;
            write_resolved(&cfg, &sibling_dir(&out))?;
            log::info!("wrote {} examples to {}", corpus.len(), out.display());
            println!("{}", out.display());
        }
        Command::GenData(GenData::Confusable(a)) => {
            let seed = cfg.hyperparams.seed;
            let sources = ConfusableSources::new(a.k, a.ood_languages, a.overlap, seed)?;
            let (corpus, header) = sources.sample(a.n_per_lang, a.sample_seed.unwrap_or(seed))?;
            ensure_parent(&a.out)?;
            corpus.write_jsonl(&a.out, Some(&header))?;
            cfg.label_space = sources.label_space();
            // Only the confusable pair gets a margin.
            cfg.margins = crate::MarginTable::new(
                cfg.margins.delta_high(),
                cfg.margins.delta_low(),
                [(ConfusableSources::label(0), ConfusableSources::label(1))],
            )?;
            write_resolved(&cfg, &sibling_dir(&a.out))?;
            log::info!("wrote {} examples to {}", corpus.len(), a.out.display());
            println!("{}", a.out.display());
        }
        Command::Train { corpus, out } => {
            cfg.validate()?;
            let corpus_path = require_path(corpus.or_else(|| cfg.paths.corpus.clone()), "corpus")?;
            let out = out
                .or_else(|| cfg.paths.output_dir.clone())
                .ok_or_else(|| Error::Validation("no output directory given".into()))?;
            let pool = entity_pool(&cfg, None)?;
            let data = load_jsonl(&corpus_path, &cfg.label_space)?;
            cfg.paths.corpus = Some(corpus_path);
            cfg.paths.output_dir = Some(out.clone());
            write_resolved(&cfg, &out)?;
            let outcome = train(&data, &cfg.train_config(), &pool, Some(&out))?;
            if let Some(p) = outcome.checkpoint_path {
                println!("{}", p.display());
            }
        }
        Command::Eval { checkpoint, corpus, out } => {
            cfg.validate()?;
            let ckpt_path = require_path(Some(checkpoint), "checkpoint")?;
            let ckpt = load_checkpoint(&ckpt_path)?;
            let space = ckpt.meta.label_space.clone();
            let data = load_corpus_for(&cfg, corpus, cfg.paths.eval_corpus.clone(), &space)?;
            let outputs = predict(&ckpt.params, &ckpt.meta.featurizer, &data)?;
            let mut report = classification_report(&outputs, &data)?;

            let labels = data.class_labels();
            let (emb, lab): (Vec<Vec<f64>>, Vec<usize>) = outputs
                .iter()
                .zip(&labels)
                .filter_map(|(o, l)| l.map(|c| (o.z.clone(), c)))
                .unzip();
            let distinct = lab.iter().collect::<std::collections::BTreeSet<_>>().len();
            if distinct >= 2 {
                report.metadata.embedding_stats = Some(embedding_stats(&emb, &lab)?);
            }
            if cfg.eval.knn_k < emb.len() {
                let (top1, top5) = knn_eval(&emb, &lab, cfg.eval.knn_k)?;
                report.metadata.knn = Some(KnnSummary { k: cfg.eval.knn_k, top1, top5 });
            }
            let out = out.or_else(|| cfg.paths.output_dir.clone());
            if let Some(dir) = &out {
                let config_sha256 = write_resolved(&cfg, dir)?;
                report.metadata.provenance = Some(Provenance {
                    checkpoint_sha256: sha256_file(&ckpt_path)?,
                    config_sha256,
                });
                let hist = pair_similarity_histogram(&emb, &lab, cfg.eval.histogram_bins, cfg.eval.max_pairs, cfg.hyperparams.seed)?;
                write_file(&dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
                write_file(&dir.join("pair_similarity.csv"), histogram_csv(&hist))?;
                if let Some(lang) = &report.language {
                    let counts: Vec<Vec<f64>> = lang.confusion.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
                    write_file(&dir.join("confusion.csv"), matrix_csv(&report.metadata.labels, &counts))?;
                    write_file(
                        &dir.join("confusion_normalized.csv"),
                        matrix_csv(&report.metadata.labels, &row_normalize(&lang.confusion)),
                    )?;
                }
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Embed { checkpoint, corpus, out } => {
            let ckpt_path = require_path(Some(checkpoint), "checkpoint")?;
            let ckpt = load_checkpoint(&ckpt_path)?;
            let data = load_corpus_for(&cfg, corpus, None, &ckpt.meta.label_space)?;
            let outputs = predict(&ckpt.params, &ckpt.meta.featurizer, &data)?;
            write_file(&out, export_embeddings(&outputs, &data)?)?;
            write_resolved(&cfg, &sibling_dir(&out))?;
            println!("{}", out.display());
        }
        Command::GradCheck { models, step, out } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::Validation(format!("step must be positive, got {step}")));
            }
            let r = grad_check_suite(cfg.hyperparams.seed, models, step)?;
            if let Some(dir) = &out {
                write_resolved(&cfg, dir)?;
                write_file(&dir.join("grad-check.json"), serde_json::to_string_pretty(&r)? + "\n")?;
            }
            println!("max relative error {:e} ({} coordinates over {} models, worst at {}[{}])", r.max_rel_error, r.coordinates, r.models, r.worst_tensor, r.worst_index);
            if r.max_rel_error >= 1e-4 {
                return Err(Error::Numeric(format!("gradient check failed: {:e} >= 1e-4", r.max_rel_error)));
            }
        }
        Command::ReportDiff { a, b, out } => {
            let load = |p: &Path| -> Result<EvalReport> {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Ok(serde_json::from_str(&text)?)
            };
            let (ra, rb) = (load(&a)?, load(&b)?);
            let conf = |r: &EvalReport, p: &Path| {
                r.language
                    .as_ref()
                    .map(|l| row_normalize(&l.confusion))
                    .ok_or_else(|| Error::Validation(format!("{} has no language metrics", p.display())))
            };
            let diff = crate::eval::confusion_diff(&conf(&ra, &a)?, &conf(&rb, &b)?)?;
            let csv = matrix_csv(&ra.metadata.labels, &diff);
            match out {
                Some(p) => {
                    write_file(&p, &csv)?;
                    write_resolved(&cfg, &sibling_dir(&p))?;
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}
