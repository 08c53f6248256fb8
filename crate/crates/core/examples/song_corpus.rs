//! Generates the song-request corpus from the bundled templates and
//! rebalances OOD examples to 40%.

use langsep::augment::EntityPool;
use langsep::data::{generate_song_corpus, subsample_ood, TemplateSet};
use langsep::LabelSpace;

fn main() -> langsep::Result<()> {
    let templates: TemplateSet = serde_json::from_str(langsep::cli::BUNDLED_TEMPLATES)?;
    let pool: EntityPool = serde_json::from_str(langsep::cli::BUNDLED_ENTITY_POOL)?;
    let space = LabelSpace::massive_default();
    let (corpus, header) = generate_song_corpus(&templates, &pool, 50, 7, &space)?;
    println!("{} examples, {} in-domain, checksum {}", corpus.len(), corpus.in_domain_count(), corpus.checksum());
    println!("header: {}", serde_json::to_string(&header)?);
    for ex in corpus.examples.iter().step_by(97).take(6) {
        let spans = ex.entity_spans.as_deref().unwrap_or_default();
        let entities: Vec<&str> = spans.iter().map(|s| &ex.text[s.start..s.end]).collect();
        println!("  [{}{}] {}  {:?}", ex.lang, if ex.in_domain { "" } else { ", OOD" }, ex.text, entities);
    }
    let rebalanced = subsample_ood(&corpus, 0.4, 1)?;
    let ood = rebalanced.len() - rebalanced.in_domain_count();
    println!("after subsampling: {ood} of {} are OOD", rebalanced.len());
    Ok(())
}
