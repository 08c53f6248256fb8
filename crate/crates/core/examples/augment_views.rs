//! Positive pairs: entity replacement, token deletion and typo noise.

use langsep::augment::{make_positive_pair, random_deletion, typo_noise, AugmentConfig, EntityPool, TypoOp};
use langsep::data::{fill_template, SONG_NAME};
use langsep::{Example, LabelSpace, LanguageLabel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> langsep::Result<()> {
    let pool: EntityPool = serde_json::from_str(langsep::cli::BUNDLED_ENTITY_POOL)?;
    let space = LabelSpace::massive_default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let (text, spans) = fill_template("toca [SONG_NAME] do [ARTIST_NAME] na sala", &pool, &mut rng)?;
    let ex = Example::new(text, LanguageLabel::new("pt")?, &space, Some(spans))?;
    println!("anchor: {}", ex.text);
    let cfg = AugmentConfig::default();
    for _ in 0..4 {
        let (_, view) = make_positive_pair(&ex, &cfg, &pool, &mut rng);
        println!("  view: {}", view.text);
    }

    let hindi = "अभी इस गाने को चलाओ";
    println!("deletion: {}", random_deletion(hindi, 0.3, &mut rng));
    println!("typos:    {}", typo_noise(hindi, 0.2, &[TypoOp::Substitute, TypoOp::SwapAdjacent], &mut rng));
    println!("pool has {} song names", pool.get(SONG_NAME).map_or(0, <[String]>::len));
    Ok(())
}
