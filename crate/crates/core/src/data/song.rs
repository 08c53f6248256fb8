//! Template-filled music-request utterances.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, GeneratorHeader};
use crate::augment::EntityPool;
use crate::domain::{EntitySpan, Example, LabelSpace, LanguageLabel};
use crate::error::{Error, Result};

pub const SONG_NAME: &str = "SONG_NAME";
pub const ARTIST_NAME: &str = "ARTIST_NAME";
const PLACEHOLDERS: [&str; 2] = [SONG_NAME, ARTIST_NAME];

/// Language code → template strings with `[SONG_NAME]` / `[ARTIST_NAME]` slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct TemplateSet {
    templates: BTreeMap<LanguageLabel, Vec<String>>,
}

impl TryFrom<BTreeMap<String, Vec<String>>> for TemplateSet {
    type Error = Error;
    fn try_from(raw: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut templates = BTreeMap::new();
        for (code, list) in raw {
            templates.insert(LanguageLabel::new(code)?, list);
        }
        TemplateSet::new(templates)
    }
}

impl From<TemplateSet> for BTreeMap<String, Vec<String>> {
    fn from(t: TemplateSet) -> Self {
        t.templates.into_iter().map(|(k, v)| (k.as_str().to_string(), v)).collect()
    }
}

impl TemplateSet {
    pub fn new(templates: BTreeMap<LanguageLabel, Vec<String>>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Validation("template set has no languages".into()));
        }
        for (lang, list) in &templates {
            if list.is_empty() {
                return Err(Error::Validation(format!("language {lang} has no templates")));
            }
            for t in list {
                parse_placeholders(t)?;
            }
        }
        Ok(Self { templates })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageLabel> {
        self.templates.keys()
    }

    pub fn get(&self, lang: &LanguageLabel) -> Option<&[String]> {
        self.templates.get(lang).map(Vec::as_slice)
    }
}

/// Byte ranges and names of the placeholders in a template, left to right.
pub fn parse_placeholders(template: &str) -> Result<Vec<(usize, usize, &'static str)>> {
    let mut out = Vec::new();
    let mut rest = 0;
    while let Some(open) = template[rest..].find('[').map(|i| i + rest) {
        let close = template[open..]
            .find(']')
            .map(|i| i + open)
            .ok_or_else(|| Error::Validation(format!("unterminated placeholder in {template:?}")))?;
        let name = &template[open + 1..close];
        let known = PLACEHOLDERS
            .iter()
            .find(|p| **p == name)
            .ok_or_else(|| Error::Validation(format!("unknown placeholder [{name}] in {template:?}")))?;
        out.push((open, close + 1, *known));
        rest = close + 1;
    }
    if template[rest..].contains(']') {
        return Err(Error::Validation(format!("stray ']' in {template:?}")));
    }
    Ok(out)
}

/// Fills every placeholder with a uniform draw from the pool and records the spans.
pub fn fill_template<R: Rng + ?Sized>(
    template: &str,
    pool: &EntityPool,
    rng: &mut R,
) -> Result<(String, Vec<EntitySpan>)> {
    let slots = parse_placeholders(template)?;
    let mut text = String::with_capacity(template.len() + 32);
    let mut spans = Vec::with_capacity(slots.len());
    let mut cursor = 0;
    for (start, end, kind) in slots {
        text.push_str(&template[cursor..start]);
        let entity = pool
            .get(kind)
            .and_then(|c| c.choose(rng))
            .ok_or_else(|| Error::Generation(format!("entity pool has no entries for [{kind}]")))?;
        spans.push(EntitySpan {
            start: text.len(),
            end: text.len() + entity.len(),
            entity_type: kind.to_string(),
        });
        text.push_str(entity);
        cursor = end;
    }
    text.push_str(&template[cursor..]);
    Ok((text, spans))
}

/// `n_per_lang` utterances for every template language, in language order.
///
/// Languages outside `label_space` become OOD examples.
pub fn generate_song_corpus(
    templates: &TemplateSet,
    pool: &EntityPool,
    n_per_lang: usize,
    seed: u64,
    label_space: &LabelSpace,
) -> Result<(Corpus, GeneratorHeader)> {
    for kind in PLACEHOLDERS {
        if pool.get(kind).is_none_or(<[String]>::is_empty) {
            return Err(Error::Generation(format!("entity pool has no entries for [{kind}]")));
        }
    }
    let mut examples = Vec::with_capacity(n_per_lang * templates.templates.len());
    for (li, (lang, list)) in templates.templates.iter().enumerate() {
        let mut rng = crate::rng::stream(seed, &[0x5016, li as u64]);
        for _ in 0..n_per_lang {
            let template = list.choose(&mut rng).expect("non-empty template list");
            let (text, spans) = fill_template(template, pool, &mut rng)?;
            examples.push(Example::new(text, lang.clone(), label_space, Some(spans))?);
        }
    }
    let header = GeneratorHeader::new("song", seed, serde_json::json!({ "n_per_lang": n_per_lang }));
    let corpus = Corpus::new(examples, label_space.clone(), format!("song seed={seed}"))?;
    Ok((corpus, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> EntityPool {
        let mut m = BTreeMap::new();
        m.insert(SONG_NAME.into(), vec!["G2 K1".into(), "Penny Lane".into()]);
        m.insert(ARTIST_NAME.into(), vec!["Tara Putra".into()]);
        EntityPool(m)
    }

    fn templates() -> TemplateSet {
        let mut m = BTreeMap::new();
        m.insert("pt".to_string(), vec!["toca por favor [SONG_NAME] do [ARTIST_NAME]".to_string()]);
        m.insert("de".to_string(), vec!["spiel [SONG_NAME]".to_string(), "lass [SONG_NAME] von [ARTIST_NAME] laufen".to_string()]);
        TemplateSet::try_from(m).unwrap()
    }

    #[test]
    fn placeholder_parsing() {
        let p = parse_placeholders("toca [SONG_NAME] do [ARTIST_NAME]").unwrap();
        assert_eq!(p, vec![(5, 16, SONG_NAME), (20, 33, ARTIST_NAME)]);
        assert!(parse_placeholders("toca [SONG").is_err());
        assert!(parse_placeholders("toca [ALBUM]").is_err());
        assert!(parse_placeholders("toca ]").is_err());
        assert!(parse_placeholders("no slots").unwrap().is_empty());
    }

    #[test]
    fn portuguese_template_fills_two_spans() {
        let (c, _) = generate_song_corpus(&templates(), &pool(), 20, 1, &LabelSpace::massive_default()).unwrap();
        let pt: Vec<_> = c.examples.iter().filter(|e| e.lang.as_str() == "pt").collect();
        assert_eq!(pt.len(), 20);
        for e in pt {
            assert!(e.text.starts_with("toca por favor "));
            let spans = e.entity_spans.as_ref().unwrap();
            assert_eq!(spans.len(), 2);
            assert_eq!(&e.text[spans[1].start..spans[1].end], "Tara Putra");
        }
        assert!(c.examples.iter().any(|e| e.text == "toca por favor G2 K1 do Tara Putra"));
    }

    #[test]
    fn deterministic_and_counted() {
        let space = LabelSpace::massive_default();
        let (a, ha) = generate_song_corpus(&templates(), &pool(), 50, 9, &space).unwrap();
        let (b, hb) = generate_song_corpus(&templates(), &pool(), 50, 9, &space).unwrap();
        assert_eq!(a.to_jsonl(Some(&ha)).unwrap(), b.to_jsonl(Some(&hb)).unwrap());
        assert_eq!(a.len(), 100);
    }

    #[test]
    fn missing_pool_entries_name_the_placeholder() {
        let mut p = pool();
        p.0.insert(ARTIST_NAME.into(), vec![]);
        let err = generate_song_corpus(&templates(), &p, 5, 1, &LabelSpace::massive_default()).unwrap_err();
        assert!(err.to_string().contains("ARTIST_NAME"));
    }

    #[test]
    fn languages_outside_space_are_ood() {
        let mut m = BTreeMap::new();
        m.insert("sv".to_string(), vec!["spela [SONG_NAME]".to_string()]);
        m.insert("en".to_string(), vec!["play [SONG_NAME]".to_string()]);
        let t = TemplateSet::try_from(m).unwrap();
        let (c, _) = generate_song_corpus(&t, &pool(), 3, 1, &LabelSpace::massive_default()).unwrap();
        assert_eq!(c.in_domain_count(), 3);
        assert_eq!(c.len(), 6);
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn spans_slice_sampled_entities(seed in 0u64..200) {
            let (c, _) = generate_song_corpus(&templates(), &pool(), 5, seed, &LabelSpace::massive_default()).unwrap();
            for e in &c.examples {
                for s in e.entity_spans.as_ref().unwrap() {
                    let slice = &e.text[s.start..s.end];
                    prop_assert!(pool().get(&s.entity_type).unwrap().iter().any(|x| x == slice));
                }
            }
        }
    }
}
