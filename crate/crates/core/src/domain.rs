//! Shared domain types: language labels, the in-domain label space,
//! utterance examples, the class-pair margin table and training
//! hyperparameters.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A language code such as `"en"` or `"pt"`.
///
/// Codes are non-empty and ASCII with no uppercase letters. Digits are
/// accepted so that synthetic languages (`"l0"`, `"l1"`, ...) fit the same type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageLabel(String);

impl LanguageLabel {
    pub fn new(code: impl Into<String>) -> Result<Self> {
        let code = code.into();
        let ok = !code.is_empty()
            && code
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if !ok {
            return Err(Error::Validation(format!(
                "invalid language code {code:?}: expected non-empty lowercase ASCII"
            )));
        }
        Ok(Self(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageLabel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<LanguageLabel> for String {
    fn from(l: LanguageLabel) -> String {
        l.0
    }
}

impl fmt::Display for LanguageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const DEFAULT_OOD_TOKEN: &str = "out_domain";

/// The ordered set of supported languages plus the single bucket that
/// every other language falls into.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawLabelSpace", into = "RawLabelSpace")]
pub struct LabelSpace {
    in_domain: Vec<LanguageLabel>,
    ood_token: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabelSpace {
    in_domain: Vec<LanguageLabel>,
    #[serde(default = "default_ood_token")]
    ood_token: String,
}

fn default_ood_token() -> String {
    DEFAULT_OOD_TOKEN.to_string()
}

impl TryFrom<RawLabelSpace> for LabelSpace {
    type Error = Error;
    fn try_from(r: RawLabelSpace) -> Result<Self> {
        LabelSpace::with_ood_token(r.in_domain, r.ood_token)
    }
}

impl From<LabelSpace> for RawLabelSpace {
    fn from(s: LabelSpace) -> Self {
        RawLabelSpace {
            in_domain: s.in_domain,
            ood_token: s.ood_token,
        }
    }
}

impl LabelSpace {
    pub fn new(in_domain: Vec<LanguageLabel>) -> Result<Self> {
        Self::with_ood_token(in_domain, DEFAULT_OOD_TOKEN.to_string())
    }

    pub fn with_ood_token(in_domain: Vec<LanguageLabel>, ood_token: String) -> Result<Self> {
        if in_domain.len() < 2 {
            return Err(Error::Validation(format!(
                "label space needs at least 2 in-domain languages, got {}",
                in_domain.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for l in &in_domain {
            if !seen.insert(l.as_str()) {
                return Err(Error::Validation(format!("duplicate in-domain language {l}")));
            }
        }
        if ood_token.is_empty() || seen.contains(ood_token.as_str()) {
            return Err(Error::Validation(format!(
                "ood token {ood_token:?} must be non-empty and not an in-domain language"
            )));
        }
        Ok(Self {
            in_domain,
            ood_token,
        })
    }

    /// Build from string codes, e.g. `LabelSpace::from_codes(&["en", "es"])`.
    pub fn from_codes(codes: &[&str]) -> Result<Self> {
        let labels = codes
            .iter()
            .map(|c| LanguageLabel::new(*c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }

    /// The ten-language setup used for the MASSIVE protocol.
    pub fn massive_default() -> Self {
        Self::from_codes(&["en", "es", "fr", "ar", "hi", "nl", "de", "it", "pt", "ja"])
            .expect("static label space is valid")
    }

    pub fn in_domain(&self) -> &[LanguageLabel] {
        &self.in_domain
    }

    pub fn ood_token(&self) -> &str {
        &self.ood_token
    }

    pub fn num_classes(&self) -> usize {
        self.in_domain.len()
    }

    /// Position of `code` in the in-domain list, `None` for OOD.
    pub fn class_index(&self, code: &str) -> Option<usize> {
        self.in_domain.iter().position(|l| l.as_str() == code)
    }
}

/// True iff `lang` is one of the supported languages.
pub fn derive_in_domain(lang: &LanguageLabel, space: &LabelSpace) -> bool {
    lang.as_str() != space.ood_token && space.class_index(lang.as_str()).is_some()
}

/// A half-open byte range `[start, end)` tagged with an entity type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub entity_type: String,
}

/// One utterance with its language label.
///
/// `lang` keeps the original code even for OOD languages; the OOD bucket
/// is applied when examples are mapped to class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub text: String,
    pub lang: LanguageLabel,
    pub in_domain: bool,
    pub entity_spans: Option<Vec<EntitySpan>>,
}

impl Example {
    pub fn new(
        text: impl Into<String>,
        lang: LanguageLabel,
        space: &LabelSpace,
        entity_spans: Option<Vec<EntitySpan>>,
    ) -> Result<Self> {
        let text = text.into();
        if let Some(spans) = &entity_spans {
            validate_spans(&text, spans)?;
        }
        let in_domain = derive_in_domain(&lang, space);
        Ok(Self {
            text,
            lang,
            in_domain,
            entity_spans,
        })
    }

    /// Class index in `space`, `None` for the OOD bucket.
    pub fn class_index(&self, space: &LabelSpace) -> Option<usize> {
        space.class_index(self.lang.as_str())
    }
}

/// Spans must be sorted-compatible, non-overlapping, in bounds and on char boundaries.
pub fn validate_spans(text: &str, spans: &[EntitySpan]) -> Result<()> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut prev_end = 0;
    for s in sorted {
        if s.start > s.end || s.end > text.len() {
            return Err(Error::Validation(format!(
                "entity span {}..{} out of bounds for text of {} bytes",
                s.start,
                s.end,
                text.len()
            )));
        }
        if !text.is_char_boundary(s.start) || !text.is_char_boundary(s.end) {
            return Err(Error::Validation(format!(
                "entity span {}..{} is not on a character boundary",
                s.start, s.end
            )));
        }
        if s.start < prev_end {
            return Err(Error::Validation(format!(
                "entity span {}..{} overlaps a previous span",
                s.start, s.end
            )));
        }
        prev_end = s.end;
    }
    Ok(())
}

/// Pair-specific margins between in-domain classes.
///
/// Confusing pairs are unordered and stored canonically (lexicographically
/// smaller code first), so serialization is order-independent. An optional
/// full `matrix` (indexed in label-space order) overrides the pair rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawMarginTable", into = "RawMarginTable")]
pub struct MarginTable {
    delta_high: f64,
    delta_low: f64,
    confusing_pairs: BTreeSet<(LanguageLabel, LanguageLabel)>,
    matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarginTable {
    delta_high: f64,
    delta_low: f64,
    #[serde(default)]
    confusing_pairs: Vec<(LanguageLabel, LanguageLabel)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
}

impl TryFrom<RawMarginTable> for MarginTable {
    type Error = Error;
    fn try_from(r: RawMarginTable) -> Result<Self> {
        let mut t = MarginTable::new(r.delta_high, r.delta_low, r.confusing_pairs)?;
        if let Some(m) = r.matrix {
            t = t.with_matrix(m)?;
        }
        Ok(t)
    }
}

impl From<MarginTable> for RawMarginTable {
    fn from(t: MarginTable) -> Self {
        RawMarginTable {
            delta_high: t.delta_high,
            delta_low: t.delta_low,
            confusing_pairs: t.confusing_pairs.into_iter().collect(),
            matrix: t.matrix,
        }
    }
}

impl Default for MarginTable {
    /// δ_high = 0.4 on every pair among es/pt/fr, δ_low = 0 elsewhere.
    fn default() -> Self {
        let l = |c: &str| LanguageLabel::new(c).expect("static code");
        MarginTable::new(
            0.4,
            0.0,
            vec![(l("es"), l("pt")), (l("es"), l("fr")), (l("fr"), l("pt"))],
        )
        .expect("static margin table is valid")
    }
}

impl MarginTable {
    pub fn new(
        delta_high: f64,
        delta_low: f64,
        pairs: impl IntoIterator<Item = (LanguageLabel, LanguageLabel)>,
    ) -> Result<Self> {
        if !(delta_low.is_finite() && delta_high.is_finite() && delta_high > delta_low && delta_low >= 0.0) {
            return Err(Error::Validation(format!(
                "margins need delta_high > delta_low >= 0, got high={delta_high} low={delta_low}"
            )));
        }
        let mut confusing_pairs = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::Validation(format!("confusing pair ({a}, {a}) is not a pair")));
            }
            confusing_pairs.insert(if a < b { (a, b) } else { (b, a) });
        }
        Ok(Self {
            delta_high,
            delta_low,
            confusing_pairs,
            matrix: None,
        })
    }

    /// A table with every margin zero (δ_high must still exceed δ_low, so
    /// it is set but never used because there are no confusing pairs).
    pub fn zero() -> Self {
        MarginTable::new(f64::MIN_POSITIVE, 0.0, Vec::new()).expect("valid")
    }

    pub fn with_matrix(mut self, matrix: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != matrix.len() {
                return Err(Error::Validation("margin matrix must be square".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) || (i == j && v != 0.0) {
                    return Err(Error::Validation(format!(
                        "margin matrix entry ({i},{j}) = {v}: entries must be >= 0 with a zero diagonal"
                    )));
                }
            }
        }
        self.matrix = Some(matrix);
        Ok(self)
    }

    pub fn delta_high(&self) -> f64 {
        self.delta_high
    }

    pub fn delta_low(&self) -> f64 {
        self.delta_low
    }

    pub fn confusing_pairs(&self) -> impl Iterator<Item = &(LanguageLabel, LanguageLabel)> {
        self.confusing_pairs.iter()
    }

    /// Checks that every confusing pair (or the override matrix) fits `space`.
    /// Pairs are not checked when a matrix overrides them.
    pub fn validate_against(&self, space: &LabelSpace) -> Result<()> {
        for (a, b) in self.confusing_pairs.iter().filter(|_| self.matrix.is_none()) {
            for l in [a, b] {
                if space.class_index(l.as_str()).is_none() {
                    return Err(Error::Validation(format!(
                        "confusing pair language {l} is not in-domain"
                    )));
                }
            }
        }
        if let Some(m) = &self.matrix {
            if m.len() != space.num_classes() {
                return Err(Error::Dimension {
                    name: "margins.matrix".into(),
                    expected: vec![space.num_classes(), space.num_classes()],
                    found: vec![m.len(), m.len()],
                });
            }
        }
        Ok(())
    }

    /// Dense K×K margins in label-space order.
    pub fn resolve(&self, space: &LabelSpace) -> Result<MarginMatrix> {
        self.validate_against(space)?;
        let k = space.num_classes();
        let mut values = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                values[i * k + j] = match &self.matrix {
                    Some(m) => m[i][j],
                    None => self.pair_margin(&space.in_domain[i], &space.in_domain[j]),
                };
            }
        }
        Ok(MarginMatrix { k, values })
    }

    fn pair_margin(&self, a: &LanguageLabel, b: &LanguageLabel) -> f64 {
        if a == b {
            return 0.0;
        }
        let key = if a < b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        if self.confusing_pairs.contains(&key) {
            self.delta_high
        } else {
            self.delta_low
        }
    }
}

/// Margin between two in-domain languages. Errors if either is OOD or unknown.
pub fn margin_of(
    a: &LanguageLabel,
    b: &LanguageLabel,
    table: &MarginTable,
    space: &LabelSpace,
) -> Result<f64> {
    let ia = space
        .class_index(a.as_str())
        .ok_or_else(|| Error::Contract(format!("{a} is not an in-domain language")))?;
    let ib = space
        .class_index(b.as_str())
        .ok_or_else(|| Error::Contract(format!("{b} is not an in-domain language")))?;
    Ok(match &table.matrix {
        Some(m) => m[ia][ib],
        None => table.pair_margin(a, b),
    })
}

/// Dense margin lookup by class index.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginMatrix {
    k: usize,
    values: Vec<f64>,
}

impl MarginMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            values: vec![0.0; k * k],
        }
    }

    /// Builds directly from a row-major matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let k = rows.len();
        Self {
            k,
            values: rows.into_iter().flatten().collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, anchor_class: usize, other_class: usize) -> f64 {
        self.values[anchor_class * self.k + other_class]
    }

    pub fn set(&mut self, anchor_class: usize, other_class: usize, v: f64) {
        self.values[anchor_class * self.k + other_class] = v;
    }
}

/// Sign convention for the class-level margin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    /// Negative-class logits are `sim/τ − δ`.
    #[default]
    AsWritten,
    /// Negative-class logits are `sim/τ + δ`, an additive-margin penalty.
    Enforcing,
}

impl MarginMode {
    pub fn sign(self) -> f64 {
        match self {
            MarginMode::AsWritten => -1.0,
            MarginMode::Enforcing => 1.0,
        }
    }
}

/// Extra multipliers on the two contrastive terms inside the λ3 bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComponentWeights {
    pub instance: f64,
    pub class: f64,
}

impl Default for ComponentWeights {
    fn default() -> Self {
        Self {
            instance: 1.0,
            class: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub temperature: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin_mode: MarginMode,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub t_max: usize,
    pub weight_decay: f64,
    pub seed: u64,
    /// Global L2 gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub component_weights: ComponentWeights,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            temperature: 0.07,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
            margin_mode: MarginMode::AsWritten,
            batch_size: 150,
            epochs: 10,
            lr_max: 2e-5,
            lr_min: 1e-7,
            t_max: 5,
            weight_decay: 0.01,
            seed: 0,
            grad_clip: Some(5.0),
            component_weights: ComponentWeights::default(),
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Validation(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if ![self.lambda1, self.lambda2, self.lambda3, self.weight_decay]
            .into_iter()
            .all(finite_nonneg)
        {
            return Err(Error::Validation(
                "lambda1..3 and weight_decay must be finite and >= 0".into(),
            ));
        }
        if !finite_nonneg(self.component_weights.instance) || !finite_nonneg(self.component_weights.class) {
            return Err(Error::Validation("component weights must be finite and >= 0".into()));
        }
        if !(self.lr_min > 0.0 && self.lr_max >= self.lr_min && self.lr_max.is_finite()) {
            return Err(Error::Validation(format!(
                "need lr_max >= lr_min > 0, got lr_max={} lr_min={}",
                self.lr_max, self.lr_min
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.t_max == 0 {
            return Err(Error::Validation(
                "batch_size, epochs and t_max must be positive".into(),
            ));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Validation(format!("grad_clip must be > 0, got {c}")));
            }
        }
        Ok(())
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Baseline => {
                self.lambda3 = 0.0;
            }
            Preset::BaselineSupCon => {
                if self.lambda3 == 0.0 {
                    self.lambda3 = 0.1;
                }
                self.component_weights = ComponentWeights {
                    instance: 1.0,
                    class: 0.0,
                };
            }
            Preset::Full => {
                if self.lambda3 == 0.0 {
                    self.lambda3 = 0.1;
                }
                self.component_weights = ComponentWeights::default();
            }
        }
    }
}

/// Named weight settings for the three-way ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Cross-entropy heads only.
    Baseline,
    /// Cross-entropy plus the instance-level contrastive term.
    #[serde(rename = "baseline-supcon")]
    BaselineSupCon,
    /// The complete objective with both contrastive levels.
    Full,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Preset::Baseline),
            "baseline-supcon" => Ok(Preset::BaselineSupCon),
            "full" => Ok(Preset::Full),
            other => Err(Error::Validation(format!("unknown preset {other:?}"))),
        }
    }
}
