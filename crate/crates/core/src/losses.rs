//! Training objectives: instance-level supervised contrastive loss, class
//! centroids, the margin-adjusted class-level contrastive loss, masked
//! cross-entropy, and their weighted combination.
//!
//! Every loss returns its scalar value together with the exact gradient
//! with respect to its tensor inputs. Softmax-style ratios are evaluated
//! in log space with max-subtraction.

use crate::domain::{Hyperparams, MarginMatrix, MarginMode};
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-6;

/// Projected embeddings of a batch with their class labels.
///
/// `labels[i]` is the in-domain class index, or `None` for the OOD bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEmbeddings {
    z: Vec<Vec<f64>>,
    labels: Vec<Option<usize>>,
}

impl BatchEmbeddings {
    pub fn new(z: Vec<Vec<f64>>, labels: Vec<Option<usize>>) -> Result<Self> {
        if z.len() != labels.len() {
            return Err(Error::Contract(format!(
                "{} embeddings but {} labels",
                z.len(),
                labels.len()
            )));
        }
        let dim = z.first().map_or(0, Vec::len);
        for (i, row) in z.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    name: format!("z[{i}]"),
                    expected: vec![dim],
                    found: vec![row.len()],
                });
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::Numeric(format!("embedding row {i} is not finite")));
            }
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::Validation(format!(
                    "embedding row {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self { z, labels })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.z.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn in_domain_flags(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_some).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_temperature(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("temperature must be > 0, got {tau}")))
    }
}

/// Supervised contrastive loss summed over anchors.
///
/// Positives of anchor `i` are all other rows with the same label (OOD rows
/// form one pseudo-class); anchors without positives contribute nothing.
pub fn instance_contrastive(b: &BatchEmbeddings, tau: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    check_temperature(tau)?;
    let n = b.len();
    if n < 2 {
        return Err(Error::Contract(format!(
            "instance contrastive loss needs at least 2 rows, got {n}"
        )));
    }
    let d = b.dim();
    let z = &b.z;
    let mut sim = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s = dot(&z[i], &z[j]) / tau;
            sim[i * n + j] = s;
            sim[j * n + i] = s;
        }
    }

    let mut loss = 0.0;
    let mut grad = vec![vec![0.0; d]; n];
    let mut coef = vec![0.0; n];
    for i in 0..n {
        let positives: Vec<usize> = (0..n).filter(|&p| p != i && b.labels[p] == b.labels[i]).collect();
        if positives.is_empty() {
            continue;
        }
        let row = &sim[i * n..(i + 1) * n];
        let others: Vec<f64> = (0..n).filter(|&a| a != i).map(|a| row[a]).collect();
        let lse = log_sum_exp(&others);
        let inv_p = 1.0 / positives.len() as f64;
        loss += lse - inv_p * positives.iter().map(|&p| row[p]).sum::<f64>();

        // dℓ_i/ds_ia = softmax_a − [a ∈ P(i)]/|P(i)|
        for a in 0..n {
            coef[a] = if a == i { 0.0 } else { (row[a] - lse).exp() };
        }
        for &p in &positives {
            coef[p] -= inv_p;
        }
        for a in 0..n {
            let c = coef[a] / tau;
            if c == 0.0 {
                continue;
            }
            for k in 0..d {
                grad[i][k] += c * z[a][k];
                grad[a][k] += c * z[i][k];
            }
        }
    }
    Ok((loss, grad))
}

/// Per-class arithmetic means of the in-domain rows (not renormalized).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCentroids {
    /// In-domain class indices present in the batch, ascending.
    pub present: Vec<usize>,
    pub c: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl ClassCentroids {
    pub fn position(&self, class: usize) -> Option<usize> {
        self.present.binary_search(&class).ok()
    }

    pub fn get(&self, class: usize) -> Option<&[f64]> {
        self.position(class).map(|p| self.c[p].as_slice())
    }
}

pub fn class_centroids(b: &BatchEmbeddings) -> Result<ClassCentroids> {
    let mut present: Vec<usize> = b.labels.iter().flatten().copied().collect();
    present.sort_unstable();
    present.dedup();
    if present.is_empty() {
        return Err(Error::Contract("batch has no in-domain examples; centroids are empty".into()));
    }
    let d = b.dim();
    let mut c = vec![vec![0.0; d]; present.len()];
    let mut counts = vec![0usize; present.len()];
    for (row, label) in b.z.iter().zip(&b.labels) {
        if let Some(y) = label {
            let p = present.binary_search(y).expect("present");
            counts[p] += 1;
            for (acc, v) in c[p].iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    for (cp, &n) in c.iter_mut().zip(&counts) {
        cp.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(ClassCentroids { present, c, counts })
}

/// Class-level contrastive loss against batch centroids, summed over in-domain anchors.
///
/// For anchor `i` of class `y_i` the logit of class `y` is
/// `z_i·c_y/τ + s·δ(y_i, y)` with `s = −1` for [`MarginMode::AsWritten`]
/// and `s = +1` for [`MarginMode::Enforcing`]; the true class is never
/// margined. Only classes present in the batch enter the denominator.
/// Gradients flow through both the anchor and every centroid.
pub fn class_contrastive(
    b: &BatchEmbeddings,
    cents: &ClassCentroids,
    margins: &MarginMatrix,
    tau: f64,
    mode: MarginMode,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_temperature(tau)?;
    let n = b.len();
    let d = b.dim();
    let m = cents.present.len();
    let sign = mode.sign();
    if let Some(&max_class) = cents.present.last() {
        if max_class >= margins.num_classes() {
            return Err(Error::Contract(format!(
                "class {max_class} has no margin row ({} classes)",
                margins.num_classes()
            )));
        }
    }

    let mut loss = 0.0;
    let mut grad = vec![vec![0.0; d]; n];
    // Gradient with respect to each centroid, pushed back to rows afterwards.
    let mut grad_c = vec![vec![0.0; d]; m];
    let mut logits = vec![0.0; m];
    for i in 0..n {
        let Some(yi) = b.labels[i] else { continue };
        let own = cents.position(yi).ok_or_else(|| {
            Error::Contract(format!("anchor {i} has class {yi} without a centroid"))
        })?;
        for (p, &y) in cents.present.iter().enumerate() {
            let delta = if y == yi { 0.0 } else { margins.get(yi, y) };
            logits[p] = dot(&b.z[i], &cents.c[p]) / tau + sign * delta;
        }
        let lse = log_sum_exp(&logits);
        loss += lse - logits[own];
        for p in 0..m {
            let w = ((logits[p] - lse).exp() - if p == own { 1.0 } else { 0.0 }) / tau;
            if w == 0.0 {
                continue;
            }
            for k in 0..d {
                grad[i][k] += w * cents.c[p][k];
                grad_c[p][k] += w * b.z[i][k];
            }
        }
    }
    for (j, label) in b.labels.iter().enumerate() {
        if let Some(y) = label {
            let p = cents.position(*y).ok_or_else(|| {
                Error::Contract(format!("row {j} has class {y} without a centroid"))
            })?;
            let inv = 1.0 / cents.counts[p] as f64;
            for k in 0..d {
                grad[j][k] += inv * grad_c[p][k];
            }
        }
    }
    Ok((loss, grad))
}

/// Mean cross-entropy over the rows where `mask` is true.
pub fn masked_cross_entropy(
    logits: &[Vec<f64>],
    targets: &[usize],
    mask: &[bool],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = logits.len();
    if targets.len() != n || mask.len() != n {
        return Err(Error::Contract("logits, targets and mask lengths differ".into()));
    }
    let k = logits.first().map_or(2, Vec::len);
    if k < 2 {
        return Err(Error::Contract(format!("cross-entropy needs K >= 2 classes, got {k}")));
    }
    let mut grad = vec![vec![0.0; k]; n];
    let active = mask.iter().filter(|m| **m).count();
    if active == 0 {
        return Ok((0.0, grad));
    }
    let inv = 1.0 / active as f64;
    let mut loss = 0.0;
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        if logits[i].len() != k {
            return Err(Error::Dimension {
                name: format!("logits[{i}]"),
                expected: vec![k],
                found: vec![logits[i].len()],
            });
        }
        let t = targets[i];
        if t >= k {
            return Err(Error::Contract(format!("target {t} out of range for {k} classes")));
        }
        let lse = log_sum_exp(&logits[i]);
        loss += lse - logits[i][t];
        for (c, g) in grad[i].iter_mut().enumerate() {
            *g = inv * ((logits[i][c] - lse).exp() - if c == t { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * inv, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l_indomain: f64,
    pub l_langid: f64,
    pub l_instance: f64,
    pub l_class: f64,
    pub total: f64,
    pub grads_z: Vec<Vec<f64>>,
    pub grads_indomain_logits: Vec<Vec<f64>>,
    pub grads_langid_logits: Vec<Vec<f64>>,
}

/// Index of the "in-domain" output of the binary head.
pub const INDOMAIN_POSITIVE: usize = 1;

/// `λ1·L_indomain + λ2·L_langid + λ3·(w_inst·L_instance + w_class·L_class)`.
pub fn combine(hp: &Hyperparams, l_indomain: f64, l_langid: f64, l_instance: f64, l_class: f64) -> f64 {
    let w = hp.component_weights;
    hp.lambda1 * l_indomain
        + hp.lambda2 * l_langid
        + hp.lambda3 * (w.instance * l_instance + w.class * l_class)
}

/// The combined objective with gradients for the projection and both heads.
///
/// The binary head targets [`INDOMAIN_POSITIVE`] for in-domain rows; the
/// language head is masked to in-domain rows. A batch with no in-domain
/// rows has a zero class-level term.
pub fn total_loss(
    b: &BatchEmbeddings,
    indomain_logits: &[Vec<f64>],
    langid_logits: &[Vec<f64>],
    margins: &MarginMatrix,
    hp: &Hyperparams,
) -> Result<LossBreakdown> {
    let n = b.len();
    if indomain_logits.len() != n || langid_logits.len() != n {
        return Err(Error::Contract("logit rows do not match the batch".into()));
    }
    let flags = b.in_domain_flags();
    let ind_targets: Vec<usize> = flags.iter().map(|&f| usize::from(f)).collect();
    let (l_indomain, g_ind) = masked_cross_entropy(indomain_logits, &ind_targets, &vec![true; n])?;
    let lang_targets: Vec<usize> = b.labels.iter().map(|l| l.unwrap_or(0)).collect();
    let (l_langid, g_lang) = masked_cross_entropy(langid_logits, &lang_targets, &flags)?;

    let (l_instance, g_inst) = instance_contrastive(b, hp.temperature)?;
    let (l_class, g_class) = if flags.iter().any(|f| *f) {
        let cents = class_centroids(b)?;
        class_contrastive(b, &cents, margins, hp.temperature, hp.margin_mode)?
    } else {
        (0.0, vec![vec![0.0; b.dim()]; n])
    };

    let w = hp.component_weights;
    let wi = hp.lambda3 * w.instance;
    let wc = hp.lambda3 * w.class;
    let grads_z = g_inst
        .iter()
        .zip(&g_class)
        .map(|(a, c)| a.iter().zip(c).map(|(x, y)| wi * x + wc * y).collect())
        .collect();
    let scale = |g: Vec<Vec<f64>>, s: f64| -> Vec<Vec<f64>> {
        g.into_iter().map(|r| r.into_iter().map(|v| s * v).collect()).collect()
    };
    Ok(LossBreakdown {
        l_indomain,
        l_langid,
        l_instance,
        l_class,
        total: combine(hp, l_indomain, l_langid, l_instance, l_class),
        grads_z,
        grads_indomain_logits: scale(g_ind, hp.lambda1),
        grads_langid_logits: scale(g_lang, hp.lambda2),
    })
}
