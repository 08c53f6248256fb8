//! Forward pass and hand-derived reverse-mode gradients.

use super::{ModelParams, ParamGrads, SparseFeatures, Tensor};
use crate::error::{Error, Result};

/// Below this norm the projection falls back to the first basis vector.
pub const DEGENERATE_NORM: f64 = 1e-12;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * x * x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutputs {
    pub hidden: Vec<f64>,
    pub indomain_logits: Vec<f64>,
    pub langid_logits: Vec<f64>,
    /// Unit-norm projection.
    pub z: Vec<f64>,
}

/// Upstream gradients for one example.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputGrads {
    pub indomain: Vec<f64>,
    pub langid: Vec<f64>,
    /// Gradient with respect to the normalized projection.
    pub z: Vec<f64>,
}

struct Activations {
    pooled: Vec<f64>,
    pre1: Vec<f64>,
    h1: Vec<f64>,
    pre2: Vec<f64>,
    out: ForwardOutputs,
    raw_norm: f64,
}

/// `y = Wᵀx + b` with `W` stored `fan_in × fan_out`.
fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let mut y = b.data.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (yj, wij) in y.iter_mut().zip(w.row(i)) {
            *yj += xi * wij;
        }
    }
    y
}

/// Accumulates `W += x ⊗ g`, `b += g` and returns `W g`.
fn affine_backward(w: &Tensor, gw: &mut Tensor, gb: &mut Tensor, x: &[f64], g: &[f64]) -> Vec<f64> {
    for (b, gj) in gb.data.iter_mut().zip(g) {
        *b += gj;
    }
    let mut gx = vec![0.0; x.len()];
    for (i, &xi) in x.iter().enumerate() {
        let grow = gw.row_mut(i);
        for (gwij, gj) in grow.iter_mut().zip(g) {
            *gwij += xi * gj;
        }
        gx[i] = w.row(i).iter().zip(g).map(|(a, b)| a * b).sum();
    }
    gx
}

fn check_features(params: &ModelParams, f: &SparseFeatures) -> Result<()> {
    let d = params.num_buckets();
    if let Some(&(b, _)) = f.entries.iter().find(|(b, _)| *b >= d) {
        return Err(Error::Dimension {
            name: "features".into(),
            expected: vec![d],
            found: vec![b + 1],
        });
    }
    Ok(())
}

fn run(params: &ModelParams, f: &SparseFeatures) -> Activations {
    let d_emb = params.embedding.cols();
    let mut pooled = vec![0.0; d_emb];
    let denom = f.total_count.max(1.0);
    for &(bucket, count) in &f.entries {
        for (p, e) in pooled.iter_mut().zip(params.embedding.row(bucket)) {
            *p += count * e;
        }
    }
    pooled.iter_mut().for_each(|p| *p /= denom);

    let pre1 = affine(&params.w1, &params.b1, &pooled);
    let h1: Vec<f64> = pre1.iter().map(|&x| gelu(x)).collect();
    let pre2 = affine(&params.w2, &params.b2, &h1);
    let hidden: Vec<f64> = pre2.iter().map(|&x| gelu(x)).collect();

    let indomain_logits = affine(&params.indomain_w, &params.indomain_b, &hidden);
    let langid_logits = affine(&params.langid_w, &params.langid_b, &hidden);
    let raw = affine(&params.proj_w, &params.proj_b, &hidden);
    let raw_norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let z = if raw_norm < DEGENERATE_NORM {
        let mut e = vec![0.0; raw.len()];
        e[0] = 1.0;
        e
    } else {
        raw.iter().map(|v| v / raw_norm).collect()
    };
    Activations {
        pooled,
        pre1,
        h1,
        pre2,
        raw_norm,
        out: ForwardOutputs {
            hidden,
            indomain_logits,
            langid_logits,
            z,
        },
    }
}

pub fn forward(params: &ModelParams, f: &SparseFeatures) -> Result<ForwardOutputs> {
    params.check_dims()?;
    check_features(params, f)?;
    Ok(run(params, f).out)
}

/// Gradients of `Σ_examples ⟨output_grads, outputs⟩` with respect to every parameter.
pub fn backward(
    params: &ModelParams,
    batch: &[SparseFeatures],
    output_grads: &[OutputGrads],
) -> Result<ParamGrads> {
    params.check_dims()?;
    if batch.len() != output_grads.len() {
        return Err(Error::Contract(format!(
            "{} feature rows but {} output gradients",
            batch.len(),
            output_grads.len()
        )));
    }
    let k = params.num_classes();
    let d_proj = params.proj_b.len();
    for (i, g) in output_grads.iter().enumerate() {
        if g.indomain.len() != 2 || g.langid.len() != k || g.z.len() != d_proj {
            return Err(Error::Dimension {
                name: format!("output_grads[{i}]"),
                expected: vec![2, k, d_proj],
                found: vec![g.indomain.len(), g.langid.len(), g.z.len()],
            });
        }
        if !g.indomain.iter().chain(&g.langid).chain(&g.z).all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("output gradient of example {i} is not finite")));
        }
    }

    let mut grads = params.zeros_like();
    for (f, g) in batch.iter().zip(output_grads) {
        check_features(params, f)?;
        let act = run(params, f);
        let z = &act.out.z;

        // d/d raw of z = raw/|raw| is (I - z zᵀ)/|raw|.
        let g_raw: Vec<f64> = if act.raw_norm < DEGENERATE_NORM {
            vec![0.0; d_proj]
        } else {
            let dot: f64 = g.z.iter().zip(z).map(|(a, b)| a * b).sum();
            g.z.iter()
                .zip(z)
                .map(|(gz, zi)| (gz - dot * zi) / act.raw_norm)
                .collect()
        };

        let h = &act.out.hidden;
        let mut g_h = affine_backward(&params.indomain_w, &mut grads.indomain_w, &mut grads.indomain_b, h, &g.indomain);
        let g_l = affine_backward(&params.langid_w, &mut grads.langid_w, &mut grads.langid_b, h, &g.langid);
        let g_p = affine_backward(&params.proj_w, &mut grads.proj_w, &mut grads.proj_b, h, &g_raw);
        for ((a, b), c) in g_h.iter_mut().zip(&g_l).zip(&g_p) {
            *a += b + c;
        }

        let g_pre2: Vec<f64> = g_h.iter().zip(&act.pre2).map(|(g, &x)| g * gelu_grad(x)).collect();
        let g_h1 = affine_backward(&params.w2, &mut grads.w2, &mut grads.b2, &act.h1, &g_pre2);
        let g_pre1: Vec<f64> = g_h1.iter().zip(&act.pre1).map(|(g, &x)| g * gelu_grad(x)).collect();
        let g_pooled = affine_backward(&params.w1, &mut grads.w1, &mut grads.b1, &act.pooled, &g_pre1);

        let denom = f.total_count.max(1.0);
        for &(bucket, count) in &f.entries {
            let scale = count / denom;
            for (ge, gp) in grads.embedding.row_mut(bucket).iter_mut().zip(&g_pooled) {
                *ge += scale * gp;
            }
        }
    }
    Ok(grads)
}
