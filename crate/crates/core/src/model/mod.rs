//! Shared encoder with in-domain, language-ID and projection heads.

mod checkpoint;
mod featurize;
mod network;

pub use checkpoint::{read_tensor_file, write_tensor_file, TensorEntry, TensorFile};
pub use featurize::{featurize, fnv1a64, FeaturizerConfig, SparseFeatures};
pub use network::{backward, forward, gelu, gelu_grad, ForwardOutputs, OutputGrads};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense row-major tensor of f64 values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }
}

/// Layer widths of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_emb: usize,
    pub d_hid: usize,
    pub d_proj: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_emb: 64,
            d_hid: 128,
            d_proj: 128,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_emb == 0 || self.d_hid == 0 || self.d_proj == 0 {
            return Err(Error::Validation("model widths must be positive".into()));
        }
        Ok(())
    }
}

pub const TENSOR_NAMES: [&str; 11] = [
    "embedding",
    "mlp.w1",
    "mlp.b1",
    "mlp.w2",
    "mlp.b2",
    "indomain.weight",
    "indomain.bias",
    "langid.weight",
    "langid.bias",
    "projection.weight",
    "projection.bias",
];

/// Every trainable tensor. Weight matrices are stored `fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embedding: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub indomain_w: Tensor,
    pub indomain_b: Tensor,
    pub langid_w: Tensor,
    pub langid_b: Tensor,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
}

/// Gradients share the parameter layout.
pub type ParamGrads = ModelParams;

impl ModelParams {
    /// Expected shapes, in [`TENSOR_NAMES`] order.
    pub fn shapes(num_buckets: usize, num_classes: usize, cfg: &ModelConfig) -> [Vec<usize>; 11] {
        let ModelConfig { d_emb, d_hid, d_proj } = *cfg;
        [
            vec![num_buckets, d_emb],
            vec![d_emb, d_hid],
            vec![d_hid],
            vec![d_hid, d_hid],
            vec![d_hid],
            vec![d_hid, 2],
            vec![2],
            vec![d_hid, num_classes],
            vec![num_classes],
            vec![d_hid, d_proj],
            vec![d_proj],
        ]
    }

    pub fn zeros(num_buckets: usize, num_classes: usize, cfg: &ModelConfig) -> Self {
        let s = Self::shapes(num_buckets, num_classes, cfg);
        let mut it = s.iter().map(|shape| Tensor::zeros(shape));
        let mut next = || it.next().expect("11 tensors");
        Self {
            embedding: next(),
            w1: next(),
            b1: next(),
            w2: next(),
            b2: next(),
            indomain_w: next(),
            indomain_b: next(),
            langid_w: next(),
            langid_b: next(),
            proj_w: next(),
            proj_b: next(),
        }
    }

    /// Glorot-uniform weights, zero biases. Values are rounded to f32 so a
    /// fresh model survives an f32 checkpoint unchanged.
    pub fn init(num_buckets: usize, num_classes: usize, cfg: &ModelConfig, seed: u64) -> Self {
        let mut params = Self::zeros(num_buckets, num_classes, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in params.tensors_mut() {
            if t.shape.len() == 2 {
                let a = (6.0 / (t.shape[0] + t.shape[1]) as f64).sqrt();
                let dist = Uniform::new_inclusive(-a, a);
                for v in t.data.iter_mut() {
                    *v = dist.sample(&mut rng) as f32 as f64;
                }
            }
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = v);
        }
    }

    pub fn tensors(&self) -> [&Tensor; 11] {
        [
            &self.embedding,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.indomain_w,
            &self.indomain_b,
            &self.langid_w,
            &self.langid_b,
            &self.proj_w,
            &self.proj_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 11] {
        [
            &mut self.embedding,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.indomain_w,
            &mut self.indomain_b,
            &mut self.langid_w,
            &mut self.langid_b,
            &mut self.proj_w,
            &mut self.proj_b,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        TENSOR_NAMES.into_iter().zip(self.tensors())
    }

    pub fn num_buckets(&self) -> usize {
        self.embedding.shape[0]
    }

    pub fn num_classes(&self) -> usize {
        self.langid_b.len()
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            d_emb: self.embedding.shape[1],
            d_hid: self.b1.len(),
            d_proj: self.proj_b.len(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks every tensor against the shapes implied by its own widths.
    pub fn check_dims(&self) -> Result<()> {
        self.check_against(self.num_buckets(), self.num_classes(), &self.config())
    }

    /// Checks every tensor against an explicit configuration.
    pub fn check_against(
        &self,
        num_buckets: usize,
        num_classes: usize,
        cfg: &ModelConfig,
    ) -> Result<()> {
        let expected = Self::shapes(num_buckets, num_classes, cfg);
        for ((name, t), want) in self.named().zip(expected.iter()) {
            if &t.shape != want || t.data.len() != want.iter().product::<usize>() {
                return Err(Error::Dimension {
                    name: name.to_string(),
                    expected: want.clone(),
                    found: t.shape.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rounds every value to the nearest f32.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }

    /// Builds params from named tensors in any order.
    pub fn from_named(mut tensors: std::collections::BTreeMap<String, Tensor>) -> Result<Self> {
        let mut take = |name: &str| {
            tensors
                .remove(name)
                .ok_or_else(|| Error::Corrupt(format!("missing tensor `{name}`")))
        };
        let params = Self {
            embedding: take("embedding")?,
            w1: take("mlp.w1")?,
            b1: take("mlp.b1")?,
            w2: take("mlp.w2")?,
            b2: take("mlp.b2")?,
            indomain_w: take("indomain.weight")?,
            indomain_b: take("indomain.bias")?,
            langid_w: take("langid.weight")?,
            langid_b: take("langid.bias")?,
            proj_w: take("projection.weight")?,
            proj_b: take("projection.bias")?,
        };
        if params.embedding.shape.len() != 2 || params.b1.shape.len() != 1 || params.proj_b.shape.len() != 1 {
            return Err(Error::Corrupt("tensor ranks do not match the model layout".into()));
        }
        params.check_dims()?;
        Ok(params)
    }
}
