//! Two-hidden-layer tanh MLP with hand-written backprop.
//!
//! The input row is `[I_t, I_in, embed(c)]`, where `c` is a scalar time
//! condition and `embed` is a sinusoidal embedding. The output is either one
//! head (`data_dim` wide) or two stacked heads (`2 * data_dim`, residual
//! first).

use crate::error::{Error, Result};
use crate::numerics::{RandomStream, Tensor};
use crate::predictors::{Outputs, Prediction, Predictor, Query};

pub const EMBED_BASE: f64 = 1e4;

/// Sinusoidal embedding: `sin(c * w_k)` then `cos(c * w_k)` for
/// `w_k = EMBED_BASE^(-k / (dim / 2))`.
pub fn time_embedding(c: f64, dim: usize, out: &mut [f64]) {
    let half = dim / 2;
    for k in 0..half {
        let w = EMBED_BASE.powf(-(k as f64) / half as f64);
        out[k] = (c * w).sin();
        out[half + k] = (c * w).cos();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Heads {
    Single,
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpConfig {
    pub data_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub heads: Heads,
}

impl MlpConfig {
    pub fn new(data_dim: usize, heads: Heads) -> Self {
        Self { data_dim, embed_dim: 32, hidden: 128, heads }
    }

    pub fn input_dim(&self) -> usize {
        2 * self.data_dim + self.embed_dim
    }

    pub fn output_dim(&self) -> usize {
        match self.heads {
            Heads::Single => self.data_dim,
            Heads::Double => 2 * self.data_dim,
        }
    }

    fn layer_dims(&self) -> [(usize, usize); 3] {
        [
            (self.hidden, self.input_dim()),
            (self.hidden, self.hidden),
            (self.output_dim(), self.hidden),
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.data_dim == 0 || self.hidden == 0 || self.embed_dim == 0 || !self.embed_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("bad MLP configuration {self:?}")));
        }
        Ok(())
    }
}

/// Fully connected layer with weight `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    fn apply(&self, x: &[f64], batch: usize, out: &mut Vec<f64>) {
        let (o, i) = (self.weight.shape()[0], self.weight.shape()[1]);
        let w = self.weight.data();
        let b = self.bias.data();
        out.clear();
        out.resize(batch * o, 0.0);
        for r in 0..batch {
            let xr = &x[r * i..(r + 1) * i];
            for k in 0..o {
                let wk = &w[k * i..(k + 1) * i];
                out[r * o + k] = b[k] + wk.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
            }
        }
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    batch: usize,
    input: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl ForwardCache {
    /// Activations feeding the output layer, row-major `[batch, hidden]`.
    pub fn last_hidden(&self) -> &[f64] {
        &self.h2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Dense>,
}

pub const PARAM_NAMES: [&str; 6] = ["l0.weight", "l0.bias", "l1.weight", "l1.bias", "l2.weight", "l2.bias"];

impl Mlp {
    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = RandomStream::new(seed);
        let layers = config
            .layer_dims()
            .iter()
            .enumerate()
            .map(|(k, &(o, i))| {
                let mut rng = root.derive(k as u64);
                let bound = (6.0 / (i + o) as f64).sqrt();
                let w = (0..o * i).map(|_| bound * (2.0 * rng.uniform() - 1.0)).collect();
                Ok(Dense { weight: Tensor::new(vec![o, i], w)?, bias: Tensor::zeros(&[o])? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, layers })
    }

    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_dims()
            .iter()
            .map(|&(o, i)| Ok(Dense { weight: Tensor::zeros(&[o, i])?, bias: Tensor::zeros(&[o])? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, layers })
    }

    /// Rebuilds a model from tensors in [`PARAM_NAMES`] order.
    pub fn from_params(config: MlpConfig, params: Vec<Tensor>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        if params.len() != 6 {
            return Err(Error::Format(format!("expected 6 parameter tensors, got {}", params.len())));
        }
        for (slot, p) in model.params_mut_tensors().into_iter().zip(params) {
            if slot.shape() != p.shape() {
                return Err(Error::ShapeMismatch { left: slot.shape().to_vec(), right: p.shape().to_vec() });
            }
            *slot = p;
        }
        Ok(model)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    fn params_mut_tensors(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.params_mut_tensors().into_iter().map(|t| t.data_mut()).collect()
    }

    fn assemble_input(&self, i_t: &Tensor, i_in: &Tensor, cond: &[f64]) -> Result<Vec<f64>> {
        let d = self.config.data_dim;
        let n = i_t.rows();
        if i_t.row_len() != d || i_in.shape() != i_t.shape() {
            return Err(Error::ShapeMismatch { left: i_t.shape().to_vec(), right: i_in.shape().to_vec() });
        }
        if cond.len() != n && cond.len() != 1 {
            return Err(Error::ShapeMismatch { left: vec![n], right: vec![cond.len()] });
        }
        let w = self.config.input_dim();
        let e = self.config.embed_dim;
        let mut x = vec![0.0; n * w];
        for r in 0..n {
            let row = &mut x[r * w..(r + 1) * w];
            row[..d].copy_from_slice(i_t.row(r));
            row[d..2 * d].copy_from_slice(i_in.row(r));
            let c = if cond.len() == 1 { cond[0] } else { cond[r] };
            time_embedding(c, e, &mut row[2 * d..]);
        }
        Ok(x)
    }

    /// Forward pass; `cond` holds one time condition per row, or one for all.
    pub fn forward(&self, i_t: &Tensor, i_in: &Tensor, cond: &[f64]) -> Result<Tensor> {
        Ok(self.forward_cached(i_t, i_in, cond)?.0)
    }

    pub fn forward_cached(&self, i_t: &Tensor, i_in: &Tensor, cond: &[f64]) -> Result<(Tensor, ForwardCache)> {
        let batch = i_t.rows();
        let input = self.assemble_input(i_t, i_in, cond)?;
        let mut h1 = Vec::new();
        self.layers[0].apply(&input, batch, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut h2 = Vec::new();
        self.layers[1].apply(&h1, batch, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = Vec::new();
        self.layers[2].apply(&h2, batch, &mut out);
        let out = Tensor::new(vec![batch, self.config.output_dim()], out)?;
        Ok((out, ForwardCache { batch, input, h1, h2 }))
    }

    /// Parameter gradients in [`PARAM_NAMES`] order, given `dL/d output`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Tensor) -> Result<Vec<Vec<f64>>> {
        let batch = cache.batch;
        if d_out.shape() != [batch, self.config.output_dim()] {
            return Err(Error::ShapeMismatch {
                left: d_out.shape().to_vec(),
                right: vec![batch, self.config.output_dim()],
            });
        }
        let mut grads = Vec::with_capacity(6);
        let mut delta = d_out.data().to_vec();
        let acts = [&cache.input, &cache.h1, &cache.h2];
        let mut per_layer = Vec::with_capacity(3);
        for k in (0..3).rev() {
            let layer = &self.layers[k];
            let (o, i) = (layer.weight.shape()[0], layer.weight.shape()[1]);
            let a = acts[k];
            let mut gw = vec![0.0; o * i];
            let mut gb = vec![0.0; o];
            for r in 0..batch {
                let ar = &a[r * i..(r + 1) * i];
                for q in 0..o {
                    let d = delta[r * o + q];
                    gb[q] += d;
                    if d != 0.0 {
                        for (g, x) in gw[q * i..(q + 1) * i].iter_mut().zip(ar) {
                            *g += d * x;
                        }
                    }
                }
            }
            if k > 0 {
                let w = layer.weight.data();
                let mut prev = vec![0.0; batch * i];
                for r in 0..batch {
                    for q in 0..o {
                        let d = delta[r * o + q];
                        if d != 0.0 {
                            for (p, wv) in prev[r * i..(r + 1) * i].iter_mut().zip(&w[q * i..(q + 1) * i]) {
                                *p += d * wv;
                            }
                        }
                    }
                }
                for (p, h) in prev.iter_mut().zip(a.iter()) {
                    *p *= 1.0 - h * h;
                }
                delta = prev;
            }
            per_layer.push((gw, gb));
        }
        for (gw, gb) in per_layer.into_iter().rev() {
            grads.push(gw);
            grads.push(gb);
        }
        Ok(grads)
    }
}

/// Scalar fed to the time embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeCondition {
    /// Raw step index `t`.
    Step,
    /// `abar * T`, the residual predictor's natural clock.
    ResidualPath,
    /// `bbar * T`, the noise predictor's natural clock.
    NoisePath,
}

impl TimeCondition {
    pub fn default_for(outputs: Outputs) -> Self {
        match outputs {
            Outputs::Residual => Self::ResidualPath,
            Outputs::Noise => Self::NoisePath,
            Outputs::Both => Self::Step,
        }
    }

    pub fn value(self, t: usize, alpha_bar: f64, beta_bar: f64, total_steps: usize) -> f64 {
        match self {
            Self::Step => t as f64,
            Self::ResidualPath => alpha_bar * total_steps as f64,
            Self::NoisePath => beta_bar * total_steps as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Step => "step",
            Self::ResidualPath => "residual-path",
            Self::NoisePath => "noise-path",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Self::Step),
            "residual-path" => Ok(Self::ResidualPath),
            "noise-path" => Ok(Self::NoisePath),
            other => Err(Error::InvalidArgument(format!("unknown time condition `{other}`"))),
        }
    }
}

/// An [`Mlp`] whose head(s) are read as residual and/or noise estimates.
#[derive(Clone, Debug)]
pub struct MlpPredictor {
    pub model: Mlp,
    pub outputs: Outputs,
    pub time: TimeCondition,
}

impl MlpPredictor {
    pub fn new(model: Mlp, outputs: Outputs, time: TimeCondition) -> Result<Self> {
        let want = if outputs == Outputs::Both { Heads::Double } else { Heads::Single };
        if model.config().heads != want {
            return Err(Error::Predictor(format!("{outputs:?} outputs need {want:?} heads")));
        }
        Ok(Self { model, outputs, time })
    }
}

impl Predictor for MlpPredictor {
    fn outputs(&self) -> Outputs {
        self.outputs
    }

    fn predict(&self, q: &Query<'_>) -> Result<Prediction> {
        let c = self.time.value(q.t, q.alpha_bar, q.beta_bar, q.total_steps);
        let out = self.model.forward(q.i_t, q.i_in, &[c])?;
        let shape = q.i_t.shape().to_vec();
        let d = self.model.config().data_dim;
        Ok(match self.outputs {
            Outputs::Residual => Prediction { residual: Some(out.reshape(shape)?), noise: None },
            Outputs::Noise => Prediction { residual: None, noise: Some(out.reshape(shape)?) },
            Outputs::Both => {
                let (mut r, mut e) = (Vec::with_capacity(out.len() / 2), Vec::with_capacity(out.len() / 2));
                for row in 0..out.rows() {
                    let v = out.row(row);
                    r.extend_from_slice(&v[..d]);
                    e.extend_from_slice(&v[d..]);
                }
                Prediction {
                    residual: Some(Tensor::new(shape.clone(), r)?),
                    noise: Some(Tensor::new(shape, e)?),
                }
            }
        })
    }
}
