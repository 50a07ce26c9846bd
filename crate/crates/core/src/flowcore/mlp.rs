//! Small fully-connected velocity network with hand-rolled reverse-mode
//! gradients. Parameters live in one flat vector; the layout is derived from
//! the architecture so optimizers and the finite-difference oracle stay
//! layout-agnostic.

use super::state::Condition;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Activation for hidden layers. Only smooth activations are admissible: the
/// policy-gradient path differentiates through the velocity network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
}

/// Shape descriptor: input is `[x (dim), t (1), embedding (embed_dim)]`,
/// output is `dim`. The condition label indexes a learned embedding table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub dim: usize,
    pub cond_count: usize,
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    /// 3 hidden layers of width 64, the crate default.
    pub fn default_net(dim: usize, cond_count: usize) -> Self {
        Architecture {
            dim,
            cond_count,
            embed_dim: 4,
            hidden: vec![64, 64, 64],
            activation: Activation::Tanh,
        }
    }

    pub fn input_width(&self) -> usize {
        self.dim + 1 + self.embed_dim
    }

    pub(crate) fn layout(&self) -> Layout {
        let mut dims = vec![self.input_width()];
        dims.extend(&self.hidden);
        dims.push(self.dim);
        let mut spans = Vec::new();
        let mut off = 0;
        for win in dims.windows(2) {
            let (a, b) = (win[0], win[1]);
            spans.push(LayerSpan {
                offset: off,
                fan_in: a,
                fan_out: b,
            });
            off += a * b + b;
        }
        let emb_offset = off;
        let total = off + self.cond_count * self.embed_dim;
        Layout {
            spans,
            emb_offset,
            total,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSpan {
    pub offset: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub spans: Vec<LayerSpan>,
    pub emb_offset: usize,
    pub total: usize,
}

/// Forward activations kept for the backward pass: the assembled input and
/// every post-activation hidden vector.
pub(crate) struct ForwardCache {
    input: Vec<f64>,
    hidden: Vec<Vec<f64>>,
    cond: Condition,
}

/// Weights N(0, sqrt(2/fan_in)), zero biases, embeddings N(0, 0.1).
pub(crate) fn init_params<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Vec<f64> {
    let layout = arch.layout();
    let mut params = vec![0.0; layout.total];
    for span in &layout.spans {
        let std = (2.0 / span.fan_in as f64).sqrt();
        for k in 0..span.fan_in * span.fan_out {
            let z: f64 = rng.sample(StandardNormal);
            params[span.offset + k] = std * z;
        }
    }
    for k in layout.emb_offset..layout.total {
        let z: f64 = rng.sample(StandardNormal);
        params[k] = 0.1 * z;
    }
    params
}

pub(crate) fn forward(
    arch: &Architecture,
    layout: &Layout,
    params: &[f64],
    x: &[f64],
    t: f64,
    cond: Condition,
) -> (Vec<f64>, ForwardCache) {
    let mut input = Vec::with_capacity(arch.input_width());
    input.extend_from_slice(x);
    input.push(t);
    let emb_start = layout.emb_offset + cond.0 * arch.embed_dim;
    input.extend_from_slice(&params[emb_start..emb_start + arch.embed_dim]);

    let mut hidden = Vec::with_capacity(layout.spans.len() - 1);
    let mut h = input.clone();
    let last = layout.spans.len() - 1;
    for (li, span) in layout.spans.iter().enumerate() {
        let mut z = vec![0.0; span.fan_out];
        for j in 0..span.fan_out {
            z[j] = params[span.offset + span.fan_in * span.fan_out + j];
        }
        for (i, &hi) in h.iter().enumerate() {
            let row = span.offset + i * span.fan_out;
            for j in 0..span.fan_out {
                z[j] += hi * params[row + j];
            }
        }
        if li < last {
            for v in &mut z {
                *v = v.tanh();
            }
            hidden.push(z.clone());
        }
        h = z;
    }
    (
        h,
        ForwardCache {
            input,
            hidden,
            cond,
        },
    )
}

/// Accumulates `J^T · cotangent` into `grad`, where `J` is the Jacobian of the
/// network output with respect to the flat parameter vector.
pub(crate) fn backward(
    arch: &Architecture,
    layout: &Layout,
    params: &[f64],
    cache: &ForwardCache,
    cotangent: &[f64],
    grad: &mut [f64],
) {
    debug_assert_eq!(grad.len(), layout.total);
    let mut dz = cotangent.to_vec();
    for li in (0..layout.spans.len()).rev() {
        let span = layout.spans[li];
        let h_in: &[f64] = if li == 0 {
            &cache.input
        } else {
            &cache.hidden[li - 1]
        };
        for (i, &hi) in h_in.iter().enumerate() {
            let row = span.offset + i * span.fan_out;
            for j in 0..span.fan_out {
                grad[row + j] += hi * dz[j];
            }
        }
        let bias = span.offset + span.fan_in * span.fan_out;
        for j in 0..span.fan_out {
            grad[bias + j] += dz[j];
        }
        let mut dh = vec![0.0; span.fan_in];
        for (i, dhi) in dh.iter_mut().enumerate() {
            let row = span.offset + i * span.fan_out;
            let mut s = 0.0;
            for j in 0..span.fan_out {
                s += params[row + j] * dz[j];
            }
            *dhi = s;
        }
        if li > 0 {
            let h_out = &cache.hidden[li - 1];
            for (d, &h) in dh.iter_mut().zip(h_out) {
                *d *= 1.0 - h * h;
            }
            dz = dh;
        } else {
            // Input gradient: only the embedding slice is a parameter.
            let emb_start = layout.emb_offset + cache.cond.0 * arch.embed_dim;
            for k in 0..arch.embed_dim {
                grad[emb_start + k] += dh[arch.dim + 1 + k];
            }
        }
    }
}
