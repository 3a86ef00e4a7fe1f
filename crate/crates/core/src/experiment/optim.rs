//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderParams, Float};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

pub struct AdamW<F> {
    cfg: AdamWConfig,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: i32,
}

impl<F: Float> AdamW<F> {
    pub fn new(cfg: AdamWConfig, params: &mut EncoderParams<F>) -> Self {
        let shapes: Vec<usize> = params.tensors_mut().iter().map(|t| t.data.len()).collect();
        AdamW {
            cfg,
            m: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            t: 0,
        }
    }

    /// Extends moment buffers with zeros when tensors have grown (vocabulary
    /// growth appends rows, so existing entries keep their positions).
    fn fit(&mut self, params: &mut EncoderParams<F>) {
        for (i, t) in params.tensors_mut().iter().enumerate() {
            if self.m[i].len() < t.data.len() {
                self.m[i].resize(t.data.len(), F::zero());
                self.v[i].resize(t.data.len(), F::zero());
            }
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams<F>, grads: &mut EncoderParams<F>, lr: f64) {
        self.fit(params);
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = F::cst(1.0 - b1.powi(self.t));
        let bc2 = F::cst(1.0 - b2.powi(self.t));
        let (b1, b2) = (F::cst(b1), F::cst(b2));
        let lr_f = F::cst(lr);
        let eps = F::cst(self.cfg.eps);
        let decay = F::cst(1.0 - lr * self.cfg.weight_decay);
        for (i, (p, g)) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors_mut())
            .enumerate()
        {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m[j] = b1 * m[j] + (F::one() - b1) * gj;
                v[j] = b2 * v[j] + (F::one() - b2) * gj * gj;
                if p.decay {
                    p.data[j] *= decay;
                }
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p.data[j] -= lr_f * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Scales `grads` so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<F: Float>(grads: &mut EncoderParams<F>, max_norm: f64) -> f64 {
    let mut sq = 0.0f64;
    for t in grads.tensors_mut() {
        sq += t.data.iter().map(|&x| x.as_f64() * x.as_f64()).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = F::cst(max_norm / norm);
        for t in grads.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}
