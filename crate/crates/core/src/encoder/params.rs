use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EncoderConfig, Float};
use crate::error::{Error, Result};

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct LayerParams<F> {
    pub ln1_g: Array1<F>,
    pub ln1_b: Array1<F>,
    pub wq: Array2<F>,
    pub bq: Array1<F>,
    pub wk: Array2<F>,
    pub bk: Array1<F>,
    pub wv: Array2<F>,
    pub bv: Array1<F>,
    pub wo: Array2<F>,
    pub bo: Array1<F>,
    pub ln2_g: Array1<F>,
    pub ln2_b: Array1<F>,
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

/// Every trainable tensor of the encoder. The same struct doubles as a
/// gradient accumulator (see [`EncoderParams::zeros_like`]).
///
/// Virtual template tokens, integrated connectives and virtual answers are
/// ordinary rows of `tok_emb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct EncoderParams<F> {
    pub config: EncoderConfig,
    /// vocab_size x d
    pub tok_emb: Array2<F>,
    /// max_len x d
    pub pos_emb: Array2<F>,
    pub layers: Vec<LayerParams<F>>,
    pub lnf_g: Array1<F>,
    pub lnf_b: Array1<F>,
    pub head_w: Array2<F>,
    pub head_b: Array1<F>,
    pub head_ln_g: Array1<F>,
    pub head_ln_b: Array1<F>,
    /// vocab_size
    pub out_bias: Array1<F>,
    /// Untied output projection (vocab_size x d); `None` when tied to `tok_emb`.
    pub out_proj: Option<Array2<F>>,
}

/// A named view of one parameter tensor.
pub struct ParamTensor<'a, F> {
    pub name: String,
    /// Whether decoupled weight decay applies (matrices and embeddings only).
    pub decay: bool,
    pub data: &'a mut [F],
}

fn gaussian<F: Float>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<F> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    Array2::from_shape_simple_fn((rows, cols), || F::cst(normal.sample(rng)))
}

fn slice<F>(a: &mut Array1<F>) -> &mut [F] {
    a.as_slice_mut().expect("standard layout")
}

fn slice2<F>(a: &mut Array2<F>) -> &mut [F] {
    a.as_slice_mut().expect("standard layout")
}

impl<F: Float> EncoderParams<F> {
    /// Gaussian(0, 0.02) weights, zero biases, unit layer-norm gains.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let ff = config.d_ff;
        let ones = || Array1::from_elem(d, F::one());
        let zeros = |n| Array1::zeros(n);
        let tok_emb = gaussian(&mut rng, config.vocab_size, d);
        let pos_emb = gaussian(&mut rng, config.max_len, d);
        let layers = (0..config.n_layers)
            .map(|_| LayerParams {
                ln1_g: ones(),
                ln1_b: zeros(d),
                wq: gaussian(&mut rng, d, d),
                bq: zeros(d),
                wk: gaussian(&mut rng, d, d),
                bk: zeros(d),
                wv: gaussian(&mut rng, d, d),
                bv: zeros(d),
                wo: gaussian(&mut rng, d, d),
                bo: zeros(d),
                ln2_g: ones(),
                ln2_b: zeros(d),
                w1: gaussian(&mut rng, d, ff),
                b1: zeros(ff),
                w2: gaussian(&mut rng, ff, d),
                b2: zeros(d),
            })
            .collect();
        let head_w = gaussian(&mut rng, d, d);
        let out_proj = (!config.tie_output).then(|| gaussian(&mut rng, config.vocab_size, d));
        Ok(EncoderParams {
            config: config.clone(),
            tok_emb,
            pos_emb,
            layers,
            lnf_g: ones(),
            lnf_b: zeros(d),
            head_w,
            head_b: zeros(d),
            head_ln_g: ones(),
            head_ln_b: zeros(d),
            out_bias: zeros(config.vocab_size),
            out_proj,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.fill(F::zero());
        }
        z
    }

    /// Output projection matrix (vocab_size x d).
    pub fn output_matrix(&self) -> &Array2<F> {
        self.out_proj.as_ref().unwrap_or(&self.tok_emb)
    }

    pub fn vocab_size(&self) -> usize {
        self.tok_emb.nrows()
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    /// All tensors in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<ParamTensor<'_, F>> {
        let mut out = Vec::new();
        macro_rules! push {
            ($name:expr, $decay:expr, $data:expr) => {
                out.push(ParamTensor {
                    name: $name,
                    decay: $decay,
                    data: $data,
                })
            };
        }
        let EncoderParams {
            tok_emb,
            pos_emb,
            layers,
            lnf_g,
            lnf_b,
            head_w,
            head_b,
            head_ln_g,
            head_ln_b,
            out_bias,
            out_proj,
            ..
        } = self;
        push!("tok_emb".into(), true, slice2(tok_emb));
        push!("pos_emb".into(), true, slice2(pos_emb));
        for (i, l) in layers.iter_mut().enumerate() {
            let LayerParams {
                ln1_g,
                ln1_b,
                wq,
                bq,
                wk,
                bk,
                wv,
                bv,
                wo,
                bo,
                ln2_g,
                ln2_b,
                w1,
                b1,
                w2,
                b2,
            } = l;
            push!(format!("layer{i}.ln1_g"), false, slice(ln1_g));
            push!(format!("layer{i}.ln1_b"), false, slice(ln1_b));
            push!(format!("layer{i}.wq"), true, slice2(wq));
            push!(format!("layer{i}.bq"), false, slice(bq));
            push!(format!("layer{i}.wk"), true, slice2(wk));
            push!(format!("layer{i}.bk"), false, slice(bk));
            push!(format!("layer{i}.wv"), true, slice2(wv));
            push!(format!("layer{i}.bv"), false, slice(bv));
            push!(format!("layer{i}.wo"), true, slice2(wo));
            push!(format!("layer{i}.bo"), false, slice(bo));
            push!(format!("layer{i}.ln2_g"), false, slice(ln2_g));
            push!(format!("layer{i}.ln2_b"), false, slice(ln2_b));
            push!(format!("layer{i}.w1"), true, slice2(w1));
            push!(format!("layer{i}.b1"), false, slice(b1));
            push!(format!("layer{i}.w2"), true, slice2(w2));
            push!(format!("layer{i}.b2"), false, slice(b2));
        }
        push!("lnf_g".into(), false, slice(lnf_g));
        push!("lnf_b".into(), false, slice(lnf_b));
        push!("head_w".into(), true, slice2(head_w));
        push!("head_b".into(), false, slice(head_b));
        push!("head_ln_g".into(), false, slice(head_ln_g));
        push!("head_ln_b".into(), false, slice(head_ln_b));
        push!("out_bias".into(), false, slice(out_bias));
        if let Some(p) = out_proj {
            push!("out_proj".into(), true, slice2(p));
        }
        out
    }

    pub fn num_parameters(&mut self) -> usize {
        self.tensors_mut().iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&mut self) -> bool {
        self.tensors_mut()
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn get_token_embedding(&self, id: usize) -> Result<Array1<F>> {
        if id >= self.vocab_size() {
            return Err(Error::TokenOutOfRange {
                id,
                size: self.vocab_size(),
            });
        }
        Ok(self.tok_emb.row(id).to_owned())
    }

    pub fn set_token_embedding(&mut self, id: usize, v: &[F]) -> Result<()> {
        if id >= self.vocab_size() {
            return Err(Error::TokenOutOfRange {
                id,
                size: self.vocab_size(),
            });
        }
        if v.len() != self.d_model() {
            return Err(Error::LengthMismatch {
                expected: self.d_model(),
                got: v.len(),
            });
        }
        self.tok_emb
            .row_mut(id)
            .iter_mut()
            .zip(v)
            .for_each(|(dst, &src)| *dst = src);
        Ok(())
    }

    /// Appends Gaussian rows to the embedding table (and untied output
    /// projection) and zero output biases until the table has `new_size` rows.
    pub fn grow_vocab(&mut self, new_size: usize, seed: u64) {
        let old = self.vocab_size();
        if new_size <= old {
            return;
        }
        let d = self.d_model();
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (old as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let extra: Array2<F> = gaussian(&mut rng, new_size - old, d);
        self.tok_emb = ndarray::concatenate![ndarray::Axis(0), self.tok_emb, extra];
        if let Some(p) = &self.out_proj {
            let extra: Array2<F> = gaussian(&mut rng, new_size - old, d);
            self.out_proj = Some(ndarray::concatenate![ndarray::Axis(0), *p, extra]);
        }
        let mut bias = Array1::zeros(new_size);
        bias.slice_mut(ndarray::s![..old]).assign(&self.out_bias);
        self.out_bias = bias;
        self.config.vocab_size = new_size;
    }

    /// Converts every tensor to another precision.
    pub fn cast<G: Float>(&self) -> EncoderParams<G> {
        let c1 = |a: &Array1<F>| a.mapv(|x| G::cst(x.as_f64()));
        let c2 = |a: &Array2<F>| a.mapv(|x| G::cst(x.as_f64()));
        EncoderParams {
            config: self.config.clone(),
            tok_emb: c2(&self.tok_emb),
            pos_emb: c2(&self.pos_emb),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    ln1_g: c1(&l.ln1_g),
                    ln1_b: c1(&l.ln1_b),
                    wq: c2(&l.wq),
                    bq: c1(&l.bq),
                    wk: c2(&l.wk),
                    bk: c1(&l.bk),
                    wv: c2(&l.wv),
                    bv: c1(&l.bv),
                    wo: c2(&l.wo),
                    bo: c1(&l.bo),
                    ln2_g: c1(&l.ln2_g),
                    ln2_b: c1(&l.ln2_b),
                    w1: c2(&l.w1),
                    b1: c1(&l.b1),
                    w2: c2(&l.w2),
                    b2: c1(&l.b2),
                })
                .collect(),
            lnf_g: c1(&self.lnf_g),
            lnf_b: c1(&self.lnf_b),
            head_w: c2(&self.head_w),
            head_b: c1(&self.head_b),
            head_ln_g: c1(&self.head_ln_g),
            head_ln_b: c1(&self.head_ln_b),
            out_bias: c1(&self.out_bias),
            out_proj: self.out_proj.as_ref().map(c2),
        }
    }
}
