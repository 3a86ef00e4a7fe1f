//! Forward pass with cached activations and the matching backward pass.
//!
//! Only positions with attention-mask 1 are computed: they are gathered into
//! a compact sequence (keeping their original position embeddings), which is
//! exactly equivalent to masking the other positions out of attention.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EncoderParams, Float};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

struct LnCache<F> {
    xhat: Array2<F>,
    rstd: Array1<F>,
}

fn layer_norm<F: Float>(x: &Array2<F>, g: &Array1<F>, b: &Array1<F>) -> (Array2<F>, LnCache<F>) {
    let d = F::cst(x.ncols() as f64);
    let eps = F::cst(LN_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<F>() / d;
        *r = F::one() / (var + eps).sqrt();
        let rs = *r;
        row.mapv_inplace(|v| v * rs);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, rstd })
}

/// Returns dx; accumulates dg, db.
fn layer_norm_backward<F: Float>(
    dy: &Array2<F>,
    cache: &LnCache<F>,
    g: &Array1<F>,
    dg: &mut Array1<F>,
    db: &mut Array1<F>,
) -> Array2<F> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let d = F::cst(dy.ncols() as f64);
    let mut dx = dy * g;
    for ((mut row, xh), &rs) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.rstd.iter())
    {
        let m1 = row.sum() / d;
        let m2 = row.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum::<F>() / d;
        row.iter_mut()
            .zip(xh.iter())
            .for_each(|(v, &x)| *v = rs * (*v - m1 - x * m2));
    }
    dx
}

fn gelu<F: Float>(x: F) -> F {
    let c = F::cst((2.0 / std::f64::consts::PI).sqrt());
    let k = F::cst(0.044715);
    let half = F::cst(0.5);
    half * x * (F::one() + (c * (x + k * x * x * x)).tanh())
}

fn gelu_grad<F: Float>(x: F) -> F {
    let c = F::cst((2.0 / std::f64::consts::PI).sqrt());
    let k = F::cst(0.044715);
    let half = F::cst(0.5);
    let t = (c * (x + k * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + F::cst(3.0) * k * x * x)
}

fn dropout_mask<F: Float>(rng: &mut ChaCha8Rng, shape: (usize, usize), p: f64) -> Array2<F> {
    let keep = F::cst(1.0 / (1.0 - p));
    Array2::from_shape_simple_fn(shape, || if rng.random_bool(p) { F::zero() } else { keep })
}

struct LayerCache<F> {
    ln1: LnCache<F>,
    a: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    probs: Vec<Array2<F>>,
    ctx: Array2<F>,
    drop_attn: Option<Array2<F>>,
    ln2: LnCache<F>,
    b: Array2<F>,
    f1: Array2<F>,
    g: Array2<F>,
    drop_ff: Option<Array2<F>>,
}

/// Activations of one forward pass over the active (mask-1) positions.
pub struct Trace<F> {
    positions: Vec<usize>,
    ids: Vec<usize>,
    seq_len: usize,
    drop_emb: Option<Array2<F>>,
    layers: Vec<LayerCache<F>>,
    lnf: LnCache<F>,
    /// Last hidden layer, one row per active position.
    pub hidden: Array2<F>,
}

impl<F: Float> Trace<F> {
    /// Original sequence positions of the rows of `hidden`.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Row of `hidden` holding original position `pos`, if it is active.
    pub fn row_of(&self, pos: usize) -> Option<usize> {
        self.positions.binary_search(&pos).ok()
    }

    pub fn hidden_at(&self, pos: usize) -> Option<ArrayView1<'_, F>> {
        self.row_of(pos).map(|r| self.hidden.row(r))
    }
}

/// Activations of the MLM head at one position.
pub struct HeadTrace<F> {
    h: Array1<F>,
    z: Array1<F>,
    ln: LnCache<F>,
    /// Head-transformed hidden vector that is scored against the output matrix.
    pub transformed: Array1<F>,
    candidates: Option<Vec<usize>>,
    pub logits: Array1<F>,
}

impl<F: Float> EncoderParams<F> {
    /// Runs the transformer stack. `dropout` enables train-mode dropout
    /// driven by the given generator; `None` is deterministic eval mode.
    pub fn encode(
        &self,
        ids: &[usize],
        attn_mask: &[u8],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Trace<F>> {
        let cfg = &self.config;
        if ids.len() != attn_mask.len() {
            return Err(Error::LengthMismatch {
                expected: ids.len(),
                got: attn_mask.len(),
            });
        }
        if ids.len() > cfg.max_len {
            return Err(Error::LengthOverflow {
                len: ids.len(),
                max_len: cfg.max_len,
            });
        }
        let vocab = self.vocab_size();
        let positions: Vec<usize> = (0..ids.len()).filter(|&i| attn_mask[i] != 0).collect();
        let active: Vec<usize> = positions.iter().map(|&p| ids[p]).collect();
        if let Some(&bad) = active.iter().find(|&&id| id >= vocab) {
            return Err(Error::TokenOutOfRange {
                id: bad,
                size: vocab,
            });
        }
        let n = positions.len();
        let d = cfg.d_model;
        let p = cfg.dropout_rate;
        let use_dropout = p > 0.0 && dropout.is_some();

        let mut x = Array2::zeros((n, d));
        for (r, (&pos, &id)) in positions.iter().zip(&active).enumerate() {
            let mut row = x.row_mut(r);
            row.assign(&self.tok_emb.row(id));
            row += &self.pos_emb.row(pos);
        }
        let drop_emb = if use_dropout {
            let m = dropout_mask(dropout.as_deref_mut().expect("rng"), (n, d), p);
            x *= &m;
            Some(m)
        } else {
            None
        };

        let heads = cfg.n_heads;
        let dh = d / heads;
        let scale = F::cst(1.0 / (dh as f64).sqrt());
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (a, ln1) = layer_norm(&x, &l.ln1_g, &l.ln1_b);
            let q = a.dot(&l.wq) + &l.bq;
            let k = a.dot(&l.wk) + &l.bk;
            let v = a.dot(&l.wv) + &l.bv;
            let mut ctx = Array2::zeros((n, d));
            let mut probs = Vec::with_capacity(heads);
            for h in 0..heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let mut sc = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                softmax_rows(&mut sc);
                ctx.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
                probs.push(sc);
            }
            let mut o = ctx.dot(&l.wo) + &l.bo;
            let drop_attn = if use_dropout {
                let m = dropout_mask(dropout.as_deref_mut().expect("rng"), (n, d), p);
                o *= &m;
                Some(m)
            } else {
                None
            };
            x += &o;
            let (b, ln2) = layer_norm(&x, &l.ln2_g, &l.ln2_b);
            let f1 = b.dot(&l.w1) + &l.b1;
            let g = f1.mapv(gelu);
            let mut f2 = g.dot(&l.w2) + &l.b2;
            let drop_ff = if use_dropout {
                let m = dropout_mask(dropout.as_deref_mut().expect("rng"), (n, d), p);
                f2 *= &m;
                Some(m)
            } else {
                None
            };
            x += &f2;
            layers.push(LayerCache {
                ln1,
                a,
                q,
                k,
                v,
                probs,
                ctx,
                drop_attn,
                ln2,
                b,
                f1,
                g,
                drop_ff,
            });
        }
        let (hidden, lnf) = layer_norm(&x, &self.lnf_g, &self.lnf_b);
        Ok(Trace {
            positions,
            ids: active,
            seq_len: ids.len(),
            drop_emb,
            layers,
            lnf,
            hidden,
        })
    }

    /// Backpropagates `d_hidden` (one row per active position) through the
    /// stack, accumulating into `grads`.
    pub fn backward(&self, trace: &Trace<F>, d_hidden: &Array2<F>, grads: &mut EncoderParams<F>) {
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let scale = F::cst(1.0 / (dh as f64).sqrt());

        let mut dx = layer_norm_backward(
            d_hidden,
            &trace.lnf,
            &self.lnf_g,
            &mut grads.lnf_g,
            &mut grads.lnf_b,
        );
        for (li, (l, c)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            let gl = &mut grads.layers[li];
            // feed-forward branch
            let mut df2 = dx.clone();
            if let Some(m) = &c.drop_ff {
                df2 *= m;
            }
            gl.w2 += &c.g.t().dot(&df2);
            gl.b2 += &df2.sum_axis(Axis(0));
            let dg = df2.dot(&l.w2.t());
            let df1 = &dg * &c.f1.mapv(gelu_grad);
            gl.w1 += &c.b.t().dot(&df1);
            gl.b1 += &df1.sum_axis(Axis(0));
            let db = df1.dot(&l.w1.t());
            dx += &layer_norm_backward(&db, &c.ln2, &l.ln2_g, &mut gl.ln2_g, &mut gl.ln2_b);

            // attention branch
            let mut do_ = dx.clone();
            if let Some(m) = &c.drop_attn {
                do_ *= m;
            }
            gl.wo += &c.ctx.t().dot(&do_);
            gl.bo += &do_.sum_axis(Axis(0));
            let dctx = do_.dot(&l.wo.t());
            let n = dctx.nrows();
            let mut dq = Array2::zeros((n, d));
            let mut dk = Array2::zeros((n, d));
            let mut dv = Array2::zeros((n, d));
            for (h, pr) in c.probs.iter().enumerate() {
                let cols = s![.., h * dh..(h + 1) * dh];
                let dc = dctx.slice(cols);
                let dp = dc.dot(&c.v.slice(cols).t());
                dv.slice_mut(cols).assign(&pr.t().dot(&dc));
                let ds = softmax_rows_backward(pr, &dp) * scale;
                dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
                dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
            }
            let at = c.a.t();
            gl.wq += &at.dot(&dq);
            gl.wk += &at.dot(&dk);
            gl.wv += &at.dot(&dv);
            gl.bq += &dq.sum_axis(Axis(0));
            gl.bk += &dk.sum_axis(Axis(0));
            gl.bv += &dv.sum_axis(Axis(0));
            let da = dq.dot(&l.wq.t()) + dk.dot(&l.wk.t()) + dv.dot(&l.wv.t());
            dx += &layer_norm_backward(&da, &c.ln1, &l.ln1_g, &mut gl.ln1_g, &mut gl.ln1_b);
        }
        if let Some(m) = &trace.drop_emb {
            dx *= m;
        }
        for (r, (&pos, &id)) in trace.positions.iter().zip(&trace.ids).enumerate() {
            let row = dx.row(r);
            let mut e = grads.tok_emb.row_mut(id);
            e += &row;
            let mut pe = grads.pos_emb.row_mut(pos);
            pe += &row;
        }
    }

    /// MLM head at one hidden vector, scored against `candidates` (all
    /// vocabulary ids when `None`), in the given order.
    pub fn head(&self, h: ArrayView1<'_, F>, candidates: Option<&[usize]>) -> Result<HeadTrace<F>> {
        let vocab = self.vocab_size();
        if let Some(c) = candidates {
            if let Some(&bad) = c.iter().find(|&&id| id >= vocab) {
                return Err(Error::TokenOutOfRange {
                    id: bad,
                    size: vocab,
                });
            }
        }
        let z = h.dot(&self.head_w) + &self.head_b;
        let g = z.mapv(gelu).insert_axis(Axis(0));
        let (u, ln) = layer_norm(&g, &self.head_ln_g, &self.head_ln_b);
        let u = u.row(0).to_owned();
        let out = self.output_matrix();
        let logits = match candidates {
            None => out.dot(&u) + &self.out_bias,
            Some(c) => c
                .iter()
                .map(|&id| out.row(id).dot(&u) + self.out_bias[id])
                .collect(),
        };
        Ok(HeadTrace {
            h: h.to_owned(),
            z,
            ln,
            transformed: u,
            candidates: candidates.map(<[usize]>::to_vec),
            logits,
        })
    }

    /// Backpropagates logit gradients through the head; returns d(hidden).
    pub fn head_backward(
        &self,
        trace: &HeadTrace<F>,
        d_logits: ArrayView1<'_, F>,
        grads: &mut EncoderParams<F>,
    ) -> Array1<F> {
        let u = &trace.transformed;
        let out = self.output_matrix();
        let mut du = Array1::zeros(u.len());
        {
            let tied = self.out_proj.is_none();
            let EncoderParams {
                tok_emb,
                out_proj,
                out_bias,
                ..
            } = grads;
            let g_out = if tied {
                tok_emb
            } else {
                out_proj.as_mut().expect("untied grads carry out_proj")
            };
            let ids: Box<dyn Iterator<Item = usize>> = match &trace.candidates {
                Some(c) => Box::new(c.iter().copied()),
                None => Box::new(0..out.nrows()),
            };
            for (j, id) in ids.enumerate() {
                let dl = d_logits[j];
                if dl == F::zero() {
                    continue;
                }
                du.scaled_add(dl, &out.row(id));
                g_out.row_mut(id).scaled_add(dl, u);
                out_bias[id] += dl;
            }
        }
        let du2 = du.insert_axis(Axis(0));
        let dg = layer_norm_backward(
            &du2,
            &trace.ln,
            &self.head_ln_g,
            &mut grads.head_ln_g,
            &mut grads.head_ln_b,
        );
        let dz = &dg.row(0) * &trace.z.mapv(gelu_grad);
        let h2 = trace.h.view().insert_axis(Axis(1));
        grads.head_w += &h2.dot(&dz.view().insert_axis(Axis(0)));
        grads.head_b += &dz;
        self.head_w.dot(&dz)
    }

    /// Full per-position outputs. Rows at mask-0 positions are zero.
    pub fn forward(
        &self,
        ids: &[usize],
        attn_mask: &[u8],
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardOutput<F>> {
        let trace = self.encode(ids, attn_mask, dropout)?;
        let d = self.config.d_model;
        let v = self.vocab_size();
        let mut hidden = Array2::zeros((ids.len(), d));
        let mut logits = Array2::zeros((ids.len(), v));
        for (r, &pos) in trace.positions.iter().enumerate() {
            hidden.row_mut(pos).assign(&trace.hidden.row(r));
            let head = self.head(trace.hidden.row(r), None)?;
            logits.row_mut(pos).assign(&head.logits);
        }
        Ok(ForwardOutput { hidden, logits })
    }
}

/// Last hidden layer and vocabulary logits for every position.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<F> {
    pub hidden: Array2<F>,
    pub logits: Array2<F>,
}

fn softmax_rows<F: Float>(a: &mut Array2<F>) {
    for mut row in a.rows_mut() {
        let m = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

fn softmax_rows_backward<F: Float>(p: &Array2<F>, dp: &Array2<F>) -> Array2<F> {
    let mut ds = p * dp;
    for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
        let s = row.sum();
        row.iter_mut()
            .zip(prow.iter())
            .for_each(|(v, &pp)| *v -= pp * s);
    }
    ds
}
