//! Masked-token pretraining over raw argument text.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{clip_grad_norm, AdamW, AdamWConfig};
use crate::corpus::Instance;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::vocab::{self, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub mask_prob: f64,
    pub max_grad_norm: Option<f64>,
    pub optimizer: AdamWConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 3,
            lr: 1e-3,
            batch_size: 32,
            mask_prob: 0.15,
            max_grad_norm: Some(1.0),
            optimizer: AdamWConfig::default(),
        }
    }
}

/// `[CLS] arg1 connective arg2 [SEP]`, truncated to `max_len`.
pub fn mlm_sequence(inst: &Instance, vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    let mut ids = vec![vocab::CLS];
    for text in [&inst.arg1, &inst.connective, &inst.arg2] {
        ids.extend(vocab.tokenize(text));
    }
    ids.truncate(max_len.saturating_sub(1));
    ids.push(vocab::SEP);
    ids
}

/// Masked copy of `ids` and the `(position, original id)` targets. Special
/// tokens are never selected; at least one position is masked when any is
/// eligible. Selected tokens become `[MASK]` 80% of the time, a random base
/// token 10% and stay unchanged 10%.
pub fn mask_tokens(
    ids: &[usize],
    mask_prob: f64,
    base_size: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<(usize, usize)>) {
    let eligible: Vec<usize> = (0..ids.len())
        .filter(|&i| ids[i] >= vocab::SPECIALS.len())
        .collect();
    let mut chosen: Vec<usize> = eligible
        .iter()
        .copied()
        .filter(|_| rng.random_bool(mask_prob))
        .collect();
    if chosen.is_empty() && !eligible.is_empty() {
        chosen.push(eligible[rng.random_range(0..eligible.len())]);
    }
    let mut out = ids.to_vec();
    for &i in &chosen {
        let r: f64 = rng.random();
        if r < 0.8 {
            out[i] = vocab::MASK;
        } else if r < 0.9 && base_size > vocab::SPECIALS.len() {
            out[i] = rng.random_range(vocab::SPECIALS.len()..base_size);
        }
    }
    (out, chosen.into_iter().map(|i| (i, ids[i])).collect())
}

/// Mean cross-entropy over masked positions; accumulates gradients when
/// `grads` is given.
fn masked_loss(
    params: &EncoderParams<f32>,
    seqs: &[(Vec<usize>, Vec<(usize, usize)>)],
    mut grads: Option<&mut EncoderParams<f32>>,
    mut dropout: Option<&mut ChaCha8Rng>,
) -> Result<f64> {
    let n_targets: usize = seqs.iter().map(|s| s.1.len()).sum();
    if n_targets == 0 {
        return Ok(0.0);
    }
    let scale = 1.0 / n_targets as f32;
    let mut total = 0.0;
    for (ids, targets) in seqs {
        let mask = vec![1u8; ids.len()];
        let trace = params.encode(ids, &mask, dropout.as_deref_mut())?;
        let mut d_hidden = Array2::zeros(trace.hidden.dim());
        for &(pos, gold) in targets {
            let head = params.head(trace.hidden.row(pos), None)?;
            let m = head.logits.fold(f32::NEG_INFINITY, |m, &v| m.max(v));
            let lse = head.logits.mapv(|v| (v - m).exp()).sum().ln() + m;
            let loss = lse - head.logits[gold];
            if !loss.is_finite() {
                return Err(Error::NonFinite("masked-token loss".into()));
            }
            total += loss as f64;
            if let Some(g) = grads.as_deref_mut() {
                let mut d = head.logits.mapv(|v| (v - lse).exp() * scale);
                d[gold] -= scale;
                let dh = params.head_backward(&head, d.view(), g);
                d_hidden.row_mut(pos).assign(&dh);
            }
        }
        if let Some(g) = grads.as_deref_mut() {
            params.backward(&trace, &d_hidden, g);
        }
    }
    Ok(total / n_targets as f64)
}

/// Held-out masked-token loss in eval mode with masking drawn from `seed`.
pub fn mlm_loss(
    params: &EncoderParams<f32>,
    instances: &[&Instance],
    vocab: &Vocabulary,
    mask_prob: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_len = params.config.max_len;
    let seqs: Vec<_> = instances
        .iter()
        .map(|i| {
            mask_tokens(
                &mlm_sequence(i, vocab, max_len),
                mask_prob,
                vocab.frozen_base_size(),
                &mut rng,
            )
        })
        .collect();
    masked_loss(params, &seqs, None, None)
}

/// Runs `cfg.epochs` epochs of masked-token training over `instances`.
/// Returns the mean training loss of each epoch.
pub fn pretrain_mlm(
    params: &mut EncoderParams<f32>,
    instances: &[&Instance],
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    if instances.is_empty() {
        return Err(Error::InvalidArgument(
            "pretraining needs a nonempty train split".into(),
        ));
    }
    if cfg.batch_size == 0 || !(0.0..=1.0).contains(&cfg.mask_prob) {
        return Err(Error::Config(
            "pretrain batch_size must be positive and mask_prob in [0,1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = AdamW::new(cfg.optimizer, params);
    let use_dropout = params.config.dropout_rate > 0.0;
    let max_len = params.config.max_len;
    let base = vocab.frozen_base_size();
    let seqs: Vec<Vec<usize>> = instances
        .iter()
        .map(|i| mlm_sequence(i, vocab, max_len))
        .collect();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut batches) = (0.0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| mask_tokens(&seqs[i], cfg.mask_prob, base, &mut rng))
                .collect();
            let mut grads = params.zeros_like();
            let loss = masked_loss(
                params,
                &batch,
                Some(&mut grads),
                use_dropout.then_some(&mut rng),
            )?;
            if let Some(max) = cfg.max_grad_norm {
                clip_grad_norm(&mut grads, max);
            }
            opt.step(params, &mut grads, cfg.lr);
            sum += loss;
            batches += 1;
        }
        losses.push(sum / batches as f64);
    }
    Ok(losses)
}
