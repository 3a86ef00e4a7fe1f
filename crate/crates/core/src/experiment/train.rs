//! Supervised training with best-dev selection, and evaluation.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::optim::{clip_grad_norm, AdamW, AdamWConfig};
use crate::corpus::{Corpus, Split, TopLevel};
use crate::distillation::{fuse_predict, soften, FeatureStore, Objective, SoftLabelStore};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::prompting::{
    aggregate_relation_scores, build_student_prompt, build_teacher_prompt, gold_answer,
    AnswerSpace, ConnectiveInventory, PromptInstance, TemplateSpec,
};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rates: Vec<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop a learning-rate run after this many epochs without dev improvement.
    pub patience: Option<usize>,
    pub max_grad_norm: Option<f64>,
    pub optimizer: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rates: vec![5e-5, 2e-5, 1e-5, 5e-6],
            batch_size: 32,
            max_epochs: 10,
            patience: None,
            max_grad_norm: Some(1.0),
            optimizer: AdamWConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::Config(
                "learning_rates must be a nonempty list of positive values".into(),
            ));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A prompt with its training target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub prompt: PromptInstance,
    pub gold: usize,
    pub top: TopLevel,
}

/// Builds prompts for one split. With an inventory the slot holds the
/// instance's integrated connective, otherwise `[MASK]`.
pub fn make_examples(
    corpus: &Corpus,
    split: Split,
    template: &TemplateSpec,
    vocab: &Vocabulary,
    space: &AnswerSpace,
    inventory: Option<&ConnectiveInventory>,
) -> Result<Vec<Example>> {
    corpus
        .split(split)
        .map(|inst| {
            let prompt = match inventory {
                Some(inv) => build_teacher_prompt(inst, template, vocab, inv)?,
                None => build_student_prompt(inst, template, vocab)?,
            };
            Ok(Example {
                prompt,
                gold: gold_answer(inst, space)?,
                top: inst.top(),
            })
        })
        .collect()
}

/// Teacher knowledge consumed by the distillation objectives.
#[derive(Debug, Clone, Copy, Default)]
pub struct Knowledge<'a> {
    pub soft: Option<&'a SoftLabelStore<f32>>,
    pub features: Option<&'a FeatureStore<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub lr: f64,
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: Metrics,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: EncoderParams<f32>,
    pub lr: f64,
    pub epoch: usize,
    pub dev: Metrics,
    pub history: Vec<EpochRecord>,
}

fn slot_row(
    params: &EncoderParams<f32>,
    p: &PromptInstance,
) -> Result<(crate::encoder::Trace<f32>, usize)> {
    let trace = params.encode(&p.ids, &p.attn_mask, None)?;
    let row = trace
        .row_of(p.slot_pos)
        .ok_or_else(|| Error::InvalidArgument(format!("slot of `{}` is masked", p.instance_id)))?;
    Ok((trace, row))
}

/// Eval-mode answer logits at the slot, one vector per example.
pub fn predict_logits(
    params: &EncoderParams<f32>,
    examples: &[Example],
    space: &AnswerSpace,
) -> Result<Vec<Array1<f32>>> {
    let ids = space.token_ids();
    examples
        .iter()
        .map(|ex| {
            let (trace, row) = slot_row(params, &ex.prompt)?;
            Ok(params.head(trace.hidden.row(row), Some(&ids))?.logits)
        })
        .collect()
}

/// Top-level prediction from answer logits (T=1 softmax, then per-relation sums).
pub fn predict_top(logits: &Array1<f32>, space: &AnswerSpace) -> Result<TopLevel> {
    let p = soften(logits.view(), 1.0)?;
    Ok(aggregate_relation_scores(p.as_slice().expect("contiguous"), space)?.1)
}

pub fn metrics_from_logits(
    logits: &[Array1<f32>],
    examples: &[Example],
    space: &AnswerSpace,
) -> Result<Metrics> {
    let pairs = logits
        .iter()
        .zip(examples)
        .map(|(l, ex)| Ok((ex.top, predict_top(l, space)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_predictions(pairs))
}

pub fn fused_metrics(
    logits_rd: &[Array1<f32>],
    logits_fd: &[Array1<f32>],
    examples: &[Example],
    space: &AnswerSpace,
) -> Result<Metrics> {
    let pairs = logits_rd
        .iter()
        .zip(logits_fd)
        .zip(examples)
        .map(|((a, b), ex)| Ok((ex.top, fuse_predict(a.view(), b.view(), space)?.1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_predictions(pairs))
}

pub fn evaluate_examples(
    params: &EncoderParams<f32>,
    examples: &[Example],
    space: &AnswerSpace,
) -> Result<Metrics> {
    metrics_from_logits(&predict_logits(params, examples, space)?, examples, space)
}

/// Evaluates a student-style model on one corpus split.
pub fn evaluate(
    params: &EncoderParams<f32>,
    corpus: &Corpus,
    split: Split,
    template: &TemplateSpec,
    vocab: &Vocabulary,
    space: &AnswerSpace,
) -> Result<Metrics> {
    let examples = make_examples(corpus, split, template, vocab, space, None)?;
    if examples.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} split is empty",
            split.name()
        )));
    }
    evaluate_examples(params, &examples, space)
}

fn knowledge_for<'a>(
    objective: &Objective,
    knowledge: &Knowledge<'a>,
) -> Result<(
    Option<&'a SoftLabelStore<f32>>,
    Option<&'a FeatureStore<f32>>,
)> {
    match *objective {
        Objective::Hard => Ok((None, None)),
        Objective::Response { temperature, .. } => {
            let s = knowledge
                .soft
                .ok_or_else(|| Error::MissingKnowledge("soft-label store".into()))?;
            s.check_temperature(temperature)?;
            Ok((Some(s), None))
        }
        Objective::Feature { .. } => {
            let f = knowledge
                .features
                .ok_or_else(|| Error::MissingKnowledge("feature store".into()))?;
            Ok((None, Some(f)))
        }
    }
}

/// One optimizer step over `batch`; returns the summed instance loss.
#[allow(clippy::too_many_arguments)]
fn train_batch(
    params: &mut EncoderParams<f32>,
    opt: &mut AdamW<f32>,
    batch: &[&Example],
    answer_ids: &[usize],
    objective: &Objective,
    soft: Option<&SoftLabelStore<f32>>,
    features: Option<&FeatureStore<f32>>,
    cfg: &TrainConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut grads = params.zeros_like();
    let scale = 1.0 / batch.len() as f32;
    let use_dropout = params.config.dropout_rate > 0.0;
    let mut total = 0.0;
    for ex in batch {
        let p = &ex.prompt;
        let trace = params.encode(&p.ids, &p.attn_mask, use_dropout.then_some(&mut *rng))?;
        let row = trace.row_of(p.slot_pos).ok_or_else(|| {
            Error::InvalidArgument(format!("slot of `{}` is masked", p.instance_id))
        })?;
        let h = trace.hidden.row(row);
        let head = params.head(h, Some(answer_ids))?;
        let y = soft.map(|s| s.get(&p.instance_id)).transpose()?;
        let t = features.map(|f| f.get(&p.instance_id)).transpose()?;
        let il = objective.instance(
            head.logits.view(),
            ex.gold,
            h,
            y.map(|a| a.view()),
            t.map(|a| a.view()),
        )?;
        if !il.loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at `{}`",
                p.instance_id
            )));
        }
        total += il.loss as f64;
        let d_logits = il.d_logits * scale;
        let mut dh = params.head_backward(&head, d_logits.view(), &mut grads);
        if let Some(d) = il.d_hidden {
            dh.scaled_add(scale, &d);
        }
        let mut d_hidden = Array2::zeros(trace.hidden.dim());
        d_hidden.row_mut(row).assign(&dh);
        params.backward(&trace, &d_hidden, &mut grads);
    }
    if let Some(max) = cfg.max_grad_norm {
        clip_grad_norm(&mut grads, max);
    }
    opt.step(params, &mut grads, lr);
    Ok(total)
}

/// Trains a copy of `init` once per learning rate and keeps the checkpoint
/// with the best dev macro-F1 (ties: accuracy, then earliest epoch, then
/// earliest learning rate). Every learning rate sees the same data order.
#[allow(clippy::too_many_arguments)]
pub fn train_model(
    init: &EncoderParams<f32>,
    train: &[Example],
    dev: &[Example],
    space: &AnswerSpace,
    objective: Objective,
    knowledge: &Knowledge<'_>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Trained> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::InvalidArgument(
            "train and dev examples must be nonempty".into(),
        ));
    }
    let (soft, features) = knowledge_for(&objective, knowledge)?;
    let answer_ids = space.token_ids();
    let mut best: Option<Trained> = None;
    let mut history = Vec::new();
    for &lr in &cfg.learning_rates {
        let mut params = init.clone();
        let mut opt = AdamW::new(cfg.optimizer, &mut params);
        let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drop_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd409_0c7a_11ed_5eed);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut since_best = 0;
        let mut best_here: Option<Metrics> = None;
        for epoch in 1..=cfg.max_epochs {
            order.shuffle(&mut order_rng);
            let mut loss = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
                loss += train_batch(
                    &mut params,
                    &mut opt,
                    &batch,
                    &answer_ids,
                    &objective,
                    soft,
                    features,
                    cfg,
                    lr,
                    &mut drop_rng,
                )?;
            }
            let dev_m = evaluate_examples(&params, dev, space)?;
            tracing::debug!(
                lr,
                epoch,
                loss = loss / train.len() as f64,
                f1 = dev_m.macro_f1,
                "epoch"
            );
            history.push(EpochRecord {
                lr,
                epoch,
                train_loss: loss / train.len() as f64,
                dev: dev_m.clone(),
            });
            if best.as_ref().is_none_or(|b| dev_m.better_than(&b.dev)) {
                best = Some(Trained {
                    params: params.clone(),
                    lr,
                    epoch,
                    dev: dev_m.clone(),
                    history: Vec::new(),
                });
            }
            if best_here.as_ref().is_none_or(|b| dev_m.better_than(b)) {
                best_here = Some(dev_m);
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience.is_some_and(|p| since_best >= p) {
                    break;
                }
            }
        }
    }
    let mut best = best.expect("at least one epoch ran");
    best.history = history;
    Ok(best)
}
