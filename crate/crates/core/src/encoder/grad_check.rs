//! Finite-difference verification of the hand-written gradients.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderParams};
use crate::distillation::{soften, Objective};
use crate::error::{Error, Result};
use crate::vocab;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Cross-entropy on the gold answer.
    Hard,
    /// Response objective, alpha = 0.5 and T = 10.
    Soft,
    /// Feature objective, beta = 1.
    Feature,
}

impl LossKind {
    pub fn objective(self) -> Objective {
        match self {
            LossKind::Hard => Objective::Hard,
            LossKind::Soft => Objective::Response {
                alpha: 0.5,
                temperature: 10.0,
                t_squared_scaling: false,
            },
            LossKind::Feature => Objective::Feature { beta: 1.0 },
        }
    }
}

struct Example {
    ids: Vec<usize>,
    mask: Vec<u8>,
    slot: usize,
    gold: usize,
    soft: Array1<f64>,
    feature: Array1<f64>,
}

struct Batch {
    answers: Vec<usize>,
    examples: Vec<Example>,
}

fn random_batch(config: &EncoderConfig, rng: &mut ChaCha8Rng) -> Batch {
    let v = config.vocab_size;
    let n_answers = 5.min(v - vocab::SPECIALS.len());
    let mut answers: Vec<usize> = Vec::new();
    while answers.len() < n_answers {
        let id = rng.random_range(vocab::SPECIALS.len()..v);
        if !answers.contains(&id) {
            answers.push(id);
        }
    }
    let examples = (0..3)
        .map(|_| {
            let content = rng.random_range(6..=12);
            let total = content + 3;
            let mut ids: Vec<usize> = (0..total)
                .map(|_| rng.random_range(vocab::SPECIALS.len()..v))
                .collect();
            ids[0] = vocab::CLS;
            ids[content - 1] = vocab::SEP;
            let slot = rng.random_range(1..content - 1);
            ids[slot] = vocab::MASK;
            let mut mask = vec![1u8; total];
            for m in &mut mask[content..] {
                *m = 0;
            }
            for id in &mut ids[content..] {
                *id = vocab::PAD;
            }
            let raw: Array1<f64> = (0..n_answers)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            Example {
                ids,
                mask,
                slot,
                gold: rng.random_range(0..n_answers),
                soft: soften(raw.view(), 10.0).expect("finite"),
                feature: (0..config.d_model)
                    .map(|_| StandardNormal.sample(rng))
                    .collect(),
            }
        })
        .collect();
    Batch { answers, examples }
}

fn batch_loss(
    params: &EncoderParams<f64>,
    batch: &Batch,
    objective: Objective,
    mut grads: Option<&mut EncoderParams<f64>>,
) -> Result<f64> {
    let k = batch.examples.len() as f64;
    let mut total = 0.0;
    for ex in &batch.examples {
        let trace = params.encode(&ex.ids, &ex.mask, None)?;
        let row = trace.row_of(ex.slot).expect("slot is active");
        let h = trace.hidden.row(row);
        let head = params.head(h, Some(&batch.answers))?;
        let il = objective.instance(
            head.logits.view(),
            ex.gold,
            h,
            Some(ex.soft.view()),
            Some(ex.feature.view()),
        )?;
        total += il.loss;
        if let Some(g) = grads.as_deref_mut() {
            let mut dh_row = params.head_backward(&head, (il.d_logits / k).view(), g);
            if let Some(dh) = il.d_hidden {
                dh_row += &(dh / k);
            }
            let mut dh = Array2::zeros(trace.hidden.dim());
            dh.row_mut(row).assign(&dh_row);
            params.backward(&trace, &dh, g);
        }
    }
    let loss = total / k;
    if !loss.is_finite() {
        return Err(Error::NonFinite("grad-check loss".into()));
    }
    Ok(loss)
}

/// Compares analytic gradients with central differences (step 1e-5) on a
/// random three-example minibatch, returning the maximum over all
/// parameters of `|analytic - numeric| / max(|numeric|, 1e-8)`.
///
/// Dropout is forced off; the check runs in `f64`.
pub fn grad_check(config: &EncoderConfig, loss_kind: LossKind, seed: u64) -> Result<f64> {
    let config = EncoderConfig {
        dropout_rate: 0.0,
        ..config.clone()
    };
    if config.vocab_size < vocab::SPECIALS.len() + 2 {
        return Err(Error::Config(
            "grad check needs at least 7 vocabulary entries".into(),
        ));
    }
    let mut params = EncoderParams::<f64>::init(&config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let batch = random_batch(&config, &mut rng);
    let objective = loss_kind.objective();

    let mut grads = params.zeros_like();
    batch_loss(&params, &batch, objective, Some(&mut grads))?;
    let analytic: Vec<Vec<f64>> = grads
        .tensors_mut()
        .into_iter()
        .map(|t| t.data.to_vec())
        .collect();

    let n_tensors = analytic.len();
    let mut worst = 0.0f64;
    for ti in 0..n_tensors {
        let len = analytic[ti].len();
        for j in 0..len {
            let orig = params.tensors_mut()[ti].data[j];
            params.tensors_mut()[ti].data[j] = orig + FD_STEP;
            let up = batch_loss(&params, &batch, objective, None)?;
            params.tensors_mut()[ti].data[j] = orig - FD_STEP;
            let down = batch_loss(&params, &batch, objective, None)?;
            params.tensors_mut()[ti].data[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let err = (analytic[ti][j] - numeric).abs() / numeric.abs().max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
