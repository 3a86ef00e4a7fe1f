//! Teacher knowledge, student losses and two-student fusion.
//!
//! All losses act on answer-restricted logits (one score per answer of the
//! [`AnswerSpace`]). Each per-instance term also returns its gradient so the
//! training loop and the gradient checker share one code path.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split, TopLevel};
use crate::encoder::{checkpoint_hash, EncoderParams, Float, ForwardOutput};
use crate::error::{Error, Result};
use crate::prompting::{
    aggregate_relation_scores, build_teacher_prompt, AnswerSpace, ConnectiveInventory, TemplateSpec,
};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KDConfig {
    /// Distillation temperature.
    pub temperature: f64,
    /// Weight of the hard loss in the response student objective, in (0,1).
    pub alpha: f64,
    /// Weight of the feature loss in the feature student objective.
    pub beta: f64,
    /// Multiply the soft loss by T^2.
    pub t_squared_scaling: bool,
}

impl Default for KDConfig {
    fn default() -> Self {
        KDConfig {
            temperature: 10.0,
            alpha: 0.5,
            beta: 5e-4,
            t_squared_scaling: false,
        }
    }
}

impl KDConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} not in (0,1)",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta {} must be >= 0",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Scores of the answer tokens at the slot position, in answer-space order.
pub fn answer_logits<F: Float>(
    output: &ForwardOutput<F>,
    slot_pos: usize,
    space: &AnswerSpace,
) -> Result<Array1<F>> {
    let (len, vocab) = output.logits.dim();
    if slot_pos >= len {
        return Err(Error::IndexOutOfRange {
            index: slot_pos,
            n: len,
        });
    }
    let row = output.logits.row(slot_pos);
    space
        .token_ids()
        .into_iter()
        .map(|id| {
            if id < vocab {
                Ok(row[id])
            } else {
                Err(Error::TokenOutOfRange { id, size: vocab })
            }
        })
        .collect()
}

fn check_finite<F: Float>(a: ArrayView1<'_, F>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("logits".into()))
    }
}

/// Temperature softmax `exp(a_i/T) / sum_j exp(a_j/T)`, max-shifted.
pub fn soften<F: Float>(a: ArrayView1<'_, F>, temperature: f64) -> Result<Array1<F>> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature {temperature} must be positive"
        )));
    }
    check_finite(a)?;
    let t = F::cst(temperature);
    let m = a.fold(F::neg_infinity(), |m, &v| m.max(v));
    let mut e = a.mapv(|v| ((v - m) / t).exp());
    let s = e.sum();
    e /= s;
    Ok(e)
}

fn log_softmax<F: Float>(a: ArrayView1<'_, F>, t: F) -> Array1<F> {
    let m = a.fold(F::neg_infinity(), |m, &v| m.max(v));
    let shifted = a.mapv(|v| (v - m) / t);
    let lse = shifted.mapv(F::exp).sum().ln();
    shifted.mapv(|v| v - lse)
}

/// Cross-entropy against `gold` and its gradient w.r.t. the logits.
pub fn hard_term<F: Float>(a: ArrayView1<'_, F>, gold: usize) -> Result<(F, Array1<F>)> {
    if gold >= a.len() {
        return Err(Error::IndexOutOfRange {
            index: gold,
            n: a.len(),
        });
    }
    check_finite(a)?;
    let lp = log_softmax(a, F::one());
    let mut grad = lp.mapv(F::exp);
    grad[gold] -= F::one();
    Ok((-lp[gold], grad))
}

/// `KL(target || soften(a, T))` and its gradient. Zero target entries
/// contribute nothing.
pub fn soft_term<F: Float>(
    a: ArrayView1<'_, F>,
    target: ArrayView1<'_, F>,
    temperature: f64,
    t_squared_scaling: bool,
) -> Result<(F, Array1<F>)> {
    if target.len() != a.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: target.len(),
        });
    }
    check_finite(a)?;
    let t = F::cst(temperature);
    let lq = log_softmax(a, t);
    let mut loss = F::zero();
    for (&y, &l) in target.iter().zip(lq.iter()) {
        if y > F::zero() {
            loss += y * (y.ln() - l);
        }
    }
    // d/da KL = (sum(y) * q - y) / T
    let ysum = target.sum();
    let mut grad = lq.mapv(|l| l.exp() * ysum);
    grad -= &target;
    grad /= t;
    if t_squared_scaling {
        let t2 = t * t;
        loss *= t2;
        grad *= t2;
    }
    Ok((loss, grad))
}

/// Mean squared error over the `d` dimensions and its gradient.
pub fn feature_term<F: Float>(
    h: ArrayView1<'_, F>,
    target: ArrayView1<'_, F>,
) -> Result<(F, Array1<F>)> {
    if h.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            got: target.len(),
        });
    }
    let d = F::cst(h.len() as f64);
    let diff = &h - &target;
    let loss = diff.iter().map(|&x| x * x).sum::<F>() / d;
    Ok((loss, diff * (F::cst(2.0) / d)))
}

fn batch_mean<F: Float>(terms: impl Iterator<Item = Result<F>>) -> Result<F> {
    let mut sum = F::zero();
    let mut k = 0usize;
    for t in terms {
        sum += t?;
        k += 1;
    }
    if k == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    Ok(sum / F::cst(k as f64))
}

/// Mean cross-entropy over a batch of answer logits.
pub fn loss_hard<F: Float>(logits: &[Array1<F>], gold: &[usize]) -> Result<F> {
    if logits.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: logits.len(),
            got: gold.len(),
        });
    }
    batch_mean(
        logits
            .iter()
            .zip(gold)
            .map(|(a, &g)| hard_term(a.view(), g).map(|x| x.0)),
    )
}

/// Mean KL divergence between soft labels and the softened predictions.
pub fn loss_soft<F: Float>(
    logits: &[Array1<F>],
    soft: &[Array1<F>],
    temperature: f64,
    t_squared_scaling: bool,
) -> Result<F> {
    if logits.len() != soft.len() {
        return Err(Error::LengthMismatch {
            expected: logits.len(),
            got: soft.len(),
        });
    }
    batch_mean(
        logits.iter().zip(soft).map(|(a, y)| {
            soft_term(a.view(), y.view(), temperature, t_squared_scaling).map(|x| x.0)
        }),
    )
}

/// `alpha * hard + (1 - alpha) * soft`.
pub fn response_loss<F: Float>(hard: F, soft: F, alpha: f64) -> Result<F> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} not in (0,1)"
        )));
    }
    let a = F::cst(alpha);
    Ok(a * hard + (F::one() - a) * soft)
}

/// Mean over batch and dimensions of the squared hidden-state difference.
pub fn feature_loss<F: Float>(student: &[Array1<F>], teacher: &[Array1<F>]) -> Result<F> {
    if student.len() != teacher.len() {
        return Err(Error::LengthMismatch {
            expected: student.len(),
            got: teacher.len(),
        });
    }
    batch_mean(
        student
            .iter()
            .zip(teacher)
            .map(|(s, t)| feature_term(s.view(), t.view()).map(|x| x.0)),
    )
}

/// `hard + beta * feature`.
pub fn feature_student_loss<F: Float>(hard: F, feature: F, beta: f64) -> Result<F> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("beta {beta} must be >= 0")));
    }
    Ok(hard + F::cst(beta) * feature)
}

/// Training objective of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Cross-entropy only (teacher, plain and injection students).
    Hard,
    /// Response-based student.
    Response {
        alpha: f64,
        temperature: f64,
        t_squared_scaling: bool,
    },
    /// Feature-based student.
    Feature { beta: f64 },
}

impl Objective {
    pub fn response(kd: &KDConfig) -> Objective {
        Objective::Response {
            alpha: kd.alpha,
            temperature: kd.temperature,
            t_squared_scaling: kd.t_squared_scaling,
        }
    }

    pub fn feature(kd: &KDConfig) -> Objective {
        Objective::Feature { beta: kd.beta }
    }
}

/// Per-instance loss with gradients w.r.t. answer logits and slot hidden state.
pub struct InstanceLoss<F> {
    pub loss: F,
    pub d_logits: Array1<F>,
    pub d_hidden: Option<Array1<F>>,
}

impl Objective {
    /// Evaluates one instance's contribution. `soft` and `feature` carry the
    /// teacher knowledge required by the response and feature objectives.
    pub fn instance<F: Float>(
        &self,
        logits: ArrayView1<'_, F>,
        gold: usize,
        hidden: ArrayView1<'_, F>,
        soft: Option<ArrayView1<'_, F>>,
        feature: Option<ArrayView1<'_, F>>,
    ) -> Result<InstanceLoss<F>> {
        let (hard, d_hard) = hard_term(logits, gold)?;
        match *self {
            Objective::Hard => Ok(InstanceLoss {
                loss: hard,
                d_logits: d_hard,
                d_hidden: None,
            }),
            Objective::Response {
                alpha,
                temperature,
                t_squared_scaling,
            } => {
                let y = soft.ok_or_else(|| Error::MissingKnowledge("soft label".into()))?;
                let (s, d_soft) = soft_term(logits, y, temperature, t_squared_scaling)?;
                let a = F::cst(alpha);
                let b = F::one() - a;
                Ok(InstanceLoss {
                    loss: response_loss(hard, s, alpha)?,
                    d_logits: d_hard * a + d_soft * b,
                    d_hidden: None,
                })
            }
            Objective::Feature { beta } => {
                let t = feature.ok_or_else(|| Error::MissingKnowledge("feature".into()))?;
                let (f, d_feat) = feature_term(hidden, t)?;
                Ok(InstanceLoss {
                    loss: feature_student_loss(hard, f, beta)?,
                    d_logits: d_hard,
                    d_hidden: Some(d_feat * F::cst(beta)),
                })
            }
        }
    }
}

/// Softened teacher answer distributions keyed by instance id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct SoftLabelStore<F> {
    pub format_version: u32,
    pub temperature: f64,
    pub teacher_hash: String,
    pub labels: BTreeMap<String, Array1<F>>,
}

/// Teacher last-hidden vectors at the integrated-connective slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct FeatureStore<F> {
    pub format_version: u32,
    pub teacher_hash: String,
    pub features: BTreeMap<String, Array1<F>>,
}

const STORE_VERSION: u32 = 1;

impl<F: Float> SoftLabelStore<F> {
    pub fn get(&self, id: &str) -> Result<&Array1<F>> {
        self.labels
            .get(id)
            .ok_or_else(|| Error::MissingKnowledge(id.to_string()))
    }

    /// Fails unless the store was produced at `temperature`.
    pub fn check_temperature(&self, temperature: f64) -> Result<()> {
        if (self.temperature - temperature).abs() > 1e-12 {
            return Err(Error::TemperatureMismatch {
                store: self.temperature,
                config: temperature,
            });
        }
        Ok(())
    }

    /// Recomputes labels at a different temperature from stored teacher
    /// logits.
    pub fn from_logits(logits: &TeacherLogits<F>, temperature: f64) -> Result<Self> {
        let labels = logits
            .logits
            .iter()
            .map(|(id, a)| Ok((id.clone(), soften(a.view(), temperature)?)))
            .collect::<Result<_>>()?;
        Ok(SoftLabelStore {
            format_version: STORE_VERSION,
            temperature,
            teacher_hash: logits.teacher_hash.clone(),
            labels,
        })
    }
}

impl<F: Float> FeatureStore<F> {
    pub fn get(&self, id: &str) -> Result<&Array1<F>> {
        self.features
            .get(id)
            .ok_or_else(|| Error::MissingKnowledge(id.to_string()))
    }
}

/// Raw teacher answer logits and slot features over the training split;
/// soft labels at any temperature are derived from these.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherLogits<F> {
    pub teacher_hash: String,
    pub logits: BTreeMap<String, Array1<F>>,
    pub features: FeatureStore<F>,
}

pub fn save_store<T: Serialize>(store: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut w, store)?;
    w.flush()?;
    Ok(())
}

pub fn load_store<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(fs::File::open(
        path,
    )?))?)
}

/// Runs the teacher (eval mode) over the training split with connective
/// prompts and records answer logits and slot hidden states.
pub fn teacher_logits<F: Float>(
    teacher: &EncoderParams<F>,
    corpus: &Corpus,
    vocab: &Vocabulary,
    template: &TemplateSpec,
    inventory: &ConnectiveInventory,
    space: &AnswerSpace,
) -> Result<TeacherLogits<F>> {
    let hash = checkpoint_hash(teacher)?;
    let ids = space.token_ids();
    let mut logits = BTreeMap::new();
    let mut features = BTreeMap::new();
    for inst in corpus.split(Split::Train) {
        let p = build_teacher_prompt(inst, template, vocab, inventory)?;
        let trace = teacher.encode(&p.ids, &p.attn_mask, None)?;
        let h = trace
            .hidden_at(p.slot_pos)
            .ok_or_else(|| Error::InvalidArgument("slot position is masked".into()))?;
        let head = teacher.head(h, Some(&ids))?;
        if !h.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "teacher feature for `{}`",
                inst.id
            )));
        }
        logits.insert(inst.id.clone(), head.logits);
        features.insert(inst.id.clone(), h.to_owned());
    }
    Ok(TeacherLogits {
        teacher_hash: hash.clone(),
        logits,
        features: FeatureStore {
            format_version: STORE_VERSION,
            teacher_hash: hash,
            features,
        },
    })
}

/// Soft labels at `temperature` and slot features for every training instance.
pub fn extract_teacher_knowledge<F: Float>(
    teacher: &EncoderParams<F>,
    corpus: &Corpus,
    vocab: &Vocabulary,
    template: &TemplateSpec,
    inventory: &ConnectiveInventory,
    space: &AnswerSpace,
    temperature: f64,
) -> Result<(SoftLabelStore<F>, FeatureStore<F>)> {
    let tl = teacher_logits(teacher, corpus, vocab, template, inventory, space)?;
    let soft = SoftLabelStore::from_logits(&tl, temperature)?;
    Ok((soft, tl.features))
}

/// Averages the two students' raw answer logits, applies a T=1 softmax and
/// aggregates to a top-level prediction.
pub fn fuse_predict<F: Float>(
    logits_rd: ArrayView1<'_, F>,
    logits_fd: ArrayView1<'_, F>,
    space: &AnswerSpace,
) -> Result<(Array1<F>, TopLevel)> {
    if logits_rd.len() != logits_fd.len() {
        return Err(Error::LengthMismatch {
            expected: logits_rd.len(),
            got: logits_fd.len(),
        });
    }
    let mean = (&logits_rd + &logits_fd) * F::cst(0.5);
    let probs = soften(mean.view(), 1.0)?;
    let (_, top) = aggregate_relation_scores(probs.as_slice().expect("contiguous"), space)?;
    Ok((probs, top))
}
