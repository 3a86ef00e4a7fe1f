//! Cloze prompt construction.
//!
//! Continuous layout:
//! `[CLS] arg1 [V]_1..[V]_{m/2} <slot> [V]_{m/2+1}..[V]_m arg2 [SEP] [PAD]...`
//!
//! Discrete layout: `[CLS] arg1 <slot> arg2 [SEP] [PAD]...`
//!
//! The slot holds `[MASK]` for students and the integrated connective
//! `[C]_x` for the teacher.

use serde::{Deserialize, Serialize};

use super::ConnectiveInventory;
use crate::corpus::Instance;
use crate::encoder::{EncoderParams, Float, PROMPT_LEN};
use crate::error::{Error, Result};
use crate::vocab::{self, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSpec {
    pub kind: TemplateKind,
    /// Number of `[V]` tokens; half precede the slot, half follow it.
    pub m: usize,
    pub arg1_max: usize,
    pub total_len: usize,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec {
            kind: TemplateKind::Continuous,
            m: 6,
            arg1_max: 50,
            total_len: PROMPT_LEN,
        }
    }
}

impl TemplateSpec {
    pub fn discrete() -> Self {
        TemplateSpec {
            kind: TemplateKind::Discrete,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "m = {} must be even",
                self.m
            )));
        }
        if self.arg1_max == 0 || self.total_len < self.m + 5 {
            return Err(Error::InvalidArgument("template too short".into()));
        }
        Ok(())
    }

    fn n_virtual(&self) -> usize {
        match self.kind {
            TemplateKind::Continuous => self.m,
            TemplateKind::Discrete => 0,
        }
    }
}

/// A padded prompt ready for the encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub ids: Vec<usize>,
    pub attn_mask: Vec<u8>,
    pub slot_pos: usize,
    pub instance_id: String,
}

pub fn virtual_token_name(i: usize) -> String {
    format!("[V]_{i}")
}

/// Adds `[V]_1..[V]_m` to the vocabulary and grows `params` with
/// Gaussian(0, 0.02) rows for them. Returns their ids.
pub fn register_template_tokens<F: Float>(
    m: usize,
    vocab: &mut Vocabulary,
    params: &mut EncoderParams<F>,
    seed: u64,
) -> Result<Vec<usize>> {
    let ids = (1..=m)
        .map(|i| vocab.add_token(&virtual_token_name(i)))
        .collect::<Result<Vec<_>>>()?;
    params.grow_vocab(vocab.len(), seed);
    Ok(ids)
}

fn layout(
    instance: &Instance,
    spec: &TemplateSpec,
    vocab: &Vocabulary,
    slot_token: usize,
) -> Result<PromptInstance> {
    spec.validate()?;
    let m = spec.n_virtual();
    let v_ids = (1..=m)
        .map(|i| {
            vocab.id(&virtual_token_name(i)).ok_or_else(|| {
                Error::InvalidArgument(format!("{} missing from vocabulary", virtual_token_name(i)))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut arg1 = vocab.tokenize(&instance.arg1);
    arg1.truncate(spec.arg1_max);
    let budget = spec.total_len.saturating_sub(3 + m + arg1.len());
    let mut arg2 = vocab.tokenize(&instance.arg2);
    arg2.truncate(budget);
    if arg1.is_empty() || arg2.is_empty() {
        return Err(Error::EmptyArgument(instance.id.clone()));
    }
    let mut ids = Vec::with_capacity(spec.total_len);
    ids.push(vocab::CLS);
    ids.extend_from_slice(&arg1);
    ids.extend_from_slice(&v_ids[..m / 2]);
    let slot_pos = ids.len();
    ids.push(slot_token);
    ids.extend_from_slice(&v_ids[m / 2..]);
    ids.extend_from_slice(&arg2);
    ids.push(vocab::SEP);
    let content = ids.len();
    ids.resize(spec.total_len, vocab::PAD);
    let attn_mask = (0..spec.total_len).map(|i| u8::from(i < content)).collect();
    Ok(PromptInstance {
        ids,
        attn_mask,
        slot_pos,
        instance_id: instance.id.clone(),
    })
}

/// Student prompt with `[MASK]` at the slot.
pub fn build_student_prompt(
    instance: &Instance,
    spec: &TemplateSpec,
    vocab: &Vocabulary,
) -> Result<PromptInstance> {
    layout(instance, spec, vocab, vocab::MASK)
}

/// Teacher prompt with the instance's integrated connective at the slot.
pub fn build_teacher_prompt(
    instance: &Instance,
    spec: &TemplateSpec,
    vocab: &Vocabulary,
    inventory: &ConnectiveInventory,
) -> Result<PromptInstance> {
    let c = inventory
        .token_id(&instance.connective)
        .ok_or_else(|| Error::UnregisteredConnective(instance.connective.clone()))?;
    layout(instance, spec, vocab, c)
}
