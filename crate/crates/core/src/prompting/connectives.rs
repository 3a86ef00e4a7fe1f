//! Integrated connective tokens `[C]_x`.

use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::encoder::{EncoderParams, Float};
use crate::error::Result;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegratedConnective {
    pub token_id: usize,
    pub surface: String,
    /// Sub-token ids of the original connective (`t_x` = length).
    pub sub_tokens: Vec<usize>,
}

/// One integrated token per distinct (lowercased, whitespace-normalized)
/// connective surface form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConnectiveInventory {
    entries: BTreeMap<String, IntegratedConnective>,
}

pub fn normalize_connective(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl ConnectiveInventory {
    pub fn get(&self, connective: &str) -> Option<&IntegratedConnective> {
        self.entries.get(&normalize_connective(connective))
    }

    pub fn token_id(&self, connective: &str) -> Option<usize> {
        self.get(connective).map(|c| c.token_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &IntegratedConnective> {
        self.entries.values()
    }
}

/// Mean of the given embedding rows.
pub(crate) fn mean_rows<F: Float>(params: &EncoderParams<F>, rows: &[usize]) -> Vec<F> {
    let d = params.d_model();
    let mut acc = vec![F::zero(); d];
    for &r in rows {
        for (a, &e) in acc.iter_mut().zip(params.tok_emb.row(r).iter()) {
            *a += e;
        }
    }
    let n = F::cst(rows.len() as f64);
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Adds a `[C]_x` token for every distinct connective in `corpus` (sorted
/// surface order) and sets its embedding to the mean of its sub-token
/// embeddings. Connectives already registered are skipped.
pub fn register_integrated_connectives<F: Float>(
    corpus: &Corpus,
    vocab: &mut Vocabulary,
    params: &mut EncoderParams<F>,
    inventory: &mut ConnectiveInventory,
    seed: u64,
) -> Result<()> {
    let mut surfaces: Vec<String> = corpus
        .instances()
        .iter()
        .map(|i| normalize_connective(&i.connective))
        .filter(|s| !s.is_empty() && !inventory.entries.contains_key(s))
        .collect();
    surfaces.sort();
    surfaces.dedup();
    let first = inventory.len() + 1;
    let mut added = Vec::with_capacity(surfaces.len());
    for (k, surface) in surfaces.into_iter().enumerate() {
        let sub_tokens = vocab.tokenize(&surface);
        let token_id = vocab.add_token(&format!("[C]_{}", first + k))?;
        added.push(IntegratedConnective {
            token_id,
            surface,
            sub_tokens,
        });
    }
    params.grow_vocab(vocab.len(), seed);
    for c in added {
        let mean = mean_rows(params, &c.sub_tokens);
        params.set_token_embedding(c.token_id, &mean)?;
        inventory.entries.insert(c.surface.clone(), c);
    }
    Ok(())
}
