//! Whitespace tokenizer and a vocabulary with an appendable extension region.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const CLS: usize = 1;
pub const SEP: usize = 2;
pub const MASK: usize = 3;
pub const UNK: usize = 4;

pub const SPECIALS: [&str; 5] = ["[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"];

/// Token table with dense ids. Ids below `frozen_base_size` are the base
/// region (specials + corpus words); later ids are virtual tokens appended
/// with [`Vocabulary::add_token`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    to_id: HashMap<String, usize>,
    tokens: Vec<String>,
    frozen_base_size: usize,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_base_tokens(std::iter::empty::<String>())
    }
}

impl Vocabulary {
    fn from_base_tokens<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Vocabulary {
        let mut v = Vocabulary {
            to_id: HashMap::new(),
            tokens: Vec::new(),
            frozen_base_size: 0,
        };
        for t in SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().map(Into::into))
        {
            if !v.to_id.contains_key(&t) {
                v.to_id.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v.frozen_base_size = v.tokens.len();
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn frozen_base_size(&self) -> usize {
        self.frozen_base_size
    }

    pub fn is_base(&self, id: usize) -> bool {
        id < self.frozen_base_size
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Appends a token to the extension region and returns its id. The caller
    /// must grow the encoder's embedding table to match.
    pub fn add_token(&mut self, surface: &str) -> Result<usize> {
        if self.to_id.contains_key(surface) {
            return Err(Error::DuplicateToken(surface.to_string()));
        }
        let id = self.tokens.len();
        self.to_id.insert(surface.to_string(), id);
        self.tokens.push(surface.to_string());
        Ok(id)
    }

    /// Lowercases, splits on whitespace and maps unknown words to `[UNK]`.
    /// Raw text never produces special ids, even if it spells one.
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        split_words(text)
            .map(|w| match self.to_id.get(&w) {
                Some(&id) if id >= SPECIALS.len() => id,
                _ => UNK,
            })
            .collect()
    }

    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or("[UNK]"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One token per line; line number is the id.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#frozen_base_size {}", self.frozen_base_size)?;
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Vocabulary> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::InvalidArgument("empty vocabulary file".into()))?;
        let frozen_base_size = header
            .strip_prefix("#frozen_base_size ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::InvalidArgument("missing vocabulary header".into()))?;
        let mut v = Vocabulary {
            to_id: HashMap::new(),
            tokens: Vec::new(),
            frozen_base_size,
        };
        for line in lines {
            let t = line?;
            if v.to_id.insert(t.clone(), v.tokens.len()).is_some() {
                return Err(Error::DuplicateToken(t));
            }
            v.tokens.push(t);
        }
        if v.tokens.len() < SPECIALS.len()
            || v.tokens[..SPECIALS.len()] != SPECIALS.map(String::from)
            || frozen_base_size > v.tokens.len()
        {
            return Err(Error::InvalidArgument("corrupt vocabulary file".into()));
        }
        Ok(v)
    }
}

fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

/// Builds the base vocabulary from every argument and connective in `corpus`.
/// Words reaching `min_count` are ordered by descending count, then lexically.
pub fn build_vocabulary(corpus: &Corpus, min_count: usize) -> Vocabulary {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for inst in corpus.instances() {
        for text in [&inst.arg1, &inst.arg2, &inst.connective] {
            for w in split_words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(w, c)| *c >= min_count && !SPECIALS.contains(&w.as_str()))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_base_tokens(kept.into_iter().map(|(w, _)| w))
}
