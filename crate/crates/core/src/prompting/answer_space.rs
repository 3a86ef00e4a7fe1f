//! Answer-relation mapping rule and the answer spaces built from it.
//!
//! Answers map to sets of third-level senses, and third-level senses map to
//! one of the four top-level relations. Predictions are top-level relations
//! obtained by summing answer probabilities per relation.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::connectives::{mean_rows, normalize_connective, ConnectiveInventory};
use crate::corpus::{Corpus, Instance, SenseHierarchy, Split, TopLevel};
use crate::encoder::{EncoderParams, Float, INIT_STD};
use crate::error::{Error, Result};
use crate::vocab::{Vocabulary, UNK};

const BUNDLED_MAPPING: &str = include_str!("../../data/mapping_table.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRow {
    pub third: String,
    pub answer: String,
    pub top: TopLevel,
}

/// Third-level sense -> answer name -> top-level relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingTable {
    rows: Vec<MappingRow>,
}

impl MappingTable {
    pub fn bundled() -> MappingTable {
        Self::parse(BUNDLED_MAPPING).expect("bundled mapping table is valid")
    }

    /// Parses `third <TAB> answer <TAB> top` rows; `#` lines are comments.
    pub fn parse(text: &str) -> Result<MappingTable> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Mapping(format!(
                    "line {}: expected 3 columns",
                    n + 1
                )));
            }
            rows.push(MappingRow {
                third: cols[0].to_string(),
                answer: cols[1].to_string(),
                top: cols[2].parse().map_err(|_| {
                    Error::Mapping(format!("line {}: unknown top-level `{}`", n + 1, cols[2]))
                })?,
            });
        }
        Ok(MappingTable { rows })
    }

    pub fn rows(&self) -> &[MappingRow] {
        &self.rows
    }

    /// Answer names in order of first appearance.
    pub fn answers(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .map(|r| r.answer.as_str())
            .filter(|a| seen.insert(*a))
            .collect()
    }

    /// Checks that every hierarchy third appears exactly once, each answer
    /// has a single top-level relation, and tops agree with the hierarchy.
    pub fn validate(&self, hierarchy: &SenseHierarchy) -> Result<()> {
        let mut seen = HashSet::new();
        let mut answer_top: BTreeMap<&str, TopLevel> = BTreeMap::new();
        for r in &self.rows {
            let sense = hierarchy
                .resolve(&r.third)
                .ok_or_else(|| Error::Mapping(format!("`{}` not in hierarchy", r.third)))?;
            if sense.top != r.top {
                return Err(Error::Mapping(format!(
                    "`{}` mapped to {} but belongs to {}",
                    r.third, r.top, sense.top
                )));
            }
            if !seen.insert(r.third.as_str()) {
                return Err(Error::Mapping(format!("`{}` listed twice", r.third)));
            }
            if let Some(prev) = answer_top.insert(&r.answer, r.top) {
                if prev != r.top {
                    return Err(Error::Mapping(format!(
                        "answer `{}` spans {} and {}",
                        r.answer, prev, r.top
                    )));
                }
            }
        }
        if let Some(missing) = hierarchy.thirds().find(|t| !seen.contains(t)) {
            return Err(Error::Mapping(format!("`{missing}` has no answer")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One answer per top-level relation.
    Top4,
    /// One answer per second-level relation.
    Second20,
    /// The 21-answer mapping rule.
    Paper21,
    /// One answer per third-level relation.
    Third31,
    /// Existing connective tokens, one per group of the 21-answer rule.
    Substantive,
}

impl Granularity {
    pub const ALL: [Granularity; 5] = [
        Granularity::Top4,
        Granularity::Second20,
        Granularity::Paper21,
        Granularity::Third31,
        Granularity::Substantive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Top4 => "top4",
            Granularity::Second20 => "second20",
            Granularity::Paper21 => "paper21",
            Granularity::Third31 => "third31",
            Granularity::Substantive => "substantive",
        }
    }

    pub fn is_virtual(self) -> bool {
        self != Granularity::Substantive
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Granularity::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown granularity `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub name: String,
    pub token_id: usize,
    pub thirds: BTreeSet<String>,
    pub top: TopLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSpace {
    pub granularity: Granularity,
    answers: Vec<Answer>,
    by_third: BTreeMap<String, usize>,
}

impl AnswerSpace {
    fn new(granularity: Granularity, answers: Vec<Answer>) -> AnswerSpace {
        let by_third = answers
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.thirds.iter().map(move |t| (t.clone(), i)))
            .collect();
        AnswerSpace {
            granularity,
            answers,
            by_third,
        }
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn token_ids(&self) -> Vec<usize> {
        self.answers.iter().map(|a| a.token_id).collect()
    }

    pub fn index_of_third(&self, third: &str) -> Option<usize> {
        self.by_third.get(third).copied()
    }

    /// Reorders answers by `order` (a permutation of `0..len`).
    pub fn permuted(&self, order: &[usize]) -> AnswerSpace {
        AnswerSpace::new(
            self.granularity,
            order.iter().map(|&i| self.answers[i].clone()).collect(),
        )
    }
}

fn group_by<K: Ord + Clone>(
    hierarchy: &SenseHierarchy,
    key: impl Fn(&crate::corpus::SenseLabel) -> K,
) -> Vec<(K, BTreeSet<String>, TopLevel)> {
    let mut order: Vec<K> = Vec::new();
    let mut groups: BTreeMap<K, (BTreeSet<String>, TopLevel)> = BTreeMap::new();
    for row in hierarchy.rows() {
        let k = key(row);
        let entry = groups.entry(k.clone()).or_insert_with(|| {
            order.push(k.clone());
            (BTreeSet::new(), row.top)
        });
        entry.0.insert(row.third.clone());
    }
    order
        .into_iter()
        .map(|k| {
            let (set, top) = groups.remove(&k).expect("grouped");
            (k, set, top)
        })
        .collect()
}

fn paper21_groups(mapping: &MappingTable) -> Vec<(String, BTreeSet<String>, TopLevel)> {
    mapping
        .answers()
        .into_iter()
        .map(|a| {
            let rows: Vec<&MappingRow> = mapping.rows().iter().filter(|r| r.answer == a).collect();
            (
                a.to_string(),
                rows.iter().map(|r| r.third.clone()).collect(),
                rows[0].top,
            )
        })
        .collect()
}

/// Builds the answer space. Virtual granularities append one new token per
/// answer to `vocab` (the caller grows the encoder); `Substantive` instead
/// picks, per 21-rule group, the most frequent training connective whose
/// last word is an unused base-vocabulary token.
pub fn build_answer_space(
    hierarchy: &SenseHierarchy,
    mapping: &MappingTable,
    granularity: Granularity,
    vocab: &mut Vocabulary,
    corpus: &Corpus,
) -> Result<AnswerSpace> {
    mapping.validate(hierarchy)?;
    let groups: Vec<(String, BTreeSet<String>, TopLevel)> = match granularity {
        Granularity::Top4 => group_by(hierarchy, |r| r.top)
            .into_iter()
            .map(|(t, s, top)| (format!("[A]_{}", t.name()), s, top))
            .collect(),
        Granularity::Second20 => group_by(hierarchy, |r| r.second.clone())
            .into_iter()
            .enumerate()
            .map(|(i, (_, s, top))| (format!("[A]_{}", i + 1), s, top))
            .collect(),
        Granularity::Third31 => hierarchy
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    format!("[A]_{}", i + 1),
                    BTreeSet::from([r.third.clone()]),
                    r.top,
                )
            })
            .collect(),
        Granularity::Paper21 | Granularity::Substantive => paper21_groups(mapping),
    };
    let answers = if granularity == Granularity::Substantive {
        substantive_answers(groups, vocab, corpus)?
    } else {
        groups
            .into_iter()
            .map(|(name, thirds, top)| {
                Ok(Answer {
                    token_id: vocab.add_token(&name)?,
                    name,
                    thirds,
                    top,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(AnswerSpace::new(granularity, answers))
}

fn substantive_answers(
    groups: Vec<(String, BTreeSet<String>, TopLevel)>,
    vocab: &Vocabulary,
    corpus: &Corpus,
) -> Result<Vec<Answer>> {
    let candidate = |conn: &str| -> Option<usize> {
        vocab
            .tokenize(conn)
            .last()
            .copied()
            .filter(|&id| id != UNK && vocab.is_base(id))
    };
    let mut global: BTreeMap<String, usize> = BTreeMap::new();
    for inst in corpus.split(Split::Train) {
        *global
            .entry(normalize_connective(&inst.connective))
            .or_default() += 1;
    }
    let ranked = |counts: BTreeMap<String, usize>| {
        let mut v: Vec<(String, usize)> = counts.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    };
    let global = ranked(global);
    let mut used = HashSet::new();
    let mut answers = Vec::with_capacity(groups.len());
    for (_, thirds, top) in groups {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for inst in corpus.split(Split::Train) {
            if thirds.contains(&inst.first_sense().third) {
                *counts
                    .entry(normalize_connective(&inst.connective))
                    .or_default() += 1;
            }
        }
        let pick = ranked(counts)
            .into_iter()
            .chain(global.iter().cloned())
            .find_map(|(conn, _)| {
                candidate(&conn)
                    .filter(|id| !used.contains(id))
                    .map(|id| (conn, id))
            });
        let (conn, token_id) = pick.ok_or_else(|| {
            Error::Mapping("no unused connective token available for a substantive answer".into())
        })?;
        used.insert(token_id);
        answers.push(Answer {
            name: conn,
            token_id,
            thirds,
            top,
        });
    }
    Ok(answers)
}

/// Sets every virtual answer embedding to the mean integrated-connective
/// embedding over the training instances whose first sense falls in the
/// answer's group. Groups without training instances get a fresh
/// Gaussian(0, 0.02) row. Returns the per-answer instance counts.
pub fn init_virtual_answers<F: Float>(
    space: &AnswerSpace,
    corpus: &Corpus,
    inventory: &ConnectiveInventory,
    params: &mut EncoderParams<F>,
    seed: u64,
) -> Result<Vec<usize>> {
    if !space.granularity.is_virtual() {
        return Ok(vec![0; space.len()]);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); space.len()];
    for inst in corpus.split(Split::Train) {
        let Some(a) = space.index_of_third(&inst.first_sense().third) else {
            continue;
        };
        let c = inventory
            .token_id(&inst.connective)
            .ok_or_else(|| Error::UnregisteredConnective(inst.connective.clone()))?;
        members[a].push(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    for (answer, rows) in space.answers().iter().zip(&members) {
        let v = if rows.is_empty() {
            tracing::warn!(answer = %answer.name, "no training instances; using random init");
            (0..params.d_model())
                .map(|_| F::cst(normal.sample(&mut rng)))
                .collect()
        } else {
            mean_rows(params, rows)
        };
        params.set_token_embedding(answer.token_id, &v)?;
    }
    Ok(members.iter().map(Vec::len).collect())
}

/// Index of the answer whose group holds the instance's first third-level sense.
pub fn gold_answer(instance: &Instance, space: &AnswerSpace) -> Result<usize> {
    let third = &instance.first_sense().third;
    space
        .index_of_third(third)
        .ok_or_else(|| Error::UncoveredSense(third.clone()))
}

/// Sums answer probabilities per top-level relation; ties go to the earlier
/// relation in Comparison < Contingency < Expansion < Temporal order.
pub fn aggregate_relation_scores<F: Float>(
    answer_probs: &[F],
    space: &AnswerSpace,
) -> Result<([F; 4], TopLevel)> {
    if answer_probs.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            got: answer_probs.len(),
        });
    }
    let mut scores = [F::zero(); 4];
    for (p, a) in answer_probs.iter().zip(space.answers()) {
        scores[a.top.index()] += *p;
    }
    let mut best = 0;
    for i in 1..4 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Ok((scores, TopLevel::ALL[best]))
}
