//! Sense-annotated argument-pair corpora.
//!
//! Corpora are stored as JSON Lines, one record per line with the fixed field
//! order `id, arg1, arg2, conn, senses, split`.

mod hierarchy;
mod synthetic;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hierarchy::{SenseHierarchy, SenseLabel, TopLevel};
pub use synthetic::{connective_pool, generate_synthetic, SensePrior, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// One argument pair with its annotated implicit connective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub arg1: String,
    pub arg2: String,
    /// Annotated implicit connective; may span several whitespace tokens.
    pub connective: String,
    /// Nonempty; only the first sense drives labels and statistics.
    pub senses: Vec<SenseLabel>,
    pub split: Split,
}

impl Instance {
    pub fn first_sense(&self) -> &SenseLabel {
        &self.senses[0]
    }

    pub fn top(&self) -> TopLevel {
        self.senses[0].top
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidInstance {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.senses.is_empty() {
            return Err(bad("no sense labels"));
        }
        if self.arg1.split_whitespace().next().is_none() {
            return Err(bad("empty arg1"));
        }
        if self.arg2.split_whitespace().next().is_none() {
            return Err(bad("empty arg2"));
        }
        Ok(())
    }
}

/// On-disk record. Field order here is the serialized field order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    arg1: String,
    arg2: String,
    conn: String,
    senses: Vec<String>,
    split: Split,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    instances: Vec<Instance>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and invalid instances.
    pub fn new(instances: Vec<Instance>) -> Result<Corpus> {
        let mut seen = HashSet::new();
        for (i, inst) in instances.iter().enumerate() {
            inst.validate()?;
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::DuplicateId {
                    line: i + 1,
                    id: inst.id.clone(),
                });
            }
        }
        Ok(Corpus { instances })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Instance> + '_ {
        self.instances.iter().filter(move |i| i.split == split)
    }

    pub fn split_vec(&self, split: Split) -> Vec<&Instance> {
        self.split(split).collect()
    }

    /// A corpus holding only the instances of one split.
    pub fn only(&self, split: Split) -> Corpus {
        Corpus {
            instances: self.split(split).cloned().collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }
}

/// Reads a JSON Lines corpus and validates every record against `hierarchy`.
pub fn load_corpus(path: impl AsRef<Path>, hierarchy: &SenseHierarchy) -> Result<Corpus> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: lineno,
            reason: e.to_string(),
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId {
                line: lineno,
                id: rec.id,
            });
        }
        let senses = rec
            .senses
            .iter()
            .map(|s| {
                hierarchy
                    .resolve(s)
                    .cloned()
                    .ok_or_else(|| Error::UnknownSense {
                        line: lineno,
                        sense: s.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let inst = Instance {
            id: rec.id,
            arg1: rec.arg1,
            arg2: rec.arg2,
            connective: rec.conn,
            senses,
            split: rec.split,
        };
        inst.validate().map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: lineno,
            reason: e.to_string(),
        })?;
        instances.push(inst);
    }
    Ok(Corpus { instances })
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    for inst in &corpus.instances {
        let rec = Record {
            id: inst.id.clone(),
            arg1: inst.arg1.clone(),
            arg2: inst.arg2.clone(),
            conn: inst.connective.clone(),
            senses: inst.senses.iter().map(|s| s.third.clone()).collect(),
            split: inst.split,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_corpus(corpus, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Per-split, per-top-level instance counts keyed by each instance's first sense.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub counts: BTreeMap<Split, [usize; 4]>,
}

impl CorpusStats {
    pub fn count(&self, split: Split, top: TopLevel) -> usize {
        self.counts.get(&split).map_or(0, |c| c[top.index()])
    }

    pub fn total(&self, split: Split) -> usize {
        self.counts.get(&split).map_or(0, |c| c.iter().sum())
    }

    /// Writes the table with columns `split,Expansion,Comparison,Contingency,Temporal,Total`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "split",
            "Expansion",
            "Comparison",
            "Contingency",
            "Temporal",
            "Total",
        ])?;
        for split in Split::ALL {
            let row = [
                TopLevel::Expansion,
                TopLevel::Comparison,
                TopLevel::Contingency,
                TopLevel::Temporal,
            ]
            .map(|t| self.count(split, t).to_string());
            out.write_record(
                std::iter::once(split.name().to_string())
                    .chain(row)
                    .chain(std::iter::once(self.total(split).to_string())),
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut counts: BTreeMap<Split, [usize; 4]> = Split::ALL.iter().map(|&s| (s, [0; 4])).collect();
    for inst in corpus.instances() {
        counts.get_mut(&inst.split).expect("all splits present")[inst.top().index()] += 1;
    }
    CorpusStats { counts }
}
