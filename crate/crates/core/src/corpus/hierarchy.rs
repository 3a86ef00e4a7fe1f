//! The three-level relation taxonomy and per-instance sense labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_HIERARCHY: &str = include_str!("../../data/sense_hierarchy.tsv");

/// The four top-level relations. Declaration order is the tie-break order
/// used when aggregating relation scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TopLevel {
    Comparison,
    Contingency,
    Expansion,
    Temporal,
}

impl TopLevel {
    pub const ALL: [TopLevel; 4] = [
        TopLevel::Comparison,
        TopLevel::Contingency,
        TopLevel::Expansion,
        TopLevel::Temporal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<TopLevel> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TopLevel::Comparison => "Comparison",
            TopLevel::Contingency => "Contingency",
            TopLevel::Expansion => "Expansion",
            TopLevel::Temporal => "Temporal",
        }
    }
}

impl fmt::Display for TopLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TopLevel::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Hierarchy(format!("unknown top-level relation `{s}`")))
    }
}

/// One fully resolved sense: top, second and third level names (dotted full
/// paths for the lower two levels).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SenseLabel {
    pub top: TopLevel,
    pub second: String,
    pub third: String,
}

impl fmt::Display for SenseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.third)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenseHierarchy {
    rows: Vec<SenseLabel>,
    by_third: BTreeMap<String, usize>,
}

impl SenseHierarchy {
    /// The 4 / 20 / 31 relation table shipped with the crate.
    pub fn bundled() -> SenseHierarchy {
        Self::parse(BUNDLED_HIERARCHY).expect("bundled sense hierarchy is valid")
    }

    /// Parses `top <TAB> second <TAB> third` rows. Lines starting with `#`
    /// and blank lines are skipped.
    pub fn parse(text: &str) -> Result<SenseHierarchy> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Hierarchy(format!(
                    "line {}: expected 3 tab-separated columns, got {}",
                    n + 1,
                    cols.len()
                )));
            }
            rows.push(SenseLabel {
                top: cols[0].parse()?,
                second: cols[1].to_string(),
                third: cols[2].to_string(),
            });
        }
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<SenseLabel>) -> Result<SenseHierarchy> {
        let mut by_third = BTreeMap::new();
        let mut second_parent: BTreeMap<&str, TopLevel> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if !row.second.starts_with(row.top.name()) {
                return Err(Error::Hierarchy(format!(
                    "second-level `{}` is not under `{}`",
                    row.second, row.top
                )));
            }
            if !row.third.starts_with(row.second.as_str()) {
                return Err(Error::Hierarchy(format!(
                    "third-level `{}` is not under `{}`",
                    row.third, row.second
                )));
            }
            if let Some(prev) = second_parent.insert(&row.second, row.top) {
                if prev != row.top {
                    return Err(Error::Hierarchy(format!(
                        "second-level `{}` has two parents",
                        row.second
                    )));
                }
            }
            if by_third.insert(row.third.clone(), i).is_some() {
                return Err(Error::Hierarchy(format!(
                    "third-level `{}` listed twice",
                    row.third
                )));
            }
        }
        Ok(SenseHierarchy { rows, by_third })
    }

    pub fn rows(&self) -> &[SenseLabel] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Resolves a dotted full path to its third-level row.
    pub fn resolve(&self, path: &str) -> Option<&SenseLabel> {
        self.by_third.get(path).map(|&i| &self.rows[i])
    }

    /// Position of a third-level sense in table order.
    pub fn third_index(&self, third: &str) -> Option<usize> {
        self.by_third.get(third).copied()
    }

    pub fn tops(&self) -> BTreeSet<TopLevel> {
        self.rows.iter().map(|r| r.top).collect()
    }

    /// Distinct second-level names in table order.
    pub fn seconds(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .map(|r| r.second.as_str())
            .filter(|s| seen.insert(*s))
            .collect()
    }

    pub fn thirds(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.third.as_str())
    }
}
