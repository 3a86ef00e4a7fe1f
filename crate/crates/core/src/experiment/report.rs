//! Result tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::pipeline::RunRecord;
use crate::corpus::TopLevel;
use crate::error::Result;

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "variant",
    "seed",
    "lr",
    "T",
    "alpha",
    "beta",
    "acc",
    "macro_f1",
    "f1_comparison",
    "f1_contingency",
    "f1_expansion",
    "f1_temporal",
];

/// One row of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub seed: u64,
    pub lr: String,
    #[serde(rename = "T")]
    pub temperature: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub acc: f64,
    pub macro_f1: f64,
    pub f1_comparison: f64,
    pub f1_contingency: f64,
    pub f1_expansion: f64,
    pub f1_temporal: f64,
}

impl From<&RunRecord> for SummaryRow {
    fn from(r: &RunRecord) -> Self {
        let lr = r
            .models
            .iter()
            .map(|m| m.lr.to_string())
            .collect::<Vec<_>>()
            .join(";");
        SummaryRow {
            variant: r.variant.clone(),
            seed: r.seed,
            lr,
            temperature: r.temperature,
            alpha: r.alpha,
            beta: r.beta,
            acc: r.test.accuracy,
            macro_f1: r.test.macro_f1,
            f1_comparison: r.test.f1(TopLevel::Comparison),
            f1_contingency: r.test.f1(TopLevel::Contingency),
            f1_expansion: r.test.f1(TopLevel::Expansion),
            f1_temporal: r.test.f1(TopLevel::Temporal),
        }
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(SUMMARY_COLUMNS)?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary<R: std::io::Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean and sample standard deviation of one variant across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub variant: String,
    #[serde(rename = "T")]
    pub temperature: Option<f64>,
    pub n: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (variant, T) in first-appearance order.
pub fn aggregate(rows: &[SummaryRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<(String, Option<u64>), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.variant.clone(), r.temperature.map(f64::to_bits));
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let (acc_mean, acc_std) = mean_std(&g.iter().map(|r| r.acc).collect::<Vec<_>>());
            let (f1_mean, f1_std) = mean_std(&g.iter().map(|r| r.macro_f1).collect::<Vec<_>>());
            AggregateRow {
                variant: key.0,
                temperature: key.1.map(f64::from_bits),
                n: g.len(),
                acc_mean,
                acc_std,
                macro_f1_mean: f1_mean,
                macro_f1_std: f1_std,
            }
        })
        .collect()
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
