use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use adaptprompt::experiment::{
    aggregate, read_summary, write_aggregate, SummaryRow, SUMMARY_COLUMNS,
};
use anyhow::{bail, Context, Result};

fn write_series(path: &Path, points: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y"])?;
    for (x, y) in points {
        w.write_record([x.as_str(), &y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Merges the summaries of several run directories and writes chart series.
pub fn report(runs: &[std::path::PathBuf], out: &Path) -> Result<()> {
    let mut tables = Vec::new();
    for dir in runs {
        let file = dir.join("summary.csv");
        if !file.is_file() {
            bail!("{} has no summary.csv", dir.display());
        }
        let rows = read_summary(fs::File::open(&file)?)
            .with_context(|| format!("reading {}", file.display()))?;
        let name = dir.file_name().map_or_else(
            || dir.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        tables.push((name, rows));
    }
    fs::create_dir_all(out)?;

    let mut merged: Vec<(&str, &SummaryRow)> = tables
        .iter()
        .flat_map(|(name, rows)| rows.iter().map(move |r| (name.as_str(), r)))
        .collect();
    merged.sort_by(|a, b| (&a.1.variant, a.1.seed, a.0).cmp(&(&b.1.variant, b.1.seed, b.0)));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(out.join("merged.csv"))?;
    w.write_record(std::iter::once("run").chain(SUMMARY_COLUMNS.iter().copied()))?;
    for (run, row) in &merged {
        w.write_field(run)?;
        w.serialize(row)?;
    }
    w.flush()?;

    let all: Vec<SummaryRow> = tables.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let agg = aggregate(&all);
    write_aggregate(&agg, fs::File::create(out.join("aggregate.csv"))?)?;

    let swept: BTreeMap<u64, Vec<&SummaryRow>> = all
        .iter()
        .filter(|r| r.variant == "response" && r.temperature.is_some())
        .fold(BTreeMap::new(), |mut m, r| {
            m.entry(r.temperature.unwrap().to_bits())
                .or_default()
                .push(r);
            m
        });
    if swept.len() > 1 {
        let mut by_t: Vec<(f64, &Vec<&SummaryRow>)> =
            swept.iter().map(|(k, v)| (f64::from_bits(*k), v)).collect();
        by_t.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mean = |rows: &[&SummaryRow], f: fn(&SummaryRow) -> f64| {
            rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
        };
        let acc: Vec<_> = by_t
            .iter()
            .map(|(t, r)| (t.to_string(), mean(r, |r| r.acc)))
            .collect();
        let f1: Vec<_> = by_t
            .iter()
            .map(|(t, r)| (t.to_string(), mean(r, |r| r.macro_f1)))
            .collect();
        write_series(&out.join("series_T_acc.csv"), &acc)?;
        write_series(&out.join("series_T_macro_f1.csv"), &f1)?;
    }
    let by_variant: Vec<_> = agg
        .iter()
        .map(|a| (a.variant.clone(), a.macro_f1_mean))
        .collect();
    write_series(&out.join("series_variant_macro_f1.csv"), &by_variant)?;
    let by_variant: Vec<_> = agg
        .iter()
        .map(|a| (a.variant.clone(), a.acc_mean))
        .collect();
    write_series(&out.join("series_variant_acc.csv"), &by_variant)?;
    Ok(())
}
