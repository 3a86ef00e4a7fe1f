use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use adaptprompt::corpus::{
    corpus_stats, generate_synthetic, load_corpus, write_corpus, SenseHierarchy, Split,
    SyntheticSpec,
};
use adaptprompt::experiment::{
    aggregate, compare_verbalizers, run_ablation, run_injection, run_pipeline, sweep_temperature,
    write_aggregate, write_summary, AblationSpec, Mode, RunRecord, Runner, SummaryRow,
};
use adaptprompt::prompting::Granularity;
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod report;

use config::RunConfig;

/// Environment variable holding the number of seeds run concurrently.
const THREADS_ENV: &str = "ADAPTPROMPT_THREADS";

#[derive(Parser)]
#[command(
    name = "adaptprompt",
    version,
    about = "Prompt-based implicit discourse relation recognition with connective distillation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/dev/test corpus files and a per-split label count table.
    Prepare {
        /// TOML file with a synthetic corpus spec.
        #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
        synthetic: Option<PathBuf>,
        /// Existing JSONL corpus to validate and split.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write records, checkpoints and summary tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "pipeline")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seeds of the config file; may be repeated.
        #[arg(long)]
        seed: Vec<u64>,
        /// Ablation variants, e.g. `RD,FD,RD-FD,CPT,VAS`.
        #[arg(long, value_delimiter = ',', default_value = "RD,FD,RD-FD,CPT,VAS")]
        variants: Vec<String>,
        /// Temperatures for `sweep-temperature`.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,15,20,50")]
        values: Vec<f64>,
        /// Answer spaces for `verbalizers`.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "top4,second20,paper21,third31"
        )]
        granularities: Vec<Granularity>,
    },
    /// Merge the summaries of run directories and write chart data.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Prepare {
            synthetic,
            corpus,
            out,
        } => prepare(synthetic.as_deref(), corpus.as_deref(), &out),
        Command::Run {
            config,
            mode,
            out,
            seed,
            variants,
            values,
            granularities,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if !seed.is_empty() {
                cfg.seeds = seed;
            }
            let variants = variants
                .iter()
                .map(|v| v.parse::<AblationSpec>())
                .collect::<Result<Vec<_>, _>>()?;
            run(&cfg, mode, &out, &variants, &values, &granularities)
        }
        Command::Report { runs, out } => report::report(&runs, &out),
    }
}

fn prepare(synthetic: Option<&Path>, corpus: Option<&Path>, out: &Path) -> Result<()> {
    let hierarchy = SenseHierarchy::bundled();
    let corpus = match (synthetic, corpus) {
        (Some(path), None) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let spec: SyntheticSpec =
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            spec.validate()?;
            generate_synthetic(&spec, &hierarchy)
        }
        (None, Some(path)) => load_corpus(path, &hierarchy)?,
        _ => bail!("pass exactly one of --synthetic or --corpus"),
    };
    fs::create_dir_all(out)?;
    for split in [Split::Train, Split::Dev, Split::Test] {
        let file = out.join(format!("{}.jsonl", split.name()));
        let mut w = std::io::BufWriter::new(fs::File::create(&file)?);
        write_corpus(&corpus.only(split), &mut w)?;
        w.flush()?;
    }
    corpus_stats(&corpus).write_csv(fs::File::create(out.join("stats.csv"))?)?;
    tracing::info!(instances = corpus.len(), out = %out.display(), "prepared");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_seed(
    cfg: &RunConfig,
    hierarchy: &SenseHierarchy,
    seed: u64,
    mode: Mode,
    out: &Path,
    variants: &[AblationSpec],
    values: &[f64],
    granularities: &[Granularity],
) -> Result<Vec<RunRecord>> {
    let corpus = cfg.corpus_for(seed, hierarchy)?;
    let mut runner = Runner::new(&corpus, hierarchy, &cfg.experiment, seed, Some(out))?;
    let records = match mode {
        Mode::Pipeline => run_pipeline(&mut runner),
        Mode::Ablation => run_ablation(&mut runner, variants),
        Mode::SweepTemperature => sweep_temperature(&mut runner, values),
        Mode::Verbalizers => compare_verbalizers(&mut runner, granularities),
        Mode::Injection => run_injection(&mut runner),
    };
    records.with_context(|| format!("seed {seed}"))
}

fn run(
    cfg: &RunConfig,
    mode: Mode,
    out: &Path,
    variants: &[AblationSpec],
    values: &[f64],
    granularities: &[Granularity],
) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), toml::to_string(cfg)?)?;
    let hierarchy = SenseHierarchy::bundled();
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .with_context(|| format!("{THREADS_ENV}={v}"))?
            .max(1),
        Err(_) => 1,
    };
    let queue = Mutex::new(cfg.seeds.iter().copied().enumerate());
    let results: Mutex<Vec<(usize, Result<Vec<RunRecord>>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..threads.min(cfg.seeds.len()) {
            s.spawn(|| loop {
                let Some((i, seed)) = queue.lock().expect("queue lock").next() else {
                    break;
                };
                tracing::info!(seed, ?mode, "starting");
                let r = run_seed(
                    cfg,
                    &hierarchy,
                    seed,
                    mode,
                    out,
                    variants,
                    values,
                    granularities,
                );
                results.lock().expect("results lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    let mut records = Vec::new();
    for (_, r) in results {
        records.extend(r?);
    }

    let mut w = std::io::BufWriter::new(fs::File::create(out.join("records.jsonl"))?);
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    let rows: Vec<SummaryRow> = records.iter().map(SummaryRow::from).collect();
    write_summary(&rows, fs::File::create(out.join("summary.csv"))?)?;
    write_aggregate(
        &aggregate(&rows),
        fs::File::create(out.join("aggregate.csv"))?,
    )?;
    for r in &rows {
        println!(
            "{:<24} seed {:<4} acc {:.4} macro-F1 {:.4}",
            r.variant, r.seed, r.acc, r.macro_f1
        );
    }
    Ok(())
}
