use std::path::{Path, PathBuf};

use adaptprompt::corpus::{
    generate_synthetic, load_corpus, Corpus, SenseHierarchy, Split, SyntheticSpec,
};
use adaptprompt::experiment::ExperimentConfig;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Contents of a `run --config` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub data: DataSource,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    /// JSONL file, or a directory holding `train.jsonl`, `dev.jsonl` and `test.jsonl`.
    pub corpus: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    /// Regenerate the synthetic corpus with each run seed.
    #[serde(default = "yes")]
    pub reseed: bool,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(c) = &mut cfg.data.corpus {
            if c.is_relative() {
                *c = path.parent().unwrap_or(Path::new(".")).join(&*c);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.corpus, &self.data.synthetic) {
            (Some(_), Some(_)) => bail!("data: set either `corpus` or `synthetic`, not both"),
            (None, None) => bail!("data: one of `corpus` or `synthetic` is required"),
            (_, Some(s)) => s.validate()?,
            _ => {}
        }
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        self.experiment.validate()?;
        Ok(())
    }

    pub fn corpus_for(&self, seed: u64, hierarchy: &SenseHierarchy) -> Result<Corpus> {
        match (&self.data.corpus, &self.data.synthetic) {
            (Some(path), _) => read_corpus(path, hierarchy),
            (None, Some(spec)) => {
                let mut spec = spec.clone();
                if self.data.reseed {
                    spec.seed = seed;
                }
                Ok(generate_synthetic(&spec, hierarchy))
            }
            (None, None) => bail!("no data source"),
        }
    }
}

/// Reads a corpus file or a prepared directory of split files.
pub fn read_corpus(path: &Path, hierarchy: &SenseHierarchy) -> Result<Corpus> {
    if !path.is_dir() {
        return load_corpus(path, hierarchy).with_context(|| format!("loading {}", path.display()));
    }
    let mut instances = Vec::new();
    for split in [Split::Train, Split::Dev, Split::Test] {
        let file = path.join(format!("{}.jsonl", split.name()));
        let c =
            load_corpus(&file, hierarchy).with_context(|| format!("loading {}", file.display()))?;
        instances.extend(c.instances().iter().cloned());
    }
    Ok(Corpus::new(instances)?)
}
