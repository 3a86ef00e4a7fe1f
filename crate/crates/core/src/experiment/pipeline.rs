//! The experiment matrix over one corpus and seed.
//!
//! A [`Runner`] caches every shared stage: the pretrained base encoder, the
//! prompt setup per (template, answer space), the teacher and its knowledge,
//! and each trained student. Arms that need the same stage reuse it, so an
//! ablation grid trains each distinct model once.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::pretrain::{pretrain_mlm, PretrainConfig};
use super::train::{
    fused_metrics, make_examples, metrics_from_logits, predict_logits, train_model, EpochRecord,
    Example, Knowledge, TrainConfig, Trained,
};
use crate::corpus::{Corpus, SenseHierarchy, Split};
use crate::distillation::{
    save_store, teacher_logits, KDConfig, Objective, SoftLabelStore, TeacherLogits,
};
use crate::encoder::{checkpoint_hash, save_checkpoint, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::prompting::{
    build_answer_space, init_virtual_answers, register_integrated_connectives,
    register_template_tokens, AnswerSpace, ConnectiveInventory, Granularity, MappingTable,
    TemplateKind, TemplateSpec,
};
use crate::vocab::{build_vocabulary, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub encoder: EncoderConfig,
    pub template: TemplateSpec,
    pub granularity: Granularity,
    pub vocab_min_count: usize,
    pub pretrain: PretrainConfig,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
    pub kd: KDConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            encoder: EncoderConfig::default(),
            template: TemplateSpec::default(),
            granularity: Granularity::Paper21,
            vocab_min_count: 1,
            pretrain: PretrainConfig::default(),
            teacher: TrainConfig::default(),
            student: TrainConfig::default(),
            kd: KDConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        self.teacher.validate()?;
        self.student.validate()?;
        self.kd.validate()?;
        if self.encoder.max_len < self.template.total_len {
            return Err(Error::Config(format!(
                "encoder max_len {} is shorter than the prompt length {}",
                self.encoder.max_len, self.template.total_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudentKind {
    Response,
    Feature,
    Plain,
    Injection,
}

impl StudentKind {
    pub fn name(self) -> &'static str {
        match self {
            StudentKind::Response => "response",
            StudentKind::Feature => "feature",
            StudentKind::Plain => "plain",
            StudentKind::Injection => "injection",
        }
    }
}

/// Flags of one ablation variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub use_response_student: bool,
    pub use_feature_student: bool,
    pub continuous_template: bool,
    pub virtual_answers: bool,
    pub knowledge_injection: bool,
}

impl AblationSpec {
    pub fn full() -> AblationSpec {
        AblationSpec {
            use_response_student: true,
            use_feature_student: true,
            continuous_template: true,
            virtual_answers: true,
            knowledge_injection: false,
        }
    }

    pub fn injection() -> AblationSpec {
        AblationSpec {
            use_response_student: false,
            use_feature_student: false,
            knowledge_injection: true,
            ..AblationSpec::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let students = self.use_response_student || self.use_feature_student;
        if self.knowledge_injection && students {
            return Err(Error::InvalidArgument(
                "knowledge injection cannot be combined with distillation students".into(),
            ));
        }
        Ok(())
    }

    /// Students trained for this variant; two means fused prediction.
    pub fn students(&self) -> Vec<StudentKind> {
        if self.knowledge_injection {
            return vec![StudentKind::Injection];
        }
        let mut v = Vec::new();
        if self.use_response_student {
            v.push(StudentKind::Response);
        }
        if self.use_feature_student {
            v.push(StudentKind::Feature);
        }
        if v.is_empty() {
            v.push(StudentKind::Plain);
        }
        v
    }

    pub fn template_kind(&self) -> TemplateKind {
        if self.continuous_template {
            TemplateKind::Continuous
        } else {
            TemplateKind::Discrete
        }
    }

    /// `AdaptPrompt` for the full model, `-RD-FD`-style names for removals.
    pub fn name(&self) -> String {
        let mut s = String::new();
        if self.knowledge_injection {
            s.push_str("injection");
        } else {
            if !self.use_response_student {
                s.push_str("-RD");
            }
            if !self.use_feature_student {
                s.push_str("-FD");
            }
        }
        if !self.continuous_template {
            s.push_str("-CPT");
        }
        if !self.virtual_answers {
            s.push_str("-VAS");
        }
        if s.is_empty() {
            "AdaptPrompt".to_string()
        } else {
            s
        }
    }
}

impl FromStr for AblationSpec {
    type Err = Error;

    /// Accepts `full`, `injection`, or removals joined by `-` such as
    /// `RD`, `RD-FD`, `-CPT-VAS`.
    fn from_str(s: &str) -> Result<AblationSpec> {
        let s = s.trim();
        let mut spec = AblationSpec::full();
        match s.to_ascii_lowercase().as_str() {
            "full" | "adaptprompt" => return Ok(spec),
            "injection" => return Ok(AblationSpec::injection()),
            _ => {}
        }
        for part in s.split('-').filter(|p| !p.is_empty()) {
            match part.to_ascii_uppercase().as_str() {
                "RD" => spec.use_response_student = false,
                "FD" => spec.use_feature_student = false,
                "CPT" => spec.continuous_template = false,
                "VAS" => spec.virtual_answers = false,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown ablation `{part}` in `{s}`"
                    )))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// One trained model that contributed to a result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub role: String,
    pub checkpoint: String,
    pub lr: f64,
    pub epoch: usize,
    pub dev: Metrics,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: String,
    pub seed: u64,
    pub template: TemplateKind,
    pub granularity: Granularity,
    pub temperature: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub models: Vec<ModelRecord>,
    pub test: Metrics,
    pub config: ExperimentConfig,
    pub wall_clock_secs: f64,
}

/// Pretrained encoder over the base vocabulary.
#[derive(Debug, Clone)]
pub struct Base {
    pub vocab: Vocabulary,
    pub params: EncoderParams<f32>,
    pub pretrain_losses: Vec<f64>,
}

/// Encoder and vocabulary extended for one template and answer space.
#[derive(Debug, Clone)]
pub struct Setup {
    pub template: TemplateSpec,
    pub vocab: Vocabulary,
    pub params: EncoderParams<f32>,
    pub inventory: ConnectiveInventory,
    pub space: AnswerSpace,
    /// Training instances behind each virtual answer's initialization.
    pub answer_counts: Vec<usize>,
}

fn stage_seed(seed: u64, stage: u64) -> u64 {
    let mut z = seed ^ stage.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SEED_INIT: u64 = 1;
const SEED_PRETRAIN: u64 = 2;
const SEED_SETUP: u64 = 3;
const SEED_TEACHER: u64 = 4;
const SEED_STUDENT: u64 = 5;

/// Builds the base vocabulary from the training split, initializes the
/// encoder and runs masked-token pretraining.
pub fn pretrain_base(corpus: &Corpus, cfg: &ExperimentConfig, seed: u64) -> Result<Base> {
    let train = corpus.only(Split::Train);
    let vocab = build_vocabulary(&train, cfg.vocab_min_count);
    let enc = EncoderConfig {
        vocab_size: vocab.len(),
        ..cfg.encoder.clone()
    };
    let mut params = EncoderParams::init(&enc, stage_seed(seed, SEED_INIT))?;
    let instances: Vec<_> = train.instances().iter().collect();
    let pretrain_losses = pretrain_mlm(
        &mut params,
        &instances,
        &vocab,
        &cfg.pretrain,
        stage_seed(seed, SEED_PRETRAIN),
    )?;
    Ok(Base {
        vocab,
        params,
        pretrain_losses,
    })
}

/// Registers template tokens (continuous only), integrated connectives for
/// every split, and the answer space with its initialization.
pub fn setup_prompting(
    base: &Base,
    corpus: &Corpus,
    hierarchy: &SenseHierarchy,
    template: &TemplateSpec,
    granularity: Granularity,
    seed: u64,
) -> Result<Setup> {
    let mut vocab = base.vocab.clone();
    let mut params = base.params.clone();
    let seed = stage_seed(seed, SEED_SETUP);
    if template.kind == TemplateKind::Continuous {
        register_template_tokens(template.m, &mut vocab, &mut params, seed)?;
    }
    let mut inventory = ConnectiveInventory::default();
    register_integrated_connectives(corpus, &mut vocab, &mut params, &mut inventory, seed ^ 1)?;
    let space = build_answer_space(
        hierarchy,
        &MappingTable::bundled(),
        granularity,
        &mut vocab,
        corpus,
    )?;
    params.grow_vocab(vocab.len(), seed ^ 2);
    let answer_counts = init_virtual_answers(&space, corpus, &inventory, &mut params, seed ^ 3)?;
    Ok(Setup {
        template: template.clone(),
        vocab,
        params,
        inventory,
        space,
        answer_counts,
    })
}

struct Data {
    train_s: Vec<Example>,
    dev_s: Vec<Example>,
    test_s: Vec<Example>,
    train_t: Vec<Example>,
    dev_t: Vec<Example>,
    test_t: Vec<Example>,
}

struct TeacherState {
    trained: Trained,
    hash: String,
    logits: TeacherLogits<f32>,
    test: Metrics,
    soft: BTreeMap<u64, SoftLabelStore<f32>>,
}

struct StudentState {
    trained: Trained,
    hash: String,
    test_logits: Vec<Array1<f32>>,
    test: Metrics,
}

struct Cell {
    setup: Setup,
    data: Data,
    dir: Option<PathBuf>,
    teacher: Option<TeacherState>,
    students: BTreeMap<(StudentKind, u64), StudentState>,
}

type CellKey = (TemplateKind, Granularity);

fn kind_name(k: TemplateKind) -> &'static str {
    match k {
        TemplateKind::Continuous => "continuous",
        TemplateKind::Discrete => "discrete",
    }
}

fn model_record(role: &str, hash: &str, t: &Trained) -> ModelRecord {
    ModelRecord {
        role: role.to_string(),
        checkpoint: hash.to_string(),
        lr: t.lr,
        epoch: t.epoch,
        dev: t.dev.clone(),
        history: t.history.clone(),
    }
}

/// Runs experiment arms for one corpus and seed, caching shared stages.
/// With an output directory every stage is checkpointed below it.
pub struct Runner<'a> {
    corpus: &'a Corpus,
    hierarchy: &'a SenseHierarchy,
    cfg: &'a ExperimentConfig,
    seed: u64,
    out: Option<PathBuf>,
    start: Instant,
    base: Option<Base>,
    cells: BTreeMap<CellKey, Cell>,
}

impl<'a> Runner<'a> {
    pub fn new(
        corpus: &'a Corpus,
        hierarchy: &'a SenseHierarchy,
        cfg: &'a ExperimentConfig,
        seed: u64,
        out: Option<&Path>,
    ) -> Result<Runner<'a>> {
        cfg.validate()?;
        let out = out.map(|p| p.join(format!("seed-{seed}")));
        if let Some(dir) = &out {
            fs::create_dir_all(dir)?;
        }
        Ok(Runner {
            corpus,
            hierarchy,
            cfg,
            seed,
            out,
            start: Instant::now(),
            base: None,
            cells: BTreeMap::new(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn base(&mut self) -> Result<&Base> {
        if self.base.is_none() {
            let base = pretrain_base(self.corpus, self.cfg, self.seed)
                .map_err(|e| e.at_stage("pretrain"))?;
            tracing::info!(seed = self.seed, losses = ?base.pretrain_losses, "pretrained");
            if let Some(dir) = &self.out {
                save_checkpoint(&base.params, dir.join("pretrained.json"))?;
                let mut f = fs::File::create(dir.join("vocab.txt"))?;
                base.vocab.write(&mut f)?;
            }
            self.base = Some(base);
        }
        Ok(self.base.as_ref().expect("set above"))
    }

    fn cell(&mut self, key: CellKey) -> Result<&mut Cell> {
        if !self.cells.contains_key(&key) {
            let template = TemplateSpec {
                kind: key.0,
                ..self.cfg.template.clone()
            };
            let (corpus, hierarchy, seed) = (self.corpus, self.hierarchy, self.seed);
            let base = self.base()?;
            let setup = setup_prompting(base, corpus, hierarchy, &template, key.1, seed)
                .map_err(|e| e.at_stage("prompt setup"))?;
            let data = (|| {
                let ex = |split, inv| {
                    make_examples(
                        corpus,
                        split,
                        &setup.template,
                        &setup.vocab,
                        &setup.space,
                        inv,
                    )
                };
                let inv = Some(&setup.inventory);
                Ok::<_, Error>(Data {
                    train_s: ex(Split::Train, None)?,
                    dev_s: ex(Split::Dev, None)?,
                    test_s: ex(Split::Test, None)?,
                    train_t: ex(Split::Train, inv)?,
                    dev_t: ex(Split::Dev, inv)?,
                    test_t: ex(Split::Test, inv)?,
                })
            })()
            .map_err(|e| e.at_stage("prompt construction"))?;
            let dir = match &self.out {
                Some(d) => {
                    let dir = d.join(format!("{}-{}", kind_name(key.0), key.1.name()));
                    fs::create_dir_all(&dir)?;
                    Some(dir)
                }
                None => None,
            };
            self.cells.insert(
                key,
                Cell {
                    setup,
                    data,
                    dir,
                    teacher: None,
                    students: BTreeMap::new(),
                },
            );
        }
        Ok(self.cells.get_mut(&key).expect("inserted above"))
    }

    fn ensure_teacher(&mut self, key: CellKey) -> Result<()> {
        let (cfg, corpus, seed) = (self.cfg, self.corpus, self.seed);
        let cell = self.cell(key)?;
        if cell.teacher.is_some() {
            return Ok(());
        }
        let run = || -> Result<TeacherState> {
            let trained = train_model(
                &cell.setup.params,
                &cell.data.train_t,
                &cell.data.dev_t,
                &cell.setup.space,
                Objective::Hard,
                &Knowledge::default(),
                &cfg.teacher,
                stage_seed(seed, SEED_TEACHER),
            )?;
            let s = &cell.setup;
            let logits = teacher_logits(
                &trained.params,
                corpus,
                &s.vocab,
                &s.template,
                &s.inventory,
                &s.space,
            )?;
            let test_logits = predict_logits(&trained.params, &cell.data.test_t, &s.space)?;
            let test = metrics_from_logits(&test_logits, &cell.data.test_t, &s.space)?;
            let hash = logits.teacher_hash.clone();
            if let Some(dir) = &cell.dir {
                save_checkpoint(&trained.params, dir.join("teacher.json"))?;
                save_store(&logits.features, dir.join("features.json"))?;
            }
            tracing::info!(
                seed,
                lr = trained.lr,
                epoch = trained.epoch,
                dev_f1 = trained.dev.macro_f1,
                "teacher"
            );
            Ok(TeacherState {
                trained,
                hash,
                logits,
                test,
                soft: BTreeMap::new(),
            })
        };
        let state = run().map_err(|e| e.at_stage("teacher"))?;
        cell.teacher = Some(state);
        Ok(())
    }

    fn ensure_student(&mut self, key: CellKey, kind: StudentKind, temperature: f64) -> Result<()> {
        let t_key = if kind == StudentKind::Response {
            temperature.to_bits()
        } else {
            0
        };
        if self
            .cells
            .get(&key)
            .is_some_and(|c| c.students.contains_key(&(kind, t_key)))
        {
            return Ok(());
        }
        let needs_teacher = matches!(kind, StudentKind::Response | StudentKind::Feature);
        if needs_teacher {
            self.ensure_teacher(key)?;
        }
        let (cfg, seed) = (self.cfg, self.seed);
        let cell = self.cell(key)?;
        let stage = format!("{} student", kind.name());
        let kd = KDConfig {
            temperature,
            ..cfg.kd.clone()
        };
        if kind == StudentKind::Response {
            let teacher = cell.teacher.as_mut().expect("teacher trained");
            if !teacher.soft.contains_key(&t_key) {
                let store = SoftLabelStore::from_logits(&teacher.logits, temperature)
                    .map_err(|e| e.at_stage("soft labels"))?;
                if let Some(dir) = &cell.dir {
                    save_store(&store, dir.join(format!("soft-T{temperature}.json")))?;
                }
                teacher.soft.insert(t_key, store);
            }
        }
        let knowledge = match &cell.teacher {
            Some(t) => Knowledge {
                soft: t.soft.get(&t_key),
                features: Some(&t.logits.features),
            },
            None => Knowledge::default(),
        };
        let (objective, train) = match kind {
            StudentKind::Response => (Objective::response(&kd), &cell.data.train_s),
            StudentKind::Feature => (Objective::feature(&kd), &cell.data.train_s),
            StudentKind::Plain => (Objective::Hard, &cell.data.train_s),
            StudentKind::Injection => (Objective::Hard, &cell.data.train_t),
        };
        let run = || -> Result<StudentState> {
            let trained = train_model(
                &cell.setup.params,
                train,
                &cell.data.dev_s,
                &cell.setup.space,
                objective,
                &knowledge,
                &cfg.student,
                stage_seed(seed, SEED_STUDENT),
            )?;
            let test_logits =
                predict_logits(&trained.params, &cell.data.test_s, &cell.setup.space)?;
            let test = metrics_from_logits(&test_logits, &cell.data.test_s, &cell.setup.space)?;
            let hash = match &cell.dir {
                Some(dir) => {
                    let name = match kind {
                        StudentKind::Response => format!("student-response-T{temperature}.json"),
                        _ => format!("student-{}.json", kind.name()),
                    };
                    save_checkpoint(&trained.params, dir.join(name))?
                }
                None => checkpoint_hash(&trained.params)?,
            };
            tracing::info!(
                seed,
                student = kind.name(),
                lr = trained.lr,
                epoch = trained.epoch,
                dev_f1 = trained.dev.macro_f1,
                test_f1 = test.macro_f1,
                "student"
            );
            Ok(StudentState {
                trained,
                hash,
                test_logits,
                test,
            })
        };
        let state = run().map_err(|e| e.at_stage(stage))?;
        cell.students.insert((kind, t_key), state);
        Ok(())
    }

    fn record(
        &self,
        variant: String,
        key: CellKey,
        test: Metrics,
        models: Vec<ModelRecord>,
    ) -> RunRecord {
        RunRecord {
            variant,
            seed: self.seed,
            template: key.0,
            granularity: key.1,
            temperature: None,
            alpha: None,
            beta: None,
            models,
            test,
            config: self.cfg.clone(),
            wall_clock_secs: self.start.elapsed().as_secs_f64(),
        }
    }

    /// Test metrics of the teacher with annotated connectives in the slot.
    pub fn teacher(
        &mut self,
        template: TemplateKind,
        granularity: Granularity,
    ) -> Result<RunRecord> {
        let key = (template, granularity);
        self.ensure_teacher(key)?;
        let t = self.cells[&key].teacher.as_ref().expect("trained");
        let models = vec![model_record("teacher", &t.hash, &t.trained)];
        Ok(self.record("teacher".into(), key, t.test.clone(), models))
    }

    /// Trains (or reuses) the listed students; two students are fused.
    pub fn students(
        &mut self,
        variant: &str,
        template: TemplateKind,
        granularity: Granularity,
        kinds: &[StudentKind],
        temperature: f64,
    ) -> Result<RunRecord> {
        if kinds.is_empty() || kinds.len() > 2 {
            return Err(Error::InvalidArgument(
                "an arm has one or two students".into(),
            ));
        }
        let key = (template, granularity);
        for &k in kinds {
            self.ensure_student(key, k, temperature)?;
        }
        let cell = &self.cells[&key];
        let states: Vec<&StudentState> = kinds
            .iter()
            .map(|&k| {
                let t = if k == StudentKind::Response {
                    temperature.to_bits()
                } else {
                    0
                };
                &cell.students[&(k, t)]
            })
            .collect();
        let test = match states.as_slice() {
            [one] => one.test.clone(),
            [a, b] => fused_metrics(
                &a.test_logits,
                &b.test_logits,
                &cell.data.test_s,
                &cell.setup.space,
            )
            .map_err(|e| e.at_stage("fusion"))?,
            _ => unreachable!(),
        };
        let models = kinds
            .iter()
            .zip(&states)
            .map(|(k, s)| model_record(k.name(), &s.hash, &s.trained))
            .collect();
        let mut rec = self.record(variant.to_string(), key, test, models);
        if kinds.contains(&StudentKind::Response) {
            rec.temperature = Some(temperature);
            rec.alpha = Some(self.cfg.kd.alpha);
        }
        if kinds.contains(&StudentKind::Feature) {
            rec.beta = Some(self.cfg.kd.beta);
        }
        Ok(rec)
    }

    pub fn ablation(&mut self, spec: &AblationSpec) -> Result<RunRecord> {
        spec.validate()?;
        let g = if spec.virtual_answers {
            self.cfg.granularity
        } else {
            Granularity::Substantive
        };
        self.students(
            &spec.name(),
            spec.template_kind(),
            g,
            &spec.students(),
            self.cfg.kd.temperature,
        )
    }
}

/// Experiment modes exposed by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pipeline,
    Ablation,
    SweepTemperature,
    Verbalizers,
    Injection,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        Ok(match s {
            "pipeline" => Mode::Pipeline,
            "ablation" => Mode::Ablation,
            "sweep-temperature" => Mode::SweepTemperature,
            "verbalizers" => Mode::Verbalizers,
            "injection" => Mode::Injection,
            _ => return Err(Error::InvalidArgument(format!("unknown mode `{s}`"))),
        })
    }
}

/// Full model: fused prediction plus both single students and the teacher.
pub fn run_pipeline(runner: &mut Runner<'_>) -> Result<Vec<RunRecord>> {
    let g = runner.cfg.granularity;
    let c = TemplateKind::Continuous;
    let t = runner.cfg.kd.temperature;
    use StudentKind::*;
    Ok(vec![
        runner.students("fused", c, g, &[Response, Feature], t)?,
        runner.students("response", c, g, &[Response], t)?,
        runner.students("feature", c, g, &[Feature], t)?,
        runner.teacher(c, g)?,
    ])
}

/// The full model followed by each requested variant (duplicates skipped).
pub fn run_ablation(runner: &mut Runner<'_>, specs: &[AblationSpec]) -> Result<Vec<RunRecord>> {
    let mut all = vec![AblationSpec::full()];
    for s in specs {
        if !all.contains(s) {
            all.push(*s);
        }
    }
    all.iter().map(|s| runner.ablation(s)).collect()
}

/// Fused distillation against the knowledge-injection baseline.
pub fn run_injection(runner: &mut Runner<'_>) -> Result<Vec<RunRecord>> {
    Ok(vec![
        runner.ablation(&AblationSpec::full())?,
        runner.ablation(&AblationSpec::injection())?,
    ])
}

/// One response-only student per temperature, all sharing one teacher.
pub fn sweep_temperature(runner: &mut Runner<'_>, values: &[f64]) -> Result<Vec<RunRecord>> {
    if let Some(bad) = values.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "temperature {bad} must be positive"
        )));
    }
    let g = runner.cfg.granularity;
    values
        .iter()
        .map(|&t| {
            runner.students(
                "response",
                TemplateKind::Continuous,
                g,
                &[StudentKind::Response],
                t,
            )
        })
        .collect()
}

/// Fused, response-only and feature-only results per answer granularity.
pub fn compare_verbalizers(
    runner: &mut Runner<'_>,
    granularities: &[Granularity],
) -> Result<Vec<RunRecord>> {
    let t = runner.cfg.kd.temperature;
    let c = TemplateKind::Continuous;
    use StudentKind::*;
    let mut out = Vec::new();
    for &g in granularities {
        for (name, kinds) in [
            ("fused", &[Response, Feature][..]),
            ("response", &[Response][..]),
            ("feature", &[Feature][..]),
        ] {
            out.push(runner.students(&format!("{name}/{}", g.name()), c, g, kinds, t)?);
        }
    }
    Ok(out)
}
