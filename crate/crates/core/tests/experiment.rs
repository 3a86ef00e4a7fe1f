mod common;

use adaptprompt::corpus::{Corpus, SenseHierarchy, Split};
use adaptprompt::distillation::{extract_teacher_knowledge, fuse_predict, KDConfig, Objective};
use adaptprompt::encoder::checkpoint_hash;
use adaptprompt::experiment::*;
use adaptprompt::prompting::{Granularity, TemplateKind};
use adaptprompt::Error;
use common::{small_corpus, tiny_encoder};
use ndarray::Array1;
use proptest::prelude::*;

fn tiny_config() -> ExperimentConfig {
    let quick = TrainConfig {
        learning_rates: vec![1e-3],
        max_epochs: 1,
        batch_size: 16,
        ..Default::default()
    };
    ExperimentConfig {
        encoder: tiny_encoder(0),
        pretrain: PretrainConfig {
            epochs: 1,
            ..Default::default()
        },
        teacher: quick.clone(),
        student: quick,
        kd: KDConfig {
            temperature: 10.0,
            alpha: 0.5,
            beta: 1.0,
            t_squared_scaling: false,
        },
        ..Default::default()
    }
}

fn prepared(corpus: &Corpus, cfg: &ExperimentConfig, seed: u64) -> Setup {
    let base = pretrain_base(corpus, cfg, seed).unwrap();
    setup_prompting(
        &base,
        corpus,
        &SenseHierarchy::bundled(),
        &cfg.template,
        Granularity::Paper21,
        seed,
    )
    .unwrap()
}

#[test]
fn ablation_names_round_trip() {
    for (text, name) in [
        ("full", "AdaptPrompt"),
        ("RD", "-RD"),
        ("FD", "-FD"),
        ("RD-FD", "-RD-FD"),
        ("-CPT", "-CPT"),
        ("VAS", "-VAS"),
        ("injection", "injection"),
    ] {
        let spec: AblationSpec = text.parse().unwrap();
        assert_eq!(spec.name(), name);
        let again: AblationSpec = name.parse().unwrap();
        assert_eq!(again, spec);
    }
    assert!("XX".parse::<AblationSpec>().is_err());
}

#[test]
fn ablation_flags_select_students_and_layout() {
    use StudentKind::*;
    let students = |s: &str| s.parse::<AblationSpec>().unwrap().students();
    assert_eq!(students("full"), vec![Response, Feature]);
    assert_eq!(students("RD"), vec![Feature]);
    assert_eq!(students("FD"), vec![Response]);
    assert_eq!(students("RD-FD"), vec![Plain]);
    assert_eq!(students("injection"), vec![Injection]);
    assert_eq!(
        "CPT".parse::<AblationSpec>().unwrap().template_kind(),
        TemplateKind::Discrete
    );
    assert_eq!(
        AblationSpec::full().template_kind(),
        TemplateKind::Continuous
    );
    let bad = AblationSpec {
        knowledge_injection: true,
        ..AblationSpec::full()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn modes_parse() {
    assert_eq!(
        "sweep-temperature".parse::<Mode>().unwrap(),
        Mode::SweepTemperature
    );
    assert_eq!("pipeline".parse::<Mode>().unwrap(), Mode::Pipeline);
    assert!("sweep".parse::<Mode>().is_err());
}

#[test]
fn zero_pretraining_epochs_leave_the_encoder_untouched() {
    let corpus = small_corpus(3, 40, 0.0);
    let mut cfg = tiny_config();
    cfg.pretrain.epochs = 0;
    let base = pretrain_base(&corpus, &cfg, 9).unwrap();
    assert!(base.pretrain_losses.is_empty());
    let mut params = base.params.clone();
    let train = corpus.split_vec(Split::Train);
    let losses = pretrain_mlm(&mut params, &train, &base.vocab, &cfg.pretrain, 1).unwrap();
    assert!(losses.is_empty());
    assert_eq!(
        checkpoint_hash(&params).unwrap(),
        checkpoint_hash(&base.params).unwrap()
    );
}

#[test]
fn pretraining_lowers_held_out_masked_loss() {
    let corpus = small_corpus(4, 200, 0.0);
    let mut cfg = tiny_config();
    cfg.pretrain.epochs = 0;
    let base = pretrain_base(&corpus, &cfg, 2).unwrap();
    let dev = corpus.split_vec(Split::Dev);
    let before = mlm_loss(&base.params, &dev, &base.vocab, 0.15, 77).unwrap();
    let mut params = base.params.clone();
    let pc = PretrainConfig {
        epochs: 3,
        lr: 5e-3,
        ..Default::default()
    };
    pretrain_mlm(
        &mut params,
        &corpus.split_vec(Split::Train),
        &base.vocab,
        &pc,
        5,
    )
    .unwrap();
    let after = mlm_loss(&params, &dev, &base.vocab, 0.15, 77).unwrap();
    assert!(after < before, "held-out loss {before} -> {after}");
}

#[test]
fn masking_never_selects_special_tokens() {
    use rand::SeedableRng;
    let ids = vec![1, 7, 8, 9, 2, 0];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let (masked, targets) = mask_tokens(&ids, 0.5, 20, &mut rng);
        assert!(!targets.is_empty());
        for (pos, orig) in targets {
            assert!((1..=3).contains(&pos));
            assert_eq!(ids[pos], orig);
        }
        for i in [0, 4, 5] {
            assert_eq!(masked[i], ids[i]);
        }
    }
}

#[test]
fn training_is_deterministic_and_evaluation_is_pure() {
    let corpus = small_corpus(5, 60, 0.2);
    let cfg = tiny_config();
    let setup = prepared(&corpus, &cfg, 5);
    let ex = |split| {
        make_examples(
            &corpus,
            split,
            &setup.template,
            &setup.vocab,
            &setup.space,
            None,
        )
        .unwrap()
    };
    let (train, dev) = (ex(Split::Train), ex(Split::Dev));
    let run = || {
        train_model(
            &setup.params,
            &train,
            &dev,
            &setup.space,
            Objective::Hard,
            &Knowledge::default(),
            &cfg.student,
            42,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    let hash = checkpoint_hash(&a.params).unwrap();
    assert_eq!(hash, checkpoint_hash(&b.params).unwrap());
    assert_eq!(a.history, b.history);

    let m1 = evaluate(
        &a.params,
        &corpus,
        Split::Test,
        &setup.template,
        &setup.vocab,
        &setup.space,
    )
    .unwrap();
    let m2 = evaluate(
        &a.params,
        &corpus,
        Split::Test,
        &setup.template,
        &setup.vocab,
        &setup.space,
    )
    .unwrap();
    assert_eq!(m1, m2);
    assert_eq!(checkpoint_hash(&a.params).unwrap(), hash);
    assert_eq!(m1.total, corpus.split(Split::Test).count());
}

#[test]
fn distillation_objectives_require_matching_knowledge() {
    let corpus = small_corpus(6, 40, 0.2);
    let cfg = tiny_config();
    let setup = prepared(&corpus, &cfg, 6);
    let ex = |split| {
        make_examples(
            &corpus,
            split,
            &setup.template,
            &setup.vocab,
            &setup.space,
            None,
        )
        .unwrap()
    };
    let (train, dev) = (ex(Split::Train), ex(Split::Dev));
    let response = Objective::response(&cfg.kd);
    let err = train_model(
        &setup.params,
        &train,
        &dev,
        &setup.space,
        response,
        &Knowledge::default(),
        &cfg.student,
        1,
    )
    .unwrap_err();
    assert!(matches!(err, Error::MissingKnowledge(_)), "{err}");

    let (soft, features) = extract_teacher_knowledge(
        &setup.params,
        &corpus,
        &setup.vocab,
        &setup.template,
        &setup.inventory,
        &setup.space,
        5.0,
    )
    .unwrap();
    assert_eq!(soft.labels.len(), train.len());
    assert_eq!(features.features.len(), train.len());
    let knowledge = Knowledge {
        soft: Some(&soft),
        features: Some(&features),
    };
    let err = train_model(
        &setup.params,
        &train,
        &dev,
        &setup.space,
        response,
        &knowledge,
        &cfg.student,
        1,
    )
    .unwrap_err();
    assert!(matches!(err, Error::TemperatureMismatch { .. }), "{err}");
    train_model(
        &setup.params,
        &train,
        &dev,
        &setup.space,
        Objective::feature(&cfg.kd),
        &knowledge,
        &cfg.student,
        1,
    )
    .unwrap();
}

#[test]
fn runner_is_reproducible_and_honors_ablation_flags() {
    let corpus = small_corpus(8, 60, 0.2);
    let h = SenseHierarchy::bundled();
    let cfg = tiny_config();
    let run = || {
        let mut r = Runner::new(&corpus, &h, &cfg, 8, None).unwrap();
        let mut recs = run_pipeline(&mut r).unwrap();
        let specs: Vec<AblationSpec> = ["CPT", "VAS", "injection"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        recs.extend(run_ablation(&mut r, &specs).unwrap());
        recs
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.variant, y.variant);
        assert_eq!(x.test, y.test);
        let hashes = |r: &RunRecord| {
            r.models
                .iter()
                .map(|m| m.checkpoint.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(hashes(x), hashes(y));
    }
    let by = |v: &str| a.iter().find(|r| r.variant == v).unwrap();
    assert_eq!(by("fused").models.len(), 2);
    assert_eq!(by("teacher").models[0].role, "teacher");
    assert_eq!(by("-CPT").template, TemplateKind::Discrete);
    assert_eq!(by("-VAS").granularity, Granularity::Substantive);
    assert_eq!(by("AdaptPrompt").granularity, Granularity::Paper21);
    assert_eq!(by("injection").models[0].role, "injection");
    // the full ablation arm reuses the pipeline's students
    assert_eq!(by("AdaptPrompt").test, by("fused").test);
}

proptest! {
    #[test]
    fn fusing_a_student_with_itself_changes_nothing(v in prop::collection::vec(-8.0f32..8.0, 21)) {
        let corpus = Corpus::default();
        let mut vocab = adaptprompt::vocab::Vocabulary::default();
        let space = adaptprompt::prompting::build_answer_space(
            &SenseHierarchy::bundled(),
            &adaptprompt::prompting::MappingTable::bundled(),
            Granularity::Paper21,
            &mut vocab,
            &corpus,
        )
        .unwrap();
        let a = Array1::from(v);
        let (_, fused) = fuse_predict(a.view(), a.view(), &space).unwrap();
        prop_assert_eq!(fused, predict_top(&a, &space).unwrap());
    }
}
