//! Acceptance criteria, one pass/fail line each. Exits nonzero when any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use adaptprompt::corpus::{
    generate_synthetic, Corpus, SenseHierarchy, SensePrior, Split, SyntheticSpec,
};
use adaptprompt::distillation::Objective;
use adaptprompt::distillation::{feature_loss, loss_hard, loss_soft, soften};
use adaptprompt::encoder::{grad_check, EncoderConfig, EncoderParams, LossKind};
use adaptprompt::experiment::{
    evaluate_examples, make_examples, pretrain_base, read_summary, setup_prompting, train_model,
    ExperimentConfig, Knowledge, SummaryRow,
};
use adaptprompt::prompting::{
    build_answer_space, gold_answer, init_virtual_answers, register_integrated_connectives,
    ConnectiveInventory, Granularity, MappingTable,
};
use adaptprompt::vocab::{build_vocabulary, Vocabulary};
use ndarray::{array, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|err| err.to_string())
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn desk_experiment() -> ExperimentConfig {
    let text = std::fs::read_to_string(workspace().join("configs/desk.toml")).expect("desk config");
    let table: toml::Table = toml::from_str(&text).expect("desk config parses");
    table["experiment"]
        .clone()
        .try_into()
        .expect("experiment section")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = e(Command::new(env!("CARGO_BIN_EXE_adaptprompt"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "adaptprompt {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn gradients() -> Outcome {
    let cfg = EncoderConfig {
        d_model: 8,
        n_layers: 2,
        n_heads: 2,
        d_ff: 16,
        max_len: 100,
        vocab_size: 30,
        dropout_rate: 0.0,
        tie_output: true,
    };
    let start = Instant::now();
    let mut parts = Vec::new();
    for (name, kind) in [
        ("hard", LossKind::Hard),
        ("response", LossKind::Soft),
        ("feature", LossKind::Feature),
    ] {
        let err = e(grad_check(&cfg, kind, 0))?;
        ensure(err < 1e-3, format!("{name} relative error {err:.3e}"))?;
        parts.push(format!("{name} {err:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("max rel. error {} in {secs:.1}s", parts.join(", ")))
}

fn connective_mean(before: &EncoderParams<f64>, vocab: &Vocabulary, text: &str) -> Vec<f64> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut acc = vec![0.0; before.d_model()];
    for w in &words {
        let id = vocab.id(&w.to_lowercase()).expect("known word");
        for (k, a) in acc.iter_mut().enumerate() {
            *a += before.tok_emb[[id, k]];
        }
    }
    acc.iter().map(|x| x / words.len() as f64).collect()
}

fn initializers() -> Outcome {
    let h = SenseHierarchy::bundled();
    let spec = SyntheticSpec {
        seed: 21,
        n_train: 300,
        n_dev: 60,
        n_test: 60,
        noise_rate: 0.25,
        connectives_per_third_sense: 3,
        ..Default::default()
    };
    let corpus = generate_synthetic(&spec, &h);
    let mut vocab = build_vocabulary(&corpus, 1);
    let cfg = EncoderConfig {
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        d_ff: 32,
        max_len: 100,
        vocab_size: vocab.len(),
        dropout_rate: 0.0,
        tie_output: true,
    };
    let mut params = e(EncoderParams::<f64>::init(&cfg, 4))?;
    let before = params.clone();
    let mut inv = ConnectiveInventory::default();
    e(register_integrated_connectives(
        &corpus,
        &mut vocab,
        &mut params,
        &mut inv,
        4,
    ))?;
    let mapping = MappingTable::bundled();
    let space = e(build_answer_space(
        &h,
        &mapping,
        Granularity::Paper21,
        &mut vocab,
        &corpus,
    ))?;
    params.grow_vocab(vocab.len(), 5);
    e(init_virtual_answers(&space, &corpus, &inv, &mut params, 6))?;

    let mut worst = 0.0f64;
    let surfaces: BTreeSet<&str> = corpus
        .instances()
        .iter()
        .map(|i| i.connective.as_str())
        .collect();
    for s in &surfaces {
        let id = inv.token_id(s).ok_or(format!("`{s}` not registered"))?;
        let got = e(params.get_token_embedding(id))?;
        for (g, b) in got.iter().zip(connective_mean(&before, &vocab, s)) {
            worst = worst.max((g - b).abs());
        }
    }

    let answer_of: BTreeMap<&str, &str> = mapping
        .rows()
        .iter()
        .map(|r| (r.third.as_str(), r.answer.as_str()))
        .collect();
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    let train: Vec<_> = corpus.split(Split::Train).collect();
    for inst in &train {
        let v = connective_mean(&before, &vocab, &inst.connective);
        let e = sums
            .entry(answer_of[inst.first_sense().third.as_str()])
            .or_insert_with(|| (vec![0.0; v.len()], 0));
        e.0.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
        e.1 += 1;
    }
    for answer in space.answers() {
        if let Some((sum, n)) = sums.get(answer.name.as_str()) {
            let got = e(params.get_token_embedding(answer.token_id))?;
            for (g, s) in got.iter().zip(sum) {
                worst = worst.max((g - s / *n as f64).abs());
            }
        }
    }
    ensure(train.len() >= 200, "fewer than 200 instances")?;
    ensure(worst < 1e-12, format!("max deviation {worst:.3e}"))?;
    Ok(format!(
        "{} instances, {} connectives, {} answers, max deviation {worst:.1e}",
        train.len(),
        surfaces.len(),
        sums.len()
    ))
}

fn argmax(v: &Array1<f64>) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

fn entropy(p: &Array1<f64>) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

fn softening() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let a: Array1<f64> = (0..21).map(|_| rng.random_range(-10.0..10.0)).collect();
        let want = argmax(&a);
        for t in [0.5, 1.0, 10.0, 20.0, 100.0] {
            let p = e(soften(a.view(), t))?;
            ensure(argmax(&p) == want, format!("argmax moved at T={t}"))?;
        }
        let mut prev = f64::NEG_INFINITY;
        for t in [1.0, 5.0, 10.0, 15.0, 20.0, 50.0] {
            let e = entropy(&e(soften(a.view(), t))?);
            ensure(e >= prev - 1e-12, format!("entropy fell at T={t}"))?;
            prev = e;
        }
    }
    let p = e(soften(array![1.0f64, 0.0].view(), 1.0))?;
    ensure(
        (p[0] - 0.73106).abs() < 1e-4 && (p[1] - 0.26894).abs() < 1e-4,
        format!("soften([1,0],1) = {p}"),
    )?;
    Ok(format!(
        "1000 vectors; soften([1,0],1) = ({:.5}, {:.5})",
        p[0], p[1]
    ))
}

fn mapping() -> Outcome {
    let h = SenseHierarchy::bundled();
    let spec = SyntheticSpec {
        seed: 3,
        n_train: 2000,
        n_dev: 500,
        n_test: 500,
        noise_rate: 0.25,
        sense_prior: SensePrior::Uniform,
        ..Default::default()
    };
    let corpus = generate_synthetic(&spec, &h);
    let mut vocab = build_vocabulary(&corpus, 1);
    let space = e(build_answer_space(
        &h,
        &MappingTable::bundled(),
        Granularity::Paper21,
        &mut vocab,
        &corpus,
    ))?;
    ensure(space.len() == 21, format!("{} answers", space.len()))?;
    let mut covered = BTreeSet::new();
    let mut sizes = [0usize; 4];
    for a in space.answers() {
        for t in &a.thirds {
            ensure(covered.insert(t.clone()), format!("{t} mapped twice"))?;
            ensure(
                h.resolve(t).map(|r| r.top) == Some(a.top),
                format!("{t} crosses relations"),
            )?;
        }
        sizes[a.top.index()] += 1;
    }
    ensure(
        covered.len() == 31,
        format!("{} senses covered", covered.len()),
    )?;
    ensure(sizes == [4, 4, 10, 3], format!("group sizes {sizes:?}"))?;
    let mut agree = 0;
    for inst in corpus.instances() {
        let a = e(gold_answer(inst, &space))?;
        agree += usize::from(space.answers()[a].top == inst.top());
    }
    ensure(
        agree == corpus.len(),
        format!("{agree}/{} agree", corpus.len()),
    )?;
    Ok(format!(
        "21 answers over 31 senses, sizes {sizes:?}, {agree}/{agree} gold tops agree"
    ))
}

/// Macro-F1 per variant per seed from a summary table.
fn by_variant(rows: &[SummaryRow]) -> BTreeMap<String, BTreeMap<u64, f64>> {
    let mut m: BTreeMap<String, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows {
        m.entry(r.variant.clone())
            .or_default()
            .insert(r.seed, r.macro_f1);
    }
    m
}

fn mean(v: &BTreeMap<u64, f64>) -> f64 {
    v.values().sum::<f64>() / v.len() as f64
}

fn wins(a: &BTreeMap<u64, f64>, b: &BTreeMap<u64, f64>) -> usize {
    a.iter()
        .filter(|(s, x)| b.get(s).is_some_and(|y| *x > y))
        .count()
}

struct DeskRun {
    variants: BTreeMap<String, BTreeMap<u64, f64>>,
    elapsed: Duration,
}

fn desk_run() -> Result<DeskRun, String> {
    let dir = e(tempfile::tempdir())?;
    let out = dir.path().join("desk");
    let config = workspace().join("configs/desk.toml");
    let start = Instant::now();
    run_cli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--mode",
        "ablation",
        "--variants",
        "RD,FD,RD-FD,injection",
        "--out",
        out.to_str().unwrap(),
    ])?;
    let elapsed = start.elapsed();
    let rows = e(read_summary(e(std::fs::File::open(
        out.join("summary.csv"),
    ))?))?;
    Ok(DeskRun {
        variants: by_variant(&rows),
        elapsed,
    })
}

fn distillation_gain(run: &Result<DeskRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let get = |v: &str| run.variants.get(v).ok_or(format!("variant {v} missing"));
    let (fused, feature, response, plain) = (
        get("AdaptPrompt")?,
        get("-RD")?,
        get("-FD")?,
        get("-RD-FD")?,
    );
    ensure(fused.len() == 5, format!("{} seeds", fused.len()))?;
    ensure(
        mean(fused) >= mean(feature),
        format!("fused {:.4} < feature {:.4}", mean(fused), mean(feature)),
    )?;
    ensure(
        mean(fused) >= mean(response),
        format!("fused {:.4} < response {:.4}", mean(fused), mean(response)),
    )?;
    let (wf, wr) = (wins(feature, plain), wins(response, plain));
    ensure(wf >= 4, format!("feature beats plain in {wf}/5 seeds"))?;
    ensure(wr >= 4, format!("response beats plain in {wr}/5 seeds"))?;
    let secs = run.elapsed.as_secs_f64();
    ensure(secs < 900.0, format!("took {secs:.0}s"))?;
    Ok(format!(
        "mean macro-F1 fused {:.4}, feature {:.4}, response {:.4}, plain {:.4}; wins over plain {wf}/5 and {wr}/5; {secs:.0}s",
        mean(fused),
        mean(feature),
        mean(response),
        mean(plain)
    ))
}

fn injection(run: &Result<DeskRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let fused = run.variants.get("AdaptPrompt").ok_or("fused arm missing")?;
    let inj = run
        .variants
        .get("injection")
        .ok_or("injection arm missing")?;
    let w = wins(fused, inj);
    ensure(w >= 4, format!("fused beats injection in {w}/5 seeds"))?;
    Ok(format!(
        "fused beats injection in {w}/5 seeds (mean {:.4} vs {:.4})",
        mean(fused),
        mean(inj)
    ))
}

fn clean_teacher() -> Outcome {
    let h = SenseHierarchy::bundled();
    let spec = SyntheticSpec {
        seed: 1,
        n_train: 2000,
        n_dev: 500,
        n_test: 500,
        noise_rate: 0.0,
        ..Default::default()
    };
    let corpus: Corpus = generate_synthetic(&spec, &h);
    let mut cfg = desk_experiment();
    cfg.teacher.max_epochs = 10;
    let base = e(pretrain_base(&corpus, &cfg, 1))?;
    let setup = e(setup_prompting(
        &base,
        &corpus,
        &h,
        &cfg.template,
        cfg.granularity,
        1,
    ))?;
    let examples = |split| {
        make_examples(
            &corpus,
            split,
            &setup.template,
            &setup.vocab,
            &setup.space,
            Some(&setup.inventory),
        )
    };
    let (train, dev) = (e(examples(Split::Train))?, e(examples(Split::Dev))?);
    let t = e(train_model(
        &setup.params,
        &train,
        &dev,
        &setup.space,
        Objective::Hard,
        &Knowledge::default(),
        &cfg.teacher,
        4,
    ))?;
    let train_acc = e(evaluate_examples(&t.params, &train, &setup.space))?.accuracy;
    let dev_acc = t.dev.accuracy;
    ensure(t.epoch <= 10, format!("selected epoch {}", t.epoch))?;
    ensure(train_acc >= 0.99, format!("train accuracy {train_acc:.4}"))?;
    ensure(dev_acc >= 0.95, format!("dev accuracy {dev_acc:.4}"))?;
    Ok(format!(
        "train accuracy {train_acc:.4}, dev accuracy {dev_acc:.4} at epoch {}",
        t.epoch
    ))
}

fn reproducible_summary() -> Outcome {
    let dir = e(tempfile::tempdir())?;
    let config = workspace().join("configs/smoke.toml");
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        run_cli(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--mode",
            "pipeline",
            "--out",
            out.to_str().unwrap(),
        ])?;
        bytes.push(e(std::fs::read(out.join("summary.csv")))?);
    }
    ensure(!bytes[0].is_empty(), "empty summary")?;
    ensure(bytes[0] == bytes[1], "summary tables differ")?;
    Ok(format!("two runs, {} identical bytes", bytes[0].len()))
}

fn loss_oracles() -> Outcome {
    let hard: f64 = e(loss_hard(&[Array1::zeros(21)], &[7]))?;
    let kl: f64 = e(loss_soft(
        &[array![0.0, 0.0]],
        &[array![1.0, 0.0]],
        1.0,
        false,
    ))?;
    let mse: f64 = e(feature_loss(&[array![0.0, 0.0]], &[array![2.0, 0.0]]))?;
    ensure(
        (hard - 21f64.ln()).abs() <= 1e-3,
        format!("uniform hard loss {hard}"),
    )?;
    ensure((kl - 2f64.ln()).abs() <= 1e-4, format!("KL {kl}"))?;
    ensure((mse - 2.0).abs() <= 1e-12, format!("MSE {mse}"))?;
    Ok(format!(
        "hard {hard:.6} (ln 21), KL {kl:.6} (ln 2), MSE {mse}"
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {id}. {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {id}. {name}: {detail} [{secs:.1}s]");
            }
        }
    };
    report(1, "gradient check (hard, response, feature)", &gradients);
    report(
        2,
        "connective and virtual answer initializers",
        &initializers,
    );
    report(3, "temperature softening", &softening);
    report(4, "answer mapping structure", &mapping);
    let desk = desk_run();
    report(5, "distillation gain", &|| distillation_gain(&desk));
    report(6, "injection baseline", &|| injection(&desk));
    report(7, "teacher on clean connectives", &clean_teacher);
    report(8, "pipeline summary reproducibility", &reproducible_summary);
    report(9, "loss oracles", &loss_oracles);
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
