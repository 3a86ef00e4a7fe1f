use adaptprompt::corpus::write_corpus;
use adaptprompt::corpus::*;

fn bytes(c: &Corpus) -> Vec<u8> {
    let mut out = Vec::new();
    write_corpus(c, &mut out).unwrap();
    out
}

fn mismatches(c: &Corpus, h: &SenseHierarchy, per: usize) -> usize {
    c.split(Split::Train)
        .filter(|i| {
            let s = h.third_index(&i.first_sense().third).unwrap();
            !connective_pool(h, s, per).contains(&i.connective)
        })
        .count()
}

#[test]
fn same_spec_same_bytes() {
    let h = SenseHierarchy::bundled();
    let spec = SyntheticSpec {
        seed: 7,
        n_train: 200,
        n_dev: 50,
        n_test: 50,
        ..Default::default()
    };
    assert_eq!(
        bytes(&generate_synthetic(&spec, &h)),
        bytes(&generate_synthetic(&spec, &h))
    );
    let other = SyntheticSpec { seed: 8, ..spec };
    assert_ne!(
        bytes(&generate_synthetic(&other, &h)),
        bytes(&generate_synthetic(&spec, &h))
    );
}

#[test]
fn zero_noise_keeps_connectives_in_pool() {
    let h = SenseHierarchy::bundled();
    let spec = SyntheticSpec {
        n_train: 500,
        noise_rate: 0.0,
        ..Default::default()
    };
    let c = generate_synthetic(&spec, &h);
    assert_eq!(mismatches(&c, &h, spec.connectives_per_third_sense), 0);
}

#[test]
fn noise_rate_matches_binomial() {
    // Binomial(1000, 0.2) has sd ~0.0126, so +-0.04 is more than 3 sd.
    let h = SenseHierarchy::bundled();
    let spec = SyntheticSpec {
        n_train: 1000,
        noise_rate: 0.2,
        ..Default::default()
    };
    let c = generate_synthetic(&spec, &h);
    let frac = mismatches(&c, &h, spec.connectives_per_third_sense) as f64 / 1000.0;
    assert!((frac - 0.2).abs() <= 0.04, "mismatch fraction {frac}");
}

#[test]
fn some_connectives_are_multiword() {
    let h = SenseHierarchy::bundled();
    let pools: Vec<String> = (0..31).flat_map(|s| connective_pool(&h, s, 2)).collect();
    assert!(pools.iter().any(|c| c.split_whitespace().count() == 3));
    assert!(pools.iter().any(|c| c.split_whitespace().count() == 1));
    let mut uniq = pools.clone();
    uniq.sort();
    uniq.dedup();
    assert_eq!(uniq.len(), pools.len());
}

#[test]
fn split_sizes() {
    let h = SenseHierarchy::bundled();
    let spec = SyntheticSpec {
        n_train: 30,
        n_dev: 20,
        n_test: 10,
        sense_prior: SensePrior::Pdtb,
        ..Default::default()
    };
    let c = generate_synthetic(&spec, &h);
    assert_eq!(c.split(Split::Train).count(), 30);
    assert_eq!(c.split(Split::Dev).count(), 20);
    assert_eq!(c.split(Split::Test).count(), 10);
}

#[test]
fn multiword_connectives_share_words_along_the_hierarchy() {
    let h = SenseHierarchy::bundled();
    let rows = h.rows();
    let words = |s: usize| -> Vec<Vec<String>> {
        connective_pool(&h, s, 3)
            .iter()
            .map(|c| c.split_whitespace().map(String::from).collect())
            .collect()
    };
    for a in 0..rows.len() {
        for b in 0..rows.len() {
            for wa in words(a).iter().filter(|w| w.len() > 1) {
                for wb in words(b).iter().filter(|w| w.len() > 1) {
                    let same_top = rows[a].top == rows[b].top;
                    assert_eq!(wa[0] == wb[0], same_top, "{wa:?} vs {wb:?}");
                    if wa.len() == 3 && wb.len() == 3 {
                        assert_eq!(wa[1] == wb[1], rows[a].second == rows[b].second);
                    }
                }
            }
        }
    }
}
