use std::collections::{BTreeSet, HashSet};

use adaptprompt::corpus::{generate_synthetic, SenseHierarchy, SyntheticSpec, TopLevel};
use adaptprompt::prompting::*;
use adaptprompt::vocab::build_vocabulary;

const BUNDLED_MAPPING: &str = include_str!("../data/mapping_table.tsv");

fn space(g: Granularity) -> AnswerSpace {
    let h = SenseHierarchy::bundled();
    let c = generate_synthetic(
        &SyntheticSpec {
            n_train: 300,
            n_dev: 0,
            n_test: 0,
            ..Default::default()
        },
        &h,
    );
    let mut v = build_vocabulary(&c, 1);
    build_answer_space(&h, &MappingTable::bundled(), g, &mut v, &c).unwrap()
}

#[test]
fn bundled_mapping_validates() {
    let m = MappingTable::bundled();
    m.validate(&SenseHierarchy::bundled()).unwrap();
    assert_eq!(m.rows().len(), 31);
    assert_eq!(m.answers().len(), 21);
}

#[test]
fn granularity_sizes() {
    for (g, n) in [
        (Granularity::Top4, 4),
        (Granularity::Second20, 20),
        (Granularity::Paper21, 21),
        (Granularity::Third31, 31),
        (Granularity::Substantive, 21),
    ] {
        assert_eq!(space(g).len(), n, "{g:?}");
    }
}

#[test]
fn paper21_group_contents() {
    let s = space(Granularity::Paper21);
    let a3 = s.answers().iter().find(|a| a.name == "[A]_3").unwrap();
    assert_eq!(
        a3.thirds,
        BTreeSet::from([
            "Comparison.Concession+SpeechAct.Arg2-as-denier+SpeechAct".to_string(),
            "Comparison.Concession.Arg2-as-denier".to_string(),
        ])
    );
    let idx = s.index_of_third("Comparison.Contrast").unwrap();
    assert_eq!(s.answers()[idx].name, "[A]_2");
    let idx = s
        .index_of_third("Temporal.Asynchronous.Precedence")
        .unwrap();
    assert_eq!(s.answers()[idx].name, "[A]_21");
    let sizes = TopLevel::ALL.map(|t| s.answers().iter().filter(|a| a.top == t).count());
    assert_eq!(sizes, [4, 4, 10, 3]);
}

#[test]
fn substantive_uses_distinct_base_tokens() {
    let s = space(Granularity::Substantive);
    let ids: HashSet<usize> = s.token_ids().into_iter().collect();
    assert_eq!(ids.len(), 21);
}

#[test]
fn partition_for_every_granularity() {
    let h = SenseHierarchy::bundled();
    for g in Granularity::ALL {
        let s = space(g);
        let mut all = BTreeSet::new();
        let mut total = 0;
        for a in s.answers() {
            total += a.thirds.len();
            all.extend(a.thirds.iter().cloned());
            for t in &a.thirds {
                assert_eq!(h.resolve(t).unwrap().top, a.top);
            }
        }
        assert_eq!(total, 31, "{g:?} groups overlap");
        assert_eq!(all.len(), 31, "{g:?} misses senses");
    }
}

#[test]
fn aggregate_cases() {
    let s = space(Granularity::Paper21);
    let mut p = vec![0.0f64; 21];
    p[1] = 1.0;
    let (sc, top) = aggregate_relation_scores(&p, &s).unwrap();
    assert_eq!(sc[0], 1.0);
    assert_eq!(top, TopLevel::Comparison);

    let uni = vec![1.0 / 21.0; 21];
    let (sc, top) = aggregate_relation_scores(&uni, &s).unwrap();
    for (got, want) in sc.iter().zip([4.0f64, 4.0, 10.0, 3.0]) {
        assert!((got - want / 21.0).abs() < 1e-12);
    }
    assert_eq!(top, TopLevel::Expansion);

    let mut p = vec![0.0f64; 21];
    p[0] = 0.5;
    p[4] = 0.5;
    assert_eq!(
        aggregate_relation_scores(&p, &s).unwrap().1,
        TopLevel::Comparison
    );

    assert!(aggregate_relation_scores(&[0.5f64, 0.5], &s).is_err());
}

#[test]
fn mapping_rejects_missing_and_cross_top() {
    let h = SenseHierarchy::bundled();
    let mut text: Vec<&str> = BUNDLED_MAPPING.lines().collect();
    text.pop();
    assert!(MappingTable::parse(&text.join("\n"))
        .unwrap()
        .validate(&h)
        .is_err());
    let bad = BUNDLED_MAPPING.replace(
        "Temporal.Synchronous\t[A]_19",
        "Temporal.Synchronous\t[A]_18",
    );
    assert!(MappingTable::parse(&bad).unwrap().validate(&h).is_err());
}
