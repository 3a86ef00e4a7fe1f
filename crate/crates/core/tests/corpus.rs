use std::io::Write;

use adaptprompt::corpus::*;
use adaptprompt::Error;

fn line(id: &str, sense: &str, split: &str) -> String {
    format!(
        r#"{{"id":"{id}","arg1":"the market fell","arg2":"investors sold","conn":"because","senses":["{sense}"],"split":"{split}"}}"#
    )
}

fn write_tmp(lines: &[String]) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    f
}

#[test]
fn loads_three_records() {
    let h = SenseHierarchy::bundled();
    let f = write_tmp(&[
        line("a", "Contingency.Cause.Reason", "train"),
        line("b", "Expansion.Conjunction", "dev"),
        line("c", "Temporal.Synchronous", "test"),
    ]);
    let c = load_corpus(f.path(), &h).unwrap();
    assert_eq!(c.len(), 3);
    assert_eq!(c.instances()[1].split, Split::Dev);
    assert_eq!(c.instances()[0].top(), TopLevel::Contingency);
}

#[test]
fn unknown_sense_reports_line() {
    let h = SenseHierarchy::bundled();
    let f = write_tmp(&[
        line("a", "Expansion.Conjunction", "train"),
        line("b", "Temporal.Foo.Bar", "train"),
    ]);
    match load_corpus(f.path(), &h) {
        Err(Error::UnknownSense { line, sense }) => {
            assert_eq!(line, 2);
            assert_eq!(sense, "Temporal.Foo.Bar");
        }
        other => panic!("expected unknown sense, got {other:?}"),
    }
}

#[test]
fn duplicate_id_rejected() {
    let h = SenseHierarchy::bundled();
    let f = write_tmp(&[
        line("a", "Expansion.Conjunction", "train"),
        line("a", "Expansion.Conjunction", "test"),
    ]);
    assert!(matches!(
        load_corpus(f.path(), &h),
        Err(Error::DuplicateId { line: 2, .. })
    ));
}

#[test]
fn malformed_record_reports_line() {
    let h = SenseHierarchy::bundled();
    let f = write_tmp(&[
        line("a", "Expansion.Conjunction", "train"),
        "{not json".into(),
    ]);
    assert!(matches!(
        load_corpus(f.path(), &h),
        Err(Error::MalformedRecord { line: 2, .. })
    ));
}

#[test]
fn empty_argument_rejected() {
    let h = SenseHierarchy::bundled();
    let rec = r#"{"id":"a","arg1":"  ","arg2":"x","conn":"so","senses":["Expansion.Conjunction"],"split":"train"}"#;
    let f = write_tmp(&[rec.to_string()]);
    assert!(matches!(
        load_corpus(f.path(), &h),
        Err(Error::MalformedRecord { .. })
    ));
}

#[test]
fn stats_of_empty_corpus_are_zero() {
    let s = corpus_stats(&Corpus::default());
    for split in Split::ALL {
        assert_eq!(s.total(split), 0);
    }
}

#[test]
fn stats_count_first_sense() {
    let h = SenseHierarchy::bundled();
    let exp = h.resolve("Expansion.Conjunction").unwrap().clone();
    let tmp = h.resolve("Temporal.Synchronous").unwrap().clone();
    let mk = |id: &str, senses: Vec<SenseLabel>, split| Instance {
        id: id.into(),
        arg1: "a".into(),
        arg2: "b".into(),
        connective: "and".into(),
        senses,
        split,
    };
    let c = Corpus::new(vec![
        mk("1", vec![exp.clone(), tmp.clone()], Split::Train),
        mk("2", vec![exp.clone()], Split::Train),
        mk("3", vec![tmp.clone(), exp.clone()], Split::Test),
    ])
    .unwrap();
    let s = corpus_stats(&c);
    assert_eq!(s.count(Split::Train, TopLevel::Expansion), 2);
    assert_eq!(s.count(Split::Train, TopLevel::Temporal), 0);
    assert_eq!(s.count(Split::Test, TopLevel::Temporal), 1);
    assert_eq!(s.total(Split::Dev), 0);
}
