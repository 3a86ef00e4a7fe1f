use adaptprompt::corpus::TopLevel::{self, *};
use adaptprompt::experiment::*;

#[test]
fn perfect_predictions() {
    let m = Metrics::from_predictions(TopLevel::ALL.into_iter().map(|t| (t, t)));
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.macro_f1, 1.0);
}

#[test]
fn constant_predictor_on_balanced_set() {
    // Oracle: predicting Comparison for 25 of each class gives
    // precision 0.25, recall 1, F1 = 2*0.25/1.25 = 0.4 for Comparison
    // and 0 elsewhere, so macro-F1 = 0.1.
    let pairs = TopLevel::ALL
        .into_iter()
        .flat_map(|t| std::iter::repeat_n((t, Comparison), 25));
    let m = Metrics::from_predictions(pairs);
    assert_eq!(m.total, 100);
    assert!((m.accuracy - 0.25).abs() < 1e-12);
    assert!((m.f1(Comparison) - 0.4).abs() < 1e-12);
    assert_eq!(m.f1(Temporal), 0.0);
    assert!((m.macro_f1 - 0.1).abs() < 1e-12);
}

#[test]
fn accuracy_is_confusion_trace() {
    let pairs = [
        (Comparison, Contingency),
        (Expansion, Expansion),
        (Temporal, Expansion),
        (Contingency, Contingency),
        (Expansion, Expansion),
    ];
    let m = Metrics::from_predictions(pairs);
    let trace: usize = (0..4).map(|i| m.confusion[i][i]).sum();
    assert!((m.accuracy - trace as f64 / m.total as f64).abs() < 1e-12);
    for c in m.per_class {
        assert!((0.0..=1.0).contains(&c.f1));
    }
}

#[test]
fn empty_is_zero() {
    let m = Metrics::from_predictions(std::iter::empty());
    assert_eq!(m.accuracy, 0.0);
    assert_eq!(m.macro_f1, 0.0);
}
