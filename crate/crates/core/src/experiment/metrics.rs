//! Four-way accuracy, per-class precision/recall/F1 and macro-F1.

use serde::{Deserialize, Serialize};

use crate::corpus::TopLevel;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Indexed by [`TopLevel::index`].
    pub per_class: [ClassMetrics; 4],
    /// `confusion[gold][pred]`.
    pub confusion: [[usize; 4]; 4],
    pub total: usize,
}

impl Metrics {
    /// F1 is 0 whenever precision + recall is 0.
    pub fn from_predictions(pairs: impl IntoIterator<Item = (TopLevel, TopLevel)>) -> Metrics {
        let mut confusion = [[0usize; 4]; 4];
        for (gold, pred) in pairs {
            confusion[gold.index()][pred.index()] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: [[usize; 4]; 4]) -> Metrics {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..4).map(|i| confusion[i][i]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_class = std::array::from_fn(|c| {
            let tp = confusion[c][c];
            let predicted: usize = (0..4).map(|g| confusion[g][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
            }
        });
        let macro_f1 = per_class.iter().map(|c: &ClassMetrics| c.f1).sum::<f64>() / 4.0;
        Metrics {
            accuracy: ratio(correct, total),
            macro_f1,
            per_class,
            confusion,
            total,
        }
    }

    pub fn f1(&self, top: TopLevel) -> f64 {
        self.per_class[top.index()].f1
    }

    /// Selection order: macro-F1, then accuracy.
    pub fn better_than(&self, other: &Metrics) -> bool {
        (self.macro_f1, self.accuracy) > (other.macro_f1, other.accuracy)
    }
}
