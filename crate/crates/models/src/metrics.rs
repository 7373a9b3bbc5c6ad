//! Confusion-matrix metrics for the binary seizure task. The positive class
//! is `Seizure`.

use serde::{Deserialize, Serialize};

use crate::labels::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Confusion {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Label::Seizure, Label::Seizure) => c.tp += 1,
                (Label::NonSeizure, Label::Seizure) => c.fp += 1,
                (Label::NonSeizure, Label::NonSeizure) => c.tn += 1,
                (Label::Seizure, Label::NonSeizure) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub seizure: ClassScores,
    pub non_seizure: ClassScores,
    /// TP / (TP + FN).
    pub seizure_detection_rate: f64,
    /// TN / (TN + FP).
    pub non_seizure_rate: f64,
    /// Mean of the two class F1 scores.
    pub macro_f1: f64,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Metrics {
        let sp = ratio(c.tp, c.tp + c.fp);
        let sr = ratio(c.tp, c.tp + c.fn_);
        let np = ratio(c.tn, c.tn + c.fn_);
        let nr = ratio(c.tn, c.tn + c.fp);
        let seizure = ClassScores {
            precision: sp,
            recall: sr,
            f1: f1(sp, sr),
            support: c.tp + c.fn_,
        };
        let non_seizure = ClassScores {
            precision: np,
            recall: nr,
            f1: f1(np, nr),
            support: c.tn + c.fp,
        };
        Metrics {
            confusion: c,
            accuracy: ratio(c.tp + c.tn, c.total()),
            macro_f1: (seizure.f1 + non_seizure.f1) / 2.0,
            seizure,
            non_seizure,
            seizure_detection_rate: sr,
            non_seizure_rate: nr,
        }
    }

    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Metrics {
        Metrics::from_confusion(Confusion::from_predictions(truth, predicted))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_arithmetic() {
        let m = Metrics::from_confusion(Confusion {
            tp: 93,
            fn_: 7,
            tn: 97,
            fp: 3,
        });
        assert!((m.seizure_detection_rate - 0.93).abs() < 1e-12);
        assert!((m.non_seizure_rate - 0.97).abs() < 1e-12);
        assert!((m.accuracy - 0.95).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_on_balanced_fold() {
        let truth = [Label::Seizure, Label::Seizure, Label::NonSeizure, Label::NonSeizure];
        let m = Metrics::from_predictions(&truth, &[Label::NonSeizure; 4]);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.seizure.recall, 0.0);
        assert_eq!(m.seizure.f1, 0.0);
    }

    #[test]
    fn serializes_fn_field() {
        let s = serde_json::to_string(&Confusion::default()).unwrap();
        assert!(s.contains("\"fn\":0"));
    }
}
