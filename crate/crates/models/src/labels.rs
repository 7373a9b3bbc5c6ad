//! The one place where class labels change encoding: `{-1, +1}` for the
//! SVM, `{0, 1}` class ids everywhere else.

pub use earpipe_core::features::Label;

use crate::error::{ModelError, Result};

pub fn to_sign(label: Label) -> f64 {
    match label {
        Label::NonSeizure => -1.0,
        Label::Seizure => 1.0,
    }
}

/// Nonnegative decision values map to the seizure class.
pub fn from_sign(v: f64) -> Label {
    if v >= 0.0 {
        Label::Seizure
    } else {
        Label::NonSeizure
    }
}

pub fn to_index(label: Label) -> usize {
    label.id() as usize
}

pub fn from_index(i: usize) -> Label {
    if i == 0 {
        Label::NonSeizure
    } else {
        Label::Seizure
    }
}

pub fn class_counts(labels: &[Label]) -> [usize; 2] {
    let mut c = [0; 2];
    for l in labels {
        c[to_index(*l)] += 1;
    }
    c
}

pub(crate) fn require_both(labels: &[Label]) -> Result<[usize; 2]> {
    let c = class_counts(labels);
    if c[0] == 0 || c[1] == 0 {
        return Err(ModelError::SingleClass(format!(
            "{} non-seizure and {} seizure examples",
            c[0], c[1]
        )));
    }
    Ok(c)
}
