//! Brute-force k-nearest-neighbour classifier with Euclidean distance.

use serde::{Deserialize, Serialize};

use crate::error::{check_dataset, ModelError, Result};
use crate::labels::{from_index, to_index, Label};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
}

pub fn knn_train(x: &[Vec<f64>], labels: &[Label], k: usize) -> Result<KnnModel> {
    check_dataset(x, labels.len())?;
    if k == 0 {
        return Err(ModelError::param("k must be at least 1"));
    }
    Ok(KnnModel {
        k,
        x: x.to_vec(),
        y: labels.to_vec(),
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Indices of the `k` nearest rows, ordered by (distance, index).
    pub fn neighbors(&self, q: &[f64]) -> Result<Vec<usize>> {
        if q.len() != self.dim() {
            return Err(ModelError::Dimension {
                expected: self.dim(),
                got: q.len(),
            });
        }
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }

    /// Majority label among the neighbours; a tied vote goes to the lower class id.
    pub fn predict(&self, q: &[f64]) -> Result<Label> {
        let mut votes = [0usize; 2];
        for i in self.neighbors(q)? {
            votes[to_index(self.y[i])] += 1;
        }
        Ok(from_index(if votes[1] > votes[0] { 1 } else { 0 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_majority() {
        let x: Vec<Vec<f64>> = [1.0, 1.0, 1.0, 2.0, 2.0, 9.0].iter().map(|&d| vec![d]).collect();
        let a = Label::NonSeizure;
        let b = Label::Seizure;
        let m = knn_train(&x, &[a, a, a, b, b, b], 5).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), a);
    }

    #[test]
    fn tie_goes_to_lower_class() {
        let x = vec![vec![1.0], vec![-1.0]];
        let m = knn_train(&x, &[Label::Seizure, Label::NonSeizure], 2).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), Label::NonSeizure);
    }

    #[test]
    fn neighbor_order_breaks_distance_ties_by_index() {
        let x = vec![vec![1.0], vec![-1.0], vec![1.0], vec![5.0]];
        let m = knn_train(&x, &[Label::Seizure; 4], 3).unwrap();
        assert_eq!(m.neighbors(&[0.0]).unwrap(), vec![0, 1, 2]);
    }
}
