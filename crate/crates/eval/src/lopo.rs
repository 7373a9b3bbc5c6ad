use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub id: usize,
    pub test: String,
    pub train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// One fold per distinct patient, ordered by patient id.
pub fn lopo_plan<S: AsRef<str>>(patients: &[S]) -> Result<FoldPlan> {
    let mut ids: Vec<String> = patients.iter().map(|p| p.as_ref().to_string()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() < 2 {
        return Err(EvalError::config(format!(
            "leave-one-patient-out needs at least 2 patients, got {}",
            ids.len()
        )));
    }
    let folds = ids
        .iter()
        .enumerate()
        .map(|(id, test)| Fold {
            id,
            test: test.clone(),
            train: ids.iter().filter(|p| *p != test).cloned().collect(),
        })
        .collect();
    Ok(FoldPlan { folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_patients() {
        let plan = lopo_plan(&["c", "a", "b", "a"]).unwrap();
        assert_eq!(plan.folds.len(), 3);
        assert_eq!(plan.folds[0].test, "a");
        assert_eq!(plan.folds[0].train, vec!["b", "c"]);
        for f in &plan.folds {
            assert!(!f.train.contains(&f.test));
        }
    }

    #[test]
    fn one_patient_rejected() {
        assert!(lopo_plan(&["a", "a"]).is_err());
    }
}
