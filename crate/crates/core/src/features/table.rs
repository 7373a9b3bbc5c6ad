use std::path::Path;

use super::Label;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub values: Vec<f64>,
    pub label: Label,
    pub patient_id: String,
    pub start_s: f64,
}

/// Named feature matrix with per-row label and provenance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Patient ids in sorted order, without duplicates.
    pub fn patients(&self) -> Vec<String> {
        let mut p: Vec<String> = self.rows.iter().map(|r| r.patient_id.clone()).collect();
        p.sort();
        p.dedup();
        p
    }
}

const TRAILER: [&str; 3] = ["label", "patient_id", "start_s"];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CoreError + '_ {
    move |e| match e.position() {
        Some(pos) => CoreError::parse(format!("{} line {}", path.display(), pos.line()), e.to_string()),
        None => CoreError::parse(path.display().to_string(), e.to_string()),
    }
}

/// Writes the header (feature names, then label, patient_id, start_s) and one
/// line per row. Values use the shortest representation that round-trips.
pub fn write_feature_csv(table: &FeatureTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header: Vec<&str> = table.names.iter().map(String::as_str).chain(TRAILER).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, row) in table.rows.iter().enumerate() {
        if row.values.len() != table.dim() {
            return Err(CoreError::ShapeMismatch(format!(
                "row {i} has {} values, table has {} names",
                row.values.len(),
                table.dim()
            )));
        }
        let mut rec: Vec<String> = row.values.iter().map(|v| format!("{v:?}")).collect();
        rec.push(row.label.name().to_string());
        rec.push(row.patient_id.clone());
        rec.push(format!("{:?}", row.start_s));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureTable> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let d = header.len().checked_sub(TRAILER.len()).unwrap_or(0);
    if header.len() < TRAILER.len() || header[d..] != TRAILER {
        return Err(CoreError::parse(
            format!("{} line 1", path.display()),
            "header must end with label, patient_id, start_s",
        ));
    }
    let names = header[..d].to_vec();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let at = |col: usize| format!("{} line {line} column {}", path.display(), col + 1);
        let num = |col: usize| -> Result<f64> {
            rec[col]
                .trim()
                .parse::<f64>()
                .map_err(|e| CoreError::parse(at(col), format!("{:?}: {e}", &rec[col])))
        };
        let values = (0..d).map(num).collect::<Result<Vec<f64>>>()?;
        let label = match rec[d].trim() {
            "seizure" | "1" => Label::Seizure,
            "non_seizure" | "0" => Label::NonSeizure,
            other => return Err(CoreError::parse(at(d), format!("unknown label {other:?}"))),
        };
        rows.push(FeatureRow {
            values,
            label,
            patient_id: rec[d + 1].to_string(),
            start_s: num(d + 2)?,
        });
    }
    Ok(FeatureTable { names, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let t = FeatureTable {
            names: vec!["a".into(), "b".into()],
            rows: vec![
                FeatureRow {
                    values: vec![0.1, -1e-300],
                    label: Label::Seizure,
                    patient_id: "p01".into(),
                    start_s: 3.0,
                },
                FeatureRow {
                    values: vec![1.0 / 3.0, 7.0],
                    label: Label::NonSeizure,
                    patient_id: "p02".into(),
                    start_s: 0.0,
                },
            ],
        };
        write_feature_csv(&t, &p).unwrap();
        assert_eq!(read_feature_csv(&p).unwrap(), t);
        assert_eq!(t.patients(), vec!["p01", "p02"]);
    }

    #[test]
    fn bad_cell_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, "a,label,patient_id,start_s\n1.0,seizure,p,0\nx,seizure,p,1\n").unwrap();
        let err = read_feature_csv(&p).unwrap_err().to_string();
        assert!(err.contains("line 3 column 1"), "{err}");
    }
}
