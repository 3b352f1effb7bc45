//! Line-delimited dataset ingestion and serialization.
//!
//! One JSON object per line. Regression records carry "y_gt" plus either
//! "samples" (K arrays of d numbers) or the pair "mean" + "cov" (d numbers
//! and a d x d row-major array of arrays). Classification records carry
//! "gt" and "probs" (K x C). Files are UTF-8 with LF newlines; malformed
//! lines abort with their line number.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use crate::classification::ClassificationRecord;
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::regression::{Payload, RegressionRecord};
use crate::stats::GaussianSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Regression,
    Classification,
}

/// A homogeneous record collection plus free-form provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R> {
    pub kind: DatasetKind,
    pub dim: usize,
    pub records: Vec<R>,
    pub meta: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RegressionLine {
    y_gt: Vec<f64>,
    #[serde(default)]
    samples: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    mean: Option<Vec<f64>>,
    #[serde(default)]
    cov: Option<Vec<Vec<f64>>>,
}

/// Reads a regression dataset. Dimension homogeneity is enforced across
/// lines; a line may carry raw samples or a summary, never both.
pub fn read_regression(path: &Path) -> Result<Dataset<RegressionRecord>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RegressionLine =
            serde_json::from_str(&line).map_err(|e| Error::ParseError {
                line: line_no,
                reason: e.to_string(),
            })?;
        let record = regression_record_from_line(parsed, line_no)?;
        let d = record.dim();
        match dim {
            None => dim = Some(d),
            Some(first) if first != d => {
                return Err(Error::MixedDimensions { first, other: d });
            }
            _ => {}
        }
        records.push(record);
    }
    let dim = dim.ok_or_else(|| Error::ParseError {
        line: 0,
        reason: "file contains no records".into(),
    })?;
    let mut meta = BTreeMap::new();
    meta.insert("source".into(), path.display().to_string());
    Ok(Dataset {
        kind: DatasetKind::Regression,
        dim,
        records,
        meta,
    })
}

fn regression_record_from_line(line: RegressionLine, line_no: usize) -> Result<RegressionRecord> {
    let d = line.y_gt.len();
    if d == 0 {
        return Err(Error::ParseError {
            line: line_no,
            reason: "y_gt is empty".into(),
        });
    }
    if line.y_gt.iter().any(|x| !x.is_finite()) {
        return Err(Error::ParseError {
            line: line_no,
            reason: "y_gt has non-finite entries".into(),
        });
    }
    match (line.samples, line.mean, line.cov) {
        (Some(samples), None, None) => {
            for row in &samples {
                if row.len() != d {
                    return Err(Error::ParseError {
                        line: line_no,
                        reason: format!("sample row has {} entries, y_gt has {d}", row.len()),
                    });
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::ParseError {
                        line: line_no,
                        reason: "samples have non-finite entries".into(),
                    });
                }
            }
            Ok(RegressionRecord {
                y_gt: line.y_gt,
                payload: Payload::Raw(samples),
            })
        }
        (None, Some(mean), Some(cov)) => {
            if mean.len() != d {
                return Err(Error::ParseError {
                    line: line_no,
                    reason: format!("mean has {} entries, y_gt has {d}", mean.len()),
                });
            }
            let cov = SpdMatrix::from_rows(&cov).map_err(|e| Error::ParseError {
                line: line_no,
                reason: e.to_string(),
            })?;
            let summary = GaussianSummary::new(mean, cov, 0).map_err(|e| Error::ParseError {
                line: line_no,
                reason: e.to_string(),
            })?;
            Ok(RegressionRecord {
                y_gt: line.y_gt,
                payload: Payload::Summary(summary),
            })
        }
        _ => Err(Error::ParseError {
            line: line_no,
            reason: "record needs either \"samples\" or the pair \"mean\" + \"cov\"".into(),
        }),
    }
}

#[derive(Deserialize)]
struct ClassificationLine {
    gt: usize,
    probs: Vec<Vec<f64>>,
}

/// Reads a classification dataset. Rows whose sums stray beyond 1e-6 are
/// rejected with their line number; rows inside the tolerance are
/// renormalized.
pub fn read_classification(path: &Path) -> Result<Dataset<ClassificationRecord>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ClassificationLine =
            serde_json::from_str(&line).map_err(|e| Error::ParseError {
                line: line_no,
                reason: e.to_string(),
            })?;
        for row in &parsed.probs {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > crate::classification::ROW_SUM_TOL {
                return Err(Error::InvalidProbability { line: line_no, sum });
            }
        }
        let record =
            ClassificationRecord::new(parsed.gt, parsed.probs).map_err(|e| Error::ParseError {
                line: line_no,
                reason: e.to_string(),
            })?;
        let c = record.n_classes();
        match dim {
            None => dim = Some(c),
            Some(first) if first != c => {
                return Err(Error::MixedDimensions { first, other: c });
            }
            _ => {}
        }
        records.push(record);
    }
    let dim = dim.ok_or_else(|| Error::ParseError {
        line: 0,
        reason: "file contains no records".into(),
    })?;
    let mut meta = BTreeMap::new();
    meta.insert("source".into(), path.display().to_string());
    Ok(Dataset {
        kind: DatasetKind::Classification,
        dim,
        records,
        meta,
    })
}

/// Serializes one regression record as a JSON line.
pub fn regression_line(record: &RegressionRecord) -> String {
    let value = match &record.payload {
        Payload::Raw(samples) => json!({ "y_gt": record.y_gt, "samples": samples }),
        Payload::Summary(s) => json!({
            "y_gt": record.y_gt,
            "mean": s.mean,
            "cov": s.cov.rows(),
        }),
    };
    value.to_string()
}

/// Serializes one classification record as a JSON line.
pub fn classification_line(record: &ClassificationRecord) -> String {
    json!({ "gt": record.gt_class, "probs": record.probs }).to_string()
}

/// Writes lines to `path` atomically: everything goes to a temporary file in
/// the same directory which is renamed over the target only on success.
pub fn write_lines_atomic<I>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    write_bytes_atomic(path, |w| {
        for line in lines {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Atomic file write helper shared by dataset and report writers.
pub fn write_bytes_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp_name = format!(
        ".{}.tmp-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into()),
        std::process::id()
    );
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    let result = (|| -> Result<()> {
        let mut file = fs::File::create(&tmp_path)?;
        fill(&mut file)?;
        file.sync_all()?;
        fs::rename(&tmp_path, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp_path);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> std::path::PathBuf {
        let mut path = std::env::temp_dir();
        path.push(format!(
            "realcheck-dataset-test-{}-{:?}.jsonl",
            std::process::id(),
            std::thread::current().id()
        ));
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn reads_summary_record() {
        let path = write_tmp(r#"{"y_gt":[1,2],"mean":[1,2],"cov":[[1,0],[0,1]]}"#);
        let ds = read_regression(&path).unwrap();
        fs::remove_file(&path).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.dim, 2);
        assert!(matches!(ds.records[0].payload, Payload::Summary(_)));
    }

    #[test]
    fn mixed_dimensions_rejected_at_line() {
        let path = write_tmp(concat!(
            r#"{"y_gt":[1,2],"mean":[1,2],"cov":[[1,0],[0,1]]}"#,
            "\n",
            r#"{"y_gt":[1,2,3],"mean":[1,2,3],"cov":[[1,0,0],[0,1,0],[0,0,1]]}"#
        ));
        let err = read_regression(&path).unwrap_err();
        fs::remove_file(&path).unwrap();
        assert!(matches!(err, Error::MixedDimensions { first: 2, other: 3 }));
    }

    #[test]
    fn malformed_line_reports_number() {
        let path = write_tmp("{\"y_gt\":[1,2],\"mean\":[1,2],\"cov\":[[1,0],[0,1]]}\nnot json");
        let err = read_regression(&path).unwrap_err();
        fs::remove_file(&path).unwrap();
        assert!(matches!(err, Error::ParseError { line: 2, .. }));
    }

    #[test]
    fn classification_row_sum_gate() {
        // sum 0.9: rejected
        let path = write_tmp(r#"{"gt":0,"probs":[[0.4,0.5]]}"#);
        let err = read_classification(&path).unwrap_err();
        fs::remove_file(&path).unwrap();
        assert!(matches!(err, Error::InvalidProbability { line: 1, .. }));

        // sum 1.0000004: renormalized
        let path = write_tmp(r#"{"gt":0,"probs":[[0.5000004,0.5]]}"#);
        let ds = read_classification(&path).unwrap();
        fs::remove_file(&path).unwrap();
        let sum: f64 = ds.records[0].probs[0].iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);

        // exact single one-hot row is valid
        let path = write_tmp(r#"{"gt":0,"probs":[[1.0,0.0]]}"#);
        let ds = read_classification(&path).unwrap();
        fs::remove_file(&path).unwrap();
        assert_eq!(ds.records[0].n_samples(), 1);
    }
}
