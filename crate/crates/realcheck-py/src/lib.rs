//! Python bindings for the realcheck core: the Mahalanobis/chi-squared
//! realism test, uncertainty scores with AUROC/AUPRC, the solid-angle
//! reference law, and the seeded simulators (emitted as JSONL strings in
//! the CLI's dataset format).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json as serde_json_value;

use realcheck::classification::{
    pr_curve, roc_curve, score, ClassificationRecord, ScoreKind, ScoredRecord,
};
use realcheck::dataset::{classification_line, regression_line};
use realcheck::error::Error;
use realcheck::linalg::SpdMatrix;
use realcheck::regression::{
    mgt_set, msample_set, realism_test, solid_angle_cdf as solid_angle_cdf_rs, MahalanobisSet,
    Payload, RegressionRecord, Verdict,
};
use realcheck::simulate::{
    gen_classification, gen_regression, ClassificationKind, ClassificationRegime, RegressionKind,
    RegressionRegime,
};
use realcheck::stats::{
    empirical_quantile as empirical_quantile_rs, mahalanobis_sq as mahalanobis_sq_rs,
    sample_summary, tail_mean as tail_mean_rs, GaussianSummary,
};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// chi2_cdf(d, x): CDF of the chi-squared distribution with d degrees of freedom.
#[pyfunction]
fn chi2_cdf(d: u32, x: f64) -> PyResult<f64> {
    realcheck::special::chi2_cdf(d, x).map_err(py_err)
}

/// solid_angle_cdf(d, alpha): folded solid-angle law on [0, pi/2].
#[pyfunction]
fn solid_angle_cdf(d: usize, alpha: f64) -> PyResult<f64> {
    solid_angle_cdf_rs(d, alpha).map_err(py_err)
}

/// mahalanobis_sq(mean, cov, y): squared Mahalanobis distance of y under
/// the Gaussian (mean, cov).
#[pyfunction]
fn mahalanobis_sq(mean: Vec<f64>, cov: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
    let cov = SpdMatrix::from_rows(&cov).map_err(py_err)?;
    let summary = GaussianSummary::new(mean, cov, 0).map_err(py_err)?;
    mahalanobis_sq_rs(&summary, &y).map_err(py_err)
}

/// fit_gaussian(samples): (mean, cov) of a K x d sample, unbiased covariance.
#[pyfunction]
fn fit_gaussian(samples: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let s = sample_summary(&samples).map_err(py_err)?;
    Ok((s.mean.clone(), s.cov.rows()))
}

/// chi2_realism_test(values, d, alpha): KS test of squared Mahalanobis
/// distances against chi2(d). Returns (statistic, p_value, realistic).
#[pyfunction]
#[pyo3(signature = (values, d, alpha = 0.01))]
fn chi2_realism_test(values: Vec<f64>, d: usize, alpha: f64) -> PyResult<(f64, f64, bool)> {
    let mset = MahalanobisSet { values, dim: d };
    let (gof, verdict) = realism_test(&mset, alpha).map_err(py_err)?;
    Ok((
        gof.statistic,
        gof.p_value,
        matches!(verdict, Verdict::Realistic),
    ))
}

/// empirical_quantile(values, p): linear-interpolation quantile.
#[pyfunction]
fn empirical_quantile(values: Vec<f64>, p: f64) -> PyResult<f64> {
    empirical_quantile_rs(&values, p).map_err(py_err)
}

/// tail_mean(values, p): mean of values strictly above the p-quantile.
#[pyfunction]
fn tail_mean(values: Vec<f64>, p: f64) -> PyResult<f64> {
    tail_mean_rs(&values, p).map_err(py_err)
}

fn parse_score_kind(name: &str) -> PyResult<ScoreKind> {
    match name {
        "max_prob" => Ok(ScoreKind::MaxProb),
        "entropy" => Ok(ScoreKind::Entropy),
        "win_var" => Ok(ScoreKind::WinVar),
        "mi" => Ok(ScoreKind::Mi),
        other => Err(PyValueError::new_err(format!(
            "unknown score kind {other:?}; expected max_prob, entropy, win_var or mi"
        ))),
    }
}

/// uncertainty_score(gt, probs, kind): one record's uncertainty score.
#[pyfunction]
fn uncertainty_score(gt: usize, probs: Vec<Vec<f64>>, kind: &str) -> PyResult<f64> {
    let record = ClassificationRecord::new(gt, probs).map_err(py_err)?;
    score(&record, parse_score_kind(kind)?).map_err(py_err)
}

fn scored(correct: Vec<bool>, uncertainty: Vec<f64>) -> PyResult<Vec<ScoredRecord>> {
    if correct.len() != uncertainty.len() {
        return Err(PyValueError::new_err(
            "correct and uncertainty must have equal length",
        ));
    }
    if uncertainty.iter().any(|u| !u.is_finite()) {
        return Err(PyValueError::new_err("uncertainties must be finite"));
    }
    Ok(correct
        .into_iter()
        .zip(uncertainty)
        .map(|(c, u)| ScoredRecord {
            correct: c,
            uncertainty: u,
        })
        .collect())
}

/// auroc(correct, uncertainty): area under the ROC curve with correct
/// records as positives, ranked by confidence = -uncertainty.
#[pyfunction]
fn auroc(correct: Vec<bool>, uncertainty: Vec<f64>) -> PyResult<f64> {
    Ok(roc_curve(&scored(correct, uncertainty)?)
        .map_err(py_err)?
        .auc)
}

/// auprc(correct, uncertainty): step-wise area under the precision-recall curve.
#[pyfunction]
fn auprc(correct: Vec<bool>, uncertainty: Vec<f64>) -> PyResult<f64> {
    Ok(pr_curve(&scored(correct, uncertainty)?)
        .map_err(py_err)?
        .auc)
}

/// mahalanobis_sets(records_jsonl): parses regression JSONL text and returns
/// (mgt_values, msample_values) where msample is None when any record is
/// summary-only.
#[pyfunction]
fn mahalanobis_sets(records_jsonl: &str) -> PyResult<(Vec<f64>, Option<Vec<f64>>)> {
    let mut records: Vec<RegressionRecord> = Vec::new();
    for (i, line) in records_jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json_value::Value = serde_json_value::from_str(line)
            .map_err(|e| PyValueError::new_err(format!("line {}: {e}", i + 1)))?;
        records.push(record_from_value(v, i + 1)?);
    }
    let (mgt, _) = mgt_set(&records).map_err(py_err)?;
    let msample = match msample_set(&records, false) {
        Ok((set, _)) => Some(set.values),
        Err(Error::NoRawSamples { .. }) => None,
        Err(e) => return Err(py_err(e)),
    };
    Ok((mgt.values, msample))
}

fn record_from_value(v: serde_json_value::Value, line: usize) -> PyResult<RegressionRecord> {
    let bad = |msg: &str| PyValueError::new_err(format!("line {line}: {msg}"));
    let y_gt: Vec<f64> =
        serde_json_value::from_value(v.get("y_gt").cloned().ok_or_else(|| bad("missing y_gt"))?)
            .map_err(|_| bad("y_gt must be an array of numbers"))?;
    if let Some(samples) = v.get("samples") {
        let samples: Vec<Vec<f64>> = serde_json_value::from_value(samples.clone())
            .map_err(|_| bad("samples must be an array of arrays"))?;
        return Ok(RegressionRecord {
            y_gt,
            payload: Payload::Raw(samples),
        });
    }
    let mean: Vec<f64> = serde_json_value::from_value(
        v.get("mean")
            .cloned()
            .ok_or_else(|| bad("missing payload"))?,
    )
    .map_err(|_| bad("mean must be an array of numbers"))?;
    let cov: Vec<Vec<f64>> =
        serde_json_value::from_value(v.get("cov").cloned().ok_or_else(|| bad("missing cov"))?)
            .map_err(|_| bad("cov must be an array of arrays"))?;
    let cov = SpdMatrix::from_rows(&cov).map_err(py_err)?;
    Ok(RegressionRecord {
        y_gt,
        payload: Payload::Summary(GaussianSummary::new(mean, cov, 0).map_err(py_err)?),
    })
}

/// simulate_regression_jsonl(kind, d, k, n, seed, scale=1.0, nu=3.0, bias=None):
/// seeded regression fixture in the dataset JSONL format.
#[pyfunction]
#[pyo3(signature = (kind, d, k, n, seed, scale = 1.0, nu = 3.0, bias = None))]
#[allow(clippy::too_many_arguments)]
fn simulate_regression_jsonl(
    kind: &str,
    d: usize,
    k: usize,
    n: usize,
    seed: u64,
    scale: f64,
    nu: f64,
    bias: Option<Vec<f64>>,
) -> PyResult<String> {
    let kind = match kind {
        "calibrated" => RegressionKind::Calibrated,
        "var_scaled" => RegressionKind::VarScaled { scale },
        "misoriented" => RegressionKind::Misoriented,
        "fat_tailed" => RegressionKind::FatTailed { nu },
        "biased" => RegressionKind::Biased {
            bias: bias.unwrap_or_else(|| {
                let mut b = vec![0.0; d];
                b[0] = 1.0;
                b
            }),
        },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown regression regime {other:?}"
            )))
        }
    };
    let records = gen_regression(&RegressionRegime {
        kind,
        d,
        k,
        n,
        seed,
    })
    .map_err(py_err)?;
    Ok(records
        .iter()
        .map(regression_line)
        .collect::<Vec<_>>()
        .join("\n"))
}

/// simulate_classification_jsonl(kind, c, k, n, seed): seeded classification
/// fixture in the dataset JSONL format.
#[pyfunction]
fn simulate_classification_jsonl(
    kind: &str,
    c: usize,
    k: usize,
    n: usize,
    seed: u64,
) -> PyResult<String> {
    let kind = match kind {
        "informative" => ClassificationKind::Informative,
        "uninformative" => ClassificationKind::Uninformative,
        "out_of_data" => ClassificationKind::OutOfData,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown classification regime {other:?}"
            )))
        }
    };
    let records = gen_classification(&ClassificationRegime {
        kind,
        c,
        k,
        n,
        seed,
    })
    .map_err(py_err)?;
    Ok(records
        .iter()
        .map(classification_line)
        .collect::<Vec<_>>()
        .join("\n"))
}

#[pymodule]
fn realcheck_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(chi2_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(solid_angle_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(mahalanobis_sq, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_realism_test, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(tail_mean, m)?)?;
    m.add_function(wrap_pyfunction!(uncertainty_score, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(auprc, m)?)?;
    m.add_function(wrap_pyfunction!(mahalanobis_sets, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_regression_jsonl, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_classification_jsonl, m)?)?;
    m.add("__version__", realcheck::report::tool_version())?;
    Ok(())
}
