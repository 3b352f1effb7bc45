//! Report assembly and serialization: a single self-describing JSON document
//! or a bundle of per-section CSV files ready for external plotting.
//!
//! Reports are deterministic: no timestamps, fields in struct order, floats
//! in shortest round-trip form, and an embedded SHA-256 digest of the input.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classification::{
    pr_curve, rejection_report, roc_curve, score_records, CurveReport, ScoreKind,
};
use crate::dataset::{write_bytes_atomic, Dataset};
use crate::error::{Error, Result};
use crate::regression::{
    angle_set, mgt_set, monotonicity_table, msample_set, realism_test, rescale_to_variance,
    solid_angle_cdf, AngleSkips, BinRow, CovScore, MahalanobisSet, MonotonicityOptions,
    RegressionRecord, Verdict,
};
use crate::stats::{empirical_quantile, ks_test, summary_stats, variance, GofResult, SummaryStats};

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// SHA-256 of raw input bytes, hex-encoded.
pub fn digest_hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(64);
    for b in Sha256::digest(bytes) {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Fixed-convention histogram for Mahalanobis sets: 60 equal bins on
/// [0, max(30, q999)]; the last bin absorbs the upper tail.
pub fn mahalanobis_histogram(values: &[f64]) -> Result<Vec<HistBin>> {
    let q999 = empirical_quantile(values, 0.999)?;
    let hi = q999.max(30.0);
    Ok(histogram(values, 0.0, hi, 60))
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistBin> {
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = if v >= hi {
            bins - 1
        } else {
            (((v - lo) / w).floor() as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistBin {
            lo: lo + i as f64 * w,
            hi: lo + (i + 1) as f64 * w,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Solid-angle reference CDF evaluated at the bin's upper edge.
    pub ref_cdf_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MahalSection {
    pub stats: SummaryStats,
    pub test: GofResult,
    pub hist: Vec<HistBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsampleSection {
    pub stats: SummaryStats,
    pub test: GofResult,
    pub hist: Vec<HistBin>,
    pub leave_one_out: bool,
    /// Present when rescaling to the ground-truth set's variance was asked
    /// for: moments and histogram of the rescaled set.
    pub rescaled_stats: Option<SummaryStats>,
    pub rescaled_hist: Option<Vec<HistBin>>,
    pub skipped_degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSection {
    pub n: usize,
    pub test: GofResult,
    pub skips: AngleSkips,
    pub hist: Vec<AngleBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicitySection {
    pub score: CovScore,
    pub quantile_p: f64,
    pub per_component: bool,
    /// Set when every bin got the same score value, so edges are ties.
    pub degenerate_edges: bool,
    pub rows: Vec<BinRow>,
}

/// Full regression-realism report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealismReport {
    pub tool_version: String,
    pub input_digest: String,
    pub dim: usize,
    pub n_records: usize,
    pub alpha: f64,
    pub verdict: Verdict,
    pub skipped_degenerate: usize,
    pub mgt: MahalSection,
    pub msample: Option<MsampleSection>,
    pub angle: Option<AngleSection>,
    pub monotonicity: Option<MonotonicitySection>,
}

/// Options controlling regression report assembly.
#[derive(Debug, Clone, Copy)]
pub struct RegressionReportOptions {
    pub alpha: f64,
    pub score: CovScore,
    pub n_bins: usize,
    pub quantile_p: f64,
    pub per_component: bool,
    pub rescale_msample: bool,
    pub loo_msample: bool,
}

impl Default for RegressionReportOptions {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            score: CovScore::Det,
            n_bins: 10,
            quantile_p: 0.99,
            per_component: false,
            rescale_msample: false,
            loo_msample: false,
        }
    }
}

/// Runs the whole regression pipeline over a dataset and assembles the
/// report. The intra-sample section appears only when every record carries
/// raw samples; the monotonicity table is omitted when there are too few
/// usable records to fill the bins.
pub fn build_regression_report(
    dataset: &Dataset<RegressionRecord>,
    input_digest: &str,
    opts: &RegressionReportOptions,
) -> Result<RealismReport> {
    let records = &dataset.records;
    let (mgt, skipped) = mgt_set(records)?;
    let (gof, verdict) = realism_test(&mgt, opts.alpha)?;
    let mgt_section = MahalSection {
        stats: summary_stats(&mgt.values)?,
        test: gof,
        hist: mahalanobis_histogram(&mgt.values)?,
    };

    let all_raw = records
        .iter()
        .all(|r| matches!(r.payload, crate::regression::Payload::Raw(_)));
    let msample_section = if all_raw {
        let (mset, ms_skipped) = msample_set(records, opts.loo_msample)?;
        let (ms_gof, _) = realism_test(&mset, opts.alpha)?;
        let (rescaled_stats, rescaled_hist) = if opts.rescale_msample {
            let target = variance(&mgt.values)?;
            let rescaled = rescale_to_variance(&mset, target)?;
            (
                Some(summary_stats(&rescaled.values)?),
                Some(mahalanobis_histogram(&rescaled.values)?),
            )
        } else {
            (None, None)
        };
        Some(MsampleSection {
            stats: summary_stats(&mset.values)?,
            test: ms_gof,
            hist: mahalanobis_histogram(&mset.values)?,
            leave_one_out: opts.loo_msample,
            rescaled_stats,
            rescaled_hist,
            skipped_degenerate: ms_skipped,
        })
    } else {
        None
    };

    // the orientation reference law needs at least two dimensions
    let angle_section = if dataset.dim < 2 {
        None
    } else {
        match angle_set(records) {
            Ok((angles, skips)) => {
                let d = dataset.dim;
                let test = ks_test(&angles, |a| {
                    solid_angle_cdf(d, a.clamp(0.0, std::f64::consts::FRAC_PI_2)).unwrap_or(1.0)
                })?;
                let bins = 36;
                let mut hist = Vec::with_capacity(bins);
                let w = std::f64::consts::FRAC_PI_2 / bins as f64;
                for (i, hb) in histogram(&angles, 0.0, std::f64::consts::FRAC_PI_2, bins)
                    .into_iter()
                    .enumerate()
                {
                    hist.push(AngleBin {
                        lo: hb.lo,
                        hi: hb.hi,
                        count: hb.count,
                        ref_cdf_hi: solid_angle_cdf(
                            d,
                            ((i + 1) as f64 * w).min(std::f64::consts::FRAC_PI_2),
                        )?,
                    });
                }
                Some(AngleSection {
                    n: angles.len(),
                    test,
                    skips,
                    hist,
                })
            }
            Err(Error::AllRecordsDegenerate) => None,
            Err(e) => return Err(e),
        }
    };

    let mono_opts = MonotonicityOptions {
        n_bins: opts.n_bins,
        quantile_p: opts.quantile_p,
        per_component: opts.per_component,
    };
    let monotonicity = match monotonicity_table(records, opts.score, &mono_opts) {
        Ok(rows) => {
            let degenerate_edges = rows
                .windows(2)
                .all(|w| w[0].score_lo == w[1].score_lo && w[0].score_hi == w[1].score_hi);
            Some(MonotonicitySection {
                score: opts.score,
                quantile_p: opts.quantile_p,
                per_component: opts.per_component,
                degenerate_edges: degenerate_edges && rows.len() > 1,
                rows,
            })
        }
        Err(Error::TooFewRecords { .. }) => None,
        Err(e) => return Err(e),
    };

    Ok(RealismReport {
        tool_version: tool_version().to_string(),
        input_digest: input_digest.to_string(),
        dim: dataset.dim,
        n_records: records.len(),
        alpha: opts.alpha,
        verdict,
        skipped_degenerate: skipped,
        mgt: mgt_section,
        msample: msample_section,
        angle: angle_section,
        monotonicity,
    })
}

/// Rescaled intra-sample set, exposed for callers that want the values and
/// not just the moments.
pub fn rescaled_msample(mgt: &MahalanobisSet, msample: &MahalanobisSet) -> Result<MahalanobisSet> {
    rescale_to_variance(msample, variance(&mgt.values)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionSection {
    pub threshold: f64,
    pub fn_rejected_frac: f64,
    pub tp_rejected_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSection {
    pub score: ScoreKind,
    pub auroc: f64,
    pub auprc: f64,
    pub roc: CurveReport,
    pub pr: CurveReport,
    pub rejection: Option<RejectionSection>,
}

/// Full classification-uncertainty report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub tool_version: String,
    pub input_digest: String,
    pub n_records: usize,
    pub n_classes: usize,
    pub positives: usize,
    pub negatives: usize,
    pub scores: Vec<ScoreSection>,
}

#[derive(Debug, Clone)]
pub struct ClassificationReportOptions {
    pub kinds: Vec<ScoreKind>,
    pub with_rejection: bool,
}

/// Scores the dataset with every requested kind and builds both curves per
/// kind, optionally with the Youden rejection analysis.
pub fn build_classification_report(
    dataset: &Dataset<crate::classification::ClassificationRecord>,
    input_digest: &str,
    opts: &ClassificationReportOptions,
) -> Result<ClassificationReport> {
    let mut sections = Vec::with_capacity(opts.kinds.len());
    let mut positives = 0;
    let mut negatives = 0;
    for &kind in &opts.kinds {
        let scored = score_records(&dataset.records, kind)?;
        let roc = roc_curve(&scored)?;
        let pr = pr_curve(&scored)?;
        positives = roc.positives;
        negatives = roc.negatives;
        let rejection = if opts.with_rejection {
            let threshold = crate::classification::youden_threshold(&roc)?;
            let (fn_frac, tp_frac) = rejection_report(&scored, threshold);
            Some(RejectionSection {
                threshold,
                fn_rejected_frac: fn_frac,
                tp_rejected_frac: tp_frac,
            })
        } else {
            None
        };
        sections.push(ScoreSection {
            score: kind,
            auroc: roc.auc,
            auprc: pr.auc,
            roc,
            pr,
            rejection,
        });
    }
    Ok(ClassificationReport {
        tool_version: tool_version().to_string(),
        input_digest: input_digest.to_string(),
        n_records: dataset.records.len(),
        n_classes: dataset.dim,
        positives,
        negatives,
        scores: sections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    CsvBundle,
}

/// Serializes a report to pretty JSON. Non-finite thresholds inside curve
/// points are the only non-finite floats a report can contain and they are
/// mapped through a string sentinel by the curve serializer.
pub fn to_json_string<T: Serialize>(report: &T) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))
}

/// Writes a regression report. `Json` writes one file; `CsvBundle` treats
/// `path` as a directory and writes report.json plus per-section CSVs.
pub fn write_regression_report(
    report: &RealismReport,
    path: &Path,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Json => write_string_atomic(path, &to_json_string(report)?),
        ReportFormat::CsvBundle => {
            std::fs::create_dir_all(path)?;
            write_string_atomic(&path.join("report.json"), &to_json_string(report)?)?;
            write_hist_csv(&path.join("mgt_hist.csv"), &report.mgt.hist)?;
            if let Some(ms) = &report.msample {
                write_hist_csv(&path.join("msample_hist.csv"), &ms.hist)?;
                if let Some(rescaled) = &ms.rescaled_hist {
                    write_hist_csv(&path.join("msample_rescaled_hist.csv"), rescaled)?;
                }
            }
            if let Some(angle) = &report.angle {
                let mut s = String::from("bin_lo,bin_hi,count,ref_cdf_hi\n");
                for b in &angle.hist {
                    s.push_str(&format!("{},{},{},{}\n", b.lo, b.hi, b.count, b.ref_cdf_hi));
                }
                write_string_atomic(&path.join("angle_hist.csv"), &s)?;
            }
            if let Some(mono) = &report.monotonicity {
                let mut s =
                    String::from("score_lo,score_hi,n,mean_abs_error,q99_error,gauss_bound\n");
                for r in &mono.rows {
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.score_lo, r.score_hi, r.n, r.mean_abs_error, r.q99_error, r.gauss_bound
                    ));
                }
                write_string_atomic(&path.join("monotonicity.csv"), &s)?;
            }
            Ok(())
        }
    }
}

/// Writes a classification report; same layout convention.
pub fn write_classification_report(
    report: &ClassificationReport,
    path: &Path,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Json => write_string_atomic(path, &to_json_string(report)?),
        ReportFormat::CsvBundle => {
            std::fs::create_dir_all(path)?;
            write_string_atomic(&path.join("report.json"), &to_json_string(report)?)?;
            let mut aucs = String::from("score,auroc,auprc\n");
            let mut rejections = String::new();
            for s in &report.scores {
                aucs.push_str(&format!("{},{},{}\n", s.score, s.auroc, s.auprc));
                write_curve_csv(&path.join(format!("roc_{}.csv", s.score)), &s.roc)?;
                write_curve_csv(&path.join(format!("pr_{}.csv", s.score)), &s.pr)?;
                if let Some(r) = &s.rejection {
                    rejections.push_str(&format!(
                        "{},{},{},{}\n",
                        s.score, r.threshold, r.fn_rejected_frac, r.tp_rejected_frac
                    ));
                }
            }
            write_string_atomic(&path.join("aucs.csv"), &aucs)?;
            if !rejections.is_empty() {
                let full =
                    format!("score,threshold,fn_rejected_frac,tp_rejected_frac\n{rejections}");
                write_string_atomic(&path.join("rejection.csv"), &full)?;
            }
            Ok(())
        }
    }
}

fn write_hist_csv(path: &Path, hist: &[HistBin]) -> Result<()> {
    let mut s = String::from("bin_lo,bin_hi,count\n");
    for b in hist {
        s.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
    }
    write_string_atomic(path, &s)
}

/// Curve CSV: threshold,x,y per point. Rust's float Display writes the
/// origin threshold as the "inf" sentinel.
fn write_curve_csv(path: &Path, curve: &CurveReport) -> Result<()> {
    let mut s = String::from("threshold,x,y\n");
    for p in &curve.points {
        s.push_str(&format!("{},{},{}\n", p.threshold, p.x, p.y));
    }
    write_string_atomic(path, &s)
}

pub fn write_string_atomic(path: &Path, contents: &str) -> Result<()> {
    write_bytes_atomic(path, |w| {
        w.write_all(contents.as_bytes())?;
        Ok(())
    })
}
