//! Regression-side realism analyses: ground-truth and intra-sample
//! Mahalanobis sets, the chi-squared realism test, variance rescaling,
//! covariance-orientation angles against the solid-angle reference law,
//! score-binned error tables, and the NLL-vs-realism grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, eigen_sym, norm};
use crate::special::{chi2_cdf, chi2_quantile, gamma_q, ln_gamma, two_sided_z};
use crate::stats::{
    empirical_quantile, ks_test, mahalanobis_sq_with, sample_summary, variance, GaussianSummary,
    GofResult,
};

/// One regression test case: the ground truth plus either the raw predictive
/// sample or an externally supplied Gaussian summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRecord {
    pub y_gt: Vec<f64>,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Raw(Vec<Vec<f64>>),
    Summary(GaussianSummary),
}

impl RegressionRecord {
    pub fn dim(&self) -> usize {
        self.y_gt.len()
    }

    /// The record's Gaussian summary: fitted from raw samples, or the
    /// supplied one.
    pub fn summary(&self) -> Result<GaussianSummary> {
        match &self.payload {
            Payload::Raw(samples) => sample_summary(samples),
            Payload::Summary(s) => Ok(s.clone()),
        }
    }
}

/// A set of squared Mahalanobis distances tagged with its dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MahalanobisSet {
    pub values: Vec<f64>,
    pub dim: usize,
}

/// Verdict of the realism test at a given significance level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Realistic,
    NotRealistic,
}

fn check_dims(records: &[RegressionRecord]) -> Result<usize> {
    let Some(first) = records.first() else {
        return Err(Error::EmptySample);
    };
    let d = first.dim();
    for r in records {
        if r.dim() != d {
            return Err(Error::MixedDimensions {
                first: d,
                other: r.dim(),
            });
        }
        if let Payload::Raw(samples) = &r.payload {
            for row in samples {
                if row.len() != d {
                    return Err(Error::MixedDimensions {
                        first: d,
                        other: row.len(),
                    });
                }
            }
        }
    }
    Ok(d)
}

/// Squared Mahalanobis distances of the ground truths under each record's
/// summary. Records with degenerate covariances are skipped; the skip count
/// is returned alongside the set.
pub fn mgt_set(records: &[RegressionRecord]) -> Result<(MahalanobisSet, usize)> {
    let d = check_dims(records)?;
    let mut values = Vec::with_capacity(records.len());
    let mut skipped = 0usize;
    for r in records {
        let summary = match r.summary() {
            Ok(s) => s,
            Err(Error::DegenerateSample) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let l = match cholesky(&summary.cov) {
            Ok(l) => l,
            Err(Error::NotPositiveDefinite { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        values.push(mahalanobis_sq_with(&l, &summary.mean, &r.y_gt)?);
    }
    if values.is_empty() {
        return Err(Error::AllRecordsDegenerate);
    }
    Ok((MahalanobisSet { values, dim: d }, skipped))
}

/// Intra-sample squared Mahalanobis distances: every sample member measured
/// against its own record's fitted summary. By default the member is
/// included in the summary; `leave_one_out` refits without it.
///
/// All records must carry raw samples. Degenerate records are skipped and
/// counted, mirroring [`mgt_set`].
pub fn msample_set(
    records: &[RegressionRecord],
    leave_one_out: bool,
) -> Result<(MahalanobisSet, usize)> {
    let d = check_dims(records)?;
    for (index, r) in records.iter().enumerate() {
        if !matches!(r.payload, Payload::Raw(_)) {
            return Err(Error::NoRawSamples { index });
        }
    }
    let mut values = Vec::new();
    let mut skipped = 0usize;
    for r in records {
        let Payload::Raw(samples) = &r.payload else {
            unreachable!()
        };
        if leave_one_out {
            match msample_loo_record(samples, &mut values) {
                Ok(()) => {}
                Err(Error::DegenerateSample) => skipped += 1,
                Err(e) => return Err(e),
            }
        } else {
            match sample_summary(samples) {
                Ok(summary) => {
                    let l = match cholesky(&summary.cov) {
                        Ok(l) => l,
                        Err(Error::NotPositiveDefinite { .. }) => {
                            skipped += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    for member in samples {
                        values.push(mahalanobis_sq_with(&l, &summary.mean, member)?);
                    }
                }
                Err(Error::DegenerateSample) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    if values.is_empty() {
        return Err(Error::AllRecordsDegenerate);
    }
    Ok((MahalanobisSet { values, dim: d }, skipped))
}

fn msample_loo_record(samples: &[Vec<f64>], out: &mut Vec<f64>) -> Result<()> {
    let k = samples.len();
    let mut record_values = Vec::with_capacity(k);
    for held_out in 0..k {
        let rest: Vec<Vec<f64>> = samples
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held_out)
            .map(|(_, s)| s.clone())
            .collect();
        let summary = sample_summary(&rest)?;
        let l = match cholesky(&summary.cov) {
            Ok(l) => l,
            Err(Error::NotPositiveDefinite { .. }) => return Err(Error::DegenerateSample),
            Err(e) => return Err(e),
        };
        record_values.push(mahalanobis_sq_with(&l, &summary.mean, &samples[held_out])?);
    }
    out.extend(record_values);
    Ok(())
}

/// KS test of a Mahalanobis set against chi-squared(dim); the verdict is
/// `Realistic` iff the p-value is at least `alpha`.
pub fn realism_test(mset: &MahalanobisSet, alpha: f64) -> Result<(GofResult, Verdict)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let d = mset.dim as u32;
    let gof = ks_test(&mset.values, |x| chi2_cdf(d, x.max(0.0)).unwrap_or(1.0))?;
    let verdict = if gof.p_value >= alpha {
        Verdict::Realistic
    } else {
        Verdict::NotRealistic
    };
    Ok((gof, verdict))
}

/// Multiplies the set by c = sqrt(target_var / var(values)) so its unbiased
/// variance becomes `target_var`. Pure scaling keeps all values nonnegative.
pub fn rescale_to_variance(mset: &MahalanobisSet, target_var: f64) -> Result<MahalanobisSet> {
    if !(target_var > 0.0) {
        return Err(Error::InvalidInput(format!(
            "target variance must be positive, got {target_var}"
        )));
    }
    let var = variance(&mset.values)?;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let c = (target_var / var).sqrt();
    Ok(MahalanobisSet {
        values: mset.values.iter().map(|v| v * c).collect(),
        dim: mset.dim,
    })
}

/// Skip counters reported by [`residual_records`] and [`angle_set`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleSkips {
    pub degenerate: usize,
    pub zero_error: usize,
}

/// Per-record residual diagnostics: the estimation error mu - y_gt, the two
/// scalar covariance scores, and the orientation angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub error: Vec<f64>,
    /// det(Sigma), via the Cholesky factor.
    pub score_det: f64,
    /// Largest diagonal entry of Sigma.
    pub score_maxdiag: f64,
    /// Angle between the top eigenvector of Sigma and the error, folded to
    /// [0, pi/2] via |cos| to absorb the eigenvector sign ambiguity.
    pub angle: f64,
}

/// Builds residual diagnostics for every usable record. Records with a
/// degenerate covariance or an error norm below 1e-12 (no direction) are
/// skipped and counted.
pub fn residual_records(records: &[RegressionRecord]) -> Result<(Vec<ResidualRecord>, AngleSkips)> {
    check_dims(records)?;
    let mut out = Vec::with_capacity(records.len());
    let mut skips = AngleSkips::default();
    for r in records {
        let summary = match r.summary() {
            Ok(s) => s,
            Err(Error::DegenerateSample) => {
                skips.degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let det = match cholesky(&summary.cov) {
            Ok(l) => l.determinant(),
            Err(Error::NotPositiveDefinite { .. }) => {
                skips.degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let eig = match eigen_sym(&summary.cov) {
            Ok(e) => e,
            Err(Error::ConvergenceFailure) => {
                skips.degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let error: Vec<f64> = summary
            .mean
            .iter()
            .zip(&r.y_gt)
            .map(|(m, y)| m - y)
            .collect();
        let e_norm = norm(&error);
        if e_norm < 1e-12 {
            skips.zero_error += 1;
            continue;
        }
        let cos = (dot(&eig.vectors[0], &error).abs() / e_norm).clamp(0.0, 1.0);
        out.push(ResidualRecord {
            error,
            score_det: det,
            score_maxdiag: summary.cov.max_diag(),
            angle: cos.acos(),
        });
    }
    if out.is_empty() {
        return Err(Error::AllRecordsDegenerate);
    }
    Ok((out, skips))
}

/// Orientation angles of all usable records; see [`residual_records`] for
/// the skip rules.
pub fn angle_set(records: &[RegressionRecord]) -> Result<(Vec<f64>, AngleSkips)> {
    let (residuals, skips) = residual_records(records)?;
    Ok((residuals.into_iter().map(|r| r.angle).collect(), skips))
}

/// CDF of the folded solid-angle reference law on [0, pi/2]: the density is
/// proportional to sin^(d-2)(alpha), the law of the angle between a fixed
/// axis and an isotropic direction in d dimensions. Evaluated by adaptive
/// Simpson integration; the normalization 2/B((d-1)/2, 1/2) is cached per d.
pub fn solid_angle_cdf(d: usize, alpha: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidInput(format!(
            "solid-angle law needs d >= 2, got {d}"
        )));
    }
    if !alpha.is_finite() || alpha < 0.0 || alpha > std::f64::consts::FRAC_PI_2 + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in [0, pi/2], got {alpha}"
        )));
    }
    let alpha = alpha.min(std::f64::consts::FRAC_PI_2);
    let norm_const = solid_angle_norm(d);
    let pow = (d - 2) as i32;
    let integral = adaptive_simpson(|t| t.sin().powi(pow), 0.0, alpha, 1e-12, 40);
    Ok((norm_const * integral).clamp(0.0, 1.0))
}

/// 2 / B((d-1)/2, 1/2), cached per dimension.
fn solid_angle_norm(d: usize) -> f64 {
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<Vec<(usize, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(&(_, v)) = guard.iter().find(|(k, _)| *k == d) {
        return v;
    }
    let a = (d as f64 - 1.0) / 2.0;
    let ln_beta = ln_gamma(a) + ln_gamma(0.5) - ln_gamma(a + 0.5);
    let v = 2.0 / ln_beta.exp();
    guard.push((d, v));
    v
}

fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: u32,
) -> f64 {
    if a == b {
        return 0.0;
    }
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    let tol = rel_tol * whole.abs().max(1e-30);
    recurse(&f, a, fa, b, fb, whole, m, fm, tol, max_depth)
}

/// Scalar uncertainty score derived from the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovScore {
    /// Determinant of the covariance.
    Det,
    /// Largest diagonal entry of the covariance.
    MaxDiag,
}

impl std::fmt::Display for CovScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CovScore::Det => write!(f, "det"),
            CovScore::MaxDiag => write!(f, "maxdiag"),
        }
    }
}

/// One row of the score-binned error table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub score_lo: f64,
    pub score_hi: f64,
    pub n: usize,
    pub mean_abs_error: f64,
    pub q99_error: f64,
    /// z(p) times the pooled per-component sigma of the bin
    /// (RMS of the error norms divided by sqrt(d)).
    pub gauss_bound: f64,
}

/// Options for [`monotonicity_table`].
#[derive(Debug, Clone, Copy)]
pub struct MonotonicityOptions {
    pub n_bins: usize,
    pub quantile_p: f64,
    /// When set, the error scalar is the pooled per-component |e_j| instead
    /// of the Euclidean norm of e.
    pub per_component: bool,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        Self {
            n_bins: 10,
            quantile_p: 0.99,
            per_component: false,
        }
    }
}

/// Sorts records by a covariance-derived score, splits them into
/// equal-population bins, and reports per-bin error statistics next to the
/// Gaussian reference bound z(p) * RMS(|e|)/sqrt(d).
pub fn monotonicity_table(
    records: &[RegressionRecord],
    score: CovScore,
    opts: &MonotonicityOptions,
) -> Result<Vec<BinRow>> {
    if opts.n_bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 bins, got {}",
            opts.n_bins
        )));
    }
    let d = check_dims(records)?;
    let z = two_sided_z(opts.quantile_p)?;

    // (score, error vector) per usable record
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(records.len());
    for r in records {
        let summary = match r.summary() {
            Ok(s) => s,
            Err(Error::DegenerateSample) => continue,
            Err(e) => return Err(e),
        };
        let s = match score {
            CovScore::Det => match cholesky(&summary.cov) {
                Ok(l) => l.determinant(),
                Err(Error::NotPositiveDefinite { .. }) => continue,
                Err(e) => return Err(e),
            },
            CovScore::MaxDiag => summary.cov.max_diag(),
        };
        let e: Vec<f64> = summary
            .mean
            .iter()
            .zip(&r.y_gt)
            .map(|(m, y)| m - y)
            .collect();
        scored.push((s, e));
    }
    let usable = scored.len();
    if usable < opts.n_bins * 5 {
        return Err(Error::TooFewRecords {
            need: opts.n_bins * 5,
            got: usable,
        });
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut rows = Vec::with_capacity(opts.n_bins);
    for b in 0..opts.n_bins {
        let lo = b * usable / opts.n_bins;
        let hi = (b + 1) * usable / opts.n_bins;
        let seg = &scored[lo..hi];
        let norms: Vec<f64> = seg.iter().map(|(_, e)| norm(e)).collect();
        let rms = (norms.iter().map(|x| x * x).sum::<f64>() / norms.len() as f64).sqrt();
        let pooled_sigma = rms / (d as f64).sqrt();
        let errors: Vec<f64> = if opts.per_component {
            seg.iter()
                .flat_map(|(_, e)| e.iter().map(|x| x.abs()))
                .collect()
        } else {
            norms.clone()
        };
        rows.push(BinRow {
            score_lo: seg.first().unwrap().0,
            score_hi: seg.last().unwrap().0,
            n: seg.len(),
            mean_abs_error: errors.iter().sum::<f64>() / errors.len() as f64,
            q99_error: empirical_quantile(&errors, opts.quantile_p)?,
            gauss_bound: z * pooled_sigma,
        });
    }
    Ok(rows)
}

/// Expected mean of ||e|| beyond its own p-quantile if e were Gaussian with
/// per-component standard deviation `sigma` in d dimensions:
/// sigma * E[chi_d | chi_d > chi_d^-1(p)].
pub fn gaussian_tail_mean(sigma: f64, d: usize, p: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let df = d as u32;
    let t_sq = chi2_quantile(df, p)?;
    let half = t_sq / 2.0;
    let dd = d as f64;
    let num = (2.0f64).sqrt()
        * (ln_gamma((dd + 1.0) / 2.0) - ln_gamma(dd / 2.0)).exp()
        * gamma_q((dd + 1.0) / 2.0, half)?;
    let den = gamma_q(dd / 2.0, half)?;
    Ok(sigma * num / den)
}

/// One point of the NLL-vs-realism grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NllGridPoint {
    pub err: f64,
    pub sigma: f64,
    /// log(sigma^2)/2 + err^2 / (2 sigma^2), additive constant dropped.
    pub nll: f64,
    /// |err^2/sigma^2 - 1|, zero exactly on the ray sigma = |err|.
    pub realism: f64,
}

/// Evaluates the 1D Gaussian negative log-likelihood and the realism
/// deviation over a rectangular (err, sigma) grid with `steps` points per
/// axis, inclusive endpoints.
pub fn nll_grid(
    err_range: (f64, f64),
    sigma_range: (f64, f64),
    steps: usize,
) -> Result<Vec<NllGridPoint>> {
    if steps < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 steps per axis, got {steps}"
        )));
    }
    if !(sigma_range.0 > 0.0) || sigma_range.1 < sigma_range.0 {
        return Err(Error::InvalidInput(
            "sigma range must be positive and ordered".into(),
        ));
    }
    if err_range.1 < err_range.0 {
        return Err(Error::InvalidInput("err range must be ordered".into()));
    }
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (steps - 1) as f64;
    let mut grid = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        let err = lin(err_range.0, err_range.1, i);
        for j in 0..steps {
            let sigma = lin(sigma_range.0, sigma_range.1, j);
            let ratio = err * err / (sigma * sigma);
            grid.push(NllGridPoint {
                err,
                sigma,
                nll: (sigma * sigma).ln() / 2.0 + ratio / 2.0,
                realism: (ratio - 1.0).abs(),
            });
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpdMatrix;

    fn summary_record(y_gt: Vec<f64>, mean: Vec<f64>, cov: SpdMatrix) -> RegressionRecord {
        RegressionRecord {
            y_gt,
            payload: Payload::Summary(GaussianSummary::new(mean, cov, 0).unwrap()),
        }
    }

    #[test]
    fn mgt_zero_for_exact_prediction() {
        let r = summary_record(vec![1.0; 4], vec![1.0; 4], SpdMatrix::identity(4));
        let (set, skipped) = mgt_set(&[r]).unwrap();
        assert_eq!(set.values, vec![0.0]);
        assert_eq!(set.dim, 4);
        assert_eq!(skipped, 0);
    }

    #[test]
    fn mgt_detects_mixed_dimensions() {
        let a = summary_record(vec![0.0; 2], vec![0.0; 2], SpdMatrix::identity(2));
        let b = summary_record(vec![0.0; 3], vec![0.0; 3], SpdMatrix::identity(3));
        assert!(matches!(
            mgt_set(&[a, b]),
            Err(Error::MixedDimensions { first: 2, other: 3 })
        ));
    }

    #[test]
    fn msample_rejects_summary_payload() {
        let r = summary_record(vec![0.0; 2], vec![0.0; 2], SpdMatrix::identity(2));
        assert!(matches!(
            msample_set(&[r], false),
            Err(Error::NoRawSamples { index: 0 })
        ));
    }

    #[test]
    fn msample_all_equal_samples_degenerate() {
        let r = RegressionRecord {
            y_gt: vec![0.0, 0.0],
            payload: Payload::Raw(vec![vec![1.0, 2.0]; 6]),
        };
        assert!(matches!(
            msample_set(&[r], false),
            Err(Error::AllRecordsDegenerate)
        ));
    }

    #[test]
    fn msample_orthogonal_cross_constant() {
        // d=2, K=4 points at (+-r, 0), (0, +-r): every intra-sample distance
        // equals (K-1)/2, the mean of the exact finite-K law.
        let r = 3.0;
        let rec = RegressionRecord {
            y_gt: vec![0.0, 0.0],
            payload: Payload::Raw(vec![
                vec![r, 0.0],
                vec![-r, 0.0],
                vec![0.0, r],
                vec![0.0, -r],
            ]),
        };
        let (set, _) = msample_set(&[rec], false).unwrap();
        assert_eq!(set.values.len(), 4);
        for v in &set.values {
            assert!((v - 1.5).abs() < 1e-12, "got {v}");
        }

        // d=4, K=8 cross: each distance is (K-1)/2 = 3.5
        let mut pts = Vec::new();
        for i in 0..4 {
            for s in [1.0f64, -1.0] {
                let mut p = vec![0.0; 4];
                p[i] = s * 2.0;
                pts.push(p);
            }
        }
        let rec = RegressionRecord {
            y_gt: vec![0.0; 4],
            payload: Payload::Raw(pts),
        };
        let (set, _) = msample_set(&[rec], false).unwrap();
        for v in &set.values {
            assert!((v - 3.5).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn msample_matches_bruteforce_inverse() {
        // independent oracle: explicit Gauss-Jordan inverse of the covariance
        let samples = vec![
            vec![0.1, -0.4],
            vec![1.3, 0.2],
            vec![-0.7, 0.9],
            vec![0.5, -1.1],
            vec![2.0, 0.3],
            vec![-0.2, 0.8],
        ];
        let rec = RegressionRecord {
            y_gt: vec![0.0, 0.0],
            payload: Payload::Raw(samples.clone()),
        };
        let (set, _) = msample_set(&[rec], false).unwrap();

        let k = samples.len() as f64;
        let mean: Vec<f64> = (0..2)
            .map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / k)
            .collect();
        let mut c = [[0.0f64; 2]; 2];
        for s in &samples {
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += (s[i] - mean[i]) * (s[j] - mean[j]);
                }
            }
        }
        for row in c.iter_mut() {
            for v in row.iter_mut() {
                *v /= k - 1.0;
            }
        }
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let inv = [
            [c[1][1] / det, -c[0][1] / det],
            [-c[1][0] / det, c[0][0] / det],
        ];
        for (v, s) in set.values.iter().zip(&samples) {
            let e = [s[0] - mean[0], s[1] - mean[1]];
            let expect = e[0] * (inv[0][0] * e[0] + inv[0][1] * e[1])
                + e[1] * (inv[1][0] * e[0] + inv[1][1] * e[1]);
            assert!((v - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn rescale_hand_example() {
        let mset = MahalanobisSet {
            values: vec![1.0, 3.0],
            dim: 1,
        };
        let out = rescale_to_variance(&mset, 4.0).unwrap();
        let c = 2.0f64.sqrt();
        assert!((out.values[0] - c).abs() < 1e-12);
        assert!((out.values[1] - 3.0 * c).abs() < 1e-12);
        assert!((variance(&out.values).unwrap() - 4.0).abs() < 1e-9 * 4.0);
    }

    #[test]
    fn rescale_identity_when_target_matches() {
        let mset = MahalanobisSet {
            values: vec![1.0, 2.0, 5.0],
            dim: 1,
        };
        let var = variance(&mset.values).unwrap();
        let out = rescale_to_variance(&mset, var).unwrap();
        for (a, b) in out.values.iter().zip(&mset.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_constant_set_errors() {
        let mset = MahalanobisSet {
            values: vec![2.0; 5],
            dim: 1,
        };
        assert!(matches!(
            rescale_to_variance(&mset, 1.0),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn angle_aligned_and_orthogonal() {
        let cov = SpdMatrix::from_rows(&[
            vec![4.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        // error along the top eigenvector
        let aligned = summary_record(vec![-1.0, 0.0, 0.0, 0.0], vec![0.0; 4], cov.clone());
        let (angles, _) = angle_set(&[aligned]).unwrap();
        assert!(angles[0].abs() < 1e-9);
        // error orthogonal to it
        let ortho = summary_record(vec![0.0, -1.0, 0.0, 0.0], vec![0.0; 4], cov);
        let (angles, _) = angle_set(&[ortho]).unwrap();
        assert!((angles[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn angle_skips_zero_error() {
        let cov = SpdMatrix::identity(2);
        let zero = summary_record(vec![1.0, 1.0], vec![1.0, 1.0], cov.clone());
        let fine = summary_record(vec![0.0, 0.0], vec![1.0, 0.0], cov);
        let (angles, skips) = angle_set(&[zero, fine]).unwrap();
        assert_eq!(angles.len(), 1);
        assert_eq!(skips.zero_error, 1);
    }

    #[test]
    fn solid_angle_full_support_and_uniform_d2() {
        for d in [2, 3, 4, 8] {
            let v = solid_angle_cdf(d, std::f64::consts::FRAC_PI_2).unwrap();
            assert!((v - 1.0).abs() < 1e-9, "d={d}: {v}");
        }
        let v = solid_angle_cdf(2, std::f64::consts::FRAC_PI_4).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solid_angle_d4_closed_form() {
        // (4/pi) * int_0^{pi/4} sin^2 = 0.5 - 1/pi
        let v = solid_angle_cdf(4, std::f64::consts::FRAC_PI_4).unwrap();
        let expect = 0.5 - 1.0 / std::f64::consts::PI;
        assert!((v - expect).abs() < 1e-9);
    }

    #[test]
    fn nll_grid_substitutions() {
        let grid = nll_grid((0.0, 2.0), (1.0, 2.0), 3).unwrap();
        assert_eq!(grid.len(), 9);
        // err = 0, sigma = 1 -> nll 0, realism 1
        let p = grid
            .iter()
            .find(|p| p.err == 0.0 && p.sigma == 1.0)
            .unwrap();
        assert_eq!(p.nll, 0.0);
        assert_eq!(p.realism, 1.0);
        // err = 2, sigma = 1 -> nll 2, realism 3
        let p = grid
            .iter()
            .find(|p| p.err == 2.0 && p.sigma == 1.0)
            .unwrap();
        assert!((p.nll - 2.0).abs() < 1e-15);
        assert!((p.realism - 3.0).abs() < 1e-15);
        // realism vanishes on the ray err = sigma
        let p = grid
            .iter()
            .find(|p| p.err == 2.0 && p.sigma == 2.0)
            .unwrap();
        assert!(p.realism.abs() < 1e-15);
    }

    #[test]
    fn residual_records_expose_scores_and_angle() {
        let cov = SpdMatrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let rec = summary_record(vec![0.0, -2.0], vec![1.0, 0.0], cov);
        let (residuals, skips) = residual_records(&[rec]).unwrap();
        assert_eq!(skips, AngleSkips::default());
        let r = &residuals[0];
        assert_eq!(r.error, vec![1.0, 2.0]);
        assert!((r.score_det - 4.0).abs() < 1e-12);
        assert!((r.score_maxdiag - 4.0).abs() < 1e-12);
        // angle between e1 and (1, 2): arccos(1/sqrt(5))
        assert!((r.angle - (1.0 / 5.0f64.sqrt()).acos()).abs() < 1e-12);
        assert!(r.angle >= 0.0 && r.angle <= std::f64::consts::FRAC_PI_2);
        assert!(r.score_det > 0.0 && r.score_maxdiag > 0.0);
    }

    #[test]
    fn gaussian_tail_mean_matches_quadrature_constant() {
        // E[chi_4 | chi_4 > q99] = 3.93275550283102, from direct numerical
        // integration of the chi(4) density
        let v = gaussian_tail_mean(1.0, 4, 0.99).unwrap();
        assert!((v - 3.932_755_502_831_02).abs() < 1e-9, "{v}");
        // scales linearly in sigma
        let w = gaussian_tail_mean(2.5, 4, 0.99).unwrap();
        assert!((w - 2.5 * v).abs() < 1e-12);
    }

    #[test]
    fn mgt_propagates_too_few_samples() {
        let rec = RegressionRecord {
            y_gt: vec![0.0, 0.0],
            payload: Payload::Raw(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]),
        };
        assert!(matches!(
            mgt_set(&[rec]),
            Err(Error::TooFewSamples { need: 4, got: 3 })
        ));
    }

    #[test]
    fn monotonicity_needs_enough_records() {
        let recs: Vec<RegressionRecord> = (0..9)
            .map(|i| summary_record(vec![i as f64, 0.0], vec![0.0, 0.0], SpdMatrix::identity(2)))
            .collect();
        let opts = MonotonicityOptions {
            n_bins: 2,
            ..Default::default()
        };
        assert!(matches!(
            monotonicity_table(&recs, CovScore::Det, &opts),
            Err(Error::TooFewRecords { need: 10, got: 9 })
        ));
    }
}
