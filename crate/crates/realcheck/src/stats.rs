//! Sample moments, Gaussian summaries of prediction samples, the squared
//! Mahalanobis distance, the one-sample Kolmogorov-Smirnov test, and
//! quantile/tail-mean estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholeskyFactor, SpdMatrix};
use crate::special::kolmogorov_q;

/// Jitter ladder for near-singular sample covariances: each epsilon scales
/// trace(cov)/d and is added to the diagonal before retrying the Cholesky.
const JITTER_LADDER: [f64; 4] = [1e-12, 1e-10, 1e-8, 1e-6];

/// Mean vector plus covariance summarizing a predictive sample.
///
/// `count` is the number of samples the summary was fitted to, or 0 when the
/// summary was supplied externally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub mean: Vec<f64>,
    pub cov: SpdMatrix,
    pub count: usize,
}

impl GaussianSummary {
    pub fn new(mean: Vec<f64>, cov: SpdMatrix, count: usize) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("summary mean must be finite".into()));
        }
        Ok(Self { mean, cov, count })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Squared Mahalanobis distance (y - mu)' Sigma^-1 (y - mu), evaluated via a
/// Cholesky solve. Zero exactly when y equals the mean.
pub fn mahalanobis_sq(summary: &GaussianSummary, y: &[f64]) -> Result<f64> {
    let l = cholesky(&summary.cov)?;
    mahalanobis_sq_with(&l, &summary.mean, y)
}

/// Same as [`mahalanobis_sq`] with a pre-computed factor, for batch callers.
pub fn mahalanobis_sq_with(l: &CholeskyFactor, mean: &[f64], y: &[f64]) -> Result<f64> {
    if y.len() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            got: y.len(),
        });
    }
    let resid: Vec<f64> = y.iter().zip(mean).map(|(a, b)| a - b).collect();
    let z = l.forward_solve(&resid);
    Ok(z.iter().map(|v| v * v).sum())
}

/// Fits a Gaussian to a K x d sample: arithmetic mean and unbiased covariance
/// (divisor K - 1). Requires K >= d + 2 so the covariance can be full rank.
///
/// If the covariance fails to factor, escalating diagonal jitter
/// (eps * trace/d, eps from 1e-12 to 1e-6) is applied; if it is still
/// singular the sample is reported as degenerate.
pub fn sample_summary(samples: &[Vec<f64>]) -> Result<GaussianSummary> {
    let k = samples.len();
    if k == 0 {
        return Err(Error::EmptySample);
    }
    let d = samples[0].len();
    if d == 0 {
        return Err(Error::InvalidInput("zero-dimensional samples".into()));
    }
    if k < d + 2 {
        return Err(Error::TooFewSamples {
            need: d + 2,
            got: k,
        });
    }
    for row in samples {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("samples must be finite".into()));
        }
    }

    let mut mean = vec![0.0; d];
    for row in samples {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= k as f64;
    }

    let mut cov = vec![0.0; d * d];
    for row in samples {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (k - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }

    let base = SpdMatrix::from_flat(d, cov)?;
    if cholesky(&base).is_ok() {
        return GaussianSummary::new(mean, base, k);
    }
    let unit = base.trace() / d as f64;
    for eps in JITTER_LADDER {
        let mut jittered = base.clone();
        jittered.bump_diagonal(eps * unit);
        if cholesky(&jittered).is_ok() {
            return GaussianSummary::new(mean, jittered, k);
        }
    }
    Err(Error::DegenerateSample)
}

/// Result of a goodness-of-fit test: KS distance, p-value, sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov-Smirnov test of `values` against the continuous CDF
/// `cdf`. The statistic is the sup distance evaluated at both one-sided steps
/// of the empirical CDF; the p-value uses the asymptotic Kolmogorov tail with
/// the small-sample effective-n correction
/// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D.
pub fn ks_test<F>(values: &[f64], cdf: F) -> Result<GofResult>
where
    F: Fn(f64) -> f64,
{
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("KS sample must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let nf = n as f64;
    let mut d_stat = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x).clamp(0.0, 1.0);
        let upper = (i + 1) as f64 / nf - f;
        let lower = f - i as f64 / nf;
        d_stat = d_stat.max(upper).max(lower);
    }
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d_stat;
    Ok(GofResult {
        statistic: d_stat,
        p_value: kolmogorov_q(lambda),
        n,
    })
}

/// Linear-interpolation quantile with plotting position (k-1)/(n-1)
/// (inclusive endpoints). `q(0.5)` is the median.
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "quantile level must lie in (0,1), got {p}"
        )));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("quantile sample must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        return Ok(sorted[n - 1]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Mean of the values strictly above the `p`-quantile; the maximum when
/// nothing lies above. Always >= the quantile itself.
pub fn tail_mean(values: &[f64], p: f64) -> Result<f64> {
    let q = empirical_quantile(values, p)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for &v in values {
        if v > q {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    } else {
        Ok(sum / count as f64)
    }
}

/// First four moments of a value set: mean, unbiased variance, and
/// standardized skewness / kurtosis (kurtosis is plain, not excess:
/// a chi-squared(d) has kurtosis 3 + 12/d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = values.len();
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    Ok(SummaryStats {
        n,
        mean,
        variance,
        skewness,
        kurtosis,
    })
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: values.len(),
        });
    }
    Ok(summary_stats(values)?.variance)
}
