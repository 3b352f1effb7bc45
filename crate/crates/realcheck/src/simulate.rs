//! Seeded generators of regression and classification records under known
//! calibration regimes. Every statistical claim the toolkit tests has a
//! fixture here with the defect (or its absence) built in by construction.
//!
//! Determinism contract: one ChaCha8 stream per record index on top of the
//! regime seed, so identical regimes produce byte-identical datasets on any
//! platform and generation order is irrelevant. Gaussians come from
//! Box-Muller on the raw 64-bit stream, chi-squared draws from
//! Marsaglia-Tsang gamma sampling, never from platform math libraries with
//! unspecified distribution shape.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classification::ClassificationRecord;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, eigen_sym, SpdMatrix};
use crate::regression::{Payload, RegressionRecord};
use crate::stats::{sample_summary, GaussianSummary};

/// Deterministic draw source: uniform, Gaussian, gamma.
pub(crate) struct DrawSource {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl DrawSource {
    /// One independent stream per (seed, record index).
    pub(crate) fn for_record(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self {
            rng,
            spare_normal: None,
        }
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub(crate) fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, m), rejection-sampled to stay unbiased.
    pub(crate) fn uniform_int(&mut self, m: u64) -> u64 {
        debug_assert!(m > 0);
        let bound = u64::MAX - (u64::MAX % m);
        loop {
            let x = self.rng.next_u64();
            if x < bound {
                return x % m;
            }
        }
    }

    /// Standard normal via Box-Muller; the sine mate is buffered.
    pub(crate) fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub(crate) fn normal_vec(&mut self, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.normal()).collect()
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang, boosted for shape < 1.
    pub(crate) fn gamma(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            let u = 1.0 - self.uniform();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u = 1.0 - self.uniform();
            if u < 1.0 - 0.0331 * x.powi(4) {
                return d * v;
            }
            if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Chi-squared with `nu` (possibly fractional) degrees of freedom.
    pub(crate) fn chi2(&mut self, nu: f64) -> f64 {
        2.0 * self.gamma(nu / 2.0)
    }

    /// Random rotation: modified Gram-Schmidt on a Gaussian matrix.
    /// Returns the columns, each a unit vector, mutually orthogonal.
    fn rotation(&mut self, d: usize) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = (0..d).map(|_| self.normal_vec(d)).collect();
        for i in 0..d {
            for j in 0..i {
                let proj: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                for k in 0..d {
                    cols[i][k] -= proj * cols[j][k];
                }
            }
            let n: f64 = cols[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in cols[i].iter_mut() {
                *x /= n;
            }
        }
        cols
    }

    /// Random SPD matrix: eigenvalues log-uniform over two decades (so the
    /// condition number stays at or below 100), random rotation.
    fn random_spd(&mut self, d: usize) -> SpdMatrix {
        let evs: Vec<f64> = (0..d)
            .map(|_| 10f64.powf(-1.0 + 2.0 * self.uniform()))
            .collect();
        let q = self.rotation(d);
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for (k, ev) in evs.iter().enumerate() {
                    s += q[k][i] * ev * q[k][j];
                }
                data[i * d + j] = s;
                data[j * d + i] = s;
            }
        }
        SpdMatrix::from_flat(d, data).expect("constructed SPD matrix")
    }
}

/// Calibration defect injected into regression fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    /// The claimed Gaussian is exactly the error law. Records carry the
    /// claim as an exact summary with isotropic covariance, so the
    /// ground-truth Mahalanobis set is chi-squared(d) and the error
    /// direction follows the solid-angle law, both exactly.
    Calibrated,
    /// The mechanism's covariance is `scale` times the true error
    /// covariance (scale < 1 means underestimated uncertainty).
    VarScaled { scale: f64 },
    /// True errors are rotated a quarter turn in the plane spanned by the
    /// claimed covariance's top and bottom eigenvectors, so they point away
    /// from the claimed principal axis.
    Misoriented,
    /// True errors are multivariate Student-t with `nu` degrees of freedom
    /// and the claimed covariance as scale matrix.
    FatTailed { nu: f64 },
    /// True errors are shifted by a constant vector.
    Biased { bias: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRegime {
    pub kind: RegressionKind,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

impl RegressionRegime {
    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidRegime("dimension must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidRegime("record count must be >= 1".into()));
        }
        if self.k < self.d + 2 {
            return Err(Error::InvalidRegime(format!(
                "need k >= d + 2 samples per record (k={}, d={})",
                self.k, self.d
            )));
        }
        match &self.kind {
            RegressionKind::VarScaled { scale } if !(*scale > 0.0) => Err(Error::InvalidRegime(
                format!("variance scale must be positive, got {scale}"),
            )),
            RegressionKind::FatTailed { nu } if !(*nu > 2.0) => Err(Error::InvalidRegime(format!(
                "tail degrees of freedom must exceed 2, got {nu}"
            ))),
            RegressionKind::Biased { bias } if bias.len() != self.d => {
                Err(Error::InvalidRegime(format!(
                    "bias vector has dimension {}, regime has {}",
                    bias.len(),
                    self.d
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Generates a regression dataset under the regime. Record i only consumes
/// stream i, so output is deterministic in (regime, seed).
pub fn gen_regression(regime: &RegressionRegime) -> Result<Vec<RegressionRecord>> {
    regime.validate()?;
    let mut records = Vec::with_capacity(regime.n);
    for i in 0..regime.n {
        let mut src = DrawSource::for_record(regime.seed, i as u64);
        let record = match &regime.kind {
            RegressionKind::Calibrated => gen_calibrated_record(regime.d, &mut src)?,
            kind => gen_raw_record(kind, regime.d, regime.k, &mut src)?,
        };
        records.push(record);
    }
    Ok(records)
}

fn gen_calibrated_record(d: usize, src: &mut DrawSource) -> Result<RegressionRecord> {
    let sigma = 10f64.powf(-0.5 + src.uniform());
    let mu: Vec<f64> = src.normal_vec(d).iter().map(|z| 5.0 * z).collect();
    let y_gt: Vec<f64> = mu
        .iter()
        .zip(src.normal_vec(d))
        .map(|(m, z)| m + sigma * z)
        .collect();
    let mut cov = vec![0.0; d * d];
    for j in 0..d {
        cov[j * d + j] = sigma * sigma;
    }
    Ok(RegressionRecord {
        y_gt,
        payload: Payload::Summary(GaussianSummary::new(mu, SpdMatrix::from_flat(d, cov)?, 0)?),
    })
}

fn gen_raw_record(
    kind: &RegressionKind,
    d: usize,
    k: usize,
    src: &mut DrawSource,
) -> Result<RegressionRecord> {
    let sigma_true = src.random_spd(d);
    let mu_true: Vec<f64> = src.normal_vec(d).iter().map(|z| 5.0 * z).collect();

    let mech_scale = match kind {
        RegressionKind::VarScaled { scale } => scale.sqrt(),
        _ => 1.0,
    };
    let l_true = cholesky(&sigma_true)?;
    let mut samples = Vec::with_capacity(k);
    for _ in 0..k {
        let lz = l_true.apply(&src.normal_vec(d));
        samples.push(
            mu_true
                .iter()
                .zip(lz)
                .map(|(m, v)| m + mech_scale * v)
                .collect::<Vec<f64>>(),
        );
    }

    // The claim is the fitted summary of the emitted sample; the truth is
    // drawn relative to it, which keeps each regime's defect exact instead
    // of blurred by K-sample estimation noise.
    let summary = sample_summary(&samples)?;
    let l_hat = cholesky(&summary.cov)?;
    let eta = src.normal_vec(d);
    let le = l_hat.apply(&eta);

    let error: Vec<f64> = match kind {
        RegressionKind::Calibrated => unreachable!("summary payload handled separately"),
        RegressionKind::VarScaled { scale } => {
            let inv = 1.0 / scale.sqrt();
            le.iter().map(|v| inv * v).collect()
        }
        RegressionKind::Misoriented => {
            // Quarter turn in the plane of the top and bottom eigenvectors:
            // v_max -> v_min, v_min -> -v_max. The claimed principal axis is
            // left carrying the smallest variance, so error directions pile
            // up orthogonally to it.
            let eig = eigen_sym(&summary.cov)?;
            let v_max = &eig.vectors[0];
            let v_min = &eig.vectors[d - 1];
            let c_max = dot(v_max, &le);
            let c_min = dot(v_min, &le);
            (0..d)
                .map(|j| le[j] - (c_max + c_min) * v_max[j] + (c_max - c_min) * v_min[j])
                .collect()
        }
        RegressionKind::FatTailed { nu } => {
            let w = src.chi2(*nu);
            let t_scale = (nu / w).sqrt();
            le.iter().map(|v| t_scale * v).collect()
        }
        RegressionKind::Biased { bias } => le.iter().zip(bias).map(|(v, b)| v + b).collect(),
    };

    let y_gt = summary.mean.iter().zip(error).map(|(m, e)| m + e).collect();
    Ok(RegressionRecord {
        y_gt,
        payload: Payload::Raw(samples),
    })
}

/// Calibration regimes for classification fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationKind {
    /// Uncertainty predicts errors: a two-class competition whose margin
    /// shrinks with difficulty under steady sample noise, with per-record
    /// temperature and baseline jitter so no single score is trivially
    /// perfect.
    Informative,
    /// Correctness is assigned independently of the sample draws, so every
    /// score ranks at chance.
    Uninformative,
    /// Weak signal under heavy noise: frequent confident mistakes.
    OutOfData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRegime {
    pub kind: ClassificationKind,
    pub c: usize,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

impl ClassificationRegime {
    fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return Err(Error::InvalidRegime(format!(
                "need at least 2 classes, got {}",
                self.c
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidRegime("need at least 1 sample".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidRegime("record count must be >= 1".into()));
        }
        Ok(())
    }
}

fn softmax_rows(logits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    logits
        .iter()
        .map(|row| {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        })
        .collect()
}

/// Generates a classification dataset under the regime. Deterministic in
/// (regime, seed).
pub fn gen_classification(regime: &ClassificationRegime) -> Result<Vec<ClassificationRecord>> {
    regime.validate()?;
    let c = regime.c;
    let mut records = Vec::with_capacity(regime.n);
    for i in 0..regime.n {
        let mut src = DrawSource::for_record(regime.seed, i as u64);
        let (gt, logits) = match regime.kind {
            ClassificationKind::Informative => {
                let delta = src.uniform();
                let gt = src.uniform_int(c as u64) as usize;
                let distractor = (gt + 1 + src.uniform_int(c as u64 - 1) as usize) % c;
                let margin = 24.0 * (1.0 - delta);
                let bump = 4.5 + 1.3 * src.normal();
                let tau = (0.25 * src.normal()).exp();
                let mut base = vec![0.0; c];
                base[gt] += bump + margin;
                base[distractor] += bump;
                let logits: Vec<Vec<f64>> = (0..regime.k)
                    .map(|_| {
                        base.iter()
                            .map(|b| tau * (b + 1.2 * src.normal()))
                            .collect()
                    })
                    .collect();
                (gt, logits)
            }
            ClassificationKind::Uninformative => {
                let base_class = src.uniform_int(c as u64) as usize;
                let gt = if src.uniform() < 0.7 {
                    base_class
                } else {
                    (base_class + 1 + src.uniform_int(c as u64 - 1) as usize) % c
                };
                let logits: Vec<Vec<f64>> = (0..regime.k)
                    .map(|_| {
                        (0..c)
                            .map(|j| if j == base_class { 4.0 } else { 0.0 } + src.normal())
                            .collect()
                    })
                    .collect();
                (gt, logits)
            }
            ClassificationKind::OutOfData => {
                let gt = src.uniform_int(c as u64) as usize;
                let logits: Vec<Vec<f64>> = (0..regime.k)
                    .map(|_| {
                        (0..c)
                            .map(|j| if j == gt { 0.3 } else { 0.0 } + 2.5 * src.normal())
                            .collect()
                    })
                    .collect();
                (gt, logits)
            }
        };
        records.push(ClassificationRecord::new(gt, softmax_rows(&logits))?);
    }
    Ok(records)
}
