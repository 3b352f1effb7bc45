//! Special functions: log-gamma, regularized incomplete gamma, the
//! chi-squared CDF and quantile, the standard normal CDF and quantile, and
//! the asymptotic Kolmogorov tail used for KS p-values.

use crate::error::{Error, Result};

/// Lanczos approximation (g = 7, 9 coefficients), ~1e-15 relative for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    // published coefficient values, kept verbatim
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_MAX_ITER: usize = 500;
const GAMMA_EPS: f64 = 1e-14;

/// Regularized lower incomplete gamma P(a, x) by the classic split:
/// series for x < a + 1, continued fraction (Lentz) otherwise.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    let (p, _) = gamma_pq(a, x)?;
    Ok(p)
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    let (_, q) = gamma_pq(a, x)?;
    Ok(q)
}

fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if a <= 0.0 || x < 0.0 || !a.is_finite() || !x.is_finite() {
        return Err(Error::InvalidInput(format!(
            "incomplete gamma needs a > 0, x >= 0 (a={a}, x={x})"
        )));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    let log_pre = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                let p = (log_pre.exp() * sum).clamp(0.0, 1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::ConvergenceFailure)
    } else {
        // modified Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                let q = (log_pre.exp() * h).clamp(0.0, 1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::ConvergenceFailure)
    }
}

/// CDF of the chi-squared distribution with `d` degrees of freedom,
/// P(d/2, x/2).
pub fn chi2_cdf(d: u32, x: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidInput(
            "degrees of freedom must be >= 1".into(),
        ));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidInput(format!(
            "chi2_cdf needs x >= 0, got {x}"
        )));
    }
    gamma_p(d as f64 / 2.0, x / 2.0)
}

/// Upper tail of the chi-squared distribution, Q(d/2, x/2).
pub fn chi2_sf(d: u32, x: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidInput(
            "degrees of freedom must be >= 1".into(),
        ));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidInput(format!(
            "chi2_sf needs x >= 0, got {x}"
        )));
    }
    gamma_q(d as f64 / 2.0, x / 2.0)
}

/// Quantile of the chi-squared distribution: Wilson-Hilferty start, then
/// Newton on the CDF with a bisection safeguard.
pub fn chi2_quantile(d: u32, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || p <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "chi2_quantile needs p in (0,1), got {p}"
        )));
    }
    let df = d as f64;
    let z = normal_quantile(p)?;
    let wh = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
    let mut x = wh.max(1e-10);

    let (mut lo, mut hi) = (0.0f64, f64::MAX);
    for _ in 0..100 {
        let f = chi2_cdf(d, x)? - p;
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        // density of chi2(d) at x
        let ln_pdf =
            (df / 2.0 - 1.0) * x.ln() - x / 2.0 - (df / 2.0) * 2f64.ln() - ln_gamma(df / 2.0);
        let pdf = ln_pdf.exp();
        let step = if pdf > 0.0 { f / pdf } else { 0.0 };
        let mut next = x - step;
        if !(next > lo && (hi == f64::MAX || next < hi)) || !next.is_finite() {
            next = if hi == f64::MAX {
                x * 2.0
            } else {
                0.5 * (lo + hi)
            };
        }
        if (next - x).abs() <= 1e-12 * x.max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Standard normal CDF via the incomplete gamma reduction
/// Phi(x) = 1/2 + sign(x) * P(1/2, x^2/2) / 2.
pub fn normal_cdf(x: f64) -> f64 {
    let p = gamma_p(0.5, x * x / 2.0).unwrap_or(1.0);
    if x >= 0.0 {
        0.5 + 0.5 * p
    } else {
        0.5 - 0.5 * p
    }
}

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Newton step against [`normal_cdf`]. Accurate to ~1e-14.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "normal_quantile needs p in (0,1), got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let p_low = 0.02425;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // one Newton step with the exact CDF/PDF
    let pdf = (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let refined = if pdf > 1e-300 {
        x - (normal_cdf(x) - p) / pdf
    } else {
        x
    };
    Ok(refined)
}

/// Two-sided normal z-score for coverage `p`: z(p) = Phi^-1((1+p)/2).
/// z(0.99) = 2.576.
pub fn two_sided_z(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "two_sided_z needs p in (0,1), got {p}"
        )));
    }
    normal_quantile((1.0 + p) / 2.0)
}

/// Asymptotic Kolmogorov tail Q(lambda) = 2 * sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2},
/// truncated when terms fall below 1e-12. Q(0) = 1, Q(inf) = 0.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 1e-4 {
        return 1.0;
    }
    let l2 = 2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200_000u64 {
        let term = (-l2 * (k * k) as f64).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
