//! Shared test-only helpers: an independent chi-squared CDF oracle built on
//! adaptive quadrature, a Spearman correlation, and a ChaCha-backed float
//! source for seeded fixtures. Nothing here touches the implementation
//! paths under test.

// each test target uses a different subset
#![allow(dead_code)]

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gamma(d/2) computed exactly for integer d: factorials for even d,
/// the half-integer product formula for odd d.
fn gamma_half(d: u32) -> f64 {
    if d % 2 == 0 {
        // Gamma(n) = (n-1)!
        let n = d / 2;
        (1..n).map(|i| i as f64).product::<f64>().max(1.0)
    } else {
        // Gamma(n + 1/2) = (2n-1)!! / 2^n * sqrt(pi), with d = 2n + 1
        let n = (d - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 0..n {
            v *= (2 * i + 1) as f64 / 2.0;
        }
        v
    }
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, right, tol / 2.0, depth - 1)
    }
}

/// chi-squared CDF by quadrature: the density is integrated after the
/// substitution t = u^2, which removes the d = 1 endpoint singularity.
/// Relative target 1e-13.
pub fn chi2_cdf_oracle(d: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let dd = d as f64;
    let norm = 1.0 / (2f64.powf(dd / 2.0) * gamma_half(d));
    // integrand in u: 2 u^(d-1) exp(-u^2/2)
    let g = move |u: f64| 2.0 * u.powi(d as i32 - 1) * (-u * u / 2.0).exp() * norm;
    let b = x.sqrt();
    let whole = simpson(&g, 0.0, b);
    let tol = 1e-13 * whole.abs().max(1e-300);
    adaptive(&g, 0.0, b, whole, tol, 60).min(1.0)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..x.len() {
        let a = rx[i] - mx;
        let b = ry[i] - my;
        num += a * b;
        dx += a * a;
        dy += b * b;
    }
    num / (dx * dy).sqrt()
}

/// Seeded float source for building test fixtures, independent of the
/// simulator's internals.
pub struct ChaChaF64 {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl ChaChaF64 {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }

    pub fn normal_vec(&mut self, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.normal()).collect()
    }

    pub fn chi2_4(&mut self) -> f64 {
        (0..4).map(|_| self.normal().powi(2)).sum()
    }
}
