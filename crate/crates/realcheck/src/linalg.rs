//! Dense symmetric positive-definite matrices and the two factorizations the
//! rest of the crate needs: Cholesky and a cyclic Jacobi eigensolver.
//!
//! Dimensions stay small (typically d = 4, never more than a few dozen), so
//! plain row-major storage and textbook algorithms are the right tool.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on construction.
const SYMMETRY_RTOL: f64 = 1e-9;

/// A Cholesky pivot at or below this fraction of the mean diagonal counts as
/// not positive definite. Matches the first rung of the jitter ladder used by
/// covariance estimation.
const PIVOT_RTOL: f64 = 1e-12;

/// Symmetric positive-definite matrix, row-major.
///
/// Symmetry (within 1e-9 relative) and finiteness are checked on
/// construction; positive definiteness is established by [`cholesky`], which
/// every consumer of the matrix goes through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        let scale = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = data[i * dim + j];
                let b = data[j * dim + i];
                if (a - b).abs() > SYMMETRY_RTOL * scale.max(1e-300) {
                    return Err(Error::InvalidInput(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.get(i, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds `eps` to every diagonal entry, in place.
    pub(crate) fn bump_diagonal(&mut self, eps: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += eps;
        }
    }
}

/// Lower-triangular Cholesky factor with `L Lᵀ = m`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    data: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// det(m) = product of the squared diagonal entries.
    pub fn determinant(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).powi(2)).product()
    }

    /// Solves `L z = b` by forward substitution.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut z = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for j in 0..i {
                s -= self.get(i, j) * z[j];
            }
            z[i] = s / self.get(i, i);
        }
        z
    }

    /// Applies the factor: returns `L v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..=i).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

/// Cholesky decomposition of an SPD matrix.
///
/// Fails with `NotPositiveDefinite` when a pivot falls at or below
/// 1e-12 times the mean diagonal, which signals a degenerate covariance.
pub fn cholesky(m: &SpdMatrix) -> Result<CholeskyFactor> {
    let d = m.dim;
    let pivot_floor = PIVOT_RTOL * (m.trace() / d as f64).abs();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= pivot_floor {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                }
                l[i * d + j] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(CholeskyFactor { dim: d, data: l })
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`, sign-normalized
    /// so its largest-magnitude entry is positive.
    pub vectors: Vec<Vec<f64>>,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver. Converges when the off-diagonal Frobenius norm
/// drops below 1e-12 of the matrix Frobenius norm; caps at 100 sweeps.
pub fn eigen_sym(m: &SpdMatrix) -> Result<SymEigen> {
    let d = m.dim;
    let mut a = m.data.clone();
    // v holds eigenvectors as columns
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob;

    let mut converged = frob == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    s += 2.0 * a[p * d + q] * a[p * d + q];
                }
            }
            s.sqrt()
        };
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e30 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // final check after the last sweep
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    s += 2.0 * a[p * d + q] * a[p * d + q];
                }
            }
            s.sqrt()
        };
        if off > tol {
            return Err(Error::ConvergenceFailure);
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| {
            let mut col: Vec<f64> = (0..d).map(|i| v[i * d + j]).collect();
            // sign convention: largest-magnitude entry positive
            let mut argmax = 0;
            for (i, x) in col.iter().enumerate() {
                if x.abs() > col[argmax].abs() {
                    argmax = i;
                }
            }
            if col[argmax] < 0.0 {
                for x in col.iter_mut() {
                    *x = -*x;
                }
            }
            (a[j * d + j], col)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    let (values, vectors) = pairs.into_iter().unzip();
    Ok(SymEigen { values, vectors })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
