//! Dense symmetric matrix algebra for small dimensions.
//!
//! Every matrix function here (inverse, square roots, logarithm) goes through
//! the symmetric eigendecomposition. The dimensions this crate deals with are
//! small, so one well-tested primitive beats several specialised ones.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative floor on the smallest eigenvalue for a matrix to count as
/// strictly positive definite: `lambda_min > SPD_REL_TOL * max(lambda_max, 1)`.
pub const SPD_REL_TOL: f64 = 1e-12;

/// A real symmetric `q x q` matrix. Symmetry is enforced at construction by
/// averaging the two triangles, so `m[(i, j)] == m[(j, i)]` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetrizes `m` as `(m + m^T) / 2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        let q = m.nrows();
        let inner = DMatrix::from_fn(q, q, |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                // commutative, so (i, j) and (j, i) round identically
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        });
        Ok(SymMatrix { inner })
    }

    pub fn identity(q: usize) -> Self {
        SymMatrix {
            inner: DMatrix::identity(q, q),
        }
    }

    pub fn scaled_identity(q: usize, c: f64) -> Self {
        SymMatrix {
            inner: DMatrix::identity(q, q) * c,
        }
    }

    pub fn zeros(q: usize) -> Self {
        SymMatrix {
            inner: DMatrix::zeros(q, q),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// Builds from row-major entries. Entries must already be symmetric to
    /// within `1e-12` relative to the largest entry.
    pub fn from_row_major(q: usize, entries: &[f64]) -> Result<Self> {
        if q == 0 || entries.len() != q * q {
            return Err(Error::DimensionMismatch {
                expected: q * q,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        let m = DMatrix::from_row_slice(q, q, entries);
        let scale = m.amax().max(1.0);
        for i in 0..q {
            for j in (i + 1)..q {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Self::from_matrix(m)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let q = self.dim();
        (0..q)
            .flat_map(|i| (0..q).map(move |j| (i, j)))
            .map(|(i, j)| self.inner[(i, j)])
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix {
            inner: &self.inner * c,
        }
    }

    /// `self + c * I`
    pub fn shift(&self, c: f64) -> Self {
        let mut inner = self.inner.clone();
        for i in 0..self.dim() {
            inner[(i, i)] += c;
        }
        SymMatrix { inner }
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        check_dims(self, other)?;
        Ok(SymMatrix {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<Self> {
        check_dims(self, other)?;
        Ok(SymMatrix {
            inner: &self.inner - &other.inner,
        })
    }

    /// Frobenius distance `||self - other||_F`.
    pub fn distance(&self, other: &SymMatrix) -> Result<f64> {
        check_dims(self, other)?;
        Ok((&self.inner - &other.inner).norm())
    }

    /// Congruence `a * self * a^T` for a square `a` of matching size.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: a.nrows(),
            });
        }
        SymMatrix::from_matrix(a * &self.inner * a.transpose())
    }

    pub fn eigen(&self) -> Eigen {
        eigendecompose(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().max()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigen().is_strictly_positive()
    }
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Eigenvalues sorted in descending order with matching orthonormal
/// eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn is_strictly_positive(&self) -> bool {
        let top = self.max();
        self.min() > SPD_REL_TOL * top.max(1.0)
    }

    /// `Q f(Lambda) Q^T`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let q = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..q {
            let fj = f(self.values[j]);
            scaled.column_mut(j).scale_mut(fj);
        }
        let m = scaled * self.vectors.transpose();
        SymMatrix::from_matrix(m).expect("square by construction")
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|l| l)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn eigendecompose(m: &SymMatrix) -> Eigen {
    let q = m.dim();
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(q, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(q, q);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Eigen { values, vectors }
}

/// A strictly positive definite matrix together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    base: SymMatrix,
    eigen: Eigen,
}

impl SpdMatrix {
    pub fn new(base: SymMatrix) -> Result<Self> {
        let eigen = eigendecompose(&base);
        if !eigen.is_strictly_positive() {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: eigen.min(),
            });
        }
        Ok(SpdMatrix { base, eigen })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.base
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eigen
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn inverse(&self) -> SymMatrix {
        self.eigen.map(|l| 1.0 / l)
    }

    pub fn sqrt(&self) -> SymMatrix {
        self.eigen.map(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> SymMatrix {
        self.eigen.map(|l| 1.0 / l.sqrt())
    }

    pub fn log(&self) -> SymMatrix {
        self.eigen.map(f64::ln)
    }

    pub fn log_det(&self) -> f64 {
        self.eigen.values.iter().map(|l| l.ln()).sum()
    }
}

/// Loewner order test: true iff the smallest eigenvalue of `a - b` is at
/// least `-tol`.
pub fn loewner_geq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    let diff = a.sub(b)?;
    Ok(diff.min_eigenvalue() >= -tol)
}

/// Affine-invariant Riemannian distance `||log(V1^{-1/2} V2 V1^{-1/2})||_F`.
///
/// Returns `f64::INFINITY` when either argument (or the whitened matrix) is
/// singular to working precision. Breakdown analysis treats that value as
/// unbounded bias, so it is a result here, not an error.
pub fn riemannian_bias(v1: &SymMatrix, v2: &SymMatrix) -> Result<f64> {
    check_dims(v1, v2)?;
    let (s1, s2) = match (SpdMatrix::new(v1.clone()), SpdMatrix::new(v2.clone())) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Ok(f64::INFINITY),
    };
    let w = s1.inv_sqrt();
    let whitened = s2.matrix().congruence(w.as_matrix())?;
    let eig = eigendecompose(&whitened);
    if !eig.is_strictly_positive() || eig.values.iter().any(|v| !v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    Ok(eig.values.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}
