//! Reproducible synthetic data and dataset transforms.
//!
//! Row `i` of a sample is drawn from a ChaCha stream selected by `i` under
//! the user seed, so any subset of rows can be regenerated (or generated in
//! parallel) without replaying the others.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matcore::{SpdMatrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Distribution {
    Gaussian,
    StudentT { dof: f64 },
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Gaussian => write!(f, "gaussian"),
            Distribution::StudentT { dof } => write!(f, "t:{dof:?}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "gaussian" {
            return Ok(Distribution::Gaussian);
        }
        let dof = s
            .strip_prefix("t:")
            .and_then(|d| d.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Parse(format!("unknown distribution {s:?} (gaussian | t:<dof>)")))?;
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::InvalidParameter(format!("dof must be > 0, got {dof}")));
        }
        Ok(Distribution::StudentT { dof })
    }
}

impl TryFrom<String> for Distribution {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Distribution> for String {
    fn from(d: Distribution) -> String {
        d.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub distribution: Distribution,
    pub shape: SymMatrix,
    pub n: usize,
    pub seed: u64,
}

/// Draws `n` elliptical observations `x = A z` (or `A z / sqrt(w / dof)`),
/// `A = shape^{1/2}`.
pub fn sample(spec: &GeneratorSpec) -> Result<Dataset> {
    let root = SpdMatrix::new(spec.shape.clone())?.sqrt().into_matrix();
    let q = spec.shape.dim();
    let chi = match spec.distribution {
        Distribution::StudentT { dof } => Some(
            ChiSquared::new(dof).map_err(|e| Error::InvalidParameter(format!("dof: {e}")))?,
        ),
        Distribution::Gaussian => None,
    };
    let rows: Vec<Vec<f64>> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let z: Vec<f64> = (0..q).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z = nalgebra::DVector::from_vec(z);
            let mut x = &root * z;
            if let (Some(chi), Distribution::StudentT { dof }) = (&chi, spec.distribution) {
                let w: f64 = chi.sample(&mut rng);
                x /= (w / dof).sqrt();
            }
            x.as_slice().to_vec()
        })
        .collect();
    let m = DMatrix::from_fn(spec.n, q, |i, j| rows[i][j]);
    Dataset::new(m)
}

/// All differences `x_i - x_j`, `i < j`.
pub fn pairwise_differences(data: &Dataset) -> Result<Dataset> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("pairwise differences need n >= 2, got {n}")));
    }
    let x = data.matrix();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let m = DMatrix::from_fn(pairs.len(), data.q(), |k, c| {
        let (i, j) = pairs[k];
        x[(i, c)] - x[(j, c)]
    });
    Dataset::new(m)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    /// `x -> Q x` for orthogonal `Q`.
    Rotate(DMatrix<f64>),
    Scale(f64),
    Translate(Vec<f64>),
}

pub fn transform(data: &Dataset, op: &Transform) -> Result<Dataset> {
    let x = data.matrix();
    let m = match op {
        Transform::Rotate(rot) => {
            let q = data.q();
            if rot.nrows() != q || rot.ncols() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    actual: rot.nrows(),
                });
            }
            let defect = (rot.transpose() * rot - DMatrix::<f64>::identity(q, q)).norm();
            if defect > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "rotation is not orthogonal (||Q^T Q - I||_F = {defect:e})"
                )));
            }
            x * rot.transpose()
        }
        Transform::Scale(alpha) => {
            if !alpha.is_finite() {
                return Err(Error::InvalidParameter("scale must be finite".into()));
            }
            x * *alpha
        }
        Transform::Translate(a) => {
            if a.len() != data.q() {
                return Err(Error::DimensionMismatch {
                    expected: data.q(),
                    actual: a.len(),
                });
            }
            DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] + a[j])
        }
    };
    Dataset::new(m)
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix, with
/// signs fixed so the draw is Haar distributed.
pub fn random_orthogonal(q: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(q, q, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut qm = qr.q();
    let r = qr.r();
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            qm.column_mut(j).neg_mut();
        }
    }
    qm
}

/// Randomly rotated shape with eigenvalues log-spaced on `[1, condition]`.
pub fn shape_with_condition(q: usize, condition: f64, seed: u64) -> Result<SymMatrix> {
    if !(condition >= 1.0 && condition.is_finite()) || q == 0 {
        return Err(Error::InvalidParameter(format!("need q >= 1 and condition >= 1, got {q}, {condition}")));
    }
    let diag: Vec<f64> = (0..q)
        .map(|k| {
            if q == 1 {
                1.0
            } else {
                condition.powf(k as f64 / (q - 1) as f64)
            }
        })
        .collect();
    SymMatrix::from_diagonal(&diag).congruence(&random_orthogonal(q, seed))
}

/// Shape matrix source on the command line: `identity:<q>`, `diag:4,1` or
/// `file:shape.csv` (a headerless square CSV).
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Identity(usize),
    Diagonal(Vec<f64>),
    File(PathBuf),
}

impl FromStr for ShapeSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(q) = s.strip_prefix("identity:") {
            let q: usize = q.trim().parse().map_err(|_| Error::Parse(format!("bad dimension {q:?}")))?;
            if q == 0 {
                return Err(Error::Parse("identity dimension must be >= 1".into()));
            }
            return Ok(ShapeSpec::Identity(q));
        }
        if let Some(d) = s.strip_prefix("diag:") {
            let vals = d
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite() && *v > 0.0)
                        .ok_or_else(|| Error::Parse(format!("diagonal entries must be positive numbers, got {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(ShapeSpec::Diagonal(vals));
        }
        if let Some(p) = s.strip_prefix("file:") {
            if p.is_empty() {
                return Err(Error::Parse("empty shape file path".into()));
            }
            return Ok(ShapeSpec::File(PathBuf::from(p)));
        }
        Err(Error::Parse(format!("unknown shape spec {s:?} (identity:<q> | diag:a,b,.. | file:<csv>)")))
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeSpec::Identity(q) => write!(f, "identity:{q}"),
            ShapeSpec::Diagonal(d) => {
                let parts: Vec<String> = d.iter().map(|v| format!("{v:?}")).collect();
                write!(f, "diag:{}", parts.join(","))
            }
            ShapeSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl ShapeSpec {
    pub fn resolve(&self) -> Result<SymMatrix> {
        match self {
            ShapeSpec::Identity(q) => Ok(SymMatrix::identity(*q)),
            ShapeSpec::Diagonal(d) => Ok(SymMatrix::from_diagonal(d)),
            ShapeSpec::File(p) => {
                let d = Dataset::read_csv(p)?;
                if d.n() != d.q() {
                    return Err(Error::DimensionMismatch {
                        expected: d.q(),
                        actual: d.n(),
                    });
                }
                let m = SymMatrix::from_row_major(d.q(), d.matrix().transpose().as_slice())?;
                SpdMatrix::new(m.clone())?;
                Ok(m)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            distribution: Distribution::Gaussian,
            shape: SymMatrix::identity(2),
            n,
            seed,
        }
    }

    #[test]
    fn law_of_large_numbers() {
        let d = sample(&spec(10_000, 17)).unwrap();
        let cov = d.matrix().transpose() * d.matrix() / d.n() as f64;
        assert!((cov - DMatrix::<f64>::identity(2, 2)).norm() < 0.1);
    }

    #[test]
    fn empty_and_deterministic() {
        assert_eq!(sample(&spec(0, 1)).unwrap().n(), 0);
        assert_eq!(sample(&spec(50, 3)).unwrap(), sample(&spec(50, 3)).unwrap());
        assert_ne!(sample(&spec(50, 3)).unwrap(), sample(&spec(50, 4)).unwrap());
    }

    #[test]
    fn rows_are_keyed_by_index() {
        let short = sample(&spec(10, 9)).unwrap();
        let long = sample(&spec(30, 9)).unwrap();
        assert_eq!(short.matrix(), &long.matrix().rows(0, 10).into_owned());
    }

    #[test]
    fn student_t_has_heavier_tails() {
        let mut s = spec(2000, 5);
        let g = sample(&s).unwrap();
        s.distribution = Distribution::StudentT { dof: 1.0 };
        let t = sample(&s).unwrap();
        let max_norm = |d: &Dataset| d.iter_rows().map(|r| r.norm()).fold(0.0, f64::max);
        assert!(max_norm(&t) > 10.0 * max_norm(&g));
    }

    #[test]
    fn pairwise() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![4.0, 0.0]]).unwrap();
        let p = pairwise_differences(&d).unwrap();
        assert_eq!(p.row(0).as_slice(), &[-3.0, 2.0]);
        let three = sample(&spec(3, 1)).unwrap();
        assert_eq!(pairwise_differences(&three).unwrap().n(), 3);
        let shifted = transform(&three, &Transform::Translate(vec![0.5, -2.0])).unwrap();
        // differences of exact translates agree up to rounding of the shift
        let a = pairwise_differences(&three).unwrap();
        let b = pairwise_differences(&shifted).unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-14);
        assert!(pairwise_differences(&sample(&spec(1, 1)).unwrap()).is_err());
    }

    #[test]
    fn pairwise_translation_exact_for_integer_data() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![4.0, 0.0], vec![-3.0, 7.0]]).unwrap();
        let shifted = transform(&d, &Transform::Translate(vec![10.0, -5.0])).unwrap();
        assert_eq!(pairwise_differences(&d).unwrap(), pairwise_differences(&shifted).unwrap());
    }

    #[test]
    fn transforms() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let id = transform(&d, &Transform::Rotate(DMatrix::identity(2, 2))).unwrap();
        assert_eq!(id, d);
        let quarter = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let r = transform(&d, &Transform::Rotate(quarter)).unwrap();
        assert_eq!(r.row(0).as_slice(), &[0.0, 1.0]);
        let s = transform(&d, &Transform::Scale(2.0)).unwrap();
        assert_eq!(s.row(1).norm(), 10.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(transform(&d, &Transform::Rotate(bad)).is_err());
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let q = random_orthogonal(6, 11);
        assert!((q.transpose() * &q - DMatrix::<f64>::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn conditioned_shape() {
        let s = shape_with_condition(4, 100.0, 2).unwrap();
        let e = s.eigen();
        assert!((e.max() / e.min() - 100.0).abs() < 1e-8);
    }

    #[test]
    fn shape_specs() {
        assert_eq!("diag:4,1".parse::<ShapeSpec>().unwrap(), ShapeSpec::Diagonal(vec![4.0, 1.0]));
        assert_eq!("identity:3".parse::<ShapeSpec>().unwrap().resolve().unwrap(), SymMatrix::identity(3));
        assert!("diag:4,-1".parse::<ShapeSpec>().is_err());
        assert!("identity:0".parse::<ShapeSpec>().is_err());
        assert!("sphere".parse::<ShapeSpec>().is_err());
        assert_eq!("t:3".parse::<Distribution>().unwrap(), Distribution::StudentT { dof: 3.0 });
        assert!("t:0".parse::<Distribution>().is_err());
    }
}
