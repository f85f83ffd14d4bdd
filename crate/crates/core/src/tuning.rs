//! K-fold cross-validation of the tuning constant (eta or gamma).

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig};
use crate::json::float;
use crate::matcore::{SpdMatrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    /// `1/2 [log det S + (1/n_f) sum x^T S^{-1} x]` on the held-out fold.
    #[default]
    GaussianNll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSpec {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub score: Score,
    pub seed: u64,
}

impl TuneSpec {
    pub fn new(grid: Vec<f64>, seed: u64) -> Self {
        TuneSpec {
            grid,
            folds: 5,
            score: Score::GaussianNll,
            seed,
        }
    }

    /// Sorted, deduplicated candidates.
    fn candidates(&self) -> Result<Vec<f64>> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("tuning grid is empty".into()));
        }
        if let Some(v) = self.grid.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid value {v} is not finite")));
        }
        let mut g = self.grid.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub value: f64,
    #[serde(with = "float")]
    pub mean: f64,
    #[serde(with = "float")]
    pub sd: f64,
    pub fold_scores: Vec<f64>,
    pub failed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub estimator: String,
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub best: f64,
    pub candidates: Vec<CandidateScore>,
}

/// Row indices in lexicographic order of the row values.
fn canonical_order(data: &Dataset) -> Vec<usize> {
    let m = data.matrix();
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| {
        m.row(a)
            .iter()
            .zip(m.row(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    order
}

/// Fold label of every row.
///
/// Labels follow the row values, not their position in the input, so
/// permuting the rows permutes the labels with them.
pub fn fold_assignment(data: &Dataset, folds: usize, seed: u64) -> Vec<usize> {
    let mut order = canonical_order(data);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut labels = vec![0; data.n()];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = pos % folds;
    }
    labels
}

/// Gaussian negative log-likelihood of the rows of `held_out` (already
/// centered) under `sigma`.
pub fn gaussian_nll(held_out: &Dataset, sigma: &SymMatrix) -> Result<f64> {
    let spd = SpdMatrix::new(sigma.clone())?;
    let inv = spd.inverse();
    let quad: f64 = held_out
        .iter_rows()
        .map(|x| (x.transpose() * inv.as_matrix() * &x)[(0, 0)])
        .sum::<f64>()
        / held_out.n() as f64;
    Ok(0.5 * (spd.log_det() + quad))
}

/// Training and held-out row indices for fold `k`, both in canonical order.
fn split(order: &[usize], labels: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    order.iter().partition(|&&i| labels[i] != k)
}

fn fold_score(data: &Dataset, config: &EstimatorConfig, train: &[usize], test: &[usize]) -> Result<f64> {
    let est = estimate(&data.select(train), config)?;
    let held = data.select(test);
    let held = match &est.center_used {
        Some(c) => held.subtract_center(c)?,
        None => held,
    };
    let s = gaussian_nll(&held, &est.penalized_form())?;
    if !s.is_finite() {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: est.penalized_form().min_eigenvalue() });
    }
    Ok(s)
}

/// Picks the tuning constant of `config.kind` with the lowest mean held-out
/// score; exact ties go to the larger value.
pub fn cross_validate(data: &Dataset, config: &EstimatorConfig, spec: &TuneSpec) -> Result<TuneReport> {
    if !(config.kind.is_penalized() || config.kind.is_hybrid()) {
        return Err(Error::InvalidParameter(format!(
            "estimator {} has no tuning constant",
            config.kind
        )));
    }
    let grid = spec.candidates()?;
    for &v in &grid {
        config.kind.with_tuning(v).validate()?;
    }
    let n = data.n();
    if spec.folds < 2 || spec.folds > n {
        return Err(Error::InvalidParameter(format!(
            "folds must lie in [2, {n}], got {}",
            spec.folds
        )));
    }
    let labels = fold_assignment(data, spec.folds, spec.seed);
    let order = canonical_order(data);
    let splits: Vec<_> = (0..spec.folds).map(|k| split(&order, &labels, k)).collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..spec.folds).map(move |k| (c, k)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let mut cfg = config.clone();
            cfg.kind = config.kind.with_tuning(grid[c]);
            let (train, test) = &splits[k];
            fold_score(data, &cfg, train, test)
        })
        .collect();

    let mut candidates = Vec::with_capacity(grid.len());
    for (c, &value) in grid.iter().enumerate() {
        let slice = &results[c * spec.folds..(c + 1) * spec.folds];
        let error = slice.iter().find_map(|r| r.as_ref().err().map(|e| e.to_string()));
        let fold_scores: Vec<f64> = slice.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let failed = error.is_some();
        let (mean, sd) = if failed { (f64::NAN, f64::NAN) } else { mean_sd(&fold_scores) };
        if error.is_some() {
            log::warn!("candidate {value} failed: {}", error.as_deref().unwrap_or(""));
        }
        candidates.push(CandidateScore {
            value,
            mean,
            sd,
            fold_scores,
            failed,
            error,
        });
    }
    let best = candidates
        .iter()
        .filter(|c| !c.failed)
        .min_by(|a, b| a.mean.total_cmp(&b.mean).then(b.value.total_cmp(&a.value)))
        .map(|c| c.value)
        .ok_or(Error::AllCandidatesFailed)?;
    Ok(TuneReport {
        estimator: config.kind.name().to_string(),
        n,
        folds: spec.folds,
        seed: spec.seed,
        best,
        candidates,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, var.sqrt())
}
