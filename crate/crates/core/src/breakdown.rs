//! Contamination stress harness.
//!
//! A clean sample `X` is augmented with `m` adversarial points `Y`, the
//! estimator is rerun on `Z = X ∪ Y`, and the Riemannian distance between
//! the clean and contaminated estimates is recorded for a ladder of
//! contamination magnitudes. The supremum over all `Y` cannot be searched,
//! so every result is restricted to one adversarial family and reported as
//! such.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, EstimatorKind, ScatterEstimate};
use crate::json::float;
use crate::location;
use crate::matcore::{riemannian_bias, SymMatrix};
use crate::weights::{self, WeightFunction};

/// Bias above this counts as divergence.
pub const BIAS_DIVERGENCE: f64 = 1e6;
/// Relative change in bias between ladder steps that counts as growth.
pub const GROWTH_SLACK: f64 = 0.01;
/// Relative tolerance on the eigenvalue sandwich, scaled by its upper end.
pub const BOUND_TOL: f64 = 1e-7;

pub fn default_ladder() -> Vec<f64> {
    vec![1e2, 1e4, 1e6, 1e8, 1e10, 1e12]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Coordinate axis `e_k`, zero-based.
    Axis(usize),
    Vector(Vec<f64>),
}

impl Direction {
    fn unit(&self, q: usize) -> Result<DVector<f64>> {
        let v = match self {
            Direction::Axis(k) if *k < q => {
                let mut v = DVector::zeros(q);
                v[*k] = 1.0;
                v
            }
            Direction::Axis(k) => {
                return Err(Error::InvalidParameter(format!("axis e{} exceeds dimension {q}", k + 1)))
            }
            Direction::Vector(d) => {
                if d.len() != q {
                    return Err(Error::DimensionMismatch {
                        expected: q,
                        actual: d.len(),
                    });
                }
                DVector::from_column_slice(d)
            }
        };
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("direction must be a nonzero vector".into()));
        }
        Ok(v / norm)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Axis(k) => write!(f, "e{}", k + 1),
            Direction::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(k) = s.strip_prefix('e') {
            let k: usize = k.parse().map_err(|_| Error::Parse(format!("bad axis {s:?}")))?;
            if k == 0 {
                return Err(Error::Parse("axes are numbered from e1".into()));
            }
            return Ok(Direction::Axis(k - 1));
        }
        let v = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse(format!("bad direction component {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Direction::Vector(v))
    }
}

/// Adversarial families.
///
/// String forms: `point-mass:dir=e1`, `cluster:dir=e1:spread=0.1`,
/// `near-singular:k=1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum Pattern {
    /// All `m` points at `magnitude * dir`.
    PointMass { direction: Direction },
    /// Points at `magnitude * (dir + spread * z)`, `z` standard normal.
    Cluster { direction: Direction, spread: f64 },
    /// Points of norm `magnitude` spread inside the span of the first
    /// `subspace_dim` axes, which squeezes the remaining directions.
    NearSingular { subspace_dim: usize },
}

impl Pattern {
    fn generate(&self, q: usize, m: usize, magnitude: f64, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(m, q);
        match self {
            Pattern::PointMass { direction } => {
                let d = direction.unit(q)? * magnitude;
                for mut row in out.row_iter_mut() {
                    row.copy_from(&d.transpose());
                }
            }
            Pattern::Cluster { direction, spread } => {
                let d = direction.unit(q)?;
                for mut row in out.row_iter_mut() {
                    let z = DVector::from_fn(q, |_, _| StandardNormal.sample(rng));
                    let y = (&d + z * *spread) * magnitude;
                    row.copy_from(&y.transpose());
                }
            }
            Pattern::NearSingular { subspace_dim } => {
                let k = *subspace_dim;
                if k == 0 || k >= q {
                    return Err(Error::InvalidParameter(format!(
                        "near-singular subspace dimension must be in 1..{q}, got {k}"
                    )));
                }
                for mut row in out.row_iter_mut() {
                    let mut z = DVector::<f64>::zeros(q);
                    for c in 0..k {
                        z[c] = StandardNormal.sample(rng);
                    }
                    let norm = z.norm();
                    let y = if norm > 0.0 { z * (magnitude / norm) } else { z };
                    row.copy_from(&y.transpose());
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::PointMass { direction } => write!(f, "point-mass:dir={direction}"),
            Pattern::Cluster { direction, spread } => write!(f, "cluster:dir={direction}:spread={spread:?}"),
            Pattern::NearSingular { subspace_dim } => write!(f, "near-singular:k={subspace_dim}"),
        }
    }
}

impl FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let mut dir = None;
        let mut spread = None;
        let mut k = None;
        for p in parts {
            let (key, value) = p
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in pattern, got {p:?}")))?;
            match key.trim() {
                "dir" => dir = Some(value.parse::<Direction>()?),
                "spread" => {
                    spread = Some(
                        value
                            .trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite() && *v >= 0.0)
                            .ok_or_else(|| Error::Parse(format!("bad spread {value:?}")))?,
                    )
                }
                "k" => {
                    k = Some(
                        value
                            .trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Parse(format!("bad subspace dimension {value:?}")))?,
                    )
                }
                other => return Err(Error::Parse(format!("unknown pattern key {other:?}"))),
            }
        }
        match head {
            "point-mass" => Ok(Pattern::PointMass {
                direction: dir.unwrap_or(Direction::Axis(0)),
            }),
            "cluster" => Ok(Pattern::Cluster {
                direction: dir.unwrap_or(Direction::Axis(0)),
                spread: spread.unwrap_or(0.1),
            }),
            "near-singular" => Ok(Pattern::NearSingular {
                subspace_dim: k.unwrap_or(1),
            }),
            _ => Err(Error::Parse(format!(
                "unknown pattern {head:?} (point-mass | cluster | near-singular)"
            ))),
        }
    }
}

/// Parses `1e2..1e12` (decades between the ends) or a comma list.
pub fn parse_ladder(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let ladder: Vec<f64> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: f64 = lo.trim().parse().map_err(|_| Error::Parse(format!("bad ladder start {lo:?}")))?;
        let hi: f64 = hi.trim().parse().map_err(|_| Error::Parse(format!("bad ladder end {hi:?}")))?;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Parse(format!("bad ladder range {s:?}")));
        }
        let (a, b) = (lo.log10(), hi.log10());
        let steps = ((b - a) / 2.0).round() as usize;
        if steps > 1000 {
            return Err(Error::Parse(format!("ladder {s:?} is too long")));
        }
        (0..=steps)
            .map(|i| if steps == 0 { lo } else { 10f64.powf(a + (b - a) * i as f64 / steps as f64) })
            .collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad magnitude {t:?}"))))
            .collect::<Result<_>>()?
    };
    validate_ladder(&ladder)?;
    Ok(ladder)
}

fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("magnitude ladder is empty".into()));
    }
    if ladder.iter().any(|v| !(v.is_finite() && *v > 0.0)) || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("magnitudes must be positive and increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    #[serde(flatten)]
    pub pattern: Pattern,
    pub m: usize,
    pub magnitude_ladder: Vec<f64>,
}

impl ContaminationSpec {
    pub fn new(pattern: Pattern, m: usize) -> Self {
        ContaminationSpec {
            pattern,
            m,
            magnitude_ladder: default_ladder(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        validate_ladder(&self.magnitude_ladder)
    }

    /// The `m` contamination points on ladder rung `rung`.
    ///
    /// The random shape is drawn from the stream keyed by `(seed, m)` and is
    /// shared by all rungs, which differ only by the magnitude factor.
    pub fn points(&self, q: usize, rung: usize, seed: u64) -> Result<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.m as u64);
        self.pattern.generate(q, self.m, self.magnitude_ladder[rung], &mut rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Diverging,
    EstimateFailed,
    /// Neither criterion met, e.g. bias still moving at the top of the ladder.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeRecord {
    #[serde(with = "float")]
    pub magnitude: f64,
    /// Riemannian distance to the clean estimate; `inf` on singularity or failure.
    #[serde(with = "float")]
    pub bias: f64,
    #[serde(with = "float")]
    pub lambda_max: f64,
    #[serde(with = "float")]
    pub lambda_min: f64,
    /// Lower bound on `lambda_min` implied by the clean points alone.
    pub lambda_floor: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub bound_violations: Vec<String>,
    /// Distance between the contaminated and the clean center.
    #[serde(with = "float")]
    pub center_shift: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub estimator: String,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub family: String,
    pub seed: u64,
    pub clean_eigenvalues: Vec<f64>,
    pub records: Vec<MagnitudeRecord>,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
}

/// Heuristics standing in for "bias is infinite", embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub bias_divergence: f64,
    pub growth_slack: f64,
    pub bound_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            bias_divergence: BIAS_DIVERGENCE,
            growth_slack: GROWTH_SLACK,
            bound_tol: BOUND_TOL,
        }
    }
}

/// Bias between two estimates; infinite when either is singular.
pub fn bias(clean: &ScatterEstimate, contaminated: &ScatterEstimate) -> Result<f64> {
    riemannian_bias(&clean.matrix, &contaminated.matrix)
}

/// `lambda_min` of `(1/(n+m)) sum_clean u(||x||^2 / t) x x^T`, a lower bound
/// for the smallest eigenvalue of the contaminated estimate that holds for
/// any added points when `u` is non-increasing.
fn eigen_floor(config: &EstimatorConfig, clean_rows: &Dataset, total: usize) -> Option<f64> {
    let x = clean_rows.matrix();
    let moment = |w: &dyn Fn(f64) -> f64| {
        let q = x.ncols();
        let mut acc = DMatrix::zeros(q, q);
        for r in x.row_iter() {
            let s = r.norm_squared();
            if s == 0.0 {
                continue;
            }
            acc += r.transpose() * r * w(s);
        }
        SymMatrix::from_matrix(acc / total as f64).ok().map(|m| m.min_eigenvalue())
    };
    let weight = config.weight.as_ref();
    let admissible = weight.is_some_and(|w| weights::is_admissible(w));
    match config.kind {
        EstimatorKind::PenTrace { eta } => Some(eta),
        EstimatorKind::PenKl { gamma } => Some(gamma),
        EstimatorKind::Sscm => moment(&|s| 1.0 / s),
        EstimatorKind::HybridTrace { eta } if admissible && eta > 0.0 => {
            let w = weight?;
            moment(&|s| w.u(s / eta))
        }
        EstimatorKind::HybridKl { gamma } if admissible && gamma > 0.0 => {
            let w = weight?;
            moment(&|s| w.u(s / gamma))
        }
        EstimatorKind::GenSscm if admissible => {
            let w = weight?;
            moment(&|s| w.u(s))
        }
        _ => None,
    }
}

fn center_of(data: &Dataset, config: &EstimatorConfig) -> Result<Vec<f64>> {
    location::locate(data, &config.center)
}

fn run_rung(data: &Dataset, config: &EstimatorConfig, spec: &ContaminationSpec, rung: usize, seed: u64, clean: &ScatterEstimate, clean_center: &[f64]) -> MagnitudeRecord {
    let magnitude = spec.magnitude_ladder[rung];
    let failed = |error: String| MagnitudeRecord {
        magnitude,
        bias: f64::INFINITY,
        lambda_max: f64::NAN,
        lambda_min: f64::NAN,
        lambda_floor: None,
        converged: false,
        iterations: 0,
        bound_violations: Vec::new(),
        center_shift: f64::NAN,
        error: Some(error),
    };
    let contaminated = match spec
        .points(data.q(), rung, seed)
        .and_then(Dataset::new)
        .and_then(|y| data.concat(&y))
    {
        Ok(z) => z,
        Err(e) => return failed(e.to_string()),
    };
    let est = match estimate(&contaminated, config) {
        Ok(est) => est,
        Err(e) => return failed(e.to_string()),
    };
    let center = est.center_used.clone().unwrap_or_else(|| vec![0.0; data.q()]);
    let center_shift = center
        .iter()
        .zip(clean_center)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let eig = est.matrix.eigen();
    let mut bound_violations = Vec::new();
    if let Some((lo, hi)) = est.eigenvalue_bounds() {
        let pen = est.penalized_form().eigen();
        let tol = BOUND_TOL * hi;
        if pen.min() < lo - tol {
            bound_violations.push(format!("smallest eigenvalue {:e} below lower bound {lo:e}", pen.min()));
        }
        if pen.max() > hi + tol {
            bound_violations.push(format!("largest eigenvalue {:e} above upper bound {hi:e}", pen.max()));
        }
    }
    let clean_rows = data.subtract_center(&center).ok();
    let floor = clean_rows.and_then(|c| eigen_floor(config, &c, contaminated.n()));
    if let Some(f) = floor {
        if eig.min() < f * (1.0 - 1e-6) - 1e-300 {
            bound_violations.push(format!("smallest eigenvalue {:e} below clean-data floor {f:e}", eig.min()));
        }
    }
    MagnitudeRecord {
        magnitude,
        bias: bias(clean, &est).unwrap_or(f64::INFINITY),
        lambda_max: eig.max(),
        lambda_min: eig.min(),
        lambda_floor: floor,
        converged: true,
        iterations: est.iterations,
        bound_violations,
        center_shift,
        error: None,
    }
}

fn verdict(records: &[MagnitudeRecord]) -> Verdict {
    // an unbounded bias on a rung that did converge outranks later failures
    if records
        .iter()
        .any(|r| r.converged && (!r.bias.is_finite() || r.bias > BIAS_DIVERGENCE))
    {
        return Verdict::Diverging;
    }
    if records.iter().any(|r| !r.converged) {
        return Verdict::EstimateFailed;
    }
    let b: Vec<f64> = records.iter().map(|r| r.bias).collect();
    let grows = |w: &[f64]| w[1] > w[0] * (1.0 + GROWTH_SLACK) + 1e-9;
    if b.len() >= 3 && b[b.len() - 3..].windows(2).all(grows) {
        return Verdict::Diverging;
    }
    let tail = &b[b.len() / 2..];
    let flat = tail.windows(2).all(|w| !grows(w));
    let above_floor = records.iter().all(|r| {
        r.lambda_min > 0.0 && r.lambda_floor.is_none_or(|f| r.lambda_min >= f * (1.0 - 1e-6))
    });
    if flat && above_floor {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    }
}

/// Runs the magnitude ladder for one contamination size.
pub fn stress_sweep(data: &Dataset, config: &EstimatorConfig, spec: &ContaminationSpec, seed: u64) -> Result<ContaminationReport> {
    spec.validate()?;
    config.validate()?;
    if !data.spans() {
        return Err(Error::NonSpanning {
            rank: data.rank(),
            q: data.q(),
        });
    }
    let clean = estimate(data, config)?;
    let clean_center = center_of(data, config)?;
    let records: Vec<MagnitudeRecord> = (0..spec.magnitude_ladder.len())
        .into_par_iter()
        .map(|rung| run_rung(data, config, spec, rung, seed, &clean, &clean_center))
        .collect();
    let n = data.n();
    Ok(ContaminationReport {
        estimator: config.kind.name().to_string(),
        n,
        m: spec.m,
        epsilon: spec.m as f64 / (n + spec.m) as f64,
        family: spec.pattern.to_string(),
        seed,
        clean_eigenvalues: clean.matrix.eigen().values.iter().copied().collect(),
        verdict: verdict(&records),
        records,
        thresholds: Thresholds::default(),
    })
}

/// Empirical bracket on the breakdown point under one contamination family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownBracket {
    pub family: String,
    pub n: usize,
    /// Largest `m/(n+m)` on the grid with a bounded verdict.
    pub lower: Option<f64>,
    /// Smallest `m/(n+m)` on the grid that diverged or failed.
    pub upper: Option<f64>,
    pub reports: Vec<ContaminationReport>,
}

pub fn breakdown_estimate(
    data: &Dataset,
    config: &EstimatorConfig,
    family: &ContaminationSpec,
    m_grid: &[usize],
    seed: u64,
) -> Result<BreakdownBracket> {
    let n = data.n();
    if m_grid.is_empty() || m_grid.iter().any(|&m| m == 0 || m > n) {
        return Err(Error::InvalidParameter(format!("m grid must be non-empty and within 1..={n}")));
    }
    let reports = m_grid
        .par_iter()
        .map(|&m| {
            let spec = ContaminationSpec {
                m,
                ..family.clone()
            };
            stress_sweep(data, config, &spec, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let lower = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Bounded)
        .map(|r| r.epsilon)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
    let upper = reports
        .iter()
        .filter(|r| matches!(r.verdict, Verdict::Diverging | Verdict::EstimateFailed))
        .map(|r| r.epsilon)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.min(e))));
    Ok(BreakdownBracket {
        family: family.pattern.to_string(),
        n,
        lower,
        upper,
        reports,
    })
}
