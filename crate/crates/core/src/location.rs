//! Centering: a known center, the coordinatewise median, or the spatial
//! (L1) median computed by Weiszfeld's iteration with the Vardi–Zhang step
//! when an iterate lands on an observation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianControls {
    pub max_iter: usize,
    /// Relative step size at which the iteration stops.
    pub tol: f64,
}

impl Default for MedianControls {
    fn default() -> Self {
        MedianControls {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CenterSpec {
    /// Data are already centered at the origin.
    Origin,
    Fixed(Vec<f64>),
    MarginalMedian,
    SpatialMedian(MedianControls),
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec::SpatialMedian(MedianControls::default())
    }
}

impl CenterSpec {
    pub fn spatial() -> Self {
        Self::default()
    }

    /// True when the center does not depend on the data.
    pub fn is_fixed(&self) -> bool {
        matches!(self, CenterSpec::Origin | CenterSpec::Fixed(_))
    }
}

impl fmt::Display for CenterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CenterSpec::Origin => write!(f, "origin"),
            CenterSpec::Fixed(c) => {
                let parts: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
                write!(f, "fixed:{}", parts.join(","))
            }
            CenterSpec::MarginalMedian => write!(f, "marginal"),
            CenterSpec::SpatialMedian(_) => write!(f, "spatial"),
        }
    }
}

impl FromStr for CenterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "origin" | "zero" | "none" => return Ok(CenterSpec::Origin),
            "marginal" => return Ok(CenterSpec::MarginalMedian),
            "spatial" => return Ok(CenterSpec::spatial()),
            _ => {}
        }
        let coords = s
            .strip_prefix("fixed:")
            .ok_or_else(|| Error::Parse(format!("unknown center spec {s:?}")))?;
        let c = coords
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("bad center coordinate {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CenterSpec::Fixed(c))
    }
}

impl TryFrom<String> for CenterSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CenterSpec> for String {
    fn from(c: CenterSpec) -> String {
        c.to_string()
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn marginal_median(data: &Dataset) -> Result<Vec<f64>> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok((0..data.q())
        .map(|j| {
            let mut col: Vec<f64> = data.matrix().column(j).iter().copied().collect();
            median_of(&mut col)
        })
        .collect())
}

/// Diagnostics from a spatial-median run.
#[derive(Debug, Clone)]
pub struct MedianReport {
    pub median: Vec<f64>,
    pub iterations: usize,
    /// `||sum_i S(x_i - mu)||` away from the data, or the excess of the
    /// Vardi–Zhang optimality condition when `mu` sits on an observation.
    pub residual: f64,
    /// `sum_i ||x_i - mu_k||` for every iterate, starting with the initial one.
    pub objective_trace: Vec<f64>,
}

pub fn spatial_objective(data: &Dataset, mu: &[f64]) -> f64 {
    let mu = DVector::from_column_slice(mu);
    data.iter_rows().map(|x| (x - &mu).norm()).sum()
}

struct WeiszfeldStep {
    next: DVector<f64>,
    residual: f64,
    optimal_at_point: bool,
    /// No observation within the coincidence radius.
    smooth: bool,
}

/// Newton step on the objective at `y`, valid when no observation coincides
/// with `y`.
fn newton_candidate(data: &Dataset, y: &DVector<f64>) -> Option<DVector<f64>> {
    let q = data.q();
    let mut grad = DVector::zeros(q);
    let mut hess = DMatrix::zeros(q, q);
    for x in data.iter_rows() {
        let diff = y - &x;
        let d = diff.norm();
        let s = &diff / d;
        grad += &s;
        hess += (DMatrix::identity(q, q) - &s * s.transpose()) / d;
    }
    let step = hess.cholesky()?.solve(&grad);
    let next = y - step;
    next.iter().all(|v| v.is_finite()).then_some(next)
}

fn weiszfeld_step(data: &Dataset, y: &DVector<f64>, coincide: f64) -> WeiszfeldStep {
    let q = data.q();
    let mut inv_sum = 0.0;
    let mut weighted = DVector::zeros(q);
    let mut signs = DVector::zeros(q);
    let mut multiplicity = 0usize;
    for x in data.iter_rows() {
        let diff = &x - y;
        let d = diff.norm();
        if d <= coincide {
            multiplicity += 1;
            continue;
        }
        inv_sum += 1.0 / d;
        weighted += &x / d;
        signs += diff / d;
    }
    let r = signs.norm();
    if inv_sum == 0.0 {
        return WeiszfeldStep {
            next: y.clone(),
            residual: 0.0,
            optimal_at_point: true,
            smooth: false,
        };
    }
    let target = weighted / inv_sum;
    if multiplicity == 0 {
        return WeiszfeldStep {
            next: target,
            residual: r,
            optimal_at_point: false,
            smooth: true,
        };
    }
    let eta = multiplicity as f64;
    if r <= eta {
        return WeiszfeldStep {
            next: y.clone(),
            residual: 0.0,
            optimal_at_point: true,
            smooth: false,
        };
    }
    let frac = eta / r;
    WeiszfeldStep {
        next: target * (1.0 - frac) + y * frac,
        residual: r - eta,
        optimal_at_point: false,
        smooth: false,
    }
}

/// True when observation `j` minimises the spatial objective: the summed
/// unit vectors from it to the other points are no longer than the number
/// of observations sitting on it.
fn optimal_at_observation(data: &Dataset, j: usize, coincide: f64) -> bool {
    let xj = data.row(j);
    let mut multiplicity = 0usize;
    let mut signs = DVector::zeros(data.q());
    for x in data.iter_rows() {
        let diff = &x - &xj;
        let d = diff.norm();
        if d <= coincide {
            multiplicity += 1;
        } else {
            signs += diff / d;
        }
    }
    signs.norm() <= multiplicity as f64
}

fn nearest_observation(data: &Dataset, y: &DVector<f64>) -> usize {
    data.iter_rows()
        .map(|x| (x - y).norm())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(i, _)| i)
}

/// Spatial median with full diagnostics.
pub fn spatial_median_report(data: &Dataset, controls: MedianControls) -> Result<MedianReport> {
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let init = DVector::from_vec(marginal_median(data)?);
    let mut dists: Vec<f64> = data.iter_rows().map(|x| (x - &init).norm()).collect();
    let max_dist = dists.iter().copied().fold(0.0, f64::max);
    if max_dist == 0.0 {
        return Ok(MedianReport {
            median: init.as_slice().to_vec(),
            iterations: 0,
            residual: 0.0,
            objective_trace: vec![0.0],
        });
    }
    let mut scale = median_of(&mut dists);
    if scale == 0.0 {
        scale = max_dist;
    }
    let coincide = 1e-12 * scale;
    let certified = 1e-7 * n as f64;

    let mut y = init;
    let mut trace = vec![spatial_objective(data, y.as_slice())];
    let mut residual = f64::INFINITY;
    let mut last_checked = usize::MAX;
    for k in 0..controls.max_iter {
        // Weiszfeld crawls towards a minimiser that is itself an observation
        let j = nearest_observation(data, &y);
        if j != last_checked || k % 16 == 0 {
            last_checked = j;
            if optimal_at_observation(data, j, coincide) {
                let at = data.row(j);
                if (&at - &y).norm() > 0.0 {
                    trace.push(spatial_objective(data, at.as_slice()));
                }
                return Ok(MedianReport {
                    median: at.as_slice().to_vec(),
                    iterations: k,
                    residual: 0.0,
                    objective_trace: trace,
                });
            }
        }
        let step = weiszfeld_step(data, &y, coincide);
        residual = step.residual;
        if step.optimal_at_point {
            return Ok(MedianReport {
                median: y.as_slice().to_vec(),
                iterations: k,
                residual: 0.0,
                objective_trace: trace,
            });
        }
        let mut next = step.next;
        let mut objective = spatial_objective(data, next.as_slice());
        if step.smooth {
            // keep whichever of the two candidates lowers the objective more,
            // Newton on ties within rounding
            if let Some(newton) = newton_candidate(data, &y) {
                let dir = newton - &y;
                let mut t = 1.0;
                for _ in 0..30 {
                    let trial = &y + &dir * t;
                    let f = spatial_objective(data, trial.as_slice());
                    if f <= objective * (1.0 + 4.0 * f64::EPSILON) {
                        next = trial;
                        objective = f;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        let moved = (&next - &y).norm();
        y = next;
        trace.push(objective);
        if moved <= controls.tol * scale && residual <= certified {
            // residual of the returned point, not of the previous one
            residual = weiszfeld_step(data, &y, coincide).residual;
            return Ok(MedianReport {
                median: y.as_slice().to_vec(),
                iterations: k + 1,
                residual,
                objective_trace: trace,
            });
        }
    }
    let last = weiszfeld_step(data, &y, coincide);
    residual = if last.optimal_at_point { 0.0 } else { last.residual.min(residual) };
    if residual <= certified {
        Ok(MedianReport {
            median: y.as_slice().to_vec(),
            iterations: controls.max_iter,
            residual,
            objective_trace: trace,
        })
    } else {
        Err(Error::MedianNonConvergence {
            iterations: controls.max_iter,
            residual,
            last: y.as_slice().to_vec(),
        })
    }
}

pub fn spatial_median(data: &Dataset, controls: MedianControls) -> Result<Vec<f64>> {
    spatial_median_report(data, controls).map(|r| r.median)
}

/// The center `spec` selects for `data`.
pub fn locate(data: &Dataset, spec: &CenterSpec) -> Result<Vec<f64>> {
    match spec {
        CenterSpec::Origin => Ok(vec![0.0; data.q()]),
        CenterSpec::Fixed(c) => {
            if c.len() != data.q() {
                return Err(Error::DimensionMismatch {
                    expected: data.q(),
                    actual: c.len(),
                });
            }
            Ok(c.clone())
        }
        CenterSpec::MarginalMedian => marginal_median(data),
        CenterSpec::SpatialMedian(controls) => spatial_median(data, *controls),
    }
}

/// Subtracts the selected center from every row; the result records it.
pub fn center(data: &Dataset, spec: &CenterSpec) -> Result<Dataset> {
    let c = locate(data, spec)?;
    data.subtract_center(&c)
}
