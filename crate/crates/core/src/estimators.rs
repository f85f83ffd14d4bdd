//! Scatter estimators: the spatial sign covariance matrix (SSCM), its
//! weighted generalisation, plain M-estimators, the trace- and
//! Kullback–Leibler-penalized M-estimators and their hybrid (shift-corrected)
//! versions, all solved by fixed-point reweighting.
//!
//! Every iterative estimator here is a fixed point of
//!
//! ```text
//! V = a * (1/n) sum_i u(x_i^T (alpha V + beta I)^{-1} x_i) x_i x_i^T + b I
//! ```
//!
//! for a kind-specific choice of `(alpha, beta, a, b)`:
//!
//! | kind          | alpha   | beta  | a     | b     |
//! |---------------|---------|-------|-------|-------|
//! | plain M       | 1       | 0     | 1     | 0     |
//! | trace penalty | 1       | 0     | 1     | eta   |
//! | KL penalty    | 1       | 0     | 1-gam | gam   |
//! | hybrid trace  | 1       | eta   | 1     | 0     |
//! | hybrid KL     | 1-gam   | gam   | 1     | 0     |

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::location::{self, CenterSpec};
use crate::matcore::{eigendecompose, SpdMatrix, SymMatrix};
use crate::weights::{self, WeightFunction, WeightSpec};

/// Largest eigenvalue or condition number past which a plain M-estimation
/// run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Sscm,
    GenSscm,
    MPlain,
    PenTrace { eta: f64 },
    PenKl { gamma: f64 },
    HybridTrace { eta: f64 },
    HybridKl { gamma: f64 },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Sscm => "sscm",
            EstimatorKind::GenSscm => "gen-sscm",
            EstimatorKind::MPlain => "m",
            EstimatorKind::PenTrace { .. } => "pen-trace",
            EstimatorKind::PenKl { .. } => "pen-kl",
            EstimatorKind::HybridTrace { .. } => "hybrid-trace",
            EstimatorKind::HybridKl { .. } => "hybrid-kl",
        }
    }

    pub fn is_penalized(&self) -> bool {
        matches!(self, EstimatorKind::PenTrace { .. } | EstimatorKind::PenKl { .. })
    }

    pub fn is_hybrid(&self) -> bool {
        matches!(self, EstimatorKind::HybridTrace { .. } | EstimatorKind::HybridKl { .. })
    }

    /// The tuning constant (eta or gamma), if the kind has one.
    pub fn tuning(&self) -> Option<f64> {
        match *self {
            EstimatorKind::PenTrace { eta } | EstimatorKind::HybridTrace { eta } => Some(eta),
            EstimatorKind::PenKl { gamma } | EstimatorKind::HybridKl { gamma } => Some(gamma),
            _ => None,
        }
    }

    /// Same kind with the tuning constant replaced.
    pub fn with_tuning(&self, value: f64) -> EstimatorKind {
        match self {
            EstimatorKind::PenTrace { .. } => EstimatorKind::PenTrace { eta: value },
            EstimatorKind::HybridTrace { .. } => EstimatorKind::HybridTrace { eta: value },
            EstimatorKind::PenKl { .. } => EstimatorKind::PenKl { gamma: value },
            EstimatorKind::HybridKl { .. } => EstimatorKind::HybridKl { gamma: value },
            other => *other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EstimatorKind::PenTrace { eta } if !(eta > 0.0 && eta.is_finite()) => {
                Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")))
            }
            EstimatorKind::HybridTrace { eta } if !(eta >= 0.0 && eta.is_finite()) => {
                Err(Error::InvalidParameter(format!("eta must be >= 0, got {eta}")))
            }
            EstimatorKind::PenKl { gamma } if !(gamma > 0.0 && gamma <= 1.0) => Err(
                Error::InvalidParameter(format!("gamma must lie in (0, 1], got {gamma}")),
            ),
            EstimatorKind::HybridKl { gamma } if !(0.0..=1.0).contains(&gamma) => Err(
                Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to do with observations that sit exactly on the center when the
/// weight is infinite there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroNormPolicy {
    /// Omit the term, keeping the `1/n` normalisation (as `S(0) = 0` does).
    #[default]
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverControls {
    /// Starting matrix; identity when absent.
    pub init: Option<SymMatrix>,
    pub max_iter: usize,
    /// Bound on the Frobenius gap between successive iterates and on the
    /// extrapolated distance to the fixed point, relative to `1 + ||V||`
    /// (`||V||` for the plain M-estimator).
    pub tol: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            init: None,
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

impl SolverControls {
    pub fn with_init(mut self, init: SymMatrix) -> Self {
        self.init = Some(init);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Required by every kind except `Sscm`.
    pub weight: Option<WeightSpec>,
    pub center: CenterSpec,
    pub solver: SolverControls,
    pub zero_norm_policy: ZeroNormPolicy,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, weight: Option<WeightSpec>, center: CenterSpec) -> Self {
        EstimatorConfig {
            kind,
            weight,
            center,
            solver: SolverControls::default(),
            zero_norm_policy: ZeroNormPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.kind != EstimatorKind::Sscm && self.weight.is_none() {
            return Err(Error::InvalidParameter(format!("estimator {} needs a weight", self.kind)));
        }
        if self.solver.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be > 0".into()));
        }
        Ok(())
    }

    fn weight(&self) -> Result<&WeightSpec> {
        self.weight
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("estimator {} needs a weight", self.kind)))
    }
}

/// Which hypotheses of the eigenvalue-bound and breakdown guarantees hold
/// for a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GuaranteeFlags {
    /// The weight passed `weights::validate` with no error-level finding.
    pub weight_admissible: bool,
    /// Declared `psi(inf)`; `None` when unbounded.
    pub kappa: Option<f64>,
    /// The penalized solution is sandwiched between multiples of the identity.
    pub eigenvalue_bounds: bool,
    /// Breakdown point one: the estimate stays bounded under any added
    /// contamination.
    pub breakdown_point_one: bool,
    pub data_spans: bool,
    pub fixed_center: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ScatterEstimate {
    pub kind: EstimatorKind,
    pub matrix: SymMatrix,
    pub iterations: usize,
    /// Frobenius norm of the last step `V_{k+1} - V_k`.
    pub final_gap: f64,
    /// Frobenius norm of the estimating-equation residual at the returned matrix.
    pub residual: f64,
    pub guarantees: GuaranteeFlags,
    pub center_used: Option<Vec<f64>>,
    pub n: usize,
    pub dropped_rows: usize,
}

impl ScatterEstimate {
    /// Positive definite counterpart: `V + eta I` or `(1 - gamma) V + gamma I`
    /// for hybrids, the matrix itself otherwise.
    pub fn penalized_form(&self) -> SymMatrix {
        match self.kind {
            EstimatorKind::HybridTrace { eta } => self.matrix.shift(eta),
            EstimatorKind::HybridKl { gamma } => self.matrix.scale(1.0 - gamma).shift(gamma),
            _ => self.matrix.clone(),
        }
    }

    /// Identity multiples bracketing `penalized_form()` whenever
    /// `guarantees.eigenvalue_bounds` holds.
    pub fn eigenvalue_bounds(&self) -> Option<(f64, f64)> {
        if !self.guarantees.eigenvalue_bounds {
            return None;
        }
        let kappa = self.guarantees.kappa?;
        match self.kind {
            EstimatorKind::PenTrace { eta } | EstimatorKind::HybridTrace { eta } => {
                Some((eta, eta / (1.0 - kappa)))
            }
            EstimatorKind::PenKl { gamma } | EstimatorKind::HybridKl { gamma } => {
                Some((gamma, gamma / (1.0 - (1.0 - gamma) * kappa)))
            }
            _ => None,
        }
    }
}

/// `S(x) = x / ||x||`, `S(0) = 0`.
pub fn spatial_sign(x: &[f64]) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        vec![0.0; x.len()]
    } else {
        x.iter().map(|v| v / norm).collect()
    }
}

/// Rows treated as lying on the center: `||x|| <= 1e-12 * median ||x_i||`
/// or squared norm below the smallest admissible Tyler argument.
fn zero_rows(data: &Dataset) -> Vec<bool> {
    let norms: Vec<f64> = data.iter_rows().map(|x| x.norm()).collect();
    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let typical = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    norms
        .iter()
        .map(|&r| r * r < weights::TYLER_MIN_S || r <= 1e-12 * typical)
        .collect()
}

/// Rows entering the weighted sums, after applying the zero-norm policy.
fn active_rows(data: &Dataset, drop_zero: bool, policy: ZeroNormPolicy) -> Result<(DMatrix<f64>, usize)> {
    if !drop_zero {
        return Ok((data.matrix().clone(), 0));
    }
    let zero = zero_rows(data);
    if policy == ZeroNormPolicy::Error {
        if let Some(row) = zero.iter().position(|&z| z) {
            return Err(Error::ZeroNormObservation { row });
        }
    }
    let keep: Vec<usize> = (0..data.n()).filter(|&i| !zero[i]).collect();
    let dropped = data.n() - keep.len();
    if dropped > 0 {
        log::info!("dropping {dropped} zero-norm observation(s)");
    }
    Ok((data.select(&keep).matrix().clone(), dropped))
}

/// `(1/n) sum_i w_i x_i x_i^T` over the rows of `x`.
fn weighted_moment(x: &DMatrix<f64>, w: &[f64], n: usize) -> SymMatrix {
    let mut xw = x.clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w) {
        row *= wi;
    }
    let m = x.transpose() * xw / n as f64;
    SymMatrix::from_matrix(m).expect("square by construction")
}

fn check_nonempty(data: &Dataset) -> Result<()> {
    if data.n() == 0 {
        Err(Error::EmptyDataset)
    } else {
        Ok(())
    }
}

fn guarantee_flags(kind: EstimatorKind, weight: Option<&WeightSpec>, data: &Dataset, fixed_center: bool) -> GuaranteeFlags {
    let data_spans = data.spans();
    let mut notes = Vec::new();
    let (admissible, kappa) = match weight {
        Some(w) => {
            for v in weights::validate(w) {
                notes.push(format!("weight: {}", v.message));
            }
            (weights::is_admissible(w), w.kappa())
        }
        // the spatial sign behaves as u(s) = 1/s, kappa = 1
        None => (true, 1.0),
    };
    let kappa_opt = kappa.is_finite().then_some(kappa);
    let eigenvalue_bounds = kappa.is_finite()
        && match kind {
            EstimatorKind::PenTrace { .. } | EstimatorKind::HybridTrace { .. } => kappa < 1.0,
            EstimatorKind::PenKl { gamma } | EstimatorKind::HybridKl { gamma } => {
                gamma >= 1.0 || kappa < 1.0 / (1.0 - gamma)
            }
            _ => false,
        };
    if kind.tuning().is_some() && !eigenvalue_bounds {
        notes.push("kappa too large for the eigenvalue sandwich bound".into());
    }
    let breakdown_point_one = match kind {
        EstimatorKind::PenTrace { .. } | EstimatorKind::PenKl { .. } => eigenvalue_bounds,
        EstimatorKind::HybridTrace { eta } => admissible && eta > 0.0 && kappa < 1.0 && data_spans && fixed_center,
        EstimatorKind::HybridKl { gamma } => {
            admissible
                && kappa.is_finite()
                && gamma > 0.0f64.max((kappa - 1.0) / kappa)
                && data_spans
                && fixed_center
        }
        EstimatorKind::GenSscm => admissible && data_spans && fixed_center,
        EstimatorKind::Sscm => data_spans && fixed_center,
        EstimatorKind::MPlain => false,
    };
    if kind.is_hybrid() || matches!(kind, EstimatorKind::Sscm | EstimatorKind::GenSscm) {
        if !fixed_center {
            notes.push("data-dependent center: breakdown point limited by the location statistic".into());
        }
        if !data_spans {
            notes.push("data do not span R^q".into());
        }
    }
    if matches!(weight, Some(w) if w.infinite_at_zero()) {
        notes.push("rho unbounded below: uniqueness relies on the kappa condition".into());
    }
    GuaranteeFlags {
        weight_admissible: admissible,
        kappa: kappa_opt,
        eigenvalue_bounds,
        breakdown_point_one,
        data_spans,
        fixed_center,
        notes,
    }
}

/// Spatial sign covariance matrix of `data` centered by `center`.
pub fn sscm(data: &Dataset, center: &CenterSpec) -> Result<ScatterEstimate> {
    check_nonempty(data)?;
    let centered = location::center(data, center)?;
    let zero = zero_rows(&centered);
    let q = data.q();
    let mut acc = DMatrix::zeros(q, q);
    for (i, x) in centered.iter_rows().enumerate() {
        if zero[i] {
            continue;
        }
        let s = DVector::from_vec(spatial_sign(x.as_slice()));
        acc += &s * s.transpose();
    }
    let matrix = SymMatrix::from_matrix(acc / data.n() as f64)?;
    Ok(ScatterEstimate {
        kind: EstimatorKind::Sscm,
        matrix,
        iterations: 0,
        final_gap: 0.0,
        residual: 0.0,
        guarantees: guarantee_flags(EstimatorKind::Sscm, None, &centered, center.is_fixed()),
        center_used: centered.center_used().map(<[f64]>::to_vec),
        n: data.n(),
        dropped_rows: zero.iter().filter(|&&z| z).count(),
    })
}

/// Weighted second-moment matrix `(1/n) sum_i u(x_i^T x_i) x_i x_i^T`.
pub fn gen_sscm(data: &Dataset, weight: &WeightSpec, center: &CenterSpec, policy: ZeroNormPolicy) -> Result<ScatterEstimate> {
    check_nonempty(data)?;
    let centered = location::center(data, center)?;
    let mut est = gen_sscm_centered(&centered, weight, policy)?;
    est.guarantees = guarantee_flags(EstimatorKind::GenSscm, Some(weight), &centered, center.is_fixed());
    Ok(est)
}

fn gen_sscm_centered(data: &Dataset, weight: &WeightSpec, policy: ZeroNormPolicy) -> Result<ScatterEstimate> {
    let (x, dropped) = active_rows(data, weight.infinite_at_zero(), policy)?;
    let w: Vec<f64> = x.row_iter().map(|r| weight.u(r.norm_squared())).collect();
    Ok(ScatterEstimate {
        kind: EstimatorKind::GenSscm,
        matrix: weighted_moment(&x, &w, data.n()),
        iterations: 0,
        final_gap: 0.0,
        residual: 0.0,
        guarantees: GuaranteeFlags::default(),
        center_used: data.center_used().map(<[f64]>::to_vec),
        n: data.n(),
        dropped_rows: dropped,
    })
}

/// Coefficients of the fixed-point map described in the module docs.
#[derive(Debug, Clone, Copy)]
struct FixedPointMap {
    alpha: f64,
    beta: f64,
    a: f64,
    b: f64,
}

impl FixedPointMap {
    fn for_kind(kind: EstimatorKind) -> FixedPointMap {
        let (alpha, beta, a, b) = match kind {
            EstimatorKind::PenTrace { eta } => (1.0, 0.0, 1.0, eta),
            EstimatorKind::PenKl { gamma } => (1.0, 0.0, 1.0 - gamma, gamma),
            EstimatorKind::HybridTrace { eta } => (1.0, eta, 1.0, 0.0),
            EstimatorKind::HybridKl { gamma } => (1.0 - gamma, gamma, 1.0, 0.0),
            _ => (1.0, 0.0, 1.0, 0.0),
        };
        FixedPointMap { alpha, beta, a, b }
    }

    /// Applies the map; `None` if `alpha V + beta I` is not positive definite.
    fn apply(&self, v: &SymMatrix, x: &DMatrix<f64>, n: usize, weight: &WeightSpec) -> Option<SymMatrix> {
        let inner = v.scale(self.alpha).shift(self.beta);
        let eig = eigendecompose(&inner);
        if !eig.is_strictly_positive() {
            return None;
        }
        let y = x * &eig.vectors;
        let w: Vec<f64> = y
            .row_iter()
            .map(|r| {
                let s: f64 = r.iter().zip(eig.values.iter()).map(|(c, l)| c * c / l).sum();
                weight.u(s)
            })
            .collect();
        Some(weighted_moment(x, &w, n).scale(self.a).shift(self.b))
    }
}

struct FixedPointOutcome {
    matrix: SymMatrix,
    iterations: usize,
    final_gap: f64,
    residual: f64,
}

fn run_fixed_point(
    kind: EstimatorKind,
    x: &DMatrix<f64>,
    n: usize,
    weight: &WeightSpec,
    controls: &SolverControls,
) -> Result<FixedPointOutcome> {
    let q = x.ncols();
    let map = FixedPointMap::for_kind(kind);
    let plain = kind == EstimatorKind::MPlain;
    let mut v = match &controls.init {
        Some(init) => {
            if init.dim() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    actual: init.dim(),
                });
            }
            SpdMatrix::new(init.clone())?;
            init.clone()
        }
        None => SymMatrix::identity(q),
    };
    let diverged = |iterations: usize, v: &SymMatrix| {
        let eig = v.eigen();
        Error::LikelyNonexistent {
            iterations,
            largest: eig.max(),
            condition: eig.max() / eig.min(),
        }
    };

    if weight.is_constant() {
        let next = map.apply(&v, x, n, weight).ok_or_else(|| diverged(0, &v))?;
        let residual = map
            .apply(&next, x, n, weight)
            .map(|r| r.distance(&next).unwrap())
            .unwrap_or(0.0);
        return Ok(FixedPointOutcome {
            matrix: next,
            iterations: 1,
            final_gap: 0.0,
            residual,
        });
    }

    let mut gap = f64::INFINITY;
    for k in 1..=controls.max_iter {
        let next = match map.apply(&v, x, n, weight) {
            Some(m) => m,
            None if plain => return Err(diverged(k, &v)),
            None => {
                return Err(Error::NotPositiveDefinite {
                    min_eigenvalue: v.min_eigenvalue(),
                })
            }
        };
        let prev_gap = gap;
        gap = next.distance(&v)?;
        let scale = if plain { v.frobenius_norm() } else { 1.0 + v.frobenius_norm() };
        v = next;
        if plain {
            let eig = v.eigen();
            let (top, bottom) = (eig.max(), eig.min());
            if !top.is_finite() || top > DIVERGENCE_LIMIT || top < 1.0 / DIVERGENCE_LIMIT || !(bottom > top / DIVERGENCE_LIMIT) {
                return Err(diverged(k, &v));
            }
        }
        // distance to the fixed point is about gap * r / (1 - r) for an
        // observed contraction rate r
        let rate = (gap / prev_gap).min(0.999);
        let distance = if gap == 0.0 { 0.0 } else { gap * rate / (1.0 - rate) };
        if gap <= controls.tol * scale && distance <= controls.tol * scale {
            let residual = match map.apply(&v, x, n, weight) {
                Some(r) => r.distance(&v)?,
                None => f64::INFINITY,
            };
            if residual > 1e-8 * (1.0 + v.frobenius_norm()) {
                return Err(Error::NonConvergence {
                    iterations: k,
                    gap,
                    last: v.to_row_major(),
                });
            }
            return Ok(FixedPointOutcome {
                matrix: v,
                iterations: k,
                final_gap: gap,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: controls.max_iter,
        gap,
        last: v.to_row_major(),
    })
}

fn solve_iterative(
    data: &Dataset,
    weight: &WeightSpec,
    kind: EstimatorKind,
    controls: &SolverControls,
    policy: ZeroNormPolicy,
) -> Result<ScatterEstimate> {
    check_nonempty(data)?;
    kind.validate()?;
    let (x, dropped) = active_rows(data, weight.infinite_at_zero(), policy)?;
    let out = run_fixed_point(kind, &x, data.n(), weight, controls)?;
    Ok(ScatterEstimate {
        kind,
        matrix: out.matrix,
        iterations: out.iterations,
        final_gap: out.final_gap,
        residual: out.residual,
        guarantees: guarantee_flags(kind, Some(weight), data, true),
        center_used: data.center_used().map(<[f64]>::to_vec),
        n: data.n(),
        dropped_rows: dropped,
    })
}

/// Solves `Sigma = (1/n) sum u(x^T Sigma^{-1} x) x x^T + eta I`.
pub fn solve_pen_trace(data: &Dataset, weight: &WeightSpec, eta: f64, solver: &SolverControls) -> Result<ScatterEstimate> {
    solve_iterative(data, weight, EstimatorKind::PenTrace { eta }, solver, ZeroNormPolicy::Drop)
}

/// Solves `Sigma = (1 - gamma) (1/n) sum u(x^T Sigma^{-1} x) x x^T + gamma I`.
pub fn solve_pen_kl(data: &Dataset, weight: &WeightSpec, gamma: f64, solver: &SolverControls) -> Result<ScatterEstimate> {
    let kind = EstimatorKind::PenKl { gamma };
    kind.validate()?;
    if gamma == 1.0 {
        check_nonempty(data)?;
        return Ok(ScatterEstimate {
            kind,
            matrix: SymMatrix::identity(data.q()),
            iterations: 0,
            final_gap: 0.0,
            residual: 0.0,
            guarantees: guarantee_flags(kind, Some(weight), data, true),
            center_used: data.center_used().map(<[f64]>::to_vec),
            n: data.n(),
            dropped_rows: 0,
        });
    }
    solve_iterative(data, weight, kind, solver, ZeroNormPolicy::Drop)
}

/// Solves `V = (1/n) sum u(x^T (V + eta I)^{-1} x) x x^T`; `eta = 0` is the
/// plain M-estimator.
pub fn solve_hybrid_trace(data: &Dataset, weight: &WeightSpec, eta: f64, solver: &SolverControls) -> Result<ScatterEstimate> {
    EstimatorKind::HybridTrace { eta }.validate()?;
    if eta == 0.0 {
        return solve_m_plain(data, weight, solver);
    }
    solve_iterative(data, weight, EstimatorKind::HybridTrace { eta }, solver, ZeroNormPolicy::Drop)
}

/// Solves `V = (1/n) sum u(x^T ((1 - gamma) V + gamma I)^{-1} x) x x^T`;
/// `gamma = 0` is the plain M-estimator and `gamma = 1` the generalized SSCM.
pub fn solve_hybrid_kl(data: &Dataset, weight: &WeightSpec, gamma: f64, solver: &SolverControls) -> Result<ScatterEstimate> {
    let kind = EstimatorKind::HybridKl { gamma };
    kind.validate()?;
    if gamma == 0.0 {
        return solve_m_plain(data, weight, solver);
    }
    if gamma == 1.0 {
        check_nonempty(data)?;
        let mut est = gen_sscm_centered(data, weight, ZeroNormPolicy::Drop)?;
        est.kind = kind;
        est.guarantees = guarantee_flags(kind, Some(weight), data, true);
        return Ok(est);
    }
    solve_iterative(data, weight, kind, solver, ZeroNormPolicy::Drop)
}

/// Plain M-estimator of scatter. The data must span `R^q`; divergence of the
/// iterates is reported as `LikelyNonexistent`.
pub fn solve_m_plain(data: &Dataset, weight: &WeightSpec, solver: &SolverControls) -> Result<ScatterEstimate> {
    check_nonempty(data)?;
    let rank = data.rank();
    if rank < data.q() {
        return Err(Error::NonSpanning { rank, q: data.q() });
    }
    solve_iterative(data, weight, EstimatorKind::MPlain, solver, ZeroNormPolicy::Drop)
}

/// Centers `data` per `config.center` and runs the configured estimator.
pub fn estimate(data: &Dataset, config: &EstimatorConfig) -> Result<ScatterEstimate> {
    config.validate()?;
    check_nonempty(data)?;
    if config.kind == EstimatorKind::Sscm {
        return sscm(data, &config.center);
    }
    let weight = config.weight()?;
    let centered = location::center(data, &config.center)?;
    let policy = config.zero_norm_policy;
    let mut est = match config.kind {
        EstimatorKind::Sscm => unreachable!(),
        EstimatorKind::GenSscm => gen_sscm_centered(&centered, weight, policy)?,
        EstimatorKind::MPlain => {
            let rank = centered.rank();
            if rank < centered.q() {
                return Err(Error::NonSpanning { rank, q: centered.q() });
            }
            solve_iterative(&centered, weight, config.kind, &config.solver, policy)?
        }
        EstimatorKind::HybridTrace { eta } if eta == 0.0 => {
            let mut cfg = config.clone();
            cfg.kind = EstimatorKind::MPlain;
            return estimate(data, &cfg);
        }
        EstimatorKind::HybridKl { gamma } if gamma == 0.0 => {
            let mut cfg = config.clone();
            cfg.kind = EstimatorKind::MPlain;
            return estimate(data, &cfg);
        }
        EstimatorKind::HybridKl { gamma } if gamma == 1.0 => {
            let mut est = gen_sscm_centered(&centered, weight, policy)?;
            est.kind = config.kind;
            est
        }
        EstimatorKind::PenKl { gamma } if gamma == 1.0 => solve_pen_kl(&centered, weight, gamma, &config.solver)?,
        _ => solve_iterative(&centered, weight, config.kind, &config.solver, policy)?,
    };
    est.guarantees = guarantee_flags(config.kind, Some(weight), &centered, config.center.is_fixed());
    est.center_used = centered.center_used().map(<[f64]>::to_vec);
    Ok(est)
}

/// Penalty term of the penalized loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    /// `eta * tr(Sigma^{-1})`
    Trace { eta: f64 },
    /// `eta * (tr(Sigma^{-1}) + log det Sigma)` with `eta = gamma / (1 - gamma)`.
    Kl { gamma: f64 },
}

/// `(1/n) sum rho(x_i^T Sigma^{-1} x_i) + log det Sigma + eta * Pi(Sigma)`.
///
/// Observations on the center are skipped for weights with `u(0) = inf`.
pub fn evaluate_loss(data: &Dataset, sigma: &SymMatrix, weight: &WeightSpec, penalty: Penalty) -> Result<f64> {
    check_nonempty(data)?;
    if sigma.dim() != data.q() {
        return Err(Error::DimensionMismatch {
            expected: data.q(),
            actual: sigma.dim(),
        });
    }
    let spd = SpdMatrix::new(sigma.clone())?;
    let (x, _) = active_rows(data, weight.infinite_at_zero(), ZeroNormPolicy::Drop)?;
    let eig = spd.eigen();
    let y = &x * &eig.vectors;
    let fit: f64 = y
        .row_iter()
        .map(|r| {
            let s: f64 = r.iter().zip(eig.values.iter()).map(|(c, l)| c * c / l).sum();
            weight.rho(s)
        })
        .sum::<f64>()
        / data.n() as f64;
    let log_det = spd.log_det();
    let trace_inv: f64 = eig.values.iter().map(|l| 1.0 / l).sum();
    let pen = match penalty {
        Penalty::None => 0.0,
        Penalty::Trace { eta } => eta * trace_inv,
        Penalty::Kl { gamma } => {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "KL loss needs gamma in (0, 1), got {gamma}"
                )));
            }
            gamma / (1.0 - gamma) * (trace_inv + log_det)
        }
    };
    Ok(fit + log_det + pen)
}
