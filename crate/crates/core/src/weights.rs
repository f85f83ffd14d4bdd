//! Weight function families `u(s)`, their influence functions `psi(s) = s u(s)`
//! and the loss `rho(s)` with `rho' = u`.
//!
//! Spec strings used on the command line and in JSON:
//! `tyler:<kappa>`, `huber:<kappa>:<c>`, `gaussian`, `scaled:<base>:eta=<eta>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this squared distance the Tyler weight `kappa / s` is refused.
pub const TYLER_MIN_S: f64 = 1e-300;

/// A weight function with the pieces the estimating equations need.
pub trait WeightFunction {
    fn u(&self, s: f64) -> f64;

    fn psi(&self, s: f64) -> f64 {
        s * self.u(s)
    }

    fn rho(&self, s: f64) -> f64;

    /// Declared supremum of `psi`, `f64::INFINITY` when unbounded.
    fn kappa(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightSpec {
    /// `u(s) = kappa / s`
    Tyler { kappa: f64 },
    /// `u(s) = kappa / max(s, c)`
    BoundedHuber { kappa: f64, c: f64 },
    /// `u(s) = 1`, which gives the sample second-moment matrix.
    Gaussian,
    /// `u(s) = base.u(eta * s)`
    Scaled { base: Box<WeightSpec>, eta: f64 },
}

impl WeightSpec {
    pub fn tyler(kappa: f64) -> Result<Self> {
        check_positive("kappa", kappa)?;
        Ok(WeightSpec::Tyler { kappa })
    }

    pub fn bounded_huber(kappa: f64, c: f64) -> Result<Self> {
        check_positive("kappa", kappa)?;
        check_positive("c", c)?;
        Ok(WeightSpec::BoundedHuber { kappa, c })
    }

    pub fn scaled(base: WeightSpec, eta: f64) -> Result<Self> {
        check_positive("eta", eta)?;
        Ok(WeightSpec::Scaled {
            base: Box::new(base),
            eta,
        })
    }

    /// `u(s)` with domain checks.
    pub fn try_u(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("u(s) needs s >= 0, got {s}")));
        }
        if self.infinite_at_zero() && self.inner_argument(s) < TYLER_MIN_S {
            return Err(Error::ZeroNormObservation { row: 0 });
        }
        Ok(self.u(s))
    }

    pub fn try_psi(&self, s: f64) -> Result<f64> {
        self.try_u(s)?;
        Ok(self.psi(s))
    }

    pub fn try_rho(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("rho(s) needs s > 0, got {s}")));
        }
        Ok(self.rho(s))
    }

    /// True when `u` is constant, so the estimating equations have closed forms.
    pub fn is_constant(&self) -> bool {
        match self {
            WeightSpec::Gaussian => true,
            WeightSpec::Scaled { base, .. } => base.is_constant(),
            _ => false,
        }
    }

    /// True when `u(0)` is infinite; such weights cannot handle an observation
    /// located exactly at the center.
    pub fn infinite_at_zero(&self) -> bool {
        match self {
            WeightSpec::Tyler { .. } => true,
            WeightSpec::Scaled { base, .. } => base.infinite_at_zero(),
            _ => false,
        }
    }

    fn inner_argument(&self, s: f64) -> f64 {
        match self {
            WeightSpec::Scaled { base, eta } => base.inner_argument(eta * s),
            _ => s,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be a finite positive number, got {v}")))
    }
}

impl WeightFunction for WeightSpec {
    fn u(&self, s: f64) -> f64 {
        match self {
            WeightSpec::Tyler { kappa } => kappa / s,
            WeightSpec::BoundedHuber { kappa, c } => kappa / s.max(*c),
            WeightSpec::Gaussian => 1.0,
            WeightSpec::Scaled { base, eta } => base.u(eta * s),
        }
    }

    fn psi(&self, s: f64) -> f64 {
        match self {
            WeightSpec::Tyler { kappa } => *kappa,
            WeightSpec::BoundedHuber { kappa, c } => kappa * s / s.max(*c),
            WeightSpec::Gaussian => s,
            WeightSpec::Scaled { base, eta } => base.psi(eta * s) / eta,
        }
    }

    fn rho(&self, s: f64) -> f64 {
        match self {
            WeightSpec::Tyler { kappa } => kappa * s.ln(),
            WeightSpec::BoundedHuber { kappa, c } => {
                if s <= *c {
                    s * kappa / c
                } else {
                    kappa * (1.0 + (s / c).ln())
                }
            }
            WeightSpec::Gaussian => s,
            WeightSpec::Scaled { base, eta } => base.rho(eta * s) / eta,
        }
    }

    fn kappa(&self) -> f64 {
        match self {
            WeightSpec::Tyler { kappa } | WeightSpec::BoundedHuber { kappa, .. } => *kappa,
            WeightSpec::Gaussian => f64::INFINITY,
            WeightSpec::Scaled { base, eta } => base.kappa() / eta,
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Tyler { kappa } => write!(f, "tyler:{kappa:?}"),
            WeightSpec::BoundedHuber { kappa, c } => write!(f, "huber:{kappa:?}:{c:?}"),
            WeightSpec::Gaussian => write!(f, "gaussian"),
            WeightSpec::Scaled { base, eta } => write!(f, "scaled:{base}:eta={eta:?}"),
        }
    }
}

fn parse_number(name: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{name}: expected a number, got {s:?}")))
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("scaled:") {
            let (base, eta) = rest
                .rsplit_once(":eta=")
                .ok_or_else(|| Error::Parse(format!("scaled weight needs ':eta=<value>': {s:?}")))?;
            let base: WeightSpec = base.parse()?;
            return WeightSpec::scaled(base, parse_number("eta", eta)?);
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["gaussian"] => Ok(WeightSpec::Gaussian),
            ["tyler", k] => WeightSpec::tyler(parse_number("kappa", k)?),
            ["huber", k, c] => WeightSpec::bounded_huber(parse_number("kappa", k)?, parse_number("c", c)?),
            _ => Err(Error::Parse(format!(
                "unknown weight spec {s:?} (expected tyler:<k>, huber:<k>:<c>, gaussian or scaled:<base>:eta=<e>)"
            ))),
        }
    }
}

impl TryFrom<String> for WeightSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightSpec> for String {
    fn from(w: WeightSpec) -> String {
        w.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonPositiveWeight,
    WeightIncreasing,
    InfluenceDecreasing,
    KappaMismatch,
    InfluenceUnbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    /// Grid point where the violation was observed.
    pub at: f64,
    pub message: String,
}

/// Log-spaced validation grid on `[1e-8, 1e12]`.
pub fn validation_grid() -> Vec<f64> {
    const POINTS: usize = 200;
    let (lo, hi) = (-8.0f64, 12.0f64);
    (0..POINTS)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (POINTS - 1) as f64))
        .collect()
}

/// Checks positivity and monotonicity of `u`, monotonicity of `psi` and the
/// declared `kappa` against `psi(1e12)`. An empty list means the weight meets
/// every hypothesis of the eigenvalue-bound and breakdown results.
pub fn validate<W: WeightFunction + ?Sized>(w: &W) -> Vec<Violation> {
    let grid = validation_grid();
    let mut out = Vec::new();
    let us: Vec<f64> = grid.iter().map(|&s| w.u(s)).collect();
    let psis: Vec<f64> = grid.iter().map(|&s| w.psi(s)).collect();

    if let Some((&s, u)) = grid.iter().zip(&us).find(|(_, u)| !(**u > 0.0)) {
        out.push(Violation {
            kind: ViolationKind::NonPositiveWeight,
            severity: Severity::Error,
            at: s,
            message: format!("u({s:e}) = {u:e} is not positive"),
        });
    }
    for k in 1..grid.len() {
        if us[k] > us[k - 1] + 1e-12 * (1.0 + us[k - 1].abs()) {
            out.push(Violation {
                kind: ViolationKind::WeightIncreasing,
                severity: Severity::Error,
                at: grid[k],
                message: format!("u increases between s = {:e} and s = {:e}", grid[k - 1], grid[k]),
            });
            break;
        }
    }
    for k in 1..grid.len() {
        if psis[k] < psis[k - 1] - 1e-12 * (1.0 + psis[k - 1].abs()) {
            out.push(Violation {
                kind: ViolationKind::InfluenceDecreasing,
                severity: Severity::Error,
                at: grid[k],
                message: format!("psi decreases between s = {:e} and s = {:e}", grid[k - 1], grid[k]),
            });
            break;
        }
    }

    let kappa = w.kappa();
    let tail = w.psi(1e12);
    if kappa.is_finite() {
        if (tail - kappa).abs() > 0.01 * kappa {
            out.push(Violation {
                kind: ViolationKind::KappaMismatch,
                severity: Severity::Error,
                at: 1e12,
                message: format!("declared kappa {kappa} but psi(1e12) = {tail}"),
            });
        }
    } else {
        out.push(Violation {
            kind: ViolationKind::InfluenceUnbounded,
            severity: Severity::Warning,
            at: 1e12,
            message: "psi unbounded: no breakdown guarantee".into(),
        });
    }
    out
}

/// True when `validate` reports no error-level violation and `kappa` is finite.
pub fn is_admissible<W: WeightFunction + ?Sized>(w: &W) -> bool {
    w.kappa().is_finite() && validate(w).iter().all(|v| v.severity != Severity::Error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn u_examples() {
        let t = WeightSpec::tyler(0.5).unwrap();
        assert_eq!(t.try_u(2.0).unwrap(), 0.25);
        let h = WeightSpec::bounded_huber(0.9, 2.0).unwrap();
        assert_relative_eq!(h.try_u(1.0).unwrap(), 0.45);
        assert_relative_eq!(h.try_u(4.0).unwrap(), 0.225);
        assert_eq!(WeightSpec::Gaussian.try_u(123.0).unwrap(), 1.0);
        assert_eq!(WeightSpec::Gaussian.try_u(0.0).unwrap(), 1.0);
    }

    #[test]
    fn tyler_rejects_zero() {
        let t = WeightSpec::tyler(0.5).unwrap();
        assert!(matches!(t.try_u(0.0), Err(Error::ZeroNormObservation { .. })));
        assert!(t.try_u(1e-301).is_err());
        let scaled = WeightSpec::scaled(t, 10.0).unwrap();
        assert!(scaled.try_u(0.0).is_err());
        assert!(WeightSpec::Gaussian.try_u(-1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        let t = WeightSpec::tyler(0.5).unwrap();
        for s in [1e-6, 0.3, 7.0, 1e9] {
            assert_eq!(t.psi(s), 0.5);
        }
        let h = WeightSpec::bounded_huber(0.9, 2.0).unwrap();
        assert_relative_eq!(h.psi(1.0), 0.45);
        assert_relative_eq!(h.psi(100.0), 0.9);
        assert_eq!(WeightSpec::Gaussian.psi(3.0), 3.0);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(WeightSpec::tyler(0.5).unwrap().rho(1.0), 0.0);
        assert_eq!(WeightSpec::Gaussian.rho(2.0), 2.0);
        let h = WeightSpec::BoundedHuber { kappa: 0.9, c: 2.0 };
        let below = 2.0 * 0.9 / 2.0;
        let above = 0.9 * (1.0 + (2.0f64 / 2.0).ln());
        assert!((below - above).abs() <= 1e-12);
        assert!((h.rho(2.0) - h.rho(2.0 + 1e-12)).abs() <= 1e-11);
        assert!(WeightSpec::Gaussian.try_rho(0.0).is_err());
    }

    #[test]
    fn scaled_kappa_and_u() {
        let base = WeightSpec::bounded_huber(0.9, 2.0).unwrap();
        let s = WeightSpec::scaled(base.clone(), 10.0).unwrap();
        assert_eq!(s.u(0.7), base.u(7.0));
        assert_relative_eq!(s.kappa(), 0.09);
        assert!(validate(&s).is_empty());
    }

    #[test]
    fn validate_catalog() {
        assert!(validate(&WeightSpec::tyler(0.5).unwrap()).is_empty());
        assert!(validate(&WeightSpec::bounded_huber(0.9, 2.0).unwrap()).is_empty());
        let g = validate(&WeightSpec::Gaussian);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].kind, ViolationKind::InfluenceUnbounded);
        assert_eq!(g[0].severity, Severity::Warning);
        assert!(!is_admissible(&WeightSpec::Gaussian));
    }

    struct Increasing;
    impl WeightFunction for Increasing {
        fn u(&self, s: f64) -> f64 {
            s
        }
        fn rho(&self, s: f64) -> f64 {
            0.5 * s * s
        }
        fn kappa(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn validate_flags_increasing_weight() {
        let v = validate(&Increasing);
        assert!(v.iter().any(|x| x.kind == ViolationKind::WeightIncreasing));
        assert!(v.iter().any(|x| x.kind == ViolationKind::KappaMismatch));
        assert!(!is_admissible(&Increasing));
    }

    #[test]
    fn validate_flags_wrong_kappa() {
        // psi saturates at 0.9, declared 0.5
        struct Liar;
        impl WeightFunction for Liar {
            fn u(&self, s: f64) -> f64 {
                0.9 / s.max(2.0)
            }
            fn rho(&self, s: f64) -> f64 {
                s
            }
            fn kappa(&self) -> f64 {
                0.5
            }
        }
        let v = validate(&Liar);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::KappaMismatch);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["tyler:0.5", "huber:0.9:2.0", "gaussian", "scaled:huber:0.9:2.0:eta=10.0"] {
            let w: WeightSpec = s.parse().unwrap();
            assert_eq!(w.to_string(), s);
        }
        let w: WeightSpec = "scaled:huber:0.9:2.0:eta=10".parse().unwrap();
        assert_eq!(
            w,
            WeightSpec::scaled(WeightSpec::bounded_huber(0.9, 2.0).unwrap(), 10.0).unwrap()
        );
    }

    #[test]
    fn parse_rejects_garbage() {
        for s in ["", "tyler", "tyler:-1", "huber:0.9", "huber:0.9:0", "scaled:gaussian", "tyler:nan", "cauchy:1"] {
            assert!(s.parse::<WeightSpec>().is_err(), "{s}");
        }
    }
}
