//! JSON documents written by the command line tool.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::estimators::{GuaranteeFlags, ScatterEstimate};
use crate::matcore::SymMatrix;

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`
/// (plain JSON has no representation for them).
pub mod float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a float: {other:?}"))),
            },
        }
    }
}

/// Output of the `estimate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub estimator: String,
    pub q: usize,
    pub n: usize,
    /// Row-major `q x q` entries.
    pub matrix: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    #[serde(with = "float")]
    pub final_gap: f64,
    #[serde(with = "float")]
    pub residual: f64,
    pub guarantee_flags: GuaranteeFlags,
    pub center_used: Option<Vec<f64>>,
    pub dropped_rows: usize,
    /// Fully resolved run configuration, defaults included.
    pub config: serde_json::Value,
}

impl EstimateOutput {
    pub fn from_estimate(est: &ScatterEstimate, config: serde_json::Value) -> Self {
        EstimateOutput {
            estimator: est.kind.name().to_string(),
            q: est.matrix.dim(),
            n: est.n,
            matrix: est.matrix.to_row_major(),
            eigenvalues: est.matrix.eigen().values.iter().copied().collect(),
            iterations: est.iterations,
            final_gap: est.final_gap,
            residual: est.residual,
            guarantee_flags: est.guarantees.clone(),
            center_used: est.center_used.clone(),
            dropped_rows: est.dropped_rows,
            config,
        }
    }

    pub fn scatter_matrix(&self) -> Result<SymMatrix> {
        SymMatrix::from_row_major(self.q, &self.matrix)
    }
}

pub fn to_pretty_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    struct Holder {
        #[serde(with = "float")]
        v: f64,
    }

    #[test]
    fn non_finite_round_trip() {
        for v in [f64::INFINITY, f64::NEG_INFINITY, 1.5, -0.0] {
            let s = serde_json::to_string(&Holder { v }).unwrap();
            let back: Holder = serde_json::from_str(&s).unwrap();
            assert_eq!(back.v.to_bits(), v.to_bits(), "{s}");
        }
        let s = serde_json::to_string(&Holder { v: f64::NAN }).unwrap();
        assert_eq!(s, r#"{"v":"nan"}"#);
        assert!(serde_json::from_str::<Holder>(r#"{"v":"big"}"#).is_err());
    }
}
