//! Penalized and hybrid M-estimators of multivariate scatter.
//!
//! The crate covers the spatial sign covariance matrix and its weighted
//! generalisation, plain, trace-penalized and Kullback–Leibler-penalized
//! M-estimators of scatter, and their hybrid (shift-corrected) versions that
//! interpolate between a plain M-estimator and a generalized SSCM. A
//! contamination harness measures empirical breakdown of any of them.

pub mod breakdown;
pub mod cli;
pub mod dataset;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod json;
pub mod location;
pub mod matcore;
pub mod tuning;
pub mod weights;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use estimators::{estimate, EstimatorConfig, EstimatorKind, ScatterEstimate, SolverControls};
pub use location::CenterSpec;
pub use matcore::{SpdMatrix, SymMatrix};
pub use weights::{WeightFunction, WeightSpec};
