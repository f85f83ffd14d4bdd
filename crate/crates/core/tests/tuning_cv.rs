mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rscatter::tuning::{self, cross_validate, TuneSpec};
use rscatter::{CenterSpec, Dataset, EstimatorConfig, EstimatorKind, Error, SolverControls, WeightSpec};

/// Mean held-out Gaussian NLL of the closed-form trace-penalized sample
/// covariance `S + eta I`, written out for 2 x 2 matrices.
fn oracle_score(d: &Dataset, labels: &[usize], folds: usize, eta: f64) -> f64 {
    let rows: Vec<[f64; 2]> = d.iter_rows().map(|r| [r[0], r[1]]).collect();
    let mut total = 0.0;
    for k in 0..folds {
        let (mut a, mut b, mut c, mut m) = (0.0, 0.0, 0.0, 0.0);
        for (x, &l) in rows.iter().zip(labels) {
            if l != k {
                a += x[0] * x[0];
                b += x[0] * x[1];
                c += x[1] * x[1];
                m += 1.0;
            }
        }
        let (s11, s12, s22) = (a / m + eta, b / m, c / m + eta);
        let det = s11 * s22 - s12 * s12;
        let (mut quad, mut h) = (0.0, 0.0);
        for (x, &l) in rows.iter().zip(labels) {
            if l == k {
                quad += (s22 * x[0] * x[0] - 2.0 * s12 * x[0] * x[1] + s11 * x[1] * x[1]) / det;
                h += 1.0;
            }
        }
        total += 0.5 * (det.ln() + quad / h);
    }
    total / folds as f64
}

#[test]
fn heavy_shrinkage_loses_on_gaussian_data() {
    let d = common::gaussian(500, 2, 31);
    let cfg = EstimatorConfig::new(EstimatorKind::PenTrace { eta: 1.0 }, Some(WeightSpec::Gaussian), CenterSpec::Origin);
    let spec = TuneSpec::new(vec![0.01, 1.0, 100.0], 5);
    let report = cross_validate(&d, &cfg, &spec).unwrap();
    let labels = tuning::fold_assignment(&d, spec.folds, spec.seed);
    let mut best = (f64::INFINITY, 0.0);
    for c in &report.candidates {
        let expected = oracle_score(&d, &labels, spec.folds, c.value);
        assert!((c.mean - expected).abs() <= 1e-9, "eta {}: {} vs {}", c.value, c.mean, expected);
        if expected < best.0 {
            best = (expected, c.value);
        }
    }
    assert_eq!(report.best, best.1);
    assert_ne!(report.best, 100.0);
}

#[test]
fn row_order_does_not_matter() {
    let d = common::elliptical(60, 3, 4);
    let mut idx: Vec<usize> = (0..60).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let shuffled = d.select(&idx);
    let cfg = EstimatorConfig::new(
        EstimatorKind::HybridKl { gamma: 0.5 },
        Some(WeightSpec::bounded_huber(0.9, 2.0).unwrap()),
        CenterSpec::spatial(),
    );
    let spec = TuneSpec::new(vec![0.1, 0.3, 0.5, 0.7, 0.9], 11);
    let a = cross_validate(&d, &cfg, &spec).unwrap();
    let b = cross_validate(&shuffled, &cfg, &spec).unwrap();
    assert_eq!(a, b);
}

#[test]
fn candidate_order_does_not_matter() {
    let d = common::elliptical(40, 2, 9);
    let cfg = EstimatorConfig::new(
        EstimatorKind::HybridTrace { eta: 1.0 },
        Some(WeightSpec::tyler(0.7).unwrap()),
        CenterSpec::spatial(),
    );
    let a = cross_validate(&d, &cfg, &TuneSpec::new(vec![0.1, 1.0, 10.0], 2)).unwrap();
    let b = cross_validate(&d, &cfg, &TuneSpec::new(vec![10.0, 0.1, 1.0, 0.1], 2)).unwrap();
    assert_eq!(a, b);
    assert!(a.candidates.iter().all(|c| !c.failed && c.mean.is_finite() && c.sd.is_finite()));
}

#[test]
fn failed_candidates_are_reported() {
    let d = common::elliptical(30, 3, 12);
    let mut cfg = EstimatorConfig::new(
        EstimatorKind::PenKl { gamma: 0.5 },
        Some(WeightSpec::tyler(0.9).unwrap()),
        CenterSpec::Origin,
    );
    cfg.solver = SolverControls {
        max_iter: 2,
        ..SolverControls::default()
    };
    // gamma = 1 is the identity in closed form and needs no iterations
    let r = cross_validate(&d, &cfg, &TuneSpec::new(vec![0.3, 1.0], 0)).unwrap();
    assert!(r.candidates[0].failed && r.candidates[0].error.is_some());
    assert_eq!(r.best, 1.0);
    let err = cross_validate(&d, &cfg, &TuneSpec::new(vec![0.3, 0.6], 0)).unwrap_err();
    assert!(matches!(err, Error::AllCandidatesFailed));
}
