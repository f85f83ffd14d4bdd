mod common;

use proptest::prelude::*;
use rscatter::datagen::{self, random_orthogonal, Distribution, GeneratorSpec, Transform};
use rscatter::estimators::{self, ZeroNormPolicy};
use rscatter::{estimate, CenterSpec, EstimatorConfig, EstimatorKind, SymMatrix, WeightSpec};

fn configs(q: usize) -> Vec<(EstimatorKind, Option<WeightSpec>)> {
    let huber = WeightSpec::bounded_huber(0.9, 2.0).unwrap();
    vec![
        (EstimatorKind::Sscm, None),
        (EstimatorKind::GenSscm, Some(huber.clone())),
        (EstimatorKind::MPlain, Some(WeightSpec::bounded_huber(2.0 * q as f64, 1.0).unwrap())),
        (EstimatorKind::PenTrace { eta: 0.5 }, Some(WeightSpec::tyler(0.8).unwrap())),
        (EstimatorKind::PenKl { gamma: 0.3 }, Some(huber.clone())),
        (EstimatorKind::HybridTrace { eta: 1.0 }, Some(huber.clone())),
        (EstimatorKind::HybridKl { gamma: 0.6 }, Some(WeightSpec::tyler(0.5).unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_covariance(n in 20usize..60, q in 2usize..5, seed in any::<u64>(), spatial in any::<bool>()) {
        let d = common::elliptical(n, q, seed);
        let rot = random_orthogonal(q, seed.wrapping_add(1));
        let (center, shift) = if spatial {
            (CenterSpec::spatial(), (0..q).map(|k| k as f64 - 1.5).collect::<Vec<_>>())
        } else {
            (CenterSpec::Origin, vec![0.0; q])
        };
        let moved = common::rotate_shift(&d, &rot, &shift);
        for (kind, weight) in configs(q) {
            let cfg = EstimatorConfig::new(kind, weight, center.clone());
            let a = estimate(&d, &cfg).unwrap();
            let b = estimate(&moved, &cfg).unwrap();
            let err = b.matrix.distance(&common::conjugate(&a.matrix, &rot)).unwrap();
            prop_assert!(err <= 1e-8, "{} err {:e}", kind, err);
        }
    }

    #[test]
    fn sscm_ignores_scale(n in 5usize..60, q in 1usize..5, seed in any::<u64>(), log_alpha in -10.0f64..10.0) {
        let d = common::elliptical(n, q, seed);
        let scaled = datagen::transform(&d, &Transform::Scale(log_alpha.exp())).unwrap();
        for center in [CenterSpec::Origin, CenterSpec::spatial(), CenterSpec::MarginalMedian] {
            let a = estimators::sscm(&d, &center).unwrap();
            let b = estimators::sscm(&scaled, &center).unwrap();
            prop_assert!(a.matrix.distance(&b.matrix).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn sscm_transform_then_estimate(n in 5usize..60, q in 2usize..5, seed in any::<u64>()) {
        let d = common::elliptical(n, q, seed);
        let rot = random_orthogonal(q, seed ^ 0x55);
        let moved = datagen::transform(&d, &Transform::Rotate(rot.clone())).unwrap();
        let moved = datagen::transform(&moved, &Transform::Translate(vec![2.5; q])).unwrap();
        let a = estimators::sscm(&d, &CenterSpec::spatial()).unwrap();
        let b = estimators::sscm(&moved, &CenterSpec::spatial()).unwrap();
        prop_assert!(b.matrix.distance(&common::conjugate(&a.matrix, &rot)).unwrap() <= 1e-8);
    }

    #[test]
    fn gen_sscm_with_inverse_weight_is_sscm(n in 3usize..60, q in 1usize..6, seed in any::<u64>()) {
        let d = common::elliptical(n, q, seed);
        let center = CenterSpec::spatial();
        let a = estimators::sscm(&d, &center).unwrap();
        let b = estimators::gen_sscm(&d, &WeightSpec::tyler(1.0).unwrap(), &center, ZeroNormPolicy::Drop).unwrap();
        prop_assert!(a.matrix.distance(&b.matrix).unwrap() <= 1e-12);
    }

    #[test]
    fn residual_is_controlled_by_the_last_step(n in 10usize..80, q in 2usize..6, seed in any::<u64>()) {
        let d = common::elliptical(n, q, seed);
        for (kind, weight) in configs(q).into_iter().filter(|(k, _)| k.is_penalized() || k.is_hybrid()) {
            let est = estimate(&d, &EstimatorConfig::new(kind, weight, CenterSpec::Origin)).unwrap();
            prop_assert!(est.iterations <= 500);
            prop_assert!(est.final_gap <= 1e-10 * (1.0 + est.matrix.frobenius_norm()));
            prop_assert!(est.residual <= 10.0 * est.final_gap + 1e-14, "{}: residual {:e} gap {:e}", kind, est.residual, est.final_gap);
        }
    }
}

#[test]
fn cauchy_data_still_converge() {
    for seed in 0..20 {
        let q = 2 + seed as usize % 4;
        let d = datagen::sample(&GeneratorSpec {
            distribution: Distribution::StudentT { dof: 1.0 },
            shape: datagen::shape_with_condition(q, 50.0, seed).unwrap(),
            n: 100,
            seed,
        })
        .unwrap();
        for kind in [EstimatorKind::HybridTrace { eta: 0.5 }, EstimatorKind::HybridKl { gamma: 0.3 }] {
            for weight in [WeightSpec::tyler(0.9).unwrap(), WeightSpec::bounded_huber(0.7, 1.0).unwrap()] {
                let est = estimate(&d, &EstimatorConfig::new(kind, Some(weight.clone()), CenterSpec::spatial()))
                    .unwrap_or_else(|e| panic!("seed {seed} {kind} {weight}: {e}"));
                assert!(est.iterations <= 500);
                assert!(est.guarantees.weight_admissible);
            }
        }
    }
}

#[test]
fn starting_point_does_not_matter() {
    let d = common::elliptical(40, 4, 17);
    let starts = [
        SymMatrix::identity(4),
        SymMatrix::scaled_identity(4, 10.0),
        SymMatrix::from_diagonal(&[0.1, 1.0, 3.0, 8.0]),
    ];
    for (kind, weight) in configs(4).into_iter().filter(|(k, _)| k.is_penalized() || k.is_hybrid()) {
        let fits: Vec<SymMatrix> = starts
            .iter()
            .map(|s| {
                let mut cfg = EstimatorConfig::new(kind, weight.clone(), CenterSpec::spatial());
                cfg.solver = cfg.solver.clone().with_init(s.clone());
                estimate(&d, &cfg).unwrap().matrix
            })
            .collect();
        for f in &fits[1..] {
            assert!(f.distance(&fits[0]).unwrap() <= 1e-7, "{kind}");
        }
    }
}
