use proptest::prelude::*;
use rscatter::weights::{self, validation_grid};
use rscatter::{WeightFunction, WeightSpec};

fn catalog() -> Vec<WeightSpec> {
    vec![
        WeightSpec::tyler(0.5).unwrap(),
        WeightSpec::tyler(3.0).unwrap(),
        WeightSpec::bounded_huber(0.9, 2.0).unwrap(),
        WeightSpec::bounded_huber(0.3, 0.5).unwrap(),
        WeightSpec::Gaussian,
        WeightSpec::scaled(WeightSpec::bounded_huber(0.9, 2.0).unwrap(), 10.0).unwrap(),
        WeightSpec::scaled(WeightSpec::tyler(0.6).unwrap(), 0.1).unwrap(),
    ]
}

#[test]
fn psi_is_s_times_u() {
    for w in catalog() {
        for s in validation_grid() {
            let psi = w.psi(s);
            assert!((psi - s * w.u(s)).abs() <= 1e-12 * (1.0 + psi), "{w} at {s}");
        }
    }
}

#[test]
fn rho_derivative_is_u() {
    for w in catalog() {
        for s in validation_grid().into_iter().filter(|s| (0.1..=1e4).contains(s)) {
            let h = 1e-6 * s;
            let d = (w.rho(s + h) - w.rho(s - h)) / (2.0 * h);
            assert!((d - w.u(s)).abs() <= 1e-5, "{w} at {s}: {d} vs {}", w.u(s));
        }
    }
}

#[test]
fn catalog_is_admissible_except_gaussian() {
    for w in catalog() {
        let ok = weights::is_admissible(&w);
        assert_eq!(ok, !matches!(w, WeightSpec::Gaussian), "{w}: {:?}", weights::validate(&w));
    }
}

proptest! {
    #[test]
    fn scaled_u_is_base_u_at_scaled_argument(
        kappa in 0.01f64..5.0,
        c in 0.01f64..10.0,
        eta in 1e-3f64..1e3,
        s in 1e-6f64..1e6,
    ) {
        for base in [WeightSpec::tyler(kappa).unwrap(), WeightSpec::bounded_huber(kappa, c).unwrap()] {
            let scaled = WeightSpec::scaled(base.clone(), eta).unwrap();
            prop_assert_eq!(scaled.u(s), base.u(eta * s));
        }
    }

    #[test]
    fn spec_strings_round_trip(kappa in 0.01f64..5.0, c in 0.01f64..10.0, eta in 1e-3f64..1e3) {
        for w in [
            WeightSpec::tyler(kappa).unwrap(),
            WeightSpec::bounded_huber(kappa, c).unwrap(),
            WeightSpec::scaled(WeightSpec::bounded_huber(kappa, c).unwrap(), eta).unwrap(),
        ] {
            let back: WeightSpec = w.to_string().parse().unwrap();
            prop_assert_eq!(back, w);
        }
    }
}
