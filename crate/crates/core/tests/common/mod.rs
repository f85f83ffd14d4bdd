#![allow(dead_code)]

use nalgebra::DMatrix;
use rscatter::datagen::{self, Distribution, GeneratorSpec};
use rscatter::{Dataset, SymMatrix};

pub fn gaussian(n: usize, q: usize, seed: u64) -> Dataset {
    datagen::sample(&GeneratorSpec {
        distribution: Distribution::Gaussian,
        shape: SymMatrix::identity(q),
        n,
        seed,
    })
    .unwrap()
}

/// Elliptical sample with a random shape of condition number 10; Student t
/// with 3 degrees of freedom on odd seeds.
pub fn elliptical(n: usize, q: usize, seed: u64) -> Dataset {
    let distribution = if seed % 2 == 1 {
        Distribution::StudentT { dof: 3.0 }
    } else {
        Distribution::Gaussian
    };
    datagen::sample(&GeneratorSpec {
        distribution,
        shape: datagen::shape_with_condition(q, 10.0, seed).unwrap(),
        n,
        seed,
    })
    .unwrap()
}

/// Rows of `data` multiplied by `q` and shifted by `a`.
pub fn rotate_shift(data: &Dataset, q: &DMatrix<f64>, a: &[f64]) -> Dataset {
    let mut m = data.matrix() * q.transpose();
    for mut r in m.row_iter_mut() {
        for (v, s) in r.iter_mut().zip(a) {
            *v += s;
        }
    }
    Dataset::new(m).unwrap()
}

pub fn conjugate(v: &SymMatrix, q: &DMatrix<f64>) -> SymMatrix {
    v.congruence(q).unwrap()
}
