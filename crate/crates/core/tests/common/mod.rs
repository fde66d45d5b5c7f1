#![allow(dead_code)]

use kshrink::SpdMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal_vec<R: Rng>(rng: &mut R, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.sample(StandardNormal))
}

/// `LLᵀ + ridge·I` with uniform(-1, 1) entries in `L`.
pub fn random_spd<R: Rng>(rng: &mut R, p: usize, ridge: f64) -> SpdMatrix {
    let l = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let m = &l * l.transpose() + DMatrix::identity(p, p) * ridge;
    SpdMatrix::new((&m + m.transpose()) * 0.5).expect("spd by construction")
}

/// Largest real part among the eigenvalues of a general square matrix.
pub fn largest_eigenvalue_general(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}
