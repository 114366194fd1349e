#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdd::realspace::{expand, ExpandedMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_real<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Hermitian positive definite, eigenvalues bounded below by `floor`.
pub fn random_hpd<R: Rng>(rng: &mut R, p: usize, floor: f64) -> DMatrix<Complex64> {
    let b = random_complex(rng, p, p);
    let mut s = &b * b.adjoint() / Complex64::new(p as f64, 0.0);
    for i in 0..p {
        s[(i, i)] += Complex64::new(floor, 0.0);
    }
    (&s + s.adjoint()) / Complex64::new(2.0, 0.0)
}

pub fn random_pd_pair(seed: u64, p: usize) -> (ExpandedMatrix, ExpandedMatrix) {
    let mut r = rng(seed);
    let s1 = expand(&random_hpd(&mut r, p, 0.5));
    let s2 = expand(&random_hpd(&mut r, p, 0.5));
    (s1, s2)
}

/// Real symmetric matrix with the block structure of an expanded Hermitian matrix.
pub fn random_expanded_symmetric<R: Rng>(rng: &mut R, p: usize) -> DMatrix<f64> {
    let a = random_complex(rng, p, p);
    expand(&((&a + a.adjoint()) / Complex64::new(2.0, 0.0))).into_matrix()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}
