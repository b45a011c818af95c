#![allow(dead_code)]

use faer::Mat;
use num_complex::Complex64 as c64;
use rand::Rng;
use rand_distr::StandardNormal;
use rmt_eth_lab::ensembles::{sample_wigner, Beta, Deformation, DeformationSpec, EnsembleSpec};
use rmt_eth_lab::linalg::CMat;
use rmt_eth_lab::rng::stream;

/// Random Hermitian matrix with O(1) norm.
pub fn random_hermitian(n: usize, seed: u64) -> CMat {
    sample_wigner(&EnsembleSpec::gaussian(n, Beta::Complex, seed)).unwrap()
}

/// Random (non-Hermitian) complex matrix with O(1) entries.
pub fn random_matrix(n: usize, seed: u64) -> CMat {
    let mut rng = stream(seed);
    Mat::from_fn(n, n, |_, _| {
        c64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_vector(n: usize, seed: u64) -> Vec<c64> {
    let mut rng = stream(seed);
    (0..n)
        .map(|_| c64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Three test deformations: zero, bimodal ±0.5 and a rotated Wigner matrix.
pub fn test_deformations(n: usize) -> Vec<Deformation> {
    vec![
        DeformationSpec::Zero.build(n, Beta::Real).unwrap(),
        DeformationSpec::Bimodal { a: 0.5 }.build(n, Beta::Real).unwrap(),
        DeformationSpec::Wigner { scale: 0.5, seed: 99 }.build(n, Beta::Real).unwrap(),
    ]
}

/// `<A B>` from full matrices.
pub fn trace_prod(a: &CMat, b: &CMat) -> c64 {
    let p = a * b;
    (0..p.nrows()).map(|i| p[(i, i)]).sum::<c64>() / p.nrows() as f64
}
