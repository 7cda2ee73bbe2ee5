#![allow(dead_code)]

use bw_frechet::simulation::haar_orthogonal;
use bw_frechet::SpdMatrix;
use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `O diag(e^u) Oᵀ` with Haar `O` and `u ~ Uniform[−spread, spread]`.
pub fn random_spd(d: usize, spread: f64, rng: &mut ChaCha8Rng) -> SpdMatrix {
    let o = haar_orthogonal(d, rng);
    let diag: Vec<f64> = (0..d).map(|_| rng.random_range(-spread..=spread).exp()).collect();
    SpdMatrix::from_diagonal(&diag).unwrap().conjugate(&o)
}

pub fn random_sym(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0));
    (&g + g.transpose()) * 0.5
}

pub fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}
