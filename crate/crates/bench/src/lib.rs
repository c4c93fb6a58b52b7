//! Fixed problem instances shared by the benchmarks.

use nalgebra::DMatrix;
use rand::Rng;
use prism_core::{
    generate_data, noise_for_snr_db, random_mixing_matrix, seeded, Dataset, DirichletParams, MixingMatrix,
    NoiseModel,
};

pub struct Fixture {
    pub h: MixingMatrix,
    pub prior: DirichletParams,
    pub noise: NoiseModel,
    pub data: Dataset,
}

/// A symmetric Dirichlet(1) problem with `n` observations at `snr_db`.
pub fn fixture(d: usize, k: usize, n: usize, snr_db: f64) -> Fixture {
    let mut rng = seeded(7);
    let prior = DirichletParams::symmetric(k, 1.0).expect("k >= 2");
    let h = random_mixing_matrix(d, k, &mut rng).expect("d >= k");
    let noise = noise_for_snr_db(&h, &prior, snr_db).expect("finite SNR");
    let data = generate_data(&h, &prior, noise, n, &mut rng).expect("valid sizes");
    Fixture { h, prior, noise, data }
}

/// Uniform random square cost matrix.
pub fn cost_matrix(k: usize) -> DMatrix<f64> {
    let mut rng = seeded(11);
    DMatrix::from_fn(k, k, |_, _| rng.random::<f64>())
}
