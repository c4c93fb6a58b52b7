//! Synthetic problems and the per-method fitting pipeline.

use anyhow::{Context, Result};
use prism_core::{
    derive_seed, generate_data, noise_for_snr_db, random_mixing_matrix, run_em, seeded, vca, Dataset,
    DirichletParams, EmConfig, EmState, LatentPrior, MixingMatrix, NoiseModel,
};

use crate::config::Method;

/// Seeds of one cell, all derived from the master seed.
///
/// `H` depends only on `(master, replicate)`, so every SNR or `N` at one
/// replicate sees the same mixing matrix. Observations, the VCA start and
/// the E-step draws additionally depend on `N` and the SNR, never on the
/// method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub truth: u64,
    pub data: u64,
    pub init: u64,
    pub em: u64,
}

impl CellSeeds {
    pub fn new(master: u64, replicate: u64, n_obs: usize, snr_db: f64) -> Self {
        let data = derive_seed(master, &[replicate, 1, n_obs as u64, snr_db.to_bits()]);
        Self {
            truth: derive_seed(master, &[replicate, 0]),
            data,
            init: derive_seed(data, &[0]),
            em: derive_seed(data, &[1]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub truth: MixingMatrix,
    pub prior: DirichletParams,
    pub noise: NoiseModel,
    pub data: Dataset,
}

/// Draws `H` with `U[0, 1]` entries, sets `sigma^2` from the target SNR for
/// that `H`, then draws `n_obs` observations.
pub fn make_problem(
    d: usize,
    k: usize,
    prior: &DirichletParams,
    n_obs: usize,
    snr_db: f64,
    seeds: CellSeeds,
) -> Result<Problem> {
    let truth = random_mixing_matrix(d, k, &mut seeded(seeds.truth))?;
    let noise = noise_for_snr_db(&truth, prior, snr_db)?;
    let data = generate_data(&truth, prior, noise, n_obs, &mut seeded(seeds.data))?;
    Ok(Problem {
        truth,
        prior: prior.clone(),
        noise,
        data,
    })
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub estimate: MixingMatrix,
    /// EM history; `None` for VCA.
    pub em: Option<EmState>,
}

/// VCA, then (for SISA and LISA) EM started from the VCA estimate.
pub fn fit_method(
    data: &Dataset,
    prior: &DirichletParams,
    noise: NoiseModel,
    method: Method,
    em: &EmConfig,
    init_seed: u64,
) -> Result<Fit> {
    let init = vca(data, prior.k(), &mut seeded(init_seed)).context("VCA initialization")?;
    let Some(backend) = method.backend() else {
        return Ok(Fit {
            estimate: init,
            em: None,
        });
    };
    let config = EmConfig {
        backend,
        ..em.clone()
    };
    let state = run_em(data, init, &config, &LatentPrior::Dirichlet(prior.clone()), noise)?;
    Ok(Fit {
        estimate: state.h.clone(),
        em: Some(state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_em(seed: u64) -> EmConfig {
        EmConfig {
            total_iterations: 4,
            switch_iteration: 2,
            samples_per_obs: 30,
            seed,
            ..EmConfig::default()
        }
    }

    #[test]
    fn truth_is_shared_across_snr_and_n() {
        let a = CellSeeds::new(3, 1, 100, 10.0);
        let b = CellSeeds::new(3, 1, 200, 0.0);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.data, b.data);
        assert_ne!(CellSeeds::new(3, 2, 100, 10.0).truth, a.truth);
        assert_ne!(CellSeeds::new(4, 1, 100, 10.0).truth, a.truth);
    }

    #[test]
    fn problem_realizes_the_target_snr() {
        let prior = DirichletParams::symmetric(3, 1.0).unwrap();
        let p = make_problem(6, 3, &prior, 40, 10.0, CellSeeds::new(0, 0, 40, 10.0)).unwrap();
        let c = prior.moments().cov;
        let h = p.truth.as_matrix();
        let power = (h * c * h.transpose()).trace();
        assert!((p.noise.sigma2() - power / 10.0).abs() <= 1e-14 * power);
        assert_eq!((p.data.n(), p.data.d()), (40, 6));
    }

    #[test]
    fn vca_runs_no_em() {
        let prior = DirichletParams::symmetric(3, 1.0).unwrap();
        let p = make_problem(6, 3, &prior, 60, 20.0, CellSeeds::new(1, 0, 60, 20.0)).unwrap();
        let fit = fit_method(&p.data, &prior, p.noise, Method::Vca, &small_em(0), 5).unwrap();
        assert!(fit.em.is_none());
        let direct = vca(&p.data, 3, &mut seeded(5)).unwrap();
        assert_eq!(fit.estimate, direct);
    }

    #[test]
    fn lisa_switches_at_the_configured_iteration() {
        let prior = DirichletParams::symmetric(3, 1.0).unwrap();
        let p = make_problem(6, 3, &prior, 60, 20.0, CellSeeds::new(1, 0, 60, 20.0)).unwrap();
        let fit = fit_method(&p.data, &prior, p.noise, Method::Lisa, &small_em(2), 5).unwrap();
        let labels: Vec<_> = fit.em.unwrap().records.iter().map(|r| r.backend.label()).collect();
        assert_eq!(labels, ["sisa", "sisa", "lisa", "lisa"]);
    }

    #[test]
    fn same_seed_gives_identical_estimate() {
        let prior = DirichletParams::symmetric(3, 1.0).unwrap();
        let p = make_problem(6, 3, &prior, 60, 20.0, CellSeeds::new(1, 0, 60, 20.0)).unwrap();
        let a = fit_method(&p.data, &prior, p.noise, Method::Sisa, &small_em(2), 5).unwrap();
        let b = fit_method(&p.data, &prior, p.noise, Method::Sisa, &small_em(2), 5).unwrap();
        assert_eq!(a.estimate, b.estimate);
    }
}
