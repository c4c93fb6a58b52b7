//! Monte Carlo EM for the mixing matrix.
//!
//! Each iteration computes `A = sum_i y_i E[z_i]^T` and `B = sum_i E[z_i z_i^T]`
//! under the current `H` with one of the E-step backends, then sets `H = A B^-1`.
//!
//! The tracked objective is the `H`-dependent part of the expected complete
//! log-likelihood,
//!
//! ```text
//! Q(H) = -1/(2 s) [ Tr(H^T H B) - 2 Tr(H^T A) ]
//! ```
//!
//! The terms `sum ||y_i||^2`, `E[log p(z)]` and `-(N d / 2) log(2 pi s)` do not
//! depend on `H` and are left out.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::closed_form::{discrete_posterior_moments, gaussian_conditioner, DiscretePrior};
use crate::error::{PrismError, Result};
use crate::estep::{importance_estimate_with, PosteriorEstimate};
use crate::linalg::{min_eigenvalue, symmetrize};
use crate::model::{Dataset, MixingMatrix, NoiseModel};
use crate::posterior::{lisa_from_moments, LisaSettings, LmmseKernel};
use crate::quadrature::{brute_force_log_evidence, brute_force_posterior, DEFAULT_RESOLUTION};
use crate::rng::{derive_seed, substream};
use crate::simplex::{DirichletParams, DirichletSampler};

/// Which conditional moments the E-step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstepBackend {
    /// Importance sampling with the prior as proposal.
    Sisa,
    /// Importance sampling with the moment-matched Dirichlet proposal.
    Lisa,
    /// SISA before `switch_iteration`, LISA from then on.
    SisaThenLisa,
    /// Exact moments for a Gaussian latent.
    Gaussian,
    /// Exact moments for a discrete latent.
    Discrete,
    /// Grid quadrature under the Dirichlet prior (`k <= 3`).
    Oracle,
}

impl EstepBackend {
    pub fn label(self) -> &'static str {
        match self {
            EstepBackend::Sisa => "sisa",
            EstepBackend::Lisa => "lisa",
            EstepBackend::SisaThenLisa => "sisa_then_lisa",
            EstepBackend::Gaussian => "gaussian",
            EstepBackend::Discrete => "discrete",
            EstepBackend::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub total_iterations: usize,
    pub switch_iteration: usize,
    /// Proposal draws per observation and iteration.
    pub samples_per_obs: usize,
    pub backend: EstepBackend,
    /// Relative ridge: `B + ridge * Tr(B) / k * I` is inverted.
    pub ridge: f64,
    /// Stop once `||H_new - H||_F / ||H||_F` falls below this. Off when `None`.
    pub early_stop: Option<f64>,
    pub oracle_resolution: usize,
    pub lisa: LisaSettings,
    /// Master seed; iteration `t`, observation `i` draws from substream `(t, i)`.
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            total_iterations: 100,
            switch_iteration: 50,
            samples_per_obs: 500,
            backend: EstepBackend::SisaThenLisa,
            ridge: 1e-10,
            early_stop: None,
            oracle_resolution: DEFAULT_RESOLUTION,
            lisa: LisaSettings::default(),
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.switch_iteration > self.total_iterations {
            return Err(PrismError::InvalidParameter(format!(
                "switch iteration {} exceeds total iterations {}",
                self.switch_iteration, self.total_iterations
            )));
        }
        if self.samples_per_obs == 0 {
            return Err(PrismError::InvalidParameter("samples per observation must be >= 1".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(PrismError::InvalidParameter(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        Ok(())
    }

    /// Backend in effect at `iteration`, with the schedule resolved.
    pub fn backend_at(&self, iteration: usize) -> EstepBackend {
        match self.backend {
            EstepBackend::SisaThenLisa if iteration < self.switch_iteration => EstepBackend::Sisa,
            EstepBackend::SisaThenLisa => EstepBackend::Lisa,
            b => b,
        }
    }
}

/// Prior on the latents, matched against the backend.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentPrior {
    Dirichlet(DirichletParams),
    Discrete(DiscretePrior),
    Gaussian { sigma_z2: f64 },
}

impl LatentPrior {
    fn dirichlet(&self, backend: EstepBackend) -> Result<&DirichletParams> {
        match self {
            LatentPrior::Dirichlet(p) => Ok(p),
            _ => Err(PrismError::IncompatibleBackend(format!(
                "{} needs a Dirichlet prior",
                backend.label()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstepDiagnostics {
    pub mean_ess: f64,
    pub min_ess: f64,
    /// Observations whose LISA concentration hit its lower bound.
    pub mu_clamped: usize,
    /// Observations with at least one floored LISA concentration.
    pub floor_clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstepOutput {
    pub stat_a: DMatrix<f64>,
    pub stat_b: DMatrix<f64>,
    pub diagnostics: EstepDiagnostics,
}

/// Per-observation moments for one E-step, in observation order.
pub fn posterior_estimates(
    data: &Dataset,
    h: &MixingMatrix,
    config: &EmConfig,
    iteration: usize,
    prior: &LatentPrior,
    noise: NoiseModel,
) -> Result<(Vec<PosteriorEstimate>, EstepDiagnostics)> {
    if data.d() != h.d() {
        return Err(PrismError::DimensionMismatch {
            what: "observation length",
            expected: h.d(),
            found: data.d(),
        });
    }
    let backend = config.backend_at(iteration);
    let k = h.k();
    let n = data.n();
    let stream = derive_seed(config.seed, &[iteration as u64]);
    let mut clamped = vec![(false, false); n];
    let estimates: Vec<PosteriorEstimate> = match backend {
        EstepBackend::Sisa | EstepBackend::Lisa => {
            let alpha = prior.dirichlet(backend)?;
            if alpha.k() != k {
                return Err(PrismError::DimensionMismatch {
                    what: "prior components",
                    expected: k,
                    found: alpha.k(),
                });
            }
            let prior_sampler = DirichletSampler::new(alpha);
            let kernel = match backend {
                EstepBackend::Lisa => Some(LmmseKernel::new(h, alpha, noise)?),
                _ => None,
            };
            let results: Vec<(PosteriorEstimate, (bool, bool))> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let y = data.observation(i);
                    let mut rng = substream(stream, &[i as u64]);
                    let (est, flags) = match &kernel {
                        Some(kernel) => {
                            let lisa = lisa_from_moments(kernel.moments(&y), config.lisa)?;
                            let q = DirichletSampler::new(&lisa.alpha_bar);
                            let est = importance_estimate_with(
                                &y,
                                &q,
                                &prior_sampler,
                                h,
                                noise,
                                config.samples_per_obs,
                                &mut rng,
                            )?;
                            (est, (lisa.mu_clamped, lisa.floor_clamped))
                        }
                        None => (
                            importance_estimate_with(
                                &y,
                                &prior_sampler,
                                &prior_sampler,
                                h,
                                noise,
                                config.samples_per_obs,
                                &mut rng,
                            )?,
                            (false, false),
                        ),
                    };
                    Ok((est, flags))
                })
                .map(|r: Result<_>| r)
                .collect::<Vec<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| e.at_observation(i)))
                .collect::<Result<_>>()?;
            results
                .into_iter()
                .enumerate()
                .map(|(i, (e, f))| {
                    clamped[i] = f;
                    e
                })
                .collect()
        }
        EstepBackend::Oracle => {
            let alpha = prior.dirichlet(backend)?;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    brute_force_posterior(&data.observation(i), h, alpha, noise, config.oracle_resolution)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| e.at_observation(i)))
                .collect::<Result<_>>()?
        }
        EstepBackend::Discrete => {
            let LatentPrior::Discrete(atoms) = prior else {
                return Err(PrismError::IncompatibleBackend(
                    "discrete backend needs a discrete prior".into(),
                ));
            };
            (0..n)
                .into_par_iter()
                .map(|i| discrete_posterior_moments(&data.observation(i), h, noise, atoms))
                .collect::<Vec<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| e.at_observation(i)))
                .collect::<Result<_>>()?
        }
        EstepBackend::Gaussian => {
            let LatentPrior::Gaussian { sigma_z2 } = *prior else {
                return Err(PrismError::IncompatibleBackend(
                    "gaussian backend needs a gaussian prior".into(),
                ));
            };
            let cond = gaussian_conditioner(h, sigma_z2, noise)?;
            let cov = cond.posterior_cov();
            (0..n)
                .map(|i| {
                    let mean = cond.mean(&data.observation(i));
                    PosteriorEstimate {
                        zz_mean: cov + &mean * mean.transpose(),
                        z_mean: mean,
                        ess: f64::INFINITY,
                        sample_count: 0,
                    }
                })
                .collect()
        }
        EstepBackend::SisaThenLisa => unreachable!("resolved by backend_at"),
    };
    let mut diag = EstepDiagnostics {
        mean_ess: estimates.iter().map(|e| e.ess).sum::<f64>() / n as f64,
        min_ess: estimates.iter().map(|e| e.ess).fold(f64::INFINITY, f64::min),
        ..Default::default()
    };
    for (m, f) in clamped {
        diag.mu_clamped += m as usize;
        diag.floor_clamped += f as usize;
    }
    Ok((estimates, diag))
}

/// Sufficient statistics `sum_i y_i z_i^T` and `sum_i E[z_i z_i^T]`.
///
/// Per-observation work may run in parallel; the sums are accumulated in
/// observation order so the result does not depend on the thread count.
pub fn e_step(
    data: &Dataset,
    h: &MixingMatrix,
    config: &EmConfig,
    iteration: usize,
    prior: &LatentPrior,
    noise: NoiseModel,
) -> Result<EstepOutput> {
    let (estimates, diagnostics) = posterior_estimates(data, h, config, iteration, prior, noise)?;
    let (stat_a, stat_b) = accumulate(data, &estimates);
    Ok(EstepOutput {
        stat_a,
        stat_b,
        diagnostics,
    })
}

/// Ordered sums of `y_i z_i^T` and `Z_i`.
pub fn accumulate(data: &Dataset, estimates: &[PosteriorEstimate]) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = estimates.first().map_or(0, |e| e.z_mean.len());
    let mut a = DMatrix::zeros(data.d(), k);
    let mut b = DMatrix::zeros(k, k);
    for (i, est) in estimates.iter().enumerate() {
        let y = data.observations().row(i);
        a.ger(1.0, &y.transpose(), &est.z_mean, 1.0);
        b += &est.zz_mean;
    }
    symmetrize(&mut b);
    (a, b)
}

/// Solves `H (B + ridge * Tr(B) / k * I) = A` by Cholesky.
pub fn m_step(stat_a: &DMatrix<f64>, stat_b: &DMatrix<f64>, ridge: f64) -> Result<MixingMatrix> {
    let k = stat_b.nrows();
    if stat_b.ncols() != k || stat_a.ncols() != k {
        return Err(PrismError::DimensionMismatch {
            what: "statistic columns",
            expected: k,
            found: stat_a.ncols(),
        });
    }
    let mut b = stat_b.clone();
    symmetrize(&mut b);
    let shift = ridge * b.trace() / k as f64;
    for j in 0..k {
        b[(j, j)] += shift;
    }
    let chol = b.clone().cholesky().ok_or_else(|| PrismError::SingularStatistic {
        smallest_eigenvalue: min_eigenvalue(&b),
    })?;
    // H B = A  <=>  B H^T = A^T
    let h = chol.solve(&stat_a.transpose()).transpose();
    if h.iter().any(|v| !v.is_finite()) {
        return Err(PrismError::SingularStatistic {
            smallest_eigenvalue: min_eigenvalue(&b),
        });
    }
    MixingMatrix::new(h)
}

/// `-1/(2 s) [Tr(H^T H B) - 2 Tr(H^T A)]`, the `H`-dependent part of the
/// expected complete log-likelihood.
pub fn q_value(h: &MixingMatrix, stat_a: &DMatrix<f64>, stat_b: &DMatrix<f64>, noise: NoiseModel) -> f64 {
    let hm = h.as_matrix();
    let hth = hm.transpose() * hm;
    let quad = hth.component_mul(stat_b).sum();
    let lin = hm.component_mul(stat_a).sum();
    -(quad - 2.0 * lin) / (2.0 * noise.sigma2())
}

/// Record of one EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub backend: EstepBackend,
    /// Objective at the updated `H`.
    pub q_value: f64,
    /// Objective at the `H` the E-step was run under.
    pub q_before: f64,
    pub mean_ess: f64,
    pub min_ess: f64,
    pub mu_clamped: usize,
    pub floor_clamped: usize,
    /// `||H_new - H||_F / ||H||_F`.
    pub h_frobenius_change: f64,
}

/// EM state after some number of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmState {
    pub h: MixingMatrix,
    pub iteration: usize,
    pub q_trace: Vec<f64>,
    pub stat_a: DMatrix<f64>,
    pub stat_b: DMatrix<f64>,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl EmState {
    pub fn new(init: MixingMatrix) -> Self {
        let (d, k) = (init.d(), init.k());
        Self {
            h: init,
            iteration: 0,
            q_trace: Vec::new(),
            stat_a: DMatrix::zeros(d, k),
            stat_b: DMatrix::zeros(k, k),
            records: Vec::new(),
            converged: false,
        }
    }
}

/// One E-step and M-step.
pub fn em_iteration(
    state: &mut EmState,
    data: &Dataset,
    config: &EmConfig,
    prior: &LatentPrior,
    noise: NoiseModel,
) -> Result<()> {
    let t = state.iteration;
    let step = || -> Result<(EstepOutput, MixingMatrix)> {
        let out = e_step(data, &state.h, config, t, prior, noise)?;
        let h_new = m_step(&out.stat_a, &out.stat_b, config.ridge)?;
        Ok((out, h_new))
    };
    let (out, h_new) = step().map_err(|e| e.at_iteration(t))?;
    let q_before = q_value(&state.h, &out.stat_a, &out.stat_b, noise);
    let q = q_value(&h_new, &out.stat_a, &out.stat_b, noise);
    let change = (h_new.as_matrix() - state.h.as_matrix()).norm() / state.h.as_matrix().norm();
    state.records.push(IterationRecord {
        iteration: t,
        backend: config.backend_at(t),
        q_value: q,
        q_before,
        mean_ess: out.diagnostics.mean_ess,
        min_ess: out.diagnostics.min_ess,
        mu_clamped: out.diagnostics.mu_clamped,
        floor_clamped: out.diagnostics.floor_clamped,
        h_frobenius_change: change,
    });
    state.q_trace.push(q);
    state.h = h_new;
    state.stat_a = out.stat_a;
    state.stat_b = out.stat_b;
    state.iteration += 1;
    if config.early_stop.is_some_and(|tol| change < tol) {
        state.converged = true;
    }
    Ok(())
}

/// Continues `state` until `config.total_iterations` or early stop.
pub fn resume_em(
    mut state: EmState,
    data: &Dataset,
    config: &EmConfig,
    prior: &LatentPrior,
    noise: NoiseModel,
) -> Result<EmState> {
    config.validate()?;
    while state.iteration < config.total_iterations && !state.converged {
        em_iteration(&mut state, data, config, prior, noise)?;
    }
    Ok(state)
}

/// Runs `config.total_iterations` EM iterations from `init`.
pub fn run_em(
    data: &Dataset,
    init: MixingMatrix,
    config: &EmConfig,
    prior: &LatentPrior,
    noise: NoiseModel,
) -> Result<EmState> {
    if init.d() != data.d() {
        return Err(PrismError::DimensionMismatch {
            what: "initial mixing matrix rows",
            expected: data.d(),
            found: init.d(),
        });
    }
    resume_em(EmState::new(init), data, config, prior, noise)
}

/// Writes the trajectory with columns `iteration,q_value,mean_ess,h_frobenius_change`.
pub fn write_trajectory_csv<W: Write>(mut w: W, records: &[IterationRecord]) -> Result<()> {
    writeln!(w, "iteration,q_value,mean_ess,h_frobenius_change")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.iteration, r.q_value, r.mean_ess, r.h_frobenius_change)?;
    }
    Ok(())
}

/// `sum_i log p(y_i; H)` to an additive constant-free value.
///
/// Exact for discrete and Gaussian priors. For a Dirichlet prior it uses grid
/// quadrature and so needs `k <= 3`.
pub fn data_log_likelihood(
    data: &Dataset,
    h: &MixingMatrix,
    prior: &LatentPrior,
    noise: NoiseModel,
    resolution: usize,
) -> Result<f64> {
    let d = h.d() as f64;
    let s = noise.sigma2();
    let terms: Vec<Result<f64>> = match prior {
        LatentPrior::Dirichlet(alpha) => (0..data.n())
            .into_par_iter()
            .map(|i| brute_force_log_evidence(&data.observation(i), h, alpha, noise, resolution))
            .collect(),
        LatentPrior::Discrete(atoms) => {
            let hz = h.as_matrix() * atoms.atoms().transpose();
            let log_norm = -0.5 * d * (2.0 * std::f64::consts::PI * s).ln() - (atoms.j() as f64).ln();
            (0..data.n())
                .map(|i| {
                    let y = data.observation(i);
                    let ls: Vec<f64> = hz.column_iter().map(|c| -(&y - c).norm_squared() / (2.0 * s)).collect();
                    let max = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    Ok(log_norm + max + ls.iter().map(|l| (l - max).exp()).sum::<f64>().ln())
                })
                .collect()
        }
        LatentPrior::Gaussian { sigma_z2 } => {
            let hm = h.as_matrix();
            let cov = hm * hm.transpose() * *sigma_z2 + DMatrix::identity(h.d(), h.d()) * s;
            let chol = crate::linalg::cholesky(cov, "marginal covariance")?;
            let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            (0..data.n())
                .map(|i| {
                    let y: DVector<f64> = data.observation(i);
                    let quad = y.dot(&chol.solve(&y));
                    Ok(-0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
                })
                .collect()
        }
    };
    let mut total = 0.0;
    for (i, t) in terms.into_iter().enumerate() {
        total += t.map_err(|e| e.at_observation(i))?;
    }
    Ok(total)
}
