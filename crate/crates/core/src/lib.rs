//! Maximum-likelihood estimation of the mixing matrix `H` in
//! `y = H z + w`, `z ~ Dir(alpha)`, `w ~ N(0, s I)`, by Monte Carlo EM.
//!
//! The E-step moments `E[z | y]` and `E[z z^T | y]` come from self-normalized
//! importance sampling, with either the prior (SISA) or a Dirichlet matched to
//! the LMMSE moments (LISA) as proposal. Exact backends for discrete and
//! Gaussian latents, and grid quadrature for `k <= 3`, serve as references.
//!
//! ```
//! use prism_core::{generate_data, random_mixing_matrix, seeded, vca, permutation_mse};
//! use prism_core::{run_em, DirichletParams, EmConfig, LatentPrior, noise_for_snr_db};
//!
//! let mut rng = seeded(7);
//! let h = random_mixing_matrix(6, 3, &mut rng).unwrap();
//! let prior = DirichletParams::symmetric(3, 1.0).unwrap();
//! let noise = noise_for_snr_db(&h, &prior, 20.0).unwrap();
//! let data = generate_data(&h, &prior, noise, 200, &mut rng).unwrap();
//!
//! let init = vca(&data, 3, &mut rng).unwrap();
//! let config = EmConfig { total_iterations: 10, switch_iteration: 5, samples_per_obs: 100, ..Default::default() };
//! let state = run_em(&data, init, &config, &LatentPrior::Dirichlet(prior), noise).unwrap();
//! let err = permutation_mse(&h, &state.h).unwrap();
//! assert!(err.mse.is_finite());
//! ```

pub mod closed_form;
pub mod em;
pub mod error;
pub mod estep;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod model;
pub mod posterior;
pub mod quadrature;
pub mod rng;
pub mod simplex;

pub use closed_form::{discrete_posterior_moments, gaussian_posterior_moments, DiscretePrior, GaussianPosterior};
pub use em::{
    data_log_likelihood, e_step, em_iteration, m_step, q_value, resume_em, run_em, write_trajectory_csv,
    EmConfig, EmState, EstepBackend, EstepDiagnostics, EstepOutput, IterationRecord, LatentPrior,
};
pub use error::{PrismError, Result};
pub use estep::{effective_sample_size, importance_estimate, normalized_weights, PosteriorEstimate};
pub use eval::{hungarian, permutation_mse, vca, MetricRecord};
pub use io::{format_matrix, read_matrix, write_matrix};
pub use model::{
    generate_data, log_likelihood_y_given_z, noise_for_snr_db, random_mixing_matrix, signal_power, snr,
    Dataset, MixingMatrix, NoiseModel,
};
pub use posterior::{
    high_snr_limits, lisa_proposal, lmmse_moments, sisa_proposal, truncated_gaussian_rejection,
    HighSnrLimits, LisaProposal, LisaSettings, LmmseMoments, Proposal, RejectionOutcome,
};
pub use quadrature::{brute_force_log_evidence, brute_force_posterior};
pub use rng::{derive_seed, seeded, substream, PrismRng};
pub use simplex::{
    centering_projection, dirichlet_logpdf, dirichlet_moments, dirichlet_sample, project_to_simplex,
    DirichletMoments, DirichletParams, DirichletSampler, SimplexVector,
};
