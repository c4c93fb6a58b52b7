//! Surrogate posteriors for the importance-sampling E-step.
//!
//! Three surrogates of `p(z | y)` are provided: the Dirichlet prior itself
//! (SISA), a Dirichlet whose mean and total variance match the Gaussian
//! LMMSE moments (LISA), and the LMMSE Gaussian truncated to the simplex by
//! rejection. The last one has no tractable normalizer and is only a
//! reference sampler.
//!
//! The conditional moments are computed in the `k`-dimensional latent space:
//! with `C = B B` and `X = H B`,
//!
//! ```text
//! C H^T (H C H^T + s I)^-1 = B (X^T X + s I)^-1 X^T
//! C - C H^T (H C H^T + s I)^-1 H C = s B (X^T X + s I)^-1 B
//! ```
//!
//! The `k x k` system stays well conditioned as `s -> 0`, unlike the `d x d`
//! one, whose smallest `d - k + 1` eigenvalues are `s` itself.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PrismError, Result};
use crate::linalg::{cholesky, pinv, psd_sqrt, symmetrize};
use crate::model::{MixingMatrix, NoiseModel, RANK_TOL};
use crate::simplex::{
    centering_projection, dirichlet_logpdf, project_to_simplex, DirichletParams,
    DirichletSampler, SimplexVector, DEFAULT_PROJECTION_FLOOR,
};

/// Gaussian conditional moments `m_bar(y)` and `C_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Conditions a Gaussian latent `z ~ N(m0, B B)` on `y = H z + w`,
/// `w ~ N(0, s I)`.
///
/// The posterior covariance and gain do not depend on `y` and are computed
/// once.
#[derive(Debug, Clone)]
pub struct GaussianConditioner {
    prior_mean: DVector<f64>,
    h: DMatrix<f64>,
    h_prior_mean: DVector<f64>,
    gain: DMatrix<f64>,
    post_cov: DMatrix<f64>,
}

impl GaussianConditioner {
    pub fn new(
        prior_mean: DVector<f64>,
        prior_cov_sqrt: &DMatrix<f64>,
        h: &DMatrix<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        let k = prior_mean.len();
        if h.ncols() != k || prior_cov_sqrt.shape() != (k, k) {
            return Err(PrismError::DimensionMismatch {
                what: "latent dimension",
                expected: k,
                found: h.ncols(),
            });
        }
        let b = prior_cov_sqrt;
        let x = h * b;
        let g = x.transpose() * &x + DMatrix::identity(k, k) * sigma2;
        let chol = cholesky(g, "latent-space innovation matrix")?;
        let g_inv_b = chol.solve(b);
        let mut post_cov = b * g_inv_b * sigma2;
        symmetrize(&mut post_cov);
        let gain = b * chol.solve(&x.transpose());
        let h_prior_mean = h * &prior_mean;
        Ok(Self {
            prior_mean,
            h: h.clone(),
            h_prior_mean,
            gain,
            post_cov,
        })
    }

    /// `m0 + K (y - H m0)`.
    pub fn mean(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.prior_mean + &self.gain * (y - &self.h_prior_mean)
    }

    pub fn posterior_cov(&self) -> &DMatrix<f64> {
        &self.post_cov
    }

    /// The `k x d` LMMSE gain `C H^T (H C H^T + s I)^-1`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
}

/// LMMSE moments for the Dirichlet prior, reusable across observations that
/// share `H`.
#[derive(Debug, Clone)]
pub struct LmmseKernel {
    conditioner: GaussianConditioner,
}

impl LmmseKernel {
    pub fn new(h: &MixingMatrix, prior: &DirichletParams, noise: NoiseModel) -> Result<Self> {
        let k = h.k();
        if prior.k() != k {
            return Err(PrismError::DimensionMismatch {
                what: "prior components vs mixing matrix columns",
                expected: k,
                found: prior.k(),
            });
        }
        let moments = prior.moments();
        let p = centering_projection(k);
        // C has the exact null vector 1; keep it exact in the square root.
        let b = &p * psd_sqrt(&moments.cov) * &p;
        let conditioner =
            GaussianConditioner::new(moments.mean.into_inner(), &b, h.as_matrix(), noise.sigma2())?;
        Ok(Self { conditioner })
    }

    pub fn moments(&self, y: &DVector<f64>) -> LmmseMoments {
        LmmseMoments {
            mean: self.conditioner.mean(y),
            cov: self.conditioner.posterior_cov().clone(),
        }
    }

    pub fn conditioner(&self) -> &GaussianConditioner {
        &self.conditioner
    }
}

/// `m_bar(y) = m + C H^T (H C H^T + s I)^-1 (y - H m)` and
/// `C_bar = C - C H^T (H C H^T + s I)^-1 H C`.
pub fn lmmse_moments(
    y: &DVector<f64>,
    h: &MixingMatrix,
    prior: &DirichletParams,
    noise: NoiseModel,
) -> Result<LmmseMoments> {
    if y.len() != h.d() {
        return Err(PrismError::DimensionMismatch {
            what: "observation length",
            expected: h.d(),
            found: y.len(),
        });
    }
    Ok(LmmseKernel::new(h, prior, noise)?.moments(y))
}

/// Floors used when building the LISA proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisaSettings {
    /// Floor applied after projecting `m_bar(y)` onto the simplex.
    pub projection_floor: f64,
    /// Minimum concentration of any component.
    pub alpha_floor: f64,
}

impl Default for LisaSettings {
    fn default() -> Self {
        Self {
            projection_floor: DEFAULT_PROJECTION_FLOOR,
            alpha_floor: 1e-3,
        }
    }
}

/// Moment-matched Dirichlet proposal `Dir(mu * m_tilde)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LisaProposal {
    pub alpha_bar: DirichletParams,
    pub lmmse: LmmseMoments,
    pub mu: f64,
    pub m_tilde: SimplexVector,
    /// `mu` was raised to its lower bound.
    pub mu_clamped: bool,
    /// At least one concentration was raised to `alpha_floor`.
    pub floor_clamped: bool,
}

/// A surrogate `q(z | y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Prior(DirichletParams),
    LmmseDirichlet(LisaProposal),
    TruncatedGaussian(LmmseMoments),
}

impl Proposal {
    /// Sampler for the Dirichlet variants.
    pub fn sampler(&self) -> Result<DirichletSampler> {
        match self {
            Proposal::Prior(p) => Ok(DirichletSampler::new(p)),
            Proposal::LmmseDirichlet(l) => Ok(DirichletSampler::new(&l.alpha_bar)),
            Proposal::TruncatedGaussian(_) => Err(PrismError::UnsupportedForWeighting),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Proposal::Prior(p) => p.k(),
            Proposal::LmmseDirichlet(l) => l.alpha_bar.k(),
            Proposal::TruncatedGaussian(m) => m.mean.len(),
        }
    }
}

/// SISA: the prior as proposal.
pub fn sisa_proposal(prior: &DirichletParams) -> Proposal {
    Proposal::Prior(prior.clone())
}

/// LISA proposal from precomputed LMMSE moments.
///
/// `mu = (1 - ||m_tilde||^2) / Tr(C_bar) - 1`, bounded below by
/// `k * alpha_floor`; concentrations are then floored at
/// `alpha_floor`. When neither bound fires, `Dir(mu m_tilde)` has mean
/// `m_tilde` and total variance `Tr(C_bar)` exactly.
///
/// The squared norm is taken of the projected mean `m_tilde`, not of
/// `m_bar(y)`; only that choice makes both moment constraints hold together.
pub fn lisa_from_moments(lmmse: LmmseMoments, settings: LisaSettings) -> Result<LisaProposal> {
    let k = lmmse.mean.len();
    let trace = lmmse.cov.trace();
    if !(trace > 0.0) {
        return Err(PrismError::DegenerateCovariance { trace });
    }
    let m_tilde = project_to_simplex(&lmmse.mean, settings.projection_floor);
    let mv = m_tilde.as_vector();
    let raw_mu = (1.0 - mv.norm_squared()) / trace - 1.0;
    // A bound of k * alpha_floor / min(m_tilde) would force mu into the
    // thousands whenever m_tilde sits on a face, and the resulting proposal
    // misses most of the posterior. Small components are floored instead.
    let mu_min = k as f64 * settings.alpha_floor;
    let mu_clamped = !(raw_mu >= mu_min);
    let mu = if mu_clamped { mu_min } else { raw_mu };
    let mut floor_clamped = false;
    let alpha = mv.map(|m| {
        let a = mu * m;
        if a < settings.alpha_floor {
            floor_clamped = true;
            settings.alpha_floor
        } else {
            a
        }
    });
    Ok(LisaProposal {
        alpha_bar: DirichletParams::new(alpha)?,
        lmmse,
        mu,
        m_tilde,
        mu_clamped,
        floor_clamped,
    })
}

/// LISA proposal for one observation, with default floors.
pub fn lisa_proposal(
    y: &DVector<f64>,
    h: &MixingMatrix,
    prior: &DirichletParams,
    noise: NoiseModel,
) -> Result<Proposal> {
    let lmmse = lmmse_moments(y, h, prior, noise)?;
    Ok(Proposal::LmmseDirichlet(lisa_from_moments(
        lmmse,
        LisaSettings::default(),
    )?))
}

/// Normalized `log q(z | y)` for the Dirichlet proposals.
pub fn proposal_log_density(p: &Proposal, z: &SimplexVector) -> Result<f64> {
    match p {
        Proposal::Prior(alpha) => dirichlet_logpdf(alpha, z),
        Proposal::LmmseDirichlet(l) => dirichlet_logpdf(&l.alpha_bar, z),
        Proposal::TruncatedGaussian(_) => Err(PrismError::UnsupportedForWeighting),
    }
}

/// High-SNR limits of the LMMSE moments.
#[derive(Debug, Clone, PartialEq)]
pub struct HighSnrLimits {
    /// `(H P)^+`, the `sigma^2 -> 0` limit of the LMMSE gain.
    pub pinv_hp: DMatrix<f64>,
    /// `(1/k) (I - (H P)^+ H) 1`.
    pub v_h: DVector<f64>,
    /// `(P H^T H P)^+`; multiply by `sigma^2` for the limiting `C_bar`.
    pub cov_limit: DMatrix<f64>,
}

impl HighSnrLimits {
    /// Limiting conditional mean `(H P)^+ y + v_H`.
    pub fn mean(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.pinv_hp * y + &self.v_h
    }
}

pub fn high_snr_limits(h: &MixingMatrix, k: usize) -> Result<HighSnrLimits> {
    if h.k() != k {
        return Err(PrismError::DimensionMismatch {
            what: "mixing matrix columns",
            expected: k,
            found: h.k(),
        });
    }
    h.check_full_column_rank(RANK_TOL)?;
    let p = centering_projection(k);
    let hm = h.as_matrix();
    let pinv_hp = pinv(&(hm * &p))?;
    let ones = DVector::from_element(k, 1.0);
    let v_h = (DMatrix::identity(k, k) - &pinv_hp * hm) * ones / k as f64;
    let cov_limit = pinv(&(&p * hm.transpose() * hm * &p))?;
    Ok(HighSnrLimits {
        pinv_hp,
        v_h,
        cov_limit,
    })
}

/// Jitter added to the restricted covariance before factorization.
pub const REJECTION_JITTER: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RejectionOutcome {
    pub samples: Vec<SimplexVector>,
    pub attempts: usize,
    pub acceptance_rate: f64,
}

/// Rejection sampler for the LMMSE Gaussian truncated to the simplex.
///
/// Draws are taken in the affine hull `1^T z = 1` (coordinates of the
/// `(k-1)`-dimensional zero-sum subspace) and accepted when every entry is
/// non-negative. Stops after `count` acceptances or `max_attempts` draws.
pub fn truncated_gaussian_rejection<R: Rng + ?Sized>(
    moments: &LmmseMoments,
    count: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<RejectionOutcome> {
    let k = moments.mean.len();
    let eig = SymmetricEigen::new(centering_projection(k));
    let cols: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let basis = eig.eigenvectors.select_columns(&cols);
    let mut restricted = basis.transpose() * &moments.cov * &basis;
    symmetrize(&mut restricted);
    restricted += DMatrix::identity(k - 1, k - 1) * REJECTION_JITTER;
    let factor = match restricted.clone().cholesky() {
        Some(c) => c.l(),
        None => psd_sqrt(&restricted),
    };
    let transform = &basis * factor;
    let center = &moments.mean
        + DVector::from_element(k, (1.0 - moments.mean.sum()) / k as f64);

    let mut samples = Vec::new();
    let mut attempts = 0;
    let mut xi = DVector::zeros(k - 1);
    while samples.len() < count && attempts < max_attempts {
        attempts += 1;
        xi.iter_mut()
            .for_each(|v| *v = StandardNormal.sample(rng));
        let z = &center + &transform * &xi;
        if z.iter().all(|&v| v >= 0.0) && (z.sum() - 1.0).abs() < 1e-8 {
            samples.push(SimplexVector::new_unchecked(z));
        }
    }
    let acceptance_rate = if attempts == 0 {
        0.0
    } else {
        samples.len() as f64 / attempts as f64
    };
    Ok(RejectionOutcome {
        samples,
        attempts,
        acceptance_rate,
    })
}
