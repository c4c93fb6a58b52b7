//! Exact conditional moments for two latent families with closed forms:
//! a zero-mean isotropic Gaussian and a uniform discrete prior on a finite
//! set of atoms.

use nalgebra::{DMatrix, DVector};

use crate::error::{PrismError, Result};
use crate::estep::PosteriorEstimate;
use crate::model::{MixingMatrix, NoiseModel};
use crate::posterior::GaussianConditioner;

/// Uniform prior over `J` atoms (rows of `atoms`, each of length `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePrior {
    atoms: DMatrix<f64>,
}

impl DiscretePrior {
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.nrows() < 1 {
            return Err(PrismError::InvalidParameter("discrete prior needs J >= 1 atoms".into()));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(PrismError::InvalidParameter("discrete prior atoms must be finite".into()));
        }
        Ok(Self { atoms })
    }

    pub fn from_rows(rows: &[DVector<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(PrismError::InvalidParameter("discrete prior needs J >= 1 atoms".into()));
        }
        let k = rows[0].len();
        let m = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        Self::new(m)
    }

    pub fn j(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn k(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> DVector<f64> {
        self.atoms.row(j).transpose()
    }
}

/// Gaussian posterior `z | y` under `z ~ N(0, s_z I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianPosterior {
    /// Converts to EM sufficient statistics: `E[z z^T] = cov + mean mean^T`.
    pub fn to_estimate(&self) -> PosteriorEstimate {
        PosteriorEstimate {
            zz_mean: &self.cov + &self.mean * self.mean.transpose(),
            z_mean: self.mean.clone(),
            ess: f64::INFINITY,
            sample_count: 0,
        }
    }
}

/// Builds the reusable conditioner for `z ~ N(0, s_z I)`.
pub fn gaussian_conditioner(
    h: &MixingMatrix,
    sigma_z2: f64,
    noise: NoiseModel,
) -> Result<GaussianConditioner> {
    if !(sigma_z2.is_finite() && sigma_z2 > 0.0) {
        return Err(PrismError::InvalidParameter(format!(
            "latent variance must be positive, got {sigma_z2}"
        )));
    }
    let k = h.k();
    GaussianConditioner::new(
        DVector::zeros(k),
        &(DMatrix::identity(k, k) * sigma_z2.sqrt()),
        h.as_matrix(),
        noise.sigma2(),
    )
}

/// `E[z|y] = s_z H^T (s_z H H^T + s I)^-1 y` and
/// `cov[z|y] = s_z I - s_z^2 H^T (s_z H H^T + s I)^-1 H`.
pub fn gaussian_posterior_moments(
    y: &DVector<f64>,
    h: &MixingMatrix,
    sigma_z2: f64,
    noise: NoiseModel,
) -> Result<GaussianPosterior> {
    if y.len() != h.d() {
        return Err(PrismError::DimensionMismatch {
            what: "observation length",
            expected: h.d(),
            found: y.len(),
        });
    }
    let c = gaussian_conditioner(h, sigma_z2, noise)?;
    Ok(GaussianPosterior {
        mean: c.mean(y),
        cov: c.posterior_cov().clone(),
    })
}

/// Bayes-rule moments over the atoms, normalized by log-sum-exp.
///
/// `ess` is the exponential of the entropy of the atom posterior.
pub fn discrete_posterior_moments(
    y: &DVector<f64>,
    h: &MixingMatrix,
    noise: NoiseModel,
    prior: &DiscretePrior,
) -> Result<PosteriorEstimate> {
    let k = h.k();
    if prior.k() != k {
        return Err(PrismError::DimensionMismatch {
            what: "atom length",
            expected: k,
            found: prior.k(),
        });
    }
    if y.len() != h.d() {
        return Err(PrismError::DimensionMismatch {
            what: "observation length",
            expected: h.d(),
            found: y.len(),
        });
    }
    let hz = h.as_matrix() * prior.atoms().transpose();
    let scale = -0.5 / noise.sigma2();
    let log_lik: Vec<f64> = hz
        .column_iter()
        .map(|col| scale * (y - col).norm_squared())
        .collect();
    let max = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + log_lik.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let mut z_mean = DVector::zeros(k);
    let mut zz_mean = DMatrix::zeros(k, k);
    let mut entropy = 0.0;
    for (j, &l) in log_lik.iter().enumerate() {
        let log_p = l - lse;
        let p = log_p.exp();
        if p == 0.0 {
            continue;
        }
        entropy -= p * log_p;
        let z = prior.atom(j);
        zz_mean += &z * z.transpose() * p;
        z_mean += z * p;
    }
    Ok(PosteriorEstimate {
        z_mean,
        zz_mean,
        ess: entropy.exp(),
        sample_count: prior.j(),
    })
}
