//! Self-normalized importance sampling of `E[z | y]` and `E[z z^T | y]`.
//!
//! The log-weight of a draw `z_m ~ q(. | y)` is
//! `log p(y | z_m) + log p(z_m) - log q(z_m | y)`. Weights are normalized by
//! a max-shifted softmax, so only the unnormalized posterior is needed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{PrismError, Result};
use crate::model::{MixingMatrix, NoiseModel};
use crate::posterior::Proposal;
use crate::simplex::{DirichletParams, DirichletSampler};

/// Log-weights further than this below the maximum are flushed to zero.
pub const LOG_WEIGHT_FLUSH: f64 = 700.0;

/// Conditional moments of one observation's latent.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimate {
    pub z_mean: DVector<f64>,
    pub zz_mean: DMatrix<f64>,
    pub ess: f64,
    pub sample_count: usize,
}

impl PosteriorEstimate {
    /// `E[z z^T] - E[z] E[z]^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.zz_mean - &self.z_mean * self.z_mean.transpose()
    }
}

/// Softmax of `log_w` after subtracting the maximum.
///
/// Fails when no log-weight is finite.
pub fn normalized_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let max = log_w
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(PrismError::DegenerateWeights {
            finite: log_w.iter().filter(|v| v.is_finite()).count(),
            total: log_w.len(),
            max_log_weight: max,
        });
    }
    let mut w: Vec<f64> = log_w
        .iter()
        .map(|&l| {
            let shifted = l - max;
            if shifted.is_nan() || shifted < -LOG_WEIGHT_FLUSH {
                0.0
            } else {
                shifted.exp()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// `1 / sum(w^2)` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Weighted moments of `samples` (row-major, `k` values per sample).
pub fn weighted_moments(samples: &[f64], k: usize, log_w: &[f64]) -> Result<PosteriorEstimate> {
    let m = log_w.len();
    if samples.len() != m * k {
        return Err(PrismError::DimensionMismatch {
            what: "sample buffer",
            expected: m * k,
            found: samples.len(),
        });
    }
    let w = normalized_weights(log_w)?;
    let mut z_mean = DVector::zeros(k);
    let mut zz_mean = DMatrix::zeros(k, k);
    for (z, &wi) in samples.chunks_exact(k).zip(&w) {
        if wi == 0.0 {
            continue;
        }
        for a in 0..k {
            let wa = wi * z[a];
            z_mean[a] += wa;
            for b in a..k {
                zz_mean[(a, b)] += wa * z[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            zz_mean[(a, b)] = zz_mean[(b, a)];
        }
    }
    Ok(PosteriorEstimate {
        z_mean,
        zz_mean,
        ess: effective_sample_size(&w),
        sample_count: m,
    })
}

/// Importance-sampling estimate of the posterior moments of one observation.
pub fn importance_estimate<R: Rng + ?Sized>(
    y: &DVector<f64>,
    proposal: &Proposal,
    h: &MixingMatrix,
    prior: &DirichletParams,
    noise: NoiseModel,
    m: usize,
    rng: &mut R,
) -> Result<PosteriorEstimate> {
    let q = proposal.sampler()?;
    let p = DirichletSampler::new(prior);
    importance_estimate_with(y, &q, &p, h, noise, m, rng)
}

/// As [`importance_estimate`], with prebuilt samplers for the proposal and
/// prior.
pub fn importance_estimate_with<R: Rng + ?Sized>(
    y: &DVector<f64>,
    proposal: &DirichletSampler,
    prior: &DirichletSampler,
    h: &MixingMatrix,
    noise: NoiseModel,
    m: usize,
    rng: &mut R,
) -> Result<PosteriorEstimate> {
    let (d, k) = (h.d(), h.k());
    if y.len() != d {
        return Err(PrismError::DimensionMismatch {
            what: "observation length",
            expected: d,
            found: y.len(),
        });
    }
    if proposal.k() != k || prior.k() != k {
        return Err(PrismError::DimensionMismatch {
            what: "proposal components",
            expected: k,
            found: proposal.k(),
        });
    }
    if m == 0 {
        return Err(PrismError::InvalidParameter("sample count must be positive".into()));
    }
    let same = proposal.params() == prior.params();
    let hm = h.as_matrix().as_slice();
    let inv_two_s2 = 0.5 / noise.sigma2();
    let mut samples = vec![0.0; m * k];
    let mut log_w = vec![0.0; m];
    let mut log_z = vec![0.0; k];
    let mut resid = vec![0.0; d];
    for (z, lw) in samples.chunks_exact_mut(k).zip(log_w.iter_mut()) {
        if same {
            // prior and proposal densities cancel
            proposal.sample_linear(rng, &mut log_z, z);
        } else {
            proposal.sample_into(rng, &mut log_z, z);
        }
        // ||y - H z||^2; the Gaussian normalizer is common to all draws
        resid.copy_from_slice(y.as_slice());
        for (col, &zj) in hm.chunks_exact(d).zip(z.iter()) {
            for (r, &hij) in resid.iter_mut().zip(col) {
                *r -= hij * zj;
            }
        }
        let r2: f64 = resid.iter().map(|r| r * r).sum();
        *lw = -r2 * inv_two_s2;
        if !same {
            *lw += prior.log_density_at_log(&log_z) - proposal.log_density_at_log(&log_z);
        }
    }
    weighted_moments(&samples, k, &log_w)
}
