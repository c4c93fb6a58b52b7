//! The linear mixing model `y = H z + w` with Dirichlet latents and
//! isotropic Gaussian noise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PrismError, Result};
use crate::linalg::smallest_singular_value;
use crate::simplex::{DirichletParams, DirichletSampler, SimplexVector};

/// Smallest-singular-value threshold for the full-column-rank check.
pub const RANK_TOL: f64 = 1e-8;

const MAX_RANK_ATTEMPTS: usize = 100;

/// The `d x k` mixing matrix whose columns are the simplex vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix(DMatrix<f64>);

impl MixingMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() < 1 || entries.ncols() < 2 {
            return Err(PrismError::InvalidParameter(format!(
                "mixing matrix must be d x k with d >= 1, k >= 2; got {} x {}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(PrismError::InvalidParameter(
                "mixing matrix has non-finite entries".into(),
            ));
        }
        Ok(Self(entries))
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Errors unless the smallest singular value exceeds `tol`.
    pub fn check_full_column_rank(&self, tol: f64) -> Result<()> {
        if self.d() < self.k() {
            return Err(PrismError::RankDeficient {
                smallest_singular_value: 0.0,
                tolerance: tol,
            });
        }
        let s = smallest_singular_value(&self.0)?;
        if s > tol {
            Ok(())
        } else {
            Err(PrismError::RankDeficient {
                smallest_singular_value: s,
                tolerance: tol,
            })
        }
    }
}

/// Known noise variance `sigma^2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(PrismError::InvalidParameter(format!(
                "noise variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Observations (rows `y_i`) with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: DMatrix<f64>,
    latents: Option<DMatrix<f64>>,
    truth: Option<MixingMatrix>,
}

impl Dataset {
    pub fn new(observations: DMatrix<f64>) -> Result<Self> {
        if observations.nrows() < 1 || observations.ncols() < 1 {
            return Err(PrismError::InvalidParameter("dataset has no observations".into()));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(PrismError::InvalidParameter(
                "dataset has non-finite observations".into(),
            ));
        }
        Ok(Self {
            observations,
            latents: None,
            truth: None,
        })
    }

    pub fn with_latents(mut self, latents: DMatrix<f64>) -> Result<Self> {
        if latents.nrows() != self.n() {
            return Err(PrismError::DimensionMismatch {
                what: "latent rows",
                expected: self.n(),
                found: latents.nrows(),
            });
        }
        for row in latents.row_iter() {
            SimplexVector::new(row.transpose())?;
        }
        self.latents = Some(latents);
        Ok(self)
    }

    pub fn with_truth(mut self, truth: MixingMatrix) -> Result<Self> {
        if truth.d() != self.d() {
            return Err(PrismError::DimensionMismatch {
                what: "true mixing matrix rows",
                expected: self.d(),
                found: truth.d(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.observations.nrows()
    }

    pub fn d(&self) -> usize {
        self.observations.ncols()
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.observations
    }

    pub fn observation(&self, i: usize) -> DVector<f64> {
        self.observations.row(i).transpose()
    }

    pub fn latents(&self) -> Option<&DMatrix<f64>> {
        self.latents.as_ref()
    }

    pub fn truth(&self) -> Option<&MixingMatrix> {
        self.truth.as_ref()
    }

    /// Keeps the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let obs = self.observations.select_rows(rows);
        let mut out = Dataset::new(obs)?;
        if let Some(l) = &self.latents {
            out.latents = Some(l.select_rows(rows));
        }
        out.truth = self.truth.clone();
        Ok(out)
    }
}

fn check_prior_dims(h: &MixingMatrix, prior: &DirichletParams) -> Result<()> {
    if prior.k() != h.k() {
        return Err(PrismError::DimensionMismatch {
            what: "prior components vs mixing matrix columns",
            expected: h.k(),
            found: prior.k(),
        });
    }
    Ok(())
}

/// Draws `n` observations `y_i = H z_i + w_i` with `z_i ~ Dir(alpha)` and
/// `w_i ~ N(0, sigma^2 I)`; the latents and `H` ride along as ground truth.
pub fn generate_data<R: Rng + ?Sized>(
    h: &MixingMatrix,
    prior: &DirichletParams,
    noise: NoiseModel,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    check_prior_dims(h, prior)?;
    if n == 0 {
        return Err(PrismError::InvalidParameter("n must be positive".into()));
    }
    let (d, k) = (h.d(), h.k());
    let sampler = DirichletSampler::new(prior);
    let sigma = noise.sigma2().sqrt();
    let mut latents = DMatrix::zeros(n, k);
    let mut obs = DMatrix::zeros(n, d);
    let mut log_z = vec![0.0; k];
    let mut z = vec![0.0; k];
    for i in 0..n {
        sampler.sample_into(rng, &mut log_z, &mut z);
        let zv = DVector::from_column_slice(&z);
        let mut y = h.as_matrix() * &zv;
        for yj in y.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *yj += sigma * e;
        }
        latents.set_row(i, &zv.transpose());
        obs.set_row(i, &y.transpose());
    }
    Dataset::new(obs)?
        .with_latents(latents)?
        .with_truth(h.clone())
}

/// Gaussian log-likelihood `-||y - Hz||^2 / (2 sigma^2) - (d/2) log(2 pi sigma^2)`.
pub fn log_likelihood_y_given_z(
    y: &DVector<f64>,
    z: &DVector<f64>,
    h: &MixingMatrix,
    noise: NoiseModel,
) -> f64 {
    let d = y.len() as f64;
    let r = y - h.as_matrix() * z;
    -r.norm_squared() / (2.0 * noise.sigma2()) - 0.5 * d * (2.0 * PI * noise.sigma2()).ln()
}

/// `Tr(H C H^T)`: the signal power under the prior covariance.
pub fn signal_power(h: &MixingMatrix, prior: &DirichletParams) -> Result<f64> {
    check_prior_dims(h, prior)?;
    let c = prior.moments().cov;
    Ok((h.as_matrix() * c * h.as_matrix().transpose()).trace())
}

/// Signal-to-noise ratio `Tr(H C H^T) / sigma^2` (linear, not dB).
pub fn snr(h: &MixingMatrix, prior: &DirichletParams, noise: NoiseModel) -> Result<f64> {
    Ok(signal_power(h, prior)? / noise.sigma2())
}

/// Noise variance that realizes `snr_db` for this `H` and prior.
pub fn noise_for_snr_db(h: &MixingMatrix, prior: &DirichletParams, snr_db: f64) -> Result<NoiseModel> {
    NoiseModel::new(signal_power(h, prior)? / 10f64.powf(snr_db / 10.0))
}

/// Random `d x k` matrix with i.i.d. `U[0, 1]` entries, redrawn until it has
/// full column rank.
pub fn random_mixing_matrix<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<MixingMatrix> {
    if k < 2 || d < k {
        return Err(PrismError::InvalidParameter(format!(
            "random mixing matrix needs d >= k >= 2, got d = {d}, k = {k}"
        )));
    }
    let mut last = None;
    for _ in 0..MAX_RANK_ATTEMPTS {
        let m = DMatrix::from_fn(d, k, |_, _| rng.random::<f64>());
        let h = MixingMatrix::new(m)?;
        match h.check_full_column_rank(RANK_TOL) {
            Ok(()) => return Ok(h),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::simplex::dirichlet_moments;

    #[test]
    fn noise_rejects_nonpositive() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(-1.0).is_err());
        assert!(NoiseModel::new(f64::INFINITY).is_err());
    }

    #[test]
    fn log_likelihood_zero_residual_unit_normalizer() {
        let h = MixingMatrix::new(DMatrix::from_row_slice(1, 2, &[1.0, 3.0])).unwrap();
        let z = DVector::from_column_slice(&[0.25, 0.75]);
        let y = h.as_matrix() * &z;
        let noise = NoiseModel::new(1.0 / (2.0 * PI)).unwrap();
        assert!(log_likelihood_y_given_z(&y, &z, &h, noise).abs() < 1e-14);
    }

    #[test]
    fn log_likelihood_direct_value() {
        let h = MixingMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let z = DVector::from_column_slice(&[0.5, 0.5]);
        let y = DVector::from_column_slice(&[1.5, 0.5]);
        let noise = NoiseModel::new(1.0).unwrap();
        let expected = -0.5 - (2.0 * PI).ln();
        assert!((log_likelihood_y_given_z(&y, &z, &h, noise) - expected).abs() < 1e-14);
    }

    #[test]
    fn log_likelihood_decreases_with_residual() {
        let h = MixingMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let z = DVector::from_column_slice(&[0.5, 0.5]);
        let noise = NoiseModel::new(0.3).unwrap();
        let mut prev = f64::INFINITY;
        for step in 0..20 {
            let y = DVector::from_column_slice(&[0.5 + 0.1 * step as f64, 0.5]);
            let ll = log_likelihood_y_given_z(&y, &z, &h, noise);
            assert!(ll < prev);
            prev = ll;
        }
    }

    /// Multivariate normal log-density with covariance `sigma^2 I`, evaluated
    /// through a Cholesky log-determinant and triangular solve.
    fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, sigma2: f64) -> f64 {
        let d = x.len();
        let cov = DMatrix::identity(d, d) * sigma2;
        let chol = cov.cholesky().unwrap();
        let r = x - mean;
        let sol = chol.l().solve_lower_triangular(&r).unwrap();
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        -0.5 * (sol.norm_squared() + logdet + d as f64 * (2.0 * PI).ln())
    }

    #[test]
    fn log_likelihood_matches_mvn() {
        let mut rng = seeded(9);
        for _ in 0..100 {
            let d = rng.random_range(1..8);
            let k = rng.random_range(2..5);
            let h = MixingMatrix::new(DMatrix::from_fn(d, k, |_, _| rng.random::<f64>())).unwrap();
            let prior = DirichletParams::symmetric(k, 1.0).unwrap();
            let z = DirichletSampler::new(&prior).sample(&mut rng).into_inner();
            let y = DVector::from_fn(d, |_, _| rng.random::<f64>());
            let sigma2 = rng.random_range(0.01..2.0);
            let noise = NoiseModel::new(sigma2).unwrap();
            let a = log_likelihood_y_given_z(&y, &z, &h, noise);
            let b = mvn_logpdf(&y, &(h.as_matrix() * &z), sigma2);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn snr_examples() {
        let prior = DirichletParams::symmetric(2, 1.0).unwrap();
        let h = MixingMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let s = snr(&h, &prior, NoiseModel::new(1.0 / 12.0).unwrap()).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        let s2 = snr(&h, &prior, NoiseModel::new(2.0 / 12.0).unwrap()).unwrap();
        assert!((s2 - s / 2.0).abs() < 1e-12);
        let zero = MixingMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(snr(&zero, &prior, NoiseModel::new(1.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn random_mixing_matrix_protocol_shape() {
        let h = random_mixing_matrix(50, 20, &mut seeded(1)).unwrap();
        assert_eq!((h.d(), h.k()), (50, 20));
        assert!(h.as_matrix().iter().all(|&v| (0.0..=1.0).contains(&v)));
        h.check_full_column_rank(RANK_TOL).unwrap();
        let again = random_mixing_matrix(50, 20, &mut seeded(1)).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn random_mixing_matrix_entry_mean() {
        let mut rng = seeded(2);
        let mut acc = 0.0;
        let draws = 200;
        for _ in 0..draws {
            acc += random_mixing_matrix(10, 5, &mut rng).unwrap().as_matrix().mean();
        }
        let mean = acc / draws as f64;
        // SE of the mean of 10^4 uniforms is ~0.003
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn random_mixing_matrix_rejects_wide() {
        assert!(random_mixing_matrix(3, 4, &mut seeded(0)).is_err());
    }

    #[test]
    fn generate_data_noiseless_in_hull() {
        let mut rng = seeded(4);
        let h = random_mixing_matrix(6, 3, &mut rng).unwrap();
        let prior = DirichletParams::symmetric(3, 1.0).unwrap();
        let data = generate_data(&h, &prior, NoiseModel::new(1e-30).unwrap(), 500, &mut rng).unwrap();
        let z = data.latents().unwrap();
        for i in 0..data.n() {
            let zi = z.row(i).transpose();
            assert!((zi.sum() - 1.0).abs() < 1e-12 && zi.min() >= 0.0);
            let recon = h.as_matrix() * zi;
            assert!((data.observation(i) - recon).amax() < 1e-10);
        }
    }

    #[test]
    fn generate_data_protocol_shape_and_determinism() {
        let h = random_mixing_matrix(50, 20, &mut seeded(5)).unwrap();
        let prior = DirichletParams::symmetric(20, 1.0).unwrap();
        let noise = noise_for_snr_db(&h, &prior, 10.0).unwrap();
        let a = generate_data(&h, &prior, noise, 5000, &mut seeded(6)).unwrap();
        assert_eq!(a.observations().shape(), (5000, 50));
        let b = generate_data(&h, &prior, noise, 5000, &mut seeded(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_data_rejects_mismatch() {
        let h = MixingMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let prior = DirichletParams::symmetric(2, 1.0).unwrap();
        assert!(matches!(
            generate_data(&h, &prior, NoiseModel::new(1.0).unwrap(), 10, &mut seeded(0)),
            Err(PrismError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empirical_mean_and_covariance_of_y() {
        // E[y] = H m, cov[y] = H C H^T + sigma^2 I
        let mut rng = seeded(8);
        let h = random_mixing_matrix(3, 2, &mut rng).unwrap();
        let prior = DirichletParams::from_slice(&[2.0, 1.0]).unwrap();
        let noise = NoiseModel::new(0.05).unwrap();
        let n = 1_000_000;
        let data = generate_data(&h, &prior, noise, n, &mut rng).unwrap();
        let mom = dirichlet_moments(&prior);
        let mean = h.as_matrix() * mom.mean.as_vector();
        let cov = h.as_matrix() * &mom.cov * h.as_matrix().transpose()
            + DMatrix::identity(3, 3) * noise.sigma2();
        let y = data.observations();
        let nf = n as f64;
        for a in 0..3 {
            let col = y.column(a);
            let emp = col.mean();
            let var = col.iter().map(|v| (v - emp).powi(2)).sum::<f64>() / (nf - 1.0);
            assert!((emp - mean[a]).abs() < 3.0 * (var / nf).sqrt());
            for b in a..3 {
                let prods: Vec<f64> = (0..n)
                    .map(|i| (y[(i, a)] - mean[a]) * (y[(i, b)] - mean[b]))
                    .collect();
                let c = prods.iter().sum::<f64>() / nf;
                let v = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (nf - 1.0);
                assert!((c - cov[(a, b)]).abs() < 3.0 * (v / nf).sqrt(), "cov[{a},{b}]");
            }
        }
    }
}
