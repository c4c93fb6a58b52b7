//! Simplex geometry and Dirichlet primitives.
//!
//! Sampling draws independent `Gamma(alpha_n, 1)` variates and normalizes
//! them. The sampler works in log space so that small concentrations, whose
//! variates routinely underflow, still yield finite log-densities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{PrismError, Result};

/// Tolerance on `1^T z = 1` for [`SimplexVector`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// Default floor applied by [`project_to_simplex`] callers that need strictly
/// interior points.
pub const DEFAULT_PROJECTION_FLOOR: f64 = 1e-6;

/// A point of the probability simplex: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(DVector<f64>);

impl SimplexVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(PrismError::InvalidParameter(format!(
                "simplex vectors need k >= 2, got {}",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(PrismError::InvalidParameter(format!(
                "simplex entry {i} is {v}, must be non-negative"
            )));
        }
        let sum = values.sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(PrismError::InvalidParameter(format!(
                "simplex entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    /// The barycenter `(1/k) 1`.
    pub fn barycenter(k: usize) -> Self {
        Self(DVector::from_element(k, 1.0 / k as f64))
    }

    /// Vertex `e_j` of the simplex.
    pub fn vertex(k: usize, j: usize) -> Self {
        let mut v = DVector::zeros(k);
        v[j] = 1.0;
        Self(v)
    }

    pub(crate) fn new_unchecked(values: DVector<f64>) -> Self {
        Self(values)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }
}

impl AsRef<DVector<f64>> for SimplexVector {
    fn as_ref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Concentration vector `alpha > 0` of a Dirichlet distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: DVector<f64>,
}

impl DirichletParams {
    pub fn new(alpha: DVector<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(PrismError::InvalidParameter(format!(
                "Dirichlet needs k >= 2 components, got {}",
                alpha.len()
            )));
        }
        if let Some((i, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a > 0.0))
        {
            return Err(PrismError::InvalidParameter(format!(
                "concentration {i} is {a}, must be positive and finite"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn from_slice(alpha: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(alpha))
    }

    /// `Dir(a, ..., a)` with `k` components.
    pub fn symmetric(k: usize, a: f64) -> Result<Self> {
        Self::new(DVector::from_element(k, a))
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// `1^T alpha`.
    pub fn total(&self) -> f64 {
        self.alpha.sum()
    }

    /// Log of the multivariate Beta function `B(alpha)`.
    pub fn log_normalizer(&self) -> f64 {
        self.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(self.total())
    }

    pub fn moments(&self) -> DirichletMoments {
        dirichlet_moments(self)
    }
}

/// First two moments of a Dirichlet distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMoments {
    pub mean: SimplexVector,
    pub cov: DMatrix<f64>,
}

/// Mean `m = alpha / 1^T alpha` and covariance `(diag(m) - m m^T) / (1^T alpha + 1)`.
pub fn dirichlet_moments(params: &DirichletParams) -> DirichletMoments {
    let total = params.total();
    let mean = params.alpha() / total;
    let cov = (DMatrix::from_diagonal(&mean) - &mean * mean.transpose()) / (total + 1.0);
    DirichletMoments {
        mean: SimplexVector::new_unchecked(mean),
        cov,
    }
}

/// Reusable Dirichlet sampler and log-density evaluator.
///
/// Samples are produced as log-abundances; [`DirichletSampler::log_density_at_log`]
/// evaluates the normalized log-density from them without forming `ln(0)`.
#[derive(Debug, Clone)]
pub struct DirichletSampler {
    params: DirichletParams,
    // Gamma(alpha_n, 1) for alpha_n >= 1, Gamma(alpha_n + 1, 1) otherwise.
    gammas: Vec<Gamma<f64>>,
    log_norm: f64,
    // Gamma draws with shape >= 1 cannot underflow, so plain normalization is safe.
    linear_ok: bool,
}

impl DirichletSampler {
    pub fn new(params: &DirichletParams) -> Self {
        let gammas = params
            .alpha()
            .iter()
            .map(|&a| {
                let shape = if a >= 1.0 { a } else { a + 1.0 };
                Gamma::new(shape, 1.0).expect("validated concentration")
            })
            .collect();
        Self {
            params: params.clone(),
            gammas,
            log_norm: params.log_normalizer(),
            linear_ok: params.alpha().iter().all(|&a| a >= 1.0),
        }
    }

    pub fn params(&self) -> &DirichletParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Draws one sample, writing `ln z` into `log_z` and `z` into `z`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, log_z: &mut [f64], z: &mut [f64]) {
        if self.linear_ok {
            let mut sum = 0.0;
            for (g, zn) in self.gammas.iter().zip(z.iter_mut()) {
                *zn = g.sample(rng);
                sum += *zn;
            }
            let log_sum = sum.ln();
            for (l, zn) in log_z.iter_mut().zip(z.iter_mut()) {
                *l = zn.ln() - log_sum;
                *zn /= sum;
            }
            return;
        }
        let alpha = self.params.alpha();
        let mut max = f64::NEG_INFINITY;
        for (n, slot) in log_z.iter_mut().enumerate() {
            let g: f64 = self.gammas[n].sample(rng);
            let mut lg = g.ln();
            let a = alpha[n];
            if a < 1.0 {
                // Gamma(a) = Gamma(a + 1) * U^(1/a)
                let u: f64 = 1.0 - rng.random::<f64>();
                lg += u.ln() / a;
            }
            *slot = lg;
            max = max.max(lg);
        }
        let sum: f64 = log_z.iter().map(|&l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        for (l, zn) in log_z.iter_mut().zip(z.iter_mut()) {
            *l -= lse;
            *zn = l.exp();
        }
    }

    /// Draws one sample into `z` without computing logs. Falls back to the
    /// log-space path when some concentration is below one.
    pub fn sample_linear<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut [f64], z: &mut [f64]) {
        if !self.linear_ok {
            return self.sample_into(rng, scratch, z);
        }
        let mut sum = 0.0;
        for (g, zn) in self.gammas.iter().zip(z.iter_mut()) {
            *zn = g.sample(rng);
            sum += *zn;
        }
        z.iter_mut().for_each(|v| *v /= sum);
    }

    /// Normalized log-density evaluated from log-abundances.
    pub fn log_density_at_log(&self, log_z: &[f64]) -> f64 {
        self.params
            .alpha()
            .iter()
            .zip(log_z)
            .map(|(&a, &l)| if a == 1.0 { 0.0 } else { (a - 1.0) * l })
            .sum::<f64>()
            - self.log_norm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimplexVector {
        let k = self.k();
        let mut log_z = vec![0.0; k];
        let mut z = vec![0.0; k];
        self.sample_into(rng, &mut log_z, &mut z);
        SimplexVector::new_unchecked(DVector::from_vec(z))
    }
}

/// Draws `count` i.i.d. samples from `Dir(alpha)`.
pub fn dirichlet_sample<R: Rng + ?Sized>(
    params: &DirichletParams,
    count: usize,
    rng: &mut R,
) -> Vec<SimplexVector> {
    let sampler = DirichletSampler::new(params);
    (0..count).map(|_| sampler.sample(rng)).collect()
}

/// Fully normalized Dirichlet log-density.
///
/// A zero component with `alpha_n < 1` is an error; with `alpha_n > 1` the
/// density is zero and `-inf` is returned.
pub fn dirichlet_logpdf(params: &DirichletParams, z: &SimplexVector) -> Result<f64> {
    if z.k() != params.k() {
        return Err(PrismError::DimensionMismatch {
            what: "simplex vector",
            expected: params.k(),
            found: z.k(),
        });
    }
    let mut acc = 0.0;
    for (n, (&a, &zn)) in params.alpha().iter().zip(z.as_slice()).enumerate() {
        if a == 1.0 {
            continue;
        }
        if zn == 0.0 {
            if a < 1.0 {
                return Err(PrismError::SingularBoundary {
                    component: n,
                    alpha: a,
                });
            }
            return Ok(f64::NEG_INFINITY);
        }
        acc += (a - 1.0) * zn.ln();
    }
    Ok(acc - params.log_normalizer())
}

/// Centering projection `P = I - 1 1^T / k`.
pub fn centering_projection(k: usize) -> DMatrix<f64> {
    DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64)
}

/// Euclidean projection onto the simplex, then a floor on every entry.
///
/// Uses the sort-and-threshold algorithm. Entries below `floor` are raised to
/// it and the result renormalized, so the output is strictly interior
/// whenever `floor > 0`.
pub fn project_to_simplex(v: &DVector<f64>, floor: f64) -> SimplexVector {
    let mut w = euclidean_simplex_projection(v);
    if floor > 0.0 && w.iter().any(|&x| x < floor) {
        w.apply(|x| *x = x.max(floor));
        let s = w.sum();
        w /= s;
    }
    SimplexVector::new_unchecked(w)
}

fn euclidean_simplex_projection(v: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn simplex_vector_rejects_invalid() {
        assert!(SimplexVector::from_slice(&[0.5, 0.6]).is_err());
        assert!(SimplexVector::from_slice(&[1.2, -0.2]).is_err());
        assert!(SimplexVector::from_slice(&[1.0]).is_err());
        assert!(SimplexVector::from_slice(&[0.25, 0.75]).is_ok());
    }

    #[test]
    fn dirichlet_params_validation() {
        assert!(DirichletParams::from_slice(&[1.0]).is_err());
        assert!(DirichletParams::from_slice(&[1.0, 0.0]).is_err());
        assert!(DirichletParams::from_slice(&[1.0, f64::NAN]).is_err());
        assert!(DirichletParams::from_slice(&[0.1, 3.0]).is_ok());
    }

    #[test]
    fn moments_symmetric_k2() {
        let m = dirichlet_moments(&DirichletParams::symmetric(2, 1.0).unwrap());
        assert_eq!(m.mean.as_slice(), &[0.5, 0.5]);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) / 12.0;
        assert!((&m.cov - expected).amax() < 1e-15);
    }

    #[test]
    fn moments_uniform_k3_diagonal() {
        let m = dirichlet_moments(&DirichletParams::symmetric(3, 1.0).unwrap());
        for i in 0..3 {
            assert!(approx(m.mean.as_slice()[i], 1.0 / 3.0, 1e-15));
            assert!(approx(m.cov[(i, i)], 1.0 / 18.0, 1e-15));
        }
    }

    #[test]
    fn covariance_annihilates_ones_and_is_centered() {
        for alpha in [vec![1.0, 2.0, 3.0], vec![0.3, 0.3], vec![5.0, 1.0, 1.0, 0.2]] {
            let p = DirichletParams::from_slice(&alpha).unwrap();
            let m = dirichlet_moments(&p);
            let k = p.k();
            let ones = DVector::from_element(k, 1.0);
            assert!((&m.cov * &ones).amax() < 1e-12);
            let proj = centering_projection(k);
            assert!((&proj * &m.cov - &m.cov).amax() < 1e-12);
        }
    }

    #[test]
    fn logpdf_uniform_is_log_factorial() {
        for k in 2..8usize {
            let p = DirichletParams::symmetric(k, 1.0).unwrap();
            let z = SimplexVector::barycenter(k);
            let fact: f64 = (1..k).map(|i| i as f64).product();
            assert!(approx(dirichlet_logpdf(&p, &z).unwrap(), fact.ln(), 1e-12));
        }
    }

    #[test]
    fn logpdf_beta21_at_vertex() {
        let p = DirichletParams::from_slice(&[2.0, 1.0]).unwrap();
        let z = SimplexVector::from_slice(&[1.0, 0.0]).unwrap();
        assert!(approx(dirichlet_logpdf(&p, &z).unwrap(), 2f64.ln(), 1e-12));
    }

    #[test]
    fn logpdf_singular_boundary() {
        let p = DirichletParams::from_slice(&[0.5, 0.5]).unwrap();
        let z = SimplexVector::from_slice(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            dirichlet_logpdf(&p, &z),
            Err(PrismError::SingularBoundary { component: 0, .. })
        ));
    }

    #[test]
    fn sampler_log_density_matches_logpdf() {
        let p = DirichletParams::from_slice(&[0.7, 2.0, 3.5]).unwrap();
        let sampler = DirichletSampler::new(&p);
        let mut rng = seeded(3);
        let mut lz = [0.0; 3];
        let mut z = [0.0; 3];
        for _ in 0..100 {
            sampler.sample_into(&mut rng, &mut lz, &mut z);
            let sv = SimplexVector::from_slice(&z).unwrap();
            let direct = dirichlet_logpdf(&p, &sv).unwrap();
            assert!(approx(direct, sampler.log_density_at_log(&lz), 1e-9 * direct.abs().max(1.0)));
        }
    }

    #[test]
    fn logpdf_integrates_to_one_k2() {
        // trapezoid on z1 in [0, 1]; interior-only alphas are >= 1 here
        for alpha in [[1.0, 1.0], [2.0, 3.0], [4.0, 1.5]] {
            let p = DirichletParams::from_slice(&alpha).unwrap();
            let n = 4000;
            let mut total = 0.0;
            for i in 0..=n {
                let t = i as f64 / n as f64;
                let z = SimplexVector::from_slice(&[t, 1.0 - t]).unwrap();
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                total += w * dirichlet_logpdf(&p, &z).unwrap().exp();
            }
            total /= n as f64;
            assert!((total - 1.0).abs() < 1e-3, "alpha {alpha:?}: {total}");
        }
    }

    #[test]
    fn logpdf_integrates_to_one_k3() {
        // vertex trapezoid over the uniform triangulation; area of a cell is 1/(2 n^2)
        for alpha in [[1.0, 1.0, 1.0], [2.0, 3.0, 1.5], [2.0, 1.0, 4.0]] {
            let p = DirichletParams::from_slice(&alpha).unwrap();
            let n = 300usize;
            let mut total = 0.0;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let l = n - i - j;
                    let nz = [i, j, l].iter().filter(|&&c| c == 0).count();
                    let count = match nz {
                        0 => 6.0,
                        1 => 3.0,
                        _ => 1.0,
                    };
                    let z = SimplexVector::from_slice(&[
                        i as f64 / n as f64,
                        j as f64 / n as f64,
                        l as f64 / n as f64,
                    ])
                    .unwrap();
                    total += count * dirichlet_logpdf(&p, &z).unwrap().exp();
                }
            }
            total *= 1.0 / (2.0 * (n * n) as f64) / 3.0;
            assert!((total - 1.0).abs() < 1e-3, "alpha {alpha:?}: {total}");
        }
    }

    /// Checks empirical mean and covariance against the closed form within
    /// `z_score` standard errors, SEs estimated from the same samples.
    fn check_sample_moments(alpha: &[f64], count: usize, seed: u64, z_score: f64) {
        let p = DirichletParams::from_slice(alpha).unwrap();
        let k = p.k();
        let moments = dirichlet_moments(&p);
        let m = moments.mean.as_vector();
        let samples = dirichlet_sample(&p, count, &mut seeded(seed));
        let nf = count as f64;
        for i in 0..k {
            let xs: Vec<f64> = samples.iter().map(|s| s.as_slice()[i]).collect();
            let mean = xs.iter().sum::<f64>() / nf;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let se = (var / nf).sqrt();
            assert!((mean - m[i]).abs() < z_score * se, "mean[{i}] {mean} vs {}", m[i]);
            for j in i..k {
                let prods: Vec<f64> = samples
                    .iter()
                    .map(|s| (s.as_slice()[i] - m[i]) * (s.as_slice()[j] - m[j]))
                    .collect();
                let c = prods.iter().sum::<f64>() / nf;
                let v = prods.iter().map(|x| (x - c).powi(2)).sum::<f64>() / (nf - 1.0);
                let se = (v / nf).sqrt();
                assert!(
                    (c - moments.cov[(i, j)]).abs() < z_score * se,
                    "cov[{i},{j}] {c} vs {}",
                    moments.cov[(i, j)]
                );
            }
        }
    }

    #[test]
    fn sample_moments_symmetric_pair() {
        check_sample_moments(&[1.0, 1.0], 1_000_000, 11, 3.0);
    }

    #[test]
    fn sample_moments_skewed_pair() {
        check_sample_moments(&[5.0, 1.0], 1_000_000, 12, 3.0);
    }

    #[test]
    fn sample_trace_uniform_k3() {
        let p = DirichletParams::symmetric(3, 1.0).unwrap();
        let n = 1_000_000;
        let samples = dirichlet_sample(&p, n, &mut seeded(13));
        let third = 1.0 / 3.0;
        let stats: Vec<f64> = samples
            .iter()
            .map(|s| s.as_slice().iter().map(|x| (x - third).powi(2)).sum())
            .collect();
        let tr = stats.iter().sum::<f64>() / n as f64;
        let var = stats.iter().map(|x| (x - tr).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((tr - 1.0 / 6.0).abs() < 3.0 * se, "trace {tr}");
    }

    #[test]
    fn samples_lie_in_simplex_with_tiny_concentrations() {
        let p = DirichletParams::from_slice(&[1e-3, 0.01, 2.0]).unwrap();
        for s in dirichlet_sample(&p, 1000, &mut seeded(5)) {
            assert!(SimplexVector::new(s.into_inner()).is_ok());
        }
    }

    #[test]
    fn centering_projection_k2() {
        let p = centering_projection(2);
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((p - expected).amax() < 1e-15);
    }

    #[test]
    fn centering_projection_identities_up_to_50() {
        for k in 2..=50 {
            let p = centering_projection(k);
            let ones = DVector::from_element(k, 1.0);
            assert!((&p - p.transpose()).amax() < 1e-12);
            assert!((&p * &p - &p).amax() < 1e-12);
            assert!((&p * &ones).amax() < 1e-12);
            assert_eq!(crate::linalg::numerical_rank(&p).unwrap(), k - 1);
        }
    }

    #[test]
    fn centering_of_dirichlet_mean() {
        // P m = m - (1/k) 1
        let params = DirichletParams::from_slice(&[0.5, 2.0, 3.0, 1.0]).unwrap();
        let m = params.moments().mean.into_inner();
        let k = params.k();
        let lhs = centering_projection(k) * &m;
        let rhs = &m - DVector::from_element(k, 1.0 / k as f64);
        assert!((lhs - rhs).amax() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let z = project_to_simplex(&DVector::from_column_slice(&[0.6, 0.6]), 0.0);
        assert!((z.as_vector() - DVector::from_column_slice(&[0.5, 0.5])).amax() < 1e-15);

        let raw = euclidean_simplex_projection(&DVector::from_column_slice(&[1.3, -0.1, -0.2]));
        assert!((raw - DVector::from_column_slice(&[1.0, 0.0, 0.0])).amax() < 1e-15);
        let floored = project_to_simplex(&DVector::from_column_slice(&[1.3, -0.1, -0.2]), 1e-6);
        let d = 1e-6 / (1.0 + 2e-6);
        assert!((floored.as_slice()[0] - (1.0 - 2.0 * d)).abs() < 1e-15);
        assert!((floored.as_slice()[1] - d).abs() < 1e-18);
        assert!(floored.is_interior());

        let inside = DVector::from_column_slice(&[0.2, 0.3, 0.5]);
        let same = project_to_simplex(&inside, 1e-6);
        assert!((same.as_vector() - &inside).amax() < 1e-15);
    }

    /// Grid search over the simplex at spacing 1/n: the minimizer of ||z - v||^2.
    fn grid_projection_oracle(v: &[f64; 3], n: usize) -> [f64; 3] {
        let mut best = [0.0; 3];
        let mut best_d = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let z = [
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    (n - i - j) as f64 / n as f64,
                ];
                let d: f64 = z.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best_d {
                    best_d = d;
                    best = z;
                }
            }
        }
        best
    }

    #[test]
    fn projection_matches_grid_oracle() {
        let mut rng = seeded(21);
        let n = 400;
        let spacing = 1.0 / n as f64;
        for _ in 0..100 {
            let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..2.0));
            let z = project_to_simplex(&DVector::from_column_slice(&v), 0.0);
            let oracle = grid_projection_oracle(&v, n);
            for i in 0..3 {
                assert!(
                    (z.as_slice()[i] - oracle[i]).abs() < spacing,
                    "v = {v:?}: {:?} vs {oracle:?}",
                    z.as_slice()
                );
            }
        }
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(v in proptest::collection::vec(-3.0f64..3.0, 2..12)) {
            let once = project_to_simplex(&DVector::from_vec(v), 0.0);
            let twice = project_to_simplex(once.as_vector(), 0.0);
            prop_assert!((once.as_vector() - twice.as_vector()).amax() < 1e-12);
            prop_assert!(SimplexVector::new(once.into_inner()).is_ok());
        }

        #[test]
        fn floored_projection_is_interior(v in proptest::collection::vec(-3.0f64..3.0, 2..12)) {
            let z = project_to_simplex(&DVector::from_vec(v), DEFAULT_PROJECTION_FLOOR);
            prop_assert!(z.is_interior());
            prop_assert!((z.as_vector().sum() - 1.0).abs() < 1e-12);
        }
    }
}
