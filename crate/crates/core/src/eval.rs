//! Permutation-aligned error metric and the VCA baseline.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PrismError, Result};
use crate::linalg::{numerical_rank, pinv, singular_values, thin_svd};
use crate::model::{Dataset, MixingMatrix};

/// Minimum-cost perfect matching of rows to columns of a square cost matrix.
///
/// Returns `assignment` with row `i` matched to column `assignment[i]`, and
/// the total cost. O(k^3).
pub fn hungarian(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based potentials; column 0 is a virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    (assignment, total)
}

/// Error of an estimate against the truth after the best column matching.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub mse: f64,
    /// True column `i` is matched with estimated column `permutation[i]`.
    pub permutation: Vec<usize>,
    pub method: String,
    pub seed: u64,
    pub snr_db: f64,
    pub n_samples: usize,
    pub m_samples: usize,
}

impl MetricRecord {
    pub const CSV_HEADER: &'static str = "method,seed,snr_db,n_samples,m_samples,mse";

    pub fn with_context(mut self, method: &str, seed: u64, snr_db: f64, n_samples: usize, m_samples: usize) -> Self {
        self.method = method.to_string();
        self.seed = seed;
        self.snr_db = snr_db;
        self.n_samples = n_samples;
        self.m_samples = m_samples;
        self
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method, self.seed, self.snr_db, self.n_samples, self.m_samples, self.mse
        )
    }
}

/// `min over permutations pi of sum_i ||H_i - H_est_{pi(i)}||^2`.
pub fn permutation_mse(h_true: &MixingMatrix, h_est: &MixingMatrix) -> Result<MetricRecord> {
    if h_true.d() != h_est.d() || h_true.k() != h_est.k() {
        return Err(PrismError::DimensionMismatch {
            what: "estimate shape (d * k)",
            expected: h_true.d() * h_true.k(),
            found: h_est.d() * h_est.k(),
        });
    }
    let (a, b) = (h_true.as_matrix(), h_est.as_matrix());
    let k = h_true.k();
    let cost = DMatrix::from_fn(k, k, |i, j| (a.column(i) - b.column(j)).norm_squared());
    let (permutation, mse) = hungarian(&cost);
    Ok(MetricRecord {
        mse,
        permutation,
        method: String::new(),
        seed: 0,
        snr_db: f64::NAN,
        n_samples: 0,
        m_samples: 0,
    })
}

/// Vertex component analysis on the rank-`k` SVD subspace of the data.
///
/// Observations are projected onto the leading `k` right singular
/// directions of the `N x d` data matrix. Starting from `A = [e_k, 0, ...]`,
/// each step draws a Gaussian direction, projects it onto the orthogonal
/// complement of `A`'s columns, and selects the observation with the largest
/// absolute projection. The selected observations, in the original space,
/// are the columns of the estimate.
pub fn vca<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<MixingMatrix> {
    let (n, d) = (data.n(), data.d());
    if k < 2 || n < k || d < k {
        return Err(PrismError::InvalidParameter(format!(
            "vca needs k >= 2, N >= k and d >= k (k = {k}, N = {n}, d = {d})"
        )));
    }
    let indices = vca_indices(data, k, rng)?;
    let obs = data.observations();
    let h = DMatrix::from_fn(d, k, |i, j| obs[(indices[j], i)]);
    MixingMatrix::new(h)
}

/// Row indices of the observations VCA selects.
pub fn vca_indices<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let y = data.observations();
    let rank = numerical_rank(y)?;
    if rank < k {
        return Err(PrismError::RankDeficient {
            smallest_singular_value: singular_values(y)?.get(k - 1).copied().unwrap_or(0.0),
            tolerance: (y.nrows().max(y.ncols()) as f64) * f64::EPSILON * y.norm(),
        });
    }
    // leading right singular vectors of the N x d data
    let uk = thin_svd(y)?.v.columns(0, k).into_owned();
    // k x N coordinates of the observations in the signal subspace
    let x = uk.transpose() * y.transpose();
    let mut a = DMatrix::zeros(k, k);
    a[(k - 1, 0)] = 1.0;
    let mut selected = Vec::with_capacity(k);
    for step in 0..k {
        let w = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let proj = DMatrix::identity(k, k) - &a * pinv(&a)?;
        let f = &proj * w;
        let f = &f / f.norm();
        let scores = x.transpose() * &f;
        let idx = scores.iamax();
        a.set_column(step, &x.column(idx));
        selected.push(idx);
    }
    Ok(selected)
}
