//! Dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{PrismError, Result};

/// Numerical-rank cutoff `max(rows, cols) * eps * sigma_max`.
fn rank_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Thin SVD `A = U diag(s) V^T` with `s` in decreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

// nalgebra's bidiagonal SVD can return factors that do not reconstruct the
// input when a singular value is exactly zero, which every `H P` has.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (rows, cols) = a.shape();
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let svd = m
        .thin_svd()
        .map_err(|e| PrismError::FactorizationFailed(format!("SVD of a {rows} x {cols} matrix: {e:?}")))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let r = rows.min(cols);
    Ok(ThinSvd {
        u: DMatrix::from_fn(rows, r, |i, j| u[(i, j)]),
        s: DVector::from_fn(r, |i, _| s[i]),
        v: DMatrix::from_fn(cols, r, |i, j| v[(i, j)]),
    })
}

/// Moore-Penrose pseudo-inverse via SVD.
///
/// Singular values at or below `max(rows, cols) * eps * sigma_max` are
/// treated as zero.
pub fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let svd = thin_svd(a)?;
    let cutoff = rank_cutoff(rows, cols, svd.s[0]);
    let mut out = DMatrix::zeros(cols, rows);
    for (i, &s) in svd.s.iter().enumerate() {
        if s > cutoff {
            out += (svd.v.column(i) / s) * svd.u.column(i).transpose();
        }
    }
    Ok(out)
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let s = m
        .singular_values()
        .map_err(|e| PrismError::FactorizationFailed(format!("SVD of a {rows} x {cols} matrix: {e:?}")))?;
    Ok(DVector::from_vec(s))
}

pub fn smallest_singular_value(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.min())
}

/// Numerical rank of `a` using the same cutoff as [`pinv`].
pub fn numerical_rank(a: &DMatrix<f64>) -> Result<usize> {
    let (rows, cols) = a.shape();
    let s = singular_values(a)?;
    let cutoff = rank_cutoff(rows, cols, s.max());
    Ok(s.iter().filter(|&&x| x > cutoff).count())
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let t = a.transpose();
    *a += t;
    *a *= 0.5;
}

/// Symmetric PSD square root `B` with `B * B = C`.
///
/// Eigenvalues below `100 * n * eps * lambda_max` (including slightly
/// negative round-off) are set to zero; a round-off eigenvalue left in
/// would come back as a root near `sqrt(eps)`.
pub fn psd_sqrt(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let mut sym = c.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = 100.0 * n as f64 * f64::EPSILON * lambda_max;
    let roots = eig
        .eigenvalues
        .map(|l| if l > cutoff { l.sqrt() } else { 0.0 });
    let v = &eig.eigenvectors;
    let mut b = v * DMatrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&mut b);
    b
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let mut sym = a.clone();
    symmetrize(&mut sym);
    sym.symmetric_eigenvalues().min()
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn cholesky(a: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a).ok_or_else(|| {
        PrismError::FactorizationFailed(format!("{what} is not positive definite"))
    })
}

pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_rank_square_is_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = pinv(&a).unwrap();
        let id = &a * &p;
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn pinv_satisfies_penrose_conditions_on_rank_deficient() {
        // rank 1
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let p = pinv(&a).unwrap();
        assert!((&a * &p * &a - &a).amax() < 1e-12);
        assert!((&p * &a * &p - &p).amax() < 1e-12);
        let ap = &a * &p;
        assert!((&ap - ap.transpose()).amax() < 1e-12);
        let pa = &p * &a;
        assert!((&pa - pa.transpose()).amax() < 1e-12);
        assert_eq!(numerical_rank(&a).unwrap(), 1);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let c = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        let b = psd_sqrt(&c);
        assert!((&b * &b - &c).amax() < 1e-15);
        assert!((&b * DVector::from_element(2, 1.0)).amax() < 1e-15);
    }

    #[test]
    fn svd_reconstructs_matrices_with_an_exact_zero_singular_value() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (rows, k) in [(26, 4), (9, 8), (50, 20), (4, 4)] {
            let h = DMatrix::from_fn(rows, k, |_, _| rng.random::<f64>());
            let p = crate::simplex::centering_projection(k);
            let a = h * p;
            let svd = thin_svd(&a).unwrap();
            let rec = &svd.u * DMatrix::from_diagonal(&svd.s) * svd.v.transpose();
            assert!((rec - &a).amax() < 1e-13, "{rows} x {k}");
            assert!(svd.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
            let pi = pinv(&a).unwrap();
            assert!((&pi * &a * &pi - &pi).amax() < 1e-12);
            assert!((&a * &pi * &a - &a).amax() < 1e-12);
            assert_eq!(numerical_rank(&a).unwrap(), k - 1);
        }
    }
}
