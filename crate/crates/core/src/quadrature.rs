//! Deterministic grid quadrature of the exact posterior for `k <= 3`.
//!
//! This is the reference the Monte Carlo E-steps are checked against. The
//! prior is written in stick-breaking form, `z_1 = v_1`,
//! `z_2 = (1 - v_1) v_2`, `z_3 = (1 - v_1)(1 - v_2)`, where the `v_j` are
//! independent Beta variables. Each coordinate is split into `n` equal
//! cells; a cell carries its exact Beta mass (regularized incomplete beta
//! function) and its node sits at the Beta-conditional mean of the cell. The
//! likelihood is the only thing approximated, so boundary singularities of
//! the prior (any `alpha < 1`) cost no accuracy and the rule is second order
//! in `1 / n` for every `alpha`.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::beta_reg;

use crate::error::{PrismError, Result};
use crate::estep::PosteriorEstimate;
use crate::model::{log_likelihood_y_given_z, MixingMatrix, NoiseModel};
use crate::simplex::DirichletParams;

/// Default grid resolution (cells per coordinate).
pub const DEFAULT_RESOLUTION: usize = 200;

struct Node {
    z: DVector<f64>,
    log_weight: f64,
}

/// `P(lo < v < hi)` for `v ~ Beta(a, b)`, taken from whichever tail keeps
/// the difference well conditioned.
fn beta_mass(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let m = if mid <= a / (a + b) {
        beta_reg(a, b, hi) - beta_reg(a, b, lo)
    } else {
        beta_reg(b, a, 1.0 - lo) - beta_reg(b, a, 1.0 - hi)
    };
    m.max(0.0)
}

/// Cells of `[0, 1]` under `Beta(a, b)`: (conditional mean, log mass).
fn beta_cells(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let ratio = a / (a + b);
    (0..n)
        .filter_map(|i| {
            let (lo, hi) = (i as f64 / nf, (i + 1) as f64 / nf);
            let mass = beta_mass(a, b, lo, hi);
            if mass <= 0.0 {
                return None;
            }
            // E[v 1{cell}] = a / (a + b) * P_{Beta(a + 1, b)}(cell)
            let first = ratio * beta_mass(a + 1.0, b, lo, hi);
            let mut c = first / mass;
            if !(c >= lo && c <= hi) {
                c = 0.5 * (lo + hi);
            }
            Some((c, mass.ln()))
        })
        .collect()
}

fn grid(prior: &DirichletParams, n: usize) -> Result<Vec<Node>> {
    let alpha = prior.alpha();
    let nodes = match prior.k() {
        2 => beta_cells(alpha[0], alpha[1], n)
            .into_iter()
            .map(|(v, lw)| Node {
                z: DVector::from_column_slice(&[v, 1.0 - v]),
                log_weight: lw,
            })
            .collect(),
        3 => {
            let outer = beta_cells(alpha[0], alpha[1] + alpha[2], n);
            let inner = beta_cells(alpha[1], alpha[2], n);
            let mut nodes = Vec::with_capacity(outer.len() * inner.len());
            for &(v1, lw1) in &outer {
                for &(v2, lw2) in &inner {
                    let rest = 1.0 - v1;
                    nodes.push(Node {
                        z: DVector::from_column_slice(&[v1, rest * v2, rest * (1.0 - v2)]),
                        log_weight: lw1 + lw2,
                    });
                }
            }
            nodes
        }
        k => return Err(PrismError::OracleDimension(k)),
    };
    Ok(nodes)
}

fn log_integrand(nodes: &[Node], y: &DVector<f64>, h: &MixingMatrix, noise: NoiseModel) -> Vec<f64> {
    nodes
        .iter()
        .map(|node| node.log_weight + log_likelihood_y_given_z(y, &node.z, h, noise))
        .collect()
}

fn check(h: &MixingMatrix, prior: &DirichletParams, y: &DVector<f64>, n: usize) -> Result<()> {
    let k = h.k();
    if k > 3 {
        return Err(PrismError::OracleDimension(k));
    }
    if prior.k() != k {
        return Err(PrismError::DimensionMismatch {
            what: "prior components",
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
    if n == 0 {
        return Err(PrismError::InvalidParameter("grid resolution must be positive".into()));
    }
    Ok(())
}

fn prepare(
    y: &DVector<f64>,
    h: &MixingMatrix,
    prior: &DirichletParams,
    noise: NoiseModel,
    n: usize,
) -> Result<(Vec<Node>, Vec<f64>, f64)> {
    check(h, prior, y, n)?;
    let nodes = grid(prior, n)?;
    let logs = log_integrand(&nodes, y, h, noise);
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(PrismError::DegenerateWeights {
            finite: 0,
            total: logs.len(),
            max_log_weight: max,
        });
    }
    Ok((nodes, logs, max))
}

/// Posterior moments by grid quadrature of `z p(y|z) p(z)` and
/// `z z^T p(y|z) p(z)`, normalized by the quadrature of the evidence.
///
/// `ess` is the number of grid nodes with positive prior mass.
pub fn brute_force_posterior(
    y: &DVector<f64>,
    h: &MixingMatrix,
    prior: &DirichletParams,
    noise: NoiseModel,
    grid_resolution: usize,
) -> Result<PosteriorEstimate> {
    let (nodes, logs, max) = prepare(y, h, prior, noise, grid_resolution)?;
    let k = h.k();
    let mut total = 0.0;
    let mut z_acc = DVector::zeros(k);
    let mut zz_acc = DMatrix::zeros(k, k);
    for (node, &l) in nodes.iter().zip(&logs) {
        let w = (l - max).exp();
        if w == 0.0 {
            continue;
        }
        total += w;
        z_acc += &node.z * w;
        zz_acc += &node.z * node.z.transpose() * w;
    }
    Ok(PosteriorEstimate {
        z_mean: z_acc / total,
        zz_mean: zz_acc / total,
        ess: nodes.len() as f64,
        sample_count: nodes.len(),
    })
}

/// `log p(y) = log of the integral of p(y|z) p(z)` by the same quadrature.
pub fn brute_force_log_evidence(
    y: &DVector<f64>,
    h: &MixingMatrix,
    prior: &DirichletParams,
    noise: NoiseModel,
    grid_resolution: usize,
) -> Result<f64> {
    let (_, logs, max) = prepare(y, h, prior, noise, grid_resolution)?;
    Ok(max + logs.iter().map(|&l| (l - max).exp()).sum::<f64>().ln())
}
