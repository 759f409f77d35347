//! The individual terms of the training objective.
//!
//! Patches are rows. The self-representation matrix `Θs` is `n × n` and its
//! column `i` holds the weights that rebuild patch `i`, so the rebuilt latent
//! matrix is `Θsᵀ·Z`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `n × (n−1)` matrix with column `j = e_{j+1} − e_j`, so column `j` of
/// `Θs·R` is `θ_{j+1} − θ_j`.
pub fn difference_matrix(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::TooFewPatches {
            required: 2,
            found: n,
        });
    }
    let mut r = Matrix::zeros(n, n - 1);
    for j in 0..n - 1 {
        r.set(j, j, -1.0);
        r.set(j + 1, j, 1.0);
    }
    Ok(r)
}

/// `Θs·R` computed directly as consecutive column differences.
pub fn column_differences(theta: &Matrix) -> Matrix {
    let n = theta.cols();
    Matrix::from_fn(theta.rows(), n.saturating_sub(1), |i, j| {
        theta.get(i, j + 1) - theta.get(i, j)
    })
}

/// `½‖P − P̂‖_F²`.
pub fn reconstruction_loss(p: &Matrix, p_hat: &Matrix) -> Result<f64> {
    p.check_same_shape(p_hat, "reconstruction_loss")?;
    Ok(0.5 * p.sub(p_hat)?.frobenius_sq())
}

/// `‖Z − Θsᵀ·Z‖_F²`, unweighted.
pub fn selfrep_residual_loss(z: &Matrix, theta: &Matrix) -> Result<f64> {
    let n = z.rows();
    if theta.rows() != n {
        return Err(Error::dims("selfrep_residual_loss", n, theta.rows()));
    }
    if theta.cols() != n {
        return Err(Error::dims("selfrep_residual_loss", n, theta.cols()));
    }
    let rebuilt = theta.t_matmul(z)?;
    Ok(z.sub(&rebuilt)?.frobenius_sq())
}

/// Smoothed `‖Θs‖₁`: `Σ sqrt(θ² + ε²) − ε`.
pub fn sparsity_penalty(theta: &Matrix, eps_norm: f64) -> f64 {
    theta
        .as_slice()
        .iter()
        .map(|&t| libm::sqrt(t * t + eps_norm * eps_norm) - eps_norm)
        .sum()
}

/// Smoothed `‖Θs·R‖_{1,2}`: per column `sqrt(‖·‖₂² + ε²) − ε`, summed.
pub fn smoothness_penalty(theta: &Matrix, r: &Matrix, eps_norm: f64) -> Result<f64> {
    let d = theta.matmul(r)?;
    Ok(group_norm(&d, eps_norm))
}

pub(crate) fn group_norm(d: &Matrix, eps_norm: f64) -> f64 {
    let mut col_sq = alloc::vec![0.0; d.cols()];
    for i in 0..d.rows() {
        for (acc, v) in col_sq.iter_mut().zip(d.row(i)) {
            *acc += v * v;
        }
    }
    col_sq
        .iter()
        .map(|s| libm::sqrt(s + eps_norm * eps_norm) - eps_norm)
        .sum()
}
