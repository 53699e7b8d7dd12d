//! Symmetric eigendecomposition via cyclic Jacobi rotations, and the PSD
//! square root built on top of it.
//!
//! Jacobi is chosen over QR for simplicity and accuracy: every matrix in
//! this laboratory has dimension at most 128, where the O(n³)-per-sweep
//! cost is irrelevant and the orthogonality of the accumulated rotations
//! is excellent.

use super::Mat;
use crate::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-10;
const OFFDIAG_RTOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 64;

fn check_symmetric(a: &Mat) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let scale = a.max_abs().max(1e-300);
    let mut worst = 0.0f64;
    for i in 0..a.rows() {
        for j in (i + 1)..a.cols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_RTOL * scale {
        return Err(Error::NotSymmetric {
            max_asymmetry: worst / scale,
        });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix: `A = V · diag(λ) · Vᵀ`.
///
/// Returns eigenvalues in descending order with the matching orthonormal
/// eigenvectors as the columns of `V`. Converges when every off-diagonal
/// entry falls below `1e-12 · ‖A‖_F`.
pub fn sym_eig(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut m = a.symmetrize();
    let mut v = Mat::identity(n);
    let tol = OFFDIAG_RTOL * a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_SWEEPS {
        let mut offdiag = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                offdiag = offdiag.max(m[(p, q)].abs());
            }
        }
        if offdiag <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol {
                    continue;
                }
                // Rotation angle that annihilates m[p][q].
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    Ok((eigenvalues, vectors))
}

/// Symmetric PSD square root: `S·S = A`.
///
/// Eigenvalues in `[-1e-10, 0]` are treated as rounding noise and clamped
/// to zero; anything more negative is a hard error.
pub fn psd_sqrt(a: &Mat) -> Result<Mat> {
    let (mut eigenvalues, v) = sym_eig(a)?;
    for lambda in eigenvalues.iter_mut() {
        if *lambda < -1e-10 {
            return Err(Error::NotPsd {
                min_eigenvalue: *lambda,
            });
        }
        if *lambda < 0.0 {
            *lambda = 0.0;
        }
    }
    let sqrt_vals: Vec<f64> = eigenvalues.iter().map(|l| l.sqrt()).collect();
    Ok(reassemble(&v, &sqrt_vals))
}

/// Nearest-PSD projection: clamps all negative eigenvalues to zero.
/// Used when perturbing covariance factors, where real negativity is
/// expected rather than a bug.
pub fn psd_project(a: &Mat) -> Result<Mat> {
    let (eigenvalues, v) = sym_eig(a)?;
    let clamped: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0)).collect();
    Ok(reassemble(&v, &clamped))
}

/// V · diag(vals) · Vᵀ, symmetrized.
fn reassemble(v: &Mat, vals: &[f64]) -> Mat {
    let n = v.rows();
    let mut scaled = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] = v[(i, j)] * vals[j];
        }
    }
    scaled.matmul(&v.transpose()).symmetrize()
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_sym(a: &Mat) -> Result<f64> {
    let (eigenvalues, _) = sym_eig(a)?;
    Ok(eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())))
}
