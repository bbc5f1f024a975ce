//! Symmetric eigendecomposition by cyclic Jacobi rotations and the PSD
//! square root built on top of it. Deterministic and accurate at desk scale.

use super::{KernelError, Mat};

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues with the
/// matching orthonormal eigenvector columns, `M = Q diag(lambda) Q^T`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Rebuild `Q f(diag) Q^T` with `f` applied to each eigenvalue.
    pub fn assemble(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.eigenvalues.len();
        let mut out = Mat::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            out.add_scaled_outer(f(lam), &self.eigenvectors.col(k));
        }
        out.symmetrized()
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input must be symmetric within `1e-10 * ||M||_F`; it is symmetrized
/// before factoring so roundoff-level asymmetry never leaks into the result.
pub fn sym_eig(m: &Mat) -> Result<SymEig, KernelError> {
    if !m.is_square() {
        return Err(KernelError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let scale = m.frobenius_norm();
    let defect = m.asymmetry();
    let allowed = 1e-10 * scale;
    if defect > allowed {
        return Err(KernelError::AsymmetricInput { defect, allowed });
    }

    let n = m.rows();
    let mut a = m.symmetrized();
    let mut q = Mat::identity(n);

    let mut converged = off_diagonal_norm(&a) <= f64::EPSILON * scale;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = a[(p, r)];
                // Skip rotations that cannot change the matrix at working
                // precision.
                if apq.abs() <= 0.5 * f64::EPSILON * (a[(p, p)].abs() + a[(r, r)].abs()) {
                    continue;
                }
                let (c, s) = jacobi_rotation(a[(p, p)], a[(r, r)], apq);
                apply_two_sided(&mut a, p, r, c, s);
                apply_column_rotation(&mut q, p, r, c, s);
            }
        }
        converged = off_diagonal_norm(&a) <= f64::EPSILON * scale;
    }
    if !converged && off_diagonal_norm(&a) > 1e-12 * scale {
        return Err(KernelError::ConvergenceFailure {
            algorithm: "jacobi eigendecomposition",
            sweeps: MAX_SWEEPS,
        });
    }

    // Sort ascending; ties keep original order so the output is deterministic.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, new_col)] = q[(i, old_col)];
        }
    }

    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Symmetric square root of a PSD matrix: returns symmetric `R` with
/// `R R = M`. Eigenvalues in `[-clip, 0]` with `clip = 1e-12 * lambda_max`
/// are treated as roundoff and clipped to zero; anything below is an error.
pub fn sqrt_psd(m: &Mat) -> Result<Mat, KernelError> {
    let eig = sym_eig(m)?;
    let lam_max = eig.max();
    let clip = if lam_max > 0.0 { 1e-12 * lam_max } else { 1e-12 };
    if eig.min() < -clip {
        return Err(KernelError::NotPsd {
            eigenvalue: eig.min(),
            clip,
        });
    }
    Ok(eig.assemble(|lam| lam.max(0.0).sqrt()))
}

fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for p in 0..n {
        for r in (p + 1)..n {
            s += 2.0 * a[(p, r)] * a[(p, r)];
        }
    }
    s.sqrt()
}

/// Rotation (c, s) zeroing the (p,q) entry of the 2x2 block
/// [[app, apq], [apq, aqq]].
fn jacobi_rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64) {
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() < 1e150 {
        theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt())
    } else {
        // theta^2 would overflow; the series limit is fine here.
        0.5 / theta
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c)
}

/// A <- J^T A J for the plane rotation J in coordinates (p, q).
fn apply_two_sided(a: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
}

fn apply_column_rotation(q_mat: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..q_mat.rows() {
        let qkp = q_mat[(k, p)];
        let qkq = q_mat[(k, q)];
        q_mat[(k, p)] = c * qkp - s * qkq;
        q_mat[(k, q)] = s * qkp + c * qkq;
    }
}
