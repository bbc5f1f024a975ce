//! Singular value decomposition by one-sided Jacobi orthogonalization, plus
//! the pseudoinverse, operator norm, numerical rank, and a minimum-norm
//! least-squares solve built on it.

use super::{dot, norm, KernelError, Mat};

const MAX_SWEEPS: usize = 64;

/// Thin SVD `M = U diag(sigma) V^T` with `k = min(rows, cols)` columns and
/// singular values sorted descending. Columns of `U` paired with a zero
/// singular value are zero and carry no information.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub singular_values: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values[0]
    }

    pub fn rank(&self, rtol: f64) -> usize {
        let cut = rtol * self.sigma_max();
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

pub fn svd(m: &Mat) -> Result<Svd, KernelError> {
    // One-sided Jacobi wants at least as many rows as columns; transpose and
    // swap the factors otherwise.
    if m.rows() < m.cols() {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let rows = m.rows();
    let k = m.cols();
    let mut b: Vec<Vec<f64>> = (0..k).map(|j| m.col(j)).collect();
    let mut v = Mat::identity(k);

    let mut clean_sweep = false;
    for _ in 0..MAX_SWEEPS {
        if clean_sweep {
            break;
        }
        clean_sweep = true;
        for i in 0..k {
            for j in (i + 1)..k {
                let alpha = dot(&b[i], &b[i]);
                let beta = dot(&b[j], &b[j]);
                let gamma = dot(&b[i], &b[j]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                clean_sweep = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() < 1e150 {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                } else {
                    0.5 / zeta
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let bi = b[i][r];
                    let bj = b[j][r];
                    b[i][r] = c * bi - s * bj;
                    b[j][r] = s * bi + c * bj;
                }
                for r in 0..k {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
            }
        }
    }
    if !clean_sweep {
        return Err(KernelError::ConvergenceFailure {
            algorithm: "one-sided jacobi svd",
            sweeps: MAX_SWEEPS,
        });
    }

    let sigmas: Vec<f64> = b.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigmas[j].partial_cmp(&sigmas[i]).unwrap());

    let mut u = Mat::zeros(rows, k);
    let mut v_sorted = Mat::zeros(k, k);
    let mut singular_values = Vec::with_capacity(k);
    for (new_col, &old_col) in order.iter().enumerate() {
        let s = sigmas[old_col];
        singular_values.push(s);
        if s > 0.0 {
            for r in 0..rows {
                u[(r, new_col)] = b[old_col][r] / s;
            }
        }
        for r in 0..k {
            v_sorted[(r, new_col)] = v[(r, old_col)];
        }
    }

    Ok(Svd {
        u,
        singular_values,
        v: v_sorted,
    })
}

/// Largest singular value.
pub fn operator_norm(m: &Mat) -> Result<f64, KernelError> {
    Ok(svd(m)?.sigma_max())
}

/// Numerical rank at a relative singular-value threshold.
pub fn numerical_rank(m: &Mat, rtol: f64) -> Result<usize, KernelError> {
    Ok(svd(m)?.rank(rtol))
}

/// Moore-Penrose pseudoinverse; singular values at or below
/// `rtol * sigma_max` are treated as zero.
pub fn pinv(m: &Mat, rtol: f64) -> Result<Mat, KernelError> {
    let decomp = svd(m)?;
    let cut = rtol * decomp.sigma_max();
    let mut out = Mat::zeros(m.cols(), m.rows());
    for (j, &s) in decomp.singular_values.iter().enumerate() {
        if s <= cut || s == 0.0 {
            continue;
        }
        let vj = decomp.v.col(j);
        let uj = decomp.u.col(j);
        for r in 0..m.cols() {
            let f = vj[r] / s;
            if f == 0.0 {
                continue;
            }
            for c in 0..m.rows() {
                out[(r, c)] += f * uj[c];
            }
        }
    }
    Ok(out)
}

/// Minimum-norm least-squares solution of `min ||A x - b||_2`.
pub fn lstsq_min_norm(a: &Mat, b: &[f64], rtol: f64) -> Result<Vec<f64>, KernelError> {
    assert_eq!(a.rows(), b.len(), "lstsq dimension mismatch");
    let decomp = svd(a)?;
    let cut = rtol * decomp.sigma_max();
    let mut x = vec![0.0; a.cols()];
    for (j, &s) in decomp.singular_values.iter().enumerate() {
        if s <= cut || s == 0.0 {
            continue;
        }
        let coeff = dot(&decomp.u.col(j), b) / s;
        for (r, xr) in x.iter_mut().enumerate() {
            *xr += coeff * decomp.v[(r, j)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Mat::new(rows, cols, data).unwrap()
    }

    fn penrose_defects(m: &Mat, p: &Mat) -> [f64; 4] {
        let mpm = m.matmul(p).matmul(m);
        let pmp = p.matmul(m).matmul(p);
        let mp = m.matmul(p);
        let pm = p.matmul(m);
        [
            mpm.sub(m).frobenius_norm(),
            pmp.sub(p).frobenius_norm(),
            mp.sub(&mp.transpose()).frobenius_norm(),
            pm.sub(&pm.transpose()).frobenius_norm(),
        ]
    }

    #[test]
    fn operator_norm_examples() {
        // sigma_max of [[0,3],[0,0]] is sqrt(lambda_max(M^T M)) = sqrt(9) = 3.
        assert!((operator_norm(&Mat::diag(&[2.0, 1.0])).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(operator_norm(&Mat::zeros(2, 2)).unwrap(), 0.0);
        let m = Mat::from_rows(&[vec![0.0, 3.0], vec![0.0, 0.0]]).unwrap();
        assert!((operator_norm(&m).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pinv_diagonal_and_inverse() {
        let p = pinv(&Mat::diag(&[2.0, 0.0]), 1e-12).unwrap();
        assert!(p.sub(&Mat::diag(&[0.5, 0.0])).frobenius_norm() < 1e-14);

        let m = Mat::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let inv = pinv(&m, 1e-12).unwrap();
        let prod = m.matmul(&inv);
        assert!(prod.sub(&Mat::identity(2)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn pinv_rank_one() {
        // For the all-ones 2x2 matrix the pseudoinverse is ones/4; the four
        // Penrose identities pin it down.
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let p = pinv(&m, 1e-12).unwrap();
        assert!(p.sub(&m.scale(0.25)).frobenius_norm() < 1e-14);
        for d in penrose_defects(&m, &p) {
            assert!(d <= 1e-8 * (1.0 + m.frobenius_norm()));
        }
    }

    #[test]
    fn pinv_penrose_on_random_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let rows: usize = rng.gen_range(2..=7);
            let cols: usize = rng.gen_range(2..=7);
            let max_rank = rows.min(cols).saturating_sub(1).max(1);
            let rank = rng.gen_range(1..=max_rank);
            let left = random_mat(&mut rng, rows, rank);
            let right = random_mat(&mut rng, rank, cols);
            let m = left.matmul(&right);
            let p = pinv(&m, 1e-12).unwrap();
            let scale = 1.0 + m.frobenius_norm();
            for d in penrose_defects(&m, &p) {
                assert!(d <= 1e-8 * scale, "penrose defect {d} at scale {scale}");
            }
        }
    }

    #[test]
    fn svd_reconstructs_wide_and_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(rows, cols) in &[(5usize, 3usize), (3, 5), (4, 4), (1, 6), (6, 1)] {
            let m = random_mat(&mut rng, rows, cols);
            let d = svd(&m).unwrap();
            let k = rows.min(cols);
            let mut back = Mat::zeros(rows, cols);
            for j in 0..k {
                let uj = d.u.col(j);
                let vj = d.v.col(j);
                for r in 0..rows {
                    for c in 0..cols {
                        back[(r, c)] += d.singular_values[j] * uj[r] * vj[c];
                    }
                }
            }
            assert!(back.sub(&m).frobenius_norm() <= 1e-10 * (1.0 + m.frobenius_norm()));
            for w in d.singular_values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn lstsq_matches_exact_solution() {
        let a = Mat::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = lstsq_min_norm(&a, &[9.0, 8.0], 1e-12).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_detects_deficiency() {
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(numerical_rank(&m, 1e-10).unwrap(), 1);
        assert_eq!(numerical_rank(&Mat::identity(3), 1e-10).unwrap(), 3);
        assert_eq!(numerical_rank(&Mat::zeros(2, 2), 1e-10).unwrap(), 0);
    }
}
