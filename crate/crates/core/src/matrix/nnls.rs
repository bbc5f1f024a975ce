//! Nonnegative least squares by the Lawson-Hanson active-set method.

use super::{lstsq_min_norm, norm, vec_sub, KernelError, Mat};

/// Result of a nonnegative least-squares solve: `weights >= 0` minimizing
/// `||A w - b||_2`.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub weights: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `min ||A w - b||_2` subject to `w >= 0`.
///
/// Outer iterations are capped at `3 * cols`; each outer iteration moves one
/// variable into the passive (positive) set, with inner steps restoring
/// feasibility. At the solution the KKT conditions hold: passive gradients
/// vanish and free gradients are nonnegative, both up to a dual tolerance
/// scaled by the problem data.
pub fn nnls(a: &Mat, b: &[f64]) -> Result<NnlsSolution, KernelError> {
    assert_eq!(a.rows(), b.len(), "nnls dimension mismatch");
    let n = a.cols();
    let cap = 3 * n;
    let dual_tol = 1e-12 * a.frobenius_norm() * norm(b);

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let mut outer = 0usize;

    loop {
        let residual_vec = vec_sub(b, &a.matvec(&x));
        let w = a.transpose_matvec(&residual_vec);

        // Columns rejected within this dual evaluation; retried only after x
        // changes and the duals are recomputed.
        let mut rejected = vec![false; n];
        let mut grew = false;
        while !grew {
            let mut best: Option<usize> = None;
            for j in 0..n {
                if passive[j] || rejected[j] || w[j] <= dual_tol {
                    continue;
                }
                if best.map_or(true, |bj| w[j] > w[bj]) {
                    best = Some(j);
                }
            }
            let Some(j) = best else {
                // KKT satisfied (or no admissible column): done.
                let r = vec_sub(b, &a.matvec(&x));
                return Ok(NnlsSolution {
                    weights: x,
                    residual: norm(&r),
                    iterations: outer,
                });
            };

            passive[j] = true;
            let idx = passive_indices(&passive);
            let z = solve_passive(a, b, &idx)?;
            let zj = z[idx.iter().position(|&i| i == j).unwrap()];
            if zj <= 0.0 {
                // Candidate is numerically dependent on the passive set; park
                // it for this round and try the next best dual.
                passive[j] = false;
                rejected[j] = true;
                continue;
            }

            restore_feasibility(a, b, &mut x, &mut passive, idx, z)?;
            grew = true;
        }

        outer += 1;
        if outer > cap {
            return Err(KernelError::IterationCapExceeded { cap });
        }
    }
}

fn passive_indices(passive: &[bool]) -> Vec<usize> {
    passive
        .iter()
        .enumerate()
        .filter_map(|(j, &p)| p.then_some(j))
        .collect()
}

fn solve_passive(a: &Mat, b: &[f64], idx: &[usize]) -> Result<Vec<f64>, KernelError> {
    let cols: Vec<Vec<f64>> = idx.iter().map(|&j| a.col(j)).collect();
    let sub = Mat::from_cols(&cols).expect("passive set is nonempty");
    lstsq_min_norm(&sub, b, 1e-12)
}

/// Move `x` toward the passive least-squares solution `z`, dropping
/// variables that hit zero, until the passive solution is feasible.
fn restore_feasibility(
    a: &Mat,
    b: &[f64],
    x: &mut [f64],
    passive: &mut [bool],
    mut idx: Vec<usize>,
    mut z: Vec<f64>,
) -> Result<(), KernelError> {
    loop {
        if z.iter().all(|&v| v > 0.0) {
            for (k, &j) in idx.iter().enumerate() {
                x[j] = z[k];
            }
            for (j, xv) in x.iter_mut().enumerate() {
                if !passive[j] {
                    *xv = 0.0;
                }
            }
            return Ok(());
        }

        // Interpolate to the first variable that reaches zero.
        let mut alpha = f64::INFINITY;
        let mut drop_k = 0;
        for (k, &j) in idx.iter().enumerate() {
            if z[k] <= 0.0 {
                let denom = x[j] - z[k];
                let t = if denom <= 0.0 { 0.0 } else { x[j] / denom };
                if t < alpha {
                    alpha = t;
                    drop_k = k;
                }
            }
        }
        for (k, &j) in idx.iter().enumerate() {
            x[j] += alpha * (z[k] - x[j]);
        }
        x[idx[drop_k]] = 0.0;
        passive[idx[drop_k]] = false;
        for (k, &j) in idx.iter().enumerate() {
            if k != drop_k && z[k] <= 0.0 && x[j] <= 0.0 {
                x[j] = 0.0;
                passive[j] = false;
            }
        }

        idx = passive_indices(passive);
        if idx.is_empty() {
            return Ok(());
        }
        z = solve_passive(a, b, &idx)?;
    }
}
