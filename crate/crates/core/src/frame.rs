//! Frames, K-operators, and the operators they induce: analysis, synthesis,
//! frame, and Gram. Includes optimal K-frame bound computation and the
//! Parseval K-frame test `S = K K^T`.

use crate::matrix::{self, KernelError, Mat};
use thiserror::Error;

/// Shared numerical-rank threshold, relative to the largest eigenvalue or
/// singular value.
pub const RANK_RTOL: f64 = 1e-10;

/// Default tolerance for Parseval checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame vectors live in R^{expected}, operator acts on R^{got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("K operator must be square, got {rows}x{cols}")]
    NonSquareOperator { rows: usize, cols: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// An ordered list of `count` vectors in R^`dim`, the columns of the
/// synthesis matrix. Zero columns are allowed; they contribute nothing.
#[derive(Debug, Clone)]
pub struct Frame {
    synthesis: Mat,
}

impl Frame {
    pub fn new(synthesis: Mat) -> Self {
        Frame { synthesis }
    }

    /// Build from the list of frame vectors.
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self, KernelError> {
        Ok(Frame {
            synthesis: Mat::from_cols(vectors)?,
        })
    }

    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.synthesis.rows()
    }

    /// Number of frame vectors m.
    pub fn count(&self) -> usize {
        self.synthesis.cols()
    }

    pub fn synthesis(&self) -> &Mat {
        &self.synthesis
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.synthesis.col(j)
    }

    /// The frame with columns `c_j f_j`.
    pub fn scaled(&self, weights: &[f64]) -> Frame {
        assert_eq!(weights.len(), self.count(), "scaling length mismatch");
        let mut m = self.synthesis.clone();
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                m[(i, j)] *= weights[j];
            }
        }
        Frame { synthesis: m }
    }

    /// The frame with columns `U f_j`.
    pub fn transformed(&self, u: &Mat) -> Frame {
        Frame {
            synthesis: u.matmul(&self.synthesis),
        }
    }

    /// Frame operator `S = F F^T = sum_j f_j f_j^T`.
    pub fn frame_operator(&self) -> Mat {
        self.synthesis
            .matmul(&self.synthesis.transpose())
            .symmetrized()
    }
}

/// A bounded operator K on R^n with its cached Gram `K K^T` and numerical
/// rank.
#[derive(Debug, Clone)]
pub struct KOperator {
    k: Mat,
    kkstar: Mat,
    rank: usize,
}

impl KOperator {
    pub fn new(k: Mat) -> Result<Self, FrameError> {
        if !k.is_square() {
            return Err(FrameError::NonSquareOperator {
                rows: k.rows(),
                cols: k.cols(),
            });
        }
        let kkstar = k.matmul(&k.transpose()).symmetrized();
        let rank = matrix::numerical_rank(&k, RANK_RTOL)?;
        Ok(KOperator { k, kkstar, rank })
    }

    pub fn identity(n: usize) -> Self {
        KOperator {
            k: Mat::identity(n),
            kkstar: Mat::identity(n),
            rank: n,
        }
    }

    pub fn dim(&self) -> usize {
        self.k.rows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.k
    }

    pub fn kkstar(&self) -> &Mat {
        &self.kkstar
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    /// `K^T f` (the adjoint applied to f; real scalars throughout).
    pub fn adjoint_apply(&self, f: &[f64]) -> Vec<f64> {
        self.k.transpose_matvec(f)
    }

    /// `K^N` as a fresh operator (N >= 1).
    pub fn power(&self, n_pow: u32) -> Result<Self, FrameError> {
        assert!(n_pow >= 1);
        let mut acc = self.k.clone();
        for _ in 1..n_pow {
            acc = acc.matmul(&self.k);
        }
        KOperator::new(acc)
    }

    /// `L K` for a left factor L.
    pub fn left_compose(&self, l: &Mat) -> Result<Self, FrameError> {
        KOperator::new(l.matmul(&self.k))
    }
}

/// Analysis, frame, and Gram operators of a frame.
#[derive(Debug, Clone)]
pub struct FrameOps {
    /// m x n; row j is `f_j^T`.
    pub analysis: Mat,
    /// n x n frame operator `S = F F^T`.
    pub frame_op: Mat,
    /// m x m Gram matrix `F^T F`.
    pub gram: Mat,
}

pub fn build_ops(frame: &Frame) -> FrameOps {
    let f = frame.synthesis();
    let analysis = f.transpose();
    FrameOps {
        frame_op: frame.frame_operator(),
        gram: analysis.matmul(f).symmetrized(),
        analysis,
    }
}

/// Optimal K-frame bounds.
///
/// `upper` is the largest eigenvalue of S. `lower` is the constrained
/// infimum of `<Sf, f>` over `||K^T f|| = 1`, with a minimizing `witness`
/// attaining it. A zero K makes the lower bound vacuous: `degenerate_k` is
/// set and `lower` is the +inf sentinel.
#[derive(Debug, Clone)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
    pub is_k_frame: bool,
    pub degenerate_k: bool,
    pub witness: Option<Vec<f64>>,
}

/// Compute the optimal K-frame bounds of a frame.
///
/// The lower bound splits R^n into the range V and null space W of `K K^T`,
/// reduces S to the generalized Schur complement `S11 - S12 S22^+ S21` on V
/// (minimizing over the free null-space component), and whitens by the
/// restriction of `K K^T` to V; the smallest eigenvalue of the whitened
/// matrix is the infimum.
pub fn kframe_bounds(frame: &Frame, k: &KOperator) -> Result<FrameBounds, FrameError> {
    let n = frame.dim();
    if k.dim() != n {
        return Err(FrameError::DimensionMismatch {
            expected: n,
            got: k.dim(),
        });
    }
    let s = frame.frame_operator();
    let s_eig = matrix::sym_eig(&s)?;
    let upper = s_eig.max().max(0.0);

    if k.is_zero() {
        return Ok(FrameBounds {
            lower: f64::INFINITY,
            upper,
            is_k_frame: true,
            degenerate_k: true,
            witness: None,
        });
    }

    let kk_eig = matrix::sym_eig(k.kkstar())?;
    let kk_max = kk_eig.max();
    let cut = RANK_RTOL * kk_max;
    let range_cols: Vec<usize> = (0..n).filter(|&i| kk_eig.eigenvalues[i] > cut).collect();
    let null_cols: Vec<usize> = (0..n).filter(|&i| kk_eig.eigenvalues[i] <= cut).collect();
    let r = range_cols.len();

    // Basis [V | W]: range eigenvectors first.
    let mut basis = Mat::zeros(n, n);
    for (new_col, &old_col) in range_cols.iter().chain(null_cols.iter()).enumerate() {
        for i in 0..n {
            basis[(i, new_col)] = kk_eig.eigenvectors[(i, old_col)];
        }
    }
    let s_hat = basis.transpose().matmul(&s).matmul(&basis).symmetrized();

    let block = |rows: &[usize], cols: &[usize]| -> Mat {
        let mut b = Mat::zeros(rows.len().max(1), cols.len().max(1));
        for (bi, &i) in rows.iter().enumerate() {
            for (bj, &j) in cols.iter().enumerate() {
                b[(bi, bj)] = s_hat[(i, j)];
            }
        }
        b
    };
    let v_idx: Vec<usize> = (0..r).collect();
    let w_idx: Vec<usize> = (r..n).collect();

    let schur = if w_idx.is_empty() {
        block(&v_idx, &v_idx)
    } else {
        let s11 = block(&v_idx, &v_idx);
        let s12 = block(&v_idx, &w_idx);
        let s22 = block(&w_idx, &w_idx);
        let s22_pinv = matrix::pinv(&s22, RANK_RTOL)?;
        s11.sub(&s12.matmul(&s22_pinv).matmul(&s12.transpose()))
            .symmetrized()
    };

    // Whiten by the positive part of K K^T on V.
    let inv_sqrt: Vec<f64> = range_cols
        .iter()
        .map(|&i| 1.0 / kk_eig.eigenvalues[i].sqrt())
        .collect();
    let mut whitened = schur.clone();
    for i in 0..r {
        for j in 0..r {
            whitened[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let w_eig = matrix::sym_eig(&whitened.symmetrized())?;
    let lower = w_eig.min().max(0.0);

    // Assemble the minimizing f: V-coordinates are the whitened minimizer,
    // W-coordinates the free component that the Schur complement eliminated.
    let v_coords: Vec<f64> = {
        let raw = w_eig.eigenvectors.col(0);
        raw.iter()
            .zip(&inv_sqrt)
            .map(|(x, isq)| x * isq)
            .collect()
    };
    let mut coords = vec![0.0; n];
    coords[..r].copy_from_slice(&v_coords);
    if !w_idx.is_empty() {
        let s12 = block(&v_idx, &w_idx);
        let s22 = block(&w_idx, &w_idx);
        let s22_pinv = matrix::pinv(&s22, RANK_RTOL)?;
        let w_coords = s22_pinv.matvec(&s12.transpose_matvec(&v_coords));
        for (k_off, wc) in w_coords.iter().enumerate() {
            coords[r + k_off] = -wc;
        }
    }
    let witness = basis.matvec(&coords);

    let threshold = if kk_max > 0.0 {
        RANK_RTOL * upper / kk_max
    } else {
        0.0
    };
    Ok(FrameBounds {
        lower,
        upper,
        is_k_frame: lower > threshold,
        degenerate_k: false,
        witness: Some(witness),
    })
}

/// Outcome of the Parseval K-frame test `||S - K K^T||_F <= tol (1 + ||K
/// K^T||_F)`.
#[derive(Debug, Clone)]
pub struct ParsevalReport {
    pub passes: bool,
    pub defect: f64,
    pub threshold: f64,
}

/// Test whether the frame is a Parseval K-frame. The quadratic-form identity
/// over all f is equivalent to the single matrix equality `S = K K^T`.
pub fn parseval_k_check(frame: &Frame, k: &KOperator, tol: f64) -> ParsevalReport {
    assert!(tol > 0.0, "tolerance must be positive");
    let s = frame.frame_operator();
    let defect = s.sub(k.kkstar()).frobenius_norm();
    let threshold = tol * (1.0 + k.kkstar().frobenius_norm());
    ParsevalReport {
        passes: defect <= threshold,
        defect,
        threshold,
    }
}

/// The canonical operator `K = S^{1/2}` making the frame a Parseval K-frame.
pub fn canonical_k(frame: &Frame) -> Result<KOperator, FrameError> {
    let root = matrix::sqrt_psd(&frame.frame_operator())?;
    KOperator::new(root)
}

/// `sum_j <f, f_j>^2`, the analysis-coefficient energy of f.
pub fn coefficient_energy(frame: &Frame, f: &[f64]) -> f64 {
    (0..frame.count())
        .map(|j| {
            let c = matrix::dot(&frame.vector(j), f);
            c * c
        })
        .sum()
}

/// `||K^T f||^2`.
pub fn adjoint_energy(k: &KOperator, f: &[f64]) -> f64 {
    let kf = k.adjoint_apply(f);
    matrix::dot(&kf, &kf)
}
