//! Piecewise scalings: weight pairs `(a_j, b_j)` split across an orthogonal
//! projection P and its complement, turning a frame into a Parseval K-frame
//! through `a_j P f_j + b_j (I-P) f_j`.

use crate::frame::{parseval_k_check, Frame, FrameError, KOperator, RANK_RTOL};
use crate::matrix::{self, KernelError, Mat};
use crate::scalability::{vech_outer, vech_sym};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PiecewiseError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("projection is not symmetric idempotent: symmetry defect {sym:.3e}, idempotency defect {idem:.3e}")]
    NotProjection { sym: f64, idem: f64 },
    #[error("weights must be nonnegative, got {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("index set must be a proper nonempty subset of 0..{count}: {reason}")]
    BadIndexSet { count: usize, reason: String },
    #[error("no nonnegative scaling reaches the {piece} piece: best residual {residual:.3e}")]
    InfeasiblePiece { piece: &'static str, residual: f64 },
    #[error("precondition failed: {reason}")]
    PreconditionFailed { reason: String },
    #[error("U is not unitary: defect {defect:.3e}")]
    NotUnitary { defect: f64 },
    #[error("UP != QU: defect {defect:.3e}")]
    IntertwiningFailed { defect: f64 },
    #[error("UK != KU: defect {defect:.3e}")]
    NotCommuting { defect: f64 },
    #[error("input is not a piecewise Parseval K-frame: defect {defect:.3e}")]
    NotKps { defect: f64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// An orthogonal projection: symmetric and idempotent within
/// `1e-10 (1 + ||P||_F)`.
#[derive(Debug, Clone)]
pub struct Projection {
    p: Mat,
}

impl Projection {
    pub fn new(p: Mat) -> Result<Self, PiecewiseError> {
        if !p.is_square() {
            return Err(PiecewiseError::DimensionMismatch {
                context: format!("projection must be square, got {}x{}", p.rows(), p.cols()),
            });
        }
        let scale = 1.0 + p.frobenius_norm();
        let sym = p.asymmetry();
        let idem = p.matmul(&p).sub(&p).frobenius_norm();
        if sym > 1e-10 * scale || idem > 1e-10 * scale {
            return Err(PiecewiseError::NotProjection { sym, idem });
        }
        Ok(Projection { p })
    }

    pub fn identity(n: usize) -> Self {
        Projection {
            p: Mat::identity(n),
        }
    }

    /// Projection onto the span of the given coordinates.
    pub fn coordinate(n: usize, coords: &[usize]) -> Self {
        let mut p = Mat::zeros(n, n);
        for &i in coords {
            p[(i, i)] = 1.0;
        }
        Projection { p }
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.p
    }

    /// `I - P`, the projection onto the orthogonal complement.
    pub fn complement(&self) -> Mat {
        Mat::identity(self.dim()).sub(&self.p)
    }
}

/// Weight pairs over a projection: column j of the combined frame is
/// `a_j P f_j + b_j (I-P) f_j`.
#[derive(Debug, Clone)]
pub struct PiecewiseScaling {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub projection: Projection,
}

impl PiecewiseScaling {
    pub fn new(a: Vec<f64>, b: Vec<f64>, projection: Projection) -> Result<Self, PiecewiseError> {
        if a.len() != b.len() {
            return Err(PiecewiseError::DimensionMismatch {
                context: format!("weight arrays differ in length: {} vs {}", a.len(), b.len()),
            });
        }
        for (index, &value) in a.iter().chain(b.iter()).enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(PiecewiseError::NegativeWeight {
                    index: index % a.len(),
                    value,
                });
            }
        }
        Ok(PiecewiseScaling { a, b, projection })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Diagnostics of a piecewise Parseval check. `is_kps` is the Parseval test
/// on the combined frame; the piece defects compare each compressed frame
/// operator with the matching compression of `K K^T`; the cross defects
/// measure the mixed term `T1^T D1 D2 T2` (its symmetric part is what the
/// quadratic form sees, the full norm is also reported).
#[derive(Debug, Clone)]
pub struct PiecewiseCheckReport {
    pub is_kps: bool,
    pub parseval_defect: f64,
    pub piece_x_defect: f64,
    pub piece_y_defect: f64,
    pub cross_sym_defect: f64,
    pub cross_full_defect: f64,
    /// `||P K - K P||_F`; the piece/cross decomposition characterizes
    /// `is_kps` only when this is negligible.
    pub commute_defect: f64,
    pub pk_commutes: bool,
}

impl PiecewiseCheckReport {
    /// Right-hand side of the equivalence: both pieces and the symmetric
    /// cross term within `tol`.
    pub fn pieces_and_cross_pass(&self, tol: f64) -> bool {
        self.piece_x_defect <= tol && self.piece_y_defect <= tol && self.cross_sym_defect <= tol
    }
}

/// The combined frame with columns `a_j P f_j + b_j (I-P) f_j`.
pub fn apply_piecewise(frame: &Frame, pw: &PiecewiseScaling) -> Result<Frame, PiecewiseError> {
    check_lengths(frame, pw)?;
    let p = pw.projection.matrix();
    let q = pw.projection.complement();
    let mut out = Mat::zeros(frame.dim(), frame.count());
    for j in 0..frame.count() {
        let fj = frame.vector(j);
        let xj = p.matvec(&fj);
        let yj = q.matvec(&fj);
        for i in 0..frame.dim() {
            out[(i, j)] = pw.a[j] * xj[i] + pw.b[j] * yj[i];
        }
    }
    Ok(Frame::new(out))
}

/// Full piecewise diagnostic: Parseval test of the combined frame, per-piece
/// compressed defects, and both cross-term defects.
pub fn check_piecewise(
    frame: &Frame,
    k: &KOperator,
    pw: &PiecewiseScaling,
    tol: f64,
) -> Result<PiecewiseCheckReport, PiecewiseError> {
    check_lengths(frame, pw)?;
    check_k_dim(frame, k)?;
    let n = frame.dim();
    let p = pw.projection.matrix();
    let q = pw.projection.complement();

    let combined = apply_piecewise(frame, pw)?;
    let parseval = parseval_k_check(&combined, k, tol);

    let kk = k.kkstar();
    let kk_x = p.matmul(kk).matmul(p).symmetrized();
    let kk_y = q.matmul(kk).matmul(&q).symmetrized();

    let mut sum_x = Mat::zeros(n, n);
    let mut sum_y = Mat::zeros(n, n);
    let mut cross = Mat::zeros(n, n);
    for j in 0..frame.count() {
        let fj = frame.vector(j);
        let xj = p.matvec(&fj);
        let yj = q.matvec(&fj);
        sum_x.add_scaled_outer(pw.a[j] * pw.a[j], &xj);
        sum_y.add_scaled_outer(pw.b[j] * pw.b[j], &yj);
        let w = pw.a[j] * pw.b[j];
        if w != 0.0 {
            for r in 0..n {
                for c in 0..n {
                    cross[(r, c)] += w * xj[r] * yj[c];
                }
            }
        }
    }

    let piece_x_defect = sum_x.sub(&kk_x).frobenius_norm();
    let piece_y_defect = sum_y.sub(&kk_y).frobenius_norm();
    let cross_sym_defect = cross
        .add(&cross.transpose())
        .scale(0.5)
        .frobenius_norm();
    let cross_full_defect = cross.frobenius_norm();

    let commute_defect = p
        .matmul(k.matrix())
        .sub(&k.matrix().matmul(p))
        .frobenius_norm();
    let pk_commutes =
        commute_defect <= tol * (1.0 + k.matrix().frobenius_norm());

    Ok(PiecewiseCheckReport {
        is_kps: parseval.passes,
        parseval_defect: parseval.defect,
        piece_x_defect,
        piece_y_defect,
        cross_sym_defect,
        cross_full_defect,
        commute_defect,
        pk_commutes,
    })
}

/// Build a disjoint-support piecewise scaling from an index set I: solve the
/// X piece on `{P f_j}, j in I` and the Y piece on `{(I-P) f_j}, j not in I`,
/// then pad both weight vectors with zeros off their pieces.
pub fn build_disjoint_piecewise(
    frame: &Frame,
    k: &KOperator,
    p: &Projection,
    i_set: &[usize],
    tol: f64,
) -> Result<PiecewiseScaling, PiecewiseError> {
    let m = frame.count();
    check_k_dim(frame, k)?;
    if p.dim() != frame.dim() {
        return Err(PiecewiseError::DimensionMismatch {
            context: format!(
                "projection acts on R^{}, frame lives in R^{}",
                p.dim(),
                frame.dim()
            ),
        });
    }
    let mut in_set = vec![false; m];
    for &j in i_set {
        if j >= m {
            return Err(PiecewiseError::BadIndexSet {
                count: m,
                reason: format!("index {j} out of range"),
            });
        }
        if in_set[j] {
            return Err(PiecewiseError::BadIndexSet {
                count: m,
                reason: format!("index {j} repeated"),
            });
        }
        in_set[j] = true;
    }
    let size = i_set.len();
    if size == 0 || size == m {
        return Err(PiecewiseError::BadIndexSet {
            count: m,
            reason: "subset must be nonempty and proper".to_string(),
        });
    }

    let kk = k.kkstar();
    let q = p.complement();
    let kk_x = p.matrix().matmul(kk).matmul(p.matrix()).symmetrized();
    let kk_y = q.matmul(kk).matmul(&q).symmetrized();

    let solve_piece = |proj: &Mat,
                       target: &Mat,
                       members: &dyn Fn(usize) -> bool,
                       piece: &'static str|
     -> Result<Vec<f64>, PiecewiseError> {
        let idx: Vec<usize> = (0..m).filter(|&j| members(j)).collect();
        let cols: Vec<Vec<f64>> = idx
            .iter()
            .map(|&j| vech_outer(&proj.matvec(&frame.vector(j))))
            .collect();
        let a_mat = Mat::from_cols(&cols)?;
        let b_vec = vech_sym(target);
        let sol = matrix::nnls(&a_mat, &b_vec)?;
        if sol.residual > tol * (1.0 + target.frobenius_norm()) {
            return Err(PiecewiseError::InfeasiblePiece {
                piece,
                residual: sol.residual,
            });
        }
        let mut full = vec![0.0; m];
        for (k_idx, &j) in idx.iter().enumerate() {
            full[j] = sol.weights[k_idx].sqrt();
        }
        Ok(full)
    };

    let a = solve_piece(p.matrix(), &kk_x, &|j| in_set[j], "X")?;
    let b = solve_piece(&q, &kk_y, &|j| !in_set[j], "Y")?;
    PiecewiseScaling::new(a, b, p.clone())
}

/// Outcome of the restriction check: does the projected frame `{P f_j}`
/// reproduce `K K^T` on X, and does the range of `K^T` sit inside the range
/// of P.
#[derive(Debug, Clone)]
pub struct RestrictReport {
    pub holds_on_x: bool,
    /// `||P (S_P - K K^T) P||_F` where `S_P` is the frame operator of
    /// `{P f_j}`.
    pub compressed_defect: f64,
    pub range_included: bool,
    /// Largest `||(I-P) u||` over an orthonormal basis u of range(K^T);
    /// the sine of the largest principal angle out of range(P).
    pub range_defect: f64,
}

/// Check that projecting a Parseval K-frame yields a Parseval K-frame on
/// X = range(P). Preconditions (full Parseval identity and `PK = KP`) are
/// enforced; the range inclusion `ran(K^T) <= ran(P)` is only reported since
/// commutation alone does not establish it.
pub fn restricted_parseval_check(
    frame: &Frame,
    k: &KOperator,
    p: &Projection,
    tol: f64,
) -> Result<RestrictReport, PiecewiseError> {
    check_k_dim(frame, k)?;
    if p.dim() != frame.dim() {
        return Err(PiecewiseError::DimensionMismatch {
            context: "projection dimension".to_string(),
        });
    }
    let parseval = parseval_k_check(frame, k, tol);
    if !parseval.passes {
        return Err(PiecewiseError::PreconditionFailed {
            reason: format!(
                "frame is not a Parseval K-frame: defect {:.3e}",
                parseval.defect
            ),
        });
    }
    let commute = p
        .matrix()
        .matmul(k.matrix())
        .sub(&k.matrix().matmul(p.matrix()))
        .frobenius_norm();
    if commute > tol * (1.0 + k.matrix().frobenius_norm()) {
        return Err(PiecewiseError::PreconditionFailed {
            reason: format!("PK != KP: defect {commute:.3e}"),
        });
    }

    let projected = frame.transformed(p.matrix());
    let s_p = projected.frame_operator();
    let diff = s_p.sub(k.kkstar());
    let compressed_defect = p
        .matrix()
        .matmul(&diff)
        .matmul(p.matrix())
        .frobenius_norm();
    let holds_on_x = compressed_defect <= tol * (1.0 + k.kkstar().frobenius_norm());

    // Principal angles between range(K^T) and range(P): range(K^T) is
    // spanned by the leading left singular vectors of K^T.
    let kt_svd = matrix::svd(&k.matrix().transpose())?;
    let cut = RANK_RTOL * kt_svd.sigma_max();
    let mut range_defect = 0.0f64;
    let complement = p.complement();
    for (j, &s) in kt_svd.singular_values.iter().enumerate() {
        if s <= cut || s == 0.0 {
            continue;
        }
        let u = kt_svd.u.col(j);
        let out = matrix::norm(&complement.matvec(&u));
        range_defect = range_defect.max(out);
    }
    let range_included = range_defect <= tol.sqrt().max(1e-8);

    Ok(RestrictReport {
        holds_on_x,
        compressed_defect,
        range_included,
        range_defect,
    })
}

/// Transport a piecewise scaling along a unitary U with `UP = QU` and
/// `UK = KU`: the same weight pairs work for the frame `{U f_j}` with the
/// projection Q.
pub fn transport_piecewise(
    frame: &Frame,
    k: &KOperator,
    pw: &PiecewiseScaling,
    u: &Mat,
    q: &Projection,
    tol: f64,
) -> Result<PiecewiseScaling, PiecewiseError> {
    check_lengths(frame, pw)?;
    check_k_dim(frame, k)?;
    let n = frame.dim();
    if u.rows() != n || u.cols() != n || q.dim() != n {
        return Err(PiecewiseError::DimensionMismatch {
            context: "transport operator dimensions".to_string(),
        });
    }
    let unitary_defect = u
        .transpose()
        .matmul(u)
        .sub(&Mat::identity(n))
        .frobenius_norm();
    if unitary_defect > tol * (1.0 + u.frobenius_norm()) {
        return Err(PiecewiseError::NotUnitary {
            defect: unitary_defect,
        });
    }
    let intertwine_defect = u
        .matmul(pw.projection.matrix())
        .sub(&q.matrix().matmul(u))
        .frobenius_norm();
    if intertwine_defect > tol * (1.0 + u.frobenius_norm()) {
        return Err(PiecewiseError::IntertwiningFailed {
            defect: intertwine_defect,
        });
    }
    let commute_defect = u
        .matmul(k.matrix())
        .sub(&k.matrix().matmul(u))
        .frobenius_norm();
    if commute_defect > tol * (1.0 + u.frobenius_norm() * k.matrix().frobenius_norm()) {
        return Err(PiecewiseError::NotCommuting {
            defect: commute_defect,
        });
    }
    let report = check_piecewise(frame, k, pw, tol)?;
    if !report.is_kps {
        return Err(PiecewiseError::NotKps {
            defect: report.parseval_defect,
        });
    }
    PiecewiseScaling::new(pw.a.clone(), pw.b.clone(), q.clone())
}

fn check_lengths(frame: &Frame, pw: &PiecewiseScaling) -> Result<(), PiecewiseError> {
    if pw.len() != frame.count() {
        return Err(PiecewiseError::DimensionMismatch {
            context: format!(
                "{} weight pairs for {} frame vectors",
                pw.len(),
                frame.count()
            ),
        });
    }
    if pw.projection.dim() != frame.dim() {
        return Err(PiecewiseError::DimensionMismatch {
            context: format!(
                "projection acts on R^{}, frame lives in R^{}",
                pw.projection.dim(),
                frame.dim()
            ),
        });
    }
    Ok(())
}

fn check_k_dim(frame: &Frame, k: &KOperator) -> Result<(), PiecewiseError> {
    if k.dim() != frame.dim() {
        return Err(PiecewiseError::DimensionMismatch {
            context: format!(
                "operator acts on R^{}, frame lives in R^{}",
                k.dim(),
                frame.dim()
            ),
        });
    }
    Ok(())
}
