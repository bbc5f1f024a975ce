//! Scalings that turn a frame into a Parseval K-frame, found by nonnegative
//! least squares on the half-vectorized frame-operator equation, plus the
//! operator transforms that carry scalings between frames.

use crate::frame::{parseval_k_check, Frame, FrameError, KOperator, ParsevalReport, RANK_RTOL};
use crate::matrix::{self, KernelError, Mat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScalabilityError {
    #[error("scaling has {got} weights for a frame of {expected} vectors")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operator is {rows}x{cols} but the frame lives in R^{dim}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("scaling weights must be nonnegative, got {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("input is not a K_s-frame: scaled Parseval defect {defect:.3e} exceeds {threshold:.3e}")]
    NotKsFrame { defect: f64, threshold: f64 },
    #[error("operators do not commute: ||TK - KT|| = {defect:.3e} exceeds {threshold:.3e}")]
    NotCommuting { defect: f64, threshold: f64 },
    #[error("T^* is not an isometry: ||T T^T - I|| = {defect:.3e} exceeds {threshold:.3e}")]
    NotCoisometry { defect: f64, threshold: f64 },
    #[error("T is numerically singular: condition number {cond:.3e}")]
    SingularT { cond: f64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Nonnegative weights `c_j`, one per frame vector. The Parseval identity
/// depends only on `c_j^2`, so nonnegativity fixes a canonical
/// representative.
#[derive(Debug, Clone)]
pub struct Scaling {
    weights: Vec<f64>,
}

impl Scaling {
    pub fn new(weights: Vec<f64>) -> Result<Self, ScalabilityError> {
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ScalabilityError::NegativeWeight { index, value });
            }
        }
        Ok(Scaling { weights })
    }

    pub fn ones(m: usize) -> Self {
        Scaling {
            weights: vec![1.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Outcome of a scaling solve: the recovered weights, the Frobenius defect
/// of `sum c_j^2 f_j f_j^T - K K^T`, and whether that defect is within
/// tolerance. `nonunique` flags a rank-deficient active set, meaning other
/// weight vectors reach the same defect.
#[derive(Debug, Clone)]
pub struct ScalingSolveResult {
    pub scaling: Scaling,
    pub residual: f64,
    pub feasible: bool,
    pub nonunique: bool,
    pub iterations: usize,
}

/// Half-vectorization of the outer product `v v^T`: stacked upper triangle
/// with off-diagonal entries scaled by sqrt(2), so the Euclidean norm equals
/// the Frobenius norm of the symmetric matrix.
pub(crate) fn vech_outer(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let root2 = 2.0f64.sqrt();
    for i in 0..n {
        for j in i..n {
            if i == j {
                out.push(v[i] * v[i]);
            } else {
                out.push(root2 * v[i] * v[j]);
            }
        }
    }
    out
}

/// Half-vectorization of a symmetric matrix with the same sqrt(2) weighting.
pub(crate) fn vech_sym(m: &Mat) -> Vec<f64> {
    let n = m.rows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let root2 = 2.0f64.sqrt();
    for i in 0..n {
        for j in i..n {
            if i == j {
                out.push(m[(i, i)]);
            } else {
                out.push(root2 * 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
    }
    out
}

/// Find nonnegative weights making `{c_j f_j}` a Parseval K-frame.
///
/// The matrix equation `sum_j c_j^2 f_j f_j^T = K K^T` is linear in
/// `w_j = c_j^2`; half-vectorization turns it into an ordinary nonnegative
/// least-squares problem whose residual is exactly the Frobenius defect.
pub fn solve_scaling(
    frame: &Frame,
    k: &KOperator,
    tol: f64,
) -> Result<ScalingSolveResult, ScalabilityError> {
    check_operator_dim(frame, k.matrix())?;
    assert!(tol > 0.0, "tolerance must be positive");

    let cols: Vec<Vec<f64>> = (0..frame.count())
        .map(|j| vech_outer(&frame.vector(j)))
        .collect();
    let a = Mat::from_cols(&cols)?;
    let b = vech_sym(k.kkstar());
    let sol = matrix::nnls(&a, &b)?;

    let weights: Vec<f64> = sol.weights.iter().map(|&w| w.sqrt()).collect();
    let feasible = sol.residual <= tol * (1.0 + k.kkstar().frobenius_norm());

    // Rank-deficiency of the active columns means the attained defect does
    // not pin the weights down.
    let active: Vec<Vec<f64>> = sol
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(j, _)| cols[j].clone())
        .collect();
    let nonunique = if active.is_empty() {
        false
    } else {
        let sub = Mat::from_cols(&active)?;
        matrix::numerical_rank(&sub, RANK_RTOL)? < active.len()
    };

    Ok(ScalingSolveResult {
        scaling: Scaling { weights },
        residual: sol.residual,
        feasible,
        nonunique,
        iterations: sol.iterations,
    })
}

/// Parseval K-frame check on the scaled frame `{c_j f_j}`.
pub fn verify_scaling(
    frame: &Frame,
    k: &KOperator,
    scaling: &Scaling,
    tol: f64,
) -> Result<ParsevalReport, ScalabilityError> {
    if scaling.len() != frame.count() {
        return Err(ScalabilityError::LengthMismatch {
            expected: frame.count(),
            got: scaling.len(),
        });
    }
    check_operator_dim(frame, k.matrix())?;
    Ok(parseval_k_check(
        &frame.scaled(scaling.as_slice()),
        k,
        tol,
    ))
}

/// Transform the frame vectors by `U`, keeping the scaling. If the input
/// scaling made the frame Parseval (the K = I case), the output verifies
/// against U; if the input was a U0-scalable frame and V is applied, it
/// verifies against V U0.
pub fn transform_frame(
    frame: &Frame,
    scaling: &Scaling,
    u: &Mat,
) -> Result<(Frame, Scaling), ScalabilityError> {
    if scaling.len() != frame.count() {
        return Err(ScalabilityError::LengthMismatch {
            expected: frame.count(),
            got: scaling.len(),
        });
    }
    check_operator_dim(frame, u)?;
    Ok((frame.transformed(u), scaling.clone()))
}

/// Map a K_s-frame to `{K^N f_j}`, which carries the same scaling as a
/// K^{N+1}-scalable frame.
pub fn power_transform(
    frame: &Frame,
    scaling: &Scaling,
    k: &KOperator,
    n_pow: u32,
    tol: f64,
) -> Result<(Frame, KOperator), ScalabilityError> {
    assert!(n_pow >= 1, "exponent must be at least 1");
    require_ks_frame(frame, k, scaling, tol)?;
    let k_n = k.power(n_pow)?;
    let k_next = k.power(n_pow + 1)?;
    Ok((frame.transformed(k_n.matrix()), k_next))
}

/// Map a K_s-frame through an operator T that commutes with K and whose
/// adjoint is an isometry (`T T^T = I`); the image keeps the same scaling
/// and stays a K_s-frame.
pub fn commuting_isometry_transform(
    frame: &Frame,
    scaling: &Scaling,
    k: &KOperator,
    t: &Mat,
    tol: f64,
) -> Result<Frame, ScalabilityError> {
    check_operator_dim(frame, t)?;
    let commute_defect = t
        .matmul(k.matrix())
        .sub(&k.matrix().matmul(t))
        .frobenius_norm();
    let commute_threshold = tol * (1.0 + t.frobenius_norm() * k.matrix().frobenius_norm());
    if commute_defect > commute_threshold {
        return Err(ScalabilityError::NotCommuting {
            defect: commute_defect,
            threshold: commute_threshold,
        });
    }
    let iso_defect = t
        .matmul(&t.transpose())
        .sub(&Mat::identity(t.rows()))
        .frobenius_norm();
    let iso_threshold = tol * (1.0 + t.frobenius_norm());
    if iso_defect > iso_threshold {
        return Err(ScalabilityError::NotCoisometry {
            defect: iso_defect,
            threshold: iso_threshold,
        });
    }
    require_ks_frame(frame, k, scaling, tol)?;
    Ok(frame.transformed(t))
}

/// Both sides of the invertible-transform equivalence, asserted as a
/// biconditional: `{c_j T f_j}` is Parseval for K exactly when the frame
/// operator of `{c_j f_j}` equals `(T^{-1} K)(T^{-1} K)^T`.
#[derive(Debug, Clone)]
pub struct OperatorIdentityReport {
    /// Parseval check of `{c_j T f_j}` against K.
    pub transformed_parseval: ParsevalReport,
    /// Defect of `S_c = (T^{-1} K)(T^{-1} K)^T`.
    pub identity_defect: f64,
    pub identity_holds: bool,
    /// True when the two sides agree (both hold or both fail).
    pub agrees: bool,
}

pub fn check_frame_operator_identity(
    frame: &Frame,
    scaling: &Scaling,
    k: &KOperator,
    t: &Mat,
    tol: f64,
) -> Result<OperatorIdentityReport, ScalabilityError> {
    if scaling.len() != frame.count() {
        return Err(ScalabilityError::LengthMismatch {
            expected: frame.count(),
            got: scaling.len(),
        });
    }
    check_operator_dim(frame, t)?;
    check_operator_dim(frame, k.matrix())?;

    let t_svd = matrix::svd(t)?;
    let sigma_min = *t_svd.singular_values.last().unwrap();
    let cond = if sigma_min > 0.0 {
        t_svd.sigma_max() / sigma_min
    } else {
        f64::INFINITY
    };
    if !(cond <= 1e12) {
        return Err(ScalabilityError::SingularT { cond });
    }

    let transformed_parseval = parseval_k_check(&frame.transformed(t).scaled(scaling.as_slice()), k, tol);

    let t_inv = matrix::pinv(t, RANK_RTOL)?;
    let tk = t_inv.matmul(k.matrix());
    let target = tk.matmul(&tk.transpose()).symmetrized();
    let s_c = frame.scaled(scaling.as_slice()).frame_operator();
    let identity_defect = s_c.sub(&target).frobenius_norm();
    let identity_holds = identity_defect <= tol * (1.0 + target.frobenius_norm());

    Ok(OperatorIdentityReport {
        agrees: transformed_parseval.passes == identity_holds,
        transformed_parseval,
        identity_defect,
        identity_holds,
    })
}

fn require_ks_frame(
    frame: &Frame,
    k: &KOperator,
    scaling: &Scaling,
    tol: f64,
) -> Result<(), ScalabilityError> {
    let report = verify_scaling(frame, k, scaling, tol)?;
    if !report.passes {
        return Err(ScalabilityError::NotKsFrame {
            defect: report.defect,
            threshold: report.threshold,
        });
    }
    Ok(())
}

fn check_operator_dim(frame: &Frame, op: &Mat) -> Result<(), ScalabilityError> {
    if op.rows() != frame.dim() || op.cols() != frame.dim() {
        return Err(ScalabilityError::DimensionMismatch {
            rows: op.rows(),
            cols: op.cols(),
            dim: frame.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::canonical_k;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(lo..hi)).collect()
    }

    fn random_frame(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Frame {
        let cols: Vec<Vec<f64>> = (0..m).map(|_| random_vec(rng, n, -2.0, 2.0)).collect();
        Frame::from_vectors(&cols).unwrap()
    }

    /// Random rotation built from Givens factors; exactly orthogonal up to
    /// roundoff.
    fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        let mut q = Mat::identity(n);
        for p in 0..n {
            for r in (p + 1)..n {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let (s, c) = theta.sin_cos();
                for i in 0..n {
                    let qp = q[(i, p)];
                    let qr = q[(i, r)];
                    q[(i, p)] = c * qp - s * qr;
                    q[(i, r)] = s * qp + c * qr;
                }
            }
        }
        q
    }

    fn basis_frame_scaled(c0: f64, c1: f64) -> Frame {
        Frame::from_vectors(&[vec![c0, 0.0], vec![0.0, c1]]).unwrap()
    }

    #[test]
    fn vech_norm_matches_frobenius() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, -3.0]]).unwrap();
        let v = vech_sym(&m);
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        assert!((norm2.sqrt() - m.frobenius_norm()).abs() < 1e-14);
    }

    #[test]
    fn solve_double_basis() {
        let frame = basis_frame_scaled(2.0, 2.0);
        let res = solve_scaling(&frame, &KOperator::identity(2), 1e-9).unwrap();
        assert!(res.feasible);
        assert!(res.residual < 1e-12);
        assert!((res.scaling.as_slice()[0] - 0.5).abs() < 1e-12);
        assert!((res.scaling.as_slice()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solve_repeated_vector_nonunique_split() {
        let frame =
            Frame::from_vectors(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let res = solve_scaling(&frame, &KOperator::identity(2), 1e-9).unwrap();
        assert!(res.feasible);
        let c = res.scaling.as_slice();
        assert!((c[0] * c[0] + c[1] * c[1] - 1.0).abs() < 1e-10);
        assert!((c[2] - 1.0).abs() < 1e-10);
        let verify = verify_scaling(&frame, &KOperator::identity(2), &res.scaling, 1e-8).unwrap();
        assert!(verify.passes);
    }

    #[test]
    fn solve_infeasible_line_frame() {
        // Two copies of e1 cannot reach the e2 e2^T component of I; the best
        // defect is exactly 1.
        let frame = Frame::from_vectors(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let res = solve_scaling(&frame, &KOperator::identity(2), 1e-9).unwrap();
        assert!(!res.feasible);
        assert!((res.residual - 1.0).abs() < 1e-10);
    }

    #[test]
    fn verify_examples() {
        let frame = basis_frame_scaled(1.0, 1.0);
        let k = KOperator::identity(2);
        assert!(verify_scaling(&frame, &k, &Scaling::ones(2), 1e-9)
            .unwrap()
            .passes);

        let report =
            verify_scaling(&frame, &k, &Scaling::new(vec![2.0, 1.0]).unwrap(), 1e-9).unwrap();
        assert!(!report.passes);
        assert!((report.defect - 3.0).abs() < 1e-12);

        let r = 3.0f64.sqrt() / 2.0;
        let mercedes =
            Frame::from_vectors(&[vec![0.0, 1.0], vec![-r, -0.5], vec![r, -0.5]]).unwrap();
        let c = (2.0f64 / 3.0).sqrt();
        let report =
            verify_scaling(&mercedes, &k, &Scaling::new(vec![c, c, c]).unwrap(), 1e-9).unwrap();
        assert!(report.passes);
    }

    #[test]
    fn verify_length_mismatch() {
        let frame = basis_frame_scaled(1.0, 1.0);
        assert!(matches!(
            verify_scaling(
                &frame,
                &KOperator::identity(2),
                &Scaling::ones(3),
                1e-9
            ),
            Err(ScalabilityError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_random_parseval_k_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..40 {
            let n = rng.gen_range(2..=6);
            let m = rng.gen_range(n..=2 * n);
            let parseval = random_frame(&mut rng, n, m);
            let k = canonical_k(&parseval).unwrap();
            let c = random_vec(&mut rng, m, 0.2, 5.0);
            let descaled: Vec<Vec<f64>> = (0..m)
                .map(|j| parseval.vector(j).iter().map(|x| x / c[j]).collect())
                .collect();
            let frame = Frame::from_vectors(&descaled).unwrap();
            let res = solve_scaling(&frame, &k, 1e-9).unwrap();
            assert!(res.feasible, "round trip infeasible, residual {}", res.residual);
            assert!(res.residual <= 1e-8);
            assert!(verify_scaling(&frame, &k, &res.scaling, 1e-8)
                .unwrap()
                .passes);
        }
    }

    #[test]
    fn residual_invariant_under_joint_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..20 {
            let n = rng.gen_range(2..=5);
            let m = rng.gen_range(n..=2 * n);
            let frame = random_frame(&mut rng, n, m);
            let k = KOperator::new(random_frame(&mut rng, n, n).synthesis().clone()).unwrap();
            let q = random_rotation(&mut rng, n);
            let rotated_frame = frame.transformed(&q);
            let rotated_k = k.left_compose(&q).unwrap();
            let r1 = solve_scaling(&frame, &k, 1e-9).unwrap().residual;
            let r2 = solve_scaling(&rotated_frame, &rotated_k, 1e-9).unwrap().residual;
            assert!((r1 - r2).abs() <= 1e-9 * (1.0 + r1));
        }
    }

    #[test]
    fn transform_diagonal_example() {
        let frame = basis_frame_scaled(1.0, 1.0);
        let u = Mat::diag(&[2.0, 3.0]);
        let (tf, c) = transform_frame(&frame, &Scaling::ones(2), &u).unwrap();
        let uk = KOperator::new(u).unwrap();
        assert!(verify_scaling(&tf, &uk, &c, 1e-9).unwrap().passes);
    }

    #[test]
    fn transform_identity_keeps_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let frame = random_frame(&mut rng, 3, 5);
        let k = canonical_k(&frame).unwrap();
        let (tf, c) = transform_frame(&frame, &Scaling::ones(5), &Mat::identity(3)).unwrap();
        let before = verify_scaling(&frame, &k, &Scaling::ones(5), 1e-9).unwrap();
        let after = verify_scaling(&tf, &k, &c, 1e-9).unwrap();
        assert_eq!(before.passes, after.passes);
        assert!((before.defect - after.defect).abs() < 1e-14);
    }

    #[test]
    fn transform_scalable_frame_against_composed_operator() {
        // Scalable frame (K = I reading), random V applied on top: the image
        // verifies against V, then V2 V1 under composition.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let n = rng.gen_range(2..=5);
            let m = rng.gen_range(n..=2 * n);
            let base = random_frame(&mut rng, n, m);
            let c = random_vec(&mut rng, m, 0.3, 3.0);
            // Build a scalable frame: descale a Parseval frame.
            let root = crate::matrix::sqrt_psd(&base.frame_operator()).unwrap();
            let inv_root = crate::matrix::pinv(&root, RANK_RTOL).unwrap();
            let parseval = base.transformed(&inv_root);
            let scalable: Vec<Vec<f64>> = (0..m)
                .map(|j| parseval.vector(j).iter().map(|x| x / c[j]).collect())
                .collect();
            let frame = Frame::from_vectors(&scalable).unwrap();
            let scaling = Scaling::new(c).unwrap();

            let v = random_frame(&mut rng, n, n).synthesis().clone();
            let (tf, tc) = transform_frame(&frame, &scaling, &v).unwrap();
            let vk = KOperator::new(v).unwrap();
            assert!(verify_scaling(&tf, &vk, &tc, 1e-8).unwrap().passes);
        }
    }

    #[test]
    fn power_transform_diagonal_example() {
        let frame = basis_frame_scaled(2.0, 1.0);
        let k = KOperator::new(Mat::diag(&[2.0, 1.0])).unwrap();
        let scaling = Scaling::ones(2);
        let (tf, k2) = power_transform(&frame, &scaling, &k, 1, 1e-9).unwrap();
        assert!(tf
            .synthesis()
            .sub(&Mat::diag(&[4.0, 1.0]))
            .frobenius_norm()
            < 1e-14);
        assert!(k2.matrix().sub(&Mat::diag(&[4.0, 1.0])).frobenius_norm() < 1e-14);
        assert!(verify_scaling(&tf, &k2, &scaling, 1e-9).unwrap().passes);
    }

    #[test]
    fn power_transform_identity_k() {
        let frame = basis_frame_scaled(1.0, 1.0);
        let k = KOperator::identity(2);
        let (tf, kp) = power_transform(&frame, &Scaling::ones(2), &k, 3, 1e-9).unwrap();
        assert!(tf.synthesis().sub(frame.synthesis()).frobenius_norm() < 1e-15);
        assert!(kp.matrix().sub(&Mat::identity(2)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn power_transform_rejects_non_ks() {
        let frame = basis_frame_scaled(3.0, 1.0);
        let k = KOperator::identity(2);
        assert!(matches!(
            power_transform(&frame, &Scaling::ones(2), &k, 1, 1e-9),
            Err(ScalabilityError::NotKsFrame { .. })
        ));
    }

    #[test]
    fn power_matches_repeated_single_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10 {
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(n..=2 * n);
            let (frame, scaling, k) = random_ks_instance(&mut rng, n, m);
            let n_pow = rng.gen_range(2..=3u32);

            let (direct_frame, direct_k) =
                power_transform(&frame, &scaling, &k, n_pow, 1e-8).unwrap();

            // One step at a time: each application multiplies the frame by K
            // and composes the predicted operator on the left.
            let mut stepped = frame.clone();
            let mut op = k.clone();
            for _ in 0..n_pow {
                let (next, _) = transform_frame(&stepped, &scaling, k.matrix()).unwrap();
                stepped = next;
                op = op.left_compose(k.matrix()).unwrap();
            }
            assert!(
                direct_k.matrix().sub(op.matrix()).frobenius_norm()
                    <= 1e-9 * (1.0 + op.matrix().frobenius_norm())
            );
            assert!(
                direct_frame
                    .synthesis()
                    .sub(stepped.synthesis())
                    .frobenius_norm()
                    <= 1e-9 * (1.0 + stepped.synthesis().frobenius_norm())
            );
            assert!(verify_scaling(&stepped, &op, &scaling, 1e-7).unwrap().passes);
        }
    }

    /// Construct a K_s-frame: weighted outer products define K K^T, so the
    /// weights are a valid scaling by construction.
    pub(crate) fn random_ks_instance(
        rng: &mut ChaCha8Rng,
        n: usize,
        m: usize,
    ) -> (Frame, Scaling, KOperator) {
        let frame = random_frame(rng, n, m);
        let c = random_vec(rng, m, 0.3, 2.0);
        let mut target = Mat::zeros(n, n);
        for j in 0..m {
            target.add_scaled_outer(c[j] * c[j], &frame.vector(j));
        }
        let root = crate::matrix::sqrt_psd(&target).unwrap();
        // Optionally hide the symmetry of K behind a rotation; K K^T is
        // unchanged.
        let k = if rng.gen_bool(0.5) {
            KOperator::new(root.matmul(&random_rotation(rng, n))).unwrap()
        } else {
            KOperator::new(root).unwrap()
        };
        (frame, Scaling::new(c).unwrap(), k)
    }

    #[test]
    fn commuting_isometry_rotation_of_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..10 {
            let n = rng.gen_range(2..=5);
            let m = rng.gen_range(n..=2 * n);
            let base = random_frame(&mut rng, n, m);
            let root = crate::matrix::sqrt_psd(&base.frame_operator()).unwrap();
            let inv_root = crate::matrix::pinv(&root, RANK_RTOL).unwrap();
            let parseval = base.transformed(&inv_root);
            let scaling = Scaling::ones(m);
            let k = KOperator::identity(n);
            let t = random_rotation(&mut rng, n);
            let rotated = commuting_isometry_transform(&parseval, &scaling, &k, &t, 1e-8).unwrap();
            assert!(verify_scaling(&rotated, &k, &scaling, 1e-8).unwrap().passes);
        }
    }

    #[test]
    fn commuting_isometry_scalar_k() {
        // K = 2I commutes with every rotation.
        let frame = basis_frame_scaled(2.0, 2.0);
        let k = KOperator::new(Mat::identity(2).scale(2.0)).unwrap();
        let scaling = Scaling::ones(2);
        let theta = 0.7f64;
        let t = Mat::from_rows(&[
            vec![theta.cos(), -theta.sin()],
            vec![theta.sin(), theta.cos()],
        ])
        .unwrap();
        let rotated = commuting_isometry_transform(&frame, &scaling, &k, &t, 1e-9).unwrap();
        assert!(verify_scaling(&rotated, &k, &scaling, 1e-9).unwrap().passes);
    }

    #[test]
    fn commuting_isometry_identity_is_noop() {
        let frame = basis_frame_scaled(2.0, 1.0);
        let k = KOperator::new(Mat::diag(&[2.0, 1.0])).unwrap();
        let scaling = Scaling::ones(2);
        let out =
            commuting_isometry_transform(&frame, &scaling, &k, &Mat::identity(2), 1e-9).unwrap();
        assert!(out.synthesis().sub(frame.synthesis()).frobenius_norm() == 0.0);
    }

    #[test]
    fn commuting_isometry_rejections() {
        let frame = basis_frame_scaled(1.0, 1.0);
        let scaling = Scaling::ones(2);
        let k = KOperator::new(Mat::diag(&[2.0, 1.0])).unwrap();
        let rot = Mat::from_rows(&[
            vec![0.6, -0.8],
            vec![0.8, 0.6],
        ])
        .unwrap();
        assert!(matches!(
            commuting_isometry_transform(&frame, &scaling, &k, &rot, 1e-9),
            Err(ScalabilityError::NotCommuting { .. })
        ));
        let shear = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            commuting_isometry_transform(&frame, &scaling, &KOperator::identity(2), &shear, 1e-9),
            Err(ScalabilityError::NotCoisometry { .. })
        ));
    }

    #[test]
    fn scaled_composition_identity_diagonal_case() {
        // T = K = diag(2,1) on the standard basis frame with unit weights:
        // {T f_j} is Parseval for K and S_c = I = (T^{-1}K)(T^{-1}K)^T.
        let frame = basis_frame_scaled(1.0, 1.0);
        let k = KOperator::new(Mat::diag(&[2.0, 1.0])).unwrap();
        let t = Mat::diag(&[2.0, 1.0]);
        let report =
            check_frame_operator_identity(&frame, &Scaling::ones(2), &k, &t, 1e-9).unwrap();
        assert!(report.transformed_parseval.passes);
        assert!(report.identity_holds);
        assert!(report.agrees);
    }

    #[test]
    fn operator_identity_reduces_to_parseval_at_t_identity() {
        let frame = basis_frame_scaled(2.0, 1.0);
        let k = KOperator::new(Mat::diag(&[2.0, 1.0])).unwrap();
        let report = check_frame_operator_identity(
            &frame,
            &Scaling::ones(2),
            &k,
            &Mat::identity(2),
            1e-9,
        )
        .unwrap();
        assert!(report.transformed_parseval.passes);
        assert!(report.identity_holds);
        assert!(report.agrees);
    }

    #[test]
    fn operator_identity_biconditional_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let mut seen_true = 0;
        for trial in 0..40 {
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(n..=2 * n);
            // Random invertible T: rotation times positive diagonal.
            let t = random_rotation(&mut rng, n)
                .matmul(&Mat::diag(&random_vec(&mut rng, n, 0.4, 2.0)));
            let (frame, scaling, k) = if trial % 2 == 0 {
                // Both-true instance: build the frame so that {c_j T f_j} is
                // Parseval for K.
                let (g, c, k) = random_ks_instance(&mut rng, n, m);
                let t_inv = crate::matrix::pinv(&t, RANK_RTOL).unwrap();
                (g.transformed(&t_inv), c, k)
            } else {
                let (g, _, k) = random_ks_instance(&mut rng, n, m);
                (g, Scaling::new(random_vec(&mut rng, m, 0.3, 2.0)).unwrap(), k)
            };
            let report =
                check_frame_operator_identity(&frame, &scaling, &k, &t, 1e-7).unwrap();
            assert!(
                report.agrees,
                "sides disagree: parseval {} identity {}",
                report.transformed_parseval.passes, report.identity_holds
            );
            if report.transformed_parseval.passes {
                seen_true += 1;
            }
        }
        assert!(seen_true >= 10, "corpus never hit the true branch");
    }

    #[test]
    fn operator_identity_rejects_singular_t() {
        let frame = basis_frame_scaled(1.0, 1.0);
        assert!(matches!(
            check_frame_operator_identity(
                &frame,
                &Scaling::ones(2),
                &KOperator::identity(2),
                &Mat::diag(&[1.0, 0.0]),
                1e-9
            ),
            Err(ScalabilityError::SingularT { .. })
        ));
    }

    #[test]
    fn left_composition_property_holds_for_symmetry_preserving_u() {
        // If (f_j, c) and (U f_j, c) are both K_s, then (f_j, c) is UK_s.
        // Constructed with U K K^T U^T = K K^T: U a rotation commuting with
        // K K^T.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..10 {
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(n..=2 * n);
            // Scalar K K^T so that any rotation preserves it.
            let alpha: f64 = rng.gen_range(0.5..2.0);
            let frame = random_frame(&mut rng, n, m);
            let mut target = Mat::zeros(n, n);
            let c = random_vec(&mut rng, m, 0.3, 2.0);
            for j in 0..m {
                target.add_scaled_outer(c[j] * c[j], &frame.vector(j));
            }
            // Rescale the frame so its weighted operator is alpha^2 I.
            let root = crate::matrix::sqrt_psd(&target).unwrap();
            let inv_root = crate::matrix::pinv(&root, RANK_RTOL).unwrap();
            let frame = frame.transformed(&inv_root.scale(alpha));
            let k = KOperator::new(Mat::identity(n).scale(alpha)).unwrap();
            let scaling = Scaling::new(c).unwrap();
            let u = random_rotation(&mut rng, n);

            let (uf, _) = transform_frame(&frame, &scaling, &u).unwrap();
            assert!(verify_scaling(&frame, &k, &scaling, 1e-8).unwrap().passes);
            assert!(verify_scaling(&uf, &k, &scaling, 1e-8).unwrap().passes);
            let uk = k.left_compose(&u).unwrap();
            assert!(verify_scaling(&frame, &uk, &scaling, 1e-8).unwrap().passes);
        }
    }
}
