//! Projected-contraction solver for the variational inequality
//! `sigma(u0, v - u0) >= <K K^T f0, v - u0>` over a closed convex set, with
//! the symmetric-case energy minimization and two-sided bounds on the
//! minimum in terms of the K-frame constants.

use crate::frame::{kframe_bounds, Frame, FrameError, KOperator};
use crate::matrix::{self, dot, norm, vec_axpy, vec_sub, KernelError, Mat};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("bilinear form is not coercive: alpha = {alpha:.3e}")]
    NotCoercive { alpha: f64 },
    #[error("bilinear form is not symmetric: defect {defect:.3e}")]
    NotSymmetric { defect: f64 },
    #[error(
        "no convergence in {max_iter} iterations: last step {last_step:.3e}, \
         a-posteriori error bound {error_bound:.3e}"
    )]
    MaxIterExceeded {
        max_iter: usize,
        last_step: f64,
        error_bound: f64,
    },
    #[error("box bounds must satisfy lo <= hi at every coordinate")]
    BoxBoundsInvalid,
    #[error("ball radius must be nonnegative")]
    NegativeRadius,
    #[error("halfspace normal must be nonzero")]
    ZeroNormal,
    #[error("affine basis columns must be orthonormal: defect {defect:.3e}")]
    NonOrthonormalBasis { defect: f64 },
    #[error("frame operator is numerically singular: lambda_min = {lambda_min:.3e}")]
    SingularFrameOperator { lambda_min: f64 },
    #[error("target vector f0 (or K^T f0) is zero within tolerance")]
    ZeroTarget,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Bilinear form `sigma(u, v) = <Lambda u, v>` with its coercivity constant
/// `alpha` (smallest eigenvalue of the symmetric part) and continuity
/// constant `beta` (spectral norm of Lambda).
#[derive(Debug, Clone)]
pub struct BilinearForm {
    lambda: Mat,
    alpha: f64,
    beta: f64,
    symmetric: bool,
}

impl BilinearForm {
    pub fn new(lambda: Mat) -> Result<Self, VariationalError> {
        if !lambda.is_square() {
            return Err(VariationalError::DimensionMismatch {
                context: format!("form matrix is {}x{}", lambda.rows(), lambda.cols()),
            });
        }
        let sym_part = lambda.symmetrized();
        let alpha = matrix::sym_eig(&sym_part)?.min();
        let beta = matrix::operator_norm(&lambda)?;
        let symmetric = lambda.asymmetry() <= 1e-10 * (1.0 + lambda.frobenius_norm());
        Ok(BilinearForm {
            lambda,
            alpha,
            beta,
            symmetric,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda.rows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `sigma(u, v) = <Lambda u, v>`.
    pub fn evaluate(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(&self.lambda.matvec(u), v)
    }
}

/// Closed convex sets with closed-form Euclidean projections.
#[derive(Debug, Clone)]
pub enum ConvexSet {
    WholeSpace {
        dim: usize,
    },
    /// Coordinatewise bounds; entries may be infinite.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{ x : <normal, x> <= offset }`.
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// `point + span(basis columns)`, basis orthonormal.
    Affine {
        point: Vec<f64>,
        basis: Mat,
    },
}

impl ConvexSet {
    pub fn whole_space(dim: usize) -> Self {
        ConvexSet::WholeSpace { dim }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, VariationalError> {
        if lo.len() != hi.len() {
            return Err(VariationalError::DimensionMismatch {
                context: "box bounds lengths differ".to_string(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(VariationalError::BoxBoundsInvalid);
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, VariationalError> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(VariationalError::NegativeRadius);
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, VariationalError> {
        if norm(&normal) == 0.0 {
            return Err(VariationalError::ZeroNormal);
        }
        Ok(ConvexSet::Halfspace { normal, offset })
    }

    pub fn affine(point: Vec<f64>, basis: Mat) -> Result<Self, VariationalError> {
        if basis.rows() != point.len() {
            return Err(VariationalError::DimensionMismatch {
                context: "affine basis rows must match point length".to_string(),
            });
        }
        let gram = basis.transpose().matmul(&basis);
        let defect = gram.sub(&Mat::identity(basis.cols())).frobenius_norm();
        if defect > 1e-10 * (1.0 + basis.frobenius_norm()) {
            return Err(VariationalError::NonOrthonormalBasis { defect });
        }
        Ok(ConvexSet::Affine { point, basis })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::WholeSpace { dim } => *dim,
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Halfspace { normal, .. } => normal.len(),
            ConvexSet::Affine { point, .. } => point.len(),
        }
    }

    /// Euclidean projection onto the set; idempotent and nonexpansive.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, VariationalError> {
        if v.len() != self.dim() {
            return Err(VariationalError::DimensionMismatch {
                context: format!("projecting R^{} point onto R^{} set", v.len(), self.dim()),
            });
        }
        Ok(match self {
            ConvexSet::WholeSpace { .. } => v.to_vec(),
            ConvexSet::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&x, (&l, &h))| x.max(l).min(h))
                .collect(),
            ConvexSet::Ball { center, radius } => {
                let d = vec_sub(v, center);
                let dist = norm(&d);
                if dist <= *radius {
                    v.to_vec()
                } else {
                    vec_axpy(center, radius / dist, &d)
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                let excess = dot(normal, v) - offset;
                if excess <= 0.0 {
                    v.to_vec()
                } else {
                    vec_axpy(v, -excess / dot(normal, normal), normal)
                }
            }
            ConvexSet::Affine { point, basis } => {
                let rel = vec_sub(v, point);
                let coords = basis.transpose_matvec(&rel);
                vec_axpy(point, 1.0, &basis.matvec(&coords))
            }
        })
    }

    /// Deterministic feasible sample near `around`: a seeded Gaussian step
    /// projected back onto the set.
    pub fn sample(&self, rng: &mut ChaCha8Rng, around: &[f64]) -> Result<Vec<f64>, VariationalError> {
        let scale = 1.0 + norm(around);
        let jitter: Vec<f64> = around
            .iter()
            .map(|&x| {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                x + scale * g
            })
            .collect();
        self.project(&jitter)
    }
}

/// The variational-inequality problem datum: form, feasible set, target
/// vector f0, and the operator K entering through `K K^T f0`.
#[derive(Debug, Clone)]
pub struct VIProblem {
    pub form: BilinearForm,
    pub set: ConvexSet,
    pub f0: Vec<f64>,
    pub k: KOperator,
}

impl VIProblem {
    pub fn new(
        form: BilinearForm,
        set: ConvexSet,
        f0: Vec<f64>,
        k: KOperator,
    ) -> Result<Self, VariationalError> {
        let n = form.dim();
        if set.dim() != n || f0.len() != n || k.dim() != n {
            return Err(VariationalError::DimensionMismatch {
                context: format!(
                    "form R^{n}, set R^{}, f0 R^{}, K R^{}",
                    set.dim(),
                    f0.len(),
                    k.dim()
                ),
            });
        }
        Ok(VIProblem { form, set, f0, k })
    }

    /// The fixed right-hand side `g = K K^T f0`.
    pub fn target(&self) -> Vec<f64> {
        self.k.kkstar().matvec(&self.f0)
    }
}

/// Solver outcome. `gamma = alpha / beta^2` is the step size making the
/// fixed-point map a strict contraction with modulus
/// `rho = sqrt(1 - alpha^2/beta^2)`; `max_step_ratio` is the largest
/// measured per-iteration contraction ratio.
#[derive(Debug, Clone)]
pub struct VISolveResult {
    pub u0: Vec<f64>,
    pub iterations: usize,
    pub gamma: f64,
    pub contraction_rho: f64,
    pub final_step_norm: f64,
    pub max_step_ratio: f64,
    /// Energy value `J(u0)`, present when the form is symmetric.
    pub j_value: Option<f64>,
}

/// Iterate `v <- P_C(gamma g - gamma Lambda v + v)` from `v0 = P_C(0)` until
/// the step norm drops below the tolerance.
///
/// The loop actually stops a safety factor below `tol (1 + ||v||)` so that
/// the a-posteriori error `rho/(1-rho) * step`, amplified through the form,
/// stays within the `10 tol` slack of the downstream VI certificate; the
/// reported `final_step_norm` therefore always satisfies the nominal rule.
pub fn solve_vi(
    problem: &VIProblem,
    tol: f64,
    max_iter: usize,
) -> Result<VISolveResult, VariationalError> {
    assert!(tol > 0.0, "tolerance must be positive");
    assert!(max_iter >= 1, "max_iter must be at least 1");
    let alpha = problem.form.alpha();
    let beta = problem.form.beta();
    if alpha <= 0.0 {
        return Err(VariationalError::NotCoercive { alpha });
    }
    let gamma = alpha / (beta * beta);
    let rho = (1.0 - alpha * alpha / (beta * beta)).max(0.0).sqrt();

    let tightening = (rho / (1.0 - rho)).max(1.0) * beta.max(1.0);
    // Never chase steps below the rounding floor of the iteration.
    let internal_tol = (tol / tightening.min(1e6)).max(32.0 * f64::EPSILON);

    let g = problem.target();
    let lambda = problem.form.matrix();
    let mut v = problem.set.project(&vec![0.0; problem.form.dim()])?;
    let mut first_step = 0.0;
    let mut prev_step: Option<f64> = None;
    let mut max_ratio = 0.0f64;
    // Steps below this floor are rounding noise; ratios there are not
    // meaningful measurements of the contraction.
    let ratio_floor = 1e4 * f64::EPSILON;

    for it in 1..=max_iter {
        let drift = vec_sub(&g, &lambda.matvec(&v));
        let next = problem.set.project(&vec_axpy(&v, gamma, &drift))?;
        let step = norm(&vec_sub(&next, &v));
        if it == 1 {
            first_step = step;
        }
        let mut stalled = false;
        if let Some(prev) = prev_step {
            if prev > ratio_floor * (1.0 + norm(&v)) {
                max_ratio = max_ratio.max(step / prev);
            }
            // Exact contraction steps strictly decrease; a non-decrease means
            // the iteration reached its rounding floor.
            stalled = step >= prev;
        }
        prev_step = Some(step);
        v = next;
        let norm_v = norm(&v);
        if step <= internal_tol * (1.0 + norm_v)
            || (stalled && step <= tol * (1.0 + norm_v))
        {
            let j_value = problem
                .form
                .is_symmetric()
                .then(|| j_functional_unchecked(problem, &v));
            return Ok(VISolveResult {
                u0: v,
                iterations: it,
                gamma,
                contraction_rho: rho,
                final_step_norm: step,
                max_step_ratio: max_ratio,
                j_value,
            });
        }
    }

    let last_step = prev_step.unwrap_or(0.0);
    let error_bound = if rho < 1.0 {
        rho.powi(max_iter as i32) * first_step / (1.0 - rho)
    } else {
        f64::INFINITY
    };
    Err(VariationalError::MaxIterExceeded {
        max_iter,
        last_step,
        error_bound,
    })
}

/// `J(v) = 1/2 sigma(v, v) - <K K^T f0, v>`.
pub fn j_functional(problem: &VIProblem, v: &[f64]) -> Result<f64, VariationalError> {
    if v.len() != problem.form.dim() {
        return Err(VariationalError::DimensionMismatch {
            context: format!(
                "evaluating J at R^{} point for an R^{} problem",
                v.len(),
                problem.form.dim()
            ),
        });
    }
    Ok(j_functional_unchecked(problem, v))
}

fn j_functional_unchecked(problem: &VIProblem, v: &[f64]) -> f64 {
    0.5 * problem.form.evaluate(v, v) - dot(&problem.target(), v)
}

/// Outcome of a sampled certificate: the smallest observed slack over all
/// samples and whether every sample stayed within tolerance.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub samples: usize,
    pub min_slack: f64,
    pub passes: bool,
}

/// Sampled check of the variational inequality at `u0`:
/// `<Lambda u0 - g, v - u0> >= -10 tol (1 + ||v - u0||)` for feasible v.
pub fn vi_certificate(
    problem: &VIProblem,
    u0: &[f64],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CertificateReport, VariationalError> {
    let residual = vec_sub(&problem.form.matrix().matvec(u0), &problem.target());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut passes = true;
    for _ in 0..samples {
        let v = problem.set.sample(&mut rng, u0)?;
        let d = vec_sub(&v, u0);
        let slack = dot(&residual, &d) + 10.0 * tol * (1.0 + norm(&d));
        min_slack = min_slack.min(slack);
        if slack < 0.0 {
            passes = false;
        }
    }
    Ok(CertificateReport {
        samples,
        min_slack,
        passes,
    })
}

/// Sampled check that `u0` minimizes J over the set:
/// `J(u0) <= J(v) + 10 tol` for feasible v.
pub fn minimality_certificate(
    problem: &VIProblem,
    u0: &[f64],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CertificateReport, VariationalError> {
    let j0 = j_functional(problem, u0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut passes = true;
    for _ in 0..samples {
        let v = problem.set.sample(&mut rng, u0)?;
        let slack = j_functional_unchecked(problem, &v) - j0 + 10.0 * tol;
        min_slack = min_slack.min(slack);
        if slack < 0.0 {
            passes = false;
        }
    }
    Ok(CertificateReport {
        samples,
        min_slack,
        passes,
    })
}

/// Result of symmetric energy minimization: the solve itself plus the
/// sampled minimality certificate.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub solve: VISolveResult,
    pub minimality: CertificateReport,
}

/// Number of feasible perturbations sampled by the built-in certificates.
pub const CERTIFICATE_SAMPLES: usize = 100;

/// Minimize `J` over the set for a symmetric coercive form by delegating to
/// the VI solver, then certify minimality against sampled feasible points.
pub fn minimize_symmetric(
    problem: &VIProblem,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<MinimizeResult, VariationalError> {
    if !problem.form.is_symmetric() {
        return Err(VariationalError::NotSymmetric {
            defect: problem.form.matrix().asymmetry(),
        });
    }
    let solve = solve_vi(problem, tol, max_iter)?;
    let minimality = minimality_certificate(problem, &solve.u0, CERTIFICATE_SAMPLES, seed, tol)?;
    Ok(MinimizeResult { solve, minimality })
}

/// Two-sided bounds on `min J` for the frame-induced form `sigma_S`.
///
/// `lower = -||K^T f0||^2 / (2 A)` and
/// `upper = -(7/32) ||K^T f0||^4 / (B ||f0||^2)` with (A, B) the optimal
/// K-frame bounds; `j_min` comes from the solver and is cross-checked
/// against the closed form `-1/2 <K K^T f0, S^{-1} K K^T f0>`.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub j_min: f64,
    pub j_min_closed_form: f64,
    pub holds: bool,
    pub lower_bound_a: f64,
    pub upper_bound_b: f64,
    pub adjoint_target_norm: f64,
    /// Exponent applied to `||K^T f0||` in the upper bound. The quartic
    /// power is the one consistent with minimizing
    /// `B t^2 ||f0||^2 / 2 - t ||K^T f0||^2` along the f0 ray.
    pub upper_norm_exponent: u32,
}

const BOUNDS_SLACK: f64 = 1e-8;

pub fn bounds_report(
    frame: &Frame,
    k: &KOperator,
    f0: &[f64],
    tol: f64,
) -> Result<BoundsReport, VariationalError> {
    if f0.len() != frame.dim() {
        return Err(VariationalError::DimensionMismatch {
            context: format!("f0 in R^{}, frame in R^{}", f0.len(), frame.dim()),
        });
    }
    let s = frame.frame_operator();
    let s_eig = matrix::sym_eig(&s)?;
    if s_eig.min() <= tol {
        return Err(VariationalError::SingularFrameOperator {
            lambda_min: s_eig.min(),
        });
    }
    if norm(f0) == 0.0 {
        return Err(VariationalError::ZeroTarget);
    }
    let ktf0 = k.adjoint_apply(f0);
    let ktf0_norm = norm(&ktf0);
    if ktf0_norm <= tol {
        return Err(VariationalError::ZeroTarget);
    }

    let bounds = kframe_bounds(frame, k)?;
    let lower = -(ktf0_norm * ktf0_norm) / (2.0 * bounds.lower);
    let upper = -(7.0 / 32.0) * ktf0_norm.powi(4) / (bounds.upper * dot(f0, f0));

    let problem = VIProblem::new(
        BilinearForm::new(s.clone())?,
        ConvexSet::whole_space(frame.dim()),
        f0.to_vec(),
        k.clone(),
    )?;
    let solve_tol = tol.min(1e-10);
    let minimized = minimize_symmetric(&problem, solve_tol, 500_000, 42)?;
    let j_min = minimized.solve.j_value.expect("symmetric form");

    // Closed form: the unconstrained minimizer is S^{-1} g.
    let g = problem.target();
    let s_inv_g = s_eig.assemble(|lam| 1.0 / lam).matvec(&g);
    let j_min_closed_form = -0.5 * dot(&g, &s_inv_g);

    let holds = lower - BOUNDS_SLACK <= j_min && j_min <= upper + BOUNDS_SLACK;
    Ok(BoundsReport {
        lower,
        upper,
        j_min,
        j_min_closed_form,
        holds,
        lower_bound_a: bounds.lower,
        upper_bound_b: bounds.upper,
        adjoint_target_norm: ktf0_norm,
        upper_norm_exponent: 4,
    })
}
