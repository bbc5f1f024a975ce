//! Subcommand execution: each runner maps a validated problem to a result
//! payload plus the exit code expressing its boolean outcome (0 true,
//! 1 false/infeasible).

use crate::problem::{Problem, ProblemError};
use crate::report::{CommandResult, ProvidedScaling};
use kframe_core::frame::{build_ops, kframe_bounds, parseval_k_check, FrameError};
use kframe_core::matrix::{self, KernelError};
use kframe_core::piecewise::{
    build_disjoint_piecewise, check_piecewise, PiecewiseError, PiecewiseScaling,
};
use kframe_core::scalability::{solve_scaling, verify_scaling, ScalabilityError, Scaling};
use kframe_core::variational::{
    bounds_report, minimize_symmetric, vi_certificate, BilinearForm, ConvexSet, VIProblem,
    VariationalError, CERTIFICATE_SAMPLES,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Scalability(#[from] ScalabilityError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl RunError {
    /// Exit 3 for numerical failures (iteration caps, lost convergence);
    /// exit 2 for anything wrong with the input.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            RunError::Problem(_) => "input",
            _ if self.is_numerical() => "numerical",
            _ => "input",
        }
    }

    fn is_numerical(&self) -> bool {
        fn kernel_numerical(k: &KernelError) -> bool {
            matches!(
                k,
                KernelError::ConvergenceFailure { .. } | KernelError::IterationCapExceeded { .. }
            )
        }
        match self {
            RunError::Kernel(k) => kernel_numerical(k),
            RunError::Frame(FrameError::Kernel(k)) => kernel_numerical(k),
            RunError::Scalability(ScalabilityError::Kernel(k)) => kernel_numerical(k),
            RunError::Scalability(ScalabilityError::Frame(FrameError::Kernel(k))) => {
                kernel_numerical(k)
            }
            RunError::Piecewise(PiecewiseError::Kernel(k)) => kernel_numerical(k),
            RunError::Piecewise(PiecewiseError::Frame(FrameError::Kernel(k))) => {
                kernel_numerical(k)
            }
            RunError::Variational(VariationalError::MaxIterExceeded { .. }) => true,
            RunError::Variational(VariationalError::Kernel(k)) => kernel_numerical(k),
            RunError::Variational(VariationalError::Frame(FrameError::Kernel(k))) => {
                kernel_numerical(k)
            }
            _ => false,
        }
    }
}

pub struct Outcome {
    pub result: CommandResult,
    pub exit_code: i32,
}

fn outcome(result: CommandResult, ok: bool) -> Outcome {
    Outcome {
        result,
        exit_code: if ok { 0 } else { 1 },
    }
}

pub fn analyze(problem: &Problem) -> Result<Outcome, RunError> {
    let ops = build_ops(&problem.frame);
    let eig = matrix::sym_eig(&ops.frame_op)?;
    let bounds = kframe_bounds(&problem.frame, &problem.k)?;
    let ok = bounds.is_k_frame;
    Ok(outcome(
        CommandResult::Analyze {
            dimension: problem.frame.dim() as u64,
            count: problem.frame.count() as u64,
            k_rank: problem.k.rank() as u64,
            frame_operator_trace: ops.frame_op.trace(),
            frame_operator_eigenvalues: eig.eigenvalues,
            lower_bound: bounds.lower,
            upper_bound: bounds.upper,
            is_k_frame: bounds.is_k_frame,
            degenerate_k: bounds.degenerate_k,
            witness: bounds.witness,
        },
        ok,
    ))
}

pub fn parseval(problem: &Problem, tol: f64) -> Result<Outcome, RunError> {
    let report = parseval_k_check(&problem.frame, &problem.k, tol);
    Ok(outcome(
        CommandResult::Parseval {
            passes: report.passes,
            defect: report.defect,
            threshold: report.threshold,
        },
        report.passes,
    ))
}

pub fn scale(problem: &Problem, tol: f64) -> Result<Outcome, RunError> {
    let solved = solve_scaling(&problem.frame, &problem.k, tol)?;
    // The solver contract promises the scaled frame passes at 10 tol.
    let verify = verify_scaling(&problem.frame, &problem.k, &solved.scaling, 10.0 * tol)?;
    let provided = match &problem.c {
        Some(c) => {
            let scaling = Scaling::new(c.clone())?;
            let check = verify_scaling(&problem.frame, &problem.k, &scaling, tol)?;
            Some(ProvidedScaling {
                passes: check.passes,
                defect: check.defect,
            })
        }
        None => None,
    };
    let ok = solved.feasible && verify.passes;
    Ok(outcome(
        CommandResult::Scale {
            feasible: solved.feasible,
            residual: solved.residual,
            nonunique: solved.nonunique,
            nnls_iterations: solved.iterations as u64,
            weights: solved.scaling.as_slice().to_vec(),
            verify_passes: verify.passes,
            verify_defect: verify.defect,
            provided_scaling: provided,
        },
        ok,
    ))
}

pub fn piecewise_check(problem: &Problem, tol: f64) -> Result<Outcome, RunError> {
    let p = problem.require_p()?;
    let (a, b) = problem.require_ab()?;
    let pw = PiecewiseScaling::new(a.to_vec(), b.to_vec(), p.clone())?;
    let report = check_piecewise(&problem.frame, &problem.k, &pw, tol)?;
    Ok(outcome(
        CommandResult::PiecewiseCheck {
            is_kps: report.is_kps,
            parseval_defect: report.parseval_defect,
            piece_x_defect: report.piece_x_defect,
            piece_y_defect: report.piece_y_defect,
            cross_sym_defect: report.cross_sym_defect,
            cross_full_defect: report.cross_full_defect,
            commute_defect: report.commute_defect,
            pk_commutes: report.pk_commutes,
        },
        report.is_kps,
    ))
}

pub fn piecewise_build(problem: &Problem, tol: f64) -> Result<Outcome, RunError> {
    let p = problem.require_p()?;
    let idx = problem.require_index_set()?;
    match build_disjoint_piecewise(&problem.frame, &problem.k, p, idx, tol) {
        Ok(pw) => {
            let report = check_piecewise(&problem.frame, &problem.k, &pw, tol)?;
            let ok = report.is_kps;
            Ok(outcome(
                CommandResult::PiecewiseBuild {
                    feasible: true,
                    infeasible_piece: None,
                    piece_residual: None,
                    a: Some(pw.a),
                    b: Some(pw.b),
                    is_kps: Some(report.is_kps),
                    parseval_defect: Some(report.parseval_defect),
                },
                ok,
            ))
        }
        Err(PiecewiseError::InfeasiblePiece { piece, residual }) => Ok(outcome(
            CommandResult::PiecewiseBuild {
                feasible: false,
                infeasible_piece: Some(piece.to_string()),
                piece_residual: Some(residual),
                a: None,
                b: None,
                is_kps: None,
                parseval_defect: None,
            },
            false,
        )),
        Err(other) => Err(other.into()),
    }
}

pub fn vi_solve(
    problem: &Problem,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Outcome, RunError> {
    let f0 = problem.require_f0()?.to_vec();
    let set = problem
        .convex_set
        .clone()
        .unwrap_or(ConvexSet::whole_space(problem.frame.dim()));
    // The bilinear form is the one the frame induces: sigma_S(u, v) = <Su, v>.
    let form = BilinearForm::new(problem.frame.frame_operator())?;
    let vip = VIProblem::new(form, set, f0, problem.k.clone())?;
    let minimized = minimize_symmetric(&vip, tol, max_iter, seed)?;
    let cert = vi_certificate(&vip, &minimized.solve.u0, CERTIFICATE_SAMPLES, seed, tol)?;
    let ok = cert.passes && minimized.minimality.passes;
    Ok(outcome(
        CommandResult::ViSolve {
            u0: minimized.solve.u0,
            iterations: minimized.solve.iterations as u64,
            gamma: minimized.solve.gamma,
            contraction_rho: minimized.solve.contraction_rho,
            final_step_norm: minimized.solve.final_step_norm,
            max_step_ratio: minimized.solve.max_step_ratio,
            j_value: minimized.solve.j_value.expect("sigma_S is symmetric"),
            vi_certificate_min_slack: cert.min_slack,
            vi_certificate_passes: cert.passes,
            minimality_min_slack: minimized.minimality.min_slack,
            minimality_passes: minimized.minimality.passes,
        },
        ok,
    ))
}

pub fn bounds(problem: &Problem, tol: f64) -> Result<Outcome, RunError> {
    let f0 = problem.require_f0()?;
    let report = bounds_report(&problem.frame, &problem.k, f0, tol)?;
    Ok(outcome(
        CommandResult::Bounds {
            lower: report.lower,
            upper: report.upper,
            j_min: report.j_min,
            j_min_closed_form: report.j_min_closed_form,
            holds: report.holds,
            lower_bound_a: report.lower_bound_a,
            upper_bound_b: report.upper_bound_b,
            adjoint_target_norm: report.adjoint_target_norm,
            upper_norm_exponent: report.upper_norm_exponent as u64,
        },
        report.holds,
    ))
}
