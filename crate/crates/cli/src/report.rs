//! Report types and deterministic rendering. JSON reports keep struct field
//! order and print every float with 17 significant digits, so identical
//! inputs produce byte-identical bytes; text output uses the same float
//! format.

use serde::Serialize;
use std::io;

/// Envelope around every subcommand result: the command echo, the input
/// digest, and the resolved knobs.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub input: String,
    pub input_digest: String,
    pub tol: f64,
    pub max_iter: u64,
    pub seed: u64,
    pub result: CommandResult,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandResult {
    Analyze {
        dimension: u64,
        count: u64,
        k_rank: u64,
        frame_operator_trace: f64,
        frame_operator_eigenvalues: Vec<f64>,
        lower_bound: f64,
        upper_bound: f64,
        is_k_frame: bool,
        degenerate_k: bool,
        witness: Option<Vec<f64>>,
    },
    Parseval {
        passes: bool,
        defect: f64,
        threshold: f64,
    },
    Scale {
        feasible: bool,
        residual: f64,
        nonunique: bool,
        nnls_iterations: u64,
        weights: Vec<f64>,
        verify_passes: bool,
        verify_defect: f64,
        provided_scaling: Option<ProvidedScaling>,
    },
    PiecewiseCheck {
        is_kps: bool,
        parseval_defect: f64,
        piece_x_defect: f64,
        piece_y_defect: f64,
        cross_sym_defect: f64,
        cross_full_defect: f64,
        commute_defect: f64,
        pk_commutes: bool,
    },
    PiecewiseBuild {
        feasible: bool,
        infeasible_piece: Option<String>,
        piece_residual: Option<f64>,
        a: Option<Vec<f64>>,
        b: Option<Vec<f64>>,
        is_kps: Option<bool>,
        parseval_defect: Option<f64>,
    },
    ViSolve {
        u0: Vec<f64>,
        iterations: u64,
        gamma: f64,
        contraction_rho: f64,
        final_step_norm: f64,
        max_step_ratio: f64,
        j_value: f64,
        vi_certificate_min_slack: f64,
        vi_certificate_passes: bool,
        minimality_min_slack: f64,
        minimality_passes: bool,
    },
    Bounds {
        lower: f64,
        upper: f64,
        j_min: f64,
        j_min_closed_form: f64,
        holds: bool,
        lower_bound_a: f64,
        upper_bound_b: f64,
        adjoint_target_norm: f64,
        upper_norm_exponent: u64,
    },
    Error {
        category: String,
        message: String,
    },
}

#[derive(Debug, Serialize)]
pub struct ProvidedScaling {
    pub passes: bool,
    pub defect: f64,
}

/// 17-significant-digit float format shared by JSON and text output.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json(report: &RunReport) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    report
        .serialize(&mut ser)
        .expect("report serialization is infallible");
    String::from_utf8(out).expect("json output is utf-8")
}

fn push_line(out: &mut String, key: &str, value: impl AsRef<str>) {
    out.push_str(key);
    out.push_str(" = ");
    out.push_str(value.as_ref());
    out.push('\n');
}

fn fmt_vec(v: &[f64]) -> String {
    let mut s = String::from("[");
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(&fmt_float(*x));
    }
    s.push(']');
    s
}

pub fn to_text(report: &RunReport) -> String {
    let mut out = String::new();
    push_line(&mut out, "command", &report.command);
    push_line(&mut out, "input", &report.input);
    push_line(&mut out, "input_digest", &report.input_digest);
    push_line(&mut out, "tol", fmt_float(report.tol));
    push_line(&mut out, "max_iter", report.max_iter.to_string());
    push_line(&mut out, "seed", report.seed.to_string());
    match &report.result {
        CommandResult::Analyze {
            dimension,
            count,
            k_rank,
            frame_operator_trace,
            frame_operator_eigenvalues,
            lower_bound,
            upper_bound,
            is_k_frame,
            degenerate_k,
            witness,
        } => {
            push_line(&mut out, "dimension", dimension.to_string());
            push_line(&mut out, "count", count.to_string());
            push_line(&mut out, "k_rank", k_rank.to_string());
            push_line(&mut out, "frame_operator_trace", fmt_float(*frame_operator_trace));
            push_line(
                &mut out,
                "frame_operator_eigenvalues",
                fmt_vec(frame_operator_eigenvalues),
            );
            push_line(&mut out, "lower_bound", fmt_float(*lower_bound));
            push_line(&mut out, "upper_bound", fmt_float(*upper_bound));
            push_line(&mut out, "is_k_frame", is_k_frame.to_string());
            push_line(&mut out, "degenerate_k", degenerate_k.to_string());
            match witness {
                Some(w) => push_line(&mut out, "witness", fmt_vec(w)),
                None => push_line(&mut out, "witness", "none"),
            }
        }
        CommandResult::Parseval {
            passes,
            defect,
            threshold,
        } => {
            push_line(&mut out, "passes", passes.to_string());
            push_line(&mut out, "defect", fmt_float(*defect));
            push_line(&mut out, "threshold", fmt_float(*threshold));
        }
        CommandResult::Scale {
            feasible,
            residual,
            nonunique,
            nnls_iterations,
            weights,
            verify_passes,
            verify_defect,
            provided_scaling,
        } => {
            push_line(&mut out, "feasible", feasible.to_string());
            push_line(&mut out, "residual", fmt_float(*residual));
            push_line(&mut out, "nonunique", nonunique.to_string());
            push_line(&mut out, "nnls_iterations", nnls_iterations.to_string());
            push_line(&mut out, "weights", fmt_vec(weights));
            push_line(&mut out, "verify_passes", verify_passes.to_string());
            push_line(&mut out, "verify_defect", fmt_float(*verify_defect));
            match provided_scaling {
                Some(ps) => {
                    push_line(&mut out, "provided_scaling_passes", ps.passes.to_string());
                    push_line(&mut out, "provided_scaling_defect", fmt_float(ps.defect));
                }
                None => push_line(&mut out, "provided_scaling", "none"),
            }
        }
        CommandResult::PiecewiseCheck {
            is_kps,
            parseval_defect,
            piece_x_defect,
            piece_y_defect,
            cross_sym_defect,
            cross_full_defect,
            commute_defect,
            pk_commutes,
        } => {
            push_line(&mut out, "is_kps", is_kps.to_string());
            push_line(&mut out, "parseval_defect", fmt_float(*parseval_defect));
            push_line(&mut out, "piece_x_defect", fmt_float(*piece_x_defect));
            push_line(&mut out, "piece_y_defect", fmt_float(*piece_y_defect));
            push_line(&mut out, "cross_sym_defect", fmt_float(*cross_sym_defect));
            push_line(&mut out, "cross_full_defect", fmt_float(*cross_full_defect));
            push_line(&mut out, "commute_defect", fmt_float(*commute_defect));
            push_line(&mut out, "pk_commutes", pk_commutes.to_string());
        }
        CommandResult::PiecewiseBuild {
            feasible,
            infeasible_piece,
            piece_residual,
            a,
            b,
            is_kps,
            parseval_defect,
        } => {
            push_line(&mut out, "feasible", feasible.to_string());
            if let Some(p) = infeasible_piece {
                push_line(&mut out, "infeasible_piece", p);
            }
            if let Some(r) = piece_residual {
                push_line(&mut out, "piece_residual", fmt_float(*r));
            }
            if let Some(a) = a {
                push_line(&mut out, "a", fmt_vec(a));
            }
            if let Some(b) = b {
                push_line(&mut out, "b", fmt_vec(b));
            }
            if let Some(k) = is_kps {
                push_line(&mut out, "is_kps", k.to_string());
            }
            if let Some(d) = parseval_defect {
                push_line(&mut out, "parseval_defect", fmt_float(*d));
            }
        }
        CommandResult::ViSolve {
            u0,
            iterations,
            gamma,
            contraction_rho,
            final_step_norm,
            max_step_ratio,
            j_value,
            vi_certificate_min_slack,
            vi_certificate_passes,
            minimality_min_slack,
            minimality_passes,
        } => {
            push_line(&mut out, "u0", fmt_vec(u0));
            push_line(&mut out, "iterations", iterations.to_string());
            push_line(&mut out, "gamma", fmt_float(*gamma));
            push_line(&mut out, "contraction_rho", fmt_float(*contraction_rho));
            push_line(&mut out, "final_step_norm", fmt_float(*final_step_norm));
            push_line(&mut out, "max_step_ratio", fmt_float(*max_step_ratio));
            push_line(&mut out, "j_value", fmt_float(*j_value));
            push_line(
                &mut out,
                "vi_certificate_min_slack",
                fmt_float(*vi_certificate_min_slack),
            );
            push_line(
                &mut out,
                "vi_certificate_passes",
                vi_certificate_passes.to_string(),
            );
            push_line(
                &mut out,
                "minimality_min_slack",
                fmt_float(*minimality_min_slack),
            );
            push_line(&mut out, "minimality_passes", minimality_passes.to_string());
        }
        CommandResult::Bounds {
            lower,
            upper,
            j_min,
            j_min_closed_form,
            holds,
            lower_bound_a,
            upper_bound_b,
            adjoint_target_norm,
            upper_norm_exponent,
        } => {
            push_line(&mut out, "lower", fmt_float(*lower));
            push_line(&mut out, "upper", fmt_float(*upper));
            push_line(&mut out, "j_min", fmt_float(*j_min));
            push_line(&mut out, "j_min_closed_form", fmt_float(*j_min_closed_form));
            push_line(&mut out, "holds", holds.to_string());
            push_line(&mut out, "lower_bound_a", fmt_float(*lower_bound_a));
            push_line(&mut out, "upper_bound_b", fmt_float(*upper_bound_b));
            push_line(
                &mut out,
                "adjoint_target_norm",
                fmt_float(*adjoint_target_norm),
            );
            push_line(
                &mut out,
                "upper_norm_exponent",
                upper_norm_exponent.to_string(),
            );
        }
        CommandResult::Error { category, message } => {
            push_line(&mut out, "error_category", category);
            push_line(&mut out, "error_message", message);
        }
    }
    out
}
