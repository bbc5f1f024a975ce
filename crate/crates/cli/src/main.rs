//! `kframekit`: K-frame analysis over JSON problem files.
//!
//! Exit codes: 0 = checked and true, 1 = checked and false (or infeasible),
//! 2 = input error, 3 = numerical failure. Machine reports go to stdout;
//! diagnostics (including wall time) to stderr.

mod commands;
mod problem;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::{Outcome, RunError};
use problem::{parse_problem_str, Problem};
use report::{CommandResult, RunReport};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::time::Instant;

const DEFAULT_TOL: f64 = 1e-9;
const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "kframekit",
    version,
    about = "Finite-dimensional K-frame toolkit: bounds, Parseval checks, scalings, piecewise scalings, and variational-inequality solves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame operators and optimal K-frame bounds.
    Analyze(CommonArgs),
    /// Parseval K-frame test (S = K K^T).
    Parseval(CommonArgs),
    /// Solve for a scaling making the frame Parseval for K, then verify it.
    Scale(CommonArgs),
    /// Check a piecewise scaling (requires p, a, b).
    PiecewiseCheck(CommonArgs),
    /// Build a disjoint-support piecewise scaling (requires p, index_set).
    PiecewiseBuild(CommonArgs),
    /// Solve the frame-induced variational inequality (requires f0).
    ViSolve(CommonArgs),
    /// Two-sided bounds on the minimum energy (requires f0).
    Bounds(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Problem file (JSON).
    file: PathBuf,
    /// Tolerance override (default 1e-9; the problem file may also set it).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap override (default 10000).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Report format on stdout.
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,
    /// Seed for sampled certificate checks.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

fn main() {
    let started = Instant::now();
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Analyze(a) => ("analyze", a),
        Command::Parseval(a) => ("parseval", a),
        Command::Scale(a) => ("scale", a),
        Command::PiecewiseCheck(a) => ("piecewise-check", a),
        Command::PiecewiseBuild(a) => ("piecewise-build", a),
        Command::ViSolve(a) => ("vi-solve", a),
        Command::Bounds(a) => ("bounds", a),
    };
    let code = run(name, args);
    eprintln!(
        "kframekit: {} finished in {} ms",
        name,
        started.elapsed().as_millis()
    );
    std::process::exit(code);
}

fn run(name: &str, args: &CommonArgs) -> i32 {
    let input = args.file.display().to_string();

    let bytes = match std::fs::read(&args.file) {
        Ok(b) => b,
        Err(e) => {
            let err = RunError::Problem(problem::ProblemError::Io {
                path: input.clone(),
                source: e,
            });
            return emit_error(name, args, &input, "unavailable".to_string(), &err);
        }
    };
    let digest = format!("sha256:{}", hex_digest(&bytes));

    let parsed: Result<Problem, RunError> = String::from_utf8(bytes.clone())
        .map_err(|_| {
            RunError::Problem(problem::ProblemError::Schema {
                path: "file".to_string(),
                detail: "not valid UTF-8".to_string(),
            })
        })
        .and_then(|text| parse_problem_str(&text).map_err(RunError::Problem));
    let problem = match parsed {
        Ok(p) => p,
        Err(err) => return emit_error(name, args, &input, digest, &err),
    };

    // Explicit flags win over file-level overrides, which win over defaults.
    let tol = args.tol.or(problem.tol).unwrap_or(DEFAULT_TOL);
    let max_iter = args.max_iter.or(problem.max_iter).unwrap_or(DEFAULT_MAX_ITER);
    if !tol.is_finite() || tol <= 0.0 {
        let err = RunError::Problem(problem::ProblemError::Schema {
            path: "--tol".to_string(),
            detail: "must be positive".to_string(),
        });
        return emit_error(name, args, &input, digest, &err);
    }

    let ran: Result<Outcome, RunError> = match name {
        "analyze" => commands::analyze(&problem),
        "parseval" => commands::parseval(&problem, tol),
        "scale" => commands::scale(&problem, tol),
        "piecewise-check" => commands::piecewise_check(&problem, tol),
        "piecewise-build" => commands::piecewise_build(&problem, tol),
        "vi-solve" => commands::vi_solve(&problem, tol, max_iter, args.seed),
        "bounds" => commands::bounds(&problem, tol),
        _ => unreachable!("clap restricts subcommands"),
    };

    match ran {
        Ok(outcome) => {
            let envelope = RunReport {
                command: name.to_string(),
                input,
                input_digest: digest,
                tol,
                max_iter: max_iter as u64,
                seed: args.seed,
                result: outcome.result,
            };
            print_report(&envelope, args.output);
            outcome.exit_code
        }
        Err(err) => emit_error(name, args, &input, digest, &err),
    }
}

fn emit_error(
    name: &str,
    args: &CommonArgs,
    input: &str,
    digest: String,
    err: &RunError,
) -> i32 {
    eprintln!("kframekit: error: {err}");
    let envelope = RunReport {
        command: name.to_string(),
        input: input.to_string(),
        input_digest: digest,
        tol: args.tol.unwrap_or(DEFAULT_TOL),
        max_iter: args.max_iter.unwrap_or(DEFAULT_MAX_ITER) as u64,
        seed: args.seed,
        result: CommandResult::Error {
            category: err.category().to_string(),
            message: err.to_string(),
        },
    };
    print_report(&envelope, args.output);
    err.exit_code()
}

fn print_report(envelope: &RunReport, format: OutputFormat) {
    match format {
        OutputFormat::Json => println!("{}", report::to_json(envelope)),
        OutputFormat::Text => print!("{}", report::to_text(envelope)),
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
