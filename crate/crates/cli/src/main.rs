//! `qaoa` — solve, map, and benchmark exact-cover instances with QAOA.
//!
//! Subcommands: `solve` (one optimization run), `landscape` (p=1 grid scan),
//! `benchmark` (multi-restart optimizer comparison), `predict` (gate tally
//! and fidelity-product table). Exit code 0 on success, 2 on validation
//! errors, 1 on I/O failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qaoa_core::estimator::Shots;
use qaoa_core::exactcover::{brute_force_covers, builtin_problem, parse_instance, Selection};
use qaoa_core::harness::{
    grid_search, predict_and_compare, prediction_csv, run_benchmark, run_optimizer,
    write_landscape_outputs, BenchmarkConfig, EvalSetup, QaoaObjective,
};
use qaoa_core::ising::{map_to_ising, IsingModel};
use qaoa_core::noise::NoiseModel;
use qaoa_core::optimizers::{OptimizerConfig, OptimizerKind};
use qaoa_core::RNG_ALGORITHM;

#[derive(Parser)]
#[command(
    name = "qaoa",
    version,
    about = "QAOA exact-cover simulator and benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer against an instance and write the trajectory.
    Solve(SolveArgs),
    /// Scan the p=1 (gamma, beta) grid and write landscape CSVs.
    Landscape(LandscapeArgs),
    /// Compare optimizers over many restarts with random starts.
    Benchmark(BenchmarkArgs),
    /// Tally gates per level and predict total fidelity by product.
    Predict(PredictArgs),
}

#[derive(Args)]
struct ProblemSource {
    /// Built-in problem id (A, B, C or D).
    #[arg(long, conflicts_with = "instance")]
    problem: Option<String>,
    /// Path to an instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: ProblemSource,
    /// QAOA level count.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Optimizer: nm, cmaes or bgp.
    #[arg(long, default_value = "nm")]
    optimizer: String,
    /// Shot count per evaluation, or `exact`.
    #[arg(long, default_value = "5000")]
    shots: String,
    /// Noise model JSON path, `ideal`, or `default`.
    #[arg(long, default_value = "ideal")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation budget for the run.
    #[arg(long, default_value_t = 300)]
    max_calls: usize,
    /// Convergence threshold on F.
    #[arg(long, default_value_t = -0.95, allow_hyphen_values = true)]
    threshold: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LandscapeArgs {
    #[command(flatten)]
    source: ProblemSource,
    #[arg(long, default_value_t = 61)]
    resolution: usize,
    #[arg(long, default_value = "5000")]
    shots: String,
    #[arg(long, default_value = "ideal")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    source: ProblemSource,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value = "5000")]
    shots: String,
    #[arg(long, default_value_t = -0.95, allow_hyphen_values = true)]
    threshold: f64,
    /// Comma-separated optimizer list.
    #[arg(long, default_value = "nm,cmaes,bgp")]
    optimizers: String,
    #[arg(long, default_value = "ideal")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    max_calls: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    source: ProblemSource,
    /// Largest level count in the table (1..=pmax).
    #[arg(long, default_value_t = 3)]
    pmax: usize,
    /// Noise model JSON path, `ideal`, or `default`.
    #[arg(long, default_value = "default")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional output directory for prediction.csv (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors that indicate bad user input (exit code 2) versus I/O trouble
/// (exit code 1).
enum CliError {
    Validation(String),
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => { CliError::Validation(format!($($arg)*)) };
}

struct Problem {
    name: Option<String>,
    model: IsingModel,
    solutions: Vec<Selection>,
}

fn load_problem(source: &ProblemSource) -> Result<Problem, CliError> {
    let instance = match (&source.problem, &source.instance) {
        (Some(id), None) => builtin_problem(id).map_err(|e| invalid!("{e}"))?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| invalid!("cannot read instance {}: {e}", path.display()))?;
            parse_instance(&text).map_err(|e| invalid!("{e}"))?
        }
        _ => {
            return Err(invalid!(
                "exactly one of --problem or --instance is required"
            ))
        }
    };
    let solutions: Vec<Selection> = brute_force_covers(&instance)
        .map_err(|e| invalid!("{e}"))?
        .into_iter()
        .collect();
    let model = map_to_ising(&instance).normalize_integer_spectrum();
    Ok(Problem {
        name: instance.name().map(str::to_string),
        model,
        solutions,
    })
}

fn parse_shots(text: &str) -> Result<Shots, CliError> {
    if text.eq_ignore_ascii_case("exact") {
        return Ok(Shots::Exact);
    }
    let n: u64 = text
        .parse()
        .map_err(|_| invalid!("--shots must be a positive integer or `exact`, got `{text}`"))?;
    if n == 0 {
        return Err(invalid!("--shots must be at least 1"));
    }
    Ok(Shots::Counted(n))
}

fn parse_noise(text: &str, n: usize) -> Result<Option<NoiseModel>, CliError> {
    match text {
        "ideal" => Ok(None),
        "default" => {
            if n != 2 {
                return Err(invalid!(
                    "the default noise model covers 2 qubits, the problem has {n}"
                ));
            }
            Ok(Some(NoiseModel::reference_two_qubit()))
        }
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| invalid!("cannot read noise model {path}: {e}"))?;
            let model = NoiseModel::from_json(&text).map_err(|e| invalid!("{e}"))?;
            if model.num_qubits() != n {
                return Err(invalid!(
                    "noise model covers {} qubits, the problem has {n}",
                    model.num_qubits()
                ));
            }
            Ok(Some(model))
        }
    }
}

fn build_setup(noise: Option<NoiseModel>, shots: Shots) -> EvalSetup {
    match noise {
        None => EvalSetup {
            backend: qaoa_core::estimator::Backend::Ideal,
            shots,
            confusion: None,
        },
        Some(model) => EvalSetup::noisy(model, shots),
    }
}

#[derive(Serialize)]
struct SolveResult<'a> {
    problem: Option<&'a str>,
    p: usize,
    optimizer: &'a str,
    backend: String,
    shots: String,
    threshold: f64,
    max_calls: usize,
    seed: u64,
    rng: &'static str,
    best_gammas: Vec<f64>,
    best_betas: Vec<f64>,
    #[serde(rename = "best_F")]
    best_f: f64,
    #[serde(rename = "best_P_solution")]
    best_p_solution: f64,
    converged: bool,
    calls_to_convergence: Option<usize>,
    calls_used: usize,
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.source)?;
    if args.p == 0 {
        return Err(invalid!("--p must be at least 1"));
    }
    let kind = OptimizerKind::parse(&args.optimizer)
        .ok_or_else(|| invalid!("unknown optimizer `{}`", args.optimizer))?;
    let shots = parse_shots(&args.shots)?;
    let noise = parse_noise(&args.noise, problem.model.num_spins())?;
    let setup = build_setup(noise, shots);
    let mut objective = QaoaObjective::new(
        &problem.model,
        &problem.solutions,
        args.p,
        &setup,
        args.seed,
    )
    .map_err(|e| invalid!("{e}"))?;
    let config = OptimizerConfig {
        max_calls: args.max_calls,
        convergence_threshold: args.threshold,
        seed: args.seed,
    };
    let start = qaoa_core::harness::restart_start(args.seed, 0, args.p);
    let run = run_optimizer(kind, &mut objective, &start, &config).map_err(|e| invalid!("{e}"))?;

    fs::create_dir_all(&args.out)?;
    let result = SolveResult {
        problem: problem.name.as_deref(),
        p: args.p,
        optimizer: kind.label(),
        backend: setup.backend.descriptor().to_string(),
        shots: setup.shots.descriptor(),
        threshold: args.threshold,
        max_calls: args.max_calls,
        seed: args.seed,
        rng: RNG_ALGORITHM,
        best_gammas: run.best_angles[..args.p].to_vec(),
        best_betas: run.best_angles[args.p..].to_vec(),
        best_f: run.best_f,
        best_p_solution: run.best_p_solution,
        converged: run.converged,
        calls_to_convergence: run.calls_to_convergence,
        calls_used: run.trajectory.len(),
    };
    fs::write(
        args.out.join("result.json"),
        serde_json::to_string_pretty(&result).expect("result serializes"),
    )?;
    fs::write(args.out.join("run.jsonl"), run.to_jsonl())?;
    fs::write(args.out.join("model.json"), problem.model.to_json())?;
    println!(
        "best F = {:.6}, P(solution) = {:.6}, converged = {} ({} calls)",
        run.best_f,
        run.best_p_solution,
        run.converged,
        run.trajectory.len()
    );
    Ok(())
}

fn cmd_landscape(args: &LandscapeArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.source)?;
    let shots = parse_shots(&args.shots)?;
    let noise = parse_noise(&args.noise, problem.model.num_spins())?;
    let setup = build_setup(noise, shots);
    let landscape = grid_search(&problem.model, 1, args.resolution, &setup, args.seed)
        .map_err(|e| invalid!("{e}"))?;
    write_landscape_outputs(
        &landscape,
        problem.name.as_deref(),
        &setup,
        args.seed,
        &args.out,
    )
    .map_err(map_harness_io)?;
    let (g, b) = landscape.argmin();
    println!(
        "grid minimum F = {:.6} at gamma = {:.4}, beta = {:.4} -> {}",
        landscape.min_f(),
        landscape.gamma_axis[g],
        landscape.beta_axis[b],
        args.out.join("landscape.csv").display()
    );
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.source)?;
    let shots = parse_shots(&args.shots)?;
    let noise = parse_noise(&args.noise, problem.model.num_spins())?;
    let optimizers: Vec<OptimizerKind> = args
        .optimizers
        .split(',')
        .map(|s| OptimizerKind::parse(s).ok_or_else(|| invalid!("unknown optimizer `{s}`")))
        .collect::<Result<_, _>>()?;
    let config = BenchmarkConfig {
        levels: args.p,
        optimizers,
        runs: args.runs,
        setup: build_setup(noise, shots),
        threshold: args.threshold,
        max_calls: args.max_calls,
        base_seed: args.seed,
    };
    let output = run_benchmark(
        &problem.model,
        &problem.solutions,
        problem.name.as_deref(),
        &config,
    )
    .map_err(|e| invalid!("{e}"))?;
    output.write_to_dir(&args.out).map_err(map_harness_io)?;
    for stats in &output.report.optimizers {
        println!(
            "{:>6}: converged {:>5.1}% | calls {} | best P(solution) {:.4}",
            stats.optimizer,
            100.0 * stats.convergence_fraction,
            match (stats.calls_mean, stats.calls_std) {
                (Some(m), Some(s)) => format!("{m:.0} +/- {s:.0}"),
                (Some(m), None) => format!("{m:.0}"),
                _ => "-".to_string(),
            },
            stats.best_p_solution
        );
    }
    println!("report: {}", args.out.join("report.json").display());
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.source)?;
    if args.pmax == 0 {
        return Err(invalid!("--pmax must be at least 1"));
    }
    let noise = parse_noise(&args.noise, problem.model.num_spins())?
        .unwrap_or_else(|| NoiseModel::ideal(problem.model.num_spins()));
    let p_values: Vec<usize> = (1..=args.pmax).collect();
    let rows = predict_and_compare(&problem.model, &p_values, &noise);
    let csv = prediction_csv(&rows);
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("prediction.csv"), &csv)?;
            println!("{}", dir.join("prediction.csv").display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn map_harness_io(e: qaoa_core::harness::HarnessError) -> CliError {
    match e {
        qaoa_core::harness::HarnessError::Io(io) => CliError::Io(io.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Landscape(args) => cmd_landscape(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Predict(args) => cmd_predict(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(1)
        }
    }
}
