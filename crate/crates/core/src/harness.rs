//! Experiment drivers: landscape grids, linecuts, the multi-restart
//! optimizer benchmark, fidelity predictions, and their file formats.
//!
//! Everything here is seeded through [`crate::derive_seed`] with fixed
//! stream tags, and all aggregation runs in a deterministic order, so a
//! fixed base seed reproduces every output file byte for byte (restarts and
//! grid cells still evaluate in parallel).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::estimator::{evaluate_angles, Backend, EstimatorError, Shots};
use crate::exactcover::Selection;
use crate::ising::IsingModel;
use crate::noise::{ConfusionMatrix, NoiseModel, DENSITY_MATRIX_MAX_QUBITS};
use crate::optimizers::{
    cma_es, gp_bayes_opt, nelder_mead, EvalOutcome, Objective, OptimizationRun, OptimizerConfig,
    OptimizerError, OptimizerKind, TrajectoryPoint,
};
use crate::simulator::{build_qaoa_circuit, GateTally, QaoaAngles};
use crate::{derive_seed, RNG_ALGORITHM};

use crate::noise::predict_circuit_fidelity;

const STREAM_OBJECTIVE: u64 = 1;
const STREAM_START: u64 = 2;
const STREAM_OPTIMIZER: u64 = 3;
const STREAM_GRID: u64 = 4;

/// Reference angles for gate-tally prediction; any fixed values clear of
/// rotation cancellations work, the tally is angle-independent.
const PREDICT_GAMMA: f64 = 0.7;
const PREDICT_BETA: f64 = 0.4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("grid search supports p = 1 only, got p = {0}")]
    GridRequiresLevelOne(usize),
    #[error("grid resolution must be at least 2")]
    ResolutionTooSmall,
    #[error("linecut index {index} out of range for resolution {resolution}")]
    LinecutIndex { index: usize, resolution: usize },
    #[error("convergence threshold must be negative, got {0}")]
    BadThreshold(f64),
    #[error("at least one optimizer is required")]
    NoOptimizers,
    #[error("benchmark needs at least one restart")]
    NoRuns,
    #[error("levels must be at least 1")]
    NoLevels,
    #[error("solution width {got} does not match model width {expected}")]
    SolutionWidth { got: usize, expected: usize },
    #[error("noise model covers {model} qubits, the problem has {problem}")]
    NoiseWidth { model: usize, problem: usize },
    #[error("noisy simulation is limited to {DENSITY_MATRIX_MAX_QUBITS} qubits, got {0}")]
    TooWideForNoise(usize),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// How objective evaluations are produced: state backend, shot budget, and
/// the readout confusion (with mitigation) when readout error is modeled.
#[derive(Debug, Clone)]
pub struct EvalSetup {
    pub backend: Backend,
    pub shots: Shots,
    pub confusion: Option<ConfusionMatrix>,
}

impl EvalSetup {
    pub fn ideal_exact() -> Self {
        EvalSetup {
            backend: Backend::Ideal,
            shots: Shots::Exact,
            confusion: None,
        }
    }

    pub fn ideal_sampled(shots: u64) -> Self {
        EvalSetup {
            backend: Backend::Ideal,
            shots: Shots::Counted(shots),
            confusion: None,
        }
    }

    /// Noisy gates plus readout error and mitigation from the model's
    /// readout fidelities.
    pub fn noisy(noise: NoiseModel, shots: Shots) -> Self {
        let confusion = Some(noise.confusion());
        EvalSetup {
            backend: Backend::Noisy(noise),
            shots,
            confusion,
        }
    }

    pub fn descriptor(&self) -> String {
        format!("{}/{}", self.backend.descriptor(), self.shots.descriptor())
    }

    fn validate(&self, n: usize) -> Result<(), HarnessError> {
        if let Backend::Noisy(noise) = &self.backend {
            if n > DENSITY_MATRIX_MAX_QUBITS {
                return Err(HarnessError::TooWideForNoise(n));
            }
            if noise.num_qubits() != n {
                return Err(HarnessError::NoiseWidth {
                    model: noise.num_qubits(),
                    problem: n,
                });
            }
        }
        if let Some(confusion) = &self.confusion {
            if confusion.num_qubits() != n {
                return Err(HarnessError::NoiseWidth {
                    model: confusion.num_qubits(),
                    problem: n,
                });
            }
        }
        Ok(())
    }
}

/// The angle-space objective seen by optimizers: flat `[gammas, betas]`
/// coordinates in, estimated `F` out, with the solution-state probability
/// logged alongside. Each call draws shots with seed
/// `base_seed XOR call_index`, so evaluations are independent but the whole
/// run replays exactly.
pub struct QaoaObjective<'a> {
    model: &'a IsingModel,
    levels: usize,
    setup: &'a EvalSetup,
    base_seed: u64,
    solution_indices: Vec<usize>,
    calls: u64,
}

impl<'a> QaoaObjective<'a> {
    pub fn new(
        model: &'a IsingModel,
        solutions: &[Selection],
        levels: usize,
        setup: &'a EvalSetup,
        base_seed: u64,
    ) -> Result<Self, HarnessError> {
        if levels == 0 {
            return Err(HarnessError::NoLevels);
        }
        setup.validate(model.num_spins())?;
        for sel in solutions {
            if sel.len() != model.num_spins() {
                return Err(HarnessError::SolutionWidth {
                    got: sel.len(),
                    expected: model.num_spins(),
                });
            }
        }
        Ok(QaoaObjective {
            model,
            levels,
            setup,
            base_seed,
            solution_indices: solutions.iter().map(Selection::to_index).collect(),
            calls: 0,
        })
    }
}

impl Objective for QaoaObjective<'_> {
    fn dim(&self) -> usize {
        2 * self.levels
    }

    fn evaluate(&mut self, x: &[f64]) -> EvalOutcome {
        let angles = QaoaAngles::from_flat(x).expect("dimension checked by optimizers");
        let seed = self.base_seed ^ self.calls;
        self.calls += 1;
        let est = evaluate_angles(
            self.model,
            &angles,
            &self.setup.backend,
            self.setup.shots,
            self.setup.confusion.as_ref(),
            seed,
        )
        .expect("setup validated at construction");
        let p_solution = self
            .solution_indices
            .iter()
            .map(|&i| est.state_probs[i])
            .sum();
        EvalOutcome {
            f: est.f,
            p_solution,
            evaluated_at: angles.to_flat(),
        }
    }
}

// ---------------------------------------------------------------------------
// Landscapes
// ---------------------------------------------------------------------------

/// A `resolution x resolution` scan of `(gamma_1, beta_1)` over `[0, pi)`.
#[derive(Debug, Clone)]
pub struct Landscape {
    pub resolution: usize,
    pub gamma_axis: Vec<f64>,
    pub beta_axis: Vec<f64>,
    /// `f_grid[gamma_index][beta_index]`
    pub f_grid: Vec<Vec<f64>>,
    /// `prob_grids[state][gamma_index][beta_index]`
    pub prob_grids: Vec<Vec<Vec<f64>>>,
}

impl Landscape {
    /// Grid argmin of F as `(gamma_index, beta_index)`; first in row-major
    /// order on ties.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for g in 0..self.resolution {
            for b in 0..self.resolution {
                if self.f_grid[g][b] < self.f_grid[best.0][best.1] {
                    best = (g, b);
                }
            }
        }
        best
    }

    pub fn min_f(&self) -> f64 {
        let (g, b) = self.argmin();
        self.f_grid[g][b]
    }

    pub fn num_qubits(&self) -> usize {
        self.prob_grids.len().trailing_zeros() as usize
    }
}

/// Evaluates every `(gamma, beta)` pair on the axis `k pi / resolution`,
/// `k = 0..resolution-1`. Cells run in parallel; the reduction into the grid
/// is index-ordered, so output is independent of scheduling.
pub fn grid_search(
    model: &IsingModel,
    levels: usize,
    resolution: usize,
    setup: &EvalSetup,
    seed: u64,
) -> Result<Landscape, HarnessError> {
    if levels != 1 {
        return Err(HarnessError::GridRequiresLevelOne(levels));
    }
    if resolution < 2 {
        return Err(HarnessError::ResolutionTooSmall);
    }
    setup.validate(model.num_spins())?;
    let step = std::f64::consts::PI / resolution as f64;
    let axis: Vec<f64> = (0..resolution).map(|k| k as f64 * step).collect();
    let cells: Vec<(f64, Vec<f64>)> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let gamma = axis[idx / resolution];
            let beta = axis[idx % resolution];
            let angles = QaoaAngles::new(vec![gamma], vec![beta]).expect("axis values are finite");
            let est = evaluate_angles(
                model,
                &angles,
                &setup.backend,
                setup.shots,
                setup.confusion.as_ref(),
                derive_seed(seed, STREAM_GRID, idx as u64),
            )
            .expect("setup validated above");
            (est.f, est.state_probs)
        })
        .collect();

    let dim = 1usize << model.num_spins();
    let mut f_grid = vec![vec![0.0; resolution]; resolution];
    let mut prob_grids = vec![vec![vec![0.0; resolution]; resolution]; dim];
    for (idx, (f, probs)) in cells.into_iter().enumerate() {
        let (g, b) = (idx / resolution, idx % resolution);
        f_grid[g][b] = f;
        for (state, p) in probs.into_iter().enumerate() {
            prob_grids[state][g][b] = p;
        }
    }
    Ok(Landscape {
        resolution,
        gamma_axis: axis.clone(),
        beta_axis: axis,
        f_grid,
        prob_grids,
    })
}

/// Which coordinate a linecut holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinecutAxis {
    Gamma,
    Beta,
}

#[derive(Debug, Clone)]
pub struct LinecutRow {
    pub angle: f64,
    pub f: f64,
    pub probs: Vec<f64>,
}

/// One row or column of a landscape with all probability channels.
#[derive(Debug, Clone)]
pub struct Linecut {
    pub fixed_axis: LinecutAxis,
    pub fixed_index: usize,
    pub fixed_angle: f64,
    pub rows: Vec<LinecutRow>,
}

pub fn linecut(
    landscape: &Landscape,
    axis: LinecutAxis,
    index: usize,
) -> Result<Linecut, HarnessError> {
    if index >= landscape.resolution {
        return Err(HarnessError::LinecutIndex {
            index,
            resolution: landscape.resolution,
        });
    }
    let states = landscape.prob_grids.len();
    let pick = |g: usize, b: usize| -> LinecutRow {
        LinecutRow {
            angle: match axis {
                LinecutAxis::Gamma => landscape.beta_axis[b],
                LinecutAxis::Beta => landscape.gamma_axis[g],
            },
            f: landscape.f_grid[g][b],
            probs: (0..states).map(|s| landscape.prob_grids[s][g][b]).collect(),
        }
    };
    let rows: Vec<LinecutRow> = (0..landscape.resolution)
        .map(|k| match axis {
            LinecutAxis::Gamma => pick(index, k),
            LinecutAxis::Beta => pick(k, index),
        })
        .collect();
    Ok(Linecut {
        fixed_axis: axis,
        fixed_index: index,
        fixed_angle: match axis {
            LinecutAxis::Gamma => landscape.gamma_axis[index],
            LinecutAxis::Beta => landscape.beta_axis[index],
        },
        rows,
    })
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub levels: usize,
    pub optimizers: Vec<OptimizerKind>,
    pub runs: usize,
    pub setup: EvalSetup,
    pub threshold: f64,
    pub max_calls: usize,
    pub base_seed: u64,
}

impl BenchmarkConfig {
    pub fn new(levels: usize, setup: EvalSetup) -> Self {
        BenchmarkConfig {
            levels,
            optimizers: vec![
                OptimizerKind::NelderMead,
                OptimizerKind::CmaEs,
                OptimizerKind::GpBayes,
            ],
            runs: 200,
            setup,
            threshold: -0.95,
            max_calls: OptimizerConfig::default().max_calls,
            base_seed: 0,
        }
    }
}

/// Histogram bin width for final solution probabilities.
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;

/// Aggregate statistics for one optimizer over all restarts.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerStats {
    pub optimizer: String,
    pub runs: usize,
    pub converged_runs: usize,
    pub convergence_fraction: f64,
    /// Mean/std of calls-to-convergence over converged runs (sample std).
    pub calls_mean: Option<f64>,
    pub calls_std: Option<f64>,
    /// Highest final solution probability across runs; a run's final state
    /// is its best-F evaluation.
    pub best_p_solution: f64,
    pub histogram_bin_width: f64,
    /// Counts of final solution probabilities per bin over [0, 1].
    pub histogram: Vec<u64>,
    /// Call-indexed averages of the best-so-far cost (and the solution
    /// probability at that incumbent) over converged runs only; shorter runs
    /// carry their final value forward. Incumbent curves rather than raw
    /// evaluations, so explorative probes late in a run do not mask progress.
    pub avg_f_trajectory: Vec<f64>,
    pub avg_p_trajectory: Vec<f64>,
}

/// Recomputes per-optimizer statistics from raw runs; this is the only code
/// path producing report numbers, so stored reports always match the runs.
pub fn stats_from_runs(kind: OptimizerKind, runs: &[OptimizationRun]) -> OptimizerStats {
    let converged: Vec<&OptimizationRun> = runs.iter().filter(|r| r.converged).collect();
    let calls: Vec<f64> = converged
        .iter()
        .map(|r| r.calls_to_convergence.expect("converged run has a count") as f64)
        .collect();
    let calls_mean = if calls.is_empty() {
        None
    } else {
        Some(calls.iter().sum::<f64>() / calls.len() as f64)
    };
    let calls_std = match (calls_mean, calls.len()) {
        (Some(mean), n) if n >= 2 => {
            Some((calls.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt())
        }
        _ => None,
    };
    let bins = (1.0 / HISTOGRAM_BIN_WIDTH).round() as usize;
    let mut histogram = vec![0u64; bins];
    for run in runs {
        let bin = ((run.best_p_solution / HISTOGRAM_BIN_WIDTH).floor() as usize).min(bins - 1);
        histogram[bin] += 1;
    }
    let max_len = converged
        .iter()
        .map(|r| r.trajectory.len())
        .max()
        .unwrap_or(0);
    let mut avg_f_trajectory = vec![0.0; max_len];
    let mut avg_p_trajectory = vec![0.0; max_len];
    if !converged.is_empty() {
        // Incumbent curves per run: best F seen so far and the solution
        // probability at that incumbent evaluation.
        let incumbents: Vec<(Vec<f64>, Vec<f64>)> = converged
            .iter()
            .map(|run| {
                let mut best_f = Vec::with_capacity(run.trajectory.len());
                let mut p_at_best = Vec::with_capacity(run.trajectory.len());
                let mut best: Option<(f64, f64)> = None;
                for point in &run.trajectory {
                    if best.is_none_or(|(f, _)| point.f < f) {
                        best = Some((point.f, point.p_solution));
                    }
                    let (f, p) = best.expect("set above");
                    best_f.push(f);
                    p_at_best.push(p);
                }
                (best_f, p_at_best)
            })
            .collect();
        for t in 0..max_len {
            let mut f_sum = 0.0;
            let mut p_sum = 0.0;
            for (best_f, p_at_best) in &incumbents {
                let idx = t.min(best_f.len() - 1);
                f_sum += best_f[idx];
                p_sum += p_at_best[idx];
            }
            avg_f_trajectory[t] = f_sum / converged.len() as f64;
            avg_p_trajectory[t] = p_sum / converged.len() as f64;
        }
    }
    OptimizerStats {
        optimizer: kind.label().to_string(),
        runs: runs.len(),
        converged_runs: converged.len(),
        convergence_fraction: converged.len() as f64 / runs.len().max(1) as f64,
        calls_mean,
        calls_std,
        best_p_solution: runs
            .iter()
            .map(|r| r.best_p_solution)
            .fold(f64::NEG_INFINITY, f64::max),
        histogram_bin_width: HISTOGRAM_BIN_WIDTH,
        histogram,
        avg_f_trajectory,
        avg_p_trajectory,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub problem: Option<String>,
    pub levels: usize,
    pub runs: usize,
    pub backend: String,
    pub shots: String,
    pub threshold: f64,
    pub max_calls: usize,
    pub base_seed: u64,
    pub rng: String,
    pub optimizers: Vec<OptimizerStats>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Raw benchmark output: the aggregate report plus every run per optimizer.
#[derive(Debug)]
pub struct BenchmarkOutput {
    pub report: BenchmarkReport,
    pub runs: Vec<(OptimizerKind, Vec<OptimizationRun>)>,
}

impl BenchmarkOutput {
    /// Writes `report.json` plus `runs/<optimizer>_<index>.jsonl`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir.join("runs"))?;
        fs::write(dir.join("report.json"), self.report.to_json())?;
        for (kind, runs) in &self.runs {
            for (k, run) in runs.iter().enumerate() {
                let name = format!("{}_{:03}.jsonl", kind.label(), k);
                fs::write(dir.join("runs").join(name), run.to_jsonl())?;
            }
        }
        Ok(())
    }
}

/// Uniform start in `[0, pi)^2p`, shared by every optimizer for restart `k`.
pub fn restart_start(base_seed: u64, k: usize, levels: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base_seed, STREAM_START, k as u64));
    (0..2 * levels)
        .map(|_| rng.gen::<f64>() * std::f64::consts::PI)
        .collect()
}

/// Dispatches one run: Nelder-Mead and CMA-ES take the start point, the
/// GP optimizer works on the `[0, pi)^2p` box directly.
pub fn run_optimizer(
    kind: OptimizerKind,
    objective: &mut dyn Objective,
    start: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizationRun, OptimizerError> {
    match kind {
        OptimizerKind::NelderMead => nelder_mead(objective, start, config),
        OptimizerKind::CmaEs => cma_es(objective, start, config),
        OptimizerKind::GpBayes => {
            let bounds = vec![(0.0, std::f64::consts::PI); objective.dim()];
            gp_bayes_opt(objective, &bounds, config)
        }
    }
}

/// Runs `runs` restarts of every optimizer against the model with identical
/// start sets and disjoint seed streams; restarts execute in parallel and
/// aggregate deterministically.
pub fn run_benchmark(
    model: &IsingModel,
    solutions: &[Selection],
    problem_name: Option<&str>,
    config: &BenchmarkConfig,
) -> Result<BenchmarkOutput, HarnessError> {
    if config.threshold >= 0.0 {
        return Err(HarnessError::BadThreshold(config.threshold));
    }
    if config.optimizers.is_empty() {
        return Err(HarnessError::NoOptimizers);
    }
    if config.runs == 0 {
        return Err(HarnessError::NoRuns);
    }
    if config.levels == 0 {
        return Err(HarnessError::NoLevels);
    }
    config.setup.validate(model.num_spins())?;

    let tasks: Vec<(usize, usize)> = (0..config.optimizers.len())
        .flat_map(|o| (0..config.runs).map(move |k| (o, k)))
        .collect();
    let results: Vec<Result<OptimizationRun, HarnessError>> = tasks
        .par_iter()
        .map(|&(opt_index, k)| {
            let kind = config.optimizers[opt_index];
            let start = restart_start(config.base_seed, k, config.levels);
            let objective_seed = derive_seed(config.base_seed, STREAM_OBJECTIVE, k as u64);
            let optimizer_seed = derive_seed(
                config.base_seed,
                STREAM_OPTIMIZER,
                (opt_index * config.runs + k) as u64,
            );
            let mut objective = QaoaObjective::new(
                model,
                solutions,
                config.levels,
                &config.setup,
                objective_seed,
            )?;
            let optimizer_config = OptimizerConfig {
                max_calls: config.max_calls,
                convergence_threshold: config.threshold,
                seed: optimizer_seed,
            };
            Ok(run_optimizer(
                kind,
                &mut objective,
                &start,
                &optimizer_config,
            )?)
        })
        .collect();

    let mut per_optimizer: Vec<(OptimizerKind, Vec<OptimizationRun>)> = config
        .optimizers
        .iter()
        .map(|&kind| (kind, Vec::with_capacity(config.runs)))
        .collect();
    for (&(opt_index, _), result) in tasks.iter().zip(results) {
        per_optimizer[opt_index].1.push(result?);
    }

    let optimizers = per_optimizer
        .iter()
        .map(|(kind, runs)| stats_from_runs(*kind, runs))
        .collect();
    Ok(BenchmarkOutput {
        report: BenchmarkReport {
            problem: problem_name.map(str::to_string),
            levels: config.levels,
            runs: config.runs,
            backend: config.setup.backend.descriptor().to_string(),
            shots: config.setup.shots.descriptor(),
            threshold: config.threshold,
            max_calls: config.max_calls,
            base_seed: config.base_seed,
            rng: RNG_ALGORITHM.to_string(),
            optimizers,
        },
        runs: per_optimizer,
    })
}

// ---------------------------------------------------------------------------
// Fidelity prediction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PredictionRow {
    pub levels: usize,
    pub tally: GateTally,
    pub predicted_fidelity: f64,
}

/// Builds circuits at reference angles for each level count, tallies gates
/// after the peephole pass, and applies the fidelity product. Deeper
/// circuits only add gates, so predictions decrease with `p`.
pub fn predict_and_compare(
    model: &IsingModel,
    p_values: &[usize],
    noise: &NoiseModel,
) -> Vec<PredictionRow> {
    p_values
        .iter()
        .map(|&p| {
            let angles =
                QaoaAngles::new(vec![PREDICT_GAMMA; p.max(1)], vec![PREDICT_BETA; p.max(1)])
                    .expect("constant angles are valid");
            let tally = build_qaoa_circuit(model, &angles).tally();
            let predicted_fidelity = predict_circuit_fidelity(&tally, noise);
            PredictionRow {
                levels: p,
                tally,
                predicted_fidelity,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

fn state_labels(n: usize) -> Vec<String> {
    (0..1usize << n)
        .map(|idx| Selection::from_index(idx, n).to_string())
        .collect()
}

/// `landscape.csv`: `gamma,beta,F,P_00,...` one row per grid cell, gamma
/// outer, beta inner.
pub fn landscape_csv(landscape: &Landscape) -> String {
    let n = landscape.num_qubits();
    let mut out = String::from("gamma,beta,F");
    for label in state_labels(n) {
        write!(out, ",P_{label}").unwrap();
    }
    out.push('\n');
    for g in 0..landscape.resolution {
        for b in 0..landscape.resolution {
            write!(
                out,
                "{},{},{}",
                landscape.gamma_axis[g], landscape.beta_axis[b], landscape.f_grid[g][b]
            )
            .unwrap();
            for state in 0..landscape.prob_grids.len() {
                write!(out, ",{}", landscape.prob_grids[state][g][b]).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// `linecut.csv`: the varying angle plus all channels.
pub fn linecut_csv(cut: &Linecut, n: usize) -> String {
    let varying = match cut.fixed_axis {
        LinecutAxis::Gamma => "beta",
        LinecutAxis::Beta => "gamma",
    };
    let mut out = format!("{varying},F");
    for label in state_labels(n) {
        write!(out, ",P_{label}").unwrap();
    }
    out.push('\n');
    for row in &cut.rows {
        write!(out, "{},{}", row.angle, row.f).unwrap();
        for p in &row.probs {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Landscape metadata: provenance plus the grid argmin and the linecut
/// position chosen from it.
#[derive(Debug, Serialize)]
pub struct LandscapeMeta<'a> {
    pub problem: Option<&'a str>,
    pub resolution: usize,
    pub backend: String,
    pub shots: String,
    pub seed: u64,
    pub rng: &'static str,
    pub argmin_gamma_index: usize,
    pub argmin_beta_index: usize,
    pub argmin_gamma: f64,
    pub argmin_beta: f64,
    pub min_f: f64,
    pub linecut_axis: LinecutAxis,
    pub linecut_index: usize,
}

/// Writes `landscape.csv`, `linecut.csv` (through the argmin gamma column)
/// and `meta.json` into `dir`.
pub fn write_landscape_outputs(
    landscape: &Landscape,
    problem: Option<&str>,
    setup: &EvalSetup,
    seed: u64,
    dir: &Path,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let (g_idx, b_idx) = landscape.argmin();
    let cut = linecut(landscape, LinecutAxis::Gamma, g_idx)?;
    let meta = LandscapeMeta {
        problem,
        resolution: landscape.resolution,
        backend: setup.backend.descriptor().to_string(),
        shots: setup.shots.descriptor(),
        seed,
        rng: RNG_ALGORITHM,
        argmin_gamma_index: g_idx,
        argmin_beta_index: b_idx,
        argmin_gamma: landscape.gamma_axis[g_idx],
        argmin_beta: landscape.beta_axis[b_idx],
        min_f: landscape.f_grid[g_idx][b_idx],
        linecut_axis: LinecutAxis::Gamma,
        linecut_index: g_idx,
    };
    fs::write(dir.join("landscape.csv"), landscape_csv(landscape))?;
    fs::write(
        dir.join("linecut.csv"),
        linecut_csv(&cut, landscape.num_qubits()),
    )?;
    fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("meta serialization cannot fail"),
    )?;
    Ok(())
}

/// Prediction table CSV: `p,h,x,rx,rz,cz,predicted_fidelity`.
pub fn prediction_csv(rows: &[PredictionRow]) -> String {
    let mut out = String::from("p,h,x,rx,rz,cz,predicted_fidelity\n");
    for row in rows {
        let (h, x, rx, rz, cz) = row.tally.totals();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.levels, h, x, rx, rz, cz, row.predicted_fidelity
        )
        .unwrap();
    }
    out
}

/// Parses a trajectory JSONL file back into a run (bookkeeping recomputed).
pub fn run_from_jsonl(text: &str, threshold: f64) -> Result<OptimizationRun, serde_json::Error> {
    #[derive(serde::Deserialize)]
    struct Row {
        call_index: usize,
        angles: Vec<f64>,
        #[serde(rename = "F")]
        f: f64,
        #[serde(rename = "P_solution")]
        p_solution: f64,
    }
    let mut trajectory = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(line)?;
        trajectory.push(TrajectoryPoint {
            call_index: row.call_index,
            angles: row.angles,
            f: row.f,
            p_solution: row.p_solution,
        });
    }
    Ok(OptimizationRun::from_trajectory(trajectory, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactcover::{brute_force_covers, builtin_problem};
    use crate::ising::map_to_ising;
    use approx::assert_abs_diff_eq;

    fn problem(id: &str) -> (IsingModel, Vec<Selection>) {
        let inst = builtin_problem(id).unwrap();
        let model = map_to_ising(&inst);
        let solutions = brute_force_covers(&inst).unwrap().into_iter().collect();
        (model, solutions)
    }

    #[test]
    fn objective_logs_solution_probability() {
        let (model, solutions) = problem("A");
        let setup = EvalSetup::ideal_exact();
        let mut obj = QaoaObjective::new(&model, &solutions, 1, &setup, 0).unwrap();
        let out = obj.evaluate(&[0.0, 0.0]);
        assert_abs_diff_eq!(out.f, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.p_solution, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn objective_wraps_coordinates() {
        let (model, solutions) = problem("A");
        let setup = EvalSetup::ideal_exact();
        let mut obj = QaoaObjective::new(&model, &solutions, 1, &setup, 0).unwrap();
        let pi = std::f64::consts::PI;
        let wrapped = obj.evaluate(&[0.3 + pi, 0.4]);
        let plain = obj.evaluate(&[0.3, 0.4]);
        assert_abs_diff_eq!(wrapped.f, plain.f, epsilon = 1e-12);
        assert_abs_diff_eq!(wrapped.evaluated_at[0], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn small_grid_has_expected_shape() {
        let (model, _) = problem("A");
        let landscape = grid_search(&model, 1, 5, &EvalSetup::ideal_exact(), 0).unwrap();
        assert_eq!(landscape.gamma_axis.len(), 5);
        assert_abs_diff_eq!(landscape.gamma_axis[1], std::f64::consts::PI / 5.0);
        assert_eq!(landscape.f_grid.len(), 5);
        assert_eq!(landscape.prob_grids.len(), 4);
        // gamma = 0 row is flat zero cost.
        for b in 0..5 {
            assert_abs_diff_eq!(landscape.f_grid[0][b], 0.0, epsilon = 1e-12);
        }
        assert!(grid_search(&model, 2, 5, &EvalSetup::ideal_exact(), 0).is_err());
    }

    #[test]
    fn linecut_matches_grid_entries() {
        let (model, _) = problem("A");
        let landscape = grid_search(&model, 1, 7, &EvalSetup::ideal_exact(), 0).unwrap();
        let cut = linecut(&landscape, LinecutAxis::Gamma, 3).unwrap();
        assert_eq!(cut.rows.len(), 7);
        for (b, row) in cut.rows.iter().enumerate() {
            assert_eq!(row.f, landscape.f_grid[3][b]);
            assert_eq!(row.angle, landscape.beta_axis[b]);
            for (s, p) in row.probs.iter().enumerate() {
                assert_eq!(*p, landscape.prob_grids[s][3][b]);
            }
        }
        let cut_b = linecut(&landscape, LinecutAxis::Beta, 2).unwrap();
        for (g, row) in cut_b.rows.iter().enumerate() {
            assert_eq!(row.f, landscape.f_grid[g][2]);
        }
        assert!(linecut(&landscape, LinecutAxis::Gamma, 7).is_err());
    }

    #[test]
    fn grid_is_deterministic_per_seed() {
        let (model, _) = problem("B");
        let setup = EvalSetup::ideal_sampled(200);
        let a = grid_search(&model, 1, 4, &setup, 9).unwrap();
        let b = grid_search(&model, 1, 4, &setup, 9).unwrap();
        assert_eq!(landscape_csv(&a), landscape_csv(&b));
    }

    #[test]
    fn optimal_gamma_linecut_peaks_at_half_solution_probability() {
        // Problem A at p = 1: along the argmin gamma column the solution
        // probability P("10") tops out near one half.
        let (model, _) = problem("A");
        let landscape = grid_search(&model, 1, 61, &EvalSetup::ideal_exact(), 0).unwrap();
        let (g, _) = landscape.argmin();
        let cut = linecut(&landscape, LinecutAxis::Gamma, g).unwrap();
        let solution_index = Selection::from_bit_string("10").unwrap().to_index();
        let max_p = cut
            .rows
            .iter()
            .map(|row| row.probs[solution_index])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((max_p - 0.5).abs() < 0.01, "peak P(10) = {max_p}");
    }

    #[test]
    fn problem_d_landscape_is_exchange_symmetric() {
        // h = 0 for problem D: swapping the qubits maps P("10") onto P("01").
        let (model, _) = problem("D");
        let landscape = grid_search(&model, 1, 9, &EvalSetup::ideal_exact(), 0).unwrap();
        for g in 0..9 {
            for b in 0..9 {
                assert_abs_diff_eq!(
                    landscape.prob_grids[1][g][b],
                    landscape.prob_grids[2][g][b],
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn benchmark_smoke_and_determinism() {
        let (model, solutions) = problem("A");
        let mut config = BenchmarkConfig::new(1, EvalSetup::ideal_sampled(300));
        config.runs = 4;
        config.max_calls = 40;
        config.base_seed = 17;
        config.optimizers = vec![OptimizerKind::NelderMead, OptimizerKind::CmaEs];
        let a = run_benchmark(&model, &solutions, Some("A"), &config).unwrap();
        let b = run_benchmark(&model, &solutions, Some("A"), &config).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.runs.len(), 2);
        assert_eq!(a.runs[0].1.len(), 4);
        for (_, runs) in &a.runs {
            for run in runs {
                assert!(run.trajectory.len() <= 40);
            }
        }
        // The start set is a pure function of (base_seed, restart index), so
        // every optimizer receives the same starts. Nelder-Mead evaluates its
        // start first; CMA-ES only samples around it.
        let start = restart_start(config.base_seed, 0, config.levels);
        assert_eq!(restart_start(config.base_seed, 0, config.levels), start);
        for (s, logged) in start.iter().zip(a.runs[0].1[0].trajectory[0].angles.iter()) {
            assert_abs_diff_eq!(s, logged, epsilon = 1e-12);
        }
    }

    #[test]
    fn stats_recompute_from_jsonl() {
        let (model, solutions) = problem("A");
        let mut config = BenchmarkConfig::new(1, EvalSetup::ideal_sampled(300));
        config.runs = 3;
        config.max_calls = 30;
        config.optimizers = vec![OptimizerKind::NelderMead];
        let out = run_benchmark(&model, &solutions, Some("A"), &config).unwrap();
        let runs: Vec<OptimizationRun> = out.runs[0]
            .1
            .iter()
            .map(|r| run_from_jsonl(&r.to_jsonl(), config.threshold).unwrap())
            .collect();
        let recomputed = stats_from_runs(OptimizerKind::NelderMead, &runs);
        let stored = &out.report.optimizers[0];
        assert_eq!(recomputed.converged_runs, stored.converged_runs);
        assert_eq!(recomputed.histogram, stored.histogram);
        assert_abs_diff_eq!(
            recomputed.convergence_fraction,
            stored.convergence_fraction,
            epsilon = 1e-12
        );
        match (recomputed.calls_mean, stored.calls_mean) {
            (Some(a), Some(b)) => assert_abs_diff_eq!(a, b, epsilon = 1e-12),
            (a, b) => assert_eq!(a.is_none(), b.is_none()),
        }
        for (a, b) in recomputed
            .avg_f_trajectory
            .iter()
            .zip(stored.avg_f_trajectory.iter())
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn prediction_rows_decrease_with_depth() {
        let (model, _) = problem("A");
        let noise = NoiseModel::reference_two_qubit();
        let rows = predict_and_compare(&model, &[1, 2, 3], &noise);
        assert_eq!(rows.len(), 3);
        assert!(rows[0].predicted_fidelity > rows[1].predicted_fidelity);
        assert!(rows[1].predicted_fidelity > rows[2].predicted_fidelity);
        let ideal_rows = predict_and_compare(&model, &[1, 2, 3], &NoiseModel::ideal(2));
        for row in ideal_rows {
            assert_abs_diff_eq!(row.predicted_fidelity, 1.0);
        }
    }

    #[test]
    fn csv_headers() {
        let (model, _) = problem("A");
        let landscape = grid_search(&model, 1, 3, &EvalSetup::ideal_exact(), 0).unwrap();
        let csv = landscape_csv(&landscape);
        assert!(csv.starts_with("gamma,beta,F,P_00,P_01,P_10,P_11\n"));
        assert_eq!(csv.lines().count(), 1 + 9);
        let cut = linecut(&landscape, LinecutAxis::Gamma, 0).unwrap();
        let cut_csv = linecut_csv(&cut, 2);
        assert!(cut_csv.starts_with("beta,F,P_00,P_01,P_10,P_11\n"));
        let rows = predict_and_compare(&model, &[1], &NoiseModel::ideal(2));
        assert!(prediction_csv(&rows).starts_with("p,h,x,rx,rz,cz,predicted_fidelity\n"));
    }

    #[test]
    fn threshold_validation() {
        let (model, solutions) = problem("A");
        let mut config = BenchmarkConfig::new(1, EvalSetup::ideal_exact());
        config.threshold = 0.1;
        assert!(matches!(
            run_benchmark(&model, &solutions, None, &config).unwrap_err(),
            HarnessError::BadThreshold(_)
        ));
    }
}
