//! Gradient-free optimizers over the angle objective.
//!
//! Three methods share one evaluation contract: every call is logged in
//! order, no optimizer ever exceeds its call budget, and convergence
//! bookkeeping (threshold crossing and calls-to-convergence) is recomputed
//! from the trajectory so it can never drift from the stored runs.

mod cma_es;
mod gp_bayes;
mod nelder_mead;

pub use cma_es::cma_es;
pub use gp_bayes::gp_bayes_opt;
pub use nelder_mead::nelder_mead;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("objective dimension must be at least 1")]
    ZeroDimension,
    #[error("call budget {budget} is below dimension + 1 = {min}")]
    BudgetTooSmall { budget: usize, min: usize },
    #[error("start vector length {got} does not match objective dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("Gaussian-process optimization supports at most {max} dimensions, got {got}")]
    TooManyDimensions { got: usize, max: usize },
    #[error("bounds must satisfy low < high on every axis")]
    BadBounds,
}

/// One objective evaluation: the cost, the solution-state probability that
/// rides along for bookkeeping, and the point as actually evaluated (after
/// any wrapping the objective applies).
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub f: f64,
    pub p_solution: f64,
    pub evaluated_at: Vec<f64>,
}

/// A black-box objective over real vectors. Implementations are expected to
/// be deterministic given their construction-time seed and the sequence of
/// calls made to them.
pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&mut self, x: &[f64]) -> EvalOutcome;
}

/// Objective adapter for plain functions (tests, classical benchmarks).
pub struct FnObjective<F: FnMut(&[f64]) -> f64> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, x: &[f64]) -> EvalOutcome {
        EvalOutcome {
            f: (self.f)(x),
            p_solution: 0.0,
            evaluated_at: x.to_vec(),
        }
    }
}

/// Which optimizer to run; used for dispatch and report labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[serde(rename = "nm")]
    NelderMead,
    #[serde(rename = "cmaes")]
    CmaEs,
    #[serde(rename = "bgp")]
    GpBayes,
}

impl OptimizerKind {
    pub fn label(&self) -> &'static str {
        match self {
            OptimizerKind::NelderMead => "nm",
            OptimizerKind::CmaEs => "cmaes",
            OptimizerKind::GpBayes => "bgp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nm" | "nelder-mead" | "neldermead" => Some(OptimizerKind::NelderMead),
            "cmaes" | "cma-es" | "cma" => Some(OptimizerKind::CmaEs),
            "bgp" | "gp" | "bayes" => Some(OptimizerKind::GpBayes),
            _ => None,
        }
    }
}

/// Shared optimizer settings. Method-specific constants (simplex
/// coefficients, CMA learning rates, GP internals) are fixed by the
/// respective implementations.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    /// Hard evaluation budget per run.
    pub max_calls: usize,
    /// A run counts as converged once some evaluation falls below this.
    pub convergence_threshold: f64,
    /// Seed for optimizer-internal randomness (unused by Nelder-Mead).
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_calls: 300,
            convergence_threshold: -0.95,
            seed: 0,
        }
    }
}

/// One logged evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub call_index: usize,
    pub angles: Vec<f64>,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "P_solution")]
    pub p_solution: f64,
}

/// Full record of a single optimization run.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizationRun {
    pub trajectory: Vec<TrajectoryPoint>,
    pub best_angles: Vec<f64>,
    pub best_f: f64,
    /// Probability of the solution state at the best evaluation; this is the
    /// run's reported final state.
    pub best_p_solution: f64,
    /// 1-based number of calls needed to first cross the threshold.
    pub calls_to_convergence: Option<usize>,
    pub converged: bool,
}

impl OptimizationRun {
    /// Recomputes convergence bookkeeping from a trajectory.
    pub fn from_trajectory(trajectory: Vec<TrajectoryPoint>, threshold: f64) -> Self {
        assert!(!trajectory.is_empty(), "runs must evaluate at least once");
        let mut best = 0;
        for (i, point) in trajectory.iter().enumerate() {
            if point.f < trajectory[best].f {
                best = i;
            }
        }
        let calls_to_convergence = trajectory
            .iter()
            .position(|p| p.f < threshold)
            .map(|i| i + 1);
        OptimizationRun {
            best_angles: trajectory[best].angles.clone(),
            best_f: trajectory[best].f,
            best_p_solution: trajectory[best].p_solution,
            converged: calls_to_convergence.is_some(),
            calls_to_convergence,
            trajectory,
        }
    }

    /// Trajectory JSONL: one line per evaluation.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for point in &self.trajectory {
            out.push_str(&serde_json::to_string(point).expect("trajectory point serializes"));
            out.push('\n');
        }
        out
    }
}

/// Budget-enforcing evaluation wrapper used by all optimizers.
pub(crate) struct Recorder<'a> {
    objective: &'a mut dyn Objective,
    trajectory: Vec<TrajectoryPoint>,
    max_calls: usize,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(objective: &'a mut dyn Objective, max_calls: usize) -> Self {
        Recorder {
            objective,
            trajectory: Vec::with_capacity(max_calls.min(4096)),
            max_calls,
        }
    }

    /// Evaluates unless the budget is spent; `None` signals exhaustion.
    pub(crate) fn evaluate(&mut self, x: &[f64]) -> Option<f64> {
        if self.trajectory.len() >= self.max_calls {
            return None;
        }
        let outcome = self.objective.evaluate(x);
        self.trajectory.push(TrajectoryPoint {
            call_index: self.trajectory.len(),
            angles: outcome.evaluated_at,
            f: outcome.f,
            p_solution: outcome.p_solution,
        });
        Some(outcome.f)
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.trajectory.len() >= self.max_calls
    }

    pub(crate) fn finish(self, threshold: f64) -> OptimizationRun {
        OptimizationRun::from_trajectory(self.trajectory, threshold)
    }
}

pub(crate) fn check_common(dim: usize, config: &OptimizerConfig) -> Result<(), OptimizerError> {
    if dim == 0 {
        return Err(OptimizerError::ZeroDimension);
    }
    if config.max_calls < dim + 1 {
        return Err(OptimizerError::BudgetTooSmall {
            budget: config.max_calls,
            min: dim + 1,
        });
    }
    Ok(())
}
