//! Simulation and benchmarking toolkit for the quantum approximate
//! optimization algorithm (QAOA) applied to exact-cover problems.
//!
//! The pipeline mirrors a small quantum processor end to end:
//!
//! * [`exactcover`] — problem instances, a brute-force cover oracle, and the
//!   four built-in two-subset problems.
//! * [`ising`] — penalty mapping from exact cover to Ising coefficients,
//!   integer-spectrum normalization, and exhaustive ground-state search.
//! * [`simulator`] — gate-level statevector simulation of the QAOA circuit
//!   plus a direct phase/mixer evolution used as an equivalence oracle.
//! * [`noise`] — depolarizing gate errors on a density matrix, readout
//!   confusion matrices with mitigation, and fidelity-product predictions.
//! * [`estimator`] — shot sampling and cost estimation, i.e. the
//!   "quantum processor" side of the optimization loop.
//! * [`optimizers`] — Nelder-Mead, CMA-ES, and Gaussian-process Bayesian
//!   optimization, all seedable and budget-bounded.
//! * [`harness`] — landscape grids, linecuts, multi-restart optimizer
//!   benchmarks, fidelity predictions, and their on-disk formats.

pub mod estimator;
pub mod exactcover;
pub mod harness;
pub mod ising;
pub mod noise;
pub mod optimizers;
pub mod simulator;

pub use estimator::{Backend, CostEstimate, ShotRecord, Shots};
pub use exactcover::{ExactCoverInstance, Selection};
pub use ising::IsingModel;
pub use noise::{ConfusionMatrix, DensityMatrix, NoiseModel};
pub use optimizers::{Objective, OptimizationRun, OptimizerConfig, OptimizerKind};
pub use simulator::{Circuit, Gate, QaoaAngles, Statevector};

/// Identifier of the pseudo-random generator used everywhere shots are
/// drawn or optimizer randomness is needed. Recorded in output artifacts so
/// results stay bit-reproducible.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Stateless seed derivation: disjoint streams for restarts, grid cells and
/// shot batches all hang off one base seed. SplitMix64 finalizer.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
