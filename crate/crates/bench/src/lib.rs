//! Shared fixtures for the criterion benchmarks.

use num_rational::Rational64;
use qaoa_core::ising::IsingModel;

/// Chain-coupled model with half-integer coefficients, any width.
pub fn chain_model(n: usize) -> IsingModel {
    let half = Rational64::new(1, 2);
    let couplings = (0..n.saturating_sub(1)).map(|i| ((i, i + 1), half));
    IsingModel::new(n, vec![-half; n], couplings, Rational64::new(0, 1))
}
