//! Covariance matrix adaptation evolution strategy, the standard
//! `(mu/mu_w, lambda)` variant with cumulative step-size adaptation and
//! rank-one plus rank-mu covariance updates.
//!
//! Population `lambda = 4 + floor(3 ln d)`, log-rank recombination weights,
//! and the usual learning-rate formulas. Initial step size is `pi/4`;
//! terminates on budget exhaustion or when the step size drops below `1e-5`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_common, Objective, OptimizationRun, OptimizerConfig, OptimizerError, Recorder};

const INITIAL_SIGMA: f64 = PI / 4.0;
const SIGMA_TOL: f64 = 1e-5;

struct Strategy {
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_cov_path: f64,
    c_rank_one: f64,
    c_rank_mu: f64,
    chi_n: f64,
}

impl Strategy {
    fn new(dim: usize) -> Self {
        let d = dim as f64;
        let lambda = 4 + (3.0 * d.ln()).floor() as usize;
        let mu = lambda / 2;
        let mut weights: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (d + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_cov_path = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
        let c_rank_one = 2.0 / ((d + 1.3).powi(2) + mu_eff);
        let c_rank_mu = (1.0 - c_rank_one)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0).powi(2) + mu_eff));
        let chi_n = d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
        Strategy {
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_cov_path,
            c_rank_one,
            c_rank_mu,
            chi_n,
        }
    }
}

pub fn cma_es(
    objective: &mut dyn Objective,
    start: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizationRun, OptimizerError> {
    let dim = objective.dim();
    check_common(dim, config)?;
    if start.len() != dim {
        return Err(OptimizerError::DimensionMismatch {
            got: start.len(),
            expected: dim,
        });
    }

    let strat = Strategy::new(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rec = Recorder::new(objective, config.max_calls);

    let mut mean = DVector::from_column_slice(start);
    let mut sigma = INITIAL_SIGMA;
    let mut cov = DMatrix::<f64>::identity(dim, dim);
    let mut path_sigma = DVector::<f64>::zeros(dim);
    let mut path_cov = DVector::<f64>::zeros(dim);
    let mut generation = 0usize;

    'outer: while !rec.exhausted() && sigma > SIGMA_TOL {
        // Eigendecomposition C = B diag(D^2) B^T, refreshed every
        // generation; cheap at QAOA dimensions.
        let eigen = nalgebra::SymmetricEigen::new(cov.clone());
        let d_scale: DVector<f64> = eigen.eigenvalues.map(|v| v.max(1e-20).sqrt());
        let basis = eigen.eigenvectors;

        let mut offspring: Vec<(f64, DVector<f64>)> = Vec::with_capacity(strat.lambda);
        for _ in 0..strat.lambda {
            let z = DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)));
            let y = &basis * z.component_mul(&d_scale);
            let x = &mean + sigma * &y;
            let Some(f) = rec.evaluate(x.as_slice()) else {
                break 'outer;
            };
            offspring.push((f, y));
        }
        offspring.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut y_weighted = DVector::<f64>::zeros(dim);
        for (w, (_, y)) in strat.weights.iter().zip(offspring.iter()) {
            y_weighted += *w * y;
        }
        mean += sigma * &y_weighted;

        // C^{-1/2} y = B D^{-1} B^T y
        let inv_sqrt_y = &basis * (basis.transpose() * &y_weighted).component_div(&d_scale);
        path_sigma = (1.0 - strat.c_sigma) * &path_sigma
            + (strat.c_sigma * (2.0 - strat.c_sigma) * strat.mu_eff).sqrt() * inv_sqrt_y;

        generation += 1;
        let expected_decay = (1.0 - strat.c_sigma).powi(2 * generation as i32);
        let h_sigma = path_sigma.norm() / (1.0 - expected_decay).sqrt()
            < (1.4 + 2.0 / (dim as f64 + 1.0)) * strat.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };

        path_cov = (1.0 - strat.c_cov_path) * &path_cov
            + h * (strat.c_cov_path * (2.0 - strat.c_cov_path) * strat.mu_eff).sqrt() * &y_weighted;

        let mut rank_mu = DMatrix::<f64>::zeros(dim, dim);
        for (w, (_, y)) in strat.weights.iter().zip(offspring.iter().take(strat.mu)) {
            rank_mu += *w * y * y.transpose();
        }
        let stall_correction = (1.0 - h) * strat.c_cov_path * (2.0 - strat.c_cov_path);
        cov = (1.0 - strat.c_rank_one - strat.c_rank_mu) * &cov
            + strat.c_rank_one * (&path_cov * path_cov.transpose() + stall_correction * &cov)
            + strat.c_rank_mu * rank_mu;

        sigma *= ((strat.c_sigma / strat.d_sigma) * (path_sigma.norm() / strat.chi_n - 1.0)).exp();
    }

    Ok(rec.finish(config.convergence_threshold))
}
