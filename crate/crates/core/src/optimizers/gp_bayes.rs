//! Bayesian optimization with a Gaussian-process surrogate.
//!
//! Matern-5/2 kernel plus a white-noise term; hyperparameters (length scale,
//! signal and noise amplitudes) are refit every iteration by maximizing the
//! log marginal likelihood from five random restarts of a small local
//! simplex search in log space. The expected-improvement acquisition is
//! maximized by a 1000-point random search followed by a local polish. Ten
//! quasi-random initial evaluations (a rotated Halton set, shifted per seed)
//! seed the surrogate. Operates natively on a bounded box.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use super::{check_common, Objective, OptimizationRun, OptimizerConfig, OptimizerError, Recorder};

/// Dimension guard: GP fits are cubic in data and the acquisition search
/// loses coverage in high dimensions.
pub const GP_MAX_DIMENSIONS: usize = 10;

const INITIAL_POINTS: usize = 10;
const ACQ_CANDIDATES: usize = 1000;
const HYPER_RESTARTS: usize = 5;
const HYPER_LOCAL_EVALS: usize = 10;
const POLISH_EVALS: usize = 40;
const JITTER: f64 = 1e-10;

const HALTON_BASES: [u64; GP_MAX_DIMENSIONS] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

fn matern52(r_over_l: f64) -> f64 {
    let t = 5f64.sqrt() * r_over_l;
    (1.0 + t + t * t / 3.0) * (-t).exp()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `EI(x) = (f_best - mu) Phi(z) + s phi(z)` with `z = (f_best - mu)/s`.
fn expected_improvement(mu: f64, s: f64, f_best: f64) -> f64 {
    if s <= 0.0 {
        return (f_best - mu).max(0.0);
    }
    let z = (f_best - mu) / s;
    (f_best - mu) * normal_cdf(z) + s * normal_pdf(z)
}

/// Minimal budgeted simplex search for closures (hyperparameter fitting and
/// acquisition polish); unrelated to the public Nelder-Mead run contract.
fn local_simplex(
    f: &mut impl FnMut(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), eval(start, &mut evals)));
    for axis in 0..dim {
        if evals >= max_evals {
            break;
        }
        let mut x = start.to_vec();
        x[axis] += step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    while evals < max_evals && simplex.len() == dim + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|v| v.0[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(worst.0.iter())
            .map(|(c, w)| 2.0 * c - w)
            .collect();
        let fr = eval(&reflect, &mut evals);
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflect, fr);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(worst.0.iter())
                .map(|(c, w)| 0.5 * (c + w))
                .collect();
            if evals >= max_evals {
                break;
            }
            let fc = eval(&contract, &mut evals);
            if fc < worst.1 {
                simplex[dim] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if evals >= max_evals {
                        break;
                    }
                    let x: Vec<f64> = vertex
                        .0
                        .iter()
                        .zip(best.iter())
                        .map(|(v, b)| 0.5 * (v + b))
                        .collect();
                    let fv = eval(&x, &mut evals);
                    *vertex = (x, fv);
                }
            }
        }
    }
    simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex is nonempty")
}

struct FittedGp {
    length: f64,
    sigma_f2: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
}

/// Kernel matrix with only the lower triangle filled; Cholesky reads just
/// that part, which halves the exponential evaluations.
fn kernel_lower(dists: &DMatrix<f64>, length: f64, sigma_f2: f64, sigma_n2: f64) -> DMatrix<f64> {
    let m = dists.nrows();
    let mut k = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in j..m {
            k[(i, j)] = sigma_f2 * matern52(dists[(i, j)] / length);
        }
        k[(j, j)] += sigma_n2 + JITTER;
    }
    k
}

/// Negative log marginal likelihood; `+inf` when the kernel matrix is not
/// positive definite for the proposed hyperparameters.
fn negative_lml(
    dists: &DMatrix<f64>,
    y: &DVector<f64>,
    length: f64,
    sigma_f2: f64,
    sigma_n2: f64,
) -> f64 {
    let m = y.len();
    let Some(chol) = kernel_lower(dists, length, sigma_f2, sigma_n2).cholesky() else {
        return f64::INFINITY;
    };
    let alpha = chol.solve(y);
    let log_det: f64 = (0..m).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    0.5 * y.dot(&alpha) + log_det + 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn fit_gp(dists: &DMatrix<f64>, y: &DVector<f64>, box_diag: f64, rng: &mut ChaCha8Rng) -> FittedGp {
    let m = y.len();
    let spread = {
        let mean = y.mean();
        (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64)
            .sqrt()
            .max(1e-3)
    };
    let log_range = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> f64 {
        lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..HYPER_RESTARTS {
        let start = [
            log_range(rng, 0.05 * box_diag, 2.0 * box_diag),
            log_range(rng, 0.2 * spread, 5.0 * spread),
            log_range(rng, 0.01 * spread, spread),
        ];
        let mut objective = |theta: &[f64]| {
            negative_lml(
                dists,
                y,
                theta[0].exp(),
                theta[1].exp().powi(2),
                theta[2].exp().powi(2),
            )
        };
        let (theta, value) = local_simplex(&mut objective, &start, 0.5, HYPER_LOCAL_EVALS);
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((theta, value));
        }
    }
    let (theta, _) = best.expect("at least one restart ran");
    let (length, sigma_f2, sigma_n2) = (
        theta[0].exp(),
        theta[1].exp().powi(2),
        theta[2].exp().powi(2),
    );
    let chol = kernel_lower(dists, length, sigma_f2, sigma_n2)
        .cholesky()
        .expect("selected hyperparameters produced a PD kernel");
    let alpha = chol.solve(y);
    FittedGp {
        length,
        sigma_f2,
        chol,
        alpha,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Latent posterior mean and standard deviation at one point.
fn posterior(gp: &FittedGp, data: &[Vec<f64>], x: &[f64]) -> (f64, f64) {
    let m = data.len();
    let k_star = DVector::from_iterator(
        m,
        data.iter()
            .map(|xi| gp.sigma_f2 * matern52(distance(xi, x) / gp.length)),
    );
    let mu = k_star.dot(&gp.alpha);
    let v = gp
        .chol
        .l_dirty()
        .solve_lower_triangular(&k_star)
        .expect("Cholesky factor is invertible");
    let var = (gp.sigma_f2 - v.norm_squared()).max(1e-18);
    (mu, var.sqrt())
}

/// Expected improvement of the surrogate at each unseen point; runs on
/// random candidates, then polishes the best one locally within the box.
pub fn gp_bayes_opt(
    objective: &mut dyn Objective,
    bounds: &[(f64, f64)],
    config: &OptimizerConfig,
) -> Result<OptimizationRun, OptimizerError> {
    let dim = objective.dim();
    check_common(dim, config)?;
    if dim > GP_MAX_DIMENSIONS {
        return Err(OptimizerError::TooManyDimensions {
            got: dim,
            max: GP_MAX_DIMENSIONS,
        });
    }
    if bounds.len() != dim {
        return Err(OptimizerError::DimensionMismatch {
            got: bounds.len(),
            expected: dim,
        });
    }
    if bounds
        .iter()
        .any(|(lo, hi)| lo >= hi || !lo.is_finite() || !hi.is_finite())
    {
        return Err(OptimizerError::BadBounds);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rec = Recorder::new(objective, config.max_calls);
    let box_diag = bounds
        .iter()
        .map(|(lo, hi)| (hi - lo).powi(2))
        .sum::<f64>()
        .sqrt();
    let clamp = |x: &mut Vec<f64>| {
        for (xi, (lo, hi)) in x.iter_mut().zip(bounds.iter()) {
            *xi = xi.clamp(*lo, hi - 1e-12 * (hi - lo));
        }
    };

    let mut data: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let evaluate = |x: Vec<f64>,
                    rec: &mut Recorder,
                    data: &mut Vec<Vec<f64>>,
                    values: &mut Vec<f64>|
     -> bool {
        match rec.evaluate(&x) {
            Some(f) => {
                data.push(x);
                values.push(f);
                true
            }
            None => false,
        }
    };

    // Rotated Halton initialization: quasi-random coverage, shifted per seed
    // so independent restarts see different initial sets.
    let rotation: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    for k in 1..=INITIAL_POINTS {
        let mut x: Vec<f64> = (0..dim)
            .map(|j| {
                let u = (radical_inverse(k as u64, HALTON_BASES[j]) + rotation[j]).fract();
                bounds[j].0 + u * (bounds[j].1 - bounds[j].0)
            })
            .collect();
        clamp(&mut x);
        if !evaluate(x, &mut rec, &mut data, &mut values) {
            return Ok(rec.finish(config.convergence_threshold));
        }
    }

    while !rec.exhausted() {
        let m = data.len();
        // Normalize observations for hyperparameter search stability.
        let mean = values.iter().sum::<f64>() / m as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64)
            .sqrt()
            .max(1e-12);
        let y = DVector::from_iterator(m, values.iter().map(|v| (v - mean) / sd));
        let mut dists = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in j..m {
                dists[(i, j)] = distance(&data[i], &data[j]);
            }
        }
        let gp = fit_gp(&dists, &y, box_diag, &mut rng);
        let f_best = y.min();

        // Batched EI over random candidates.
        let candidates: Vec<Vec<f64>> = (0..ACQ_CANDIDATES)
            .map(|_| {
                (0..dim)
                    .map(|j| rng.gen_range(bounds[j].0..bounds[j].1))
                    .collect()
            })
            .collect();
        let mut k_star = DMatrix::zeros(m, ACQ_CANDIDATES);
        for (c, x) in candidates.iter().enumerate() {
            for (r, xi) in data.iter().enumerate() {
                k_star[(r, c)] = gp.sigma_f2 * matern52(distance(xi, x) / gp.length);
            }
        }
        let mu = k_star.transpose() * &gp.alpha;
        let v = gp
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_star)
            .expect("Cholesky factor is invertible");
        let mut best_idx = 0usize;
        let mut best_ei = f64::NEG_INFINITY;
        for c in 0..ACQ_CANDIDATES {
            let var = (gp.sigma_f2 - v.column(c).norm_squared()).max(1e-18);
            let ei = expected_improvement(mu[c], var.sqrt(), f_best);
            if ei > best_ei {
                best_ei = ei;
                best_idx = c;
            }
        }

        // Local EI polish from the best candidate.
        let mut neg_ei = |x: &[f64]| {
            let mut clamped = x.to_vec();
            clamp(&mut clamped);
            let (mu, s) = posterior(&gp, &data, &clamped);
            -expected_improvement(mu, s, f_best)
        };
        let (polished, _) = local_simplex(
            &mut neg_ei,
            &candidates[best_idx],
            0.05 * box_diag,
            POLISH_EVALS,
        );
        let mut next = polished;
        clamp(&mut next);
        if !evaluate(next, &mut rec, &mut data, &mut values) {
            break;
        }
    }

    Ok(rec.finish(config.convergence_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::FnObjective;
    use std::f64::consts::PI;

    #[test]
    fn halton_covers_unit_interval() {
        let points: Vec<f64> = (1..=8).map(|k| radical_inverse(k, 2)).collect();
        assert!(points.iter().all(|&p| (0.0..1.0).contains(&p)));
        // First few base-2 values are the van der Corput sequence.
        assert_eq!(points[0], 0.5);
        assert_eq!(points[1], 0.25);
        assert_eq!(points[2], 0.75);
    }

    #[test]
    fn expected_improvement_properties() {
        // No uncertainty, worse mean: zero improvement expected.
        assert_eq!(expected_improvement(1.0, 0.0, 0.0), 0.0);
        // Certain improvement.
        assert!(expected_improvement(-1.0, 0.0, 0.0) > 0.9999);
        // Uncertainty adds value at equal mean.
        assert!(expected_improvement(0.0, 1.0, 0.0) > 0.0);
    }

    #[test]
    fn one_dimensional_quadratic_on_bounded_interval() {
        let minimizer = 1.1;
        let mut obj = FnObjective::new(1, move |x: &[f64]| (x[0] - minimizer).powi(2));
        let config = OptimizerConfig {
            max_calls: 40,
            convergence_threshold: -1.0,
            seed: 3,
        };
        let run = gp_bayes_opt(&mut obj, &[(0.0, PI)], &config).unwrap();
        assert!(
            (run.best_angles[0] - minimizer).abs() < 0.05,
            "best at {}",
            run.best_angles[0]
        );
        assert_eq!(run.trajectory.len(), 40);
    }

    #[test]
    fn deterministic_given_seed() {
        let make = || FnObjective::new(2, |x: &[f64]| x[0].sin() + (x[1] - 1.0).powi(2));
        let config = OptimizerConfig {
            max_calls: 18,
            convergence_threshold: -10.0,
            seed: 21,
        };
        let bounds = [(0.0, PI), (0.0, PI)];
        let a = gp_bayes_opt(&mut make(), &bounds, &config).unwrap();
        let b = gp_bayes_opt(&mut make(), &bounds, &config).unwrap();
        for (p, q) in a.trajectory.iter().zip(b.trajectory.iter()) {
            assert_eq!(p.angles, q.angles);
        }
    }

    #[test]
    fn respects_bounds_and_budget() {
        let mut obj = FnObjective::new(2, |x: &[f64]| x[0] + x[1]);
        let config = OptimizerConfig {
            max_calls: 15,
            convergence_threshold: -10.0,
            seed: 0,
        };
        let bounds = [(0.0, 1.0), (2.0, 3.0)];
        let run = gp_bayes_opt(&mut obj, &bounds, &config).unwrap();
        assert_eq!(run.trajectory.len(), 15);
        for point in &run.trajectory {
            assert!((0.0..=1.0).contains(&point.angles[0]));
            assert!((2.0..=3.0).contains(&point.angles[1]));
        }
    }

    #[test]
    fn guards_dimensions() {
        let mut obj = FnObjective::new(11, |_: &[f64]| 0.0);
        let bounds = vec![(0.0, 1.0); 11];
        assert!(matches!(
            gp_bayes_opt(&mut obj, &bounds, &OptimizerConfig::default()).unwrap_err(),
            OptimizerError::TooManyDimensions { .. }
        ));
        let mut obj = FnObjective::new(1, |_: &[f64]| 0.0);
        assert!(gp_bayes_opt(&mut obj, &[(1.0, 0.0)], &OptimizerConfig::default()).is_err());
    }
}
