//! Nelder-Mead downhill simplex.
//!
//! Standard coefficients: reflection 1, expansion 2, contraction 0.5
//! (outside and inside), shrink 0.5. The initial simplex is the start point
//! plus a `pi/8` step along each axis. Terminates on budget exhaustion (a
//! normal outcome, flagged in the run) or when the simplex diameter falls
//! below `1e-4`.

use std::f64::consts::PI;

use super::{check_common, Objective, OptimizationRun, OptimizerConfig, OptimizerError, Recorder};

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;
const INITIAL_STEP: f64 = PI / 8.0;
const DIAMETER_TOL: f64 = 1e-4;

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

fn diameter(simplex: &[Vertex]) -> f64 {
    let best = &simplex[0].x;
    simplex[1..]
        .iter()
        .map(|v| {
            v.x.iter()
                .zip(best.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

pub fn nelder_mead(
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

    let mut rec = Recorder::new(objective, config.max_calls);
    let mut simplex: Vec<Vertex> = Vec::with_capacity(dim + 1);
    'build: {
        let Some(f0) = rec.evaluate(start) else {
            break 'build;
        };
        simplex.push(Vertex {
            x: start.to_vec(),
            f: f0,
        });
        for axis in 0..dim {
            let mut x = start.to_vec();
            x[axis] += INITIAL_STEP;
            let Some(f) = rec.evaluate(&x) else {
                break 'build;
            };
            simplex.push(Vertex { x, f });
        }
    }

    while simplex.len() == dim + 1 && !rec.exhausted() {
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        if diameter(&simplex) < DIAMETER_TOL {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|v| v.x[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = &simplex[dim];
        let point_at = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst.x.iter())
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = point_at(REFLECTION);
        let Some(f_r) = rec.evaluate(&reflected) else {
            break;
        };

        if f_r < simplex[0].f {
            let expanded = point_at(EXPANSION);
            let Some(f_e) = rec.evaluate(&expanded) else {
                break;
            };
            simplex[dim] = if f_e < f_r {
                Vertex {
                    x: expanded,
                    f: f_e,
                }
            } else {
                Vertex {
                    x: reflected,
                    f: f_r,
                }
            };
            continue;
        }
        if f_r < simplex[dim - 1].f {
            simplex[dim] = Vertex {
                x: reflected,
                f: f_r,
            };
            continue;
        }

        let contracted = if f_r < worst.f {
            point_at(CONTRACTION)
        } else {
            point_at(-CONTRACTION)
        };
        let Some(f_c) = rec.evaluate(&contracted) else {
            break;
        };
        if f_c < worst.f.min(f_r) {
            simplex[dim] = Vertex {
                x: contracted,
                f: f_c,
            };
            continue;
        }

        // Shrink toward the best vertex.
        let best = simplex[0].x.clone();
        let mut shrunk_all = true;
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = vertex
                .x
                .iter()
                .zip(best.iter())
                .map(|(v, b)| b + SHRINK * (v - b))
                .collect();
            let Some(f) = rec.evaluate(&x) else {
                shrunk_all = false;
                break;
            };
            *vertex = Vertex { x, f };
        }
        if !shrunk_all {
            break;
        }
    }

    Ok(rec.finish(config.convergence_threshold))
}
