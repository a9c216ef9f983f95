//! Finite-shot measurement and cost estimation.
//!
//! This is the "quantum processor" side of the optimization loop: prepare a
//! state (ideal statevector or noisy density matrix), push it through the
//! readout confusion when one is modeled, draw a multinomial shot record,
//! mitigate, and compute `<Z_i>`, `<Z_i Z_j>` and the cost `F` from the one
//! mitigated distribution. An `exact` shot mode bypasses sampling and
//! returns analytic values for tests and refinement.
//!
//! Sampling uses ChaCha8 with binomial splitting, so records are
//! reproducible for a fixed seed and cheap even at high shot counts.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use thiserror::Error;

use crate::exactcover::Selection;
use crate::ising::IsingModel;
use crate::noise::{
    apply_readout_error, mitigate_readout, simulate_noisy, ConfusionMatrix, NoiseError, NoiseModel,
};
use crate::simulator::{build_qaoa_circuit, exact_probabilities, QaoaAngles, SimulatorError};
use crate::RNG_ALGORITHM;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid probability distribution (sum {0})")]
    InvalidDistribution(f64),
    #[error("distribution length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("shot count must be at least 1")]
    NoShots,
    #[error("record width {got} does not match model width {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("record counts sum to {got}, expected {expected}")]
    CountMismatch { got: u64, expected: u64 },
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
}

/// How the state is prepared.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Pure statevector simulation.
    Ideal,
    /// Density-matrix simulation with depolarizing gate noise.
    Noisy(NoiseModel),
}

impl Backend {
    pub fn descriptor(&self) -> &'static str {
        match self {
            Backend::Ideal => "ideal",
            Backend::Noisy(_) => "noisy",
        }
    }
}

/// Shot budget per evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    /// Analytic probabilities, no sampling noise. Testing/refinement mode,
    /// never a default.
    Exact,
    Counted(u64),
}

impl Shots {
    pub fn descriptor(&self) -> String {
        match self {
            Shots::Exact => "exact".to_string(),
            Shots::Counted(s) => s.to_string(),
        }
    }
}

/// Measurement record: counts per observed bit string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotRecord {
    n: usize,
    counts: BTreeMap<String, u64>,
    shots: u64,
}

impl ShotRecord {
    pub fn new(n: usize, counts: BTreeMap<String, u64>) -> Result<Self, EstimatorError> {
        let shots = counts.values().sum();
        if shots == 0 {
            return Err(EstimatorError::NoShots);
        }
        for key in counts.keys() {
            if key.len() != n || key.chars().any(|c| c != '0' && c != '1') {
                return Err(EstimatorError::WidthMismatch {
                    got: key.len(),
                    expected: n,
                });
            }
        }
        Ok(ShotRecord { n, counts, shots })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn count(&self, bits: &str) -> u64 {
        self.counts.get(bits).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    /// Relative frequencies over all `2^n` basis states.
    pub fn empirical_distribution(&self) -> Vec<f64> {
        let mut probs = vec![0.0; 1 << self.n];
        for (bits, &count) in &self.counts {
            let idx = Selection::from_bit_string(bits)
                .expect("keys validated at construction")
                .to_index();
            probs[idx] = count as f64 / self.shots as f64;
        }
        probs
    }

    /// CSV with the header `bitstring,count`, rows in bit-string order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,count\n");
        for (bits, count) in &self.counts {
            out.push_str(&format!("{bits},{count}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, EstimatorError> {
        let mut counts = BTreeMap::new();
        let mut width = None;
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (bits, count) = line.split_once(',').ok_or(EstimatorError::NoShots)?;
            let count: u64 = count.trim().parse().map_err(|_| EstimatorError::NoShots)?;
            width.get_or_insert(bits.len());
            *counts.entry(bits.trim().to_string()).or_insert(0) += count;
        }
        ShotRecord::new(width.ok_or(EstimatorError::NoShots)?, counts)
    }
}

/// Draws a multinomial sample by binomial splitting, so the cost is linear
/// in the number of basis states instead of the shot count.
pub fn sample(probs: &[f64], shots: u64, seed: u64) -> Result<ShotRecord, EstimatorError> {
    if shots == 0 {
        return Err(EstimatorError::NoShots);
    }
    let n = probs.len().trailing_zeros() as usize;
    if probs.len() != 1 << n || probs.is_empty() {
        return Err(EstimatorError::NotPowerOfTwo(probs.len()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || probs.iter().any(|&p| p < -1e-9) {
        return Err(EstimatorError::InvalidDistribution(sum));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    let mut remaining_shots = shots;
    let mut remaining_mass = 1.0f64;
    for (idx, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let p = p.max(0.0);
        let drawn = if idx + 1 == probs.len() || remaining_mass <= p {
            remaining_shots
        } else {
            let ratio = (p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, ratio)
                .expect("ratio clamped to [0, 1]")
                .sample(&mut rng)
        };
        if drawn > 0 {
            counts.insert(Selection::from_index(idx, n).to_string(), drawn);
            remaining_shots -= drawn;
        }
        remaining_mass = (remaining_mass - p).max(0.0);
    }
    if remaining_shots > 0 {
        // Leftover mass rounded away; assign to the most likely state.
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        *counts
            .entry(Selection::from_index(argmax, n).to_string())
            .or_insert(0) += remaining_shots;
    }
    ShotRecord::new(n, counts)
}

/// Cost estimate with the expectations it was assembled from.
#[derive(Debug, Clone, Serialize)]
pub struct CostEstimate {
    /// `F = sum h_i <Z_i> + sum J_ij <Z_i Z_j>` under `s = +1 <=> bit 1`.
    pub f: f64,
    /// Per-qubit `<Z_i>`.
    pub z_single: Vec<f64>,
    /// `<Z_i Z_j>` for each nonzero coupling of the model.
    pub z_pairs: Vec<((usize, usize), f64)>,
    /// The (mitigated) distribution the expectations came from.
    pub state_probs: Vec<f64>,
    /// Shot count, `None` in exact mode.
    pub shots: Option<u64>,
}

impl CostEstimate {
    /// JSON with all fields plus seed and backend descriptor.
    pub fn to_json(&self, seed: u64, backend: &Backend) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            estimate: &'a CostEstimate,
            seed: u64,
            rng: &'static str,
            backend: &'static str,
        }
        serde_json::to_string(&Doc {
            estimate: self,
            seed,
            rng: RNG_ALGORITHM,
            backend: backend.descriptor(),
        })
        .expect("estimate serialization cannot fail")
    }
}

fn estimate_from_distribution(probs: &[f64], model: &IsingModel) -> CostEstimate {
    let n = model.num_spins();
    let spin = |idx: usize, q: usize| -> f64 {
        if (idx >> (n - 1 - q)) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    };
    let z_single: Vec<f64> = (0..n)
        .map(|q| probs.iter().enumerate().map(|(i, p)| p * spin(i, q)).sum())
        .collect();
    let z_pairs: Vec<((usize, usize), f64)> = model
        .couplings_f64()
        .iter()
        .map(|&((a, b), _)| {
            let zz = probs
                .iter()
                .enumerate()
                .map(|(i, p)| p * spin(i, a) * spin(i, b))
                .sum();
            ((a, b), zz)
        })
        .collect();
    let h = model.fields_f64();
    let mut f = 0.0;
    for (q, &hq) in h.iter().enumerate() {
        f += hq * z_single[q];
    }
    for ((_, j), (_, zz)) in model.couplings_f64().iter().zip(z_pairs.iter()) {
        f += j * zz;
    }
    CostEstimate {
        f,
        z_single,
        z_pairs,
        state_probs: probs.to_vec(),
        shots: None,
    }
}

/// Estimates expectations from a shot record, optionally mitigating the
/// empirical distribution first. All quantities come from the one
/// (mitigated) distribution.
pub fn estimate(
    record: &ShotRecord,
    model: &IsingModel,
    confusion: Option<&ConfusionMatrix>,
) -> Result<CostEstimate, EstimatorError> {
    if record.num_qubits() != model.num_spins() {
        return Err(EstimatorError::WidthMismatch {
            got: record.num_qubits(),
            expected: model.num_spins(),
        });
    }
    let empirical = record.empirical_distribution();
    let probs = match confusion {
        Some(c) => mitigate_readout(&empirical, c)?,
        None => empirical,
    };
    let mut est = estimate_from_distribution(&probs, model);
    est.shots = Some(record.shots());
    Ok(est)
}

/// One full evaluation of the pipeline:
/// simulate -> (readout error) -> sample -> (mitigate) -> estimate.
///
/// `Shots::Exact` bypasses sampling; with a confusion matrix the error and
/// its mitigation still run, canceling analytically.
pub fn evaluate_angles(
    model: &IsingModel,
    angles: &QaoaAngles,
    backend: &Backend,
    shots: Shots,
    confusion: Option<&ConfusionMatrix>,
    seed: u64,
) -> Result<CostEstimate, EstimatorError> {
    let circuit = build_qaoa_circuit(model, angles);
    let true_probs = match backend {
        Backend::Ideal => exact_probabilities(&circuit.run()?),
        Backend::Noisy(noise) => simulate_noisy(&circuit, noise)?.probabilities(),
    };
    let measured = match confusion {
        Some(c) => apply_readout_error(&true_probs, c)?,
        None => true_probs,
    };
    match shots {
        Shots::Exact => {
            let probs = match confusion {
                Some(c) => mitigate_readout(&measured, c)?,
                None => measured,
            };
            Ok(estimate_from_distribution(&probs, model))
        }
        Shots::Counted(s) => {
            let record = sample(&measured, s, seed)?;
            estimate(&record, model, confusion)
        }
    }
}
