//! Gate noise and readout error models.
//!
//! Gate errors are local depolarizing channels calibrated from average gate
//! fidelities (`F = 1 - lambda (d-1)/d`); RZ is treated as a software phase
//! shift and is noiseless by default. Readout is a per-qubit confusion
//! matrix, symmetric in both error directions, inverted (with clipping and
//! renormalization) for mitigation. Total circuit fidelity is predicted by
//! multiplying per-gate fidelities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::{Circuit, Gate, GateTally, Statevector};

/// Dense density-matrix width bound.
pub const DENSITY_MATRIX_MAX_QUBITS: usize = 8;

/// Default noise parameters of the reference two-qubit device: single-qubit
/// and CZ gate fidelities from randomized benchmarking, measurement
/// fidelities, and coherence times (recorded for context, unused by the
/// depolarizing model).
pub const DEFAULT_F_1Q: [f64; 2] = [0.9986, 0.9993];
pub const DEFAULT_F_CZ: f64 = 0.986;
pub const DEFAULT_F_READOUT: [f64; 2] = [0.86, 0.95];
pub const DEFAULT_T1_US: [f64; 2] = [77.0, 55.0];
pub const DEFAULT_T2_STAR_US: [f64; 2] = [49.0, 82.0];

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("gate fidelity {0} outside the supported range (0.5, 1.0]")]
    FidelityOutOfRange(f64),
    #[error("gate dimension must be 2 or 4, got {0}")]
    BadDimension(usize),
    #[error("noise model covers {model} qubits but the circuit has {circuit}")]
    QubitCountMismatch { model: usize, circuit: usize },
    #[error("{0} qubits exceed the dense density-matrix bound of {DENSITY_MATRIX_MAX_QUBITS}")]
    TooWide(usize),
    #[error("input is not a probability distribution (sum {0})")]
    NotADistribution(f64),
    #[error("distribution length {got} does not match {expected} (2^n for n qubits)")]
    LengthMismatch { got: usize, expected: usize },
    #[error("confusion matrix for qubit {0} is singular")]
    SingularConfusion(usize),
    #[error("confusion matrix for qubit {0} is not column-stochastic")]
    NotStochastic(usize),
    #[error("invalid noise model document: {0}")]
    Malformed(String),
}

/// Depolarizing rate for a gate of dimension `d` (2 for one-qubit, 4 for
/// two-qubit gates) with average fidelity `f`: solves `f = 1 - l (d-1)/d`
/// for the channel `rho -> (1-l) rho + l I/d`.
pub fn depolarizing_rate(fidelity: f64, d: usize) -> Result<f64, NoiseError> {
    if !(d == 2 || d == 4) {
        return Err(NoiseError::BadDimension(d));
    }
    if !(fidelity > 0.5 && fidelity <= 1.0) {
        return Err(NoiseError::FidelityOutOfRange(fidelity));
    }
    Ok((1.0 - fidelity) * d as f64 / (d as f64 - 1.0))
}

/// Per-qubit gate and readout fidelities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(rename = "f1q")]
    f_1q: Vec<f64>,
    #[serde(rename = "fcz")]
    f_cz: f64,
    #[serde(rename = "fro")]
    f_readout: Vec<f64>,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    rz_noiseless: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t1_us: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t2_star_us: Option<Vec<f64>>,
}

fn default_true() -> bool {
    true
}

#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_true(b: &bool) -> bool {
    *b
}

impl NoiseModel {
    pub fn new(f_1q: Vec<f64>, f_cz: f64, f_readout: Vec<f64>) -> Result<Self, NoiseError> {
        let model = NoiseModel {
            f_1q,
            f_cz,
            f_readout,
            rz_noiseless: true,
            t1_us: None,
            t2_star_us: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Noiseless model: all fidelities exactly 1.
    pub fn ideal(n: usize) -> Self {
        NoiseModel {
            f_1q: vec![1.0; n],
            f_cz: 1.0,
            f_readout: vec![1.0; n],
            rz_noiseless: true,
            t1_us: None,
            t2_star_us: None,
        }
    }

    /// The reference two-qubit device defaults.
    pub fn reference_two_qubit() -> Self {
        NoiseModel {
            f_1q: DEFAULT_F_1Q.to_vec(),
            f_cz: DEFAULT_F_CZ,
            f_readout: DEFAULT_F_READOUT.to_vec(),
            rz_noiseless: true,
            t1_us: Some(DEFAULT_T1_US.to_vec()),
            t2_star_us: Some(DEFAULT_T2_STAR_US.to_vec()),
        }
    }

    fn validate(&self) -> Result<(), NoiseError> {
        for &f in self.f_1q.iter().chain(self.f_readout.iter()) {
            if !(f > 0.5 && f <= 1.0) {
                return Err(NoiseError::FidelityOutOfRange(f));
            }
        }
        if !(self.f_cz > 0.5 && self.f_cz <= 1.0) {
            return Err(NoiseError::FidelityOutOfRange(self.f_cz));
        }
        if self.f_readout.len() != self.f_1q.len() {
            return Err(NoiseError::QubitCountMismatch {
                model: self.f_1q.len(),
                circuit: self.f_readout.len(),
            });
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.f_1q.len()
    }

    pub fn single_qubit_fidelity(&self, q: usize) -> f64 {
        self.f_1q[q]
    }

    pub fn cz_fidelity(&self) -> f64 {
        self.f_cz
    }

    pub fn readout_fidelity(&self, q: usize) -> f64 {
        self.f_readout[q]
    }

    pub fn readout_fidelities(&self) -> &[f64] {
        &self.f_readout
    }

    pub fn rz_noiseless(&self) -> bool {
        self.rz_noiseless
    }

    pub fn is_ideal(&self) -> bool {
        self.f_1q.iter().all(|&f| f == 1.0)
            && self.f_cz == 1.0
            && self.f_readout.iter().all(|&f| f == 1.0)
    }

    /// Symmetric per-qubit confusion matrix derived from the readout
    /// fidelities.
    pub fn confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix::symmetric(&self.f_readout)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("noise model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, NoiseError> {
        let model: NoiseModel =
            serde_json::from_str(text).map_err(|e| NoiseError::Malformed(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

/// Mixed state over `n` qubits as a dense `2^n x 2^n` matrix (row-major).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_statevector(state: &Statevector) -> Self {
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = amps[r] * amps[c].conj();
            }
        }
        DensityMatrix {
            n: state.num_qubits(),
            data,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim() + c]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.entry(i, i)).collect()
    }

    /// Diagonal as a probability distribution; tiny negative real parts from
    /// roundoff are clipped and the result renormalized.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.diagonal().iter().map(|z| z.re.max(0.0)).collect();
        let sum: f64 = p.iter().sum();
        if sum > 0.0 {
            for x in &mut p {
                *x /= sum;
            }
        }
        p
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().iter().sum()
    }

    /// Largest `|rho[r,c] - conj(rho[c,r])|` over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                worst = worst.max((self.entry(r, c) - self.entry(c, r).conj()).norm());
            }
        }
        worst
    }

    /// True when all eigenvalues are at least `-tol`, checked via a Cholesky
    /// factorization of `rho + tol I`.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let dim = self.dim();
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = self.entry(r, c);
            }
            m[(r, r)] += Complex64::new(tol, 0.0);
        }
        m.cholesky().is_some()
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_with_pure(&self, state: &Statevector) -> f64 {
        let amps = state.amplitudes();
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                acc += amps[r].conj() * self.data[r * dim + c] * amps[c];
            }
        }
        acc.re
    }

    /// Conjugates by a single-qubit unitary `[[m00, m01], [m10, m11]]`.
    fn conjugate_one_qubit(&mut self, q: usize, m: [Complex64; 4]) {
        let dim = self.dim();
        let bit = 1usize << (self.n - 1 - q);
        // rho -> U rho
        for r in 0..dim {
            if r & bit == 0 {
                for c in 0..dim {
                    let a0 = self.data[r * dim + c];
                    let a1 = self.data[(r | bit) * dim + c];
                    self.data[r * dim + c] = m[0] * a0 + m[1] * a1;
                    self.data[(r | bit) * dim + c] = m[2] * a0 + m[3] * a1;
                }
            }
        }
        // rho -> rho U^dagger
        for r in 0..dim {
            for c in 0..dim {
                if c & bit == 0 {
                    let a0 = self.data[r * dim + c];
                    let a1 = self.data[r * dim + (c | bit)];
                    self.data[r * dim + c] = a0 * m[0].conj() + a1 * m[1].conj();
                    self.data[r * dim + (c | bit)] = a0 * m[2].conj() + a1 * m[3].conj();
                }
            }
        }
    }

    fn apply_unitary(&mut self, gate: &Gate) {
        let c0 = Complex64::new(0.0, 0.0);
        match *gate {
            Gate::H(q) => {
                let f = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                self.conjugate_one_qubit(q, [f, f, f, -f]);
            }
            Gate::X(q) => {
                let one = Complex64::new(1.0, 0.0);
                self.conjugate_one_qubit(q, [c0, one, one, c0]);
            }
            Gate::Rx(q, theta) => {
                let c = Complex64::new((theta / 2.0).cos(), 0.0);
                let ms = Complex64::new(0.0, -(theta / 2.0).sin());
                self.conjugate_one_qubit(q, [c, ms, ms, c]);
            }
            Gate::Rz(q, theta) => {
                let p0 = Complex64::from_polar(1.0, -theta / 2.0);
                let p1 = Complex64::from_polar(1.0, theta / 2.0);
                self.conjugate_one_qubit(q, [p0, c0, c0, p1]);
            }
            Gate::Cz(a, b) => {
                let dim = self.dim();
                let bits = (1usize << (self.n - 1 - a)) | (1usize << (self.n - 1 - b));
                let sign = |idx: usize| -> f64 {
                    if idx & bits == bits {
                        -1.0
                    } else {
                        1.0
                    }
                };
                for r in 0..dim {
                    for c in 0..dim {
                        self.data[r * dim + c] *= sign(r) * sign(c);
                    }
                }
            }
        }
    }

    /// Single-qubit depolarizing: `rho -> (1-l) rho + l (Tr_q rho) (x) I/2`.
    fn depolarize_one(&mut self, q: usize, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let dim = self.dim();
        let bit = 1usize << (self.n - 1 - q);
        let keep = 1.0 - lambda;
        for r in 0..dim {
            if r & bit != 0 {
                continue;
            }
            for c in 0..dim {
                if c & bit != 0 {
                    continue;
                }
                let i00 = r * dim + c;
                let i01 = r * dim + (c | bit);
                let i10 = (r | bit) * dim + c;
                let i11 = (r | bit) * dim + (c | bit);
                let mixed = (self.data[i00] + self.data[i11]) * 0.5;
                self.data[i00] = keep * self.data[i00] + lambda * mixed;
                self.data[i11] = keep * self.data[i11] + lambda * mixed;
                self.data[i01] *= keep;
                self.data[i10] *= keep;
            }
        }
    }

    /// Two-qubit depolarizing: `rho -> (1-l) rho + l (Tr_ab rho) (x) I/4`.
    fn depolarize_two(&mut self, a: usize, b: usize, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let dim = self.dim();
        let bit_a = 1usize << (self.n - 1 - a);
        let bit_b = 1usize << (self.n - 1 - b);
        let keep = 1.0 - lambda;
        let offsets = [0, bit_b, bit_a, bit_a | bit_b];
        for r in 0..dim {
            if r & (bit_a | bit_b) != 0 {
                continue;
            }
            for c in 0..dim {
                if c & (bit_a | bit_b) != 0 {
                    continue;
                }
                let mut block_trace = Complex64::new(0.0, 0.0);
                for &o in &offsets {
                    block_trace += self.data[(r | o) * dim + (c | o)];
                }
                let mixed = block_trace * 0.25;
                for &or in &offsets {
                    for &oc in &offsets {
                        let idx = (r | or) * dim + (c | oc);
                        self.data[idx] *= keep;
                        if or == oc {
                            self.data[idx] += lambda * mixed;
                        }
                    }
                }
            }
        }
    }
}

/// Runs a circuit as unitary conjugations, each followed by local
/// depolarizing on the gate's qubits (RZ exempt when the model says so).
pub fn simulate_noisy(circuit: &Circuit, noise: &NoiseModel) -> Result<DensityMatrix, NoiseError> {
    let n = circuit.num_qubits();
    if n > DENSITY_MATRIX_MAX_QUBITS {
        return Err(NoiseError::TooWide(n));
    }
    if noise.num_qubits() != n {
        return Err(NoiseError::QubitCountMismatch {
            model: noise.num_qubits(),
            circuit: n,
        });
    }
    let state = Statevector::computational_basis(n, 0).map_err(|_| NoiseError::TooWide(n))?;
    let mut rho = DensityMatrix::from_statevector(&state);
    let lambda_cz = depolarizing_rate(noise.cz_fidelity(), 4)?;
    let lambda_1q: Vec<f64> = (0..n)
        .map(|q| depolarizing_rate(noise.single_qubit_fidelity(q), 2))
        .collect::<Result<_, _>>()?;
    for gate in circuit.gates() {
        rho.apply_unitary(gate);
        match *gate {
            Gate::H(q) | Gate::X(q) | Gate::Rx(q, _) => rho.depolarize_one(q, lambda_1q[q]),
            Gate::Rz(q, _) => {
                if !noise.rz_noiseless() {
                    rho.depolarize_one(q, lambda_1q[q]);
                }
            }
            Gate::Cz(a, b) => rho.depolarize_two(a, b, lambda_cz),
        }
    }
    Ok(rho)
}

/// Per-qubit readout confusion: `M[measured][true]`, columns summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    per_qubit: Vec<[[f64; 2]; 2]>,
}

impl ConfusionMatrix {
    pub fn new(per_qubit: Vec<[[f64; 2]; 2]>) -> Result<Self, NoiseError> {
        for (q, m) in per_qubit.iter().enumerate() {
            for (a, b) in [(m[0][0], m[1][0]), (m[0][1], m[1][1])] {
                let in_range = (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b);
                if !in_range || (a + b - 1.0).abs() > 1e-9 {
                    return Err(NoiseError::NotStochastic(q));
                }
            }
        }
        Ok(ConfusionMatrix { per_qubit })
    }

    /// Equal error probability in both directions: diagonal `f`, off-diagonal
    /// `1 - f`.
    pub fn symmetric(fidelities: &[f64]) -> Self {
        ConfusionMatrix {
            per_qubit: fidelities
                .iter()
                .map(|&f| [[f, 1.0 - f], [1.0 - f, f]])
                .collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        ConfusionMatrix::symmetric(&vec![1.0; n])
    }

    pub fn num_qubits(&self) -> usize {
        self.per_qubit.len()
    }

    pub fn qubit(&self, q: usize) -> &[[f64; 2]; 2] {
        &self.per_qubit[q]
    }
}

fn check_distribution(probs: &[f64], n: usize) -> Result<(), NoiseError> {
    if probs.len() != 1 << n {
        return Err(NoiseError::LengthMismatch {
            got: probs.len(),
            expected: 1 << n,
        });
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || probs.iter().any(|&p| p < -1e-9) {
        return Err(NoiseError::NotADistribution(sum));
    }
    Ok(())
}

fn apply_per_qubit_matrix(probs: &[f64], n: usize, m: impl Fn(usize) -> [[f64; 2]; 2]) -> Vec<f64> {
    let mut out = probs.to_vec();
    for q in 0..n {
        let bit = 1usize << (n - 1 - q);
        let mq = m(q);
        for idx in 0..out.len() {
            if idx & bit == 0 {
                let p0 = out[idx];
                let p1 = out[idx | bit];
                out[idx] = mq[0][0] * p0 + mq[0][1] * p1;
                out[idx | bit] = mq[1][0] * p0 + mq[1][1] * p1;
            }
        }
    }
    out
}

/// Pushes a true-state distribution through the tensor-product confusion.
pub fn apply_readout_error(
    probs: &[f64],
    confusion: &ConfusionMatrix,
) -> Result<Vec<f64>, NoiseError> {
    let n = confusion.num_qubits();
    check_distribution(probs, n)?;
    Ok(apply_per_qubit_matrix(probs, n, |q| *confusion.qubit(q)))
}

/// Inverts the confusion on an empirical distribution, clips negative
/// entries to zero and renormalizes to sum 1.
pub fn mitigate_readout(
    empirical: &[f64],
    confusion: &ConfusionMatrix,
) -> Result<Vec<f64>, NoiseError> {
    let n = confusion.num_qubits();
    check_distribution(empirical, n)?;
    let mut inverses = Vec::with_capacity(n);
    for q in 0..n {
        let m = confusion.qubit(q);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-12 {
            return Err(NoiseError::SingularConfusion(q));
        }
        inverses.push([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ]);
    }
    let mut out = apply_per_qubit_matrix(empirical, n, |q| inverses[q]);
    for p in &mut out {
        *p = p.max(0.0);
    }
    let sum: f64 = out.iter().sum();
    if sum <= 0.0 {
        return Err(NoiseError::NotADistribution(sum));
    }
    for p in &mut out {
        *p /= sum;
    }
    Ok(out)
}

/// Product of per-gate fidelities over a tally; RZ contributes 1.
pub fn predict_circuit_fidelity(tally: &GateTally, noise: &NoiseModel) -> f64 {
    let mut product = 1.0;
    for q in 0..noise.num_qubits().min(tally.h.len()) {
        let single_gates = tally.h[q] + tally.x[q] + tally.rx[q];
        product *= noise.single_qubit_fidelity(q).powi(single_gates as i32);
    }
    product * noise.cz_fidelity().powi(tally.cz as i32)
}
