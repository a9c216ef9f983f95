//! Gate-level statevector simulation of the QAOA circuit.
//!
//! The circuit alternates a diagonal phase layer (compiled from the Ising
//! coefficients with RZ and CZ gates) and a transverse mixing layer of RX
//! rotations, starting from the uniform superposition. [`evolve_direct`]
//! applies the same evolution without gates — per-basis-state phases followed
//! by explicit single-qubit mixing — and serves as the equivalence oracle for
//! the circuit path.
//!
//! Conventions: qubit 0 is the most significant bit of a basis index, so the
//! printed basis labels match [`crate::exactcover::Selection`] strings.
//! Global phase is out of contract everywhere; use [`fidelity`] to compare.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::ising::IsingModel;

/// Statevector width bound (dense amplitudes).
pub const MAX_QUBITS: usize = 24;

const ZERO_ROTATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("qubit count {0} outside supported range 1..={MAX_QUBITS}")]
    WidthOutOfRange(usize),
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("gamma and beta lists must be equal-length and nonempty")]
    AngleShape,
    #[error("angles must be finite")]
    NonFiniteAngle,
    #[error("CZ requires two distinct qubits, got ({0}, {0})")]
    DegenerateCz(usize),
    #[error("flat angle vector must have even nonzero length, got {0}")]
    FlatShape(usize),
}

/// Variational angles, one `(gamma, beta)` pair per level.
///
/// Values are wrapped into `[0, pi)` at construction; optimizers explore
/// unbounded coordinates and pass through this boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct QaoaAngles {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    // rem_euclid can return PI itself when x is a tiny negative number.
    if r >= PI {
        0.0
    } else {
        r
    }
}

impl QaoaAngles {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self, SimulatorError> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return Err(SimulatorError::AngleShape);
        }
        if gammas.iter().chain(betas.iter()).any(|x| !x.is_finite()) {
            return Err(SimulatorError::NonFiniteAngle);
        }
        Ok(QaoaAngles {
            gammas: gammas.into_iter().map(wrap_angle).collect(),
            betas: betas.into_iter().map(wrap_angle).collect(),
        })
    }

    /// Splits a flat `[g_1..g_p, b_1..b_p]` vector.
    pub fn from_flat(x: &[f64]) -> Result<Self, SimulatorError> {
        if x.is_empty() || !x.len().is_multiple_of(2) {
            return Err(SimulatorError::FlatShape(x.len()));
        }
        let p = x.len() / 2;
        QaoaAngles::new(x[..p].to_vec(), x[p..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.gammas.clone();
        v.extend_from_slice(&self.betas);
        v
    }

    pub fn levels(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// Gate set of the circuit model.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Rx(usize, f64),
    Rz(usize, f64),
    /// Controlled phase; symmetric, stored with the smaller index first.
    Cz(usize, usize),
}

impl Gate {
    pub fn cz(a: usize, b: usize) -> Gate {
        assert!(a != b, "CZ requires two distinct qubits");
        Gate::Cz(a.min(b), a.max(b))
    }

    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Rx(q, _) | Gate::Rz(q, _) => (q, None),
            Gate::Cz(a, b) => (a, Some(b)),
        }
    }

    fn touches(&self, q: usize) -> bool {
        let (a, b) = self.qubits();
        a == q || b == Some(q)
    }

    fn same_support(&self, other: &Gate) -> bool {
        self.qubits() == other.qubits()
    }

    fn max_qubit(&self) -> usize {
        let (a, b) = self.qubits();
        b.map_or(a, |b| a.max(b))
    }
}

fn is_zero_rotation(theta: f64) -> bool {
    let r = theta.rem_euclid(2.0 * PI);
    r < ZERO_ROTATION_TOL || 2.0 * PI - r < ZERO_ROTATION_TOL
}

/// An ordered gate list over `n` qubits, run from `|0..0>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

/// Per-qubit gate counts of a circuit (CZ counted once per pair).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GateTally {
    pub h: Vec<u64>,
    pub x: Vec<u64>,
    pub rx: Vec<u64>,
    pub rz: Vec<u64>,
    pub cz: u64,
}

impl GateTally {
    pub fn totals(&self) -> (u64, u64, u64, u64, u64) {
        (
            self.h.iter().sum(),
            self.x.iter().sum(),
            self.rx.iter().sum(),
            self.rz.iter().sum(),
            self.cz,
        )
    }
}

impl Circuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self, SimulatorError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(SimulatorError::WidthOutOfRange(n));
        }
        for g in &gates {
            if g.max_qubit() >= n {
                return Err(SimulatorError::QubitOutOfRange {
                    index: g.max_qubit(),
                    n,
                });
            }
            if let Gate::Cz(a, b) = g {
                if a == b {
                    return Err(SimulatorError::DegenerateCz(*a));
                }
            }
        }
        Ok(Circuit { n, gates })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Runs the circuit on `|0..0>`.
    pub fn run(&self) -> Result<Statevector, SimulatorError> {
        let mut state = Statevector::computational_basis(self.n, 0)?;
        for g in &self.gates {
            state.apply(g)?;
        }
        Ok(state)
    }

    pub fn tally(&self) -> GateTally {
        let mut t = GateTally {
            h: vec![0; self.n],
            x: vec![0; self.n],
            rx: vec![0; self.n],
            rz: vec![0; self.n],
            cz: 0,
        };
        for g in &self.gates {
            match *g {
                Gate::H(q) => t.h[q] += 1,
                Gate::X(q) => t.x[q] += 1,
                Gate::Rx(q, _) => t.rx[q] += 1,
                Gate::Rz(q, _) => t.rz[q] += 1,
                Gate::Cz(_, _) => t.cz += 1,
            }
        }
        t
    }

    /// Debug dump, one gate per line: `KIND q[,q2][,theta]` with angles in
    /// radians at 12 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            match *g {
                Gate::H(q) => writeln!(out, "H {q}").unwrap(),
                Gate::X(q) => writeln!(out, "X {q}").unwrap(),
                Gate::Rx(q, t) => writeln!(out, "RX {q},{t:.11e}").unwrap(),
                Gate::Rz(q, t) => writeln!(out, "RZ {q},{t:.11e}").unwrap(),
                Gate::Cz(a, b) => writeln!(out, "CZ {a},{b}").unwrap(),
            }
        }
        out
    }
}

/// Pure amplitudes over `2^n` basis states, qubit 0 = most significant bit.
#[derive(Debug, Clone)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn computational_basis(n: usize, index: usize) -> Result<Self, SimulatorError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(SimulatorError::WidthOutOfRange(n));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<(), SimulatorError> {
        if q >= self.n {
            return Err(SimulatorError::QubitOutOfRange {
                index: q,
                n: self.n,
            });
        }
        Ok(())
    }

    /// Applies a 2x2 unitary `[[m00, m01], [m10, m11]]` to qubit `q`.
    fn apply_one_qubit(&mut self, q: usize, m: [Complex64; 4]) {
        let shift = self.n - 1 - q;
        let bit = 1usize << shift;
        for base in 0..self.amps.len() {
            if base & bit == 0 {
                let a0 = self.amps[base];
                let a1 = self.amps[base | bit];
                self.amps[base] = m[0] * a0 + m[1] * a1;
                self.amps[base | bit] = m[2] * a0 + m[3] * a1;
            }
        }
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<(), SimulatorError> {
        let c0 = Complex64::new(0.0, 0.0);
        match *gate {
            Gate::H(q) => {
                self.check_qubit(q)?;
                let f = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                self.apply_one_qubit(q, [f, f, f, -f]);
            }
            Gate::X(q) => {
                self.check_qubit(q)?;
                let one = Complex64::new(1.0, 0.0);
                self.apply_one_qubit(q, [c0, one, one, c0]);
            }
            Gate::Rx(q, theta) => {
                self.check_qubit(q)?;
                let c = Complex64::new((theta / 2.0).cos(), 0.0);
                let ms = Complex64::new(0.0, -(theta / 2.0).sin());
                self.apply_one_qubit(q, [c, ms, ms, c]);
            }
            Gate::Rz(q, theta) => {
                self.check_qubit(q)?;
                let p0 = Complex64::from_polar(1.0, -theta / 2.0);
                let p1 = Complex64::from_polar(1.0, theta / 2.0);
                self.apply_one_qubit(q, [p0, c0, c0, p1]);
            }
            Gate::Cz(a, b) => {
                self.check_qubit(a)?;
                self.check_qubit(b)?;
                if a == b {
                    return Err(SimulatorError::DegenerateCz(a));
                }
                let bits = (1usize << (self.n - 1 - a)) | (1usize << (self.n - 1 - b));
                for (idx, amp) in self.amps.iter_mut().enumerate() {
                    if idx & bits == bits {
                        *amp = -*amp;
                    }
                }
            }
        }
        Ok(())
    }
}

/// The equal superposition over all basis states.
pub fn uniform_state(n: usize) -> Result<Statevector, SimulatorError> {
    if n == 0 || n > MAX_QUBITS {
        return Err(SimulatorError::WidthOutOfRange(n));
    }
    let amp = Complex64::new((1_f64 / (1u64 << n) as f64).sqrt(), 0.0);
    Ok(Statevector {
        n,
        amps: vec![amp; 1 << n],
    })
}

/// `|amplitude|^2` for every basis state.
pub fn exact_probabilities(state: &Statevector) -> Vec<f64> {
    state.amps.iter().map(|a| a.norm_sqr()).collect()
}

/// Energy expectation of the model in the given state:
/// `F = sum_bits P(bits) * energy(bits)`, offset excluded.
pub fn cost_function(state: &Statevector, model: &IsingModel) -> f64 {
    let energies = model.energy_table();
    exact_probabilities(state)
        .iter()
        .zip(energies.iter())
        .map(|(p, e)| p * e)
        .sum()
}

/// Squared overlap `|<a|b>|^2`; the phase-insensitive comparison used by all
/// equivalence checks.
pub fn fidelity(a: &Statevector, b: &Statevector) -> f64 {
    let inner: Complex64 = a
        .amps
        .iter()
        .zip(b.amps.iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    inner.norm_sqr()
}

/// Peephole simplification: cancels adjacent self-inverse pairs (H, X, CZ)
/// and merges consecutive RX/RZ rotations on the same qubit, dropping
/// full-turn rotations. Adjacency is modulo gates on disjoint qubits.
fn peephole(gates: Vec<Gate>) -> Vec<Gate> {
    let mut out: Vec<Gate> = Vec::with_capacity(gates.len());
    for gate in gates {
        let mut gate = gate;
        if let Gate::Rx(_, t) | Gate::Rz(_, t) = gate {
            if is_zero_rotation(t) {
                continue;
            }
        }
        loop {
            let (qa, qb) = gate.qubits();
            let blocker = out
                .iter()
                .rposition(|g| g.touches(qa) || qb.is_some_and(|q| g.touches(q)));
            let Some(pos) = blocker else {
                out.push(gate);
                break;
            };
            if !out[pos].same_support(&gate) {
                out.push(gate);
                break;
            }
            match (&out[pos], &gate) {
                (Gate::H(_), Gate::H(_))
                | (Gate::X(_), Gate::X(_))
                | (Gate::Cz(_, _), Gate::Cz(_, _)) => {
                    out.remove(pos);
                    break;
                }
                (&Gate::Rz(q, a), &Gate::Rz(_, b)) => {
                    out.remove(pos);
                    if is_zero_rotation(a + b) {
                        break;
                    }
                    gate = Gate::Rz(q, a + b);
                }
                (&Gate::Rx(q, a), &Gate::Rx(_, b)) => {
                    out.remove(pos);
                    if is_zero_rotation(a + b) {
                        break;
                    }
                    gate = Gate::Rx(q, a + b);
                }
                _ => {
                    out.push(gate);
                    break;
                }
            }
        }
    }
    out
}

/// Compiles the QAOA circuit for a model and angle set.
///
/// Initial layer: H on every qubit. Per level `i`: RZ(-2 g_i h_j) on each
/// qubit with a nonzero field; for each nonzero coupling `J_jk` the ZZ block
/// `H(k) CZ(j,k) H(k) RZ(2 g_i J_jk)(k) H(k) CZ(j,k) H(k)` (an H-conjugated
/// CZ pair is a CNOT, so the block is the usual CNOT-RZ-CNOT); then
/// RX(2 b_i) on every qubit. The result is peephole-simplified. The RZ signs
/// are fixed by equivalence with [`evolve_direct`] under the
/// `s = +1 <=> bit 1` spin convention, not by bookkeeping.
pub fn build_qaoa_circuit(model: &IsingModel, angles: &QaoaAngles) -> Circuit {
    let n = model.num_spins();
    let h = model.fields_f64();
    let couplings = model.couplings_f64();
    let mut gates = Vec::new();
    for q in 0..n {
        gates.push(Gate::H(q));
    }
    for (&gamma, &beta) in angles.gammas().iter().zip(angles.betas()) {
        for (q, &hq) in h.iter().enumerate() {
            if hq != 0.0 {
                gates.push(Gate::Rz(q, -2.0 * gamma * hq));
            }
        }
        for &((j, k), jjk) in &couplings {
            if jjk != 0.0 {
                gates.push(Gate::H(k));
                gates.push(Gate::cz(j, k));
                gates.push(Gate::H(k));
                gates.push(Gate::Rz(k, 2.0 * gamma * jjk));
                gates.push(Gate::H(k));
                gates.push(Gate::cz(j, k));
                gates.push(Gate::H(k));
            }
        }
        for q in 0..n {
            gates.push(Gate::Rx(q, 2.0 * beta));
        }
    }
    Circuit {
        n,
        gates: peephole(gates),
    }
}

/// Evolves the uniform state by `p` phase-then-mix layers without building
/// gates: the phase layer multiplies each basis amplitude by
/// `exp(-i g E(bits))` and the mixing layer applies
/// `cos(b) I - i sin(b) X` per qubit. Independent oracle for
/// [`build_qaoa_circuit`] + [`Circuit::run`].
pub fn evolve_direct(
    model: &IsingModel,
    angles: &QaoaAngles,
) -> Result<Statevector, SimulatorError> {
    let n = model.num_spins();
    let mut state = uniform_state(n)?;
    let energies = model.energy_table();
    for (&gamma, &beta) in angles.gammas().iter().zip(angles.betas()) {
        for (amp, &e) in state.amps.iter_mut().zip(energies.iter()) {
            *amp *= Complex64::from_polar(1.0, -gamma * e);
        }
        let c = beta.cos();
        let s = beta.sin();
        for q in 0..n {
            let bit = 1usize << (n - 1 - q);
            for idx in 0..state.amps.len() {
                if idx & bit == 0 {
                    let a0 = state.amps[idx];
                    let a1 = state.amps[idx | bit];
                    state.amps[idx] = c * a0 - Complex64::i() * s * a1;
                    state.amps[idx | bit] = -Complex64::i() * s * a0 + c * a1;
                }
            }
        }
    }
    Ok(state)
}
