//! Ising encodings of exact-cover instances.
//!
//! The mapping penalizes each universe element `u` with `(1 - sum_{i: u in
//! S_i} b_i)^2` where `b_i` is 1 when subset `i` is selected. Expanding in
//! spin variables `s_i = 2 b_i - 1` gives field coefficients `h_i`, couplings
//! `J_ij` and a constant offset; a selection is an exact cover iff its total
//! penalty energy (energy plus offset) is zero.
//!
//! Coefficients are kept as exact rationals so the integer-spectrum
//! normalization and the zero-energy cover test are free of float error.
//! Floats enter only at simulation time.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactcover::{ExactCoverInstance, Selection, MAX_BRUTE_FORCE_QUBITS};

#[derive(Debug, Error)]
pub enum IsingError {
    #[error("selection width {got} does not match spin count {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("model with {0} spins exceeds the enumeration bound of {MAX_BRUTE_FORCE_QUBITS}")]
    TooLarge(usize),
    #[error(
        "coupling criterion violated: overlapping subsets require J > min(c1, c2), got J = {j} with min {min}"
    )]
    CouplingCriterion { j: Rational64, min: i64 },
    #[error("invalid model document: {0}")]
    Malformed(String),
    #[error("coefficient {0} is not representable as an exact rational")]
    NotRational(f64),
}

/// Spin assignment for an [`IsingModel`]; `s_i = +1` exactly when bit `i`
/// of the corresponding [`Selection`] is 1 (subset selected).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn from_selection(sel: &Selection) -> Self {
        SpinConfig {
            spins: sel.bits().iter().map(|&b| if b { 1 } else { -1 }).collect(),
        }
    }

    pub fn to_selection(&self) -> Selection {
        Selection::new(self.spins.iter().map(|&s| s > 0).collect())
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }
}

/// Diagonal two-local Hamiltonian `sum_i h_i s_i + sum_{i<j} J_ij s_i s_j`
/// plus a tracked constant offset that is excluded from the cost function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsingModel {
    n: usize,
    h: Vec<Rational64>,
    j: BTreeMap<(usize, usize), Rational64>,
    offset: Rational64,
}

impl IsingModel {
    /// Builds a model from raw coefficients. Couplings are keyed by `(i, j)`
    /// with `i < j`; zero couplings are dropped.
    pub fn new(
        n: usize,
        h: Vec<Rational64>,
        couplings: impl IntoIterator<Item = ((usize, usize), Rational64)>,
        offset: Rational64,
    ) -> Self {
        assert_eq!(h.len(), n, "field coefficient count must equal spin count");
        let mut j = BTreeMap::new();
        for ((a, b), value) in couplings {
            assert!(a != b, "couplings must be off-diagonal");
            assert!(a < n && b < n, "coupling index out of range");
            if !value.is_zero() {
                let key = if a < b { (a, b) } else { (b, a) };
                *j.entry(key).or_insert_with(Rational64::zero) += value;
            }
        }
        j.retain(|_, v| !v.is_zero());
        IsingModel { n, h, j, offset }
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn field(&self, i: usize) -> Rational64 {
        self.h[i]
    }

    pub fn fields(&self) -> &[Rational64] {
        &self.h
    }

    /// Nonzero couplings, keyed `(i, j)` with `i < j`.
    pub fn couplings(&self) -> &BTreeMap<(usize, usize), Rational64> {
        &self.j
    }

    pub fn coupling(&self, i: usize, j: usize) -> Rational64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.j.get(&key).copied().unwrap_or_else(Rational64::zero)
    }

    pub fn offset(&self) -> Rational64 {
        self.offset
    }

    pub fn fields_f64(&self) -> Vec<f64> {
        self.h.iter().map(rational_to_f64).collect()
    }

    pub fn couplings_f64(&self) -> Vec<((usize, usize), f64)> {
        self.j
            .iter()
            .map(|(&k, v)| (k, rational_to_f64(v)))
            .collect()
    }

    pub fn offset_f64(&self) -> f64 {
        rational_to_f64(&self.offset)
    }

    /// Energy of a selection, offset excluded.
    pub fn energy(&self, sel: &Selection) -> Result<Rational64, IsingError> {
        if sel.len() != self.n {
            return Err(IsingError::WidthMismatch {
                got: sel.len(),
                expected: self.n,
            });
        }
        let spin = |i: usize| -> i64 {
            if sel.is_selected(i) {
                1
            } else {
                -1
            }
        };
        let mut e = Rational64::zero();
        for (i, hi) in self.h.iter().enumerate() {
            e += hi * Rational64::from_integer(spin(i));
        }
        for (&(i, j), jij) in &self.j {
            e += jij * Rational64::from_integer(spin(i) * spin(j));
        }
        Ok(e)
    }

    /// Energy including the constant offset; zero exactly on exact covers of
    /// the source instance when the model came from [`map_to_ising`].
    pub fn total_energy(&self, sel: &Selection) -> Result<Rational64, IsingError> {
        Ok(self.energy(sel)? + self.offset)
    }

    /// Energies over all `2^n` basis states as floats, indexed like
    /// [`Selection::to_index`]. Offset excluded; used by the simulator.
    pub fn energy_table(&self) -> Vec<f64> {
        let n = self.n;
        let mut table = vec![0.0f64; 1 << n];
        let h: Vec<f64> = self.fields_f64();
        let j = self.couplings_f64();
        for (index, slot) in table.iter_mut().enumerate() {
            let spin = |q: usize| -> f64 {
                if (index >> (n - 1 - q)) & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            };
            let mut e = 0.0;
            for (q, &hq) in h.iter().enumerate() {
                e += hq * spin(q);
            }
            for &((a, b), jab) in &j {
                e += jab * spin(a) * spin(b);
            }
            *slot = e;
        }
        table
    }

    /// Exhaustive minimum of [`IsingModel::energy`]; ties all returned.
    pub fn ground_states(&self) -> Result<(Rational64, Vec<Selection>), IsingError> {
        if self.n > MAX_BRUTE_FORCE_QUBITS {
            return Err(IsingError::TooLarge(self.n));
        }
        let mut best: Option<(Rational64, Vec<Selection>)> = None;
        for index in 0..(1usize << self.n) {
            let sel = Selection::from_index(index, self.n);
            let e = self.energy(&sel)?;
            match &mut best {
                None => best = Some((e, vec![sel])),
                Some((min, set)) => {
                    if e < *min {
                        *min = e;
                        set.clear();
                        set.push(sel);
                    } else if e == *min {
                        set.push(sel);
                    }
                }
            }
        }
        Ok(best.expect("n >= 1 guarantees at least one state"))
    }

    /// Rescales coefficients by the smallest positive integer that makes
    /// every achievable energy (offset excluded) an integer. The offset is
    /// scaled by the same factor and retained, so zero total energy still
    /// marks exact covers.
    ///
    /// Half-integer coefficients can already combine to integer energies
    /// (problem A does), so the scale comes from the spectrum, not from the
    /// coefficient denominators. Beyond the enumeration bound the
    /// coefficient-denominator lcm is used instead; it makes the spectrum
    /// integral but may overshoot the minimal scale.
    pub fn normalize_integer_spectrum(&self) -> IsingModel {
        let mut m: i64 = 1;
        if self.n <= MAX_BRUTE_FORCE_QUBITS {
            for index in 0..(1usize << self.n) {
                let e = self
                    .energy(&Selection::from_index(index, self.n))
                    .expect("width matches by construction");
                m = m.lcm(e.denom());
            }
        } else {
            for c in self.h.iter().chain(self.j.values()) {
                m = m.lcm(c.denom());
            }
        }
        let scale = Rational64::from_integer(m);
        IsingModel {
            n: self.n,
            h: self.h.iter().map(|c| c * scale).collect(),
            j: self.j.iter().map(|(&k, c)| (k, c * scale)).collect(),
            offset: self.offset * scale,
        }
    }

    /// Serializes to the model JSON format (`h`, `J`, `offset` as floats;
    /// coupling indices 1-based to match the `h_1, J_12` naming).
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            n: self.n,
            h: self.fields_f64(),
            J: self
                .j
                .iter()
                .map(|(&(a, b), v)| ((a + 1) as u64, (b + 1) as u64, rational_to_f64(v)))
                .collect(),
            offset: self.offset_f64(),
        };
        serde_json::to_string(&doc).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, IsingError> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| IsingError::Malformed(e.to_string()))?;
        if doc.h.len() != doc.n {
            return Err(IsingError::Malformed(format!(
                "expected {} field coefficients, got {}",
                doc.n,
                doc.h.len()
            )));
        }
        let h = doc
            .h
            .iter()
            .map(|&x| f64_to_rational(x))
            .collect::<Result<Vec<_>, _>>()?;
        let mut couplings = Vec::new();
        for &(a, b, v) in &doc.J {
            if a == 0 || b == 0 || a as usize > doc.n || b as usize > doc.n {
                return Err(IsingError::Malformed(format!(
                    "coupling index ({a},{b}) out of range"
                )));
            }
            couplings.push(((a as usize - 1, b as usize - 1), f64_to_rational(v)?));
        }
        let offset = f64_to_rational(doc.offset)?;
        Ok(IsingModel::new(doc.n, h, couplings, offset))
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelDoc {
    n: usize,
    h: Vec<f64>,
    J: Vec<(u64, u64, f64)>,
    offset: f64,
}

fn rational_to_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn f64_to_rational(x: f64) -> Result<Rational64, IsingError> {
    Rational64::approximate_float(x).ok_or(IsingError::NotRational(x))
}

/// Maps an instance to its penalty Hamiltonian.
///
/// With `k_u` = number of subsets containing element `u`:
/// `h_i = sum_{u in S_i} (k_u/2 - 1)`, `J_ij = |S_i ∩ S_j| / 2`, and
/// `offset = sum_u (1 - 3 k_u/4 + k_u^2/4)`.
pub fn map_to_ising(instance: &ExactCoverInstance) -> IsingModel {
    let n = instance.num_subsets();
    let mut membership: Vec<Vec<usize>> = vec![Vec::new(); instance.num_elements()];
    for (i, subset) in instance.subsets().iter().enumerate() {
        for &e in subset {
            membership[e].push(i);
        }
    }

    let half = Rational64::new(1, 2);
    let quarter = Rational64::new(1, 4);
    let mut h = vec![Rational64::zero(); n];
    let mut j: BTreeMap<(usize, usize), Rational64> = BTreeMap::new();
    let mut offset = Rational64::zero();

    for subsets_of_u in &membership {
        let k = Rational64::from_integer(subsets_of_u.len() as i64);
        offset += Rational64::from_integer(1) - k * Rational64::new(3, 4) + k * k * quarter;
        for (a, &i) in subsets_of_u.iter().enumerate() {
            h[i] += k * half - Rational64::from_integer(1);
            for &jj in &subsets_of_u[a + 1..] {
                *j.entry((i, jj)).or_insert_with(Rational64::zero) += half;
            }
        }
    }

    IsingModel::new(n, h, j, offset)
}

/// The two-subset encoding `h_1 = J - 2 c_1`, `h_2 = J - 2 c_2` for subset
/// sizes `c_1`, `c_2` and a chosen coupling `J`.
///
/// When the subsets share at least one element (`shared > 0`) the coupling
/// must satisfy `J > min(c_1, c_2)` to keep the double selection penalized;
/// disjoint subsets accept any nonnegative J (zero is the natural choice).
pub fn two_subset_coefficients(
    c1: usize,
    c2: usize,
    shared: usize,
    j: Rational64,
) -> Result<(Rational64, Rational64, Rational64), IsingError> {
    let min = c1.min(c2) as i64;
    if shared > 0 && j <= Rational64::from_integer(min) {
        return Err(IsingError::CouplingCriterion { j, min });
    }
    if shared == 0 && j.is_negative() {
        return Err(IsingError::CouplingCriterion { j, min });
    }
    let h1 = j - Rational64::from_integer(2 * c1 as i64);
    let h2 = j - Rational64::from_integer(2 * c2 as i64);
    Ok((h1, h2, j))
}

/// Convenience: builds the full 2-spin model from [`two_subset_coefficients`]
/// with zero offset (the encoding tracks no constant term).
pub fn two_subset_model(
    c1: usize,
    c2: usize,
    shared: usize,
    j: Rational64,
) -> Result<IsingModel, IsingError> {
    let (h1, h2, j) = two_subset_coefficients(c1, c2, shared, j)?;
    Ok(IsingModel::new(
        2,
        vec![h1, h2],
        [((0, 1), j)],
        Rational64::zero(),
    ))
}
