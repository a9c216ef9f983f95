//! Exact-cover problem instances and a brute-force solution oracle.
//!
//! An instance is a universe `X` of element labels together with an ordered
//! list of subsets `S_1..S_n`. A selection of subsets is an exact cover when
//! the chosen subsets are pairwise disjoint and their union is `X`. Subset
//! order is significant: subset `i` maps onto qubit `i` downstream.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Enumeration bound for the brute-force oracle.
pub const MAX_BRUTE_FORCE_QUBITS: usize = 24;

#[derive(Debug, Error)]
pub enum ExactCoverError {
    #[error("malformed instance document: {0}")]
    Malformed(String),
    #[error("duplicate element label `{0}`")]
    DuplicateElement(String),
    #[error("subset {subset} references unknown element `{label}`")]
    UnknownElement { subset: usize, label: String },
    #[error("instance must contain at least one subset")]
    NoSubsets,
    #[error("unknown built-in problem id `{0}`")]
    UnknownBuiltin(String),
    #[error("instance with {0} subsets exceeds the enumeration bound of {MAX_BRUTE_FORCE_QUBITS}")]
    TooLarge(usize),
    #[error("selection width {got} does not match instance subset count {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("selection strings may contain only '0' and '1'")]
    BadBitString,
}

/// One subset selection over an `n`-subset instance.
///
/// Bit `i` set means subset `S_{i+1}` is selected. Rendering is
/// most-significant-first: `"10"` selects subset 1 and not subset 2, so the
/// printed form matches the ket labels used for measurement outcomes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Selection {
    bits: Vec<bool>,
}

impl Selection {
    pub fn new(bits: Vec<bool>) -> Self {
        Selection { bits }
    }

    /// Parses `"10"`-style strings, leftmost character = subset 1.
    pub fn from_bit_string(s: &str) -> Result<Self, ExactCoverError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(ExactCoverError::BadBitString),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Selection::new)
    }

    /// Builds the selection whose rendered string is `index` in binary,
    /// zero-padded to `n` characters. This is the basis-state ordering used
    /// by the simulator (subset 1 = most significant bit).
    pub fn from_index(index: usize, n: usize) -> Self {
        let bits = (0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect();
        Selection { bits }
    }

    /// Inverse of [`Selection::from_index`].
    pub fn to_index(&self) -> usize {
        self.bits
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_selected(&self, subset: usize) -> bool {
        self.bits[subset]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// An exact-cover problem: universe `elements` and subsets thereof.
///
/// Immutable after construction; subsets are stored as sorted element
/// indices into `elements`. Empty and duplicate subsets are legal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCoverInstance {
    name: Option<String>,
    elements: Vec<String>,
    subsets: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    elements: Vec<String>,
    subsets: Vec<Vec<String>>,
}

impl ExactCoverInstance {
    /// Validates labels and builds the canonical internal form. Elements of
    /// each subset are deduplicated and sorted into universe order.
    pub fn new(
        name: Option<String>,
        elements: Vec<String>,
        subsets: Vec<Vec<String>>,
    ) -> Result<Self, ExactCoverError> {
        if subsets.is_empty() {
            return Err(ExactCoverError::NoSubsets);
        }
        let mut seen = BTreeSet::new();
        for label in &elements {
            if !seen.insert(label.clone()) {
                return Err(ExactCoverError::DuplicateElement(label.clone()));
            }
        }
        let index_of = |label: &str| elements.iter().position(|e| e == label);
        let mut indexed = Vec::with_capacity(subsets.len());
        for (si, subset) in subsets.iter().enumerate() {
            let mut ids = BTreeSet::new();
            for label in subset {
                match index_of(label) {
                    Some(id) => {
                        ids.insert(id);
                    }
                    None => {
                        return Err(ExactCoverError::UnknownElement {
                            subset: si + 1,
                            label: label.clone(),
                        })
                    }
                }
            }
            indexed.push(ids.into_iter().collect());
        }
        Ok(ExactCoverInstance {
            name,
            elements,
            subsets: indexed,
        })
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Number of subsets, i.e. the qubit count downstream.
    pub fn num_subsets(&self) -> usize {
        self.subsets.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    /// Subset contents as sorted indices into [`ExactCoverInstance::elements`].
    pub fn subset(&self, i: usize) -> &[usize] {
        &self.subsets[i]
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// True when the selected subsets are pairwise disjoint and cover the
    /// whole universe.
    pub fn is_exact_cover(&self, sel: &Selection) -> Result<bool, ExactCoverError> {
        if sel.len() != self.num_subsets() {
            return Err(ExactCoverError::WidthMismatch {
                got: sel.len(),
                expected: self.num_subsets(),
            });
        }
        let mut covered = vec![0usize; self.elements.len()];
        for (i, subset) in self.subsets.iter().enumerate() {
            if sel.is_selected(i) {
                for &e in subset {
                    covered[e] += 1;
                }
            }
        }
        Ok(covered.iter().all(|&c| c == 1))
    }
}

/// Parses the JSON instance format. Round-trips byte-equivalently through
/// [`serialize_instance`] once canonicalized.
pub fn parse_instance(text: &str) -> Result<ExactCoverInstance, ExactCoverError> {
    let doc: InstanceDoc =
        serde_json::from_str(text).map_err(|e| ExactCoverError::Malformed(e.to_string()))?;
    ExactCoverInstance::new(doc.name, doc.elements, doc.subsets)
}

/// Canonical JSON serialization: keys in the order `name`, `elements`,
/// `subsets`; subset members in universe order; no trailing whitespace.
pub fn serialize_instance(instance: &ExactCoverInstance) -> String {
    let doc = InstanceDoc {
        name: instance.name.clone(),
        elements: instance.elements.clone(),
        subsets: instance
            .subsets
            .iter()
            .map(|s| s.iter().map(|&e| instance.elements[e].clone()).collect())
            .collect(),
    };
    serde_json::to_string(&doc).expect("instance serialization cannot fail")
}

/// The four built-in two-subset problems.
///
/// | id | subsets                     | covers          |
/// |----|-----------------------------|-----------------|
/// | A  | {x1,x2}, {x1}               | `10`            |
/// | B  | {x1,x2}, {}                 | `10`, `11`      |
/// | C  | {x1}, {x2}                  | `11`            |
/// | D  | {x1,x2}, {x1,x2}            | `10`, `01`      |
pub fn builtin_problem(id: &str) -> Result<ExactCoverInstance, ExactCoverError> {
    let (name, subsets): (&str, Vec<Vec<&str>>) = match id {
        "A" | "a" => ("A", vec![vec!["x1", "x2"], vec!["x1"]]),
        "B" | "b" => ("B", vec![vec!["x1", "x2"], vec![]]),
        "C" | "c" => ("C", vec![vec!["x1"], vec!["x2"]]),
        "D" | "d" => ("D", vec![vec!["x1", "x2"], vec!["x1", "x2"]]),
        other => return Err(ExactCoverError::UnknownBuiltin(other.to_string())),
    };
    ExactCoverInstance::new(
        Some(name.to_string()),
        vec!["x1".to_string(), "x2".to_string()],
        subsets
            .into_iter()
            .map(|s| s.into_iter().map(str::to_string).collect())
            .collect(),
    )
}

/// Enumerates every selection and keeps the exact covers. Ground-truth
/// oracle for everything downstream; rejects instances wider than
/// [`MAX_BRUTE_FORCE_QUBITS`].
pub fn brute_force_covers(
    instance: &ExactCoverInstance,
) -> Result<BTreeSet<Selection>, ExactCoverError> {
    let n = instance.num_subsets();
    if n > MAX_BRUTE_FORCE_QUBITS {
        return Err(ExactCoverError::TooLarge(n));
    }
    let mut covers = BTreeSet::new();
    for index in 0..(1usize << n) {
        let sel = Selection::from_index(index, n);
        if instance.is_exact_cover(&sel)? {
            covers.insert(sel);
        }
    }
    Ok(covers)
}
