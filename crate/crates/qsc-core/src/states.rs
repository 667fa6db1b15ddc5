//! State assignments, their validation, and the on-disk formats.
//!
//! A quantum assignment is a list of labelled density operators over one
//! shared Hilbert space; a classical assignment is a list of labelled
//! probability vectors over one shared outcome set. Validation is strict
//! about anything beyond tolerance and quietly repairs anything below it:
//! eigenvalue dust slightly below zero is clipped and the trace
//! renormalised, so downstream code can rely on exact positivity. Repair is
//! idempotent, which keeps serialize/parse round trips bit-stable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    hermitian_eigendecomposition, Complex64, ComplexMatrix, LinalgError, Tolerances,
};

/// Trace may deviate from one by at most this much before validation fails.
pub const TRACE_TOLERANCE: f64 = 1e-8;
/// Violations below this threshold are accepted as-is rather than repaired,
/// which makes validation idempotent.
const REPAIR_FLOOR: f64 = 1e-14;
/// Classical probability vectors must sum to one within this bound.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("state '{label}': matrix is {rows}x{cols}, expected {dim}x{dim}")]
    WrongShape {
        label: String,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("state '{label}': entries must be finite")]
    NonFinite { label: String },
    #[error("state '{label}': not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { label: String, deviation: f64 },
    #[error("state '{label}': not positive semidefinite (eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { label: String, min_eigenvalue: f64 },
    #[error("state '{label}': trace {trace} differs from 1 beyond tolerance")]
    TraceNotOne { label: String, trace: f64 },
    #[error("duplicate label '{label}'")]
    DuplicateLabel { label: String },
    #[error("assignment must contain at least one party")]
    Empty,
    #[error("dimension must be at least 1, got {dim}")]
    BadDimension { dim: usize },
    #[error("state '{label}' has dimension {got}, file declares {expected}")]
    DimensionMismatch {
        label: String,
        expected: usize,
        got: usize,
    },
    #[error("operation requires qubits, dimension is {dim}")]
    NotQubit { dim: usize },
    #[error("party '{label}': {detail}")]
    BadProbability { label: String, detail: String },
    #[error("Bloch vector has norm {norm}, must be at most 1")]
    BlochTooLong { norm: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A labelled density operator, validated on construction.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    label: String,
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates a raw matrix as a density operator.
    ///
    /// Requirements: square, finite, Hermitian within `tol_orth`, eigenvalues
    /// at least `-tol_rank`, and unit trace within `1e-8`. Sub-tolerance
    /// violations are repaired by clipping eigenvalues into `[0, 1]` and
    /// renormalising the trace; anything beyond tolerance is an error.
    pub fn new(
        label: impl Into<String>,
        matrix: ComplexMatrix,
        tol: &Tolerances,
    ) -> Result<Self, StateError> {
        let label = label.into();
        if !matrix.is_square() || matrix.rows() == 0 {
            return Err(StateError::WrongShape {
                dim: matrix.rows().max(1),
                rows: matrix.rows(),
                cols: matrix.cols(),
                label,
            });
        }
        if !matrix.is_finite() {
            return Err(StateError::NonFinite { label });
        }
        let scale = matrix.frobenius_norm().max(1.0);
        let deviation = matrix.hermitian_deviation();
        if deviation > tol.tol_orth * scale {
            return Err(StateError::NotHermitian { label, deviation });
        }
        let eig = hermitian_eigendecomposition(&matrix, tol)?;
        let min_eig = eig.last().map(|(l, _)| *l).unwrap_or(0.0);
        if min_eig < -tol.tol_rank {
            return Err(StateError::NotPositive {
                label,
                min_eigenvalue: min_eig,
            });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOLERANCE {
            return Err(StateError::TraceNotOne { label, trace });
        }
        let max_eig = eig.first().map(|(l, _)| *l).unwrap_or(0.0);
        let needs_repair = min_eig < -REPAIR_FLOOR
            || max_eig > 1.0 + REPAIR_FLOOR
            || (trace - 1.0).abs() > REPAIR_FLOOR;
        let matrix = if needs_repair {
            let mut rebuilt = ComplexMatrix::zeros(matrix.rows(), matrix.cols());
            let mut total = 0.0;
            for (l, v) in &eig {
                let clipped = l.clamp(0.0, 1.0);
                if clipped > 0.0 {
                    rebuilt = rebuilt.add(&ComplexMatrix::outer(v).scale(Complex64::new(clipped, 0.0)));
                    total += clipped;
                }
            }
            rebuilt.scale(Complex64::new(1.0 / total, 0.0))
        } else {
            matrix
        };
        Ok(DensityOperator { label, matrix })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Rank-one state from a unit vector.
    pub fn pure(
        label: impl Into<String>,
        vector: &[Complex64],
        tol: &Tolerances,
    ) -> Result<Self, StateError> {
        Self::new(label, ComplexMatrix::outer(&crate::linalg::normalize(vector)), tol)
    }
}

/// A collection of density operators over one Hilbert space with unique
/// labels. Order is preserved and meaningful for witness reporting.
#[derive(Clone, Debug)]
pub struct StateEnsemble {
    dim: usize,
    states: Vec<DensityOperator>,
}

impl StateEnsemble {
    pub fn new(states: Vec<DensityOperator>) -> Result<Self, StateError> {
        let first = states.first().ok_or(StateError::Empty)?;
        let dim = first.dim();
        let mut seen = std::collections::HashSet::new();
        for s in &states {
            if s.dim() != dim {
                return Err(StateError::DimensionMismatch {
                    label: s.label().to_string(),
                    expected: dim,
                    got: s.dim(),
                });
            }
            if !seen.insert(s.label().to_string()) {
                return Err(StateError::DuplicateLabel {
                    label: s.label().to_string(),
                });
            }
        }
        Ok(StateEnsemble { dim, states })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn labels(&self) -> Vec<String> {
        self.states.iter().map(|s| s.label().to_string()).collect()
    }

    pub fn to_file(&self) -> QuantumStatesFile {
        QuantumStatesFile {
            dim: self.dim,
            states: self
                .states
                .iter()
                .map(|s| StateRecord {
                    label: s.label().to_string(),
                    matrix: s.matrix().clone(),
                })
                .collect(),
        }
    }
}

/// Bloch vector of a qubit state, `n_i = tr(rho sigma_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(pub [f64; 3]);

impl BlochVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// The Pauli matrices in the standard basis.
pub fn pauli_matrices() -> [ComplexMatrix; 3] {
    let z = |re: f64, im: f64| Complex64::new(re, im);
    [
        ComplexMatrix::from_rows(&[vec![z(0.0, 0.0), z(1.0, 0.0)], vec![z(1.0, 0.0), z(0.0, 0.0)]]),
        ComplexMatrix::from_rows(&[vec![z(0.0, 0.0), z(0.0, -1.0)], vec![z(0.0, 1.0), z(0.0, 0.0)]]),
        ComplexMatrix::from_rows(&[vec![z(1.0, 0.0), z(0.0, 0.0)], vec![z(0.0, 0.0), z(-1.0, 0.0)]]),
    ]
}

pub fn to_bloch(rho: &DensityOperator) -> Result<BlochVector, StateError> {
    if rho.dim() != 2 {
        return Err(StateError::NotQubit { dim: rho.dim() });
    }
    let paulis = pauli_matrices();
    let mut n = [0.0; 3];
    for (i, sigma) in paulis.iter().enumerate() {
        n[i] = rho.matrix().mul(sigma).trace().re;
    }
    Ok(BlochVector(n))
}

/// Qubit state `(1 + n . sigma)/2` from a Bloch vector with `|n| <= 1`.
pub fn from_bloch(
    label: impl Into<String>,
    n: BlochVector,
    tol: &Tolerances,
) -> Result<DensityOperator, StateError> {
    if n.norm() > 1.0 + 1e-9 {
        return Err(StateError::BlochTooLong { norm: n.norm() });
    }
    let paulis = pauli_matrices();
    let mut m = ComplexMatrix::identity(2);
    for (i, sigma) in paulis.iter().enumerate() {
        m = m.add(&sigma.scale(Complex64::new(n.0[i], 0.0)));
    }
    DensityOperator::new(label, m.scale(Complex64::new(0.5, 0.0)), tol)
}

/// Finds a basis that simultaneously diagonalises every state, if the
/// ensemble commutes pairwise. Returns the basis as a unitary whose columns
/// are the joint eigenvectors, or `None` when some pair fails to commute
/// within `tol_orth`.
///
/// The basis is found by diagonalising a random real combination of the
/// states and recursively refining inside degenerate eigenvalue clusters, so
/// coinciding spectra do not break it.
pub fn commuting_eigenbasis(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<Option<ComplexMatrix>, StateError> {
    let mats: Vec<&ComplexMatrix> = ensemble.states().iter().map(|s| s.matrix()).collect();
    for i in 0..mats.len() {
        for j in (i + 1)..mats.len() {
            let comm = mats[i].mul(mats[j]).sub(&mats[j].mul(mats[i]));
            if comm.frobenius_norm() > tol.tol_orth {
                return Ok(None);
            }
        }
    }
    let d = ensemble.dim();
    for attempt in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_BA5E ^ attempt);
        let basis = simdiag(&mats, ComplexMatrix::identity(d), &mut rng, tol, 0)?;
        let ok = mats.iter().all(|m| {
            let t = basis.dagger().mul(m).mul(&basis);
            off_diagonal_norm(&t) <= 1e-8 * m.frobenius_norm().max(1.0)
        });
        if ok {
            return Ok(Some(basis));
        }
    }
    Ok(None)
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let mut acc = 0.0;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            if r != c {
                acc += m.get(r, c).norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn simdiag(
    mats: &[&ComplexMatrix],
    frame: ComplexMatrix,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
    depth: usize,
) -> Result<ComplexMatrix, StateError> {
    use rand::Rng;
    let d = frame.cols();
    if d <= 1 || depth > 2 * frame.rows() {
        return Ok(frame);
    }
    let restricted: Vec<ComplexMatrix> = mats
        .iter()
        .map(|m| frame.dagger().mul(m).mul(&frame))
        .collect();
    let mut comb = ComplexMatrix::zeros(d, d);
    for a in &restricted {
        let c: f64 = rng.gen_range(-1.0..1.0);
        comb = comb.add(&a.scale(Complex64::new(c, 0.0)));
    }
    // All restrictions scalar means any orthonormal basis of this block works.
    let all_scalar = restricted.iter().all(|a| {
        let mean = a.trace().re / d as f64;
        a.sub(&ComplexMatrix::identity(d).scale(Complex64::new(mean, 0.0)))
            .frobenius_norm()
            <= 1e-12
    });
    if all_scalar {
        return Ok(frame);
    }
    let eig = hermitian_eigendecomposition(&comb, tol)?;
    let lam_scale = eig
        .iter()
        .map(|(l, _)| l.abs())
        .fold(1.0_f64, f64::max);
    let cluster_gap = 1e-8 * lam_scale;
    let mut out_cols: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    let mut idx = 0;
    while idx < eig.len() {
        let mut end = idx + 1;
        while end < eig.len() && (eig[end - 1].0 - eig[end].0).abs() <= cluster_gap {
            end += 1;
        }
        let cluster_cols: Vec<Vec<Complex64>> =
            (idx..end).map(|k| frame.apply(&eig[k].1)).collect();
        if end - idx == 1 {
            out_cols.push(cluster_cols.into_iter().next().unwrap());
        } else {
            let sub = ComplexMatrix::from_columns(frame.rows(), &cluster_cols);
            let refined = simdiag(mats, sub, rng, tol, depth + 1)?;
            for c in 0..refined.cols() {
                out_cols.push(refined.column(c));
            }
        }
        idx = end;
    }
    Ok(ComplexMatrix::from_columns(frame.rows(), &out_cols))
}

/// A labelled classical probability assignment over a shared outcome set.
#[derive(Clone, Debug)]
pub struct ClassicalAssignment {
    outcomes: usize,
    parties: Vec<(String, Vec<f64>)>,
}

impl ClassicalAssignment {
    /// Each vector must be entrywise nonnegative and sum to 1 within `1e-9`.
    /// Negative dust above `-1e-9` is clipped and the vector renormalised.
    pub fn new(outcomes: usize, parties: Vec<(String, Vec<f64>)>) -> Result<Self, StateError> {
        if parties.is_empty() {
            return Err(StateError::Empty);
        }
        if outcomes == 0 {
            return Err(StateError::BadDimension { dim: 0 });
        }
        let mut seen = std::collections::HashSet::new();
        let mut cleaned = Vec::with_capacity(parties.len());
        for (label, probs) in parties {
            if !seen.insert(label.clone()) {
                return Err(StateError::DuplicateLabel { label });
            }
            if probs.len() != outcomes {
                return Err(StateError::BadProbability {
                    label,
                    detail: format!("expected {} outcomes, got {}", outcomes, probs.len()),
                });
            }
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(StateError::BadProbability {
                    label,
                    detail: "entries must be finite".into(),
                });
            }
            if let Some(p) = probs.iter().find(|p| **p < -PROB_SUM_TOLERANCE) {
                return Err(StateError::BadProbability {
                    label,
                    detail: format!("negative probability {p}"),
                });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(StateError::BadProbability {
                    label,
                    detail: format!("probabilities sum to {sum}"),
                });
            }
            let needs_repair =
                probs.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > REPAIR_FLOOR;
            let probs = if needs_repair {
                let clipped: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
                let total: f64 = clipped.iter().sum();
                clipped.into_iter().map(|p| p / total).collect()
            } else {
                probs
            };
            cleaned.push((label, probs));
        }
        Ok(ClassicalAssignment {
            outcomes,
            parties: cleaned,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn parties(&self) -> &[(String, Vec<f64>)] {
        &self.parties
    }

    pub fn to_file(&self) -> ClassicalFile {
        ClassicalFile {
            outcomes: self.outcomes,
            parties: self
                .parties
                .iter()
                .map(|(label, probs)| PartyRecord {
                    label: label.clone(),
                    probs: probs.clone(),
                })
                .collect(),
        }
    }
}

/// On-disk form of a quantum assignment. Unknown top-level keys are
/// rejected so that typos fail loudly instead of being ignored.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumStatesFile {
    pub dim: usize,
    pub states: Vec<StateRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub label: String,
    pub matrix: ComplexMatrix,
}

impl QuantumStatesFile {
    pub fn parse(json: &str) -> Result<Self, StateError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<StateEnsemble, StateError> {
        if self.dim == 0 {
            return Err(StateError::BadDimension { dim: 0 });
        }
        let mut states = Vec::with_capacity(self.states.len());
        for rec in &self.states {
            if rec.matrix.rows() != self.dim || rec.matrix.cols() != self.dim {
                return Err(StateError::DimensionMismatch {
                    label: rec.label.clone(),
                    expected: self.dim,
                    got: rec.matrix.rows(),
                });
            }
            states.push(DensityOperator::new(rec.label.clone(), rec.matrix.clone(), tol)?);
        }
        StateEnsemble::new(states)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialization cannot fail")
    }
}

/// On-disk form of a classical assignment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalFile {
    pub outcomes: usize,
    pub parties: Vec<PartyRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyRecord {
    pub label: String,
    pub probs: Vec<f64>,
}

impl ClassicalFile {
    pub fn parse(json: &str) -> Result<Self, StateError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn validate(&self) -> Result<ClassicalAssignment, StateError> {
        ClassicalAssignment::new(
            self.outcomes,
            self.parties
                .iter()
                .map(|p| (p.label.clone(), p.probs.clone()))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialization cannot fail")
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::{inner, normalize, random_unitary, support};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn validates_maximally_mixed() {
        let m = ComplexMatrix::identity(3).scale(c(1.0 / 3.0, 0.0));
        let rho = DensityOperator::new("A", m, &tol()).unwrap();
        assert_eq!(rho.dim(), 3);
        assert_eq!(support(rho.matrix(), &tol()).unwrap().dim(), 3);
    }

    #[test]
    fn rejects_non_hermitian_and_bad_trace() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m.set(0, 0, c(1.0, 0.0));
        m.set(0, 1, c(0.5, 0.0));
        assert!(matches!(
            DensityOperator::new("A", m, &tol()),
            Err(StateError::NotHermitian { .. })
        ));

        let m2 = ComplexMatrix::identity(2);
        assert!(matches!(
            DensityOperator::new("A", m2, &tol()),
            Err(StateError::TraceNotOne { .. })
        ));
    }

    #[test]
    fn rejects_negative_eigenvalue_beyond_tolerance() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m.set(0, 0, c(1.5, 0.0));
        m.set(1, 1, c(-0.5, 0.0));
        assert!(matches!(
            DensityOperator::new("A", m, &tol()),
            Err(StateError::NotPositive { .. })
        ));
    }

    #[test]
    fn repairs_subtolerance_negative_dust() {
        let eps = 1e-12;
        let mut m = ComplexMatrix::zeros(2, 2);
        m.set(0, 0, c(1.0 + eps, 0.0));
        m.set(1, 1, c(-eps, 0.0));
        let rho = DensityOperator::new("A", m, &tol()).unwrap();
        let eig = hermitian_eigendecomposition(rho.matrix(), &tol()).unwrap();
        assert!(eig.iter().all(|(l, _)| *l >= 0.0));
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
        // Repair is idempotent: validating the repaired matrix changes nothing.
        let again = DensityOperator::new("A", rho.matrix().clone(), &tol()).unwrap();
        assert_eq!(again.matrix(), rho.matrix());
    }

    #[test]
    fn ensemble_rejects_duplicates_and_mixed_dims() {
        let t = tol();
        let a = DensityOperator::new("A", ComplexMatrix::identity(2).scale(c(0.5, 0.0)), &t).unwrap();
        let a2 = DensityOperator::new("A", ComplexMatrix::identity(2).scale(c(0.5, 0.0)), &t).unwrap();
        assert!(matches!(
            StateEnsemble::new(vec![a.clone(), a2]),
            Err(StateError::DuplicateLabel { .. })
        ));
        let b = DensityOperator::new("B", ComplexMatrix::identity(3).scale(c(1.0 / 3.0, 0.0)), &t).unwrap();
        assert!(matches!(
            StateEnsemble::new(vec![a, b]),
            Err(StateError::DimensionMismatch { .. })
        ));
        assert!(matches!(StateEnsemble::new(vec![]), Err(StateError::Empty)));
    }

    #[test]
    fn bloch_round_trip_cardinal_states() {
        let t = tol();
        for (n, name) in [
            ([0.0, 0.0, 1.0], "up"),
            ([0.0, 0.0, -1.0], "down"),
            ([1.0, 0.0, 0.0], "plus"),
            ([0.0, 1.0, 0.0], "i"),
            ([0.0, 0.0, 0.0], "mixed"),
        ] {
            let rho = from_bloch(name, BlochVector(n), &t).unwrap();
            let back = to_bloch(&rho).unwrap();
            for (i, (&got, &want)) in back.0.iter().zip(&n).enumerate() {
                assert!((got - want).abs() < 1e-12, "{name} axis {i}");
            }
        }
        assert!(from_bloch("x", BlochVector([1.0, 1.0, 0.0]), &t).is_err());
    }

    #[test]
    fn commuting_ensemble_gets_joint_basis() {
        let t = tol();
        // Two diagonal states conjugated by one random unitary, with a
        // degenerate pair of eigenvalues to exercise cluster refinement.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(3, &mut rng);
        let diag = |v: [f64; 3]| {
            let mut m = ComplexMatrix::zeros(3, 3);
            for (i, &vi) in v.iter().enumerate() {
                m.set(i, i, c(vi, 0.0));
            }
            u.mul(&m).mul(&u.dagger())
        };
        let a = DensityOperator::new("A", diag([0.5, 0.25, 0.25]), &t).unwrap();
        let b = DensityOperator::new("B", diag([0.2, 0.3, 0.5]), &t).unwrap();
        let ens = StateEnsemble::new(vec![a, b]).unwrap();
        let basis = commuting_eigenbasis(&ens, &t).unwrap().expect("commutes");
        for s in ens.states() {
            let d = basis.dagger().mul(s.matrix()).mul(&basis);
            assert!(off_diagonal_norm(&d) < 1e-9, "state {}", s.label());
        }
    }

    #[test]
    fn non_commuting_ensemble_gets_none() {
        let t = tol();
        let a = from_bloch("A", BlochVector([0.0, 0.0, 0.9]), &t).unwrap();
        let b = from_bloch("B", BlochVector([0.9, 0.0, 0.0]), &t).unwrap();
        let ens = StateEnsemble::new(vec![a, b]).unwrap();
        assert!(commuting_eigenbasis(&ens, &t).unwrap().is_none());
    }

    #[test]
    fn classical_assignment_validation() {
        assert!(ClassicalAssignment::new(
            3,
            vec![("A".into(), vec![0.5, 0.5, 0.0])]
        )
        .is_ok());
        assert!(matches!(
            ClassicalAssignment::new(3, vec![("A".into(), vec![0.5, 0.6, 0.0])]),
            Err(StateError::BadProbability { .. })
        ));
        assert!(matches!(
            ClassicalAssignment::new(3, vec![("A".into(), vec![1.5, -0.5, 0.0])]),
            Err(StateError::BadProbability { .. })
        ));
        assert!(matches!(
            ClassicalAssignment::new(2, vec![("A".into(), vec![1.0])]),
            Err(StateError::BadProbability { .. })
        ));
        assert!(matches!(
            ClassicalAssignment::new(2, vec![]),
            Err(StateError::Empty)
        ));
    }

    #[test]
    fn quantum_file_rejects_unknown_keys() {
        let json = r#"{"dim": 2, "states": [], "extra": 1}"#;
        assert!(QuantumStatesFile::parse(json).is_err());
        let json = r#"{"outcomes": 2, "parties": [], "extra": 1}"#;
        assert!(ClassicalFile::parse(json).is_err());
    }

    #[test]
    fn quantum_file_round_trip() {
        let json = r#"{
            "dim": 2,
            "states": [
                {"label": "A", "matrix": [[[0.5, 0.0], [0.0, -0.5]], [[0.0, 0.5], [0.5, 0.0]]]}
            ]
        }"#;
        let file = QuantumStatesFile::parse(json).unwrap();
        let ens = file.validate(&tol()).unwrap();
        assert_eq!(ens.dim(), 2);
        assert_eq!(ens.states()[0].label(), "A");
        let back = QuantumStatesFile::parse(&ens.to_file().to_json()).unwrap();
        let ens2 = back.validate(&tol()).unwrap();
        assert_eq!(ens.states()[0].matrix(), ens2.states()[0].matrix());
    }

    /// Random density operator as a convex mixture of random pure states.
    pub fn random_density(
        label: &str,
        dim: usize,
        rank: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> DensityOperator {
        let t = Tolerances::default();
        let mut weights: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let u = random_unitary(dim, rng);
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (k, w) in weights.iter().enumerate() {
            m = m.add(&ComplexMatrix::outer(&u.column(k)).scale(c(*w, 0.0)));
        }
        DensityOperator::new(label, m, &t).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn file_round_trip_is_bitwise_stable(seed in 0u64..5000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dim = rng.gen_range(2..5usize);
            let rank = rng.gen_range(1..=dim);
            let rho = random_density("A", dim, rank, &mut rng);
            let ens = StateEnsemble::new(vec![rho]).unwrap();
            let json = ens.to_file().to_json();
            let ens2 = QuantumStatesFile::parse(&json).unwrap().validate(&tol()).unwrap();
            // Bit-level stability: floats rendered by serde_json round-trip
            // exactly, and validation does not rewrite a repaired matrix.
            prop_assert_eq!(ens.states()[0].matrix(), ens2.states()[0].matrix());
        }

        #[test]
        fn bloch_map_is_affine(seed in 0u64..5000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t = tol();
            let a = random_density("A", 2, rng.gen_range(1..=2), &mut rng);
            let b = random_density("B", 2, rng.gen_range(1..=2), &mut rng);
            let w: f64 = rng.gen_range(0.0..1.0);
            let mixed = DensityOperator::new(
                "M",
                a.matrix().scale(c(w, 0.0)).add(&b.matrix().scale(c(1.0 - w, 0.0))),
                &t,
            ).unwrap();
            let na = to_bloch(&a).unwrap();
            let nb = to_bloch(&b).unwrap();
            let nm = to_bloch(&mixed).unwrap();
            for i in 0..3 {
                prop_assert!((nm.0[i] - (w * na.0[i] + (1.0 - w) * nb.0[i])).abs() < 1e-10);
            }
            prop_assert!(nm.norm() <= 1.0 + 1e-9);
        }

        #[test]
        fn pure_states_have_unit_bloch_vectors(seed in 0u64..5000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v = crate::linalg::random_unit_vector(2, &mut rng);
            let rho = DensityOperator::pure("P", &v, &tol()).unwrap();
            let n = to_bloch(&rho).unwrap();
            prop_assert!((n.norm() - 1.0).abs() < 1e-10);
            // And the Bloch map is faithful: overlap formula against a
            // second pure state.
            let w = crate::linalg::random_unit_vector(2, &mut rng);
            let sigma = DensityOperator::pure("Q", &w, &tol()).unwrap();
            let m = to_bloch(&sigma).unwrap();
            let dot: f64 = n.0.iter().zip(m.0.iter()).map(|(x, y)| x * y).sum();
            let overlap = inner(&normalize(&v), &normalize(&w)).norm_sqr();
            prop_assert!(((1.0 + dot) / 2.0 - overlap).abs() < 1e-10);
        }
    }
}
