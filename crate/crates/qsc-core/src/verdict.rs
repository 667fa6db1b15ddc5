//! Verdicts, witnesses, and the witness self-checker.
//!
//! Every criterion check returns a [`CompatibilityVerdict`] carrying a
//! witness that can be re-evaluated against the input assignment on its own,
//! without trusting the code that produced it. [`verify_quantum_witness`]
//! and [`verify_classical_witness`] implement exactly those re-evaluations;
//! the test suite runs them on every witness the crate ever emits.

use serde::{Deserialize, Serialize};

use crate::linalg::{cvec, expectation, inner, vec_norm, Complex64, ComplexMatrix, Tolerances};
use crate::states::{ClassicalAssignment, StateEnsemble};

/// Verdicts within this distance of a decision boundary carry the
/// `boundary` flag. The boolean itself is unaffected: incompatibility
/// conditions are strict inequalities, so exact boundary points count as
/// compatible.
pub const BOUNDARY_BAND: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "ES")]
    Es,
    #[serde(rename = "BFM")]
    Bfm,
    #[serde(rename = "PP_ODOP")]
    PpOdop,
    #[serde(rename = "PP_POVM")]
    PpPovm,
    #[serde(rename = "PAIRWISE_PP")]
    PairwisePp,
    #[serde(rename = "W")]
    W,
    #[serde(rename = "W_PRIME")]
    WPrime,
    #[serde(rename = "CLASSICAL_ES")]
    ClassicalEs,
    #[serde(rename = "CLASSICAL_BFM")]
    ClassicalBfm,
    #[serde(rename = "CLASSICAL_PP")]
    ClassicalPp,
    #[serde(rename = "CLASSICAL_W")]
    ClassicalW,
    #[serde(rename = "CLASSICAL_W_PRIME")]
    ClassicalWPrime,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Criterion::Es => "ES",
            Criterion::Bfm => "BFM",
            Criterion::PpOdop => "PP_ODOP",
            Criterion::PpPovm => "PP_POVM",
            Criterion::PairwisePp => "PAIRWISE_PP",
            Criterion::W => "W",
            Criterion::WPrime => "W_PRIME",
            Criterion::ClassicalEs => "CLASSICAL_ES",
            Criterion::ClassicalBfm => "CLASSICAL_BFM",
            Criterion::ClassicalPp => "CLASSICAL_PP",
            Criterion::ClassicalW => "CLASSICAL_W",
            Criterion::ClassicalWPrime => "CLASSICAL_W_PRIME",
        };
        f.write_str(s)
    }
}

/// A measurement: either an orthogonal basis (each column one outcome) or a
/// general positive operator decomposition of the identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measurement {
    Odop { basis: ComplexMatrix },
    Povm { elements: Vec<ComplexMatrix> },
}

/// Outcome-major table of probabilities `tr(rho_party E_outcome)`.
pub fn measurement_probabilities(m: &Measurement, ensemble: &StateEnsemble) -> Vec<Vec<f64>> {
    match m {
        Measurement::Odop { basis } => (0..basis.cols())
            .map(|k| {
                let v = basis.column(k);
                ensemble
                    .states()
                    .iter()
                    .map(|s| expectation(s.matrix(), &v))
                    .collect()
            })
            .collect(),
        Measurement::Povm { elements } => elements
            .iter()
            .map(|e| {
                ensemble
                    .states()
                    .iter()
                    .map(|s| s.matrix().mul(e).trace().re)
                    .collect()
            })
            .collect(),
    }
}

/// Checks that POVM elements are Hermitian, positive semidefinite, and sum
/// to the identity on the given dimension.
pub fn validate_povm(
    elements: &[ComplexMatrix],
    dim: usize,
    tol: &Tolerances,
) -> Result<(), String> {
    if elements.is_empty() {
        return Err("POVM has no elements".into());
    }
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for (k, e) in elements.iter().enumerate() {
        if e.rows() != dim || e.cols() != dim {
            return Err(format!("element {k} has shape {}x{}", e.rows(), e.cols()));
        }
        if e.hermitian_deviation() > 1e-8 * e.frobenius_norm().max(1.0) {
            return Err(format!("element {k} is not Hermitian"));
        }
        let eig = crate::linalg::hermitian_eigendecomposition(e, tol)
            .map_err(|err| format!("element {k}: {err}"))?;
        if let Some((min, _)) = eig.last() {
            if *min < -1e-9 {
                return Err(format!("element {k} has negative eigenvalue {min:.3e}"));
            }
        }
        sum = sum.add(e);
    }
    let resid = sum.sub(&ComplexMatrix::identity(dim)).frobenius_norm();
    if resid > 1e-8 * (dim as f64).sqrt() {
        return Err(format!("elements sum to identity only within {resid:.3e}"));
    }
    Ok(())
}

/// Independently checkable evidence attached to every verdict. Each variant
/// documents the invariant [`verify_quantum_witness`] or
/// [`verify_classical_witness`] re-evaluates for it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Unit vector with `<v|rho|v> > tol_zero` for every party.
    SharedSupportVector {
        #[serde(with = "cvec")]
        vector: Vec<Complex64>,
    },
    /// Orthonormal frame spanning the whole space whose columns lie in the
    /// union of the parties' null spaces.
    SpanningNullFrame { frame: ComplexMatrix },
    /// Orthogonal basis in which every outcome is assigned probability at
    /// most `tol_zero` by the named excluding party.
    ContradictingOdop {
        basis: ComplexMatrix,
        excluders: Vec<String>,
        party_labels: Vec<String>,
        probabilities: Vec<Vec<f64>>,
    },
    /// POVM in which every outcome is assigned probability at most
    /// `tol_zero` by the named excluding party.
    ContradictingPovm {
        elements: Vec<ComplexMatrix>,
        excluders: Vec<String>,
        party_labels: Vec<String>,
        probabilities: Vec<Vec<f64>>,
    },
    /// Orthogonal basis in which every party assigns every outcome a
    /// probability strictly above `tol_zero`.
    WBasis {
        basis: ComplexMatrix,
        party_labels: Vec<String>,
        probabilities: Vec<Vec<f64>>,
    },
    /// Two states with `tr(rho_a rho_b) <= tol_zero`.
    OrthogonalPair { label_a: String, label_b: String },
    /// Two states whose overlap `tr(rho_a rho_b)` equals `value > tol_zero`.
    TraceOverlap {
        label_a: String,
        label_b: String,
        value: f64,
    },
    /// Unit vector assigned zero probability by one party and strictly
    /// positive probability by another, so their supports differ.
    DiscordantOutcome {
        #[serde(with = "cvec")]
        vector: Vec<Complex64>,
        zero_label: String,
        nonzero_label: String,
    },
    /// All pairwise support projector distances are at most `tol_orth`.
    EqualSupports { max_projector_distance: f64 },
    /// Overlap of two null-space directions of rank-2 states in dimension 3;
    /// a nonzero value rules out a basis of mutually exclusive outcomes.
    NullVectorOverlap {
        label_a: String,
        label_b: String,
        value: f64,
    },
    /// Squared pairwise overlaps of a pure triple lying outside the
    /// exclusion region of the closed-form criterion.
    InnerProductTriple { a: f64, b: f64, c: f64 },
    /// Direction in Bloch space with `direction . n >= min_overlap` for the
    /// Bloch vector `n` of every pure party, separating the hull from the
    /// origin.
    BlochSeparation {
        direction: [f64; 3],
        min_overlap: f64,
    },
    /// Overlap `|<psi_a|P|psi_b>|` of two pure states through the support
    /// projector of a third; a nonzero value defeats the projected
    /// orthogonality a contradicting basis would need.
    ProjectedOverlap {
        label_a: String,
        label_b: String,
        through: String,
        value: f64,
    },
    /// Overlap of a pure state with the line where two rank-2 supports
    /// intersect; a nonzero value rules out every contradicting measurement.
    IntersectionOverlap {
        pure_label: String,
        plane_labels: [String; 2],
        value: f64,
    },
    /// Pairwise overlaps of the pure state and the two in-plane directions
    /// orthogonal to the support intersection, all strictly positive, so no
    /// pair of them is orthogonal.
    InPlaneOverlaps {
        pure_label: String,
        plane_labels: [String; 2],
        values: [f64; 3],
    },
    /// Unit vector orthogonal to the support intersection whose squared
    /// overlap with each of the three in-plane directions stays above 1/2,
    /// keeping their Bloch hull away from the origin.
    InPlaneSeparation {
        pure_label: String,
        plane_labels: [String; 2],
        #[serde(with = "cvec")]
        vector: Vec<Complex64>,
        min_overlap_sq: f64,
    },
    /// Classical outcome assigned probability above `tol_zero` by everyone.
    SharedOutcome { outcome: usize },
    /// For each classical outcome, a party assigning it at most `tol_zero`.
    OutcomeExcluders { excluders: Vec<String> },
    /// The identical support index set shared by all parties.
    CommonSupport { outcomes: Vec<usize> },
    /// Classical outcome where one party assigns zero and another does not.
    DiscordantClassicalOutcome {
        outcome: usize,
        zero_label: String,
        nonzero_label: String,
    },
}

/// Outcome of one criterion check.
///
/// `margin` is the decisive scalar for the criterion; its meaning is
/// documented per check. `boundary` is set when the decision sits within
/// [`BOUNDARY_BAND`] of the threshold; the boolean is then still valid but
/// fragile under input perturbations of that size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompatibilityVerdict {
    pub criterion: Criterion,
    pub compatible: bool,
    pub margin: f64,
    pub boundary: bool,
    pub witness: Witness,
}

impl CompatibilityVerdict {
    pub fn new(criterion: Criterion, compatible: bool, margin: f64, witness: Witness) -> Self {
        CompatibilityVerdict {
            criterion,
            compatible,
            margin,
            boundary: margin.abs() < BOUNDARY_BAND,
            witness,
        }
    }
}

fn find_state<'a>(
    ensemble: &'a StateEnsemble,
    label: &str,
) -> Result<&'a crate::states::DensityOperator, String> {
    ensemble
        .states()
        .iter()
        .find(|s| s.label() == label)
        .ok_or_else(|| format!("witness references unknown label '{label}'"))
}

/// Pure vector, the unit vector spanning the intersection of the two
/// rank-2 supports, and the in-plane directions orthogonal to it.
type PlaneGeometry = (Vec<Complex64>, Vec<Complex64>, [Vec<Complex64>; 2]);

/// Recovers the one-pure-two-plane geometry referenced by the in-plane
/// witnesses.
fn plane_geometry(
    ensemble: &StateEnsemble,
    pure_label: &str,
    plane_labels: &[String; 2],
    tol: &Tolerances,
) -> Result<PlaneGeometry, String> {
    let pure = find_state(ensemble, pure_label)?;
    let pure_support = crate::linalg::support(pure.matrix(), tol).map_err(|e| e.to_string())?;
    if pure_support.dim() != 1 {
        return Err(format!("'{pure_label}' is not pure"));
    }
    let psi = pure_support.frame().column(0);
    let mut supports = Vec::new();
    for label in plane_labels {
        let s = find_state(ensemble, label)?;
        let sup = crate::linalg::support(s.matrix(), tol).map_err(|e| e.to_string())?;
        if sup.dim() != 2 {
            return Err(format!("'{label}' does not have a two-dimensional support"));
        }
        supports.push(sup);
    }
    let line =
        crate::linalg::intersect(&supports[0], &supports[1], tol).map_err(|e| e.to_string())?;
    if line.dim() != 1 {
        return Err(format!(
            "plane supports intersect in dimension {}, expected a line",
            line.dim()
        ));
    }
    let chi = line.frame().column(0);
    let mut phis = Vec::new();
    for sup in &supports {
        let reduced = sup.projector().sub(&ComplexMatrix::outer(&chi));
        let eig = crate::linalg::hermitian_eigendecomposition(&reduced, tol)
            .map_err(|e| e.to_string())?;
        phis.push(eig[0].1.clone());
    }
    let phi3 = phis.pop().expect("two plane parties");
    let phi2 = phis.pop().expect("two plane parties");
    Ok((psi, chi, [phi2, phi3]))
}

fn check_unit(v: &[Complex64]) -> Result<(), String> {
    let n = vec_norm(v);
    if (n - 1.0).abs() > 1e-8 {
        return Err(format!("witness vector has norm {n}"));
    }
    Ok(())
}

fn check_unitary(basis: &ComplexMatrix, dim: usize) -> Result<(), String> {
    if basis.rows() != dim || basis.cols() != dim {
        return Err(format!(
            "basis is {}x{}, expected {dim}x{dim}",
            basis.rows(),
            basis.cols()
        ));
    }
    let gram = basis.dagger().mul(basis);
    let resid = gram.sub(&ComplexMatrix::identity(dim)).frobenius_norm();
    if resid > 1e-8 * (dim as f64).sqrt() {
        return Err(format!("basis unitarity residual {resid:.3e}"));
    }
    Ok(())
}

fn check_probability_table(
    stored: &[Vec<f64>],
    recomputed: &[Vec<f64>],
) -> Result<(), String> {
    if stored.len() != recomputed.len()
        || stored
            .iter()
            .zip(recomputed)
            .any(|(s, r)| s.len() != r.len())
    {
        return Err("stored probability table has wrong shape".into());
    }
    for (k, (s, r)) in stored.iter().zip(recomputed).enumerate() {
        for (a, (x, y)) in s.iter().zip(r).enumerate() {
            if (x - y).abs() > 1e-10 {
                return Err(format!(
                    "probability mismatch at outcome {k}, party {a}: stored {x}, recomputed {y}"
                ));
            }
        }
    }
    Ok(())
}

fn check_exclusion(
    probabilities: &[Vec<f64>],
    excluders: &[String],
    party_labels: &[String],
    tol: &Tolerances,
) -> Result<(), String> {
    if excluders.len() != probabilities.len() {
        return Err("one excluder per outcome required".into());
    }
    for (k, excl) in excluders.iter().enumerate() {
        let idx = party_labels
            .iter()
            .position(|l| l == excl)
            .ok_or_else(|| format!("excluder '{excl}' not among party labels"))?;
        let p = probabilities[k][idx];
        if p > tol.tol_zero {
            return Err(format!(
                "outcome {k} has probability {p:.3e} for its excluder '{excl}'"
            ));
        }
    }
    Ok(())
}

/// Re-evaluates a witness against a quantum ensemble. `Ok(())` means every
/// invariant claimed by the witness type holds on this input.
pub fn verify_quantum_witness(
    witness: &Witness,
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<(), String> {
    let dim = ensemble.dim();
    match witness {
        Witness::SharedSupportVector { vector } => {
            check_unit(vector)?;
            for s in ensemble.states() {
                let p = expectation(s.matrix(), vector);
                if p <= tol.tol_zero {
                    return Err(format!(
                        "party '{}' assigns the shared vector probability {p:.3e}",
                        s.label()
                    ));
                }
            }
            Ok(())
        }
        Witness::SpanningNullFrame { frame } => {
            if frame.cols() != dim {
                return Err(format!(
                    "null frame spans {} dimensions, space has {dim}",
                    frame.cols()
                ));
            }
            let gram = frame.dagger().mul(frame);
            if gram.sub(&ComplexMatrix::identity(dim)).frobenius_norm() > 1e-8 * dim as f64 {
                return Err("null frame is not orthonormal".into());
            }
            let mut union = ComplexMatrix::zeros(dim, dim);
            for s in ensemble.states() {
                let n = crate::linalg::null_space(s.matrix(), tol).map_err(|e| e.to_string())?;
                union = union.add(&n.projector());
            }
            let span = crate::linalg::support(&union, tol).map_err(|e| e.to_string())?;
            for k in 0..frame.cols() {
                let col = frame.column(k);
                let proj = span.projector().apply(&col);
                let resid: f64 = col
                    .iter()
                    .zip(&proj)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                if resid > 1e-8 {
                    return Err(format!(
                        "frame column {k} lies outside the null space union (residual {resid:.3e})"
                    ));
                }
            }
            Ok(())
        }
        Witness::ContradictingOdop {
            basis,
            excluders,
            party_labels,
            probabilities,
        } => {
            check_unitary(basis, dim)?;
            if *party_labels != ensemble.labels() {
                return Err("party labels do not match the ensemble".into());
            }
            let recomputed = measurement_probabilities(
                &Measurement::Odop {
                    basis: basis.clone(),
                },
                ensemble,
            );
            check_probability_table(probabilities, &recomputed)?;
            check_exclusion(&recomputed, excluders, party_labels, tol)
        }
        Witness::ContradictingPovm {
            elements,
            excluders,
            party_labels,
            probabilities,
        } => {
            validate_povm(elements, dim, tol)?;
            if *party_labels != ensemble.labels() {
                return Err("party labels do not match the ensemble".into());
            }
            let recomputed = measurement_probabilities(
                &Measurement::Povm {
                    elements: elements.clone(),
                },
                ensemble,
            );
            check_probability_table(probabilities, &recomputed)?;
            check_exclusion(&recomputed, excluders, party_labels, tol)
        }
        Witness::WBasis {
            basis,
            party_labels,
            probabilities,
        } => {
            check_unitary(basis, dim)?;
            if *party_labels != ensemble.labels() {
                return Err("party labels do not match the ensemble".into());
            }
            let recomputed = measurement_probabilities(
                &Measurement::Odop {
                    basis: basis.clone(),
                },
                ensemble,
            );
            check_probability_table(probabilities, &recomputed)?;
            for (k, row) in recomputed.iter().enumerate() {
                for (a, p) in row.iter().enumerate() {
                    if *p <= tol.tol_zero {
                        return Err(format!(
                            "outcome {k} has probability {p:.3e} for party '{}'",
                            party_labels[a]
                        ));
                    }
                }
            }
            Ok(())
        }
        Witness::OrthogonalPair { label_a, label_b } => {
            let a = find_state(ensemble, label_a)?;
            let b = find_state(ensemble, label_b)?;
            let overlap = a.matrix().mul(b.matrix()).trace().re;
            if overlap > tol.tol_zero {
                return Err(format!("pair overlap is {overlap:.3e}, not zero"));
            }
            Ok(())
        }
        Witness::TraceOverlap {
            label_a,
            label_b,
            value,
        } => {
            let a = find_state(ensemble, label_a)?;
            let b = find_state(ensemble, label_b)?;
            let overlap = a.matrix().mul(b.matrix()).trace().re;
            if (overlap - value).abs() > 1e-10 {
                return Err(format!("stored overlap {value}, recomputed {overlap}"));
            }
            if overlap <= tol.tol_zero {
                return Err(format!("overlap {overlap:.3e} does not certify compatibility"));
            }
            Ok(())
        }
        Witness::DiscordantOutcome {
            vector,
            zero_label,
            nonzero_label,
        } => {
            check_unit(vector)?;
            let z = expectation(find_state(ensemble, zero_label)?.matrix(), vector);
            let nz = expectation(find_state(ensemble, nonzero_label)?.matrix(), vector);
            if z > tol.tol_zero {
                return Err(format!("'{zero_label}' assigns {z:.3e}, expected zero"));
            }
            if nz <= tol.tol_zero {
                return Err(format!("'{nonzero_label}' assigns {nz:.3e}, expected positive"));
            }
            Ok(())
        }
        Witness::EqualSupports {
            max_projector_distance,
        } => {
            let mut worst = 0.0_f64;
            let supports: Result<Vec<_>, _> = ensemble
                .states()
                .iter()
                .map(|s| crate::linalg::support(s.matrix(), tol))
                .collect();
            let supports = supports.map_err(|e| e.to_string())?;
            for i in 0..supports.len() {
                for j in (i + 1)..supports.len() {
                    worst = worst.max(supports[i].projector_distance(&supports[j]));
                }
            }
            if worst > tol.tol_orth {
                return Err(format!("supports differ by {worst:.3e}"));
            }
            if (worst - max_projector_distance).abs() > 1e-8 {
                return Err("stored projector distance does not match".into());
            }
            Ok(())
        }
        Witness::NullVectorOverlap {
            label_a,
            label_b,
            value,
        } => {
            let overlap_of = |label: &str| -> Result<Vec<Complex64>, String> {
                let s = find_state(ensemble, label)?;
                let n = crate::linalg::null_space(s.matrix(), tol).map_err(|e| e.to_string())?;
                if n.dim() != 1 {
                    return Err(format!("'{label}' does not have a one-dimensional null space"));
                }
                Ok(n.frame().column(0))
            };
            let ea = overlap_of(label_a)?;
            let eb = overlap_of(label_b)?;
            let got = inner(&ea, &eb).norm();
            if (got - value).abs() > 1e-8 {
                return Err(format!("stored null overlap {value}, recomputed {got}"));
            }
            if got <= tol.tol_zero {
                return Err("null overlap is zero, does not certify compatibility".into());
            }
            Ok(())
        }
        Witness::InnerProductTriple { a, b, c } => {
            if ensemble.len() != 3 {
                return Err("inner product triple requires exactly three states".into());
            }
            let mut vs = Vec::new();
            for s in ensemble.states() {
                let eig = crate::linalg::hermitian_eigendecomposition(s.matrix(), tol)
                    .map_err(|e| e.to_string())?;
                if eig[0].0 < 1.0 - 1e-8 {
                    return Err(format!("'{}' is not pure", s.label()));
                }
                vs.push(eig[0].1.clone());
            }
            let got = [
                inner(&vs[0], &vs[1]).norm_sqr(),
                inner(&vs[1], &vs[2]).norm_sqr(),
                inner(&vs[2], &vs[0]).norm_sqr(),
            ];
            for (stored, recomputed) in [*a, *b, *c].iter().zip(got.iter()) {
                if (stored - recomputed).abs() > 1e-8 {
                    return Err(format!(
                        "stored overlap {stored}, recomputed {recomputed}"
                    ));
                }
            }
            // A compatible-side witness: the triple must sit outside the
            // strict exclusion region.
            let sum = a + b + c;
            let disc = (sum - 1.0).powi(2) - 4.0 * a * b * c;
            if sum < 1.0 - BOUNDARY_BAND && disc > BOUNDARY_BAND {
                return Err("triple lies strictly inside the exclusion region".into());
            }
            Ok(())
        }
        Witness::BlochSeparation {
            direction,
            min_overlap,
        } => {
            if dim != 2 {
                return Err("Bloch separation requires qubits".into());
            }
            let dn: f64 = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (dn - 1.0).abs() > 1e-8 {
                return Err(format!("separation direction has norm {dn}"));
            }
            if *min_overlap <= tol.tol_zero {
                return Err("separation margin does not certify compatibility".into());
            }
            for s in ensemble.states() {
                let sup = crate::linalg::support(s.matrix(), tol).map_err(|e| e.to_string())?;
                if sup.dim() == 2 {
                    continue; // full-rank states never constrain the hull
                }
                let n = crate::states::to_bloch(s).map_err(|e| e.to_string())?;
                let dot: f64 = direction.iter().zip(n.0.iter()).map(|(x, y)| x * y).sum();
                if dot < min_overlap - 1e-9 {
                    return Err(format!(
                        "party '{}' has Bloch overlap {dot:.3e} below the stored bound",
                        s.label()
                    ));
                }
            }
            Ok(())
        }
        Witness::ProjectedOverlap {
            label_a,
            label_b,
            through,
            value,
        } => {
            let pure_vector = |label: &str| -> Result<Vec<Complex64>, String> {
                let sup = crate::linalg::support(find_state(ensemble, label)?.matrix(), tol)
                    .map_err(|e| e.to_string())?;
                if sup.dim() != 1 {
                    return Err(format!("'{label}' is not pure"));
                }
                Ok(sup.frame().column(0))
            };
            let va = pure_vector(label_a)?;
            let vb = pure_vector(label_b)?;
            let proj = crate::linalg::support(find_state(ensemble, through)?.matrix(), tol)
                .map_err(|e| e.to_string())?
                .projector();
            let got = inner(&va, &proj.apply(&vb)).norm();
            if (got - value).abs() > 1e-8 {
                return Err(format!("stored projected overlap {value}, recomputed {got}"));
            }
            if got <= tol.tol_zero {
                return Err("projected overlap is zero, does not certify compatibility".into());
            }
            Ok(())
        }
        Witness::IntersectionOverlap {
            pure_label,
            plane_labels,
            value,
        } => {
            let (psi, chi, _) = plane_geometry(ensemble, pure_label, plane_labels, tol)?;
            let got = inner(&chi, &psi).norm();
            if (got - value).abs() > 1e-8 {
                return Err(format!("stored intersection overlap {value}, recomputed {got}"));
            }
            if got <= tol.tol_zero {
                return Err("intersection overlap is zero, does not certify compatibility".into());
            }
            Ok(())
        }
        Witness::InPlaneOverlaps {
            pure_label,
            plane_labels,
            values,
        } => {
            let (psi, _, [phi2, phi3]) = plane_geometry(ensemble, pure_label, plane_labels, tol)?;
            let got = [
                inner(&psi, &phi2).norm(),
                inner(&psi, &phi3).norm(),
                inner(&phi2, &phi3).norm(),
            ];
            for (stored, recomputed) in values.iter().zip(got.iter()) {
                if (stored - recomputed).abs() > 1e-8 {
                    return Err(format!(
                        "stored in-plane overlap {stored}, recomputed {recomputed}"
                    ));
                }
                if *recomputed <= tol.tol_zero {
                    return Err("an in-plane pair is orthogonal".into());
                }
            }
            Ok(())
        }
        Witness::InPlaneSeparation {
            pure_label,
            plane_labels,
            vector,
            min_overlap_sq,
        } => {
            check_unit(vector)?;
            let (psi, chi, [phi2, phi3]) = plane_geometry(ensemble, pure_label, plane_labels, tol)?;
            let leak = inner(&chi, vector).norm();
            if leak > 1e-8 {
                return Err(format!("separating vector leaves the plane by {leak:.3e}"));
            }
            let got = [&psi, &phi2, &phi3]
                .iter()
                .map(|v| inner(vector, v).norm_sqr())
                .fold(f64::INFINITY, f64::min);
            if (got - min_overlap_sq).abs() > 1e-8 {
                return Err(format!(
                    "stored minimum squared overlap {min_overlap_sq}, recomputed {got}"
                ));
            }
            if got <= 0.5 {
                return Err("squared overlaps do not separate the Bloch hull".into());
            }
            Ok(())
        }
        Witness::SharedOutcome { .. }
        | Witness::OutcomeExcluders { .. }
        | Witness::CommonSupport { .. }
        | Witness::DiscordantClassicalOutcome { .. } => {
            Err("classical witness presented for a quantum ensemble".into())
        }
    }
}

/// Re-evaluates a witness against a classical assignment.
pub fn verify_classical_witness(
    witness: &Witness,
    assignment: &ClassicalAssignment,
    tol: &Tolerances,
) -> Result<(), String> {
    let parties = assignment.parties();
    let find = |label: &str| -> Result<&Vec<f64>, String> {
        parties
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, p)| p)
            .ok_or_else(|| format!("witness references unknown label '{label}'"))
    };
    match witness {
        Witness::SharedOutcome { outcome } => {
            if *outcome >= assignment.outcomes() {
                return Err("outcome index out of range".into());
            }
            for (label, probs) in parties {
                if probs[*outcome] <= tol.tol_zero {
                    return Err(format!(
                        "party '{label}' assigns outcome {outcome} probability {}",
                        probs[*outcome]
                    ));
                }
            }
            Ok(())
        }
        Witness::OutcomeExcluders { excluders } => {
            if excluders.len() != assignment.outcomes() {
                return Err("one excluder per outcome required".into());
            }
            for (k, label) in excluders.iter().enumerate() {
                let probs = find(label)?;
                if probs[k] > tol.tol_zero {
                    return Err(format!(
                        "outcome {k} has probability {} for its excluder '{label}'",
                        probs[k]
                    ));
                }
            }
            Ok(())
        }
        Witness::CommonSupport { outcomes } => {
            let claimed: std::collections::BTreeSet<usize> = outcomes.iter().copied().collect();
            for (label, probs) in parties {
                let actual: std::collections::BTreeSet<usize> = probs
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > tol.tol_zero)
                    .map(|(k, _)| k)
                    .collect();
                if actual != claimed {
                    return Err(format!("party '{label}' has support {actual:?}"));
                }
            }
            Ok(())
        }
        Witness::DiscordantClassicalOutcome {
            outcome,
            zero_label,
            nonzero_label,
        } => {
            let z = find(zero_label)?;
            let nz = find(nonzero_label)?;
            if *outcome >= assignment.outcomes() {
                return Err("outcome index out of range".into());
            }
            if z[*outcome] > tol.tol_zero {
                return Err(format!("'{zero_label}' assigns {}", z[*outcome]));
            }
            if nz[*outcome] <= tol.tol_zero {
                return Err(format!("'{nonzero_label}' assigns {}", nz[*outcome]));
            }
            Ok(())
        }
        _ => Err("quantum witness presented for a classical assignment".into()),
    }
}
