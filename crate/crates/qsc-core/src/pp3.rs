//! Complete three-party post-Peierls analysis in Hilbert-space dimension
//! three.
//!
//! Full-rank assignments never constrain a post-Peierls test, so after
//! stripping them every three-party ensemble in dimension three lands in one
//! of four rank patterns. Each pattern has a closed-form decision:
//!
//! * three rank-2 states: incompatible exactly when the three null
//!   directions are mutually orthogonal;
//! * one pure state and two planes: decided by the overlap of the pure state
//!   with the line where the planes intersect, followed by an in-plane Bloch
//!   analysis (orthogonal-pair test for basis measurements, hull test for
//!   general POVMs);
//! * two pure states and one plane: incompatible exactly when the pure
//!   states become orthogonal after projection into the plane (basis
//!   measurements only; the POVM side has no closed form here);
//! * three pure states: decided by the squared pairwise inner products
//!   `(a, b, c)` alone, with an explicit contradicting basis recovered from
//!   the root of a quadratic whenever the test fails.
//!
//! Margins that a verdict pins at zero by construction (an orthogonal pair,
//! a contained hull point) carry `boundary = false`; the genuinely signed
//! three-pure margin uses the usual [`BOUNDARY_BAND`] band, with the band
//! itself counted as compatible.
//!
//! [`figure1_region`] rasterizes the three-pure exclusion region at fixed
//! `c` together with its bounding ellipse, which touches the axes at
//! `a = 1 - c` and `b = 1 - c`.

use crate::linalg::{
    complete_to_basis, expectation, hermitian_eigendecomposition, inner, intersect, normalize,
    orthonormalize, support, vec_norm, Complex64, ComplexMatrix, LinalgError, Subspace,
    Tolerances,
};
use crate::povm::{self, PovmError};
use crate::states::{DensityOperator, StateEnsemble, StateError};
use crate::verdict::{
    measurement_probabilities, CompatibilityVerdict, Criterion, Measurement, Witness,
    BOUNDARY_BAND,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Pp3Error {
    #[error("expected Hilbert-space dimension 3, got {dim}")]
    WrongDimension { dim: usize },
    #[error("expected exactly three parties, got {parties}")]
    WrongPartyCount { parties: usize },
    #[error("operation requires the {expected} case, classification gave {got}")]
    CaseMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("squared inner product {name} = {value} violates the pairwise-compatible premise")]
    PremiseViolation { name: &'static str, value: f64 },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("the triple admits no contradicting-basis embedding")]
    NoEmbedding,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Hull(#[from] PovmError),
}

/// Squared pairwise inner products of three pure states, in the cyclic order
/// `a = |<1|2>|^2`, `b = |<2|3>|^2`, `c = |<3|1>|^2`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InnerProductTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl InnerProductTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, Pp3Error> {
        for (name, value) in [("a", a), ("b", b), ("c", c)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Pp3Error::BadParameter(format!(
                    "squared inner product {name} = {value} is outside [0, 1]"
                )));
            }
        }
        Ok(InnerProductTriple { a, b, c })
    }
}

/// One party contributing a single direction: a pure state, or the null
/// direction of a rank-2 state depending on the surrounding case.
#[derive(Clone, Debug)]
pub struct RankOneParty {
    pub label: String,
    pub vector: Vec<Complex64>,
}

/// One rank-2 party: its two-dimensional support and the unit vector
/// orthogonal to it.
#[derive(Clone, Debug)]
pub struct PlaneParty {
    pub label: String,
    pub support: Subspace,
    pub null_vector: Vec<Complex64>,
}

/// Intersection geometry of two distinct planes: the unit vector spanning
/// their common line and, for each plane, the in-plane direction orthogonal
/// to it.
#[derive(Clone, Debug)]
pub struct IntersectionGeometry {
    pub chi: Vec<Complex64>,
    pub phi: [Vec<Complex64>; 2],
}

/// Rank pattern of a three-party ensemble in dimension three after full-rank
/// states are stripped, together with the geometric data the corresponding
/// decision needs. Parties keep their ensemble order within each group.
#[derive(Clone, Debug)]
pub enum Pp3Case {
    ThreeRank2 {
        planes: [PlaneParty; 3],
    },
    OnePureTwoRank2 {
        pure: RankOneParty,
        planes: [PlaneParty; 2],
        /// `None` when the two supports coincide within `tol_orth`.
        line: Option<IntersectionGeometry>,
    },
    TwoPureOneRank2 {
        pure: [RankOneParty; 2],
        plane: PlaneParty,
    },
    ThreePure {
        parties: [RankOneParty; 3],
        triple: InnerProductTriple,
    },
    /// Fewer than three states left after stripping full-rank assignments;
    /// the caller falls back to the zero-, one-, or two-party logic.
    Reduced { remaining: Vec<DensityOperator> },
}

impl Pp3Case {
    pub fn tag(&self) -> &'static str {
        match self {
            Pp3Case::ThreeRank2 { .. } => "THREE_RANK2",
            Pp3Case::OnePureTwoRank2 { .. } => "ONE_PURE_TWO_RANK2",
            Pp3Case::TwoPureOneRank2 { .. } => "TWO_PURE_ONE_RANK2",
            Pp3Case::ThreePure { .. } => "THREE_PURE",
            Pp3Case::Reduced { .. } => "REDUCED",
        }
    }
}

fn case_mismatch(expected: &'static str, case: &Pp3Case) -> Pp3Error {
    Pp3Error::CaseMismatch {
        expected,
        got: case.tag(),
    }
}

/// In-plane direction of a plane orthogonal to the line `chi`, recovered as
/// the top eigenvector of the rank-1 operator `P - |chi><chi|`.
fn in_plane_direction(
    plane: &Subspace,
    chi: &[Complex64],
    tol: &Tolerances,
) -> Result<Vec<Complex64>, Pp3Error> {
    let reduced = plane.projector().sub(&ComplexMatrix::outer(chi));
    let eig = hermitian_eigendecomposition(&reduced, tol)?;
    Ok(eig[0].1.clone())
}

/// Sorts a three-party ensemble in dimension three into its rank pattern and
/// extracts the geometry the pattern's decision procedure consumes.
pub fn classify(ensemble: &StateEnsemble, tol: &Tolerances) -> Result<Pp3Case, Pp3Error> {
    if ensemble.dim() != 3 {
        return Err(Pp3Error::WrongDimension {
            dim: ensemble.dim(),
        });
    }
    if ensemble.len() != 3 {
        return Err(Pp3Error::WrongPartyCount {
            parties: ensemble.len(),
        });
    }
    let mut pures = Vec::new();
    let mut planes = Vec::new();
    let mut remaining = Vec::new();
    for state in ensemble.states() {
        let sup = support(state.matrix(), tol)?;
        match sup.dim() {
            3 => continue,
            2 => {
                let null = crate::linalg::null_space(state.matrix(), tol)?;
                planes.push(PlaneParty {
                    label: state.label().to_string(),
                    support: sup,
                    null_vector: null.frame().column(0),
                });
                remaining.push(state.clone());
            }
            _ => {
                pures.push(RankOneParty {
                    label: state.label().to_string(),
                    vector: sup.frame().column(0),
                });
                remaining.push(state.clone());
            }
        }
    }
    if remaining.len() < 3 {
        return Ok(Pp3Case::Reduced { remaining });
    }
    match (pures.len(), planes.len()) {
        (0, 3) => {
            let mut it = planes.into_iter();
            Ok(Pp3Case::ThreeRank2 {
                planes: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
            })
        }
        (1, 2) => {
            let pure = pures.pop().unwrap();
            let distance = planes[0].support.projector_distance(&planes[1].support);
            let line = if distance <= tol.tol_orth {
                None
            } else {
                let common = intersect(&planes[0].support, &planes[1].support, tol)?;
                if common.dim() != 1 {
                    return Err(Pp3Error::DegenerateGeometry(format!(
                        "distinct plane supports intersect in dimension {}",
                        common.dim()
                    )));
                }
                let chi = common.frame().column(0);
                let phi2 = in_plane_direction(&planes[0].support, &chi, tol)?;
                let phi3 = in_plane_direction(&planes[1].support, &chi, tol)?;
                Some(IntersectionGeometry {
                    chi,
                    phi: [phi2, phi3],
                })
            };
            let mut it = planes.into_iter();
            Ok(Pp3Case::OnePureTwoRank2 {
                pure,
                planes: [it.next().unwrap(), it.next().unwrap()],
                line,
            })
        }
        (2, 1) => {
            let plane = planes.pop().unwrap();
            let mut it = pures.into_iter();
            Ok(Pp3Case::TwoPureOneRank2 {
                pure: [it.next().unwrap(), it.next().unwrap()],
                plane,
            })
        }
        (3, 0) => {
            let clamp = |x: f64| x.clamp(0.0, 1.0);
            let triple = InnerProductTriple::new(
                clamp(inner(&pures[0].vector, &pures[1].vector).norm_sqr()),
                clamp(inner(&pures[1].vector, &pures[2].vector).norm_sqr()),
                clamp(inner(&pures[2].vector, &pures[0].vector).norm_sqr()),
            )?;
            let mut it = pures.into_iter();
            Ok(Pp3Case::ThreePure {
                parties: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
                triple,
            })
        }
        _ => unreachable!("three states with ranks at most two"),
    }
}

/// Assembles a contradicting-basis witness from near-orthonormal columns,
/// one excluding party per outcome.
fn odop_witness(
    columns: &[Vec<Complex64>],
    excluders: Vec<String>,
    ensemble: &StateEnsemble,
) -> Result<Witness, Pp3Error> {
    let ortho = orthonormalize(columns, 1e-8);
    if ortho.len() != columns.len() {
        return Err(Pp3Error::DegenerateGeometry(
            "witness basis columns are linearly dependent".into(),
        ));
    }
    let basis = ComplexMatrix::from_columns(ensemble.dim(), &ortho);
    let probabilities = measurement_probabilities(
        &Measurement::Odop {
            basis: basis.clone(),
        },
        ensemble,
    );
    Ok(Witness::ContradictingOdop {
        basis,
        excluders,
        party_labels: ensemble.labels(),
        probabilities,
    })
}

/// Three rank-2 states are jointly incompatible exactly when their null
/// directions are mutually orthogonal; the null directions themselves then
/// form the contradicting basis. The POVM verdict coincides with the basis
/// verdict in this pattern, so a single verdict (tagged `PP_ODOP`) stands
/// for both.
pub fn check_three_rank2(
    case: &Pp3Case,
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, Pp3Error> {
    let Pp3Case::ThreeRank2 { planes } = case else {
        return Err(case_mismatch("THREE_RANK2", case));
    };
    let mut best = (0.0_f64, 0usize, 1usize);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let overlap = inner(&planes[i].null_vector, &planes[j].null_vector).norm();
        if overlap > best.0 {
            best = (overlap, i, j);
        }
    }
    if best.0 <= tol.tol_zero {
        let columns: Vec<_> = planes.iter().map(|p| p.null_vector.clone()).collect();
        let excluders = planes.iter().map(|p| p.label.clone()).collect();
        let witness = odop_witness(&columns, excluders, ensemble)?;
        Ok(CompatibilityVerdict {
            criterion: Criterion::PpOdop,
            compatible: false,
            margin: best.0,
            boundary: false,
            witness,
        })
    } else {
        Ok(CompatibilityVerdict::new(
            Criterion::PpOdop,
            true,
            best.0,
            Witness::NullVectorOverlap {
                label_a: planes[best.1].label.clone(),
                label_b: planes[best.2].label.clone(),
                value: best.0,
            },
        ))
    }
}

fn bloch_of_spinor(s: &[Complex64]) -> Vec<f64> {
    let cross = s[0].conj() * s[1];
    vec![
        2.0 * cross.re,
        2.0 * cross.im,
        s[0].norm_sqr() - s[1].norm_sqr(),
    ]
}

fn spinor_perp(s: &[Complex64]) -> Vec<Complex64> {
    vec![-s[1].conj(), s[0].conj()]
}

fn ambient_from_spinor(s: &[Complex64], r1: &[Complex64], r2: &[Complex64]) -> Vec<Complex64> {
    r1.iter()
        .zip(r2)
        .map(|(x, y)| s[0] * x + s[1] * y)
        .collect()
}

/// One pure state against two rank-2 planes.
///
/// When the planes coincide the problem reduces to the pairwise test of the
/// pure state against the shared support. Otherwise any contradiction
/// requires the pure state to be orthogonal to the intersection line `chi`;
/// granted that, the decision moves to the plane orthogonal to `chi`, where
/// the basis flavor asks for an orthogonal pair among the three in-plane
/// directions and the POVM flavor asks whether their Bloch hull contains the
/// origin. Returns the basis verdict and the POVM verdict in that order.
pub fn check_one_pure_two_rank2(
    case: &Pp3Case,
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<(CompatibilityVerdict, CompatibilityVerdict), Pp3Error> {
    let Pp3Case::OnePureTwoRank2 { pure, planes, line } = case else {
        return Err(case_mismatch("ONE_PURE_TWO_RANK2", case));
    };
    let plane_labels = [planes[0].label.clone(), planes[1].label.clone()];

    let Some(geometry) = line else {
        // Coincident supports: both rank-2 parties accept exactly the same
        // outcomes, so the test collapses to the pure state against their
        // shared plane.
        let value = expectation(&planes[0].support.projector(), &pure.vector);
        if value <= tol.tol_zero {
            let basis = complete_to_basis(&ComplexMatrix::from_columns(
                3,
                &[normalize(&pure.vector)],
            ));
            let columns: Vec<_> = (0..3).map(|k| basis.column(k)).collect();
            let excluders = vec![
                planes[0].label.clone(),
                pure.label.clone(),
                pure.label.clone(),
            ];
            let witness = odop_witness(&columns, excluders, ensemble)?;
            let make = |criterion| CompatibilityVerdict {
                criterion,
                compatible: false,
                margin: value,
                boundary: false,
                witness: witness.clone(),
            };
            return Ok((make(Criterion::PpOdop), make(Criterion::PpPovm)));
        }
        let witness = Witness::ProjectedOverlap {
            label_a: pure.label.clone(),
            label_b: pure.label.clone(),
            through: planes[0].label.clone(),
            value,
        };
        return Ok((
            CompatibilityVerdict::new(Criterion::PpOdop, true, value, witness.clone()),
            CompatibilityVerdict::new(Criterion::PpPovm, true, value, witness),
        ));
    };

    let gate = inner(&pure.vector, &geometry.chi).norm();
    if gate > tol.tol_zero {
        // Every outcome orthogonal to all three supports would have to kill
        // the chi component too; a nonzero overlap there blocks both
        // flavors at once.
        let witness = Witness::IntersectionOverlap {
            pure_label: pure.label.clone(),
            plane_labels: plane_labels.clone(),
            value: gate,
        };
        return Ok((
            CompatibilityVerdict::new(Criterion::PpOdop, true, gate, witness.clone()),
            CompatibilityVerdict::new(Criterion::PpPovm, true, gate, witness),
        ));
    }

    let psi = &pure.vector;
    let [phi2, phi3] = &geometry.phi;
    let overlaps = [
        inner(psi, phi2).norm(),
        inner(psi, phi3).norm(),
        inner(phi2, phi3).norm(),
    ];

    let odop = if let Some(which) = overlaps.iter().position(|o| *o <= tol.tol_zero) {
        let chi = &geometry.chi;
        let (columns, excluders) = match which {
            0 => (
                vec![chi.clone(), planes[0].null_vector.clone(), phi2.clone()],
                vec![
                    pure.label.clone(),
                    planes[0].label.clone(),
                    pure.label.clone(),
                ],
            ),
            1 => (
                vec![chi.clone(), planes[1].null_vector.clone(), phi3.clone()],
                vec![
                    pure.label.clone(),
                    planes[1].label.clone(),
                    pure.label.clone(),
                ],
            ),
            _ => (
                vec![
                    chi.clone(),
                    planes[0].null_vector.clone(),
                    planes[1].null_vector.clone(),
                ],
                vec![
                    pure.label.clone(),
                    planes[0].label.clone(),
                    planes[1].label.clone(),
                ],
            ),
        };
        let witness = odop_witness(&columns, excluders, ensemble)?;
        CompatibilityVerdict {
            criterion: Criterion::PpOdop,
            compatible: false,
            margin: overlaps[which],
            boundary: false,
            witness,
        }
    } else {
        let min_overlap = overlaps.iter().fold(f64::INFINITY, |m, o| m.min(*o));
        CompatibilityVerdict::new(
            Criterion::PpOdop,
            true,
            min_overlap,
            Witness::InPlaneOverlaps {
                pure_label: pure.label.clone(),
                plane_labels: plane_labels.clone(),
                values: overlaps,
            },
        )
    };

    // POVM flavor: move to the Bloch sphere of the plane orthogonal to chi.
    let frame = complete_to_basis(&ComplexMatrix::from_columns(
        3,
        &[normalize(&geometry.chi)],
    ));
    let r1 = frame.column(1);
    let r2 = frame.column(2);
    let spinor = |v: &[Complex64]| normalize(&[inner(&r1, v), inner(&r2, v)]);
    let spinors = [spinor(psi), spinor(phi2), spinor(phi3)];
    let points: Vec<_> = spinors.iter().map(|s| bloch_of_spinor(s)).collect();
    let (closest, weights) = povm::min_norm_point(&points)?;
    let distance = closest.iter().map(|x| x * x).sum::<f64>().sqrt();

    let povm_verdict = if distance <= povm::CONTAINMENT_THRESHOLD {
        let mut elements = Vec::new();
        let mut excluders = Vec::new();
        let perp_element = |k: usize| {
            let u = ambient_from_spinor(&spinor_perp(&spinors[k]), &r1, &r2);
            ComplexMatrix::outer(&u).scale(Complex64::new(2.0 * weights[k], 0.0))
        };
        elements.push(ComplexMatrix::outer(&normalize(&geometry.chi)).add(&perp_element(0)));
        excluders.push(pure.label.clone());
        for k in 1..3 {
            if weights[k] > 1e-12 {
                elements.push(perp_element(k));
                excluders.push(planes[k - 1].label.clone());
            }
        }
        let probabilities = measurement_probabilities(
            &Measurement::Povm {
                elements: elements.clone(),
            },
            ensemble,
        );
        CompatibilityVerdict {
            criterion: Criterion::PpPovm,
            compatible: false,
            margin: distance,
            boundary: false,
            witness: Witness::ContradictingPovm {
                elements,
                excluders,
                party_labels: ensemble.labels(),
                probabilities,
            },
        }
    } else {
        let direction: Vec<f64> = closest.iter().map(|x| x / distance).collect();
        let theta = direction[2].clamp(-1.0, 1.0).acos();
        let phase = Complex64::from_polar(1.0, direction[1].atan2(direction[0]));
        let h = ambient_from_spinor(
            &[
                Complex64::new((theta / 2.0).cos(), 0.0),
                phase * (theta / 2.0).sin(),
            ],
            &r1,
            &r2,
        );
        let min_overlap_sq = [psi, phi2, phi3]
            .iter()
            .map(|v| inner(&h, v).norm_sqr())
            .fold(f64::INFINITY, f64::min);
        CompatibilityVerdict {
            criterion: Criterion::PpPovm,
            compatible: true,
            margin: distance,
            boundary: distance <= povm::BOUNDARY_THRESHOLD,
            witness: Witness::InPlaneSeparation {
                pure_label: pure.label.clone(),
                plane_labels,
                vector: h,
                min_overlap_sq,
            },
        }
    };

    Ok((odop, povm_verdict))
}

/// Two pure states against one rank-2 plane, basis flavor only: the trio is
/// incompatible exactly when the pure states become orthogonal after
/// projection into the plane. No closed form decides the POVM flavor for
/// this pattern; the randomized oracle search gathers evidence instead.
pub fn check_two_pure_one_rank2(
    case: &Pp3Case,
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, Pp3Error> {
    let Pp3Case::TwoPureOneRank2 { pure, plane } = case else {
        return Err(case_mismatch("TWO_PURE_ONE_RANK2", case));
    };
    let projector = plane.support.projector();
    let projected = [
        projector.apply(&pure[0].vector),
        projector.apply(&pure[1].vector),
    ];
    let value = inner(&pure[0].vector, &projected[1]).norm();
    if value <= tol.tol_zero {
        if projected.iter().any(|p| vec_norm(p) <= 1e-8) {
            return Err(Pp3Error::DegenerateGeometry(
                "a pure state is orthogonal to the plane support; the pair test applies".into(),
            ));
        }
        let columns = vec![
            plane.null_vector.clone(),
            normalize(&projected[1]),
            normalize(&projected[0]),
        ];
        let excluders = vec![
            plane.label.clone(),
            pure[0].label.clone(),
            pure[1].label.clone(),
        ];
        let witness = odop_witness(&columns, excluders, ensemble)?;
        Ok(CompatibilityVerdict {
            criterion: Criterion::PpOdop,
            compatible: false,
            margin: value,
            boundary: false,
            witness,
        })
    } else {
        Ok(CompatibilityVerdict::new(
            Criterion::PpOdop,
            true,
            value,
            Witness::ProjectedOverlap {
                label_a: pure[0].label.clone(),
                label_b: pure[1].label.clone(),
                through: plane.label.clone(),
                value,
            },
        ))
    }
}

/// Signed exclusion margin of the three-pure criterion; positive means
/// incompatible. Both clauses of the criterion are strict, so the margin is
/// the smaller of their slacks.
pub fn exclusion_margin(t: &InnerProductTriple) -> f64 {
    let sum = t.a + t.b + t.c;
    (1.0 - sum).min((sum - 1.0).powi(2) - 4.0 * t.a * t.b * t.c)
}

/// Symmetric form: `a + b + c < 1` and `(a + b + c - 1)^2 > 4abc`.
pub fn incompatible_by_margin(t: &InnerProductTriple) -> bool {
    exclusion_margin(t) > 0.0
}

/// Ellipse form at fixed `c`: the point `(a, b)` lies on the axis side of
/// the ellipse `(a + b - 1)^2 / c + (a - b)^2 / (1 - c) = 1`.
pub fn incompatible_by_ellipse(t: &InnerProductTriple) -> bool {
    (t.a - t.b).abs() < 1.0 - t.c
        && t.a + t.b < 1.0 + t.c
        && (t.a + t.b - 1.0).powi(2) / t.c + (t.a - t.b).powi(2) / (1.0 - t.c) > 1.0
}

/// Quadratic-root form: some root `x2` of
/// `(1 - c) x^2 - (1 - a + b - c) x + b (1 - a) = 0` lies in `(0, 1)` with
/// the induced `x1 = a / (1 - x2)` and `x3 = 1 - b / x2` in `(0, 1)` too.
pub fn incompatible_by_embedding(t: &InnerProductTriple) -> bool {
    reconstruct_three_pure(t, &[0.0; 3]).is_ok()
}

/// Both roots of the embedding quadratic, smaller first, when the
/// discriminant is non-negative.
pub fn embedding_roots(t: &InnerProductTriple) -> Option<[f64; 2]> {
    let sum = t.a + t.b + t.c;
    let disc = (sum - 1.0).powi(2) - 4.0 * t.a * t.b * t.c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let denom = 2.0 * (1.0 - t.c);
    let linear = 1.0 - t.a + t.b - t.c;
    Some([(linear - sq) / denom, (linear + sq) / denom])
}

/// Builds three unit vectors with the prescribed squared pairwise inner
/// products, each with a zero component on one basis vector (state `k` on
/// basis vector `k`). `phases[k]` is placed on the nonzero off-component of
/// state `k`, which sets the arguments of the reconstructed inner products.
/// Fails with [`Pp3Error::NoEmbedding`] when no quadratic root yields valid
/// mixing fractions, which is exactly the compatible situation.
pub fn reconstruct_three_pure(
    t: &InnerProductTriple,
    phases: &[f64; 3],
) -> Result<[Vec<Complex64>; 3], Pp3Error> {
    let roots = embedding_roots(t).ok_or(Pp3Error::NoEmbedding)?;
    let interior = |x: f64| x > 0.0 && x < 1.0;
    for x2 in roots {
        if !interior(x2) {
            continue;
        }
        let x1 = t.a / (1.0 - x2);
        let x3 = 1.0 - t.b / x2;
        if !interior(x1) || !interior(x3) {
            continue;
        }
        let (sin1, cos1) = (x1.sqrt(), (1.0 - x1).sqrt());
        let (sin2, cos2) = (x2.sqrt(), (1.0 - x2).sqrt());
        let (sin3, cos3) = (x3.sqrt(), (1.0 - x3).sqrt());
        let zero = Complex64::new(0.0, 0.0);
        let turn = |phase: f64, s: f64| Complex64::from_polar(s, phase);
        return Ok([
            vec![zero, Complex64::new(cos1, 0.0), turn(phases[0], sin1)],
            vec![turn(phases[1], sin2), zero, Complex64::new(cos2, 0.0)],
            vec![Complex64::new(cos3, 0.0), turn(phases[2], sin3), zero],
        ]);
    }
    Err(Pp3Error::NoEmbedding)
}

/// Decides the three-pure case from the squared inner products alone.
///
/// Incompatible exactly when `a + b + c < 1` and `(a + b + c - 1)^2 > 4abc`,
/// both strict; the margin is the smaller slack of the two clauses and the
/// band `|margin| < 1e-9` is flagged as boundary and counted compatible. An
/// incompatible verdict carries the standard-basis contradiction for the
/// reconstructed states; [`three_pure_witness`] transports it onto a
/// concrete ensemble.
pub fn check_three_pure(t: &InnerProductTriple) -> Result<CompatibilityVerdict, Pp3Error> {
    for (name, value) in [("a", t.a), ("b", t.b), ("c", t.c)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(Pp3Error::PremiseViolation { name, value });
        }
    }
    let margin = exclusion_margin(t);
    if margin < BOUNDARY_BAND {
        return Ok(CompatibilityVerdict::new(
            Criterion::PpOdop,
            true,
            margin,
            Witness::InnerProductTriple {
                a: t.a,
                b: t.b,
                c: t.c,
            },
        ));
    }
    let states = reconstruct_three_pure(t, &[0.0; 3])?;
    let tol = Tolerances::default();
    let parties = states
        .iter()
        .enumerate()
        .map(|(k, v)| DensityOperator::pure(format!("{}", k + 1), v, &tol))
        .collect::<Result<Vec<_>, _>>()?;
    let ensemble = StateEnsemble::new(parties)?;
    let basis = ComplexMatrix::identity(3);
    let probabilities = measurement_probabilities(
        &Measurement::Odop {
            basis: basis.clone(),
        },
        &ensemble,
    );
    Ok(CompatibilityVerdict::new(
        Criterion::PpOdop,
        false,
        margin,
        Witness::ContradictingOdop {
            basis,
            excluders: ensemble.labels(),
            party_labels: ensemble.labels(),
            probabilities,
        },
    ))
}

/// Transports the three-pure contradicting basis onto a concrete ensemble:
/// reconstructs states with matching complex inner products, then maps the
/// standard basis through the unitary identifying the reconstruction with
/// the ensemble's own vectors. Outcome `k` excludes party `k`.
pub fn three_pure_witness(
    parties: &[RankOneParty; 3],
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<Witness, Pp3Error> {
    let s12 = inner(&parties[0].vector, &parties[1].vector);
    let s23 = inner(&parties[1].vector, &parties[2].vector);
    let s31 = inner(&parties[2].vector, &parties[0].vector);
    let triple = InnerProductTriple::new(
        s12.norm_sqr().clamp(0.0, 1.0),
        s23.norm_sqr().clamp(0.0, 1.0),
        s31.norm_sqr().clamp(0.0, 1.0),
    )?;
    let reconstructed =
        reconstruct_three_pure(&triple, &[-s12.arg(), -s23.arg(), -s31.arg()])?;
    // Gram matrices of the two triples agree by construction, so modified
    // Gram-Schmidt produces the same triangular factor for both and the
    // product of the orthonormalized frames is the change of basis taking
    // the reconstruction onto the ensemble vectors.
    let original: Vec<_> = parties.iter().map(|p| p.vector.clone()).collect();
    let q_orig = orthonormalize(&original, 1e-12);
    let q_rec = orthonormalize(&reconstructed, 1e-12);
    if q_orig.len() != 3 || q_rec.len() != 3 {
        return Err(Pp3Error::DegenerateGeometry(
            "pure-state triple does not span the space".into(),
        ));
    }
    let basis = ComplexMatrix::from_columns(3, &q_orig)
        .mul(&ComplexMatrix::from_columns(3, &q_rec).dagger());
    let probabilities = measurement_probabilities(
        &Measurement::Odop {
            basis: basis.clone(),
        },
        ensemble,
    );
    for (k, party) in parties.iter().enumerate() {
        let leak = inner(&basis.column(k), &party.vector).norm_sqr();
        if leak > tol.tol_zero {
            return Err(Pp3Error::DegenerateGeometry(format!(
                "transported basis fails to exclude party {} (probability {leak:.3e})",
                party.label
            )));
        }
    }
    Ok(Witness::ContradictingOdop {
        basis,
        excluders: parties.iter().map(|p| p.label.clone()).collect(),
        party_labels: ensemble.labels(),
        probabilities,
    })
}

/// One grid cell of the exclusion-region raster.
#[derive(Clone, Copy, Debug)]
pub struct Figure1Cell {
    pub a: f64,
    pub b: f64,
    pub incompatible: bool,
}

/// Raster of the three-pure exclusion region at fixed `c` plus the bounding
/// ellipse polyline.
#[derive(Clone, Debug)]
pub struct Figure1Data {
    pub c: f64,
    pub resolution: usize,
    pub cells: Vec<Figure1Cell>,
    pub ellipse: Vec<[f64; 2]>,
}

impl Figure1Data {
    /// CSV with header `a,b,incompatible`, one row per grid cell in
    /// row-major order over `a` then `b`, flag encoded as 0/1.
    pub fn region_csv(&self) -> String {
        let mut out = String::from("a,b,incompatible\n");
        for cell in &self.cells {
            out.push_str(&format!(
                "{},{},{}\n",
                cell.a,
                cell.b,
                u8::from(cell.incompatible)
            ));
        }
        out
    }

    /// CSV with header `a,b`, the ellipse polyline in parameter order.
    pub fn ellipse_csv(&self) -> String {
        let mut out = String::from("a,b\n");
        for point in &self.ellipse {
            out.push_str(&format!("{},{}\n", point[0], point[1]));
        }
        out
    }
}

/// Evaluates the three-pure criterion at fixed `c` over a `resolution`-by-
/// `resolution` grid of cell centers in `(a, b)`, and traces the bounding
/// ellipse with `4 * resolution` samples plus the two exact axis tangency
/// points at `(1 - c, 0)` and `(0, 1 - c)`.
pub fn figure1_region(c: f64, resolution: usize) -> Result<Figure1Data, Pp3Error> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Pp3Error::BadParameter(format!(
            "c = {c} must lie strictly between 0 and 1"
        )));
    }
    if resolution < 2 {
        return Err(Pp3Error::BadParameter(format!(
            "resolution {resolution} is below the minimum of 2"
        )));
    }
    let n = resolution as f64;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let a = (i as f64 + 0.5) / n;
        for j in 0..resolution {
            let b = (j as f64 + 0.5) / n;
            let margin = exclusion_margin(&InnerProductTriple { a, b, c });
            cells.push(Figure1Cell {
                a,
                b,
                incompatible: margin >= BOUNDARY_BAND,
            });
        }
    }
    let rc = c.sqrt();
    let rs = (1.0 - c).sqrt();
    let samples = 4 * resolution;
    let mut traced: Vec<(f64, [f64; 2])> = (0..samples)
        .map(|k| {
            let time = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let swing = rc * time.cos();
            let tilt = rs * time.sin();
            (time, [0.5 * (1.0 + swing + tilt), 0.5 * (1.0 + swing - tilt)])
        })
        .collect();
    let mut tangent_a_axis = (-rs).atan2(-rc);
    if tangent_a_axis < 0.0 {
        tangent_a_axis += 2.0 * std::f64::consts::PI;
    }
    traced.push((rs.atan2(-rc), [1.0 - c, 0.0]));
    traced.push((tangent_a_axis, [0.0, 1.0 - c]));
    traced.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(Figure1Data {
        c,
        resolution,
        cells,
        ellipse: traced.into_iter().map(|(_, p)| p).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verdict::verify_quantum_witness;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(k: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); 3];
        v[k] = Complex64::new(1.0, 0.0);
        v
    }

    fn superpose(terms: &[(f64, usize)]) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); 3];
        for (w, k) in terms {
            v[*k] += Complex64::new(*w, 0.0);
        }
        normalize(&v)
    }

    fn mixture(label: &str, parts: &[(f64, Vec<Complex64>)]) -> DensityOperator {
        let mut m = ComplexMatrix::zeros(3, 3);
        for (w, v) in parts {
            m = m.add(&ComplexMatrix::outer(v).scale(Complex64::new(*w, 0.0)));
        }
        DensityOperator::new(label, m, &Tolerances::default()).unwrap()
    }

    fn three_mixtures() -> StateEnsemble {
        let states = (0..3)
            .map(|k| {
                let others: Vec<_> = (0..3).filter(|j| *j != k).map(|j| (0.5, e(j))).collect();
                mixture(&format!("P{}", k + 1), &others)
            })
            .collect();
        StateEnsemble::new(states).unwrap()
    }

    fn plane_state(label: &str, weights: (f64, f64), dirs: (Vec<Complex64>, Vec<Complex64>)) -> DensityOperator {
        mixture(label, &[(weights.0, dirs.0), (weights.1, dirs.1)])
    }

    #[test]
    fn classify_three_mixtures_as_three_rank2() {
        let tol = Tolerances::default();
        let case = classify(&three_mixtures(), &tol).unwrap();
        let Pp3Case::ThreeRank2 { planes } = &case else {
            panic!("expected THREE_RANK2, got {}", case.tag());
        };
        for (k, plane) in planes.iter().enumerate() {
            assert!((plane.null_vector[k].norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn classify_strips_full_rank_states() {
        let tol = Tolerances::default();
        let full = mixture("F", &[(1.0 / 3.0, e(0)), (1.0 / 3.0, e(1)), (1.0 / 3.0, e(2))]);
        let ensemble = StateEnsemble::new(vec![
            full,
            DensityOperator::pure("A", &e(0), &tol).unwrap(),
            DensityOperator::pure("B", &superpose(&[(1.0, 0), (1.0, 1)]), &tol).unwrap(),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let Pp3Case::Reduced { remaining } = &case else {
            panic!("expected REDUCED, got {}", case.tag());
        };
        let labels: Vec<_> = remaining.iter().map(|s| s.label().to_string()).collect();
        assert_eq!(labels, ["A", "B"]);
    }

    #[test]
    fn classify_extracts_intersection_geometry() {
        let tol = Tolerances::default();
        let ensemble = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &superpose(&[(1.0, 1), (1.0, 2)]), &tol).unwrap(),
            plane_state("S2", (0.6, 0.4), (e(0), e(1))),
            plane_state("S3", (0.7, 0.3), (e(0), e(2))),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let Pp3Case::OnePureTwoRank2 { planes, line, .. } = &case else {
            panic!("expected ONE_PURE_TWO_RANK2, got {}", case.tag());
        };
        let geometry = line.as_ref().expect("distinct planes");
        assert!((geometry.chi[0].norm() - 1.0).abs() < 1e-10);
        for plane in planes {
            assert!(inner(&geometry.chi, &plane.null_vector).norm() < 1e-10);
        }
        for (phi, plane) in geometry.phi.iter().zip(planes) {
            assert!((vec_norm(phi) - 1.0).abs() < 1e-10);
            assert!(inner(phi, &geometry.chi).norm() < 1e-10);
            let leak = expectation(&plane.support.projector(), phi);
            assert!((leak - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn three_rank2_mixtures_are_jointly_incompatible() {
        let tol = Tolerances::default();
        let ensemble = three_mixtures();
        let case = classify(&ensemble, &tol).unwrap();
        let verdict = check_three_rank2(&case, &ensemble, &tol).unwrap();
        assert!(!verdict.compatible);
        assert!(verdict.margin < 1e-12);
        verify_quantum_witness(&verdict.witness, &ensemble, &tol).unwrap();
    }

    #[test]
    fn three_rank2_tilted_null_vector_is_compatible() {
        let tol = Tolerances::default();
        let tilted = superpose(&[(1.0, 0), (1.0, 1)]);
        let anti = superpose(&[(1.0, 0), (-1.0, 1)]);
        let ensemble = StateEnsemble::new(vec![
            plane_state("P1", (0.5, 0.5), (e(1), e(2))),
            plane_state("P2", (0.5, 0.5), (e(0), e(2))),
            plane_state("P3", (0.6, 0.4), (anti, e(2))),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let verdict = check_three_rank2(&case, &ensemble, &tol).unwrap();
        assert!(verdict.compatible);
        let expected = inner(&e(0), &tilted).norm();
        assert!((verdict.margin - expected).abs() < 1e-10);
        verify_quantum_witness(&verdict.witness, &ensemble, &tol).unwrap();
    }

    #[test]
    fn case_mismatch_is_reported() {
        let tol = Tolerances::default();
        let ensemble = three_mixtures();
        let case = classify(&ensemble, &tol).unwrap();
        let err = check_two_pure_one_rank2(&case, &ensemble, &tol).unwrap_err();
        assert!(matches!(err, Pp3Error::CaseMismatch { .. }));
    }

    /// chi = e0; both planes contain it; the pure state lives in the plane
    /// orthogonal to chi, halfway between the two in-plane directions, which
    /// are orthogonal to each other.
    #[test]
    fn one_pure_two_rank2_orthogonal_pair_fails_both_flavors() {
        let tol = Tolerances::default();
        let ensemble = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &superpose(&[(1.0, 1), (1.0, 2)]), &tol).unwrap(),
            plane_state("S2", (0.6, 0.4), (e(0), e(1))),
            plane_state("S3", (0.7, 0.3), (e(0), e(2))),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let (odop, povm) = check_one_pure_two_rank2(&case, &ensemble, &tol).unwrap();
        assert!(!odop.compatible);
        assert!(odop.margin < 1e-12);
        verify_quantum_witness(&odop.witness, &ensemble, &tol).unwrap();
        assert!(!povm.compatible);
        verify_quantum_witness(&povm.witness, &ensemble, &tol).unwrap();
    }

    #[test]
    fn one_pure_two_rank2_intersection_overlap_rescues_both_flavors() {
        let tol = Tolerances::default();
        let ensemble = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &superpose(&[(1.0, 0), (1.0, 1)]), &tol).unwrap(),
            plane_state("S2", (0.6, 0.4), (e(0), e(1))),
            plane_state("S3", (0.7, 0.3), (e(0), e(2))),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let (odop, povm) = check_one_pure_two_rank2(&case, &ensemble, &tol).unwrap();
        for verdict in [&odop, &povm] {
            assert!(verdict.compatible);
            assert!((verdict.margin - 1.0 / 2f64.sqrt()).abs() < 1e-10);
            verify_quantum_witness(&verdict.witness, &ensemble, &tol).unwrap();
        }
    }

    /// In-plane trine at 120 degrees: no orthogonal pair, so basis
    /// measurements cannot contradict, but the Bloch hull contains the
    /// origin with equal weights and a POVM can.
    #[test]
    fn one_pure_two_rank2_trine_splits_the_flavors() {
        let tol = Tolerances::default();
        let half = 0.5_f64;
        let high = 3f64.sqrt() / 2.0;
        let phi2 = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(half, 0.0),
            Complex64::new(high, 0.0),
        ];
        let phi3 = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(-half, 0.0),
            Complex64::new(high, 0.0),
        ];
        let ensemble = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &e(1), &tol).unwrap(),
            plane_state("S2", (0.5, 0.5), (e(0), phi2)),
            plane_state("S3", (0.5, 0.5), (e(0), phi3)),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let (odop, povm) = check_one_pure_two_rank2(&case, &ensemble, &tol).unwrap();
        assert!(odop.compatible);
        assert!((odop.margin - 0.5).abs() < 1e-10);
        verify_quantum_witness(&odop.witness, &ensemble, &tol).unwrap();
        assert!(!povm.compatible);
        let Witness::ContradictingPovm { elements, .. } = &povm.witness else {
            panic!("expected a contradicting POVM");
        };
        assert_eq!(elements.len(), 3);
        verify_quantum_witness(&povm.witness, &ensemble, &tol).unwrap();
    }

    #[test]
    fn one_pure_two_rank2_coincident_supports_reduce_to_the_pair_test() {
        let tol = Tolerances::default();
        let shared = (e(0), e(1));
        let blocked = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &e(2), &tol).unwrap(),
            plane_state("S2", (0.6, 0.4), shared.clone()),
            plane_state("S3", (0.3, 0.7), shared.clone()),
        ])
        .unwrap();
        let case = classify(&blocked, &tol).unwrap();
        let (odop, povm) = check_one_pure_two_rank2(&case, &blocked, &tol).unwrap();
        assert!(!odop.compatible && !povm.compatible);
        verify_quantum_witness(&odop.witness, &blocked, &tol).unwrap();

        let open = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &superpose(&[(1.0, 0), (1.0, 2)]), &tol).unwrap(),
            plane_state("S2", (0.6, 0.4), shared.clone()),
            plane_state("S3", (0.3, 0.7), shared),
        ])
        .unwrap();
        let case = classify(&open, &tol).unwrap();
        let (odop, povm) = check_one_pure_two_rank2(&case, &open, &tol).unwrap();
        assert!(odop.compatible && povm.compatible);
        assert!((odop.margin - 0.5).abs() < 1e-10);
        verify_quantum_witness(&odop.witness, &open, &tol).unwrap();
    }

    #[test]
    fn two_pure_one_rank2_projected_orthogonality_contradicts() {
        let tol = Tolerances::default();
        let ensemble = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &superpose(&[(1.0, 1), (1.0, 2)]), &tol).unwrap(),
            DensityOperator::pure("S2", &superpose(&[(1.0, 0), (1.0, 2)]), &tol).unwrap(),
            plane_state("S3", (0.5, 0.5), (e(0), e(1))),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let verdict = check_two_pure_one_rank2(&case, &ensemble, &tol).unwrap();
        assert!(!verdict.compatible);
        let Witness::ContradictingOdop { basis, excluders, .. } = &verdict.witness else {
            panic!("expected a contradicting basis");
        };
        assert!((basis.column(0)[2].norm() - 1.0).abs() < 1e-10);
        assert!((basis.column(1)[0].norm() - 1.0).abs() < 1e-10);
        assert!((basis.column(2)[1].norm() - 1.0).abs() < 1e-10);
        assert_eq!(excluders, &["S3", "S1", "S2"]);
        verify_quantum_witness(&verdict.witness, &ensemble, &tol).unwrap();
    }

    #[test]
    fn two_pure_one_rank2_generic_overlap_is_compatible() {
        let tol = Tolerances::default();
        let shared = superpose(&[(1.0, 0), (1.0, 1)]);
        let ensemble = StateEnsemble::new(vec![
            DensityOperator::pure("S1", &shared, &tol).unwrap(),
            DensityOperator::pure("S2", &shared, &tol).unwrap(),
            plane_state("S3", (0.5, 0.5), (e(0), e(1))),
        ])
        .unwrap();
        let case = classify(&ensemble, &tol).unwrap();
        let verdict = check_two_pure_one_rank2(&case, &ensemble, &tol).unwrap();
        assert!(verdict.compatible);
        assert!((verdict.margin - 1.0).abs() < 1e-10);
        verify_quantum_witness(&verdict.witness, &ensemble, &tol).unwrap();
    }

    #[test]
    fn three_pure_frozen_example_has_both_roots_in_range() {
        let t = InnerProductTriple::new(0.2, 0.2, 0.2).unwrap();
        let roots = embedding_roots(&t).unwrap();
        assert!((roots[0] - 0.276_393_202_250_021_06).abs() < 1e-12);
        assert!((roots[1] - 0.723_606_797_749_978_9).abs() < 1e-12);
        let verdict = check_three_pure(&t).unwrap();
        assert!(!verdict.compatible);
        assert!((verdict.margin - 0.128).abs() < 1e-12);
    }

    #[test]
    fn three_pure_ellipse_center_is_compatible() {
        let t = InnerProductTriple::new(0.5, 0.5, 0.25).unwrap();
        let verdict = check_three_pure(&t).unwrap();
        assert!(verdict.compatible);
        assert!((verdict.margin + 0.25).abs() < 1e-12);
        assert!(!incompatible_by_ellipse(&t));
    }

    #[test]
    fn three_pure_unit_sum_boundary_is_compatible() {
        let third = 1.0 / 3.0;
        let t = InnerProductTriple::new(third, third, third).unwrap();
        let verdict = check_three_pure(&t).unwrap();
        assert!(verdict.compatible);
        assert!((verdict.margin + 4.0 / 27.0).abs() < 1e-12);
    }

    #[test]
    fn three_pure_premise_violations_are_rejected() {
        for bad in [
            InnerProductTriple::new(0.0, 0.5, 0.5).unwrap(),
            InnerProductTriple::new(0.5, 1.0, 0.5).unwrap(),
        ] {
            assert!(matches!(
                check_three_pure(&bad),
                Err(Pp3Error::PremiseViolation { .. })
            ));
        }
        assert!(InnerProductTriple::new(-0.1, 0.5, 0.5).is_err());
        assert!(InnerProductTriple::new(0.5, 0.5, 1.1).is_err());
    }

    #[test]
    fn three_pure_reconstruction_reproduces_the_triple() {
        let grid = [0.05, 0.1, 0.2, 0.3];
        let tol = Tolerances::default();
        let mut checked = 0;
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let t = InnerProductTriple::new(a, b, c).unwrap();
                    if exclusion_margin(&t) < BOUNDARY_BAND {
                        continue;
                    }
                    let states = reconstruct_three_pure(&t, &[0.0; 3]).unwrap();
                    for (k, state) in states.iter().enumerate() {
                        assert!((vec_norm(state) - 1.0).abs() < 1e-12);
                        assert!(state[k].norm() < 1e-12);
                    }
                    assert!((inner(&states[0], &states[1]).norm_sqr() - a).abs() < 1e-12);
                    assert!((inner(&states[1], &states[2]).norm_sqr() - b).abs() < 1e-12);
                    assert!((inner(&states[2], &states[0]).norm_sqr() - c).abs() < 1e-12);

                    let verdict = check_three_pure(&t).unwrap();
                    assert!(!verdict.compatible);
                    let ensemble = StateEnsemble::new(
                        states
                            .iter()
                            .enumerate()
                            .map(|(k, v)| {
                                DensityOperator::pure(format!("{}", k + 1), v, &tol).unwrap()
                            })
                            .collect(),
                    )
                    .unwrap();
                    verify_quantum_witness(&verdict.witness, &ensemble, &tol).unwrap();
                    checked += 1;
                }
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn three_pure_criterion_forms_agree_on_a_grid() {
        let steps = 21;
        for i in 1..steps {
            for j in 1..steps {
                for k in 1..steps {
                    let t = InnerProductTriple::new(
                        i as f64 / steps as f64,
                        j as f64 / steps as f64,
                        k as f64 / steps as f64,
                    )
                    .unwrap();
                    if exclusion_margin(&t).abs() < 1e-9 {
                        continue;
                    }
                    let by_margin = incompatible_by_margin(&t);
                    assert_eq!(by_margin, incompatible_by_ellipse(&t), "ellipse at {t:?}");
                    assert_eq!(by_margin, incompatible_by_embedding(&t), "roots at {t:?}");
                }
            }
        }
    }

    #[test]
    fn three_pure_verdict_is_permutation_symmetric() {
        let samples = [
            (0.2, 0.05, 0.4),
            (0.1, 0.1, 0.1),
            (0.5, 0.25, 0.3),
            (0.7, 0.2, 0.15),
        ];
        for (a, b, c) in samples {
            let base = check_three_pure(&InnerProductTriple::new(a, b, c).unwrap()).unwrap();
            for (x, y, z) in [
                (a, c, b),
                (b, a, c),
                (b, c, a),
                (c, a, b),
                (c, b, a),
            ] {
                let other =
                    check_three_pure(&InnerProductTriple::new(x, y, z).unwrap()).unwrap();
                assert_eq!(base.compatible, other.compatible);
                assert!((base.margin - other.margin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embedding_roots_share_a_sign_when_real() {
        let steps = 25;
        for i in 1..steps {
            for j in 1..steps {
                for k in 1..steps {
                    let t = InnerProductTriple::new(
                        i as f64 / steps as f64,
                        j as f64 / steps as f64,
                        k as f64 / steps as f64,
                    )
                    .unwrap();
                    if let Some([small, large]) = embedding_roots(&t) {
                        assert!(
                            small * large > 0.0,
                            "roots {small}, {large} straddle zero at {t:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn transported_witness_contradicts_a_rotated_ensemble() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let rotation = crate::linalg::random_unitary(3, &mut rng);
            let t = InnerProductTriple::new(0.2, 0.2, 0.2).unwrap();
            let states = reconstruct_three_pure(&t, &[0.0; 3]).unwrap();
            let rotated: Vec<_> = states.iter().map(|v| rotation.apply(v)).collect();
            let ensemble = StateEnsemble::new(
                rotated
                    .iter()
                    .enumerate()
                    .map(|(k, v)| DensityOperator::pure(format!("S{}", k + 1), v, &tol).unwrap())
                    .collect(),
            )
            .unwrap();
            let case = classify(&ensemble, &tol).unwrap();
            let Pp3Case::ThreePure { parties, triple } = &case else {
                panic!("expected THREE_PURE, got {}", case.tag());
            };
            assert!((triple.a - 0.2).abs() < 1e-10);
            let witness = three_pure_witness(parties, &ensemble, &tol).unwrap();
            verify_quantum_witness(&witness, &ensemble, &tol).unwrap();
        }
    }

    #[test]
    fn figure1_raster_matches_the_known_region() {
        let resolution = 16;
        let data = figure1_region(0.25, resolution).unwrap();
        assert_eq!(data.cells.len(), resolution * resolution);
        assert_eq!(data.ellipse.len(), 4 * resolution + 2);

        let cell_at = |a: f64, b: f64| {
            data.cells
                .iter()
                .min_by(|x, y| {
                    let dx = (x.a - a).powi(2) + (x.b - b).powi(2);
                    let dy = (y.a - a).powi(2) + (y.b - b).powi(2);
                    dx.total_cmp(&dy)
                })
                .unwrap()
        };
        assert!(!cell_at(0.5, 0.5).incompatible);
        assert!(cell_at(0.1, 0.1).incompatible);

        // Along the bottom row of cells (b = 1/2R) the region extends to the
        // smaller root in a of the discriminant clause, one cell short at
        // most. The full reach a = 1 - c is attained only at b = 0, where
        // the ellipse is tangent to the axis.
        let b0 = 0.5 / resolution as f64;
        let c = 0.25;
        let u = 1.0 - b0 - c;
        let edge = u + 2.0 * b0 * c - 2.0 * (b0 * c * (u + b0 * c)).sqrt();
        let bottom_reach = data
            .cells
            .iter()
            .filter(|cell| cell.b < 1.0 / resolution as f64 && cell.incompatible)
            .map(|cell| cell.a)
            .fold(0.0, f64::max);
        assert!(bottom_reach < edge);
        assert!(edge - bottom_reach <= 1.0 / resolution as f64);

        let has_tangent = |a: f64, b: f64| {
            data.ellipse
                .iter()
                .any(|p| (p[0] - a).abs() < 1e-12 && (p[1] - b).abs() < 1e-12)
        };
        assert!(has_tangent(0.75, 0.0));
        assert!(has_tangent(0.0, 0.75));

        let region = data.region_csv();
        assert!(region.starts_with("a,b,incompatible\n"));
        assert_eq!(region.lines().count(), resolution * resolution + 1);
        let ellipse = data.ellipse_csv();
        assert!(ellipse.starts_with("a,b\n"));
        assert_eq!(ellipse.lines().count(), 4 * resolution + 3);
    }

    #[test]
    fn figure1_rejects_bad_parameters() {
        assert!(matches!(
            figure1_region(0.0, 8),
            Err(Pp3Error::BadParameter(_))
        ));
        assert!(matches!(
            figure1_region(1.0, 8),
            Err(Pp3Error::BadParameter(_))
        ));
        assert!(matches!(
            figure1_region(0.5, 1),
            Err(Pp3Error::BadParameter(_))
        ));
    }
}
