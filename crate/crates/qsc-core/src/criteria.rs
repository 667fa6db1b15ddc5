//! Compatibility criteria for collections of state assignments.
//!
//! Each check returns a [`CompatibilityVerdict`] carrying a margin and a
//! witness that can be re-validated against the inputs without trusting the
//! decision logic. Margins per check:
//!
//! * equal supports: largest pairwise Frobenius distance between support
//!   projectors (compatible when it stays at orthogonality tolerance);
//! * shared support: dimension of the intersection of all supports;
//! * two-party and pairwise overlap checks: the smallest trace overlap
//!   `tr(rho_a rho_b)` encountered;
//! * weak compatibility: the smallest outcome probability of the
//!   constructed basis.
//!
//! The weak criterion is decided constructively: a basis is built in which
//! every party assigns strictly positive probability to every outcome, by
//! repeatedly rotating offending basis vectors away from the excluded set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    complete_to_basis, expectation, hermitian_eigendecomposition, inner, null_space,
    orthocomplement, random_unitary, span_union, support, vec_norm, Complex64, ComplexMatrix,
    LinalgError, Subspace, Tolerances,
};
use crate::pp3::{self, Pp3Case};
use crate::povm;
use crate::states::{ClassicalAssignment, DensityOperator, StateEnsemble, StateError};
use crate::verdict::{
    measurement_probabilities, validate_povm, CompatibilityVerdict, Criterion, Measurement,
    Witness,
};

/// Basis vectors are considered clear of the excluded set once their angular
/// distance exceeds this value; the final witness probabilities are then at
/// least of order `sin^2` of it.
const CLEARANCE: f64 = 2e-3;
/// Angular floor demanded of the first vector of the starting basis.
const INITIAL_CLEARANCE: f64 = 0.05;
/// Perturbation draws per rotation step.
const DRAWS_PER_STEP: usize = 64;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("state assignments have different dimensions: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("criterion needs at least {needed} parties, got {got}")]
    TooFewParties { needed: usize, got: usize },
    #[error("basis rotation did not clear the excluded set within {limit} steps")]
    IterationLimit { limit: usize },
    #[error("invalid measurement: {0}")]
    InvalidPovm(String),
    #[error("could not isolate a vector separating two unequal supports")]
    WitnessConstruction,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    CaseAnalysis(#[from] pp3::Pp3Error),
    #[error(transparent)]
    Hull(#[from] povm::PovmError),
}

/// A positive-operator measurement with validated elements.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(
        dim: usize,
        elements: Vec<ComplexMatrix>,
        tol: &Tolerances,
    ) -> Result<Self, CriteriaError> {
        validate_povm(&elements, dim, tol).map_err(CriteriaError::InvalidPovm)?;
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }
}

fn supports_of(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<Vec<Subspace>, CriteriaError> {
    ensemble
        .states()
        .iter()
        .map(|s| support(s.matrix(), tol).map_err(CriteriaError::from))
        .collect()
}

/// Unit vector in the subspace maximizing the expectation of `weight`,
/// together with that expectation.
fn top_vector_in(
    sub: &Subspace,
    weight: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<Option<(Vec<Complex64>, f64)>, CriteriaError> {
    if sub.dim() == 0 {
        return Ok(None);
    }
    let frame = sub.frame();
    let restricted = frame.dagger().mul(weight).mul(frame);
    let eig = hermitian_eigendecomposition(&restricted, tol)?;
    let (value, coeffs) = &eig[0];
    let mut v = frame.apply(coeffs);
    let n = vec_norm(&v);
    for x in &mut v {
        *x /= n;
    }
    Ok(Some((v, *value)))
}

/// Equal-supports check: compatible when every pair of support projectors
/// agrees within the orthogonality tolerance. Margin is the largest pairwise
/// projector distance.
pub fn check_es(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, CriteriaError> {
    let supports = supports_of(ensemble, tol)?;
    let mut worst = 0.0_f64;
    let mut worst_pair = (0, 0);
    for i in 0..supports.len() {
        for j in (i + 1)..supports.len() {
            let d = supports[i].projector_distance(&supports[j]);
            if d > worst {
                worst = d;
                worst_pair = (i, j);
            }
        }
    }
    if worst <= tol.tol_orth {
        return Ok(CompatibilityVerdict::new(
            Criterion::Es,
            true,
            worst,
            Witness::EqualSupports {
                max_projector_distance: worst,
            },
        ));
    }
    let (i, j) = worst_pair;
    let witness = discordant_vector(ensemble, i, j, tol)?;
    Ok(CompatibilityVerdict::new(Criterion::Es, false, worst, witness))
}

/// A unit vector annihilated by one state of the pair but not the other,
/// for a pair whose supports differ. Searching the null space of one state
/// for the best overlap with the other succeeds in at least one order:
/// every null vector of `b` is orthogonal to `a`'s support only when that
/// support is contained in `b`'s, which cannot hold both ways here.
fn discordant_vector(
    ensemble: &StateEnsemble,
    i: usize,
    j: usize,
    tol: &Tolerances,
) -> Result<Witness, CriteriaError> {
    let states = ensemble.states();
    let mut best: Option<(f64, Witness)> = None;
    for (a, b) in [(i, j), (j, i)] {
        let nullable = null_space(states[b].matrix(), tol)?;
        if let Some((v, value)) = top_vector_in(&nullable, states[a].matrix(), tol)? {
            if value > tol.tol_zero && best.as_ref().is_none_or(|(bv, _)| value > *bv) {
                best = Some((
                    value,
                    Witness::DiscordantOutcome {
                        vector: v,
                        zero_label: states[b].label().to_string(),
                        nonzero_label: states[a].label().to_string(),
                    },
                ));
            }
        }
    }
    best.map(|(_, w)| w).ok_or(CriteriaError::WitnessConstruction)
}

/// Shared-support check: compatible when the intersection of all supports
/// contains a nonzero vector. Margin is the intersection dimension; the
/// boundary flag stays unset because the decision is integral.
pub fn check_bfm(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, CriteriaError> {
    let nulls: Vec<Subspace> = ensemble
        .states()
        .iter()
        .map(|s| null_space(s.matrix(), tol))
        .collect::<Result<_, _>>()?;
    let union = span_union(&nulls, tol)?;
    let shared = orthocomplement(&union, tol)?;
    let margin = shared.dim() as f64;
    if shared.dim() > 0 {
        let mut total = ComplexMatrix::zeros(ensemble.dim(), ensemble.dim());
        for s in ensemble.states() {
            total = total.add(s.matrix());
        }
        let (v, _) = top_vector_in(&shared, &total, tol)?.expect("nonzero subspace");
        return Ok(CompatibilityVerdict {
            criterion: Criterion::Bfm,
            compatible: true,
            margin,
            boundary: false,
            witness: Witness::SharedSupportVector { vector: v },
        });
    }
    Ok(CompatibilityVerdict {
        criterion: Criterion::Bfm,
        compatible: false,
        margin,
        boundary: false,
        witness: Witness::SpanningNullFrame {
            frame: union.frame().clone(),
        },
    })
}

/// Two-party overlap check, identical for the basis and general measurement
/// flavors: compatible exactly when `tr(rho_a rho_b)` is positive. Margin is
/// that trace.
pub fn check_two_party_pp(
    a: &DensityOperator,
    b: &DensityOperator,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, CriteriaError> {
    if a.dim() != b.dim() {
        return Err(CriteriaError::DimensionMismatch {
            a: a.dim(),
            b: b.dim(),
        });
    }
    let overlap = a.matrix().mul(b.matrix()).trace().re;
    if overlap > tol.tol_zero {
        return Ok(CompatibilityVerdict::new(
            Criterion::PairwisePp,
            true,
            overlap,
            Witness::TraceOverlap {
                label_a: a.label().to_string(),
                label_b: b.label().to_string(),
                value: overlap,
            },
        ));
    }
    // Zero overlap makes the supports orthogonal, so the basis below has
    // every outcome inside one support and excluded by the other party.
    let ensemble = StateEnsemble::new(vec![a.clone(), b.clone()])?;
    let supp_a = support(a.matrix(), tol)?;
    let basis = complete_to_basis(supp_a.frame());
    let rank_a = supp_a.dim();
    let excluders: Vec<String> = (0..a.dim())
        .map(|k| {
            if k < rank_a {
                b.label().to_string()
            } else {
                a.label().to_string()
            }
        })
        .collect();
    let probabilities = measurement_probabilities(
        &Measurement::Odop {
            basis: basis.clone(),
        },
        &ensemble,
    );
    Ok(CompatibilityVerdict::new(
        Criterion::PairwisePp,
        false,
        overlap,
        Witness::ContradictingOdop {
            basis,
            excluders,
            party_labels: ensemble.labels(),
            probabilities,
        },
    ))
}

/// Pairwise overlap check over all unordered pairs in ensemble order.
/// Margin is the smallest pairwise trace overlap.
pub fn check_pairwise_pp(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, CriteriaError> {
    let states = ensemble.states();
    if states.len() < 2 {
        return Err(CriteriaError::TooFewParties {
            needed: 2,
            got: states.len(),
        });
    }
    let mut min_overlap = f64::INFINITY;
    let mut min_pair = (0, 1);
    for i in 0..states.len() {
        for j in (i + 1)..states.len() {
            let overlap = states[i].matrix().mul(states[j].matrix()).trace().re;
            if overlap <= tol.tol_zero {
                return Ok(CompatibilityVerdict::new(
                    Criterion::PairwisePp,
                    false,
                    overlap,
                    Witness::OrthogonalPair {
                        label_a: states[i].label().to_string(),
                        label_b: states[j].label().to_string(),
                    },
                ));
            }
            if overlap < min_overlap {
                min_overlap = overlap;
                min_pair = (i, j);
            }
        }
    }
    Ok(CompatibilityVerdict::new(
        Criterion::PairwisePp,
        true,
        min_overlap,
        Witness::TraceOverlap {
            label_a: states[min_pair.0].label().to_string(),
            label_b: states[min_pair.1].label().to_string(),
            value: min_overlap,
        },
    ))
}

/// Outcome of the joint post-Peierls analysis for one measurement flavor:
/// either a verdict with a checkable witness, or an explicit statement that
/// no closed form covers the ensemble shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PpStatus {
    Decided { verdict: CompatibilityVerdict },
    Undecided { criterion: Criterion, reason: String },
}

impl PpStatus {
    pub fn verdict(&self) -> Option<&CompatibilityVerdict> {
        match self {
            PpStatus::Decided { verdict } => Some(verdict),
            PpStatus::Undecided { .. } => None,
        }
    }
}

/// Joint post-Peierls analysis of an ensemble, basis measurements and
/// general measurements side by side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpAnalysis {
    pub odop: PpStatus,
    pub povm: PpStatus,
}

fn decided(verdict: CompatibilityVerdict) -> PpStatus {
    PpStatus::Decided { verdict }
}

fn undecided(criterion: Criterion, reason: &str) -> PpStatus {
    PpStatus::Undecided {
        criterion,
        reason: reason.to_string(),
    }
}

/// Both flavors fail as soon as two parties have orthogonal supports: a
/// basis refining the first support is excluded outcome by outcome through
/// that pair alone, so any further parties can be ignored.
fn pair_contradiction(
    ensemble: &StateEnsemble,
    i: usize,
    j: usize,
    overlap: f64,
    tol: &Tolerances,
) -> Result<(CompatibilityVerdict, CompatibilityVerdict), CriteriaError> {
    let a = &ensemble.states()[i];
    let b = &ensemble.states()[j];
    let supp_a = support(a.matrix(), tol)?;
    let basis = complete_to_basis(supp_a.frame());
    let excluders: Vec<String> = (0..ensemble.dim())
        .map(|k| {
            if k < supp_a.dim() {
                b.label().to_string()
            } else {
                a.label().to_string()
            }
        })
        .collect();
    let probabilities =
        measurement_probabilities(&Measurement::Odop { basis: basis.clone() }, ensemble);
    let witness = Witness::ContradictingOdop {
        basis,
        excluders,
        party_labels: ensemble.labels(),
        probabilities,
    };
    let make = |criterion| CompatibilityVerdict {
        criterion,
        compatible: false,
        margin: overlap,
        boundary: false,
        witness: witness.clone(),
    };
    Ok((make(Criterion::PpOdop), make(Criterion::PpPovm)))
}

/// Compatibility certificate from a single vector that every party weights
/// positively. Sound here because it is only called when at most one
/// distinct party has a constrained support: a full-rank party dominates a
/// multiple of the identity and so assigns positive probability to every
/// outcome of every measurement, while the constrained parties (one state,
/// possibly repeated) do the same for any element with positive expectation
/// in its top eigenvector.
fn shared_vector_verdicts(
    ensemble: &StateEnsemble,
    vector: Vec<Complex64>,
) -> (CompatibilityVerdict, CompatibilityVerdict) {
    let margin = ensemble
        .states()
        .iter()
        .map(|s| expectation(s.matrix(), &vector))
        .fold(f64::INFINITY, f64::min);
    let witness = Witness::SharedSupportVector { vector };
    let make = |criterion| {
        CompatibilityVerdict::new(criterion, true, margin, witness.clone())
    };
    (make(Criterion::PpOdop), make(Criterion::PpPovm))
}

fn retagged(verdict: &CompatibilityVerdict, criterion: Criterion) -> CompatibilityVerdict {
    let mut copy = verdict.clone();
    copy.criterion = criterion;
    copy
}

fn trace_overlap_verdicts(
    ensemble: &StateEnsemble,
    i: usize,
    j: usize,
) -> (CompatibilityVerdict, CompatibilityVerdict) {
    let states = ensemble.states();
    let value = states[i].matrix().mul(states[j].matrix()).trace().re;
    let witness = Witness::TraceOverlap {
        label_a: states[i].label().to_string(),
        label_b: states[j].label().to_string(),
        value,
    };
    let make =
        |criterion| CompatibilityVerdict::new(criterion, true, value, witness.clone());
    (make(Criterion::PpOdop), make(Criterion::PpPovm))
}

const DUPLICATE_OVERLAP: f64 = 1.0 - 1e-12;

/// Routes the joint post-Peierls question to a closed form where one is
/// known, for both basis and general measurements.
///
/// Any orthogonal pair settles both flavors at once. Full-rank parties are
/// then set aside: they cannot exclude any outcome. At most one constrained
/// party is always satisfiable, and exactly two reduce to the pair overlap,
/// which the short circuit already guaranteed. Qubit ensembles are decided
/// by the orthogonal-ray argument for bases and the Bloch-hull test for
/// general measurements. Three constrained parties in dimension three go
/// through the rank-pattern case analysis. Every other shape is reported
/// undecided rather than guessed; the randomized basis search is the
/// suggested fallback there.
pub fn decide_pp(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<PpAnalysis, CriteriaError> {
    let states = ensemble.states();
    if states.len() < 2 {
        return Err(CriteriaError::TooFewParties {
            needed: 2,
            got: states.len(),
        });
    }
    let dim = ensemble.dim();

    let mut min_pair = (f64::INFINITY, 0, 0);
    for i in 0..states.len() {
        for j in (i + 1)..states.len() {
            let overlap = states[i].matrix().mul(states[j].matrix()).trace().re;
            if overlap < min_pair.0 {
                min_pair = (overlap, i, j);
            }
        }
    }
    if min_pair.0 <= tol.tol_zero {
        let (odop, povm) = pair_contradiction(ensemble, min_pair.1, min_pair.2, min_pair.0, tol)?;
        return Ok(PpAnalysis {
            odop: decided(odop),
            povm: decided(povm),
        });
    }

    let mut constrained = Vec::new();
    for (k, state) in states.iter().enumerate() {
        if support(state.matrix(), tol)?.dim() < dim {
            constrained.push(k);
        }
    }

    match constrained.len() {
        0 | 1 => {
            let weight = match constrained.first() {
                Some(&k) => states[k].matrix().clone(),
                None => states
                    .iter()
                    .skip(1)
                    .fold(states[0].matrix().clone(), |acc, s| acc.add(s.matrix())),
            };
            let eig = hermitian_eigendecomposition(&weight, tol)?;
            let (odop, povm) = shared_vector_verdicts(ensemble, eig[0].1.clone());
            return Ok(PpAnalysis {
                odop: decided(odop),
                povm: decided(povm),
            });
        }
        2 => {
            let (odop, povm) = trace_overlap_verdicts(ensemble, constrained[0], constrained[1]);
            return Ok(PpAnalysis {
                odop: decided(odop),
                povm: decided(povm),
            });
        }
        _ => {}
    }

    if dim == 2 {
        // Every constrained qubit state is pure here. A two-outcome basis
        // contradicting the ensemble would need each basis ray orthogonal to
        // some party, with both rays used; that forces an orthogonal pair,
        // which was ruled out above.
        let mut closest = (f64::INFINITY, constrained[0], constrained[1]);
        for (p, &i) in constrained.iter().enumerate() {
            for &j in constrained.iter().skip(p + 1) {
                let overlap = states[i].matrix().mul(states[j].matrix()).trace().re;
                if overlap < closest.0 {
                    closest = (overlap, i, j);
                }
            }
        }
        let (odop, _) = trace_overlap_verdicts(ensemble, closest.1, closest.2);
        let povm_verdict = povm::check_qubit_pp_povm(ensemble, tol)?;
        return Ok(PpAnalysis {
            odop: decided(odop),
            povm: decided(povm_verdict),
        });
    }

    if dim == 3 && constrained.len() == 3 {
        let sub = StateEnsemble::new(
            constrained
                .iter()
                .map(|&k| states[k].clone())
                .collect::<Vec<_>>(),
        )?;
        let case = pp3::classify(&sub, tol)?;
        return match &case {
            Pp3Case::ThreeRank2 { .. } => {
                let verdict = pp3::check_three_rank2(&case, ensemble, tol)?;
                let povm_verdict = retagged(&verdict, Criterion::PpPovm);
                Ok(PpAnalysis {
                    odop: decided(verdict),
                    povm: decided(povm_verdict),
                })
            }
            Pp3Case::OnePureTwoRank2 { .. } => {
                let (odop, povm_verdict) = pp3::check_one_pure_two_rank2(&case, ensemble, tol)?;
                Ok(PpAnalysis {
                    odop: decided(odop),
                    povm: decided(povm_verdict),
                })
            }
            Pp3Case::TwoPureOneRank2 { .. } => {
                let odop = pp3::check_two_pure_one_rank2(&case, ensemble, tol)?;
                Ok(PpAnalysis {
                    odop: decided(odop),
                    povm: undecided(
                        Criterion::PpPovm,
                        "no closed form covers general measurements for two pure states \
                         and a rank-two state; run the randomized search for evidence",
                    ),
                })
            }
            Pp3Case::ThreePure { parties, triple } => {
                let overlaps = [triple.a, triple.b, triple.c];
                if overlaps.iter().all(|&x| x >= DUPLICATE_OVERLAP) {
                    let (odop, povm_verdict) =
                        shared_vector_verdicts(ensemble, parties[0].vector.clone());
                    return Ok(PpAnalysis {
                        odop: decided(odop),
                        povm: decided(povm_verdict),
                    });
                }
                if let Some(pos) = overlaps.iter().position(|&x| x >= DUPLICATE_OVERLAP) {
                    // Overlap `pos` ties parties `pos` and `pos + 1`; either
                    // representative against the remaining party certifies
                    // all pairs, hence the whole triple.
                    let third = (pos + 2) % 3;
                    let (odop, povm_verdict) =
                        trace_overlap_verdicts(ensemble, constrained[pos], constrained[third]);
                    return Ok(PpAnalysis {
                        odop: decided(odop),
                        povm: decided(povm_verdict),
                    });
                }
                let mut odop = pp3::check_three_pure(triple)?;
                if !odop.compatible {
                    odop.witness = pp3::three_pure_witness(parties, ensemble, tol)?;
                }
                Ok(PpAnalysis {
                    odop: decided(odop),
                    povm: undecided(
                        Criterion::PpPovm,
                        "no closed form covers general measurements for three pure states \
                         in dimension three; run the randomized search for evidence",
                    ),
                })
            }
            Pp3Case::Reduced { .. } => unreachable!(
                "classification of an all-constrained sub-ensemble cannot strip parties"
            ),
        };
    }

    let reason = format!(
        "no closed form for {} constrained parties in dimension {}; \
         run the randomized search for evidence",
        constrained.len(),
        dim
    );
    Ok(PpAnalysis {
        odop: undecided(Criterion::PpOdop, &reason),
        povm: undecided(Criterion::PpPovm, &reason),
    })
}

/// Builds a basis in which every party assigns positive probability to
/// every outcome. Deterministic for a given `(ensemble, seed)` pair.
///
/// One reference eigenvector per party (largest eigenvalue) defines the
/// excluded set `S` of vectors orthogonal to some reference; the angular
/// distance from a unit vector to `S` is `min over parties of
/// asin |<reference|vector>|`. Starting from a random basis whose first
/// vector clears `S`, the first vector within [`CLEARANCE`] of `S` is
/// rotated by a two-plane unitary toward a nearby sampled vector with
/// better clearance, which moves every earlier vector by strictly less
/// than its own clearance. This repeats until the whole basis is clear.
pub fn construct_w_basis(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
    seed: u64,
) -> Result<Witness, CriteriaError> {
    let dim = ensemble.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut references = Vec::with_capacity(ensemble.len());
    for s in ensemble.states() {
        let eig = hermitian_eigendecomposition(s.matrix(), tol)?;
        references.push(eig[0].1.clone());
    }
    let distance = |v: &[Complex64]| -> f64 {
        references
            .iter()
            .map(|phi| inner(phi, v).norm().min(1.0).asin())
            .fold(f64::INFINITY, f64::min)
    };

    let mut basis = random_unitary(dim, &mut rng);
    let mut best_first = distance(&basis.column(0));
    for _ in 0..32 {
        if best_first >= INITIAL_CLEARANCE {
            break;
        }
        let candidate = random_unitary(dim, &mut rng);
        let d = distance(&candidate.column(0));
        if d > best_first {
            best_first = d;
            basis = candidate;
        }
    }

    let limit = 10 * dim;
    let mut cleared = false;
    for _ in 0..limit {
        let dists: Vec<f64> = (0..dim).map(|k| distance(&basis.column(k))).collect();
        let m = match dists.iter().position(|&d| d <= CLEARANCE) {
            None => {
                cleared = true;
                break;
            }
            Some(m) => m,
        };
        let epsilon = if m == 0 {
            INITIAL_CLEARANCE
        } else {
            0.5 * dists[..m].iter().fold(f64::INFINITY, |a, &b| a.min(b))
        };
        let bm = basis.column(m);

        let mut best: Option<(f64, f64, Vec<Complex64>)> = None;
        for _ in 0..DRAWS_PER_STEP {
            let mut w = crate::linalg::random_unit_vector(dim, &mut rng);
            let overlap = inner(&bm, &w);
            for (wi, bi) in w.iter_mut().zip(&bm) {
                *wi -= overlap * bi;
            }
            let n = vec_norm(&w);
            if n < 1e-6 {
                continue;
            }
            for wi in &mut w {
                *wi /= n;
            }
            let t = rng.gen_range(0.0..1.0) * 0.999 * epsilon;
            let (c, s) = (t.cos(), t.sin());
            let candidate: Vec<Complex64> = bm
                .iter()
                .zip(&w)
                .map(|(b, wi)| c * b + s * wi)
                .collect();
            let delta = distance(&candidate);
            if best.as_ref().is_none_or(|(bd, _, _)| delta > *bd) {
                best = Some((delta, t, w));
            }
        }
        let Some((delta, t, w)) = best else { continue };
        if delta <= 0.0 {
            continue;
        }
        let (c, s) = (Complex64::new(t.cos(), 0.0), Complex64::new(t.sin(), 0.0));
        // Two-plane rotation sending |m> to cos t |m> + sin t |w> and |w>
        // along with it; identity elsewhere.
        let rotation = ComplexMatrix::from_fn(dim, dim, |r, cidx| {
            let id = if r == cidx {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            let m_new = c * bm[r] + s * w[r];
            let w_new = -s * bm[r] + c * w[r];
            id + (m_new - bm[r]) * bm[cidx].conj() + (w_new - w[r]) * w[cidx].conj()
        });
        basis = rotation.mul(&basis);
    }
    if !cleared {
        let dists: Vec<f64> = (0..dim).map(|k| distance(&basis.column(k))).collect();
        if dists.iter().any(|&d| d <= CLEARANCE) {
            return Err(CriteriaError::IterationLimit { limit });
        }
    }

    let probabilities = measurement_probabilities(
        &Measurement::Odop {
            basis: basis.clone(),
        },
        ensemble,
    );
    Ok(Witness::WBasis {
        basis,
        party_labels: ensemble.labels(),
        probabilities,
    })
}

fn w_verdict(
    criterion: Criterion,
    ensemble: &StateEnsemble,
    tol: &Tolerances,
    seed: u64,
) -> Result<CompatibilityVerdict, CriteriaError> {
    let witness = construct_w_basis(ensemble, tol, seed)?;
    let margin = match &witness {
        Witness::WBasis { probabilities, .. } => probabilities
            .iter()
            .flatten()
            .fold(f64::INFINITY, |a, &b| a.min(b)),
        _ => unreachable!(),
    };
    Ok(CompatibilityVerdict::new(criterion, true, margin, witness))
}

/// Weak compatibility; always satisfiable, decided constructively. Margin is
/// the smallest probability in the witness table.
pub fn check_w(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
    seed: u64,
) -> Result<CompatibilityVerdict, CriteriaError> {
    w_verdict(Criterion::W, ensemble, tol, seed)
}

/// Per-party weak compatibility; implied by the shared-basis construction,
/// so the same witness is returned.
pub fn check_w_prime(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
    seed: u64,
) -> Result<CompatibilityVerdict, CriteriaError> {
    w_verdict(Criterion::WPrime, ensemble, tol, seed)
}

/// Splits every element into rank-one pieces via eigendecomposition. The
/// second return value maps each output element to the input element it came
/// from, and summing a group reproduces the original element.
pub fn refine_povm(
    povm: &Povm,
    tol: &Tolerances,
) -> Result<(Povm, Vec<usize>), CriteriaError> {
    let mut pieces = Vec::new();
    let mut origins = Vec::new();
    for (i, element) in povm.elements.iter().enumerate() {
        let eig = hermitian_eigendecomposition(element, tol)?;
        let lambda_max = eig.first().map(|(l, _)| *l).unwrap_or(0.0);
        if lambda_max <= 1e-14 {
            continue;
        }
        for (lambda, v) in &eig {
            if *lambda <= tol.tol_rank * lambda_max {
                break;
            }
            pieces.push(ComplexMatrix::outer(v).scale(Complex64::new(*lambda, 0.0)));
            origins.push(i);
        }
    }
    let refined = Povm::new(povm.dim, pieces, tol)?;
    Ok((refined, origins))
}

/// All five classical verdicts for one assignment. The shared-outcome checks
/// (BFM, PP, W') agree by construction, as do the equal-support checks
/// (ES, W).
pub fn check_classical(
    assignment: &ClassicalAssignment,
    tol: &Tolerances,
) -> Vec<CompatibilityVerdict> {
    let parties = assignment.parties();
    let outcomes = assignment.outcomes();

    // Shared outcome: some alternative gets positive probability from all.
    let floor_of = |k: usize| -> f64 {
        parties
            .iter()
            .map(|(_, p)| p[k])
            .fold(f64::INFINITY, f64::min)
    };
    let (best_outcome, best_floor) = (0..outcomes)
        .map(|k| (k, floor_of(k)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("assignment has outcomes");
    let shared = best_floor > tol.tol_zero;
    let shared_witness = if shared {
        Witness::SharedOutcome {
            outcome: best_outcome,
        }
    } else {
        let excluders = (0..outcomes)
            .map(|k| {
                parties
                    .iter()
                    .find(|(_, p)| p[k] <= tol.tol_zero)
                    .expect("excluded outcome")
                    .0
                    .clone()
            })
            .collect();
        Witness::OutcomeExcluders { excluders }
    };

    // Equal supports: the sets of positive-probability outcomes coincide.
    let support_of = |probs: &[f64]| -> Vec<usize> {
        probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > tol.tol_zero)
            .map(|(k, _)| k)
            .collect()
    };
    let first_support = support_of(&parties[0].1);
    let mut discord: Option<(usize, usize, usize)> = None;
    'outer: for (i, (_, probs)) in parties.iter().enumerate() {
        for (k, &p) in probs.iter().enumerate() {
            let here = p > tol.tol_zero;
            let reference = first_support.contains(&k);
            if here != reference {
                let (zero, nonzero) = if here { (0, i) } else { (i, 0) };
                discord = Some((k, zero, nonzero));
                break 'outer;
            }
        }
    }
    let es_compatible = discord.is_none();
    let es_witness = match discord {
        None => Witness::CommonSupport {
            outcomes: first_support.clone(),
        },
        Some((k, zero, nonzero)) => Witness::DiscordantClassicalOutcome {
            outcome: k,
            zero_label: parties[zero].0.clone(),
            nonzero_label: parties[nonzero].0.clone(),
        },
    };
    let es_margin = match discord {
        None => parties
            .iter()
            .flat_map(|(_, p)| first_support.iter().map(|&k| p[k]))
            .fold(f64::INFINITY, f64::min),
        Some((k, _, nonzero)) => parties[nonzero].1[k],
    };

    let shared_verdict = |criterion| {
        CompatibilityVerdict::new(criterion, shared, best_floor, shared_witness.clone())
    };
    let es_verdict = |criterion| {
        CompatibilityVerdict::new(criterion, es_compatible, es_margin, es_witness.clone())
    };
    vec![
        es_verdict(Criterion::ClassicalEs),
        shared_verdict(Criterion::ClassicalBfm),
        shared_verdict(Criterion::ClassicalPp),
        es_verdict(Criterion::ClassicalW),
        shared_verdict(Criterion::ClassicalWPrime),
    ]
}

/// Probability vectors of all states in a common eigenbasis, when one
/// exists. Outcome indices follow the basis columns.
pub fn classical_projection(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<Option<ClassicalAssignment>, CriteriaError> {
    let Some(basis) = crate::states::commuting_eigenbasis(ensemble, tol)? else {
        return Ok(None);
    };
    let dim = ensemble.dim();
    let parties = ensemble
        .states()
        .iter()
        .map(|s| {
            let probs = (0..dim)
                .map(|k| crate::linalg::expectation(s.matrix(), &basis.column(k)))
                .collect();
            (s.label().to_string(), probs)
        })
        .collect();
    Ok(Some(ClassicalAssignment::new(dim, parties)?))
}
