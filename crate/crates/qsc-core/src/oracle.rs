//! Randomized search for contradicting measurements.
//!
//! The search minimizes the worst-case witness score of a basis,
//! `score(basis) = sum over outcomes of the smallest party probability`,
//! over orthonormal bases. A score at numerical zero exhibits a measurement
//! in which every outcome is excluded by some party, which proves joint
//! incompatibility outright. The search is one-sided: failure to find such
//! a basis within the trial budget is evidence of compatibility, never
//! proof.
//!
//! Restarts draw Haar-like random bases, each followed by derivative-free
//! local refinement: random two-column phased rotations accepted only when
//! the score improves, with a geometrically adapted angle that grows on
//! acceptance and shrinks otherwise. A collapsed angle ends the trial, so
//! stalled descents stop paying for the remaining levels. The acceptance
//! bar is relative to the current score and relaxes close to the
//! tolerance, where ill-conditioned descents legitimately crawl. Each trial seeds
//! its own generator stream from `(seed, trial index)`, and the best result
//! is reduced with a trial-index tie-break, so any evaluation order gives
//! bit-identical results.
//!
//! For general measurements the search runs over zero-padded embeddings of
//! the ensemble in dimensions `D` through `D + extra_dims`: a contradicting
//! basis found upstairs truncates to a rank-one measurement downstairs with
//! the same outcome probabilities. `trials_used` then counts trials across
//! all embedding levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    hermitian_eigendecomposition, inner, random_unitary, Complex64, ComplexMatrix, Tolerances,
};
use crate::states::{DensityOperator, StateEnsemble};
use crate::verdict::validate_povm;

/// Rotation angle at the first refinement level.
const SIGMA_START: f64 = 0.5;
/// Largest angle the schedule may grow back to.
const SIGMA_MAX: f64 = 0.8;
/// A trial whose angle has shrunk this far is either converged well past
/// the score tolerance or settled in a positive local minimum; both end it.
const SIGMA_FLOOR: f64 = 1e-8;
/// Angle growth after a level with an accepted rotation.
const SIGMA_GROW: f64 = 1.5;
/// Angle shrink after a level where every candidate was rejected.
const SIGMA_SHRINK: f64 = 0.55;
/// Candidate rotations tried per angle level, stopping at the first one
/// that improves the score.
const DRAWS_PER_LEVEL: usize = 8;
/// Rotations must improve the score by this fraction of its current value
/// to count; descents toward an exact contradiction shrink the score by a
/// constant factor per accepted rotation and clear the bar easily, while
/// the vanishing gains around a positive local minimum stop counting, the
/// angle collapses, and the trial ends instead of polishing a dead end.
const MIN_GAIN_FRACTION: f64 = 1e-2;
/// Within this multiple of the score tolerance the bar drops to
/// `ENDGAME_GAIN_FRACTION`. Ill-conditioned valleys (one pair of states
/// close to orthogonal) descend in sub-percent increments near the bottom,
/// and the full bar would end such trials a factor of two or three short
/// of the tolerance.
const ENDGAME_BAND: f64 = 1e4;
/// Endgame acceptance bar: just enough to reject pure round-off.
const ENDGAME_GAIN_FRACTION: f64 = 1e-6;
/// Alternating-projection rounds for trials that end inside the endgame
/// band. Convergence toward an intersection of the constraint sets is
/// linear, and this many rounds closes the remaining factor of a few with
/// room to spare; stalled alternations break out early.
const POLISH_ROUNDS: usize = 60;

/// Search budget and acceptance threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Random restarts; values below 1 are treated as 1.
    pub trials: usize,
    /// Local refinement steps per restart.
    pub refine_steps: usize,
    pub seed: u64,
    /// Largest number of padding dimensions explored by the embedded
    /// search; the plain basis search uses it as a fixed padding width.
    pub extra_dims: usize,
    /// Scores at or below this value count as an exact contradiction.
    pub score_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            refine_steps: 200,
            seed: 0,
            extra_dims: 0,
            score_tol: 1e-9,
        }
    }
}

/// Outcome of a search. `found` implies the measurement is present and its
/// score, the sum over outcomes of the smallest party probability, is at
/// most `score_tol`; each outcome is then individually excluded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub found: bool,
    pub best_score: f64,
    /// Columns of the contradicting basis, in the searched dimension.
    pub measurement: Option<ComplexMatrix>,
    pub trials_used: usize,
}

fn embed_states(ensemble: &StateEnsemble, extra_dims: usize) -> StateEnsemble {
    if extra_dims == 0 {
        return ensemble.clone();
    }
    let dim = ensemble.dim();
    let padded = dim + extra_dims;
    let states = ensemble
        .states()
        .iter()
        .map(|s| {
            let m = ComplexMatrix::from_fn(padded, padded, |i, j| {
                if i < dim && j < dim {
                    s.matrix().get(i, j)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            DensityOperator::new(s.label(), m, &Tolerances::default())
                .expect("zero padding preserves a valid state")
        })
        .collect();
    StateEnsemble::new(states).expect("zero padding preserves ensemble validity")
}

/// Support spectral terms of every party, so that an outcome probability
/// is a short sum of squared inner products instead of a matrix sandwich.
/// The cutoff is relative to the largest eigenvalue, the same support
/// convention the criteria use. Keeping rounding-dust eigenvalues would
/// not move any probability, but their eigenvectors are arbitrary unit
/// vectors, and `polish` projects columns off every listed direction.
fn spectral_factors(states: &[DensityOperator], tol: &Tolerances) -> Vec<Vec<(f64, Vec<Complex64>)>> {
    states
        .iter()
        .map(|s| {
            let pairs = hermitian_eigendecomposition(s.matrix(), tol)
                .expect("validated states decompose");
            let largest = pairs.first().map_or(0.0, |(value, _)| *value);
            pairs
                .into_iter()
                .filter(|(value, _)| *value > tol.tol_rank * largest)
                .collect()
        })
        .collect()
}

/// Smallest party probability for one basis column.
fn outcome_floor(factors: &[Vec<(f64, Vec<Complex64>)>], column: &[Complex64]) -> f64 {
    factors
        .iter()
        .map(|party| {
            party
                .iter()
                .map(|(value, vector)| value * inner(vector, column).norm_sqr())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn refine(
    columns: &mut [Vec<Complex64>],
    floors: &mut [f64],
    factors: &[Vec<(f64, Vec<Complex64>)>],
    cfg: &OracleConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let dim = columns.len();
    let mut score: f64 = floors.iter().sum();
    if cfg.refine_steps == 0 || dim < 2 {
        return score;
    }
    let mut new_i = vec![Complex64::new(0.0, 0.0); dim];
    let mut new_j = vec![Complex64::new(0.0, 0.0); dim];
    let mut sigma = SIGMA_START;
    for _ in 0..cfg.refine_steps {
        if score <= cfg.score_tol || sigma < SIGMA_FLOOR {
            break;
        }
        let mut accepted = false;
        for _ in 0..DRAWS_PER_LEVEL {
            let i = rng.gen_range(0..dim);
            let mut j = rng.gen_range(0..dim - 1);
            if j >= i {
                j += 1;
            }
            let theta = sigma * (2.0 * rng.gen::<f64>() - 1.0);
            let phase = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
            let (cos_t, sin_t) = (theta.cos(), theta.sin());
            for r in 0..dim {
                new_i[r] = columns[i][r] * cos_t + columns[j][r] * phase * sin_t;
                new_j[r] = columns[j][r] * cos_t - columns[i][r] * phase.conj() * sin_t;
            }
            let floor_i = outcome_floor(factors, &new_i);
            let floor_j = outcome_floor(factors, &new_j);
            let gain = floors[i] + floors[j] - floor_i - floor_j;
            let bar = if score <= cfg.score_tol * ENDGAME_BAND {
                ENDGAME_GAIN_FRACTION
            } else {
                MIN_GAIN_FRACTION
            };
            if gain > bar * score {
                score -= gain;
                floors[i] = floor_i;
                floors[j] = floor_j;
                std::mem::swap(&mut columns[i], &mut new_i);
                std::mem::swap(&mut columns[j], &mut new_j);
                accepted = true;
                break;
            }
        }
        sigma = if accepted {
            (sigma * SIGMA_GROW).min(SIGMA_MAX)
        } else {
            sigma * SIGMA_SHRINK
        };
    }
    // Guard against accumulated cancellation in the running sum.
    floors.iter().sum::<f64>().max(0.0)
}

/// Unitary factor of the polar decomposition: the Frobenius-nearest
/// orthonormal frame to a set of nearly orthonormal columns. Gram-Schmidt
/// would pin the first column and dump every correction on the later ones,
/// which breaks the contraction the alternating projection in `polish`
/// relies on; the polar factor spreads corrections symmetrically. Bails
/// out when the frame has decayed too far for the inverse square root to
/// be trustworthy.
fn nearest_unitary(cols: &[Vec<Complex64>]) -> Option<Vec<Vec<Complex64>>> {
    let debug = std::env::var_os("QSC_DEBUG_POLISH").is_some();
    let dim = cols.len();
    let a = ComplexMatrix::from_columns(dim, cols);
    let gram = a.dagger().mul(&a);
    let pairs = match hermitian_eigendecomposition(&gram, &Tolerances::default()) {
        Ok(p) => p,
        Err(e) => {
            if debug {
                eprintln!("nearest_unitary eigen error: {e}");
            }
            return None;
        }
    };
    let mut inv_sqrt = ComplexMatrix::zeros(dim, dim);
    for (value, vector) in pairs {
        if value <= 0.25 {
            if debug {
                eprintln!("nearest_unitary small gram eigenvalue {value:.6e}");
            }
            return None;
        }
        let weight = Complex64::new(1.0 / value.sqrt(), 0.0);
        inv_sqrt = inv_sqrt.add(&ComplexMatrix::outer(&vector).scale(weight));
    }
    let u = a.mul(&inv_sqrt);
    Some((0..dim).map(|k| u.column(k)).collect())
}

/// Deterministic endgame for a promising trial: alternately force each
/// column into the null space of its cheapest party and restore
/// orthonormality. The two constraint sets intersect exactly when a
/// contradicting basis with the current exclusion assignment exists, and
/// the alternation closes the last stretch of an ill-conditioned valley
/// where random rotations wedge a factor of a few above the tolerance.
/// Against a compatible ensemble the sets stay apart and the score floors
/// at their positive gap, so this cannot manufacture a find.
fn polish(
    columns: &mut [Vec<Complex64>],
    floors: &mut [f64],
    factors: &[Vec<(f64, Vec<Complex64>)>],
    score_tol: f64,
) -> f64 {
    let debug = std::env::var_os("QSC_DEBUG_POLISH").is_some();
    let dim = columns.len();
    let mut best: f64 = floors.iter().sum::<f64>().max(0.0);
    if debug {
        eprintln!("polish enter best={best:.6e} floors={floors:?}");
    }
    let mut projected: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    for round in 0..POLISH_ROUNDS {
        if best <= score_tol {
            break;
        }
        projected.clear();
        let mut assignment: Vec<usize> = Vec::new();
        for col in columns.iter() {
            let cheapest = factors
                .iter()
                .enumerate()
                .map(|(a, party)| {
                    let p: f64 = party
                        .iter()
                        .map(|(value, vector)| value * inner(vector, col).norm_sqr())
                        .sum();
                    (a, p)
                })
                .min_by(|(_, x), (_, y)| x.partial_cmp(y).expect("probabilities are finite"))
                .map(|(a, _)| a)
                .expect("at least one party");
            let mut v = col.clone();
            for (_, vector) in &factors[cheapest] {
                let c = inner(vector, &v);
                for (vi, bi) in v.iter_mut().zip(vector.iter()) {
                    *vi -= c * bi;
                }
            }
            assignment.push(cheapest);
            projected.push(v);
        }
        if debug {
            eprintln!("polish round {round} assignment={assignment:?}");
        }
        let Some(ortho) = nearest_unitary(&projected) else {
            if debug {
                eprintln!("polish round {round} frame decayed");
            }
            break;
        };
        let new_floors: Vec<f64> = ortho.iter().map(|c| outcome_floor(factors, c)).collect();
        let score = new_floors.iter().sum::<f64>().max(0.0);
        if debug {
            eprintln!("polish round {round} score={score:.6e} floors={new_floors:?}");
        }
        if score < best {
            best = score;
            for (dst, src) in columns.iter_mut().zip(ortho) {
                *dst = src;
            }
            floors.copy_from_slice(&new_floors);
        } else {
            break;
        }
    }
    best
}

/// Searches for a basis in which every outcome is excluded by some party.
///
/// With `extra_dims > 0` the states are first padded with that many zero
/// dimensions and the search runs upstairs. Identical inputs give identical
/// results; `trials_used` reports how many restarts ran before the early
/// exit, or the full budget when nothing was found.
pub fn search_contradicting_odop(ensemble: &StateEnsemble, cfg: &OracleConfig) -> OracleResult {
    let embedded = embed_states(ensemble, cfg.extra_dims);
    let dim = embedded.dim();
    let factors = spectral_factors(embedded.states(), &Tolerances::default());
    let trials = cfg.trials.max(1);

    let mut best_score = f64::INFINITY;
    let mut best_basis: Option<ComplexMatrix> = None;
    let mut trials_used = trials;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(trial as u64);
        let start = random_unitary(dim, &mut rng);
        let mut columns: Vec<Vec<Complex64>> = (0..dim).map(|k| start.column(k)).collect();
        let mut floors: Vec<f64> = columns
            .iter()
            .map(|col| outcome_floor(&factors, col))
            .collect();
        let mut score = refine(&mut columns, &mut floors, &factors, cfg, &mut rng);
        if score > cfg.score_tol && score <= cfg.score_tol * ENDGAME_BAND {
            score = polish(&mut columns, &mut floors, &factors, cfg.score_tol);
        }
        if score < best_score {
            best_score = score;
            best_basis = Some(ComplexMatrix::from_columns(dim, &columns));
        }
        if best_score <= cfg.score_tol {
            trials_used = trial + 1;
            break;
        }
    }

    let found = best_score <= cfg.score_tol;
    OracleResult {
        found,
        best_score,
        measurement: if found { best_basis } else { None },
        trials_used,
    }
}

/// Truncates the columns of a contradicting basis in dimension `D + k` to
/// rank-one measurement elements in dimension `D`. The elements sum to the
/// identity because the discarded rows multiply zero-padded states only.
pub fn rank_one_povm_from_embedded(basis: &ComplexMatrix, dim: usize) -> Vec<ComplexMatrix> {
    (0..basis.rows())
        .map(|k| {
            let truncated: Vec<Complex64> = basis.column(k)[..dim].to_vec();
            ComplexMatrix::outer(&truncated)
        })
        .collect()
}

/// Gathers incompatibility evidence for general measurements by searching
/// embeddings with `0..=extra_dims` padding dimensions, smallest first.
///
/// A find at any level is verified by truncating the basis to a rank-one
/// measurement in the original dimension and revalidating it there; the
/// result keeps the embedded basis, whose row count reveals the level.
/// `best_score` is the smallest score seen at any level.
pub fn search_contradicting_povm_evidence(
    ensemble: &StateEnsemble,
    cfg: &OracleConfig,
) -> OracleResult {
    let dim = ensemble.dim();
    let mut total_trials = 0;
    let mut best_score = f64::INFINITY;
    for k in 0..=cfg.extra_dims {
        let level_cfg = OracleConfig {
            extra_dims: k,
            ..cfg.clone()
        };
        let result = search_contradicting_odop(ensemble, &level_cfg);
        total_trials += result.trials_used;
        best_score = best_score.min(result.best_score);
        if result.found {
            let basis = result
                .measurement
                .expect("a found result carries its measurement");
            let elements = rank_one_povm_from_embedded(&basis, dim);
            let valid = validate_povm(&elements, dim, &Tolerances::default()).is_ok()
                && elements.iter().all(|e| {
                    ensemble
                        .states()
                        .iter()
                        .map(|s| e.mul(s.matrix()).trace().re)
                        .fold(f64::INFINITY, f64::min)
                        <= cfg.score_tol
                });
            if valid {
                return OracleResult {
                    found: true,
                    best_score: result.best_score,
                    measurement: Some(basis),
                    trials_used: total_trials,
                };
            }
        }
    }
    OracleResult {
        found: false,
        best_score,
        measurement: None,
        trials_used: total_trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expectation;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn diag(label: &str, entries: &[f64]) -> DensityOperator {
        let d = entries.len();
        let m = ComplexMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(entries[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        DensityOperator::new(label, m, &tol()).unwrap()
    }

    fn three_mixtures() -> StateEnsemble {
        StateEnsemble::new(vec![
            diag("rho1", &[0.0, 0.5, 0.5]),
            diag("rho2", &[0.5, 0.0, 0.5]),
            diag("rho3", &[0.5, 0.5, 0.0]),
        ])
        .unwrap()
    }

    fn assert_contradiction(result: &OracleResult, ensemble: &StateEnsemble, tol: f64) {
        assert!(result.found);
        assert!(result.best_score <= tol);
        let basis = result.measurement.as_ref().unwrap();
        for k in 0..basis.rows() {
            let column = basis.column(k);
            let floor = ensemble
                .states()
                .iter()
                .map(|s| {
                    let padded: Vec<Complex64> = column[..ensemble.dim()].to_vec();
                    expectation(s.matrix(), &padded)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(floor <= tol, "outcome {k} is not excluded: {floor}");
        }
        for i in 0..basis.rows() {
            for j in (i + 1)..basis.rows() {
                let ip = inner(&basis.column(i), &basis.column(j));
                assert!(ip.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn finds_the_unique_contradiction_of_the_three_mixtures() {
        let ens = three_mixtures();
        let cfg = OracleConfig {
            trials: 500,
            refine_steps: 400,
            ..OracleConfig::default()
        };
        let result = search_contradicting_odop(&ens, &cfg);
        assert_contradiction(&result, &ens, cfg.score_tol);
        assert!(result.trials_used <= cfg.trials);
    }

    #[test]
    fn two_overlapping_pure_states_defeat_the_search() {
        let t = tol();
        let v1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let v2 = [
            Complex64::new(0.6, 0.0),
            Complex64::new(0.8, 0.0),
        ];
        let ens = StateEnsemble::new(vec![
            DensityOperator::pure("A", &v1, &t).unwrap(),
            DensityOperator::pure("B", &v2, &t).unwrap(),
        ])
        .unwrap();
        let cfg = OracleConfig {
            trials: 200,
            refine_steps: 200,
            extra_dims: 3,
            ..OracleConfig::default()
        };
        let basis_only = search_contradicting_odop(
            &ens,
            &OracleConfig {
                extra_dims: 0,
                ..cfg.clone()
            },
        );
        assert!(!basis_only.found);
        assert!(basis_only.best_score > cfg.score_tol);
        assert!(basis_only.measurement.is_none());
        assert_eq!(basis_only.trials_used, 200);

        let embedded = search_contradicting_povm_evidence(&ens, &cfg);
        assert!(!embedded.found);
        assert_eq!(embedded.trials_used, 4 * 200);
    }

    #[test]
    fn rediscovers_the_three_pure_contradiction() {
        let t = tol();
        let triple = crate::pp3::InnerProductTriple::new(0.2, 0.2, 0.2).unwrap();
        let vectors = crate::pp3::reconstruct_three_pure(&triple, &[0.0; 3]).unwrap();
        let states: Vec<DensityOperator> = vectors
            .iter()
            .enumerate()
            .map(|(k, v)| DensityOperator::pure(format!("S{}", k + 1), v, &t).unwrap())
            .collect();
        let ens = StateEnsemble::new(states).unwrap();
        let cfg = OracleConfig {
            trials: 2000,
            refine_steps: 200,
            ..OracleConfig::default()
        };
        let result = search_contradicting_odop(&ens, &cfg);
        assert_contradiction(&result, &ens, cfg.score_tol);
    }

    #[test]
    fn trine_needs_exactly_one_padding_dimension() {
        let t = tol();
        let trine: Vec<DensityOperator> = (0..3)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                let v = [
                    Complex64::new((angle / 2.0).cos(), 0.0),
                    Complex64::new((angle / 2.0).sin(), 0.0),
                ];
                DensityOperator::pure(format!("T{}", k + 1), &v, &t).unwrap()
            })
            .collect();
        let ens = StateEnsemble::new(trine).unwrap();
        let cfg = OracleConfig {
            trials: 600,
            refine_steps: 400,
            extra_dims: 2,
            ..OracleConfig::default()
        };
        let result = search_contradicting_povm_evidence(&ens, &cfg);
        assert_contradiction(&result, &ens, cfg.score_tol);
        let basis = result.measurement.as_ref().unwrap();
        assert_eq!(basis.rows(), 3, "the first padded level should suffice");
        assert!(result.trials_used > cfg.trials, "level zero cannot succeed");

        let elements = rank_one_povm_from_embedded(basis, 2);
        validate_povm(&elements, 2, &tol()).unwrap();
    }

    #[test]
    fn identical_inputs_give_identical_results() {
        let ens = three_mixtures();
        let cfg = OracleConfig {
            trials: 40,
            refine_steps: 120,
            seed: 9,
            ..OracleConfig::default()
        };
        let a = search_contradicting_odop(&ens, &cfg);
        let b = search_contradicting_odop(&ens, &cfg);
        assert_eq!(a.found, b.found);
        assert_eq!(a.best_score.to_bits(), b.best_score.to_bits());
        assert_eq!(a.trials_used, b.trials_used);
        match (&a.measurement, &b.measurement) {
            (Some(ma), Some(mb)) => {
                for i in 0..ma.rows() {
                    for j in 0..ma.rows() {
                        assert_eq!(ma.get(i, j), mb.get(i, j));
                    }
                }
            }
            (None, None) => {}
            _ => panic!("determinism broken"),
        }
    }
}
