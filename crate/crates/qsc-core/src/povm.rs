//! Qubit compatibility under arbitrary positive-operator measurements.
//!
//! For qubit assignments the question reduces to convex geometry: after
//! discarding full-rank states (which can never be excluded by any outcome),
//! the remaining states are pure and incompatibility holds exactly when the
//! origin lies in the convex hull of their Bloch vectors. The weights `q`
//! with `sum q_a n_a = 0` directly assemble the contradicting measurement
//! `E_a = q_a (1 - n_a . sigma)`, and when the origin is outside the hull
//! the point of the hull closest to the origin yields a strictly separating
//! direction, which certifies compatibility.
//!
//! The hull geometry is solved exactly by enumerating candidate faces
//! (subsets of at most `d + 1` points) and projecting the origin onto each
//! affine hull, keeping the best projection with nonnegative convex weights.
//! Party counts are small, so this is both exact and cheap.

use thiserror::Error;

use crate::linalg::{ComplexMatrix, LinalgError, Tolerances};
use crate::states::{pauli_matrices, to_bloch, StateEnsemble, StateError};
use crate::verdict::{CompatibilityVerdict, Criterion, Witness};
use num_complex::Complex64;

/// Hull residuals at or below this value count as containment.
pub const CONTAINMENT_THRESHOLD: f64 = 1e-9;
/// Residuals in `(CONTAINMENT_THRESHOLD, BOUNDARY_THRESHOLD]` are flagged as
/// boundary cases; the verdict stays compatible because containment must be
/// strict to force incompatibility.
pub const BOUNDARY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PovmError {
    #[error("criterion applies to qubits, dimension is {dim}")]
    NotQubit { dim: usize },
    #[error("hull dimension {d} unsupported, expected 2 or 3")]
    HullDimension { d: usize },
    #[error("hull computation supports at most {max} points, got {got}")]
    TooManyPoints { max: usize, got: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Minimum-norm point of the convex hull together with its convex weights
/// over the input points. Exact up to the small linear solves involved.
pub fn min_norm_point(points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), PovmError> {
    let n = points.len();
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    if !(2..=3).contains(&d) {
        return Err(PovmError::HullDimension { d });
    }
    if n > 64 {
        return Err(PovmError::TooManyPoints { max: 64, got: n });
    }
    let mut best_dist = f64::INFINITY;
    let mut best_point = vec![0.0; d];
    let mut best_weights = vec![0.0; n];

    let mut subset = Vec::new();
    for_each_combination(n, d + 1, &mut subset, 0, &mut |idx: &[usize]| {
        if let Some((point, lambda)) = project_origin(points, idx) {
            if lambda.iter().all(|l| *l >= -1e-12) {
                let dist = point.iter().map(|x| x * x).sum::<f64>().sqrt();
                if dist < best_dist {
                    best_dist = dist;
                    best_point = point;
                    best_weights = vec![0.0; n];
                    let total: f64 = lambda.iter().map(|l| l.max(0.0)).sum();
                    for (pos, &i) in idx.iter().enumerate() {
                        best_weights[i] = lambda[pos].max(0.0) / total;
                    }
                }
            }
        }
    });
    if best_dist.is_infinite() {
        // Cannot happen for nonempty input: singletons always project.
        return Err(PovmError::HullDimension { d });
    }
    Ok((best_point, best_weights))
}

/// Convex weights expressing the origin as a combination of the points, or
/// `None` when the origin lies strictly outside the hull.
pub fn zero_in_hull(points: &[Vec<f64>]) -> Result<Option<Vec<f64>>, PovmError> {
    let (point, weights) = min_norm_point(points)?;
    let dist = point.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(if dist <= CONTAINMENT_THRESHOLD {
        Some(weights)
    } else {
        None
    })
}

fn for_each_combination(
    n: usize,
    max_size: usize,
    current: &mut Vec<usize>,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if !current.is_empty() {
        f(current);
    }
    if current.len() == max_size {
        return;
    }
    for i in start..n {
        current.push(i);
        for_each_combination(n, max_size, current, i + 1, f);
        current.pop();
    }
}

/// Projects the origin onto the affine hull of the chosen points and returns
/// the projection with its barycentric coordinates, or `None` when the
/// points are affinely dependent.
fn project_origin(points: &[Vec<f64>], idx: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = points[idx[0]].len();
    let m = idx.len();
    if m == 1 {
        return Some((points[idx[0]].clone(), vec![1.0]));
    }
    let base = &points[idx[0]];
    let diffs: Vec<Vec<f64>> = idx[1..]
        .iter()
        .map(|&i| (0..d).map(|k| points[i][k] - base[k]).collect())
        .collect();
    // Normal equations G mu = -D^T base.
    let mm = m - 1;
    let mut g = vec![vec![0.0; mm]; mm];
    let mut rhs = vec![0.0; mm];
    for i in 0..mm {
        for j in 0..mm {
            g[i][j] = dot(&diffs[i], &diffs[j]);
        }
        rhs[i] = -dot(&diffs[i], base);
    }
    let scale = g
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
        .max(1e-300);
    let mu = solve_small(&mut g, &mut rhs, 1e-12 * scale)?;
    let mut lambda = Vec::with_capacity(m);
    lambda.push(1.0 - mu.iter().sum::<f64>());
    lambda.extend_from_slice(&mu);
    let mut point = base.clone();
    for (i, diff) in diffs.iter().enumerate() {
        for k in 0..d {
            point[k] += mu[i] * diff[k];
        }
    }
    Some((point, lambda))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting for tiny systems; `None` when
/// a pivot falls below `pivot_tol`.
fn solve_small(g: &mut [Vec<f64>], rhs: &mut [f64], pivot_tol: f64) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| g[a][col].abs().partial_cmp(&g[b][col].abs()).unwrap())
            .unwrap();
        if g[pivot_row][col].abs() <= pivot_tol {
            return None;
        }
        g.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let (lead_rows, tail_rows) = g.split_at_mut(col + 1);
        let lead = &lead_rows[col];
        for (offset, row_vals) in tail_rows.iter_mut().enumerate() {
            let f = row_vals[col] / lead[col];
            for (entry, l) in row_vals[col..].iter_mut().zip(&lead[col..]) {
                *entry -= f * l;
            }
            rhs[col + 1 + offset] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in (col + 1)..n {
            acc -= g[col][k] * x[k];
        }
        x[col] = acc / g[col][col];
    }
    Some(x)
}

/// Decides qubit compatibility under general measurements.
///
/// Full-rank states are discarded first. The verdict's `margin` is the
/// distance from the origin to the hull of the remaining Bloch vectors:
/// compatibility requires it to exceed [`CONTAINMENT_THRESHOLD`], and values
/// up to [`BOUNDARY_THRESHOLD`] carry the boundary flag.
pub fn check_qubit_pp_povm(
    ensemble: &StateEnsemble,
    tol: &Tolerances,
) -> Result<CompatibilityVerdict, PovmError> {
    if ensemble.dim() != 2 {
        return Err(PovmError::NotQubit {
            dim: ensemble.dim(),
        });
    }
    let mut pure_indices = Vec::new();
    for (i, s) in ensemble.states().iter().enumerate() {
        let rank = crate::linalg::support(s.matrix(), tol)?.dim();
        if rank < 2 {
            pure_indices.push(i);
        }
    }
    if pure_indices.is_empty() {
        // Every state is full rank; any outcome direction works for everyone.
        let v = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let margin = ensemble
            .states()
            .iter()
            .map(|s| crate::linalg::expectation(s.matrix(), &v))
            .fold(f64::INFINITY, f64::min);
        return Ok(CompatibilityVerdict {
            criterion: Criterion::PpPovm,
            compatible: true,
            margin,
            boundary: false,
            witness: Witness::SharedSupportVector { vector: v },
        });
    }
    let bloch: Vec<Vec<f64>> = pure_indices
        .iter()
        .map(|&i| to_bloch(&ensemble.states()[i]).map(|n| n.0.to_vec()))
        .collect::<Result<_, _>>()?;
    let (closest, weights) = min_norm_point(&bloch)?;
    let dist = closest.iter().map(|x| x * x).sum::<f64>().sqrt();

    if dist <= CONTAINMENT_THRESHOLD {
        // Assemble E_a = q_a (1 - n_a . sigma) for the supporting weights.
        let paulis = pauli_matrices();
        let mut elements = Vec::new();
        let mut excluders = Vec::new();
        for (pos, &i) in pure_indices.iter().enumerate() {
            let q = weights[pos];
            if q <= 1e-12 {
                continue;
            }
            let mut e = ComplexMatrix::identity(2);
            for (axis, sigma) in paulis.iter().enumerate() {
                e = e.sub(&sigma.scale(Complex64::new(bloch[pos][axis], 0.0)));
            }
            elements.push(e.scale(Complex64::new(q, 0.0)));
            excluders.push(ensemble.states()[i].label().to_string());
        }
        let probabilities = crate::verdict::measurement_probabilities(
            &crate::verdict::Measurement::Povm {
                elements: elements.clone(),
            },
            ensemble,
        );
        return Ok(CompatibilityVerdict {
            criterion: Criterion::PpPovm,
            compatible: false,
            margin: dist,
            boundary: false,
            witness: Witness::ContradictingPovm {
                elements,
                excluders,
                party_labels: ensemble.labels(),
                probabilities,
            },
        });
    }

    let direction: Vec<f64> = closest.iter().map(|x| x / dist).collect();
    // Optimality of the closest point gives direction . n >= dist for every
    // hull point, so the hull sits strictly on one side.
    let min_overlap = bloch
        .iter()
        .map(|n| dot(&direction, n))
        .fold(f64::INFINITY, f64::min);
    Ok(CompatibilityVerdict {
        criterion: Criterion::PpPovm,
        compatible: true,
        margin: dist,
        boundary: dist <= BOUNDARY_THRESHOLD,
        witness: Witness::BlochSeparation {
            direction: [direction[0], direction[1], direction[2]],
            min_overlap,
        },
    })
}
