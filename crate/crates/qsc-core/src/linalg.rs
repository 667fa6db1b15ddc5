//! Dense complex linear algebra for small Hilbert space dimensions.
//!
//! Everything downstream reduces to a handful of primitives collected here:
//! a row-major complex matrix type, a cyclic Jacobi eigensolver for Hermitian
//! matrices, and a subspace calculus (support, orthocomplement, span union,
//! intersection) built on top of it. Subspaces are represented by orthonormal
//! frames but always *compared* through their projectors, so two frames that
//! span the same space are interchangeable.
//!
//! Dimensions are runtime values; nothing here is specialised to qubits or
//! qutrits. The matrices involved are tiny (D up to a dozen or so), so the
//! O(D^3)-per-sweep Jacobi iteration is both fast and extremely robust.

use rand::Rng;
use thiserror::Error;

pub use num_complex::Complex64;

/// Numerical cutoffs shared across the crate.
///
/// `tol_rank` decides which eigenvalues count as nonzero when computing
/// supports (relative to the largest eigenvalue), `tol_orth` bounds
/// acceptable deviation from Hermiticity/orthonormality, and `tol_zero` is
/// the threshold below which a probability is treated as exactly zero.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub tol_rank: f64,
    pub tol_orth: f64,
    pub tol_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_rank: 1e-10,
            tol_orth: 1e-10,
            tol_zero: 1e-10,
        }
    }
}

impl Tolerances {
    /// Uniform tolerances, as set by the command line `--tolerance` flag.
    pub fn uniform(t: f64) -> Self {
        Tolerances {
            tol_rank: t,
            tol_orth: t,
            tol_zero: t,
        }
    }

    pub fn validate(&self) -> Result<(), LinalgError> {
        for (name, v) in [
            ("tol_rank", self.tol_rank),
            ("tol_orth", self.tol_orth),
            ("tol_zero", self.tol_zero),
        ] {
            if !(v > 0.0 && v < 1e-2) {
                return Err(LinalgError::BadTolerance {
                    name,
                    value: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: ||M - M^dag|| = {deviation:.3e} exceeds {allowed:.3e}")]
    NotHermitian { deviation: f64, allowed: f64 },
    #[error("vector is not unit norm: ||v|| = {norm}")]
    NotUnit { norm: f64 },
    #[error("ambient dimensions differ: {a} vs {b}")]
    AmbientMismatch { a: usize, b: usize },
    #[error("operation requires at least one subspace")]
    EmptyInput,
    #[error("frame columns are not orthonormal: deviation {deviation:.3e}")]
    NotOrthonormal { deviation: f64 },
    #[error("matrix entries must be finite")]
    NonFiniteEntry,
    #[error("Jacobi eigensolver failed to converge")]
    EigenNotConverged,
    #[error("tolerance {name} = {value} out of range (0, 1e-2)")]
    BadTolerance { name: &'static str, value: f64 },
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    /// Builds a matrix from row slices; panics on ragged input.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let nr = rows.len();
        let nc = if nr == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(nr, nc);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), nc, "ragged rows in matrix literal");
            for (c, v) in row.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(ambient: usize, cols: &[Vec<Complex64>]) -> Self {
        let mut m = Self::zeros(ambient, cols.len());
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), ambient, "column length mismatch");
            for (r, v) in col.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, col: &[Complex64]) {
        assert_eq!(col.len(), self.rows);
        for (r, v) in col.iter().enumerate() {
            self.set(r, c, *v);
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == ZERO {
                    continue;
                }
                for c in 0..rhs.cols {
                    let v = out.get(r, c) + a * rhs.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a -= *b;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||M - M^dag||_F`, zero for exactly Hermitian matrices.
    pub fn hermitian_deviation(&self) -> f64 {
        assert!(self.is_square());
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let d = self.get(r, c) - self.get(c, r).conj();
                acc += d.norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    /// Outer product `v v^dag` of a column vector.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |r, c| v[r] * v[c].conj())
    }
}

impl serde::Serialize for ComplexMatrix {
    /// Rows of `[re, im]` pairs, the same layout the input files use.
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| {
                        let z = self.get(r, c);
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = serde::Deserialize::deserialize(d)?;
        let nr = rows.len();
        let nc = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(ComplexMatrix::from_fn(nr, nc, |r, c| {
            Complex64::new(rows[r][c][0], rows[r][c][1])
        }))
    }
}

/// Serde adapter for `Vec<Complex64>` fields rendered as `[re, im]` pairs.
pub mod cvec {
    use super::Complex64;

    pub fn serialize<S: serde::Serializer>(
        v: &[Complex64],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        serde::Serialize::serialize(&pairs, s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = serde::Deserialize::deserialize(d)?;
        Ok(pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

/// Inner product conjugate-linear in the first argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &[Complex64]) -> Vec<Complex64> {
    let n = vec_norm(v);
    assert!(n > 0.0, "cannot normalize the zero vector");
    v.iter().map(|z| z / n).collect()
}

/// Real part of `<v| M |v>`; exact expectation for Hermitian `M`.
pub fn expectation(m: &ComplexMatrix, v: &[Complex64]) -> f64 {
    inner(v, &m.apply(v)).re
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalue, eigenvector)` pairs sorted by descending eigenvalue.
/// Eigenvectors are orthonormal by construction (they are columns of a
/// product of unitary plane rotations). Hermiticity is checked up front
/// against `tol.tol_orth` relative to the Frobenius norm.
pub fn hermitian_eigendecomposition(
    m: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<Vec<(f64, Vec<Complex64>)>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFiniteEntry);
    }
    let scale = m.frobenius_norm().max(1.0);
    let deviation = m.hermitian_deviation();
    let allowed = tol.tol_orth * scale;
    if deviation > allowed {
        return Err(LinalgError::NotHermitian { deviation, allowed });
    }
    let (vals, vecs) = jacobi_hermitian(m)?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    Ok(order
        .into_iter()
        .map(|i| (vals[i], vecs.column(i)))
        .collect())
}

/// Core Jacobi iteration. The input is symmetrised first, so callers that
/// construct matrices Hermitian up to rounding get exact real eigenvalues.
fn jacobi_hermitian(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    let n = m.rows();
    if n == 0 {
        return Ok((vec![], ComplexMatrix::zeros(0, 0)));
    }
    // w <- (M + M^dag)/2
    let mut w = ComplexMatrix::from_fn(n, n, |r, c| (m.get(r, c) + m.get(c, r).conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);
    let scale = w.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = 1e-30_f64 * scale * scale; // squared off-diagonal mass

    for _sweep in 0..100 {
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += w.get(r, c).norm_sqr();
            }
        }
        if 2.0 * off <= target {
            let vals = (0..n).map(|i| w.get(i, i).re).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                let r = apq.norm();
                if r <= 1e-300 * scale {
                    continue;
                }
                let phase = apq / r; // e^{i phi}
                let app = w.get(p, p).re;
                let aqq = w.get(q, q).re;
                // Rotation angle from the standard real Jacobi formula on the
                // phase-stripped 2x2 block.
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase * s; // s e^{i phi}
                // Columns: (W J) with J = [[c, sp], [-sp.conj(), c]] on (p, q).
                for k in 0..n {
                    let wkp = w.get(k, p);
                    let wkq = w.get(k, q);
                    w.set(k, p, wkp * c - wkq * sp.conj());
                    w.set(k, q, wkp * sp + wkq * c);
                }
                // Rows: (J^dag W).
                for k in 0..n {
                    let wpk = w.get(p, k);
                    let wqk = w.get(q, k);
                    w.set(p, k, wpk * c - wqk * sp);
                    w.set(q, k, wpk * sp.conj() + wqk * c);
                }
                // Accumulate the eigenvector basis.
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * sp.conj());
                    v.set(k, q, vkp * sp + vkq * c);
                }
                // Kill rounding dust on the diagonal and the zeroed entry.
                let dpp = w.get(p, p);
                let dqq = w.get(q, q);
                w.set(p, p, Complex64::new(dpp.re, 0.0));
                w.set(q, q, Complex64::new(dqq.re, 0.0));
                w.set(p, q, ZERO);
                w.set(q, p, ZERO);
            }
        }
    }
    Err(LinalgError::EigenNotConverged)
}

/// A linear subspace of C^D held as an orthonormal frame (D x dim matrix).
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    frame: ComplexMatrix,
}

impl Subspace {
    /// Wraps a frame after verifying `F^dag F = I` within `tol.tol_orth`.
    pub fn new(frame: ComplexMatrix, tol: &Tolerances) -> Result<Self, LinalgError> {
        let gram = frame.dagger().mul(&frame);
        let dim = frame.cols();
        let deviation = gram.sub(&ComplexMatrix::identity(dim)).frobenius_norm();
        if deviation > tol.tol_orth * (dim.max(1) as f64).sqrt() {
            return Err(LinalgError::NotOrthonormal { deviation });
        }
        Ok(Subspace {
            ambient: frame.rows(),
            frame,
        })
    }

    /// For frames orthonormal by construction (eigensolver output).
    fn from_orthonormal(frame: ComplexMatrix) -> Self {
        Subspace {
            ambient: frame.rows(),
            frame,
        }
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            frame: ComplexMatrix::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace {
            ambient,
            frame: ComplexMatrix::identity(ambient),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.frame.cols()
    }

    pub fn frame(&self) -> &ComplexMatrix {
        &self.frame
    }

    /// Orthogonal projector onto the subspace, `F F^dag`.
    pub fn projector(&self) -> ComplexMatrix {
        if self.dim() == 0 {
            return ComplexMatrix::zeros(self.ambient, self.ambient);
        }
        self.frame.mul(&self.frame.dagger())
    }

    /// Frobenius distance between projectors; the canonical frame-free
    /// comparison of subspaces.
    pub fn projector_distance(&self, other: &Subspace) -> f64 {
        self.projector().sub(&other.projector()).frobenius_norm()
    }
}

/// Support of a Hermitian PSD operator: the span of eigenvectors whose
/// eigenvalue exceeds `tol_rank` times the largest eigenvalue.
pub fn support(rho: &ComplexMatrix, tol: &Tolerances) -> Result<Subspace, LinalgError> {
    let eig = hermitian_eigendecomposition(rho, tol)?;
    let lam_max = eig.first().map(|(l, _)| *l).unwrap_or(0.0);
    // Floor at machine noise so that matrices which are zero up to rounding
    // dust (complements of full projectors, empty projector sums) come out
    // rank zero instead of inheriting a cutoff relative to the dust itself.
    let noise_floor = 64.0 * f64::EPSILON * rho.rows().max(1) as f64;
    if lam_max <= noise_floor {
        return Ok(Subspace::zero(rho.rows()));
    }
    let cutoff = (tol.tol_rank * lam_max).max(noise_floor);
    let kept: Vec<Vec<Complex64>> = eig
        .into_iter()
        .filter(|(l, _)| *l > cutoff)
        .map(|(_, v)| v)
        .collect();
    Ok(Subspace::from_orthonormal(ComplexMatrix::from_columns(
        rho.rows(),
        &kept,
    )))
}

/// Null space of a Hermitian PSD operator, the orthocomplement of its support.
pub fn null_space(rho: &ComplexMatrix, tol: &Tolerances) -> Result<Subspace, LinalgError> {
    let s = support(rho, tol)?;
    orthocomplement(&s, tol)
}

pub fn orthocomplement(s: &Subspace, tol: &Tolerances) -> Result<Subspace, LinalgError> {
    let d = s.ambient_dim();
    let comp = ComplexMatrix::identity(d).sub(&s.projector());
    // Eigenvalues of a projector complement cluster at 0 and 1, so the
    // relative rank cutoff separates them cleanly.
    support(&comp, tol)
}

/// Span of the union of subspaces, computed as the support of the projector
/// sum. The numerical rank at `tol_rank` decides the dimension.
pub fn span_union(subs: &[Subspace], tol: &Tolerances) -> Result<Subspace, LinalgError> {
    let first = subs.first().ok_or(LinalgError::EmptyInput)?;
    let d = first.ambient_dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    for s in subs {
        if s.ambient_dim() != d {
            return Err(LinalgError::AmbientMismatch {
                a: d,
                b: s.ambient_dim(),
            });
        }
        acc = acc.add(&s.projector());
    }
    support(&acc, tol)
}

/// Intersection via the complement identity
/// `A ∩ B = (A^perp ∪ B^perp)^perp`.
pub fn intersect(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<Subspace, LinalgError> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(LinalgError::AmbientMismatch {
            a: a.ambient_dim(),
            b: b.ambient_dim(),
        });
    }
    let union = span_union(&[orthocomplement(a, tol)?, orthocomplement(b, tol)?], tol)?;
    orthocomplement(&union, tol)
}

/// Intersection of many subspaces at once; `intersect` iterated through the
/// same complement identity.
pub fn intersect_all(subs: &[Subspace], tol: &Tolerances) -> Result<Subspace, LinalgError> {
    if subs.is_empty() {
        return Err(LinalgError::EmptyInput);
    }
    let comps: Result<Vec<_>, _> = subs.iter().map(|s| orthocomplement(s, tol)).collect();
    orthocomplement(&span_union(&comps?, tol)?, tol)
}

/// Angle `arccos |<psi|chi>|` between rays; both vectors must be unit norm
/// within `tol_orth`.
pub fn projective_distance(
    psi: &[Complex64],
    chi: &[Complex64],
    tol: &Tolerances,
) -> Result<f64, LinalgError> {
    for v in [psi, chi] {
        let n = vec_norm(v);
        if (n - 1.0).abs() > tol.tol_orth.max(1e-8) {
            return Err(LinalgError::NotUnit { norm: n });
        }
    }
    let overlap = inner(psi, chi).norm().min(1.0);
    Ok(overlap.acos())
}

/// Modified Gram-Schmidt with a re-orthogonalisation pass. Columns whose
/// residual drops below `drop_tol` are discarded as linearly dependent.
pub fn orthonormalize(cols: &[Vec<Complex64>], drop_tol: f64) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for col in cols {
        let mut v = col.clone();
        for _pass in 0..2 {
            for b in &basis {
                let c = inner(b, &v);
                for (vi, bi) in v.iter_mut().zip(b.iter()) {
                    *vi -= c * bi;
                }
            }
        }
        let n = vec_norm(&v);
        if n > drop_tol {
            basis.push(v.iter().map(|z| z / n).collect());
        }
    }
    basis
}

/// Extends an orthonormal frame to a full unitary basis of the ambient
/// space by sweeping standard basis vectors through Gram-Schmidt.
pub fn complete_to_basis(frame: &ComplexMatrix) -> ComplexMatrix {
    let d = frame.rows();
    let mut cols: Vec<Vec<Complex64>> = (0..frame.cols()).map(|c| frame.column(c)).collect();
    let seed_count = cols.len();
    for j in 0..d {
        let mut e = vec![ZERO; d];
        e[j] = ONE;
        cols.push(e);
    }
    let basis = orthonormalize(&cols, 1e-6);
    assert_eq!(basis.len(), d, "basis completion lost dimensions");
    let _ = seed_count;
    ComplexMatrix::from_columns(d, &basis)
}

/// Complex Gaussian unit vector, the rotation-invariant random direction.
pub fn random_unit_vector<R: Rng>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..dim)
            .map(|_| {
                Complex64::new(
                    gaussian(rng),
                    gaussian(rng),
                )
            })
            .collect();
        if vec_norm(&v) > 1e-6 {
            return normalize(&v);
        }
    }
}

/// Haar-like random unitary from Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> ComplexMatrix {
    loop {
        let cols: Vec<Vec<Complex64>> = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
                    .collect()
            })
            .collect();
        let basis = orthonormalize(&cols, 1e-6);
        if basis.len() == dim {
            return ComplexMatrix::from_columns(dim, &basis);
        }
    }
}

/// Box-Muller standard normal; keeps the crate off heavier samplers.
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>();
        let v: f64 = rng.gen::<f64>();
        if u > f64::MIN_POSITIVE {
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn reconstruct(eig: &[(f64, Vec<Complex64>)], n: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(n, n);
        for (l, v) in eig {
            acc = acc.add(&ComplexMatrix::outer(v).scale(c(*l, 0.0)));
        }
        acc
    }

    #[test]
    fn eigendecomposition_identity() {
        let m = ComplexMatrix::identity(3);
        let eig = hermitian_eigendecomposition(&m, &tol()).unwrap();
        assert_eq!(eig.len(), 3);
        for (l, _) in &eig {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigendecomposition_diagonal_sorted_descending() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(0.25, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.25, 0.0)],
        ]);
        let eig = hermitian_eigendecomposition(&m, &tol()).unwrap();
        let vals: Vec<f64> = eig.iter().map(|(l, _)| *l).collect();
        assert!((vals[0] - 0.5).abs() < 1e-14);
        assert!((vals[1] - 0.25).abs() < 1e-14);
        assert!((vals[2] - 0.25).abs() < 1e-14);
        // Top eigenvector is e2 up to phase.
        assert!((eig[0].1[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigendecomposition_pauli_x_mixture() {
        // (1 + sigma_x)/2 has eigenvalues 1 and 0.
        let m = ComplexMatrix::from_rows(&[
            vec![c(0.5, 0.0), c(0.5, 0.0)],
            vec![c(0.5, 0.0), c(0.5, 0.0)],
        ]);
        let eig = hermitian_eigendecomposition(&m, &tol()).unwrap();
        assert!((eig[0].0 - 1.0).abs() < 1e-14);
        assert!(eig[1].0.abs() < 1e-14);
        let v = &eig[0].1;
        assert!((v[0].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((inner(v, &eig[1].1)).norm() < 1e-12);
    }

    #[test]
    fn eigendecomposition_complex_offdiagonal() {
        // sigma_y has eigenvalues +1 and -1.
        let m = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, -1.0)],
            vec![c(0.0, 1.0), c(0.0, 0.0)],
        ]);
        let eig = hermitian_eigendecomposition(&m, &tol()).unwrap();
        assert!((eig[0].0 - 1.0).abs() < 1e-14);
        assert!((eig[1].0 + 1.0).abs() < 1e-14);
        let rec = reconstruct(&eig, 2);
        assert!(rec.sub(&m).frobenius_norm() < 1e-13);
    }

    #[test]
    fn eigendecomposition_rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        assert!(matches!(
            hermitian_eigendecomposition(&m, &tol()),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigendecomposition_rejects_non_square() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            hermitian_eigendecomposition(&m, &tol()),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn support_of_rank_two_mixture() {
        // (|e2><e2| + |e3><e3|)/2 in a 3-dimensional space.
        let mut m = ComplexMatrix::zeros(3, 3);
        m.set(1, 1, c(0.5, 0.0));
        m.set(2, 2, c(0.5, 0.0));
        let s = support(&m, &tol()).unwrap();
        assert_eq!(s.dim(), 2);
        let p = s.projector();
        assert!(p.get(0, 0).norm() < 1e-12);
        assert!((p.get(1, 1).re - 1.0).abs() < 1e-12);
        assert!((p.get(2, 2).re - 1.0).abs() < 1e-12);

        let n = null_space(&m, &tol()).unwrap();
        assert_eq!(n.dim(), 1);
        assert!((n.projector().get(0, 0).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_ignores_eigenvalue_dust() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m.set(0, 0, c(1.0, 0.0));
        m.set(1, 1, c(1e-14, 0.0));
        assert_eq!(support(&m, &tol()).unwrap().dim(), 1);
        // A relative cutoff keeps genuinely small but proportionate weights.
        let mut m2 = ComplexMatrix::zeros(2, 2);
        m2.set(0, 0, c(1e-8, 0.0));
        m2.set(1, 1, c(1e-9, 0.0));
        assert_eq!(support(&m2, &tol()).unwrap().dim(), 2);
    }

    #[test]
    fn span_union_and_intersect_standard_planes() {
        let e = |j: usize| {
            let mut v = vec![c(0.0, 0.0); 3];
            v[j] = ONE;
            v
        };
        let t = tol();
        let s12 = Subspace::new(ComplexMatrix::from_columns(3, &[e(0), e(1)]), &t).unwrap();
        let s23 = Subspace::new(ComplexMatrix::from_columns(3, &[e(1), e(2)]), &t).unwrap();
        let union = span_union(&[s12.clone(), s23.clone()], &t).unwrap();
        assert_eq!(union.dim(), 3);
        let meet = intersect(&s12, &s23, &t).unwrap();
        assert_eq!(meet.dim(), 1);
        assert!((meet.projector().get(1, 1).re - 1.0).abs() < 1e-10);
        // Commutativity at the projector level.
        let meet_rev = intersect(&s23, &s12, &t).unwrap();
        assert!(meet.projector_distance(&meet_rev) < 1e-8);
    }

    #[test]
    fn intersect_of_generic_planes_is_a_line() {
        let t = tol();
        let a = Subspace::new(
            ComplexMatrix::from_columns(
                3,
                &[
                    normalize(&[ONE, ONE, ZERO]),
                    vec![ZERO, ZERO, ONE],
                ],
            ),
            &t,
        )
        .unwrap();
        let b = Subspace::new(
            ComplexMatrix::from_columns(
                3,
                &[
                    normalize(&[ONE, -ONE, ZERO]),
                    vec![ZERO, ZERO, ONE],
                ],
            ),
            &t,
        )
        .unwrap();
        let meet = intersect(&a, &b, &t).unwrap();
        assert_eq!(meet.dim(), 1);
        assert!((meet.projector().get(2, 2).re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn projective_distance_basics() {
        let t = tol();
        let e1 = vec![ONE, ZERO];
        let e2 = vec![ZERO, ONE];
        let plus = normalize(&[ONE, ONE]);
        assert!(projective_distance(&e1, &e1, &t).unwrap() < 1e-12);
        assert!(
            (projective_distance(&e1, &e2, &t).unwrap() - std::f64::consts::FRAC_PI_2).abs()
                < 1e-12
        );
        assert!(
            (projective_distance(&e1, &plus, &t).unwrap() - std::f64::consts::FRAC_PI_4).abs()
                < 1e-12
        );
        // Global phase is invisible.
        let phased: Vec<Complex64> = e1.iter().map(|z| z * Complex64::from_polar(1.0, 1.3)).collect();
        assert!(projective_distance(&e1, &phased, &t).unwrap() < 1e-12);
        assert!(matches!(
            projective_distance(&[ONE, ONE], &e1, &t),
            Err(LinalgError::NotUnit { .. })
        ));
    }

    #[test]
    fn complete_to_basis_is_unitary_and_extends_frame() {
        let t = tol();
        let f = ComplexMatrix::from_columns(3, &[normalize(&[ONE, c(0.0, 1.0), ZERO])]);
        let sub = Subspace::new(f.clone(), &t).unwrap();
        let u = complete_to_basis(sub.frame());
        let gram = u.dagger().mul(&u);
        assert!(gram.sub(&ComplexMatrix::identity(3)).frobenius_norm() < 1e-12);
        // First column still spans the original line.
        let overlap = inner(&u.column(0), &f.column(0)).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 2..=5 {
            let u = random_unitary(dim, &mut rng);
            let gram = u.dagger().mul(&u);
            assert!(gram.sub(&ComplexMatrix::identity(dim)).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn tolerances_validate_range() {
        assert!(Tolerances::default().validate().is_ok());
        assert!(Tolerances::uniform(0.5).validate().is_err());
        assert!(Tolerances::uniform(0.0).validate().is_err());
        assert!(Tolerances::uniform(-1e-10).validate().is_err());
    }

    /// Random Hermitian PSD matrix with entries generated from a seed.
    fn random_psd(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for _ in 0..rank {
            let v = random_unit_vector(dim, rng);
            let w: f64 = rng.gen_range(0.1..1.0);
            acc = acc.add(&ComplexMatrix::outer(&v).scale(c(w, 0.0)));
        }
        acc
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eigendecomposition_reconstructs(seed in 0u64..1000, dim in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_psd(dim, dim, &mut rng);
            let eig = hermitian_eigendecomposition(&m, &tol()).unwrap();
            let rec = reconstruct(&eig, dim);
            prop_assert!(rec.sub(&m).frobenius_norm() <= 1e-8 * m.frobenius_norm().max(1.0));
            // Orthonormal eigenvectors.
            for i in 0..dim {
                for j in 0..dim {
                    let g = inner(&eig[i].1, &eig[j].1);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g.norm() - expect).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn support_and_null_partition_ambient(seed in 0u64..1000, dim in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rank = rng.gen_range(1..=dim);
            let m = random_psd(dim, rank, &mut rng);
            let t = tol();
            let s = support(&m, &t).unwrap();
            let n = null_space(&m, &t).unwrap();
            prop_assert_eq!(s.dim() + n.dim(), dim);
            let both = span_union(&[s, n], &t).unwrap();
            prop_assert_eq!(both.dim(), dim);
        }

        #[test]
        fn span_union_monotone_and_intersect_commutes(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = tol();
            let dim = 4usize;
            let a = support(&random_psd(dim, rng.gen_range(1..dim), &mut rng), &t).unwrap();
            let b = support(&random_psd(dim, rng.gen_range(1..dim), &mut rng), &t).unwrap();
            let u = span_union(&[a.clone(), b.clone()], &t).unwrap();
            prop_assert!(u.dim() >= a.dim().max(b.dim()));
            prop_assert!(u.dim() <= (a.dim() + b.dim()).min(dim));
            let ab = intersect(&a, &b, &t).unwrap();
            let ba = intersect(&b, &a, &t).unwrap();
            prop_assert!(ab.projector_distance(&ba) <= 1e-8);
            // Dimension formula dim(A) + dim(B) = dim(A v B) + dim(A ^ B)
            // holds for generic subspaces produced this way.
            prop_assert_eq!(a.dim() + b.dim(), u.dim() + ab.dim());
        }

        #[test]
        fn projective_distance_triangle(seed in 0u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = tol();
            let dim = rng.gen_range(2..5);
            let x = random_unit_vector(dim, &mut rng);
            let y = random_unit_vector(dim, &mut rng);
            let z = random_unit_vector(dim, &mut rng);
            let dxy = projective_distance(&x, &y, &t).unwrap();
            let dyz = projective_distance(&y, &z, &t).unwrap();
            let dxz = projective_distance(&x, &z, &t).unwrap();
            prop_assert!(dxz <= dxy + dyz + 1e-9);
        }
    }
}
