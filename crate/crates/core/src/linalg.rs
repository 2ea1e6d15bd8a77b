//! Dense complex linear algebra helpers and the superoperator conventions.
//!
//! Density matrices are vectorized by stacking columns:
//! `vec(rho)[i + d * j] = rho[(i, j)]`, so `vec(A rho B) = (B^T kron A) vec(rho)`.
//! Choi matrices are indexed as (output, input):
//! `choi[(a * d + i, b * d + j)] = <a| V(|i><j|) |b>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::scalar::{self, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    DMatrix::identity(n, n)
}

pub fn dagger<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.adjoint()
}

/// Stacks the columns of a square matrix into a vector.
pub fn vectorize<T: Real>(rho: &CMatrix<T>) -> DVector<Complex<T>> {
    DVector::from_column_slice(rho.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize<T: Real>(v: &[Complex<T>], d: usize) -> CMatrix<T> {
    assert_eq!(v.len(), d * d, "vector length is not a square");
    DMatrix::from_column_slice(d, d, v)
}

/// Superoperator of `rho -> A rho B`.
pub fn sandwich<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    b.transpose().kronecker(a)
}

/// Superoperator of `rho -> -i [H, rho]`.
pub fn commutator_superop<T: Real>(h: &CMatrix<T>) -> CMatrix<T> {
    let d = h.nrows();
    let id = identity::<T>(d);
    let minus_i = Complex::new(T::zero(), -T::one());
    (sandwich(h, &id) - sandwich(&id, h)) * minus_i
}

/// Superoperator of `rho -> M rho M^dagger - 1/2 {M^dagger M, rho}`.
pub fn dissipator_superop<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let d = m.nrows();
    let id = identity::<T>(d);
    let md = dagger(m);
    let n = &md * m;
    let half = Complex::new(T::lit(0.5), T::zero());
    sandwich(m, &md) - (sandwich(&n, &id) + sandwich(&id, &n)) * half
}

/// Superoperator of `rho -> M rho M^dagger`.
pub fn jump_superop<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    sandwich(m, &dagger(m))
}

/// Applies a superoperator matrix to a density matrix.
pub fn apply_superop<T: Real>(superop: &CMatrix<T>, rho: &CMatrix<T>) -> CMatrix<T> {
    let d = rho.nrows();
    let out = superop * vectorize(rho);
    unvectorize(out.as_slice(), d)
}

/// Choi matrix of a superoperator acting on `d x d` matrices.
pub fn choi_matrix<T: Real>(superop: &CMatrix<T>) -> CMatrix<T> {
    let m = superop.nrows();
    let d = (m as f64).sqrt().round() as usize;
    assert_eq!(d * d, m, "superoperator size is not a square");
    DMatrix::from_fn(m, m, |r, c| {
        let (a, i) = (r / d, r % d);
        let (b, j) = (c / d, c % d);
        superop[(a + d * b, i + d * j)]
    })
}

pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * Complex::new(T::lit(0.5), T::zero())
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let h = hermitian_part(m);
    let mut eig: Vec<T> = h.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
    eig
}

/// Minimum eigenvalue and spectral norm of the Hermitian part of `m`.
pub fn min_eigen_and_norm<T: Real>(m: &CMatrix<T>) -> (T, T) {
    let eig = hermitian_eigenvalues(m);
    let norm = eig.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    (eig[0], norm)
}

/// `true` when the minimum eigenvalue clears the relative PSD slack.
pub fn passes_psd<T: Real>(min_eig: T, norm: T, psd_rel: T) -> bool {
    min_eig >= -psd_rel * norm
}

/// Largest entry magnitude.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(scalar::cabs(*z)))
}

/// Infinity norm: largest absolute row sum.
pub fn inf_norm<T: Real>(m: &CMatrix<T>) -> T {
    (0..m.nrows()).fold(T::zero(), |acc, r| {
        let row = m.row(r).iter().fold(T::zero(), |s, z| s + scalar::cabs(*z));
        acc.max(row)
    })
}

/// Basis projector `|i><j|` in dimension `d`.
pub fn unit<T: Real>(d: usize, i: usize, j: usize) -> CMatrix<T> {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = Complex::new(T::one(), T::zero());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn sample_rho() -> CMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)])
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), c(0.0, 2.0), c(-1.0, 0.0), c(0.3, 0.3)]);
        let b = DMatrix::from_row_slice(2, 2, &[c(0.2, 0.0), c(1.0, -1.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let rho = sample_rho();
        let direct = &a * &rho * &b;
        let via = apply_superop(&sandwich(&a, &b), &rho);
        assert_abs_diff_eq!((direct - via).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dissipator_on_excited_state() {
        // sigma_minus = |1><0| with index 0 excited.
        let m = unit::<f64>(2, 1, 0);
        let out = apply_superop(&dissipator_superop(&m), &unit(2, 0, 0));
        let expected = unit::<f64>(2, 1, 1) - unit::<f64>(2, 0, 0);
        assert_abs_diff_eq!((out - expected).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_choi_is_rank_one() {
        let choi = choi_matrix(&identity::<f64>(4));
        let eig = hermitian_eigenvalues(&choi);
        assert_abs_diff_eq!(eig[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig[3], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(choi.trace().re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn vectorize_is_column_stacking() {
        let rho = sample_rho();
        let v = vectorize(&rho);
        assert_eq!(v[1], rho[(1, 0)]);
        assert_eq!(v[2], rho[(0, 1)]);
        assert_eq!(unvectorize(v.as_slice(), 2), rho);
    }
}
