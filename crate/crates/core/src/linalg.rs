//! Small dense linear algebra on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Singular values in descending order; length `min(rows, cols)`.
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<T> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// The `k`-th largest singular value (1-based), zero when `k > min(rows, cols)`.
pub fn sigma<T: Real>(svals: &[T], k: usize) -> T {
    assert!(k >= 1);
    svals.get(k - 1).copied().unwrap_or_else(T::zero)
}

/// Largest singular value (spectral norm).
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    singular_values(m).first().copied().unwrap_or_else(T::zero)
}

/// Result of a minimal-norm least-squares solve.
#[derive(Debug, Clone)]
pub struct MinNormSolution<T: Real> {
    pub x: DVector<T>,
    /// Numerical rank used by the pseudo-inverse.
    pub rank: usize,
    pub sigma_max: T,
    /// Smallest singular value kept in the pseudo-inverse.
    pub sigma_min_kept: T,
    /// `‖A x − b‖`.
    pub residual: T,
}

/// Minimal-norm solution of `A x = b` through the SVD pseudo-inverse.
///
/// Singular values at or below `rel_tol · σ_max` are treated as zero.
pub fn min_norm_solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>, rel_tol: T) -> MinNormSolution<T> {
    let n = a.ncols();
    let svd = a.clone().svd(true, true);
    let sigma_max = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |m, s| if s > m { s } else { m });
    let cutoff = rel_tol * sigma_max;
    let mut rank = 0;
    let mut sigma_min_kept = sigma_max;
    for &s in svd.singular_values.iter() {
        if s > cutoff {
            rank += 1;
            if s < sigma_min_kept {
                sigma_min_kept = s;
            }
        }
    }
    let x = if sigma_max > T::zero() {
        svd.solve(b, cutoff).unwrap_or_else(|_| DVector::zeros(n))
    } else {
        DVector::zeros(n)
    };
    let residual = (a * &x - b).norm();
    MinNormSolution {
        x,
        rank,
        sigma_max,
        sigma_min_kept,
        residual,
    }
}

/// Orthonormal basis (as matrix columns) of the orthogonal complement of
/// `span(vectors)` in `R^n`.
///
/// Built by modified Gram–Schmidt with one re-orthogonalization pass,
/// completing with standard basis vectors in index order, so the result is
/// deterministic. Vectors whose residual falls below `1e-12` of their norm are
/// treated as dependent.
pub fn orthonormal_complement<T: Real>(vectors: &[DVector<T>], n: usize) -> DMatrix<T> {
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(n);
    let dep = T::c(1e-12);
    let push = |v: &DVector<T>, basis: &mut Vec<DVector<T>>| -> bool {
        let scale = v.norm();
        if scale == T::zero() {
            return false;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in basis.iter() {
                let c = q.dot(&r);
                r.axpy(-c, q, T::one());
            }
        }
        let rn = r.norm();
        if rn <= dep * scale {
            return false;
        }
        basis.push(r / rn);
        true
    };
    for v in vectors {
        push(v, &mut basis);
    }
    let k = basis.len();
    let mut complement = Vec::with_capacity(n - k);
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[i] = T::one();
        if push(&e, &mut basis) {
            complement.push(basis.last().unwrap().clone());
        }
    }
    if complement.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&complement)
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        values.iter().fold(T::zero(), |acc, &v| acc + v)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Cosine of the angle between two nonzero vectors; `None` if either is zero.
pub fn cos_angle<T: Real>(u: &DVector<T>, v: &DVector<T>) -> Option<T> {
    let nu = u.norm();
    let nv = v.norm();
    if nu == T::zero() || nv == T::zero() {
        return None;
    }
    let c = u.dot(v) / (nu * nv);
    Some(c.clamp(-T::one(), T::one()))
}

/// Angle in radians between two nonzero vectors.
pub fn angle<T: Real>(u: &DVector<T>, v: &DVector<T>) -> Option<T> {
    cos_angle(u, v).map(|c| c.acos())
}

/// Rows of a matrix as nested `Vec`s of `f64`.
pub fn matrix_rows_f64<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_f64_lossy()).collect())
        .collect()
}

pub fn vec_f64<T: Real>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

pub fn from_f64_slice<T: Real>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| T::c(x)))
}
