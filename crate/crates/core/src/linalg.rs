//! Small dense linear algebra helpers bridging ndarray storage to nalgebra
//! factorizations. Matrices in this crate are small (parameter blocks), so
//! conversion cost is irrelevant.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub(crate) fn to_dmatrix(m: ArrayView2<'_, f64>) -> DMatrix<f64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

pub(crate) fn to_array2(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Singular values in nonincreasing order.
pub(crate) fn singular_values(m: ArrayView2<'_, f64>) -> Vec<f64> {
    let svd = to_dmatrix(m).svd(false, false);
    svd.singular_values.iter().copied().collect()
}

/// Full thin SVD `(u, s, v_t)` with `s` nonincreasing.
pub(crate) fn svd(m: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let svd = to_dmatrix(m).svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    (to_array2(&u), svd.singular_values.iter().copied().collect(), to_array2(&v_t))
}

/// Reconstructs `u * diag(s) * v_t` for a thin SVD.
pub(crate) fn recompose(u: &Array2<f64>, s: &[f64], v_t: &Array2<f64>) -> Array2<f64> {
    let mut us = u.clone();
    for (j, &sj) in s.iter().enumerate() {
        us.column_mut(j).mapv_inplace(|x| x * sj);
    }
    us.dot(v_t)
}

/// Thin QR factor with the sign convention that makes the factor unique
/// (diagonal of R nonnegative); turns a Gaussian matrix into a Haar frame.
pub(crate) fn qr_orthonormal(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let qr = to_dmatrix(m).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    to_array2(&q)
}

/// Minimum-norm least squares solution of `a x = b` via SVD, with a relative
/// rank tolerance. Errors if `a` is column-rank deficient.
pub(crate) fn lstsq(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let (n, p) = a.dim();
    if b.len() != n {
        return Err(Error::ShapeMismatch(format!("lstsq: a is {n}x{p}, b has length {}", b.len())));
    }
    let svd = to_dmatrix(a).svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = smax * (n.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p {
        return Err(Error::RankDeficient(format!("rank {rank} < {p} columns")));
    }
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let bv = nalgebra::DVector::from_fn(n, |i, _| b[i]);
    let ub = u.transpose() * bv;
    let mut scaled = ub;
    for i in 0..svd.singular_values.len() {
        scaled[i] /= svd.singular_values[i];
    }
    let x = v_t.transpose() * scaled;
    Ok(Array1::from_iter(x.iter().copied()))
}
