//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn min_eigenvalue(m: &Mat) -> f64 {
    m.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Inverse of a symmetric positive-definite matrix; fails when the smallest
/// eigenvalue drops below `1e-8`.
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    let lmin = min_eigenvalue(m);
    if !(lmin >= 1e-8) {
        return Err(Error::Singular(format!("metric min eigenvalue {lmin:e}")));
    }
    m.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular("Cholesky factorization failed".into()))
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn inverse(m: &Mat, what: &str) -> Result<Mat> {
    m.clone().try_inverse().ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn solve(m: &Mat, b: &Vector, what: &str) -> Result<Vector> {
    m.clone().lu().solve(b).ok_or_else(|| Error::Singular(what.to_string()))
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn frobenius_inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Generalized cross product of the `n-1` columns of an `n × (n-1)` matrix:
/// the vector of signed maximal minors, orthogonal to every column.
pub fn wedge(cols: &Mat) -> Vector {
    let n = cols.nrows();
    assert_eq!(cols.ncols() + 1, n, "wedge needs n-1 columns in R^n");
    let mut out = Vector::zeros(n);
    for i in 0..n {
        let minor = cols.clone().remove_row(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        out[i] = sign * minor.determinant();
    }
    out
}

/// Inner product `uᵀ g v`.
pub fn gdot(g: &Mat, u: &Vector, v: &Vector) -> f64 {
    (u.transpose() * g * v)[(0, 0)]
}

/// Gram-Schmidt in the inner product `g`.
pub fn g_orthonormalize(g: &Mat, vs: &[Vector]) -> Result<Vec<Vector>> {
    let mut out: Vec<Vector> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        for e in &out {
            w -= e * gdot(g, e, &w);
        }
        let norm = gdot(g, &w, &w).sqrt();
        if !(norm > 1e-10) {
            return Err(Error::Singular("linearly dependent frame vectors".into()));
        }
        out.push(w / norm);
    }
    Ok(out)
}
