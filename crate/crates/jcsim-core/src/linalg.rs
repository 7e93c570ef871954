//! Dense complex helpers: Gram products and sorted Hermitian eigendecompositions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenpairs of a Hermitian positive semidefinite matrix in descending order.
///
/// `vectors` holds the leading eigenvectors only; it may have fewer columns
/// than the ambient dimension when the matrix came from a thin factor.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    /// Leading values that are not structurally zero, `min(rows, snapshots)`
    /// for a sample covariance.
    pub rank_bound: usize,
}

/// Full eigendecomposition of a Hermitian matrix, sorted descending.
pub fn hermitian_eigen(m: CMatrix) -> HermitianEigen {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen {
        values,
        vectors,
        rank_bound: n,
    }
}

/// `scale * Y * Y^H`.
pub fn gram_rows(y: &CMatrix, scale: f64) -> CMatrix {
    let n = y.nrows();
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    for col in y.column_iter() {
        let s = col.as_slice();
        for b in 0..n {
            let yb = s[b].conj();
            let row = &mut acc[b * n..(b + 1) * n];
            for a in b..n {
                row[a] += s[a] * yb;
            }
        }
    }
    // acc[b * n + a] holds entry (a, b) for a >= b
    CMatrix::from_fn(n, n, |a, b| {
        if a >= b {
            acc[b * n + a] * scale
        } else {
            acc[a * n + b].conj() * scale
        }
    })
}

/// `scale * Y^H * Y`.
pub fn gram_cols(y: &CMatrix, scale: f64) -> CMatrix {
    let k = y.ncols();
    let mut g = CMatrix::zeros(k, k);
    for b in 0..k {
        let cb = y.column(b);
        for a in b..k {
            let ca = y.column(a);
            let v = ca.dotc(&cb) * scale;
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
    }
    g
}

/// Eigendecomposition of `scale * Y * Y^H` without forming it when `Y` is tall.
///
/// For a tall factor the small Gram `scale * Y^H Y` is decomposed and its
/// eigenvectors mapped through `Y`; the remaining eigenvalues are zero.
pub fn factor_eigen(y: &CMatrix, scale: f64) -> HermitianEigen {
    let (n, k) = y.shape();
    if n <= k {
        return hermitian_eigen(gram_rows(y, scale));
    }
    let small = hermitian_eigen(gram_cols(y, scale));
    let top = small.values.first().copied().unwrap_or(0.0).max(0.0);
    let keep = small
        .values
        .iter()
        .take_while(|&&v| v > top * 1e-14 && v > 0.0)
        .count();
    let mut vectors = CMatrix::zeros(n, keep);
    for i in 0..keep {
        let norm = (small.values[i] / scale).sqrt();
        let u = y * small.vectors.column(i) / Complex64::new(norm, 0.0);
        vectors.set_column(i, &u);
    }
    let mut values = small.values;
    values.resize(n, 0.0);
    HermitianEigen {
        values,
        vectors,
        rank_bound: k,
    }
}

/// Orthonormal basis of the orthogonal complement of the columns of `basis`.
pub fn orthogonal_complement(basis: &CMatrix) -> CMatrix {
    let (n, k) = basis.shape();
    let mut stacked = CMatrix::zeros(n, k + n);
    stacked.columns_mut(0, k).copy_from(basis);
    stacked
        .columns_mut(k, n)
        .copy_from(&CMatrix::identity(n, n));
    let q = stacked.qr().q();
    q.columns(k, n - k).into_owned()
}

/// `a - U (U^H a)` for an orthonormal `U`.
pub fn project_out(basis: &CMatrix, a: &[Complex64], out: &mut [Complex64]) {
    out.copy_from_slice(a);
    for col in basis.column_iter() {
        let c = col.as_slice();
        let mut coef = Complex64::new(0.0, 0.0);
        for (u, x) in c.iter().zip(a) {
            coef += u.conj() * x;
        }
        for (o, u) in out.iter_mut().zip(c) {
            *o -= u * coef;
        }
    }
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `Re(x^H y)`.
pub fn re_dot(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}
