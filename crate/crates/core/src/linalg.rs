//! Small dense linear-algebra helpers shared by the channel and precoding code.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

const MAX_ITERATIONS: usize = 10_000;

/// Singular values (unsorted) and optionally `V^T`, computed on a copy
/// scaled to unit max-abs entry and with a bounded iteration count.
///
/// When the bidiagonal iteration does not converge, falls back to the
/// symmetric eigendecomposition of `M^T M`.
fn robust_svd(m: &DMatrix<f64>, want_v: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let cols = m.ncols();
    let scale = m.amax();
    if scale == 0.0 || !scale.is_finite() {
        let n = m.nrows().min(cols);
        return (DVector::zeros(n), want_v.then(|| DMatrix::identity(cols, cols).rows(0, n).into_owned()));
    }
    let scaled = m / scale;
    if let Some(svd) = SVD::try_new(scaled.clone(), false, want_v, f64::EPSILON, MAX_ITERATIONS) {
        return (svd.singular_values * scale, svd.v_t);
    }
    let (values, v_t) = gram_svd(&scaled, want_v);
    (values * scale, v_t)
}

fn gram_svd(scaled: &DMatrix<f64>, want_v: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let (rows, cols) = scaled.shape();
    let gram = scaled.transpose() * scaled;
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, MAX_ITERATIONS)
        .expect("symmetric eigendecomposition of a finite Gram matrix converges");
    let n = rows.min(cols);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]].max(0.0).sqrt());
    let v_t = want_v.then(|| DMatrix::from_fn(n, cols, |i, j| eig.eigenvectors[(j, order[i])]));
    (values, v_t)
}

/// Singular values in descending order together with a full orthonormal
/// basis of right singular vectors (columns of a `cols x cols` matrix).
///
/// Wide inputs are padded with zero rows so that the null-space directions
/// are returned as well; their singular values are reported as zero.
pub(crate) fn full_right_singular(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (singular, v_t) = robust_svd(&padded, true);
    let v_t = v_t.expect("right singular vectors were requested");
    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(cols);
    let mut basis = DMatrix::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        values.push(singular[src]);
        basis.set_column(dst, &v_t.row(src).transpose());
    }
    (values, basis)
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = robust_svd(m, false).0.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Threshold below which a singular value counts as zero.
pub(crate) fn rank_tolerance(max_singular: f64, rows: usize, cols: usize) -> f64 {
    max_singular * rows.max(cols) as f64 * f64::EPSILON
}

pub(crate) fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => {
            let tol = rank_tolerance(top, m.nrows(), m.ncols());
            s.iter().filter(|&&v| v > tol).count()
        }
        _ => 0,
    }
}

/// Rows that are (numerically) linear combinations of earlier rows, found by
/// Gram-Schmidt in row order with one reorthogonalization pass.
pub(crate) fn dependent_rows(m: &DMatrix<f64>) -> Vec<usize> {
    let scale = (0..m.nrows()).map(|i| m.row(i).norm()).fold(0.0, f64::max);
    let tol = scale * m.nrows().max(m.ncols()) as f64 * f64::EPSILON * 16.0;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for i in 0..m.nrows() {
        let mut v = m.row(i).transpose();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let n = v.norm();
        if n <= tol || n == 0.0 {
            dependent.push(i);
        } else {
            basis.push(v / n);
        }
    }
    dependent
}

pub(crate) fn rows_of(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}
