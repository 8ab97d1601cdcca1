//! Small dense linear-algebra helpers shared by PCA, imputation and fitting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Eigenvector `k` is column `k` of the returned matrix.
pub fn symmetric_eigen_desc(mat: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = mat.nrows();
    let eig = SymmetricEigen::new(mat.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // fix the sign so that the largest-magnitude component is positive
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv + 1e-12 {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Column means of a row-major `rows x cols` buffer.
pub fn column_means(values: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut means = vec![0.0; cols];
    for r in 0..rows {
        for (m, v) in means.iter_mut().zip(&values[r * cols..(r + 1) * cols]) {
            *m += v;
        }
    }
    if rows > 0 {
        for m in &mut means {
            *m /= rows as f64;
        }
    }
    means
}

/// Scatter matrix `sum_i (x_i - mean)(x_i - mean)^T` of a row-major buffer.
pub fn scatter_matrix(values: &[f64], rows: usize, cols: usize, mean: &[f64]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(cols, cols);
    let mut centered = vec![0.0; cols];
    for r in 0..rows {
        let row = &values[r * cols..(r + 1) * cols];
        for j in 0..cols {
            centered[j] = row[j] - mean[j];
        }
        for a in 0..cols {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..cols {
                s[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..cols {
        for b in 0..a {
            s[(a, b)] = s[(b, a)];
        }
    }
    s
}

/// Least-squares solution of `a x = b` through the SVD pseudo-inverse, so
/// that rank-deficient systems return the minimum-norm solution.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = max_sv * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().cloned().filter(|x| x.is_finite()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile(&v, 0.5)
}
