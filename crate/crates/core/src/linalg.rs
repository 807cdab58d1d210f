//! Small dense symmetric helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition of the symmetric part of `m`, eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Split of a PSD-ish symmetric matrix into its numerical null space and range.
pub struct SpectralSplit {
    pub null_basis: DMatrix<f64>,
    pub range_basis: DMatrix<f64>,
    pub range_values: DVector<f64>,
    /// Most negative eigenvalue encountered, before clipping.
    pub min_value: f64,
}

/// Eigenvalues with `|λ| <= rel_tol * scale` count as zero, where `scale` is the
/// largest absolute eigenvalue.
pub fn spectral_split(m: &DMatrix<f64>, rel_tol: f64) -> SpectralSplit {
    let n = m.nrows();
    let (values, vectors) = sym_eigen(m);
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let thr = rel_tol * scale;
    let mut null_cols = Vec::new();
    let mut range_cols = Vec::new();
    for k in 0..n {
        if values[k].abs() <= thr || scale == 0.0 {
            null_cols.push(k);
        } else {
            range_cols.push(k);
        }
    }
    let pick = |cols: &[usize]| {
        let mut b = DMatrix::zeros(n, cols.len());
        for (j, &k) in cols.iter().enumerate() {
            b.set_column(j, &vectors.column(k));
        }
        b
    };
    SpectralSplit {
        null_basis: pick(&null_cols),
        range_basis: pick(&range_cols),
        range_values: DVector::from_iterator(range_cols.len(), range_cols.iter().map(|&k| values[k])),
        min_value: values.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix.
pub fn pinv_sym(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let (values, vectors) = sym_eigen(m);
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        if values[k].abs() > rel_tol * scale && scale > 0.0 {
            let v = vectors.column(k);
            out += (v * v.transpose()) / values[k];
        }
    }
    out
}

/// Frobenius norm used as the scale for relative tolerances.
pub fn norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_ascending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 5.0]);
        let (v, _) = sym_eigen(&m);
        assert_eq!(v.as_slice(), &[-1.0, 2.0, 5.0]);
    }

    #[test]
    fn split_detects_rank() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &u * u.transpose();
        let s = spectral_split(&m, 1e-12);
        assert_eq!(s.range_basis.ncols(), 1);
        assert_eq!(s.null_basis.ncols(), 2);
        assert!((s.range_values[0] - 14.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_one() {
        let u = DVector::from_vec(vec![1.0, 1.0]);
        let m = &u * u.transpose();
        let p = pinv_sym(&m, 1e-12);
        // pinv(u u^T) = u u^T / |u|^4
        assert!((p[(0, 0)] - 0.25).abs() < 1e-14);
        assert!((&m * &p * &m - &m).norm() < 1e-12);
    }
}
