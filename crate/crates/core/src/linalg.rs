//! Small dense linear-algebra helpers shared by the filter and LDA.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Lower-triangular `L` with `L Lᵀ = A` for a positive *semi*-definite `A`.
/// Zero pivots give zero columns, so an all-zero matrix factors to zero.
/// Returns `None` when `A` is indefinite beyond a relative tolerance.
pub fn psd_cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() {
            return None;
        }
        if d > tol {
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        } else if d >= -tol {
            // Zero pivot: the rest of the column must vanish too.
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > tol.sqrt() * scale.sqrt().max(1.0) {
                    return None;
                }
            }
        } else {
            return None;
        }
    }
    Some(l)
}

/// Square root of a PSD matrix, retrying with diagonal jitter `1e-12·2^k`,
/// `k = 0..=20`.
pub fn psd_sqrt_with_jitter(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(l) = psd_cholesky(a) {
        return Some(l);
    }
    let n = a.nrows();
    for k in 0..=20 {
        let jitter = 1e-12 * 2f64.powi(k);
        let b = a + DMatrix::<f64>::identity(n, n) * jitter;
        if let Some(l) = psd_cholesky(&b) {
            return Some(l);
        }
    }
    None
}

/// Symmetrizes and clips negative eigenvalues to zero.
pub fn clip_psd(m: &mut DMatrix<f64>) {
    symmetrize(m);
    if psd_cholesky(m).is_some() {
        return;
    }
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    *m = v * DMatrix::from_diagonal(&vals) * v.transpose();
    symmetrize(m);
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_has_zero_root() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(psd_cholesky(&z).unwrap(), z);
    }

    #[test]
    fn rank_deficient_root() {
        // v vᵀ with v = (1, 2)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let l = psd_cholesky(&a).unwrap();
        assert!((&l * l.transpose() - &a).norm() < 1e-12);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_cholesky(&a).is_none());
        assert!(psd_sqrt_with_jitter(&a).is_none());
        let mut b = a.clone();
        clip_psd(&mut b);
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn tiny_negative_recovered_by_jitter() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-9]);
        assert!(psd_sqrt_with_jitter(&a).is_some());
    }
}
