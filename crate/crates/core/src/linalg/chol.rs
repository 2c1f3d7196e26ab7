use super::{Matrix, RMatrix, Scalar};

/// True iff a Cholesky factorization of `a − margin·I` succeeds.
///
/// Non-Hermitian or non-square input yields `false`.
pub fn is_positive_definite<T: Scalar>(a: &Matrix<T>, margin: f64) -> bool {
    if !a.is_square() || !a.is_hermitian() {
        return false;
    }
    let n = a.rows();
    let mut l = Matrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].to_complex().re - margin;
        for k in 0..j {
            d -= l[(j, k)].modulus().powi(2);
        }
        if !(d > 0.0) {
            return false;
        }
        let djj = d.sqrt();
        l[(j, j)] = T::from_f64(djj);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / T::from_f64(djj);
        }
    }
    true
}

/// Lower-triangular `L` with `a = L Lᵀ`, or `None` when `a` is not
/// numerically positive definite. Only the lower triangle of `a` is read.
pub fn cholesky(a: &RMatrix) -> Option<RMatrix> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows();
    let mut l = RMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMatrix;

    #[test]
    fn examples() {
        assert!(is_positive_definite(&RMatrix::identity(2), 0.5));
        assert!(!is_positive_definite(&RMatrix::diag(&[1.0, -1e-3]), 0.0));
        let q = RMatrix::from_rows(&[vec![2.95, 0.42], vec![0.42, 3.18]]).unwrap();
        assert!(is_positive_definite(&q, 1e-6));
        assert!(!is_positive_definite(&q, 3.0));
    }

    #[test]
    fn cholesky_reconstructs() {
        let q = RMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&q).unwrap();
        assert!((&(&l * &l.transpose()) - &q).max_abs() < 1e-14);
        assert_eq!(l[(0, 1)], 0.0);
        assert!(cholesky(&RMatrix::diag(&[1.0, 0.0])).is_none());
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = RMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(!is_positive_definite(&a, 0.0));
    }
}
