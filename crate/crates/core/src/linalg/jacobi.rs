//! Jacobi-rotation routines: one-sided (Hestenes) SVD and cyclic symmetric
//! eigensolver.

use num_complex::Complex64;

use super::{Matrix, RMatrix, Scalar};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Singular values in descending order, by one-sided Jacobi rotations that
/// implicitly diagonalize `aᴴa`.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Vec<f64> {
    // work on the orientation with fewer columns
    let work = if a.cols() > a.rows() { a.adjoint() } else { a.clone() };
    let (m, n) = work.shape();
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|j| (0..m).map(|i| work[(i, j)].to_complex()).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|v| v.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|v| v.norm_sqr()).sum();
                let gamma: Complex64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (up, uq) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let x = *up;
                    let y = *uq * phase.conj();
                    *up = x * c - y * s;
                    *uq = (x * s + y * c) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Operator 2-norm `σ_max(a)`.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Eigenvalues of a Hermitian matrix in ascending order (cyclic Jacobi).
///
/// Complex input is embedded as the real symmetric `[[Re, −Im], [Im, Re]]`,
/// whose spectrum is the Hermitian spectrum with each value doubled.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<f64>> {
    if !a.is_square() || !a.is_hermitian() {
        return Err(Error::NotHermitian(a.hermitian_defect()));
    }
    let n = a.rows();
    let complex = (0..n).any(|i| (0..n).any(|j| a[(i, j)].to_complex().im != 0.0));
    if !complex {
        let s = RMatrix::from_fn(n, n, |i, j| a[(i, j)].to_complex().re);
        return Ok(jacobi_eigen(s.hermitian_part()));
    }
    let emb = RMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = a[(i % n, j % n)].to_complex();
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let all = jacobi_eigen(emb.hermitian_part());
    Ok(all.into_iter().step_by(2).collect())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_symmetric_eigenvalue<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    Ok(symmetric_eigenvalues(a)?[0])
}

fn jacobi_eigen(mut a: RMatrix) -> Vec<f64> {
    let n = a.rows();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= (f64::EPSILON * f64::EPSILON) * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    d
}
