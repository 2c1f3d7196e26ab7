use super::{Matrix, Scalar};
use crate::error::{dim_err, Error, Result};

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_TOL: f64 = 1e-13;

/// LU factorization with partial pivoting, `P·A = L·U`, packed in one matrix.
#[derive(Clone, Debug)]
pub struct Lu<T: Scalar> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: f64,
    smallest_pivot: f64,
}

impl<T: Scalar> Lu<T> {
    /// Factors `a` without any singularity check. Zero pivots are kept and
    /// leave the corresponding column of `L` untouched.
    pub fn factor_unchecked(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return dim_err(format!("LU needs a square matrix, got {}x{}", a.rows(), a.cols()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut smallest_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].modulus()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            smallest_pivot = smallest_pivot.min(pmag);
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            if pmag == 0.0 {
                continue;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            smallest_pivot,
        })
    }

    /// Factors `a`, failing with [`Error::SingularMatrix`] when a pivot falls
    /// below `1e-13·‖a‖_F`.
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let f = Self::factor_unchecked(a)?;
        let threshold = PIVOT_TOL * a.frobenius_norm();
        if f.smallest_pivot <= threshold {
            return Err(Error::SingularMatrix {
                pivot: f.smallest_pivot,
                threshold,
            });
        }
        Ok(f)
    }

    pub fn determinant(&self) -> T {
        let n = self.lu.rows();
        (0..n).fold(T::from_f64(self.sign), |acc, i| acc * self.lu[(i, i)])
    }

    pub fn solve(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.lu.rows();
        if b.rows() != n {
            return dim_err(format!("right-hand side has {} rows, expected {n}", b.rows()));
        }
        let m = b.cols();
        let mut x = Matrix::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        for c in 0..m {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        self.solve(&Matrix::identity(self.lu.rows()))
    }
}

/// Solves `a·x = b` by partially pivoted LU.
pub fn lu_solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.is_square() && b.rows() != a.rows() {
        return dim_err(format!("b has {} rows, a has {}", b.rows(), a.rows()));
    }
    Lu::factor(a)?.solve(b)
}

/// Determinant by LU; exact zero for structurally singular input.
pub fn determinant<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    Ok(Lu::factor_unchecked(a)?.determinant())
}
