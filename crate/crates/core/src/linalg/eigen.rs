//! Eigenvalues of general square matrices: Householder reduction to upper
//! Hessenberg form, then single-shift complex QR with Wilkinson shifts.

use num_complex::Complex64;

use super::{CMatrix, Matrix, Scalar};
use crate::error::{dim_err, Error, Result};

const ITERATIONS_PER_EIGENVALUE: usize = 100;

/// All eigenvalues of `a` (with multiplicity). Order is unspecified.
pub fn eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return dim_err(format!("eigenvalues need a square matrix, got {}x{}", a.rows(), a.cols()));
    }
    let full = CMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)].to_complex());
    let (mut h, mut isolated) = isolate(full);
    hessenberg(&mut h);
    isolated.extend(hessenberg_qr(h)?);
    Ok(isolated)
}

/// Splits off eigenvalues whose row or column is zero off the diagonal, as
/// in LAPACK balancing. Such eigenvalues are exact, which matters for
/// defective clusters (e.g. the nilpotent tail of a companion matrix) that
/// QR would only resolve to about √eps.
fn isolate(mut a: CMatrix) -> (CMatrix, Vec<Complex64>) {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::new();
    loop {
        let n = a.rows();
        let hit = (0..n).find(|&j| {
            (0..n).all(|i| i == j || a[(i, j)] == zero) || (0..n).all(|k| k == j || a[(j, k)] == zero)
        });
        let Some(j) = hit else { break };
        out.push(a[(j, j)]);
        let keep: Vec<usize> = (0..n).filter(|&k| k != j).collect();
        a = CMatrix::from_fn(n - 1, n - 1, |r, c| a[(keep[r], keep[c])]);
    }
    (a, out)
}

fn hessenberg(h: &mut CMatrix) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        // v = x + e^{iθ}‖x‖e₁, reflector H = I − 2vvᴴ/(vᴴv)
        let mut v = x;
        v[0] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // left: rows k+1.., all columns
        for j in 0..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * h[(k + 1 + t, j)])
                .sum();
            let f = dot * beta;
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vi * f;
            }
        }
        // right: all rows, columns k+1..
        for i in 0..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| h[(i, k + 1 + t)] * vi)
                .sum();
            let f = dot * beta;
            for (t, vi) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= f * vi.conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

fn hessenberg_qr(mut h: CMatrix) -> Result<Vec<Complex64>> {
    let n = h.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let cap = ITERATIONS_PER_EIGENVALUE * n;
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let mut hi = n - 1;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let eps = f64::EPSILON;
    let norm = h.max_abs().max(f64::MIN_POSITIVE);

    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let s = if s == 0.0 { norm } else { s };
            if h[(lo, lo - 1)].norm() <= eps * s {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        if total >= cap {
            return Err(Error::NoConvergence(total));
        }
        total += 1;
        since_deflation += 1;

        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break symmetric stagnation cycles
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        qr_step(&mut h, lo, hi, shift);
    }
    Ok(eig)
}

/// Eigenvalue of the trailing 2×2 block closest to its bottom-right entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_diff = (a - d) * 0.5;
    let disc = (half_diff * half_diff + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let r1 = mid + disc;
    let r2 = mid - disc;
    if (r1 - d).norm() <= (r2 - d).norm() {
        r1
    } else {
        r2
    }
}

/// One implicit-equivalent QR sweep `H − σI = QR, H ← RQ + σI` on the active
/// window `lo..=hi`, using Givens rotations.
fn qr_step(h: &mut CMatrix, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let a = h[(k, k)];
        let b = h[(k + 1, k)];
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (a / r, b / r)
        };
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = c.conj() * x + s.conj() * y;
            h[(k + 1, j)] = -s * x + c * y;
        }
        rotations.push((c, s));
    }
    for (offset, &(c, s)) in rotations.iter().enumerate() {
        let k = lo + offset;
        for i in lo..=(k + 1).min(hi) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s;
            h[(i, k + 1)] = -x * s.conj() + y * c.conj();
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}
