//! Phase-I feasibility by path-following on the log-det barrier.
//!
//! Decision vector: upper-triangle entries of `Q` and `Ỹ`, then the epigraph
//! variable `t`. The barrier matrix is
//! `S = diag(tI − L(Q,Ỹ), tI + Q, tI + Ỹ, RI − Q, RI − Ỹ)` and each
//! centering step minimizes `s·t − log det S` by damped Newton.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetric_eigenvalues, Lu, RMatrix};

use super::{add_gamma_block, check_gamma_sq, linear_part, LmiProblem};

const MAX_NEWTON: usize = 500;
const ARMIJO_SLOPE: f64 = 0.25;
const BACKTRACK: f64 = 0.5;
const CENTERING_TOL: f64 = 1e-9;
const BARRIER_GROWTH: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub newton_steps: usize,
    pub outer_rounds: usize,
    /// Largest eigenvalue of `diag(L, −Q, −Ỹ)` at the last iterate.
    pub best_max_eig: f64,
}

struct Barrier {
    s0: RMatrix,
    dirs: Vec<RMatrix>,
}

impl Barrier {
    fn eval(&self, z: &[f64]) -> RMatrix {
        let mut s = self.s0.clone();
        for (zi, d) in z.iter().zip(&self.dirs) {
            if *zi != 0.0 {
                for (a, b) in s.data_mut().iter_mut().zip(d.data()) {
                    *a += zi * b;
                }
            }
        }
        s
    }
}

fn sym_unit(n: usize, a: usize, b: usize) -> RMatrix {
    let mut e = RMatrix::zeros(n, n);
    e[(a, b)] = 1.0;
    e[(b, a)] = 1.0;
    e
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect()
}

fn unpack(n: usize, z: &[f64]) -> (RMatrix, RMatrix) {
    let pairs = upper_pairs(n);
    let mut q = RMatrix::zeros(n, n);
    let mut y = RMatrix::zeros(n, n);
    for (k, &(a, b)) in pairs.iter().enumerate() {
        q[(a, b)] = z[k];
        q[(b, a)] = z[k];
        y[(a, b)] = z[pairs.len() + k];
        y[(b, a)] = z[pairs.len() + k];
    }
    (q, y)
}

fn pack(n: usize, q: &RMatrix, y: &RMatrix, t: f64) -> Vec<f64> {
    let pairs = upper_pairs(n);
    let mut z: Vec<f64> = pairs.iter().map(|&(a, b)| q[(a, b)]).collect();
    z.extend(pairs.iter().map(|&(a, b)| y[(a, b)]));
    z.push(t);
    z
}

/// `diag(L(Q,Ỹ,γ²), −Q, −Ỹ)`.
fn constraint_matrix(prob: &LmiProblem, q: &RMatrix, y: &RMatrix, gamma_sq: f64) -> RMatrix {
    let (n, p) = (prob.n(), prob.p());
    let l = 3 * n + p;
    let mut g = RMatrix::zeros(l + 2 * n, l + 2 * n);
    let mut lin = linear_part(prob, q, y);
    add_gamma_block(&mut lin, n, p, gamma_sq);
    g.set_block(0, 0, &lin.hermitian_part());
    g.set_block(l, l, &(-q));
    g.set_block(l + n, l + n, &(-y));
    g
}

fn max_eig(m: &RMatrix) -> Result<f64> {
    Ok(*symmetric_eigenvalues(m)?.last().expect("nonempty"))
}

fn build_barrier(prob: &LmiProblem, gamma_sq: f64) -> Barrier {
    let (n, p) = (prob.n(), prob.p());
    let l = 3 * n + p;
    let g_size = l + 2 * n;
    let size = g_size + 2 * n;
    let r = prob.box_bound;

    let zero = RMatrix::zeros(n, n);
    let g0 = constraint_matrix(prob, &zero, &zero, gamma_sq);
    let mut s0 = RMatrix::zeros(size, size);
    s0.set_block(0, 0, &(-&g0));
    s0.set_block(g_size, g_size, &RMatrix::identity(n).scale(r));
    s0.set_block(g_size + n, g_size + n, &RMatrix::identity(n).scale(r));

    let lin0 = linear_part(prob, &zero, &zero);
    let mut dirs = Vec::new();
    for which in 0..2 {
        for (a, b) in upper_pairs(n) {
            let e = sym_unit(n, a, b);
            let (dq, dy) = if which == 0 { (&e, &zero) } else { (&zero, &e) };
            let mut gi = RMatrix::zeros(g_size, g_size);
            gi.set_block(0, 0, &(&linear_part(prob, dq, dy) - &lin0));
            gi.set_block(l, l, &(-dq));
            gi.set_block(l + n, l + n, &(-dy));
            let mut si = RMatrix::zeros(size, size);
            si.set_block(0, 0, &(-&gi));
            si.set_block(g_size, g_size, &(-dq));
            si.set_block(g_size + n, g_size + n, &(-dy));
            dirs.push(si);
        }
    }
    let mut st = RMatrix::zeros(size, size);
    st.set_block(0, 0, &RMatrix::identity(g_size));
    dirs.push(st);
    Barrier { s0, dirs }
}

fn log_det(s: &RMatrix) -> Option<f64> {
    let l = cholesky(s)?;
    Some((0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Looks for `(Q, Ỹ)` with the linear form `≼ −εI` and `Q, Ỹ ≽ εI` inside
/// the box `Q, Ỹ ≼ R·I`. `Ok(None)` means the barrier's duality bound
/// excludes margin `ε` (or the iteration cap was hit).
pub fn solve_feasibility(prob: &LmiProblem, gamma_sq: f64) -> Result<Option<(RMatrix, RMatrix)>> {
    Ok(solve_with_stats(prob, gamma_sq)?.0)
}

pub(crate) fn solve_with_stats(
    prob: &LmiProblem,
    gamma_sq: f64,
) -> Result<(Option<(RMatrix, RMatrix)>, SolverStats)> {
    check_gamma_sq(gamma_sq)?;
    let n = prob.n();
    let eps = prob.epsilon_margin;
    if !(prob.box_bound > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "box bound must exceed 1, got {}",
            prob.box_bound
        )));
    }
    let barrier = build_barrier(prob, gamma_sq);
    let m = barrier.s0.rows() as f64;
    let dim = barrier.dirs.len();
    let mut stats = SolverStats::default();

    let q0 = RMatrix::identity(n);
    let y0 = RMatrix::identity(n).scale(0.5);
    let lam0 = max_eig(&constraint_matrix(prob, &q0, &y0, gamma_sq))?;
    stats.best_max_eig = lam0;
    if lam0 <= -eps {
        return Ok((Some((q0, y0)), stats));
    }
    let mut z = pack(n, &q0, &y0, lam0.max(0.0) + 1.0);
    let mut s_weight = 1.0;

    let objective = |z: &[f64], s_weight: f64| -> Option<f64> {
        let ld = log_det(&barrier.eval(z))?;
        Some(s_weight * z[dim - 1] - ld)
    };

    loop {
        stats.outer_rounds += 1;
        // centering
        loop {
            if stats.newton_steps >= MAX_NEWTON {
                return Ok((None, stats));
            }
            stats.newton_steps += 1;
            let s = barrier.eval(&z);
            let w = Lu::factor(&s)
                .and_then(|lu| lu.inverse())
                .map_err(|_| Error::NumericalFailure("barrier matrix lost definiteness".into()))?;
            let mats: Vec<RMatrix> = barrier.dirs.iter().map(|d| &w * d).collect();
            let mut grad: Vec<f64> = mats.iter().map(|mi| -mi.trace()).collect();
            grad[dim - 1] += s_weight;
            let mut h = RMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in i..dim {
                    let mi = &mats[i];
                    let mj = &mats[j];
                    let sz = mi.rows();
                    let mut acc = 0.0;
                    for a in 0..sz {
                        for b in 0..sz {
                            acc += mi[(a, b)] * mj[(b, a)];
                        }
                    }
                    h[(i, j)] = acc;
                    h[(j, i)] = acc;
                }
            }
            let rhs = RMatrix::column(&grad.iter().map(|g| -g).collect::<Vec<_>>());
            let step = Lu::factor(&h)
                .and_then(|lu| lu.solve(&rhs))
                .map_err(|_| Error::NumericalFailure("singular barrier Hessian".into()))?;
            let dz: Vec<f64> = step.data().to_vec();
            let slope: f64 = grad.iter().zip(&dz).map(|(g, d)| g * d).sum();
            let decrement_sq = -slope;
            if decrement_sq / 2.0 <= CENTERING_TOL {
                break;
            }
            let f0 = objective(&z, s_weight).expect("current iterate is interior");
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha > 1e-14 {
                let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + alpha * b).collect();
                if let Some(f) = objective(&trial, s_weight) {
                    if f <= f0 + ARMIJO_SLOPE * alpha * slope {
                        accepted = Some(trial);
                        break;
                    }
                }
                alpha *= BACKTRACK;
            }
            let Some(next) = accepted else { break };
            z = next;

            let (q, y) = unpack(n, &z);
            let lam = max_eig(&constraint_matrix(prob, &q, &y, gamma_sq))?;
            stats.best_max_eig = lam;
            if lam <= -eps {
                return Ok((Some((q, y)), stats));
            }
        }
        // at a centered point the optimal t lies within m/s of the current one
        if z[dim - 1] - m / s_weight > -eps {
            return Ok((None, stats));
        }
        s_weight *= BARRIER_GROWTH;
    }
}
