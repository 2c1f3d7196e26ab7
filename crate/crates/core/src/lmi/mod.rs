//! Lyapunov-Krasovskii matrix inequalities for the reduced delayed system
//! `x(k+1) = Ā x(k) + Ā_d x(k−τ) + D̄ δ(k)`, a small interior-point
//! feasibility engine, and certificate post-processing.

mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{is_positive_definite, min_symmetric_eigenvalue, spectral_norm, symmetric_eigenvalues, Lu, RMatrix};
use crate::smc::DeformedSystem;

pub use solver::{solve_feasibility, SolverStats};

/// Strictness margin on every matrix inequality.
pub const EPSILON_MARGIN: f64 = 1e-6;
/// Default bound `Q, Ỹ ≼ R·I` keeping the feasibility search compact.
pub const DEFAULT_BOX_BOUND: f64 = 100.0;
/// Bisection stops once the `γ²` bracket is this fraction of `γ_hi²`.
pub const GAMMA_REL_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiProblem {
    pub a_bar: RMatrix,
    pub a_dbar: RMatrix,
    pub d_bar: RMatrix,
    pub epsilon_margin: f64,
    pub box_bound: f64,
}

impl LmiProblem {
    pub fn new(a_bar: RMatrix, a_dbar: RMatrix, d_bar: RMatrix) -> Result<Self> {
        let n = a_bar.rows();
        if !a_bar.is_square() || a_dbar.shape() != (n, n) || d_bar.rows() != n {
            return dim_err("Ā, Ā_d must be n×n and D̄ must have n rows");
        }
        Ok(Self {
            a_bar,
            a_dbar,
            d_bar,
            epsilon_margin: EPSILON_MARGIN,
            box_bound: DEFAULT_BOX_BOUND,
        })
    }

    pub fn from_deformed(def: &DeformedSystem) -> Result<Self> {
        Self::new(def.a_bar.clone(), def.a_dbar.clone(), def.d_bar.clone())
    }

    pub fn n(&self) -> usize {
        self.a_bar.rows()
    }

    pub fn p(&self) -> usize {
        self.d_bar.cols()
    }

    /// Block sizes `(n, n, p, n)` of the linear form.
    pub fn block_layout(&self) -> [usize; 4] {
        [self.n(), self.n(), self.p(), self.n()]
    }

    /// `F = [Ā Ā_d D̄]`.
    pub fn f(&self) -> RMatrix {
        let (n, p) = (self.n(), self.p());
        let mut f = RMatrix::zeros(n, 2 * n + p);
        f.set_block(0, 0, &self.a_bar);
        f.set_block(0, n, &self.a_dbar);
        f.set_block(0, 2 * n, &self.d_bar);
        f
    }

    fn check_square(&self, name: &str, m: &RMatrix) -> Result<()> {
        if m.shape() != (self.n(), self.n()) {
            return dim_err(format!("{name} must be {0}x{0}", self.n()));
        }
        Ok(())
    }
}

/// Linear form without the `−γ²I` block; affine in `(Q, Ỹ)`.
pub(crate) fn linear_part(prob: &LmiProblem, q: &RMatrix, y_tilde: &RMatrix) -> RMatrix {
    let (n, p) = (prob.n(), prob.p());
    let size = 3 * n + p;
    let o4 = 2 * n + p;
    let mut m = RMatrix::zeros(size, size);
    m.set_block(0, 0, &(y_tilde - q));
    m.set_block(n, n, &(-y_tilde));
    m.set_block(o4, o4, &(-q));
    let aq = &prob.a_bar * q;
    let adq = &prob.a_dbar * q;
    m.set_block(o4, 0, &aq);
    m.set_block(0, o4, &aq.transpose());
    m.set_block(o4, n, &adq);
    m.set_block(n, o4, &adq.transpose());
    m.set_block(o4, 2 * n, &prob.d_bar);
    m.set_block(2 * n, o4, &prob.d_bar.transpose());
    m
}

fn add_gamma_block(m: &mut RMatrix, n: usize, p: usize, gamma_sq: f64) {
    for i in 0..p {
        m[(2 * n + i, 2 * n + i)] -= gamma_sq;
    }
}

fn check_gamma_sq(gamma_sq: f64) -> Result<()> {
    if !(gamma_sq > 0.0) || !gamma_sq.is_finite() {
        return Err(Error::InvalidArgument(format!("γ² must be positive, got {gamma_sq}")));
    }
    Ok(())
}

/// `[−Q+Ỹ 0 0 QĀᵀ; 0 −Ỹ 0 QĀ_dᵀ; 0 0 −γ²I D̄ᵀ; ĀQ Ā_dQ D̄ −Q]`, symmetrized.
pub fn assemble_linear_lmi(prob: &LmiProblem, q: &RMatrix, y_tilde: &RMatrix, gamma_sq: f64) -> Result<RMatrix> {
    prob.check_square("Q", q)?;
    prob.check_square("Ỹ", y_tilde)?;
    check_gamma_sq(gamma_sq)?;
    let mut m = linear_part(prob, q, y_tilde);
    add_gamma_block(&mut m, prob.n(), prob.p(), gamma_sq);
    Ok(m.hermitian_part())
}

/// `𝓜 = FᵀXF + diag(−X+Y, −Y, −γ²I)`, symmetrized.
pub fn assemble_bmi(prob: &LmiProblem, x: &RMatrix, y: &RMatrix, gamma: f64) -> Result<RMatrix> {
    prob.check_square("X", x)?;
    prob.check_square("Y", y)?;
    let (n, p) = (prob.n(), prob.p());
    let f = prob.f();
    let mut m = &(&f.transpose() * x) * &f;
    let d11 = &m.block(0, 0, n, n) + &(y - x);
    m.set_block(0, 0, &d11);
    let d22 = &m.block(n, n, n, n) - y;
    m.set_block(n, n, &d22);
    add_gamma_block(&mut m, n, p, gamma * gamma);
    Ok(m.hermitian_part())
}

/// `[−X+Y 0 0 Āᵀ; 0 −Y 0 Ā_dᵀ; 0 0 −γ²I D̄ᵀ; Ā Ā_d D̄ −X⁻¹]`, symmetrized.
pub fn assemble_schur(prob: &LmiProblem, x: &RMatrix, y: &RMatrix, gamma: f64) -> Result<RMatrix> {
    prob.check_square("X", x)?;
    prob.check_square("Y", y)?;
    let (n, p) = (prob.n(), prob.p());
    let x_inv = Lu::factor(x)?.inverse()?;
    let o4 = 2 * n + p;
    let mut m = RMatrix::zeros(3 * n + p, 3 * n + p);
    m.set_block(0, 0, &(y - x));
    m.set_block(n, n, &(-y));
    add_gamma_block(&mut m, n, p, gamma * gamma);
    m.set_block(o4, o4, &(-&x_inv));
    m.set_block(o4, 0, &prob.a_bar);
    m.set_block(0, o4, &prob.a_bar.transpose());
    m.set_block(o4, n, &prob.a_dbar);
    m.set_block(n, o4, &prob.a_dbar.transpose());
    m.set_block(o4, 2 * n, &prob.d_bar);
    m.set_block(2 * n, o4, &prob.d_bar.transpose());
    Ok(m.hermitian_part())
}

/// Congruence `Σ = diag(Q, Q, I_p, I_n)` mapping the Schur form onto the linear form.
pub fn congruence(prob: &LmiProblem, q: &RMatrix) -> RMatrix {
    let (n, p) = (prob.n(), prob.p());
    let mut s = RMatrix::identity(3 * n + p);
    s.set_block(0, 0, q);
    s.set_block(n, n, q);
    s
}

fn max_eigenvalue(m: &RMatrix) -> Result<f64> {
    Ok(*symmetric_eigenvalues(m)?.last().expect("nonempty"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub q: RMatrix,
    pub y_tilde: RMatrix,
    pub gamma: f64,
    /// `Q⁻¹`.
    pub x: RMatrix,
    /// `XỸX`.
    pub y: RMatrix,
    pub m_full: RMatrix,
    /// `λ_min(−𝓜)`.
    pub mu: f64,
    /// `λ_min(−𝓜₀)` on the state/delay principal block.
    pub mu0: f64,
    /// `γ/√μ`.
    pub effective_gain: f64,
    pub v0: f64,
    pub r: f64,
    /// Largest eigenvalue of the reassembled linear form.
    pub lmi_max_eig: f64,
}

impl StabilityCertificate {
    /// Derives every a-posteriori quantity from `(Q, Ỹ, γ)` with zero initial history.
    /// Fails with `Infeasible` when `𝓜` is not negative definite.
    pub fn from_parts(prob: &LmiProblem, q: RMatrix, y_tilde: RMatrix, gamma: f64) -> Result<Self> {
        prob.check_square("Q", &q)?;
        prob.check_square("Ỹ", &y_tilde)?;
        let n = prob.n();
        let x = Lu::factor(&q)?.inverse()?.hermitian_part();
        let y = (&(&x * &y_tilde) * &x).hermitian_part();
        let m_full = assemble_bmi(prob, &x, &y, gamma)?;
        let mu = min_symmetric_eigenvalue(&(-&m_full))?;
        if !(mu > 0.0) {
            return Err(Error::Infeasible(-mu));
        }
        let mu0 = min_symmetric_eigenvalue(&(-&m_full.block(0, 0, 2 * n, 2 * n)))?;
        let lmi_max_eig = max_eigenvalue(&assemble_linear_lmi(prob, &q, &y_tilde, gamma * gamma)?)?;
        Ok(Self {
            q,
            y_tilde,
            gamma,
            x,
            y,
            m_full,
            mu,
            mu0,
            effective_gain: gamma / mu.sqrt(),
            v0: 0.0,
            r: 0.0,
            lmi_max_eig,
        })
    }

    /// Fills `v0` and `r` from the initial history `[x(0), x(−1), …, x(−τ)]`.
    pub fn with_history(mut self, history: &[Vec<f64>], tau: usize) -> Result<Self> {
        let (v0, r) = v0_and_r(&self, history, tau)?;
        self.v0 = v0;
        self.r = r;
        Ok(self)
    }

    /// Reassembles the linear form and checks `max eig ≤ −ε/2` and `Q, Ỹ ≻ 0`.
    /// Returns the reassembled maximum eigenvalue.
    pub fn validate(&self, prob: &LmiProblem) -> Result<f64> {
        let lmi = assemble_linear_lmi(prob, &self.q, &self.y_tilde, self.gamma * self.gamma)?;
        let top = max_eigenvalue(&lmi)?;
        let half = prob.epsilon_margin / 2.0;
        if top > -half || !is_positive_definite(&self.q, half) || !is_positive_definite(&self.y_tilde, half) {
            return Err(Error::Infeasible(top));
        }
        Ok(top)
    }

    pub fn lambda_min_x(&self) -> Result<f64> {
        min_symmetric_eigenvalue(&self.x)
    }
}

/// `V₀ = x(0)ᵀXx(0) + Σ_{i=1..τ} x(−i)ᵀYx(−i)` and `r = √(V₀/λ_min(X))`.
pub fn v0_and_r(cert: &StabilityCertificate, history: &[Vec<f64>], tau: usize) -> Result<(f64, f64)> {
    if history.len() != tau + 1 {
        return Err(Error::HistoryLengthMismatch {
            expected: tau + 1,
            got: history.len(),
        });
    }
    let mut v0 = cert.x.quadratic_form(&history[0])?;
    for h in &history[1..] {
        v0 += cert.y.quadratic_form(h)?;
    }
    let r = (v0 / cert.lambda_min_x()?).sqrt();
    Ok((v0, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SufficientCheck {
    pub sigma_max_f: f64,
    pub ok: bool,
}

/// `σ_max(F)² < min(1−ε, ε, γ²)`: then `Q = I`, `Ỹ = εI` is feasible.
pub fn feasibility_sufficient(prob: &LmiProblem, epsilon: f64, gamma: f64) -> Result<SufficientCheck> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    let sigma_max_f = spectral_norm(&prob.f());
    let s2 = sigma_max_f * sigma_max_f;
    Ok(SufficientCheck {
        sigma_max_f,
        ok: s2 < (1.0 - epsilon).min(epsilon).min(gamma * gamma),
    })
}

/// Bisects `γ²` on `[0, γ_hi²]` and returns the certificate at the smallest
/// feasible value found.
pub fn minimize_gamma(prob: &LmiProblem, gamma_hi: f64) -> Result<StabilityCertificate> {
    let hi_sq = gamma_hi * gamma_hi;
    let (mut q, mut yt) = match solve_feasibility(prob, hi_sq)? {
        Some(sol) => sol,
        None => return Err(Error::Infeasible(f64::NAN)),
    };
    let (mut lo, mut hi) = (0.0, hi_sq);
    while hi - lo > GAMMA_REL_TOL * hi_sq {
        let mid = 0.5 * (lo + hi);
        match solve_feasibility(prob, mid) {
            Ok(Some((mq, my))) => {
                hi = mid;
                q = mq;
                yt = my;
            }
            Ok(None) | Err(Error::NumericalFailure(_)) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    StabilityCertificate::from_parts(prob, q, yt, hi.sqrt())
}
