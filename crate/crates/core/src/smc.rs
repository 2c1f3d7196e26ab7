//! Rota-Baxter deformation of the delayed plant, the equivalent-control
//! projection and the sequential reaching-phase design.
//!
//! All norms in this module are spectral.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{spectral_norm, Lu, RMatrix};
use crate::lmi::StabilityCertificate;
use crate::rota_baxter::{OperatorKind, RotaBaxterOperator};

/// `x(k+1) = A x(k) + A_d x(k−τ) + B u(k) + D δ(k)`, `s(k) = C x(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedSystem {
    pub a: RMatrix,
    pub a_d: RMatrix,
    pub b: RMatrix,
    pub c: RMatrix,
    pub d: RMatrix,
    pub tau: usize,
    pub delta_max: f64,
}

impl DelayedSystem {
    pub fn new(
        a: RMatrix,
        a_d: RMatrix,
        b: RMatrix,
        c: RMatrix,
        d: RMatrix,
        tau: usize,
        delta_max: f64,
    ) -> Result<Self> {
        let sys = Self {
            a,
            a_d,
            b,
            c,
            d,
            tau,
            delta_max,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !self.a.is_square() {
            return dim_err("A must be square");
        }
        if self.a_d.shape() != (n, n) {
            return dim_err(format!("A_d must be {n}x{n}"));
        }
        if self.b.rows() != n {
            return dim_err(format!("B must have {n} rows"));
        }
        if self.c.shape() != (self.m(), n) {
            return dim_err(format!("C must be {}x{n}", self.m()));
        }
        if self.d.rows() != n {
            return dim_err(format!("D must have {n} rows"));
        }
        if self.tau < 1 {
            return Err(Error::InvalidArgument("delay τ must be at least 1".into()));
        }
        if !(self.delta_max >= 0.0) || !self.delta_max.is_finite() {
            return Err(Error::InvalidArgument("δ_max must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Input / sliding-variable dimension.
    pub fn m(&self) -> usize {
        self.b.cols()
    }

    /// Disturbance dimension.
    pub fn p(&self) -> usize {
        self.d.cols()
    }
}

/// Deformed plant and its equivalent-control reduction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeformedSystem {
    pub a_p: RMatrix,
    pub a_dp: RMatrix,
    pub b_p: RMatrix,
    pub cb_p: RMatrix,
    /// `Π = I − B_P (C B_P)⁻¹ C`.
    pub pi: RMatrix,
    pub a_bar: RMatrix,
    pub a_dbar: RMatrix,
    pub d_bar: RMatrix,
}

impl DeformedSystem {
    /// Full actuation collapses the projection to zero and the reduced dynamics to `x(k+1) = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.pi.frobenius_norm() <= 1e-12
    }
}

/// Applies `P` to the plant and builds `Π`, `Ā = ΠA_P`, `Ā_d = ΠA_{d,P}`, `D̄ = ΠD`.
///
/// A rectangular `B` (m < n) can only be deformed by scalar scaling, which acts
/// entrywise.
pub fn deform(sys: &DelayedSystem, p: &RotaBaxterOperator) -> Result<DeformedSystem> {
    sys.validate()?;
    let n = sys.n();
    if let Some(pn) = p.dimension() {
        if pn != n {
            return dim_err(format!("operator acts on {pn}x{pn}, state dimension is {n}"));
        }
    }
    let a_p = p.apply_real(&sys.a)?;
    let a_dp = p.apply_real(&sys.a_d)?;
    let b_p = if sys.b.is_square() || matches!(p.kind(), OperatorKind::ScalarScaling(_)) {
        p.apply_real(&sys.b)?
    } else {
        return Err(Error::UnsupportedDeformation(format!(
            "a non-scalar operator cannot deform the rectangular {}x{} input matrix",
            sys.b.rows(),
            sys.b.cols()
        )));
    };
    let cb_p = sys.c.matmul(&b_p)?;
    let lu = match Lu::factor(&cb_p) {
        Ok(lu) => lu,
        Err(Error::SingularMatrix { .. }) => return Err(Error::SingularActuation),
        Err(e) => return Err(e),
    };
    let gain = lu.solve(&sys.c)?;
    let pi = &RMatrix::identity(n) - &b_p.matmul(&gain)?;
    let a_bar = pi.matmul(&a_p)?;
    let a_dbar = pi.matmul(&a_dp)?;
    let d_bar = pi.matmul(&sys.d)?;
    Ok(DeformedSystem {
        a_p,
        a_dp,
        b_p,
        cb_p,
        pi,
        a_bar,
        a_dbar,
        d_bar,
    })
}

fn closed_loop(def: &DeformedSystem, k: &RMatrix) -> Result<RMatrix> {
    if k.shape() != (def.b_p.cols(), def.a_p.rows()) {
        return dim_err(format!(
            "gain K must be {}x{}",
            def.b_p.cols(),
            def.a_p.rows()
        ));
    }
    def.a_p.try_sub(&def.b_p.matmul(k)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormCheck {
    pub norm: f64,
    pub ok: bool,
}

/// `‖A_P − B_P K‖_op < 1`.
pub fn check_k_strong(def: &DeformedSystem, k: &RMatrix) -> Result<NormCheck> {
    let norm = spectral_norm(&closed_loop(def, k)?);
    Ok(NormCheck { norm, ok: norm < 1.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct R0Check {
    pub required_r0: f64,
    pub ok: bool,
}

/// Smallest state bound `r₀` for which the a-priori bound is self-consistent:
/// `(‖A_{d,P}‖ r_{d,0} + ρ_max ‖B_P‖ + δ_max ‖D‖) / (1 − ‖A_P − B_P K‖)`.
pub fn check_r0(
    def: &DeformedSystem,
    sys: &DelayedSystem,
    k: &RMatrix,
    r0: f64,
    r_d0: f64,
    rho_max: f64,
) -> Result<R0Check> {
    let kn = check_k_strong(def, k)?.norm;
    let denom = 1.0 - kn;
    if !(denom > 0.0) {
        return Err(Error::KStrongViolated(kn));
    }
    let num = spectral_norm(&def.a_dp) * r_d0
        + rho_max * spectral_norm(&def.b_p)
        + sys.delta_max * spectral_norm(&sys.d);
    let required_r0 = num / denom;
    Ok(R0Check {
        required_r0,
        ok: r0 >= required_r0,
    })
}

/// `α₀ = ‖C(A_P − B_P K)‖ r₀ + ‖C A_{d,P}‖ r_{d,0} + δ_max ‖C D‖`.
pub fn alpha0(def: &DeformedSystem, sys: &DelayedSystem, k: &RMatrix, r0: f64, r_d0: f64) -> Result<f64> {
    let c = &sys.c;
    Ok(spectral_norm(&c.matmul(&closed_loop(def, k)?)?) * r0
        + spectral_norm(&c.matmul(&def.a_dp)?) * r_d0
        + sys.delta_max * spectral_norm(&c.matmul(&sys.d)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReachingReport {
    pub alpha0: f64,
    /// Contraction factor `ρ‖CB_P‖/φ`.
    pub beta: f64,
    /// Fixed point `α₀/(1−β)` of the sliding-norm recursion.
    pub s_star: f64,
    /// Upper bound on the number of steps to enter `‖s‖ ≤ φ`.
    pub t_star: u64,
}

/// Tolerance for treating `φ − s*` as zero.
pub const S_STAR_EQ_TOL: f64 = 1e-12;

#[allow(clippy::too_many_arguments)]
pub fn reaching_report(
    def: &DeformedSystem,
    sys: &DelayedSystem,
    k: &RMatrix,
    r0: f64,
    r_d0: f64,
    phi: f64,
    rho: f64,
    s0_norm: f64,
) -> Result<ReachingReport> {
    let alpha0 = alpha0(def, sys, k, r0, r_d0)?;
    if !(phi > alpha0) {
        return Err(Error::PhiTooSmall { phi, alpha0 });
    }
    let cb = spectral_norm(&def.cb_p);
    if rho * cb > phi - alpha0 {
        return Err(Error::RhoTooLarge {
            lhs: rho * cb,
            rhs: phi - alpha0,
        });
    }
    let beta = rho * cb / phi;
    let s_star = alpha0 / (1.0 - beta);
    let t_star = reaching_time(s0_norm, phi, beta, s_star);
    Ok(ReachingReport {
        alpha0,
        beta,
        s_star,
        t_star,
    })
}

/// `⌈ln((‖s(0)‖ − s*)/(φ − s*)) / ln(1/β)⌉` with the degenerate cases
/// (already in band → 0, β = 0 or s* = φ → 1).
pub fn reaching_time(s0_norm: f64, phi: f64, beta: f64, s_star: f64) -> u64 {
    if s0_norm <= phi {
        return 0;
    }
    if beta == 0.0 || (phi - s_star).abs() <= S_STAR_EQ_TOL {
        return 1;
    }
    let steps = ((s0_norm - s_star) / (phi - s_star)).ln() / (1.0 / beta).ln();
    (steps.ceil().max(1.0)) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandCheck {
    /// `‖Φ_ρ‖_op` with `Φ_ρ = C(A_P − B_P K) − (ρ/φ) C B_P C`.
    pub phi_rho_norm: f64,
    pub lhs: f64,
    pub ok: bool,
}

/// Band invariance: `‖Φ_ρ‖ r + ‖C A_{d,P}‖ r + δ_max ‖C D‖ ≤ φ`.
pub fn band_invariance_check(
    def: &DeformedSystem,
    sys: &DelayedSystem,
    k: &RMatrix,
    rho: f64,
    phi: f64,
    r: f64,
) -> Result<BandCheck> {
    if !(phi > 0.0) {
        return Err(Error::NonpositivePhi(phi));
    }
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("level-set radius must be nonnegative, got {r}")));
    }
    let c = &sys.c;
    let phi_rho = c
        .matmul(&closed_loop(def, k)?)?
        .try_sub(&def.cb_p.matmul(c)?.scale(rho / phi))?;
    let phi_rho_norm = spectral_norm(&phi_rho);
    let lhs = phi_rho_norm * r
        + spectral_norm(&c.matmul(&def.a_dp)?) * r
        + sys.delta_max * spectral_norm(&c.matmul(&sys.d)?);
    Ok(BandCheck {
        phi_rho_norm,
        lhs,
        ok: lhs <= phi,
    })
}

/// Designer-chosen quantities of the sequential procedure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignInputs {
    pub r0: f64,
    pub r_d0: f64,
    pub rho_max: f64,
    pub k: RMatrix,
    pub phi: f64,
    pub rho: f64,
    /// `‖s(0)‖₂` used for the reaching-time bound; defaults to `‖C x(0)‖₂` of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepFailure {
    /// 1-based step index (i)..(vi).
    pub step: usize,
    pub message: String,
    #[serde(skip)]
    pub error: Error,
}

/// Record of the sequential design procedure. Quantities are `None` until
/// the step that computes them has run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignState {
    pub r0: f64,
    pub r_d0: f64,
    pub rho_max: f64,
    pub k: RMatrix,
    pub phi: f64,
    pub rho: f64,
    pub s0_norm: f64,
    pub k_norm: Option<f64>,
    pub required_r0: Option<f64>,
    pub alpha0: Option<f64>,
    pub rho_bound: Option<f64>,
    pub beta: Option<f64>,
    pub s_star: Option<f64>,
    pub t_star: Option<u64>,
    pub r: Option<f64>,
    pub band_lhs: Option<f64>,
    pub phi_rho_norm: Option<f64>,
    /// Steps (i)..(vi) passed, in order.
    pub step_flags: [bool; 6],
    /// `Π = 0`: reduced dynamics are `x(k+1) = 0`.
    pub degenerate: bool,
    pub failure: Option<StepFailure>,
}

impl DesignState {
    pub fn passed(&self) -> bool {
        self.step_flags.iter().all(|&f| f)
    }

    /// `Err(DesignStep)` carrying the first failing step, if any.
    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            Some(f) => Err(Error::DesignStep {
                step: f.step,
                source: Box::new(f.error.clone()),
            }),
            None => Ok(self),
        }
    }
}

/// Runs steps (i)–(vi) in order, stopping at the first failure:
/// (i) bounds and admissible deformation, (ii) `‖A_P − B_P K‖ < 1`,
/// (iii) `r₀` sufficiency, (iv) `φ > α₀`, (v) `ρ ≤ min(ρ_max, (φ−α₀)/‖CB_P‖)`,
/// (vi) band invariance at the certificate's level-set radius.
pub fn run_design(
    sys: &DelayedSystem,
    p: &RotaBaxterOperator,
    inputs: &DesignInputs,
    certificate: Option<&StabilityCertificate>,
) -> DesignState {
    let mut st = DesignState {
        r0: inputs.r0,
        r_d0: inputs.r_d0,
        rho_max: inputs.rho_max,
        k: inputs.k.clone(),
        phi: inputs.phi,
        rho: inputs.rho,
        s0_norm: inputs.s0_norm.unwrap_or(0.0),
        k_norm: None,
        required_r0: None,
        alpha0: None,
        rho_bound: None,
        beta: None,
        s_star: None,
        t_star: None,
        r: None,
        band_lhs: None,
        phi_rho_norm: None,
        step_flags: [false; 6],
        degenerate: false,
        failure: None,
    };
    let fail = |st: &mut DesignState, step: usize, error: Error| {
        st.failure = Some(StepFailure {
            step,
            message: error.to_string(),
            error,
        });
    };

    // (i)
    let bounds = [
        ("r0", inputs.r0),
        ("r_d0", inputs.r_d0),
        ("rho_max", inputs.rho_max),
        ("rho", inputs.rho),
    ];
    if let Some((name, v)) = bounds.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
        fail(&mut st, 1, Error::InvalidArgument(format!("{name} must be finite and nonnegative, got {v}")));
        return st;
    }
    if !(inputs.phi > 0.0) {
        fail(&mut st, 1, Error::NonpositivePhi(inputs.phi));
        return st;
    }
    let def = match deform(sys, p) {
        Ok(d) => d,
        Err(e) => {
            fail(&mut st, 1, e);
            return st;
        }
    };
    st.degenerate = def.is_degenerate();
    st.step_flags[0] = true;

    // (ii)
    match check_k_strong(&def, &inputs.k) {
        Ok(c) => {
            st.k_norm = Some(c.norm);
            if !c.ok {
                fail(&mut st, 2, Error::KStrongViolated(c.norm));
                return st;
            }
        }
        Err(e) => {
            fail(&mut st, 2, e);
            return st;
        }
    }
    st.step_flags[1] = true;

    // (iii)
    match check_r0(&def, sys, &inputs.k, inputs.r0, inputs.r_d0, inputs.rho_max) {
        Ok(c) => {
            st.required_r0 = Some(c.required_r0);
            if !c.ok {
                fail(
                    &mut st,
                    3,
                    Error::InvalidArgument(format!(
                        "r0 = {} is below the required {:.6}",
                        inputs.r0, c.required_r0
                    )),
                );
                return st;
            }
        }
        Err(e) => {
            fail(&mut st, 3, e);
            return st;
        }
    }
    st.step_flags[2] = true;

    // (iv)
    let a0 = match alpha0(&def, sys, &inputs.k, inputs.r0, inputs.r_d0) {
        Ok(a) => a,
        Err(e) => {
            fail(&mut st, 4, e);
            return st;
        }
    };
    st.alpha0 = Some(a0);
    if !(inputs.phi > a0) {
        fail(&mut st, 4, Error::PhiTooSmall { phi: inputs.phi, alpha0: a0 });
        return st;
    }
    st.step_flags[3] = true;

    // (v)
    let cb = spectral_norm(&def.cb_p);
    let bound = inputs.rho_max.min((inputs.phi - a0) / cb);
    st.rho_bound = Some(bound);
    if inputs.rho > inputs.rho_max {
        fail(
            &mut st,
            5,
            Error::InvalidArgument(format!("ρ = {} exceeds ρ_max = {}", inputs.rho, inputs.rho_max)),
        );
        return st;
    }
    match reaching_report(
        &def,
        sys,
        &inputs.k,
        inputs.r0,
        inputs.r_d0,
        inputs.phi,
        inputs.rho,
        st.s0_norm,
    ) {
        Ok(rep) => {
            st.beta = Some(rep.beta);
            st.s_star = Some(rep.s_star);
            st.t_star = Some(rep.t_star);
        }
        Err(e) => {
            fail(&mut st, 5, e);
            return st;
        }
    }
    st.step_flags[4] = true;

    // (vi)
    let Some(cert) = certificate else {
        fail(
            &mut st,
            6,
            Error::InvalidArgument("band invariance needs a stability certificate".into()),
        );
        return st;
    };
    st.r = Some(cert.r);
    match band_invariance_check(&def, sys, &inputs.k, inputs.rho, inputs.phi, cert.r) {
        Ok(b) => {
            st.band_lhs = Some(b.lhs);
            st.phi_rho_norm = Some(b.phi_rho_norm);
            if !b.ok {
                fail(
                    &mut st,
                    6,
                    Error::InvalidArgument(format!(
                        "band invariance fails: {:.6} > φ = {}",
                        b.lhs, inputs.phi
                    )),
                );
                return st;
            }
        }
        Err(e) => {
            fail(&mut st, 6, e);
            return st;
        }
    }
    st.step_flags[5] = true;
    st
}
