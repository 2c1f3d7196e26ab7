//! Rollouts of the saturated closed loop and of the equivalent-control
//! reduced system, with Lyapunov-Krasovskii bookkeeping.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{Lu, RMatrix};
use crate::lmi::StabilityCertificate;
use crate::smc::{DeformedSystem, DelayedSystem, DesignInputs};

/// Relative slack allowed on `‖δ‖ ≤ δ_max`.
const DISTURBANCE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ClosedLoop,
    Reduced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Disturbance {
    Zero,
    Constant { value: Vec<f64> },
    /// `δ_i(k) = amplitude_i · sin(omega·k + phase)`.
    Sinusoid {
        amplitude: Vec<f64>,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Uniform on the ball of the given radius (default `δ_max`), seeded by the run.
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Sequence { values: Vec<Vec<f64>> },
}

impl Disturbance {
    /// Materializes `δ(0..horizon)`.
    pub fn generate(&self, p: usize, horizon: usize, delta_max: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
        let check_len = |v: &[f64]| {
            if v.len() != p {
                dim_err(format!("disturbance vectors must have length {p}, got {}", v.len()))
            } else {
                Ok(())
            }
        };
        let out = match self {
            Disturbance::Zero => vec![vec![0.0; p]; horizon],
            Disturbance::Constant { value } => {
                check_len(value)?;
                vec![value.clone(); horizon]
            }
            Disturbance::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                check_len(amplitude)?;
                (0..horizon)
                    .map(|k| {
                        let s = (omega * k as f64 + phase).sin();
                        amplitude.iter().map(|a| a * s).collect()
                    })
                    .collect()
            }
            Disturbance::Uniform { radius } => {
                let r = radius.unwrap_or(delta_max);
                if !(r >= 0.0) {
                    return Err(Error::InvalidArgument(format!("radius must be nonnegative, got {r}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..horizon).map(|_| sample_ball(&mut rng, p, r)).collect()
            }
            Disturbance::Sequence { values } => {
                if values.len() < horizon {
                    return Err(Error::InvalidArgument(format!(
                        "disturbance sequence has {} entries, horizon is {horizon}",
                        values.len()
                    )));
                }
                for v in values {
                    check_len(v)?;
                }
                values[..horizon].to_vec()
            }
        };
        Ok(out)
    }
}

/// Uniform sample from the Euclidean ball by rejection from the cube.
pub fn sample_ball(rng: &mut ChaCha8Rng, p: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 || p == 0 {
        return vec![0.0; p];
    }
    loop {
        let v: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if norm(&v) <= 1.0 {
            return v.into_iter().map(|x| x * radius).collect();
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn axpy(acc: &mut [f64], s: f64, v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += s * b;
    }
}

/// `sat(v/φ)` componentwise: `v_i/φ` inside the band, `sgn(v_i)` outside.
pub fn saturate(v: &[f64], phi: f64) -> Result<Vec<f64>> {
    if !(phi > 0.0) {
        return Err(Error::NonpositivePhi(phi));
    }
    Ok(v.iter()
        .map(|&x| if x.abs() <= phi { x / phi } else { x.signum() })
        .collect())
}

fn check_history(history: &[Vec<f64>], tau: usize, n: usize) -> Result<()> {
    if history.len() < tau + 1 {
        return Err(Error::HistoryTooShort {
            needed: tau + 1,
            got: history.len(),
        });
    }
    if history.iter().any(|x| x.len() != n) {
        return dim_err(format!("history states must have length {n}"));
    }
    Ok(())
}

fn check_disturbance(delta: &[f64], delta_max: f64) -> Result<()> {
    let nd = norm(delta);
    if nd > delta_max * (1.0 + DISTURBANCE_SLACK) + f64::MIN_POSITIVE {
        return Err(Error::DisturbanceTooLarge { norm: nd, max: delta_max });
    }
    Ok(())
}

/// `u = −Kx − ρ·sat(Cx/φ)`.
pub fn closed_loop_control(sys: &DelayedSystem, k: &RMatrix, rho: f64, phi: f64, x: &[f64]) -> Result<Vec<f64>> {
    let s = sys.c.mul_vec(x)?;
    let sat = saturate(&s, phi)?;
    let mut u = k.mul_vec(x)?;
    for (ui, si) in u.iter_mut().zip(&sat) {
        *ui = -*ui - rho * si;
    }
    Ok(u)
}

/// `x(k+1) = A_P x(k) + A_{d,P} x(k−τ) + B_P u(k) + D δ(k)` under the
/// saturated law. `history[i]` is `x(k−i)`.
#[allow(clippy::too_many_arguments)]
pub fn step_closed_loop(
    sys: &DelayedSystem,
    def: &DeformedSystem,
    k: &RMatrix,
    rho: f64,
    phi: f64,
    history: &[Vec<f64>],
    delta: &[f64],
) -> Result<Vec<f64>> {
    Ok(closed_loop_step(sys, def, k, rho, phi, history, delta)?.0)
}

#[allow(clippy::too_many_arguments)]
fn closed_loop_step(
    sys: &DelayedSystem,
    def: &DeformedSystem,
    k: &RMatrix,
    rho: f64,
    phi: f64,
    history: &[Vec<f64>],
    delta: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_history(history, sys.tau, sys.n())?;
    check_disturbance(delta, sys.delta_max)?;
    let x = &history[0];
    let u = closed_loop_control(sys, k, rho, phi, x)?;
    let mut next = def.a_p.mul_vec(x)?;
    axpy(&mut next, 1.0, &def.a_dp.mul_vec(&history[sys.tau])?);
    axpy(&mut next, 1.0, &def.b_p.mul_vec(&u)?);
    axpy(&mut next, 1.0, &sys.d.mul_vec(delta)?);
    Ok((next, u))
}

/// `x(k+1) = Ā x(k) + Ā_d x(k−τ) + D̄ δ(k)`. `history[i]` is `x(k−i)`.
pub fn step_reduced(def: &DeformedSystem, tau: usize, history: &[Vec<f64>], delta: &[f64]) -> Result<Vec<f64>> {
    check_history(history, tau, def.a_bar.rows())?;
    let mut next = def.a_bar.mul_vec(&history[0])?;
    axpy(&mut next, 1.0, &def.a_dbar.mul_vec(&history[tau])?);
    axpy(&mut next, 1.0, &def.d_bar.mul_vec(delta)?);
    Ok(next)
}

/// Equivalent control `u_eq = −(CB_P)⁻¹ C (A_P x + A_{d,P} x_τ + D δ)`.
fn equivalent_control(
    sys: &DelayedSystem,
    def: &DeformedSystem,
    lu: &Lu<f64>,
    x: &[f64],
    x_tau: &[f64],
    delta: &[f64],
) -> Result<Vec<f64>> {
    let mut drift = def.a_p.mul_vec(x)?;
    axpy(&mut drift, 1.0, &def.a_dp.mul_vec(x_tau)?);
    axpy(&mut drift, 1.0, &sys.d.mul_vec(delta)?);
    let rhs = RMatrix::column(&sys.c.mul_vec(&drift)?);
    Ok(lu.solve(&rhs)?.data().iter().map(|v| -v).collect())
}

/// `V = x(k)ᵀXx(k) + Σ_{i=1..τ} x(k−i)ᵀYx(k−i)`; `window[i]` is `x(k−i)`.
pub fn lyapunov_value(cert: &StabilityCertificate, window: &[Vec<f64>]) -> Result<f64> {
    let mut v = cert.x.quadratic_form(&window[0])?;
    for x in &window[1..] {
        v += cert.y.quadratic_form(x)?;
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub mode: Mode,
    pub tau: usize,
    /// `x(k)` for `k = −τ..=N`.
    pub states: Vec<Vec<f64>>,
    /// `s(k) = Cx(k)` for `k = −τ..=N`.
    pub sliding: Vec<Vec<f64>>,
    /// `u(k)` for `k = 0..N`.
    pub controls: Vec<Vec<f64>>,
    /// `δ(k)` for `k = 0..N`.
    pub disturbances: Vec<Vec<f64>>,
    /// `V_k` for `k = 0..=N` when a certificate was supplied.
    pub lyapunov: Option<Vec<f64>>,
    /// Closed-loop `V_k` carries no decrease guarantee.
    pub lyapunov_informative_only: bool,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// `x(k)` for `k ≥ −τ`.
    pub fn state(&self, k: isize) -> &[f64] {
        &self.states[(k + self.tau as isize) as usize]
    }

    /// `[x(k), x(k−1), …, x(k−τ)]`.
    pub fn window(&self, k: usize) -> Vec<Vec<f64>> {
        (0..=self.tau).map(|i| self.state(k as isize - i as isize).to_vec()).collect()
    }

    pub fn sliding_norm(&self, k: isize) -> f64 {
        norm(&self.sliding[(k + self.tau as isize) as usize])
    }

    /// First `k ≥ 0` with `‖s(k)‖ ≤ φ`.
    pub fn band_entry(&self, phi: f64) -> Option<usize> {
        (0..=self.horizon()).find(|&k| self.sliding_norm(k as isize) <= phi)
    }

    /// Columns `k, x_*, s_*, u_*, delta_*, V, norm_s`; rows `k = −τ..=N`,
    /// blank where a quantity is undefined.
    pub fn to_csv(&self) -> String {
        let n = self.states[0].len();
        let m = self.sliding[0].len();
        let p = self.disturbances.first().map_or(0, |d| d.len());
        let mu = self.controls.first().map_or(m, |u| u.len());
        let mut header = vec!["k".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|i| format!("s_{i}")));
        header.extend((1..=mu).map(|i| format!("u_{i}")));
        header.extend((1..=p).map(|i| format!("delta_{i}")));
        header.push("V".into());
        header.push("norm_s".into());
        let mut out = header.join(",");
        out.push('\n');
        let tau = self.tau as isize;
        for k in -tau..=self.horizon() as isize {
            let mut cells = vec![k.to_string()];
            cells.extend(self.state(k).iter().map(|v| fmt_sig(*v)));
            cells.extend(self.sliding[(k + tau) as usize].iter().map(|v| fmt_sig(*v)));
            let step = (k >= 0 && (k as usize) < self.horizon()).then_some(k as usize);
            match step {
                Some(i) => {
                    cells.extend(self.controls[i].iter().map(|v| fmt_sig(*v)));
                    cells.extend(self.disturbances[i].iter().map(|v| fmt_sig(*v)));
                }
                None => cells.extend(std::iter::repeat_n(String::new(), mu + p)),
            }
            cells.push(match (&self.lyapunov, k >= 0) {
                (Some(v), true) => fmt_sig(v[k as usize]),
                _ => String::new(),
            });
            cells.push(fmt_sig(self.sliding_norm(k)));
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// 15 significant digits.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.14e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub horizon: usize,
    pub mode: Mode,
    pub disturbance: Disturbance,
    /// `[x(0), x(−1), …, x(−τ)]`.
    pub initial_history: Vec<Vec<f64>>,
}

/// Rolls the chosen dynamics forward `spec.horizon` steps.
pub fn simulate(
    sys: &DelayedSystem,
    def: &DeformedSystem,
    design: &DesignInputs,
    cert: Option<&StabilityCertificate>,
    spec: &SimSpec,
    seed: u64,
) -> Result<Trajectory> {
    let (n, tau) = (sys.n(), sys.tau);
    if spec.horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if spec.initial_history.len() != tau + 1 {
        return Err(Error::HistoryLengthMismatch {
            expected: tau + 1,
            got: spec.initial_history.len(),
        });
    }
    check_history(&spec.initial_history, tau, n)?;
    let deltas = spec.disturbance.generate(sys.p(), spec.horizon, sys.delta_max, seed)?;
    for d in &deltas {
        check_disturbance(d, sys.delta_max)?;
    }
    let lu = Lu::factor(&def.cb_p).map_err(|_| Error::SingularActuation)?;

    // oldest first: x(−τ), …, x(0)
    let mut states: Vec<Vec<f64>> = spec.initial_history.iter().rev().cloned().collect();
    let mut controls = Vec::with_capacity(spec.horizon);
    for (step, delta) in deltas.iter().enumerate() {
        let now = tau + step;
        let window: Vec<Vec<f64>> = (0..=tau).map(|i| states[now - i].clone()).collect();
        let (next, u) = match spec.mode {
            Mode::ClosedLoop => closed_loop_step(sys, def, &design.k, design.rho, design.phi, &window, delta)?,
            Mode::Reduced => {
                let u = equivalent_control(sys, def, &lu, &window[0], &window[tau], delta)?;
                (step_reduced(def, tau, &window, delta)?, u)
            }
        };
        states.push(next);
        controls.push(u);
    }
    let sliding = states
        .iter()
        .map(|x| sys.c.mul_vec(x))
        .collect::<Result<Vec<_>>>()?;
    let mut traj = Trajectory {
        mode: spec.mode,
        tau,
        states,
        sliding,
        controls,
        disturbances: deltas,
        lyapunov: None,
        lyapunov_informative_only: spec.mode == Mode::ClosedLoop,
    };
    if let Some(c) = cert {
        let v = (0..=spec.horizon)
            .map(|k| lyapunov_value(c, &traj.window(k)))
            .collect::<Result<Vec<_>>>()?;
        traj.lyapunov = Some(v);
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaVReport {
    /// `max_k ΔV_k + μ‖x(k)‖² − γ²‖δ(k)‖²`.
    pub max_violation: f64,
    /// `max_k ΔV_k + μ₀‖x(k)‖²`, meaningful for disturbance-free runs.
    pub max_violation_mu0: f64,
    /// `max_k |ΔV_k − (ξᵀFᵀXFξ + xᵀ(−X+Y)x − x_τᵀYx_τ)|`.
    pub telescoping_residual: f64,
}

/// Checks the per-step decrease along a reduced-mode trajectory.
pub fn delta_v_check(traj: &Trajectory, cert: &StabilityCertificate, def: &DeformedSystem) -> Result<DeltaVReport> {
    if traj.mode != Mode::Reduced {
        return Err(Error::ModeMismatch);
    }
    let v = traj
        .lyapunov
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trajectory carries no Lyapunov values".into()))?;
    let tau = traj.tau as isize;
    let g2 = cert.gamma * cert.gamma;
    let mut rep = DeltaVReport {
        max_violation: f64::NEG_INFINITY,
        max_violation_mu0: f64::NEG_INFINITY,
        telescoping_residual: 0.0,
    };
    for k in 0..traj.horizon() {
        let ki = k as isize;
        let x = traj.state(ki);
        let xt = traj.state(ki - tau);
        let d = &traj.disturbances[k];
        let dv = v[k + 1] - v[k];
        let mut fxi = def.a_bar.mul_vec(x)?;
        axpy(&mut fxi, 1.0, &def.a_dbar.mul_vec(xt)?);
        axpy(&mut fxi, 1.0, &def.d_bar.mul_vec(d)?);
        let predicted = cert.x.quadratic_form(&fxi)? + cert.y.quadratic_form(x)? - cert.x.quadratic_form(x)?
            - cert.y.quadratic_form(xt)?;
        rep.telescoping_residual = rep.telescoping_residual.max((dv - predicted).abs());
        let xs = norm_sq(x);
        rep.max_violation = rep.max_violation.max(dv + cert.mu * xs - g2 * norm_sq(d));
        rep.max_violation_mu0 = rep.max_violation_mu0.max(dv + cert.mu0 * xs);
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L2Report {
    /// `Σ_{k<N} ‖x(k)‖²` at the full horizon.
    pub state_energy: f64,
    /// `(V₀ + γ² Σ_{k<N} ‖δ(k)‖²)/μ` at the full horizon.
    pub bound: f64,
    /// `min_N (bound_N − energy_N)` over every prefix.
    pub min_slack: f64,
}

/// Cumulative bound `Σ‖x‖² ≤ (V₀ + γ²Σ‖δ‖²)/μ` checked on every prefix.
pub fn l2_check(traj: &Trajectory, cert: &StabilityCertificate) -> Result<L2Report> {
    let v = traj
        .lyapunov
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trajectory carries no Lyapunov values".into()))?;
    let g2 = cert.gamma * cert.gamma;
    let (mut ex, mut ed) = (0.0, 0.0);
    let mut min_slack = f64::INFINITY;
    for k in 0..traj.horizon() {
        ex += norm_sq(traj.state(k as isize));
        ed += norm_sq(&traj.disturbances[k]);
        let bound = (v[0] + g2 * ed) / cert.mu;
        min_slack = min_slack.min(bound - ex);
    }
    Ok(L2Report {
        state_energy: ex,
        bound: (v[0] + g2 * ed) / cert.mu,
        min_slack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub mode: Mode,
    pub horizon: usize,
    pub band_entry_step: Option<usize>,
    pub max_sliding_after_entry: Option<f64>,
    pub l2: Option<L2Report>,
    pub delta_v: Option<DeltaVReport>,
    pub lyapunov_informative_only: bool,
}

pub fn summarize(
    traj: &Trajectory,
    phi: f64,
    cert: Option<&StabilityCertificate>,
    def: &DeformedSystem,
) -> Result<SimSummary> {
    let entry = traj.band_entry(phi);
    let after = entry.map(|e| {
        (e..=traj.horizon())
            .map(|k| traj.sliding_norm(k as isize))
            .fold(0.0, f64::max)
    });
    let (l2, delta_v) = match (cert, traj.mode) {
        (Some(c), Mode::Reduced) => (Some(l2_check(traj, c)?), Some(delta_v_check(traj, c, def)?)),
        _ => (None, None),
    };
    Ok(SimSummary {
        mode: traj.mode,
        horizon: traj.horizon(),
        band_entry_step: entry,
        max_sliding_after_entry: after,
        l2,
        delta_v,
        lyapunov_informative_only: traj.lyapunov_informative_only,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::lmi::LmiProblem;
    use crate::rota_baxter::RotaBaxterOperator;
    use crate::smc::deform;

    fn setup() -> (DelayedSystem, DeformedSystem, DesignInputs, StabilityCertificate) {
        let sys = examples::underactuated_system();
        let def = deform(&sys, &RotaBaxterOperator::scalar(examples::LAMBDA)).unwrap();
        let prob = LmiProblem::from_deformed(&def).unwrap();
        let (q, yt, g) = examples::published_certificate();
        let cert = StabilityCertificate::from_parts(&prob, q, yt, g).unwrap();
        (sys, def, examples::underactuated_design(), cert)
    }

    fn spec(mode: Mode, horizon: usize, disturbance: Disturbance, hist: Vec<Vec<f64>>) -> SimSpec {
        SimSpec {
            horizon,
            mode,
            disturbance,
            initial_history: hist,
        }
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturate(&[0.0, 0.0], 0.5).unwrap(), vec![0.0, 0.0]);
        assert_eq!(saturate(&[1.0], 0.5).unwrap(), vec![1.0]);
        assert_eq!(saturate(&[-0.25, 0.5, -0.5], 0.5).unwrap(), vec![-0.5, 1.0, -1.0]);
        assert!(matches!(saturate(&[1.0], 0.0), Err(Error::NonpositivePhi(_))));
    }

    #[test]
    fn saturation_norm_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for phi in [0.1, 0.5, 2.0] {
            for _ in 0..1000 {
                let m = rng.gen_range(1..5);
                let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
                assert!(norm(&saturate(&s, phi).unwrap()) <= norm(&s) / phi * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn closed_loop_step_by_hand() {
        let (sys, def, d, _) = setup();
        let hist = examples::underactuated_history();
        let zero = step_closed_loop(&sys, &def, &d.k, d.rho, d.phi, &[vec![0.0; 2], vec![0.0; 2]], &[0.0]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        let x1 = step_closed_loop(&sys, &def, &d.k, d.rho, d.phi, &hist, &[0.0]).unwrap();
        // s = 0.75 > φ → sat = 1, u = −0.75 − 0.2 = −0.95
        // A_P x = −0.5·[0.45, 0.35] = [−0.225, −0.175], B_P u = −0.5·[0.5, 1]·(−0.95)
        let want = [-0.225 + 0.2375, -0.175 + 0.475];
        assert!((x1[0] - want[0]).abs() < 1e-15 && (x1[1] - want[1]).abs() < 1e-15);
    }

    #[test]
    fn switching_free_step_is_linear() {
        let (sys, def, d, _) = setup();
        let hist = vec![vec![0.3, -0.2], vec![0.1, 0.4]];
        let got = step_closed_loop(&sys, &def, &d.k, 0.0, d.phi, &hist, &[0.05]).unwrap();
        let acl = &def.a_p - &(&def.b_p * &d.k);
        let mut want = acl.mul_vec(&hist[0]).unwrap();
        axpy(&mut want, 1.0, &def.a_dp.mul_vec(&hist[1]).unwrap());
        axpy(&mut want, 0.05, &[0.1, 0.1]);
        assert!(norm(&[got[0] - want[0], got[1] - want[1]]) < 1e-15);
    }

    #[test]
    fn step_errors() {
        let (sys, def, d, _) = setup();
        assert!(matches!(
            step_closed_loop(&sys, &def, &d.k, d.rho, d.phi, &[vec![0.0; 2]], &[0.0]),
            Err(Error::HistoryTooShort { needed: 2, got: 1 })
        ));
        assert!(matches!(
            step_closed_loop(&sys, &def, &d.k, d.rho, d.phi, &[vec![0.0; 2], vec![0.0; 2]], &[0.2]),
            Err(Error::DisturbanceTooLarge { .. })
        ));
        assert!(matches!(
            step_reduced(&def, 1, &[vec![0.0; 2]], &[0.0]),
            Err(Error::HistoryTooShort { .. })
        ));
    }

    #[test]
    fn reduced_step_on_manifold() {
        let (sys, def, _, _) = setup();
        let x0 = vec![0.5, -1.0];
        let x1 = step_reduced(&def, 1, &[x0.clone(), vec![0.0, 0.0]], &[0.0]).unwrap();
        assert_eq!(x1, def.a_bar.mul_vec(&x0).unwrap());
        assert!(norm(&sys.c.mul_vec(&x1).unwrap()) < 1e-15);
        let z = step_reduced(&def, 1, &[vec![0.0; 2], vec![0.0; 2]], &[0.0]).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn reduced_run_decreases_lyapunov() {
        let (sys, def, d, cert) = setup();
        let s = spec(Mode::Reduced, 30, Disturbance::Zero, examples::underactuated_history());
        let traj = simulate(&sys, &def, &d, Some(&cert), &s, 0).unwrap();
        let v = traj.lyapunov.as_ref().unwrap();
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
        let rep = delta_v_check(&traj, &cert, &def).unwrap();
        assert!(rep.max_violation_mu0 <= 1e-8);
        assert!(rep.telescoping_residual <= 1e-12);
        // u_eq keeps the next sliding variable at zero
        assert!((1..=30).all(|k| traj.sliding_norm(k) < 1e-14));
    }

    #[test]
    fn l2_bound_from_rest() {
        let (sys, def, d, cert) = setup();
        let rest = vec![vec![0.0; 2]; 2];
        for seed in 0..5 {
            let s = spec(Mode::Reduced, 50, Disturbance::Uniform { radius: None }, rest.clone());
            let traj = simulate(&sys, &def, &d, Some(&cert), &s, seed).unwrap();
            assert!(traj.disturbances.iter().all(|x| norm(x) <= 0.1));
            let l2 = l2_check(&traj, &cert).unwrap();
            assert!(l2.min_slack >= 0.0);
            assert!(delta_v_check(&traj, &cert, &def).unwrap().max_violation <= 1e-12);
        }
    }

    #[test]
    fn closed_loop_reaches_band_within_bound() {
        let (sys, def, d, cert) = setup();
        let s = spec(Mode::ClosedLoop, 20, Disturbance::Zero, vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        let traj = simulate(&sys, &def, &d, Some(&cert), &s, 0).unwrap();
        assert!((traj.sliding_norm(0) - 1.5).abs() < 1e-15);
        assert!(traj.band_entry(d.phi).unwrap() <= 3);
        assert!(traj.lyapunov_informative_only);
        assert!(matches!(delta_v_check(&traj, &cert, &def), Err(Error::ModeMismatch)));
    }

    #[test]
    fn zero_trajectory_checks_vanish() {
        let (sys, def, d, cert) = setup();
        let s = spec(Mode::Reduced, 5, Disturbance::Zero, vec![vec![0.0; 2]; 2]);
        let traj = simulate(&sys, &def, &d, Some(&cert), &s, 0).unwrap();
        let rep = delta_v_check(&traj, &cert, &def).unwrap();
        assert_eq!(rep.max_violation, 0.0);
        assert_eq!(rep.telescoping_residual, 0.0);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let (sys, def, d, cert) = setup();
        let s = spec(Mode::ClosedLoop, 40, Disturbance::Uniform { radius: Some(0.05) }, examples::underactuated_history());
        let a = simulate(&sys, &def, &d, Some(&cert), &s, 9).unwrap();
        let b = simulate(&sys, &def, &d, Some(&cert), &s, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&sys, &def, &d, Some(&cert), &s, 10).unwrap();
        assert_ne!(a.disturbances, c.disturbances);
    }

    #[test]
    fn disturbance_generators() {
        let sin = Disturbance::Sinusoid {
            amplitude: vec![0.1],
            omega: 0.5,
            phase: 0.0,
        };
        let g = sin.generate(1, 4, 0.1, 0).unwrap();
        assert_eq!(g[0], vec![0.0]);
        assert!((g[1][0] - 0.1 * 0.5f64.sin()).abs() < 1e-17);
        assert!(Disturbance::Sequence { values: vec![vec![0.0]] }.generate(1, 2, 0.1, 0).is_err());
        assert!(Disturbance::Constant { value: vec![0.0, 0.0] }.generate(1, 2, 0.1, 0).is_err());
        let j: Disturbance = serde_json::from_str(r#"{"kind":"uniform"}"#).unwrap();
        assert_eq!(j, Disturbance::Uniform { radius: None });
    }

    #[test]
    fn oversized_disturbance_is_rejected() {
        let (sys, def, d, _) = setup();
        let s = spec(Mode::Reduced, 3, Disturbance::Constant { value: vec![0.5] }, examples::underactuated_history());
        assert!(matches!(simulate(&sys, &def, &d, None, &s, 0), Err(Error::DisturbanceTooLarge { .. })));
        let s0 = spec(Mode::Reduced, 0, Disturbance::Zero, examples::underactuated_history());
        assert!(simulate(&sys, &def, &d, None, &s0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let (sys, def, d, cert) = setup();
        let s = spec(Mode::ClosedLoop, 3, Disturbance::Zero, examples::underactuated_history());
        let traj = simulate(&sys, &def, &d, Some(&cert), &s, 0).unwrap();
        let csv = traj.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,x_1,x_2,s_1,u_1,delta_1,V,norm_s");
        assert_eq!(lines.len(), 1 + 1 + 4);
        assert!(lines[1].starts_with("-1,0,0,0,,,,"));
        let row0: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(row0[1], "5.00000000000000e-1");
        assert_eq!(row0.len(), 8);
        assert!(lines[5].split(',').nth(4).unwrap().is_empty());
        for cell in row0.iter().skip(1).filter(|c| c.contains('e')) {
            let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 15);
        }
    }
}
