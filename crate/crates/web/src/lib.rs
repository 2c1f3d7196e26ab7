//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain numbers or a JSON string and returns JSON. The
//! `*_json` functions hold the logic so they can be tested natively.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use rbsmc::examples;
use rbsmc::linalg::eigenvalues;
use rbsmc::lmi::{minimize_gamma, LmiProblem};
use rbsmc::rota_baxter::{verify_operator, OperatorSpec, RotaBaxterOperator};
use rbsmc::sim::{simulate, summarize, Disturbance, Mode, SimSpec};
use rbsmc::smc::{deform, DelayedSystem};
use rbsmc::spectral::{build_companion, spectrum_report};

const MAX_TAU: usize = 12;
const MAX_HORIZON: usize = 500;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn reference_with_delay(tau: usize) -> Result<DelayedSystem, String> {
    if !(1..=MAX_TAU).contains(&tau) {
        return Err(format!("delay must be between 1 and {MAX_TAU}"));
    }
    let mut sys = examples::underactuated_system();
    sys.tau = tau;
    Ok(sys)
}

/// Delayed spectrum of the reference plant under scalar scaling by `lambda`,
/// with the delay term multiplied by `delay_gain`.
pub fn spectrum_json(lambda: f64, tau: usize, delay_gain: f64) -> Result<String, String> {
    let mut sys = reference_with_delay(tau)?;
    sys.a_d = sys.a_d.scale(delay_gain);
    let def = deform(&sys, &RotaBaxterOperator::scalar(lambda)).map_err(|e| e.to_string())?;
    let form = build_companion(&def.a_bar, &def.a_dbar, tau).map_err(|e| e.to_string())?;
    let report = spectrum_report(&form).map_err(|e| e.to_string())?;
    let eig: Vec<[f64; 2]> = eigenvalues(&def.a_bar)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|z| [z.re, z.im])
        .collect();
    Ok(to_json(&json!({
        "spectrum": report,
        "eig_a_bar": eig,
        "pi": def.pi,
    })))
}

/// Simulates the reference design from `x(0) = (x1, x2)` with zero history
/// before it. `disturbance` is `"zero"` or `"uniform"`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_json(
    mode: &str,
    horizon: usize,
    x1: f64,
    x2: f64,
    rho: f64,
    phi: f64,
    disturbance: &str,
    seed: u64,
) -> Result<String, String> {
    if !(1..=MAX_HORIZON).contains(&horizon) {
        return Err(format!("horizon must be between 1 and {MAX_HORIZON}"));
    }
    let mode = match mode {
        "closed-loop" => Mode::ClosedLoop,
        "reduced" => Mode::Reduced,
        m => return Err(format!("unknown mode {m:?}")),
    };
    let disturbance = match disturbance {
        "zero" => Disturbance::Zero,
        "uniform" => Disturbance::Uniform { radius: None },
        d => return Err(format!("unknown disturbance {d:?}")),
    };
    let sys = examples::underactuated_system();
    let def = deform(&sys, &RotaBaxterOperator::scalar(examples::LAMBDA)).map_err(|e| e.to_string())?;
    let mut design = examples::underactuated_design();
    design.rho = rho;
    design.phi = phi;
    let spec = SimSpec {
        horizon,
        mode,
        disturbance,
        initial_history: vec![vec![x1, x2], vec![0.0; 2]],
    };
    let cert = LmiProblem::from_deformed(&def)
        .and_then(|p| minimize_gamma(&p, 1.0))
        .and_then(|c| c.with_history(&spec.initial_history, sys.tau))
        .ok();
    let traj = simulate(&sys, &def, &design, cert.as_ref(), &spec, seed).map_err(|e| e.to_string())?;
    let summary = summarize(&traj, phi, cert.as_ref(), &def).map_err(|e| e.to_string())?;
    let norm_s: Vec<f64> = (0..=horizon as isize).map(|k| traj.sliding_norm(k)).collect();
    Ok(to_json(&json!({
        "states": &traj.states[sys.tau..],
        "norm_s": norm_s,
        "lyapunov": traj.lyapunov,
        "summary": summary,
        "gamma": cert.as_ref().map(|c| c.gamma),
    })))
}

/// Runs the property suite on an operator descriptor such as
/// `{"kind": "triangular"}`.
pub fn verify_json(operator: &str, samples: usize, seed: u64) -> Result<String, String> {
    let spec: OperatorSpec = serde_json::from_str(operator).map_err(|e| e.to_string())?;
    let op = RotaBaxterOperator::try_from(&spec).map_err(|e| e.to_string())?;
    let rep = verify_operator(&op, samples, samples / 2, seed, 1.0).map_err(|e| e.to_string())?;
    Ok(to_json(&rep))
}

#[wasm_bindgen]
pub fn spectrum(lambda: f64, tau: usize, delay_gain: f64) -> Result<String, JsValue> {
    spectrum_json(lambda, tau, delay_gain).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn trajectory(
    mode: &str,
    horizon: usize,
    x1: f64,
    x2: f64,
    rho: f64,
    phi: f64,
    disturbance: &str,
    seed: u64,
) -> Result<String, JsValue> {
    simulate_json(mode, horizon, x1, x2, rho, phi, disturbance, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn verify(operator: &str, samples: usize, seed: u64) -> Result<String, JsValue> {
    verify_json(operator, samples, seed).map_err(|e| JsValue::from_str(&e))
}
