//! Single-document JSON run configuration.
//!
//! ```json
//! {
//!   "system": {"a": [[..]], "a_d": [[..]], "b": [[..]], "c": [[..]], "d": [[..]], "tau": 1, "delta_max": 0.1},
//!   "operator": {"kind": "scalar", "lambda": 0.5},
//!   "design": {"r0": 2, "r_d0": 2, "rho_max": 0.2, "k": [[1, 0.5]], "phi": 0.5, "rho": 0.2},
//!   "lmi": {"gamma_hi": 1.0, "epsilon_margin": 1e-6},
//!   "sim": {"horizon": 30, "mode": "closed-loop", "disturbance": {"kind": "zero"},
//!           "initial_history": [[0.5, 0.5], [0, 0]]}
//! }
//! ```
//!
//! Only `operator` is mandatory; each command asks for the sections it needs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{LmiProblem, DEFAULT_BOX_BOUND, EPSILON_MARGIN};
use crate::rota_baxter::{OperatorSpec, RotaBaxterOperator};
use crate::sim::{norm, SimSpec};
use crate::smc::{DeformedSystem, DelayedSystem, DesignInputs};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmiSettings {
    #[serde(default = "default_gamma_hi")]
    pub gamma_hi: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_margin: f64,
    #[serde(default = "default_box")]
    pub box_bound: f64,
}

fn default_gamma_hi() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    EPSILON_MARGIN
}
fn default_box() -> f64 {
    DEFAULT_BOX_BOUND
}

impl Default for LmiSettings {
    fn default() -> Self {
        Self {
            gamma_hi: default_gamma_hi(),
            epsilon_margin: default_epsilon(),
            box_bound: default_box(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_triples")]
    pub triples: usize,
}

fn default_pairs() -> usize {
    200
}
fn default_triples() -> usize {
    100
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            pairs: default_pairs(),
            triples: default_triples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<DelayedSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignInputs>,
    #[serde(default)]
    pub lmi: LmiSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Parses and validates. Errors name the offending field path and,
    /// for syntax problems, the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let parsed: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path.is_empty() {
                cfg(inner.to_string())
            } else {
                cfg(format!("{path}: {inner}"))
            }
        })?;
        parsed.validate()?;
        Ok(parsed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let op = self.operator()?;
        if let Some(sys) = &self.system {
            sys.validate().map_err(|e| cfg(format!("system: {e}")))?;
            if let Some(pn) = op.dimension() {
                if pn != sys.n() {
                    return Err(cfg(format!(
                        "operator.map: acts on {pn}x{pn} matrices but the state dimension is {}",
                        sys.n()
                    )));
                }
            }
            if let Some(d) = &self.design {
                if d.k.shape() != (sys.m(), sys.n()) {
                    return Err(cfg(format!("design.k: must be {}x{}", sys.m(), sys.n())));
                }
            }
            if let Some(s) = &self.sim {
                if s.initial_history.len() != sys.tau + 1 {
                    return Err(cfg(format!(
                        "sim.initial_history: needs {} states [x(0), x(-1), ...], got {}",
                        sys.tau + 1,
                        s.initial_history.len()
                    )));
                }
                if let Some(i) = s.initial_history.iter().position(|x| x.len() != sys.n()) {
                    return Err(cfg(format!("sim.initial_history[{i}]: must have length {}", sys.n())));
                }
            }
        }
        if let Some(s) = &self.sim {
            if s.horizon < 1 {
                return Err(cfg("sim.horizon: must be at least 1"));
            }
        }
        if let Some(d) = &self.design {
            if !(d.phi > 0.0) {
                return Err(cfg("design.phi: must be positive"));
            }
        }
        if !(self.lmi.gamma_hi > 0.0) {
            return Err(cfg("lmi.gamma_hi: must be positive"));
        }
        if !(self.lmi.epsilon_margin > 0.0) {
            return Err(cfg("lmi.epsilon_margin: must be positive"));
        }
        if !(self.lmi.box_bound > 1.0) {
            return Err(cfg("lmi.box_bound: must exceed 1"));
        }
        Ok(())
    }

    pub fn operator(&self) -> Result<RotaBaxterOperator> {
        RotaBaxterOperator::try_from(&self.operator).map_err(|e| cfg(format!("operator: {e}")))
    }

    pub fn system(&self) -> Result<&DelayedSystem> {
        self.system.as_ref().ok_or_else(|| cfg("missing field `system`"))
    }

    pub fn sim(&self) -> Result<&SimSpec> {
        self.sim.as_ref().ok_or_else(|| cfg("missing field `sim`"))
    }

    /// Design inputs with `s0_norm` defaulted to `‖C x(0)‖` of the run.
    pub fn design(&self) -> Result<DesignInputs> {
        let mut d = self.design.clone().ok_or_else(|| cfg("missing field `design`"))?;
        if d.s0_norm.is_none() {
            let sys = self.system()?;
            let x0 = self
                .sim
                .as_ref()
                .map(|s| s.initial_history[0].clone())
                .unwrap_or_else(|| vec![0.0; sys.n()]);
            d.s0_norm = Some(norm(&sys.c.mul_vec(&x0)?));
        }
        Ok(d)
    }

    /// Initial history, or all zeros when no simulation section is present.
    pub fn history(&self) -> Result<Vec<Vec<f64>>> {
        let sys = self.system()?;
        Ok(match &self.sim {
            Some(s) => s.initial_history.clone(),
            None => vec![vec![0.0; sys.n()]; sys.tau + 1],
        })
    }

    pub fn lmi_problem(&self, def: &DeformedSystem) -> Result<LmiProblem> {
        let mut prob = LmiProblem::from_deformed(def)?;
        prob.epsilon_margin = self.lmi.epsilon_margin;
        prob.box_bound = self.lmi.box_bound;
        Ok(prob)
    }
}
