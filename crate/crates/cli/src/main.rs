#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use rbsmc::config::RunConfig;
use rbsmc::linalg::RMatrix;
use rbsmc::lmi::{feasibility_sufficient, minimize_gamma, StabilityCertificate};
use rbsmc::rota_baxter::verify_operator;
use rbsmc::sim::{simulate, summarize};
use rbsmc::smc::{deform, run_design, DesignInputs};
use rbsmc::spectral::{build_companion, spectrum_report};
use rbsmc::Error;

const EXIT_OK: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

/// ε used for the `σ_max(F)` sufficient-condition report.
const SUFFICIENT_EPSILON: f64 = 0.5;

#[derive(Parser)]
#[command(name = "rbsmc", version, about = "Rota-Baxter deformed sliding-mode design for delayed discrete-time systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files. Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Multiplies every residual tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check the Rota-Baxter identity, Jacobi and bracket properties of the configured operator.
    VerifyRb,
    /// Run the sequential design procedure.
    Design {
        /// Certificate JSON from `certify`. Solved on the fly when omitted.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Minimize the disturbance gain subject to the stability LMI.
    Certify {
        /// Design output to re-check against the new certificate.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Roots of the delayed characteristic equation of the reduced dynamics.
    Spectral,
    /// Roll the closed-loop or reduced dynamics forward and write a CSV trajectory.
    Simulate {
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    seed: u64,
    tolerance_scale: f64,
}

enum Failure {
    Exit(u8, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::DesignStep { source, .. } => exit_code(source),
        _ => EXIT_VIOLATION,
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Exit(EXIT_CONFIG, format!("config error: {}", msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Exit(code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let path = cli.config.ok_or_else(|| config_err("--config <path> is required"))?;
    if !(cli.tolerance_scale > 0.0) {
        return Err(config_err("--tolerance-scale must be positive"));
    }
    let cfg = RunConfig::load(&path)?;
    let out = cli.out.or_else(|| cfg.output_dir.as_ref().map(PathBuf::from));
    let ctx = Ctx {
        cfg,
        out,
        seed: cli.seed,
        tolerance_scale: cli.tolerance_scale,
    };
    match cli.command {
        Command::VerifyRb => verify_rb(&ctx),
        Command::Design { certificate } => design(&ctx, certificate.as_deref()),
        Command::Certify { design } => certify(&ctx, design.as_deref()),
        Command::Spectral => spectral(&ctx),
        Command::Simulate { certificate } => simulate_cmd(&ctx, certificate.as_deref()),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| config_err(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Prints `value` and, with an output directory, writes it to `name`.
fn emit(ctx: &Ctx, name: &str, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("json");
    println!("{text}");
    if let Some(dir) = &ctx.out {
        write_file(dir, name, &(text + "\n"))?;
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn verify_rb(ctx: &Ctx) -> Result<u8, Failure> {
    let op = ctx.cfg.operator()?;
    let v = &ctx.cfg.verify;
    let rep = verify_operator(&op, v.pairs, v.triples, ctx.seed, ctx.tolerance_scale)?;
    emit(ctx, "verify_rb.json", &to_value(&rep))?;
    if rep.passed {
        return Ok(EXIT_OK);
    }
    for p in rep.properties.iter().filter(|p| !p.passed) {
        eprintln!(
            "violated: {} (worst {:.3e} > {:.1e}) witness {}",
            p.name,
            p.worst,
            p.tolerance,
            p.witness.as_deref().map(|w| w.join(", ")).unwrap_or_default()
        );
    }
    Ok(EXIT_VIOLATION)
}

/// Solver certificate at the run's initial history.
fn solve_certificate(ctx: &Ctx) -> Result<StabilityCertificate, Error> {
    let sys = ctx.cfg.system()?;
    let def = deform(sys, &ctx.cfg.operator()?)?;
    let prob = ctx.cfg.lmi_problem(&def)?;
    minimize_gamma(&prob, ctx.cfg.lmi.gamma_hi)?.with_history(&ctx.cfg.history()?, sys.tau)
}

fn design_report(ctx: &Ctx, inputs: &DesignInputs, cert: Option<&StabilityCertificate>, source: &str) -> Result<(Value, u8), Failure> {
    let sys = ctx.cfg.system()?;
    let op = ctx.cfg.operator()?;
    let st = run_design(sys, &op, inputs, cert);
    let mut v = to_value(&st);
    v["certificate_source"] = json!(source);
    if st.degenerate {
        v["note"] = json!("degenerate: Π = 0, reduced dynamics x(k+1) = 0 are trivially stable");
    }
    let code = match &st.failure {
        None => EXIT_OK,
        Some(f) => {
            eprintln!("design step ({}) failed: {}", f.step, f.message);
            match (&f.error, cert) {
                (Error::InvalidArgument(_), None) if f.step == 6 => EXIT_INFEASIBLE,
                (e, _) => exit_code(e).max(EXIT_VIOLATION),
            }
        }
    };
    Ok((v, code))
}

fn design(ctx: &Ctx, certificate: Option<&Path>) -> Result<u8, Failure> {
    let inputs = ctx.cfg.design()?;
    ctx.cfg.system()?;
    let (cert, source) = match certificate {
        Some(p) => (Some(read_json::<StabilityCertificate>(p)?), p.display().to_string()),
        None => match solve_certificate(ctx) {
            Ok(c) => (Some(c), "solver".to_string()),
            Err(e @ Error::Config(_)) => return Err(e.into()),
            Err(e) => {
                eprintln!("no certificate: {e}");
                (None, "none".to_string())
            }
        },
    };
    let (v, code) = design_report(ctx, &inputs, cert.as_ref(), &source)?;
    emit(ctx, "design.json", &v)?;
    Ok(code)
}

/// The designer-chosen fields of a `design` output file.
#[derive(Deserialize)]
struct DesignRef {
    r0: f64,
    r_d0: f64,
    rho_max: f64,
    k: RMatrix,
    phi: f64,
    rho: f64,
    s0_norm: f64,
}

fn certify(ctx: &Ctx, design_path: Option<&Path>) -> Result<u8, Failure> {
    let sys = ctx.cfg.system()?;
    let def = deform(sys, &ctx.cfg.operator()?)?;
    let prob = ctx.cfg.lmi_problem(&def)?;
    let cert = minimize_gamma(&prob, ctx.cfg.lmi.gamma_hi)?.with_history(&ctx.cfg.history()?, sys.tau)?;
    let top = cert.validate(&prob)?;
    let sufficient = feasibility_sufficient(&prob, SUFFICIENT_EPSILON, cert.gamma)?;
    let mut report = json!({
        "certificate": cert,
        "validated_max_eig": top,
        "sufficient_condition": {"epsilon": SUFFICIENT_EPSILON, "sigma_max_f": sufficient.sigma_max_f, "ok": sufficient.ok},
    });
    if cert.v0 == 0.0 {
        report["l2_gain"] = json!(cert.effective_gain);
    }
    let mut code = EXIT_OK;
    if let Some(p) = design_path {
        let d: DesignRef = read_json(p)?;
        let inputs = DesignInputs {
            r0: d.r0,
            r_d0: d.r_d0,
            rho_max: d.rho_max,
            k: d.k,
            phi: d.phi,
            rho: d.rho,
            s0_norm: Some(d.s0_norm),
        };
        let (v, c) = design_report(ctx, &inputs, Some(&cert), "certify")?;
        report["design"] = v;
        code = c;
    }
    if let Some(dir) = &ctx.out {
        write_file(dir, "certificate.json", &(serde_json::to_string_pretty(&cert).expect("json") + "\n"))?;
    }
    emit(ctx, "certify.json", &report)?;
    Ok(code)
}

fn spectral(ctx: &Ctx) -> Result<u8, Failure> {
    let sys = ctx.cfg.system()?;
    let def = deform(sys, &ctx.cfg.operator()?)?;
    let form = build_companion(&def.a_bar, &def.a_dbar, sys.tau)?;
    emit(ctx, "spectrum.json", &to_value(&spectrum_report(&form)?))?;
    Ok(EXIT_OK)
}

fn simulate_cmd(ctx: &Ctx, certificate: Option<&Path>) -> Result<u8, Failure> {
    let sys = ctx.cfg.system()?;
    let spec = ctx.cfg.sim()?;
    let design = ctx.cfg.design()?;
    let def = deform(sys, &ctx.cfg.operator()?)?;
    let cert = match certificate {
        Some(p) => Some(read_json::<StabilityCertificate>(p)?),
        None => solve_certificate(ctx).ok(),
    };
    let traj = simulate(sys, &def, &design, cert.as_ref(), spec, ctx.seed)?;
    let summary = summarize(&traj, design.phi, cert.as_ref(), &def)?;
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let csv = write_file(&dir, "trajectory.csv", &traj.to_csv())?;
    let mut v = to_value(&summary);
    v["csv"] = json!(csv.display().to_string());
    v["seed"] = json!(ctx.seed);
    write_file(&dir, "summary.json", &(serde_json::to_string_pretty(&v).expect("json") + "\n"))?;
    println!("{}", csv.display());
    Ok(EXIT_OK)
}
