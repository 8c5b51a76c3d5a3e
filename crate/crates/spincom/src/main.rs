//! Command-line front end: single-point evaluations, parameter sweeps,
//! and a quick self-consistency check.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use spincom::aeromech::{
    air_pressure, equilibrium_displacement, hamaker_constant, intermolecular_force, spin_limits,
    Equilibrium, SpinLimits, TaperGeometry,
};
use spincom::dynamics::{build_drift, gaussian_state, stability, StabilityReport};
use spincom::entanglement::entangle;
use spincom::harness::{
    chi_map, emit_chi_csv, emit_csv, emit_json, emit_to_path, preset, run_sweep, OutputFormat,
    Scenario, SweepSpec, WORKERS_ENV,
};
use spincom::optics::{steady_state, DriveConfig, SteadyState};
use spincom::params::{derive_constants, DerivedConstants, SystemParams};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "spincom",
    version,
    about = "Steady states, stability, and stationary entanglement of a spinning \
             whispering-gallery optomechanical resonator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the classical working point for one drive setting.
    Steady(PointArgs),
    /// Report both stability verdicts at one drive setting.
    Stability(PointArgs),
    /// Compute the stationary covariance and its log negativity.
    Entangle(PointArgs),
    /// Evaluate taper aerodynamics and rotation-speed limits.
    Aero(PointArgs),
    /// Run a parameter sweep from a preset or a JSON spec file.
    Sweep(SweepArgs),
    /// Run quick internal consistency checks and exit.
    Selftest,
}

#[derive(Args)]
struct PointArgs {
    /// JSON config file with optional `params`, `drive`, `geometry` blocks.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one value by path, e.g. --set drive.power=25mW
    /// or --set drive.rotation=ccw. May be repeated.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Built-in sweep name (fig2, fig3_detuning, fig3f_chi, figS1,
    /// figS2_stability, figS3_thermal, figS4_q).
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON sweep spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also reduce the sweep to the per-(backscattering, rotation) revival
    /// map and write it as CSV (requires a revival-style sweep).
    #[arg(long)]
    chi_out: Option<PathBuf>,
    /// Override a fixed value in the spec, e.g. --set params.backscattering=0.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
}

/// On-disk single-point configuration.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    params: Option<SystemParams>,
    drive: Option<DriveConfig>,
    geometry: Option<TaperGeometry>,
}

enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn numeric_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn load_scenario(args: &PointArgs) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::base();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("reading {}: {e}", path.display())))?;
        let file: FileConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("parsing {}: {e}", path.display())))?;
        if let Some(p) = file.params {
            scenario.params = p;
        }
        if let Some(d) = file.drive {
            scenario.drive = d;
        }
        if let Some(g) = file.geometry {
            scenario.geometry = g;
        }
    }
    apply_sets(&mut scenario, &args.sets)?;
    Ok(scenario)
}

fn apply_sets(scenario: &mut Scenario, sets: &[String]) -> Result<(), CliError> {
    for pair in sets {
        let (path, value) = pair
            .split_once('=')
            .ok_or_else(|| config_err(format!("--set needs PATH=VALUE, got '{pair}'")))?;
        if path.trim() == "drive.input_port" {
            // single-point commands do honor an explicit port
            scenario.drive.input_port = match value.trim().to_ascii_lowercase().as_str() {
                "left" => spincom::optics::InputPort::Left,
                "right" => spincom::optics::InputPort::Right,
                other => {
                    return Err(config_err(format!(
                        "drive.input_port: expected left|right, got '{other}'"
                    )))
                }
            };
            continue;
        }
        scenario
            .apply_text(path.trim(), value.trim())
            .map_err(config_err)?;
    }
    Ok(())
}

fn resolved(scenario: &Scenario) -> Scenario {
    // materialize a pending signed-rotation request for the configured port
    scenario.with_direction(scenario.drive.input_port)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).map_err(config_err)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        // closed pipe is a normal end of output, not a failure
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(config_err),
    }
}

#[derive(Serialize)]
struct SteadyOutput {
    derived: DerivedConstants,
    steady: SteadyState,
}

fn cmd_steady(args: &PointArgs) -> Result<(), CliError> {
    let scenario = resolved(&load_scenario(args)?);
    let derived = derive_constants(&scenario.params).map_err(config_err)?;
    let steady = steady_state(&scenario.params, &derived, &scenario.drive)
        .map_err(numeric_err)?;
    print_json(&SteadyOutput { derived, steady })
}

#[derive(Serialize)]
struct StabilityOutput {
    report: StabilityReport,
    /// Operational verdict: eigenvalues clear the relative margin used by
    /// the covariance solver.
    operational_stable: bool,
}

fn cmd_stability(args: &PointArgs) -> Result<(), CliError> {
    let scenario = resolved(&load_scenario(args)?);
    let derived = derive_constants(&scenario.params).map_err(config_err)?;
    let steady = steady_state(&scenario.params, &derived, &scenario.drive)
        .map_err(numeric_err)?;
    let a = build_drift(&scenario.params, &derived, &steady);
    let report = stability(&a, &scenario.params, &derived, &steady);
    let operational_stable = report.margin_stable(derived.kappa);
    print_json(&StabilityOutput {
        report,
        operational_stable,
    })
}

#[derive(Serialize)]
struct EntangleOutput {
    stable: bool,
    log_negativity: f64,
    nu_minus: f64,
    lyapunov_residual: f64,
    min_symplectic: f64,
    n_driven: f64,
    n_reflected: f64,
    q_s: f64,
}

fn cmd_entangle(args: &PointArgs) -> Result<(), CliError> {
    let scenario = resolved(&load_scenario(args)?);
    let derived = derive_constants(&scenario.params).map_err(config_err)?;
    let steady = steady_state(&scenario.params, &derived, &scenario.drive)
        .map_err(numeric_err)?;
    let state = gaussian_state(&scenario.params, &derived, &steady).map_err(numeric_err)?;
    let score = entangle(&state.covariance).map_err(numeric_err)?;
    print_json(&EntangleOutput {
        stable: state.stable,
        log_negativity: score.log_negativity,
        nu_minus: score.nu_minus,
        lyapunov_residual: state.residual,
        min_symplectic: state.min_symplectic,
        n_driven: steady.n_driven,
        n_reflected: steady.n_reflected,
        q_s: steady.q_s,
    })
}

#[derive(Serialize)]
struct AeroOutput {
    air_drag: f64,
    hamaker: f64,
    intermolecular: f64,
    total_force: f64,
    equilibrium: Equilibrium,
    spin_limits: SpinLimits,
    spin_limit_exceeded: bool,
}

fn cmd_aero(args: &PointArgs) -> Result<(), CliError> {
    let scenario = resolved(&load_scenario(args)?);
    let g = &scenario.geometry;
    g.validate().map_err(config_err)?;
    let p = &scenario.params;
    let drag = air_pressure(g, p.radius, scenario.drive.omega.abs());
    let hamaker = hamaker_constant(g, p.t_bath);
    let attraction = intermolecular_force(g, p.radius, hamaker, g.separation);
    let limits = spin_limits(g, p.radius);
    let equilibrium = equilibrium_displacement(drag, g).map_err(numeric_err)?;
    print_json(&AeroOutput {
        air_drag: drag,
        hamaker,
        intermolecular: attraction,
        total_force: drag + attraction,
        equilibrium,
        spin_limits: limits,
        spin_limit_exceeded: scenario.drive.omega.abs() > limits.omega_max,
    })
}

fn load_sweep_spec(args: &SweepArgs) -> Result<SweepSpec, CliError> {
    let mut spec = match (&args.preset, &args.spec) {
        (Some(name), None) => preset(name).map_err(config_err)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| config_err(format!("parsing {}: {e}", path.display())))?
        }
        _ => {
            return Err(config_err(
                "sweep needs exactly one of --preset <name> or --spec <file>",
            ))
        }
    };
    for pair in &args.sets {
        let (path, value) = pair
            .split_once('=')
            .ok_or_else(|| config_err(format!("--set needs PATH=VALUE, got '{pair}'")))?;
        spec.fixed.insert(
            path.trim().to_string(),
            spincom::harness::OverrideValue::Text(value.trim().to_string()),
        );
    }
    spec.validate().map_err(config_err)?;
    Ok(spec)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let spec = load_sweep_spec(args)?;
    let table = run_sweep(&spec).map_err(config_err)?;
    let exceeded = table
        .records
        .iter()
        .filter(|r| r.spin_limit_exceeded == Some(true))
        .count();
    if exceeded > 0 && !spec.enforce_spin_limit {
        eprintln!(
            "warning: {exceeded} record(s) exceed the aeromechanical rotation ceiling"
        );
    }
    match &args.out {
        Some(path) => emit_to_path(&table, args.format, path).map_err(config_err)?,
        None => {
            let stdout = std::io::stdout().lock();
            let emitted = match args.format {
                OutputFormat::Csv => emit_csv(&table, stdout),
                OutputFormat::Json => emit_json(&table, stdout),
            };
            match emitted {
                // the reader stopped consuming (e.g. piped into head):
                // end quietly like any other stream-producing tool
                Err(e) if e.is_broken_pipe() => return Ok(()),
                other => other.map_err(config_err)?,
            }
        }
    }
    if let Some(path) = &args.chi_out {
        let records = chi_map(&table).map_err(config_err)?;
        let file = std::fs::File::create(path)
            .map_err(|e| config_err(format!("writing {}: {e}", path.display())))?;
        emit_chi_csv(&records, std::io::BufWriter::new(file)).map_err(config_err)?;
    }
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    use spincom::oracles::{ppt_nu_minus, tmsv_covariance};

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let p = SystemParams::default();
    let d = derive_constants(&p).map_err(config_err)?;
    check(
        "optical decay rate near 38 MHz",
        (d.kappa / 3.80e7 - 1.0).abs() < 0.01,
    );
    check(
        "zero-point motion near 0.41 fm",
        (d.x_zp / 0.41e-15 - 1.0).abs() < 0.02,
    );
    check(
        "single-photon coupling near 452.1",
        (d.g0 / 452.1 - 1.0).abs() < 0.01,
    );
    check(
        "thermal occupation near 269.4 at 130 mK",
        (d.n_thermal / 269.4 - 1.0).abs() < 0.005,
    );
    check(
        "mechanical quality factor near 1.21e4",
        (d.q_m / 1.21e4 - 1.0).abs() < 0.01,
    );

    let drive = DriveConfig::default();
    let steady = steady_state(&p, &d, &drive).map_err(numeric_err)?;
    check("working point converges", steady.converged);
    check(
        "working point residual below 1e-10",
        steady.residual <= 1e-10,
    );
    let state = gaussian_state(&p, &d, &steady).map_err(numeric_err)?;
    check(
        "stationary covariance residual below 1e-8",
        state.residual <= 1e-8,
    );
    check(
        "covariance is physical",
        state.min_symplectic >= 0.5 - 1e-9,
    );
    let a = build_drift(&p, &d, &steady);
    let report = stability(&a, &p, &d, &steady);
    check(
        "stability routes agree at the default point",
        report.routes_agree(),
    );
    let squeezed = tmsv_covariance(0.5);
    check(
        "squeezed-state benchmark nu = exp(-1)/2",
        (ppt_nu_minus(&squeezed) / (0.5 * (-1.0_f64).exp()) - 1.0).abs() < 1e-10,
    );

    if failures == 0 {
        println!("selftest passed ({})", workers_note());
        Ok(())
    } else {
        Err(CliError::Numeric(format!("{failures} selftest check(s) failed")))
    }
}

fn workers_note() -> String {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => format!("{WORKERS_ENV}={v}"),
        Err(_) => format!("{WORKERS_ENV} unset"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Steady(args) => cmd_steady(args),
        Command::Stability(args) => cmd_stability(args),
        Command::Entangle(args) => cmd_entangle(args),
        Command::Aero(args) => cmd_aero(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
