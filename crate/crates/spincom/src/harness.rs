//! Declarative parameter sweeps over the full pipeline, figure-style
//! presets, and CSV/JSON emission.
//!
//! A sweep is a Cartesian grid over parameter paths, evaluated for one or
//! both drive directions. Evaluation is embarrassingly parallel; rows are
//! emitted in lexicographic axis order (first axis slowest) so reruns are
//! byte-identical regardless of the worker count.

use std::collections::BTreeMap;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aeromech::{
    air_pressure, equilibrium_displacement, elastic_restoring_slope, hamaker_constant,
    intermolecular_force, spin_limits, TaperGeometry,
};
use crate::dynamics::{
    build_diffusion, build_drift, lyapunov_residual, solve_lyapunov, stability,
    symplectic_eigenvalues, REL_MARGIN,
};
use crate::entanglement::{entangle, revival_factor, DetuningScan};
use crate::optics::{steady_state, DriveConfig, InputPort, RotationSense};
use crate::params::{derive_constants, parse_quantity, SystemParams};

/// Environment variable overriding the sweep worker count.
pub const WORKERS_ENV: &str = "SPINCOM_WORKERS";

pub const PRESET_NAMES: [&str; 7] = [
    "fig2",
    "fig3_detuning",
    "fig3f_chi",
    "figS1",
    "figS2_stability",
    "figS3_thermal",
    "figS4_q",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown preset '{name}'; valid presets: {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("unknown parameter path '{0}'")]
    UnknownPath(String),
    #[error("bad value for '{path}': {reason}")]
    BadValue { path: String, reason: String },
    #[error("serialization failed: {message}")]
    Emit {
        message: String,
        /// Set when the failure came from the output stream itself.
        io_kind: Option<io::ErrorKind>,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("chi map: {0}")]
    ChiMap(String),
}

impl HarnessError {
    /// True when the failure was the output stream closing early, e.g. the
    /// reader side of a pipe exiting. Callers streaming to stdout treat this
    /// as a normal end of output rather than an error.
    pub fn is_broken_pipe(&self) -> bool {
        match self {
            HarnessError::Emit { io_kind, .. } => *io_kind == Some(io::ErrorKind::BrokenPipe),
            HarnessError::Io { source, .. } => source.kind() == io::ErrorKind::BrokenPipe,
            _ => false,
        }
    }
}

fn csv_emit_err(e: csv::Error) -> HarnessError {
    let io_kind = match e.kind() {
        csv::ErrorKind::Io(io) => Some(io.kind()),
        _ => None,
    };
    HarnessError::Emit {
        message: e.to_string(),
        io_kind,
    }
}

fn json_emit_err(e: serde_json::Error) -> HarnessError {
    HarnessError::Emit {
        io_kind: e.io_error_kind(),
        message: e.to_string(),
    }
}

fn flush_emit_err(e: io::Error) -> HarnessError {
    HarnessError::Emit {
        io_kind: Some(e.kind()),
        message: e.to_string(),
    }
}

/// Grid spacing of one sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// One sweep axis: a parameter path plus its sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.count == 0 {
            return Err(HarnessError::InvalidSpec(format!(
                "axis '{}' has an empty grid",
                self.path
            )));
        }
        if !(self.min <= self.max) {
            return Err(HarnessError::InvalidSpec(format!(
                "axis '{}' needs min <= max",
                self.path
            )));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(HarnessError::InvalidSpec(format!(
                "axis '{}' uses log spacing but min <= 0",
                self.path
            )));
        }
        Ok(())
    }

    /// Sample values, inclusive of both ends.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / n;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => {
                        (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp()
                    }
                }
            })
            .collect()
    }
}

/// A fixed override: plain number, or text with an optional unit suffix
/// (numeric paths) / an enum word (e.g. `drive.rotation: "ccw"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OverrideValue {
    Number(f64),
    Text(String),
}

/// Column groups a sweep can compute and emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputGroup {
    /// Working point: photon numbers, displacement, couplings, convergence.
    Optics,
    /// Both stability verdicts and the normalized stability determinants.
    Stability,
    /// Logarithmic negativity and covariance diagnostics.
    Entanglement,
    /// Taper aerodynamics and intermolecular forces.
    Aero,
    /// Ratio of static optomechanical displacement to taper deflection.
    Breathing,
}

fn default_directions() -> Vec<InputPort> {
    vec![InputPort::Left, InputPort::Right]
}

fn default_outputs() -> Vec<OutputGroup> {
    vec![
        OutputGroup::Optics,
        OutputGroup::Stability,
        OutputGroup::Entanglement,
    ]
}

/// Declarative description of a parameter sweep. Fully deterministic:
/// no seeds, no clocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Label recorded in output metadata.
    #[serde(default)]
    pub name: String,
    pub axes: Vec<Axis>,
    /// Parameter overrides applied before the axes.
    #[serde(default)]
    pub fixed: BTreeMap<String, OverrideValue>,
    /// Drive directions evaluated at every grid point.
    #[serde(default = "default_directions")]
    pub directions: Vec<InputPort>,
    /// Which column groups to compute.
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputGroup>,
    /// Reject points whose rotation speed exceeds the aeromechanical
    /// ceiling instead of only flagging them.
    #[serde(default)]
    pub enforce_spin_limit: bool,
    /// Free-form assumptions recorded in output metadata.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.axes.is_empty() {
            return Err(HarnessError::InvalidSpec("no axes given".into()));
        }
        for axis in &self.axes {
            axis.validate()?;
            // resolve the path once against a scratch scenario
            let probe = if axis.spacing == Spacing::Log { axis.min } else { axis.min.max(1e-30) };
            Scenario::base().apply_number(&axis.path, probe)?;
        }
        if self.directions.is_empty() {
            return Err(HarnessError::InvalidSpec("no drive directions".into()));
        }
        if self.outputs.is_empty() {
            return Err(HarnessError::InvalidSpec("no output groups".into()));
        }
        Scenario::base().apply_fixed(&self.fixed)?;
        Ok(())
    }

    fn output_set(&self) -> OutputSet {
        OutputSet::new(&self.outputs)
    }

    /// Number of grid points (excluding the direction factor).
    pub fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OutputSet {
    optics: bool,
    stability: bool,
    entanglement: bool,
    aero: bool,
    breathing: bool,
}

impl OutputSet {
    fn new(groups: &[OutputGroup]) -> Self {
        let has = |g: OutputGroup| groups.contains(&g);
        Self {
            optics: has(OutputGroup::Optics),
            stability: has(OutputGroup::Stability),
            entanglement: has(OutputGroup::Entanglement),
            aero: has(OutputGroup::Aero),
            breathing: has(OutputGroup::Breathing),
        }
    }

    fn needs_optics(&self) -> bool {
        self.optics || self.stability || self.entanglement || self.breathing
    }

    fn needs_aero(&self) -> bool {
        self.aero || self.breathing
    }
}

/// Fully resolved parameter point ready for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub drive: DriveConfig,
    pub geometry: TaperGeometry,
    /// Signed rotation requested through the `drive.omega_r` path; resolved
    /// into (omega, rotation sense) once the input port is fixed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_rotation: Option<f64>,
}

impl Scenario {
    pub fn base() -> Self {
        Self {
            params: SystemParams::default(),
            drive: DriveConfig::default(),
            geometry: TaperGeometry::default(),
            signed_rotation: None,
        }
    }

    /// Sets one numeric parameter by path.
    pub fn apply_number(&mut self, path: &str, v: f64) -> Result<(), HarnessError> {
        match path {
            "params.refractive_index" => self.params.refractive_index = v,
            "params.index_dispersion" => self.params.index_dispersion = v,
            "params.mass" => self.params.mass = v,
            "params.radius" => self.params.radius = v,
            "params.wavelength" => self.params.wavelength = v,
            "params.optical_q" => self.params.optical_q = v,
            "params.omega_m" => self.params.omega_m = v,
            "params.gamma_m" => self.params.gamma_m = v,
            "params.t_bath" => self.params.t_bath = v,
            "params.backscattering" => self.params.backscattering = v,
            "drive.power" => self.drive.power = v,
            "drive.delta_c" => self.drive.delta_c = v,
            "drive.omega" => self.drive.omega = v,
            "drive.omega_r" => self.signed_rotation = Some(v),
            "geometry.taper_radius" => self.geometry.taper_radius = v,
            "geometry.contact_length" => self.geometry.contact_length = v,
            "geometry.rest_gap" => self.geometry.rest_gap = v,
            "geometry.separation" => self.geometry.separation = v,
            "geometry.youngs_modulus" => self.geometry.youngs_modulus = v,
            "geometry.elastic_limit" => self.geometry.elastic_limit = v,
            "geometry.air_viscosity" => self.geometry.air_viscosity = v,
            _ => return Err(HarnessError::UnknownPath(path.to_string())),
        }
        Ok(())
    }

    /// Sets one parameter from text: enum words for the enum paths, a
    /// number with optional unit suffix otherwise.
    pub fn apply_text(&mut self, path: &str, raw: &str) -> Result<(), HarnessError> {
        match path {
            "drive.rotation" => {
                self.drive.rotation = match raw.trim().to_ascii_lowercase().as_str() {
                    "cw" => RotationSense::Cw,
                    "ccw" => RotationSense::Ccw,
                    other => {
                        return Err(HarnessError::BadValue {
                            path: path.to_string(),
                            reason: format!("expected cw|ccw, got '{other}'"),
                        })
                    }
                };
                Ok(())
            }
            "drive.input_port" => Err(HarnessError::BadValue {
                path: path.to_string(),
                reason: "input port is controlled by the sweep's `directions` field".into(),
            }),
            _ => {
                let v = parse_quantity(raw).map_err(|e| HarnessError::BadValue {
                    path: path.to_string(),
                    reason: e.to_string(),
                })?;
                self.apply_number(path, v)
            }
        }
    }

    pub fn apply_fixed(
        &mut self,
        fixed: &BTreeMap<String, OverrideValue>,
    ) -> Result<(), HarnessError> {
        for (path, value) in fixed {
            match value {
                OverrideValue::Number(v) => self.apply_number(path, *v)?,
                OverrideValue::Text(s) => self.apply_text(path, s)?,
            }
        }
        Ok(())
    }

    /// Pins the drive direction, resolving any pending signed-rotation
    /// request into a magnitude plus rotation sense.
    pub fn with_direction(&self, port: InputPort) -> Scenario {
        let mut out = self.clone();
        out.drive.input_port = port;
        if let Some(v) = self.signed_rotation {
            out.drive.omega = v.abs();
            out.drive.rotation = match (port, v >= 0.0) {
                (InputPort::Left, true) | (InputPort::Right, false) => RotationSense::Cw,
                (InputPort::Left, false) | (InputPort::Right, true) => RotationSense::Ccw,
            };
        }
        out
    }
}

/// One evaluated (grid point, direction) pair. Quantities outside the
/// requested output groups, or unavailable at the point (e.g. entanglement
/// of an unstable state), stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// Axis path -> value at this point.
    pub point: BTreeMap<String, f64>,
    pub direction: InputPort,
    // working point
    pub delta_c_over_omega_m: Option<f64>,
    pub omega_r: Option<f64>,
    pub sagnac_shift: Option<f64>,
    pub n_driven: Option<f64>,
    pub n_reflected: Option<f64>,
    pub q_s: Option<f64>,
    pub coupling_driven: Option<f64>,
    pub coupling_reflected: Option<f64>,
    pub steady_iterations: Option<u64>,
    pub steady_residual: Option<f64>,
    // stability
    pub stable: Option<bool>,
    pub rh_stable: Option<bool>,
    pub eig_stable: Option<bool>,
    pub max_real_eig: Option<f64>,
    pub theta5: Option<f64>,
    pub theta6: Option<f64>,
    // entanglement
    pub log_negativity: Option<f64>,
    pub nu_minus: Option<f64>,
    pub lyapunov_residual: Option<f64>,
    pub min_symplectic: Option<f64>,
    // aeromechanics
    pub air_drag: Option<f64>,
    pub taper_displacement: Option<f64>,
    pub strain: Option<f64>,
    pub intermolecular: Option<f64>,
    pub total_force: Option<f64>,
    pub restoring_slope: Option<f64>,
    pub breathing: Option<f64>,
    pub spin_limit_exceeded: Option<bool>,
    /// First error hit while evaluating this record, if any.
    pub error: Option<String>,
}

impl ResultRecord {
    fn new(point: BTreeMap<String, f64>, direction: InputPort) -> Self {
        Self {
            point,
            direction,
            delta_c_over_omega_m: None,
            omega_r: None,
            sagnac_shift: None,
            n_driven: None,
            n_reflected: None,
            q_s: None,
            coupling_driven: None,
            coupling_reflected: None,
            steady_iterations: None,
            steady_residual: None,
            stable: None,
            rh_stable: None,
            eig_stable: None,
            max_real_eig: None,
            theta5: None,
            theta6: None,
            log_negativity: None,
            nu_minus: None,
            lyapunov_residual: None,
            min_symplectic: None,
            air_drag: None,
            taper_displacement: None,
            strain: None,
            intermolecular: None,
            total_force: None,
            restoring_slope: None,
            breathing: None,
            spin_limit_exceeded: None,
            error: None,
        }
    }

    fn fail(&mut self, message: impl Into<String>) {
        if self.error.is_none() {
            self.error = Some(message.into());
        }
    }
}

/// Sweep output: provenance metadata plus one record per
/// (grid point, direction), in deterministic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub metadata: Metadata,
    pub records: Vec<ResultRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub artifact: String,
    pub version: String,
    pub spec: SweepSpec,
    /// Baseline scenario after fixed overrides, before axis values.
    pub base: Scenario,
    /// Grid values per axis, in axis order.
    pub axis_values: Vec<Vec<f64>>,
}

/// Evaluates one fully resolved scenario.
fn evaluate(scenario: &Scenario, outs: &OutputSet, enforce_limit: bool, mut rec: ResultRecord) -> ResultRecord {
    let p = &scenario.params;
    let derived = match derive_constants(p) {
        Ok(d) => d,
        Err(e) => {
            rec.fail(e.to_string());
            return rec;
        }
    };

    // aerodynamics first: the spin-limit flag and the taper deflection do
    // not depend on the optical solve
    let mut deflection = None;
    if outs.needs_aero() {
        if let Err(e) = scenario.geometry.validate() {
            rec.fail(e.to_string());
            return rec;
        }
        let g = &scenario.geometry;
        let drag = air_pressure(g, p.radius, scenario.drive.omega.abs());
        let hamaker = hamaker_constant(g, p.t_bath);
        let attraction = intermolecular_force(g, p.radius, hamaker, g.separation);
        let limits = spin_limits(g, p.radius);
        let exceeded = scenario.drive.omega.abs() > limits.omega_max;
        rec.spin_limit_exceeded = Some(exceeded);
        match equilibrium_displacement(drag, g) {
            Ok(eq) => {
                deflection = Some(eq.displacement);
                if outs.aero {
                    rec.taper_displacement = Some(eq.displacement);
                    rec.strain = Some(eq.strain);
                    rec.restoring_slope =
                        elastic_restoring_slope(g, eq.displacement).ok();
                }
            }
            Err(e) => rec.fail(e.to_string()),
        }
        if outs.aero {
            rec.air_drag = Some(drag);
            rec.intermolecular = Some(attraction);
            rec.total_force = Some(drag + attraction);
        }
        if enforce_limit && exceeded {
            rec.fail(format!(
                "rotation speed {} rad/s exceeds the aeromechanical ceiling {} rad/s",
                scenario.drive.omega,
                limits.omega_max
            ));
            return rec;
        }
    }

    if !outs.needs_optics() {
        return rec;
    }
    if let Err(e) = scenario.drive.validate() {
        rec.fail(e.to_string());
        return rec;
    }
    let steady = match steady_state(p, &derived, &scenario.drive) {
        Ok(s) => s,
        Err(e) => {
            rec.fail(e.to_string());
            return rec;
        }
    };
    rec.delta_c_over_omega_m = Some(scenario.drive.delta_c / p.omega_m);
    if outs.optics {
        rec.omega_r = Some(scenario.drive.signed_rotation());
        rec.sagnac_shift = Some(steady.delta_f);
        rec.n_driven = Some(steady.n_driven);
        rec.n_reflected = Some(steady.n_reflected);
        rec.q_s = Some(steady.q_s);
        rec.coupling_driven = Some(steady.g_driven.norm() / p.omega_m);
        rec.coupling_reflected = Some(steady.g_reflected.norm() / p.omega_m);
        rec.steady_iterations = Some(steady.iterations as u64);
        rec.steady_residual = Some(steady.residual);
    }
    if outs.breathing {
        rec.breathing = match deflection {
            Some(d) if d > 0.0 => Some(steady.q_s * derived.x_zp / d),
            _ => None,
        };
    }

    if !(outs.stability || outs.entanglement) {
        return rec;
    }
    let a = build_drift(p, &derived, &steady);
    let report = stability(&a, p, &derived, &steady);
    let operational = report.margin_stable(derived.kappa);
    rec.stable = Some(operational);
    if outs.stability {
        rec.rh_stable = Some(report.rh_stable);
        rec.eig_stable = Some(report.eig_stable);
        rec.max_real_eig = Some(report.max_real_eig);
        rec.theta5 = Some(report.theta5);
        rec.theta6 = Some(report.theta6);
    }

    if outs.entanglement && operational {
        let noise = build_diffusion(p, &derived);
        match solve_lyapunov(&a, &noise, REL_MARGIN * derived.kappa) {
            Ok(v) => {
                rec.lyapunov_residual = Some(lyapunov_residual(&a, &v, &noise));
                rec.min_symplectic = Some(symplectic_eigenvalues(&v)[0]);
                match entangle(&v) {
                    Ok(score) => {
                        rec.log_negativity = Some(score.log_negativity);
                        rec.nu_minus = Some(score.nu_minus);
                    }
                    Err(e) => rec.fail(e.to_string()),
                }
            }
            Err(e) => rec.fail(e.to_string()),
        }
    }
    rec
}

fn decode_index(mut idx: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &size) in out.iter_mut().zip(sizes).rev() {
        *slot = idx % size;
        idx /= size;
    }
    out
}

/// Runs the sweep in parallel and returns records in deterministic
/// lexicographic order (first axis slowest, directions innermost).
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, HarnessError> {
    spec.validate()?;
    let mut base = Scenario::base();
    base.apply_fixed(&spec.fixed)?;
    let axis_values: Vec<Vec<f64>> = spec.axes.iter().map(Axis::values).collect();
    let sizes: Vec<usize> = spec.axes.iter().map(|a| a.count).collect();
    let total = spec.grid_len();
    let outs = spec.output_set();

    let work = || -> Vec<ResultRecord> {
        (0..total)
            .into_par_iter()
            .flat_map_iter(|idx| {
                let coords = decode_index(idx, &sizes);
                let mut scenario = base.clone();
                let mut point = BTreeMap::new();
                let mut apply_error = None;
                for (axis, (&ci, values)) in
                    spec.axes.iter().zip(coords.iter().zip(&axis_values))
                {
                    let v = values[ci];
                    point.insert(axis.path.clone(), v);
                    if apply_error.is_none() {
                        if let Err(e) = scenario.apply_number(&axis.path, v) {
                            apply_error = Some(e.to_string());
                        }
                    }
                }
                let spec_dirs = spec.directions.clone();
                let outs = outs;
                let enforce = spec.enforce_spin_limit;
                spec_dirs.into_iter().map(move |dir| {
                    let rec = ResultRecord::new(point.clone(), dir);
                    match &apply_error {
                        Some(e) => {
                            let mut rec = rec;
                            rec.fail(e.clone());
                            rec
                        }
                        None => evaluate(&scenario.with_direction(dir), &outs, enforce, rec),
                    }
                })
            })
            .collect()
    };

    let records = match workers_from_env() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::InvalidSpec(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    Ok(SweepTable {
        metadata: Metadata {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
            base,
            axis_values,
        },
        records,
    })
}

fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Returns the named figure-style sweep.
pub fn preset(name: &str) -> Result<SweepSpec, HarnessError> {
    let device = SystemParams::default();
    let kappa = derive_constants(&device)
        .expect("default parameters are valid")
        .kappa;
    let wm = device.omega_m;
    let num = OverrideValue::Number;
    let lin = |path: &str, min: f64, max: f64, count: usize| Axis {
        path: path.to_string(),
        min,
        max,
        count,
        spacing: Spacing::Linear,
    };
    let spec = match name {
        "fig2" => SweepSpec {
            name: name.into(),
            axes: vec![lin("drive.delta_c", 0.0, 2.0 * wm, 401)],
            fixed: BTreeMap::from([
                ("drive.omega".to_string(), num(8e3)),
                ("params.backscattering".to_string(), num(0.0)),
            ]),
            directions: vec![InputPort::Left, InputPort::Right],
            outputs: default_outputs(),
            enforce_spin_limit: false,
            notes: vec![
                "detuning scan of the backscattering-free spinning device for both \
                 drive directions"
                    .into(),
            ],
        },
        "fig3_detuning" => SweepSpec {
            name: name.into(),
            axes: vec![
                lin("drive.omega", 0.0, 23e3, 2),
                lin("drive.delta_c", 0.0, 4.5 * wm, 401),
            ],
            fixed: BTreeMap::from([(
                "params.backscattering".to_string(),
                num(kappa),
            )]),
            directions: vec![InputPort::Right],
            outputs: default_outputs(),
            enforce_spin_limit: false,
            notes: vec![
                "backscattering value not pinned by the figure; defaulted to kappa \
                 (override with params.backscattering)"
                    .into(),
                "right input chosen so the rotation-shifted resonance stays inside \
                 the detuning grid"
                    .into(),
            ],
        },
        "fig3f_chi" => SweepSpec {
            name: name.into(),
            axes: vec![
                lin("params.backscattering", 0.0, 2.0 * kappa, 41),
                lin("drive.omega", 0.0, 40e3, 41),
                lin("drive.delta_c", 0.0, 4.5 * wm, 151),
            ],
            fixed: BTreeMap::new(),
            directions: vec![InputPort::Right],
            outputs: vec![OutputGroup::Optics, OutputGroup::Entanglement],
            enforce_spin_limit: false,
            notes: vec![
                "revival map: maximize log negativity over the detuning axis per \
                 (backscattering, rotation) cell and normalize by the stationary \
                 uncoupled cell"
                    .into(),
            ],
        },
        "figS1" => SweepSpec {
            name: name.into(),
            axes: vec![
                lin("drive.omega", 1e3, 40e3, 40),
                lin("geometry.separation", 100e-9, 1000e-9, 37),
            ],
            fixed: BTreeMap::new(),
            directions: vec![InputPort::Left],
            outputs: vec![OutputGroup::Aero],
            enforce_spin_limit: false,
            notes: vec![
                "air viscosity assumed 1.81e-5 Pa s (ambient); absolute forces are \
                 order-of-magnitude only"
                    .into(),
            ],
        },
        "figS2_stability" => SweepSpec {
            name: name.into(),
            axes: vec![
                lin("drive.omega_r", -40e3, 40e3, 81),
                lin("drive.delta_c", 0.0, 2.0 * wm, 81),
            ],
            fixed: BTreeMap::from([(
                "params.backscattering".to_string(),
                num(2.0 * kappa),
            )]),
            directions: vec![InputPort::Left],
            outputs: vec![
                OutputGroup::Optics,
                OutputGroup::Stability,
                OutputGroup::Aero,
                OutputGroup::Breathing,
            ],
            enforce_spin_limit: false,
            notes: vec![
                "signed rotation axis: negative values spin the resonator against \
                 the drive direction"
                    .into(),
            ],
        },
        "figS3_thermal" => SweepSpec {
            name: name.into(),
            axes: vec![
                lin("params.t_bath", 25e-3, 700e-3, 28),
                lin("drive.delta_c", 0.0, 2.0 * wm, 81),
            ],
            fixed: BTreeMap::from([
                ("drive.omega".to_string(), num(8e3)),
                ("params.backscattering".to_string(), num(0.0)),
            ]),
            directions: vec![InputPort::Left, InputPort::Right],
            outputs: vec![OutputGroup::Optics, OutputGroup::Entanglement],
            enforce_spin_limit: false,
            notes: vec!["temperature robustness of the direction contrast".into()],
        },
        "figS4_q" => SweepSpec {
            name: name.into(),
            axes: vec![
                Axis {
                    path: "params.optical_q".to_string(),
                    min: 1e6,
                    max: 1e8,
                    count: 25,
                    spacing: Spacing::Log,
                },
                lin("drive.delta_c", 0.0, 2.0 * wm, 81),
            ],
            fixed: BTreeMap::from([
                ("drive.omega".to_string(), num(8e3)),
                ("params.backscattering".to_string(), num(0.0)),
            ]),
            directions: vec![InputPort::Left, InputPort::Right],
            outputs: vec![OutputGroup::Optics, OutputGroup::Entanglement],
            enforce_spin_limit: false,
            notes: vec!["optical-quality robustness of the direction contrast".into()],
        },
        _ => {
            return Err(HarnessError::UnknownPreset {
                name: name.to_string(),
            })
        }
    };
    Ok(spec)
}

// ---------------------------------------------------------------------------
// emission

/// Output file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn opt_b(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

fn opt_u(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

const AERO_COLS: [&str; 7] = [
    "air_drag",
    "taper_displacement",
    "strain",
    "intermolecular_force",
    "total_force",
    "restoring_slope",
    "spin_limit_exceeded",
];

fn aero_value(rec: &ResultRecord, col: &str) -> String {
    match col {
        "air_drag" => opt_f(rec.air_drag),
        "taper_displacement" => opt_f(rec.taper_displacement),
        "strain" => opt_f(rec.strain),
        "intermolecular_force" => opt_f(rec.intermolecular),
        "total_force" => opt_f(rec.total_force),
        "restoring_slope" => opt_f(rec.restoring_slope),
        "spin_limit_exceeded" => opt_b(rec.spin_limit_exceeded),
        _ => unreachable!("unknown aero column {col}"),
    }
}

fn per_direction_cols(outs: &OutputSet) -> Vec<&'static str> {
    let mut cols = Vec::new();
    if outs.optics {
        cols.extend([
            "omega_r",
            "sagnac_shift",
            "N",
            "N_refl",
            "q_s",
            "coupling",
            "coupling_refl",
            "steady_iterations",
            "steady_residual",
        ]);
    }
    if outs.stability || outs.entanglement {
        cols.push("stable");
    }
    if outs.stability {
        cols.extend(["rh_stable", "eig_stable", "max_real_eig", "theta5", "theta6"]);
    }
    if outs.entanglement {
        cols.extend(["E_N", "nu_minus", "lyapunov_residual", "min_symplectic"]);
    }
    if outs.breathing {
        cols.push("breathing");
    }
    cols.push("error");
    cols
}

fn per_direction_value(rec: &ResultRecord, col: &str) -> String {
    match col {
        "omega_r" => opt_f(rec.omega_r),
        "sagnac_shift" => opt_f(rec.sagnac_shift),
        "N" => opt_f(rec.n_driven),
        "N_refl" => opt_f(rec.n_reflected),
        "q_s" => opt_f(rec.q_s),
        "coupling" => opt_f(rec.coupling_driven),
        "coupling_refl" => opt_f(rec.coupling_reflected),
        "steady_iterations" => opt_u(rec.steady_iterations),
        "steady_residual" => opt_f(rec.steady_residual),
        "stable" => opt_b(rec.stable),
        "rh_stable" => opt_b(rec.rh_stable),
        "eig_stable" => opt_b(rec.eig_stable),
        "max_real_eig" => opt_f(rec.max_real_eig),
        "theta5" => opt_f(rec.theta5),
        "theta6" => opt_f(rec.theta6),
        "E_N" => opt_f(rec.log_negativity),
        "nu_minus" => opt_f(rec.nu_minus),
        "lyapunov_residual" => opt_f(rec.lyapunov_residual),
        "min_symplectic" => opt_f(rec.min_symplectic),
        "breathing" => opt_f(rec.breathing),
        "error" => rec.error.clone().unwrap_or_default(),
        _ => unreachable!("unknown per-direction column {col}"),
    }
}

fn direction_suffix(port: InputPort) -> &'static str {
    match port {
        InputPort::Left => "_left",
        InputPort::Right => "_right",
    }
}

/// Writes the table as CSV: one row per grid point, directions pivoted
/// into suffixed column blocks, floats with 17 significant digits.
pub fn emit_csv<W: io::Write>(table: &SweepTable, writer: W) -> Result<(), HarnessError> {
    let spec = &table.metadata.spec;
    let outs = spec.output_set();
    let ndir = spec.directions.len();
    let per_dir = per_direction_cols(&outs);
    let mut csv = csv::Writer::from_writer(writer);

    let mut header: Vec<String> = spec.axes.iter().map(|a| a.path.clone()).collect();
    if outs.needs_optics() {
        header.push("delta_c_over_omega_m".into());
    }
    if outs.aero {
        header.extend(AERO_COLS.iter().map(|c| c.to_string()));
    }
    for &dir in &spec.directions {
        let sfx = direction_suffix(dir);
        header.extend(per_dir.iter().map(|c| format!("{c}{sfx}")));
    }
    let want_delta_en = outs.entanglement && ndir == 2;
    if want_delta_en {
        header.push("delta_E_N".into());
    }
    csv.write_record(&header).map_err(csv_emit_err)?;

    for chunk in table.records.chunks(ndir.max(1)) {
        let lead = &chunk[0];
        let mut row: Vec<String> = spec
            .axes
            .iter()
            .map(|a| fmt_f(*lead.point.get(&a.path).expect("axis value present")))
            .collect();
        if outs.needs_optics() {
            row.push(opt_f(lead.delta_c_over_omega_m));
        }
        if outs.aero {
            row.extend(AERO_COLS.iter().map(|c| aero_value(lead, c)));
        }
        for rec in chunk {
            row.extend(per_dir.iter().map(|c| per_direction_value(rec, c)));
        }
        if want_delta_en {
            row.push(match (chunk[0].log_negativity, chunk[1].log_negativity) {
                (Some(a), Some(b)) => fmt_f(a - b),
                _ => String::new(),
            });
        }
        csv.write_record(&row).map_err(csv_emit_err)?;
    }
    csv.flush().map_err(flush_emit_err)
}

/// Writes the table as a single JSON document with metadata and records.
pub fn emit_json<W: io::Write>(table: &SweepTable, writer: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(writer, table).map_err(json_emit_err)
}

/// Writes the table to a file, adding path context to I/O errors.
pub fn emit_to_path(
    table: &SweepTable,
    format: OutputFormat,
    path: &std::path::Path,
) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let buf = io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => emit_csv(table, buf),
        OutputFormat::Json => emit_json(table, buf),
    }
}

// ---------------------------------------------------------------------------
// revival-map post-processing

/// Peak entanglement and revival factor of one (backscattering, rotation)
/// cell of a revival sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiRecord {
    pub backscattering: f64,
    pub omega: f64,
    /// Largest log negativity over the detuning axis, if any point was
    /// stable and entangled.
    pub peak_log_negativity: Option<f64>,
    /// Peak normalized by the stationary uncoupled cell's peak.
    pub chi: f64,
}

/// Collapses a sweep with axes (..., drive.delta_c innermost) into one
/// revival record per non-detuning cell, normalizing by the cell with
/// backscattering = 0 and rotation speed = 0.
pub fn chi_map(table: &SweepTable) -> Result<Vec<ChiRecord>, HarnessError> {
    let spec = &table.metadata.spec;
    if spec.directions.len() != 1 {
        return Err(HarnessError::ChiMap(
            "revival map needs a single-direction sweep".into(),
        ));
    }
    let n_axes = spec.axes.len();
    if n_axes < 2 || spec.axes[n_axes - 1].path != "drive.delta_c" {
        return Err(HarnessError::ChiMap(
            "revival map needs drive.delta_c as the innermost axis".into(),
        ));
    }
    for required in ["params.backscattering", "drive.omega"] {
        if !spec.axes.iter().any(|a| a.path == required) {
            return Err(HarnessError::ChiMap(format!("missing {required} axis")));
        }
    }
    let n_delta = spec.axes[n_axes - 1].count;

    struct Cell {
        backscattering: f64,
        omega: f64,
        scan: Vec<Option<f64>>,
    }
    let cells: Vec<Cell> = table
        .records
        .chunks(n_delta)
        .map(|chunk| Cell {
            backscattering: chunk[0].point["params.backscattering"],
            omega: chunk[0].point["drive.omega"],
            scan: chunk.iter().map(|r| r.log_negativity).collect(),
        })
        .collect();

    let baseline_cell = cells
        .iter()
        .find(|c| c.backscattering == 0.0 && c.omega == 0.0)
        .ok_or_else(|| {
            HarnessError::ChiMap(
                "no stationary uncoupled cell (backscattering = 0, omega = 0) in the grid".into(),
            )
        })?;
    let baseline = DetuningScan {
        omega: 0.0,
        backscattering: 0.0,
        log_negativity: &baseline_cell.scan,
    };

    cells
        .iter()
        .map(|cell| {
            let scan = DetuningScan {
                omega: cell.omega,
                backscattering: cell.backscattering,
                log_negativity: &cell.scan,
            };
            let chi = revival_factor(&scan, &baseline)
                .map_err(|e| HarnessError::ChiMap(e.to_string()))?;
            let peak = cell
                .scan
                .iter()
                .flatten()
                .copied()
                .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
            Ok(ChiRecord {
                backscattering: cell.backscattering,
                omega: cell.omega,
                peak_log_negativity: peak,
                chi,
            })
        })
        .collect()
}

/// Writes revival records as CSV.
pub fn emit_chi_csv<W: io::Write>(records: &[ChiRecord], writer: W) -> Result<(), HarnessError> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["backscattering", "omega", "peak_E_N", "chi"])
        .map_err(csv_emit_err)?;
    for r in records {
        csv.write_record([
            fmt_f(r.backscattering),
            fmt_f(r.omega),
            opt_f(r.peak_log_negativity),
            fmt_f(r.chi),
        ])
        .map_err(csv_emit_err)?;
    }
    csv.flush().map_err(flush_emit_err)
}
