//! Drive geometry and classical steady state of the two counterpropagating
//! optical modes coupled to the breathing mode.
//!
//! The mode co-rotating with the drive ("driven") always occupies the first
//! slot; the backscattered counterpropagating mode ("reflected") the second.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{constants, quantity, DerivedConstants, SystemParams};

/// Which fiber port the drive enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputPort {
    Left,
    Right,
}

/// Rotation sense of the resonator, viewed from the fiber side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationSense {
    Cw,
    Ccw,
}

/// Laser drive and rotation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// Input power [W].
    #[serde(deserialize_with = "quantity")]
    pub power: f64,
    /// Cavity-laser detuning omega_c - omega_l [rad/s].
    #[serde(deserialize_with = "quantity")]
    pub delta_c: f64,
    /// Rotation speed magnitude [rad/s].
    #[serde(deserialize_with = "quantity")]
    pub omega: f64,
    pub input_port: InputPort,
    pub rotation: RotationSense,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            power: 20e-3,
            delta_c: 63e6,
            omega: 8e3,
            input_port: InputPort::Left,
            rotation: RotationSense::Cw,
        }
    }
}

impl DriveConfig {
    /// Signed rotation speed as seen by the driven mode: positive when the
    /// driven mode counter-rotates with the resonator (cw spin, left input),
    /// negative for the co-rotating combination.
    pub fn signed_rotation(&self) -> f64 {
        let port = match self.input_port {
            InputPort::Left => 1.0,
            InputPort::Right => -1.0,
        };
        let sense = match self.rotation {
            RotationSense::Cw => 1.0,
            RotationSense::Ccw => -1.0,
        };
        port * sense * self.omega
    }

    /// Same drive entering the opposite port.
    pub fn reversed(&self) -> DriveConfig {
        DriveConfig {
            input_port: match self.input_port {
                InputPort::Left => InputPort::Right,
                InputPort::Right => InputPort::Left,
            },
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(OpticsError::InvalidDrive {
                field: "power",
                value: self.power,
                requirement: "must be finite and >= 0",
            });
        }
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(OpticsError::InvalidDrive {
                field: "omega",
                value: self.omega,
                requirement: "must be finite and >= 0",
            });
        }
        if !self.delta_c.is_finite() {
            return Err(OpticsError::InvalidDrive {
                field: "delta_c",
                value: self.delta_c,
                requirement: "must be finite",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("drive field `{field}` = {value} violates requirement: {requirement}")]
    InvalidDrive {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error(
        "steady state not converged after {iterations} iterations \
         (last q_s = {last_q}, residual = {residual})"
    )]
    NotConverged {
        iterations: usize,
        last_q: f64,
        residual: f64,
    },
}

/// Sagnac-Fizeau shift of the driven resonance for signed rotation speed
/// `omega_r` [rad/s]; antisymmetric in `omega_r`.
pub fn sagnac_shift(p: &SystemParams, d: &DerivedConstants, omega_r: f64) -> f64 {
    let n = p.refractive_index;
    omega_r * (n * p.radius * d.omega_c / constants::C)
        * (1.0 - 1.0 / (n * n) - (p.wavelength / n) * p.index_dispersion)
}

/// Intracavity drive amplitude sqrt(2 kappa P / (hbar omega_l)).
///
/// The laser frequency differs from `omega_c` by parts in 1e7 over all
/// detunings of interest, so `omega_l = omega_c` is used.
pub fn drive_amplitude(power: f64, kappa: f64, omega_l: f64) -> f64 {
    (2.0 * kappa * power / (constants::HBAR * omega_l)).sqrt()
}

/// Classical working point of both optical modes and the mechanical mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub alpha_driven: Complex64,
    pub alpha_reflected: Complex64,
    /// Dimensionless static mechanical displacement; always >= 0.
    pub q_s: f64,
    /// Static momentum; identically zero in steady state.
    pub p_s: f64,
    /// |alpha_driven|^2.
    pub n_driven: f64,
    /// |alpha_reflected|^2.
    pub n_reflected: f64,
    /// Sagnac-shifted bare detuning of the driven mode [rad/s].
    pub delta_driven: f64,
    /// Sagnac-shifted bare detuning of the reflected mode [rad/s].
    pub delta_reflected: f64,
    /// delta_driven - g0 q_s [rad/s].
    pub delta_tilde_driven: f64,
    /// delta_reflected - g0 q_s [rad/s].
    pub delta_tilde_reflected: f64,
    /// sqrt(2) g0 alpha_driven [rad/s].
    pub g_driven: Complex64,
    /// sqrt(2) g0 alpha_reflected [rad/s].
    pub g_reflected: Complex64,
    /// Sagnac shift applied, signed [rad/s].
    pub delta_f: f64,
    /// Drive amplitude |eps| [1/s].
    pub drive_amplitude: f64,
    pub iterations: usize,
    /// Self-consistency defect of q_s after re-substitution (relative).
    pub residual: f64,
    pub converged: bool,
}

const MAX_ITERATIONS: usize = 10_000;
const RELATIVE_TOLERANCE: f64 = 1e-12;
const DAMPING: f64 = 0.5;

fn mode_amplitudes(
    eps: f64,
    kappa: f64,
    j: f64,
    dt_driven: f64,
    dt_reflected: f64,
) -> (Complex64, Complex64) {
    let i = Complex64::I;
    let lr = i * dt_reflected + kappa;
    let ld = i * dt_driven + kappa;
    let alpha_driven = lr * eps / (lr * ld + j * j);
    let alpha_reflected = -i * j * alpha_driven / lr;
    (alpha_driven, alpha_reflected)
}

/// Solves the coupled steady state with a damped fixed-point iteration on
/// the static displacement, starting from q_s = 0 (the low branch when the
/// response is multistable).
pub fn steady_state(
    p: &SystemParams,
    d: &DerivedConstants,
    drive: &DriveConfig,
) -> Result<SteadyState, OpticsError> {
    drive.validate()?;
    let delta_f = sagnac_shift(p, d, drive.signed_rotation());
    let delta_driven = drive.delta_c + delta_f;
    let delta_reflected = drive.delta_c - delta_f;
    let eps = drive_amplitude(drive.power, d.kappa, d.omega_c);
    let j = p.backscattering;

    let photon_pressure = |q: f64| -> f64 {
        let (ad, ar) = mode_amplitudes(
            eps,
            d.kappa,
            j,
            delta_driven - d.g0 * q,
            delta_reflected - d.g0 * q,
        );
        d.g0 / p.omega_m * (ad.norm_sqr() + ar.norm_sqr())
    };

    let mut q = 0.0_f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let q_new = photon_pressure(q);
        if (q_new - q).abs() <= RELATIVE_TOLERANCE * q_new.abs().max(f64::MIN_POSITIVE) {
            q = q_new;
            converged = true;
            break;
        }
        q = (1.0 - DAMPING) * q + DAMPING * q_new;
    }
    let residual = {
        let q_check = photon_pressure(q);
        (q_check - q).abs() / q.abs().max(f64::MIN_POSITIVE)
    };
    if !converged {
        return Err(OpticsError::NotConverged {
            iterations,
            last_q: q,
            residual,
        });
    }

    let dt_driven = delta_driven - d.g0 * q;
    let dt_reflected = delta_reflected - d.g0 * q;
    let (alpha_driven, alpha_reflected) =
        mode_amplitudes(eps, d.kappa, j, dt_driven, dt_reflected);
    let root2 = std::f64::consts::SQRT_2;
    Ok(SteadyState {
        alpha_driven,
        alpha_reflected,
        q_s: q,
        p_s: 0.0,
        n_driven: alpha_driven.norm_sqr(),
        n_reflected: alpha_reflected.norm_sqr(),
        delta_driven,
        delta_reflected,
        delta_tilde_driven: dt_driven,
        delta_tilde_reflected: dt_reflected,
        g_driven: root2 * d.g0 * alpha_driven,
        g_reflected: root2 * d.g0 * alpha_reflected,
        delta_f,
        drive_amplitude: eps,
        iterations,
        residual,
        converged,
    })
}

/// Field-enhanced couplings sqrt(2) g0 alpha for both modes.
pub fn effective_couplings(d: &DerivedConstants, s: &SteadyState) -> (Complex64, Complex64) {
    let root2 = std::f64::consts::SQRT_2;
    (
        root2 * d.g0 * s.alpha_driven,
        root2 * d.g0 * s.alpha_reflected,
    )
}
