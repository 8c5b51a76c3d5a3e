//! Device parameters, derived constants, and unit handling.
//!
//! All frequencies and rates are angular (rad/s) internally; human-facing
//! input may carry unit suffixes ("63 MHz", "20 mW") which are converted on
//! ingestion. Frequency suffixes map straight onto rad/s magnitudes, so
//! "63 MHz" means 6.3e7 rad/s.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Physical constants (SI, CODATA 2018).
pub mod constants {
    /// Reduced Planck constant [J s].
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Boltzmann constant [J/K].
    pub const K_B: f64 = 1.380_649e-23;
    /// Speed of light in vacuum [m/s].
    pub const C: f64 = 299_792_458.0;
}

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("parameter `{field}` = {value} violates requirement: {requirement}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("cannot parse quantity `{text}`: {reason}")]
    BadQuantity { text: String, reason: String },
}

/// Resonator and bath parameters. Defaults describe the reference silica
/// microsphere device used by all presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Refractive index of the resonator material.
    #[serde(deserialize_with = "quantity")]
    pub refractive_index: f64,
    /// Index dispersion dn/dlambda [1/m].
    #[serde(deserialize_with = "quantity")]
    pub index_dispersion: f64,
    /// Effective mass of the breathing mode [kg].
    #[serde(deserialize_with = "quantity")]
    pub mass: f64,
    /// Resonator radius [m].
    #[serde(deserialize_with = "quantity")]
    pub radius: f64,
    /// Drive laser wavelength [m].
    #[serde(deserialize_with = "quantity")]
    pub wavelength: f64,
    /// Optical quality factor omega_c / kappa.
    #[serde(deserialize_with = "quantity")]
    pub optical_q: f64,
    /// Mechanical angular frequency [rad/s].
    #[serde(deserialize_with = "quantity")]
    pub omega_m: f64,
    /// Mechanical damping rate [rad/s].
    #[serde(deserialize_with = "quantity")]
    pub gamma_m: f64,
    /// Bath temperature [K].
    #[serde(deserialize_with = "quantity")]
    pub t_bath: f64,
    /// Backscattering coupling between the counterpropagating modes [rad/s].
    #[serde(deserialize_with = "quantity")]
    pub backscattering: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        silica()
    }
}

/// Reference silica microsphere: R = 1.1 mm, 10 ng breathing mode at
/// 6.3e7 rad/s, Q = 3.2e7 at 1550 nm, 130 mK bath, no backscattering.
pub fn silica() -> SystemParams {
    SystemParams {
        refractive_index: 1.48,
        index_dispersion: 0.0,
        mass: 10e-12,
        radius: 1.1e-3,
        wavelength: 1.55e-6,
        optical_q: 3.2e7,
        omega_m: 63e6,
        gamma_m: 5.2e3,
        t_bath: 130e-3,
        backscattering: 0.0,
    }
}

impl SystemParams {
    /// Checks positivity and the resolved-sideband requirement
    /// omega_m / gamma_m > 100.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive: [(&'static str, f64); 7] = [
            ("mass", self.mass),
            ("radius", self.radius),
            ("wavelength", self.wavelength),
            ("optical_q", self.optical_q),
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
            ("refractive_index", self.refractive_index),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ParamsError::InvalidParameter {
                    field,
                    value,
                    requirement: "must be finite and > 0",
                });
            }
        }
        if self.refractive_index <= 1.0 {
            return Err(ParamsError::InvalidParameter {
                field: "refractive_index",
                value: self.refractive_index,
                requirement: "must exceed 1 (dielectric resonator)",
            });
        }
        if !(self.t_bath >= 0.0) || !self.t_bath.is_finite() {
            return Err(ParamsError::InvalidParameter {
                field: "t_bath",
                value: self.t_bath,
                requirement: "must be finite and >= 0",
            });
        }
        if !(self.backscattering >= 0.0) || !self.backscattering.is_finite() {
            return Err(ParamsError::InvalidParameter {
                field: "backscattering",
                value: self.backscattering,
                requirement: "must be finite and >= 0",
            });
        }
        if !self.index_dispersion.is_finite() {
            return Err(ParamsError::InvalidParameter {
                field: "index_dispersion",
                value: self.index_dispersion,
                requirement: "must be finite",
            });
        }
        let q_m = self.omega_m / self.gamma_m;
        if q_m <= 100.0 {
            return Err(ParamsError::InvalidParameter {
                field: "gamma_m",
                value: self.gamma_m,
                requirement: "omega_m / gamma_m must exceed 100",
            });
        }
        Ok(())
    }
}

/// Constants derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Cavity resonance frequency 2 pi c / lambda [rad/s].
    pub omega_c: f64,
    /// Optical amplitude decay rate omega_c / Q [rad/s].
    pub kappa: f64,
    /// Zero-point spread sqrt(hbar / (m omega_m)) [m].
    pub x_zp: f64,
    /// Single-photon coupling (omega_c / R) x_zp [rad/s].
    pub g0: f64,
    /// Thermal phonon occupation of the bath.
    pub n_thermal: f64,
    /// Mechanical quality factor omega_m / gamma_m.
    pub q_m: f64,
}

/// Computes the derived constants, validating the inputs first.
pub fn derive_constants(p: &SystemParams) -> Result<DerivedConstants, ParamsError> {
    p.validate()?;
    let omega_c = 2.0 * std::f64::consts::PI * constants::C / p.wavelength;
    let kappa = omega_c / p.optical_q;
    let x_zp = (constants::HBAR / (p.mass * p.omega_m)).sqrt();
    let g0 = omega_c / p.radius * x_zp;
    let n_thermal = thermal_occupation(p.omega_m, p.t_bath);
    Ok(DerivedConstants {
        omega_c,
        kappa,
        x_zp,
        g0,
        n_thermal,
        q_m: p.omega_m / p.gamma_m,
    })
}

/// Bose occupation 1 / (exp(hbar omega / k_B T) - 1); zero at T = 0.
///
/// Stable for both k_B T >> hbar omega (via exp_m1) and deep in the
/// quantum regime (underflows cleanly to zero).
pub fn thermal_occupation(omega: f64, t: f64) -> f64 {
    assert!(omega > 0.0, "thermal_occupation needs omega > 0");
    assert!(t >= 0.0, "thermal_occupation needs T >= 0");
    if t == 0.0 {
        return 0.0;
    }
    let x = constants::HBAR * omega / (constants::K_B * t);
    if x > 700.0 {
        0.0
    } else {
        x.exp_m1().recip()
    }
}

/// Parses a scalar with an optional unit suffix, e.g. "63 MHz", "20 mW",
/// "130 mK", "1.55 um", "10 ng", "75 GPa". Frequency suffixes scale into
/// rad/s magnitudes. Bare numbers pass through unchanged.
pub fn parse_quantity(text: &str) -> Result<f64, ParamsError> {
    let s = text.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let split = s
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic() || *c == '/' || *c == 'µ')
        .last()
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = (s[..split].trim(), s[split..].trim());
    let value: f64 = num.parse().map_err(|e| ParamsError::BadQuantity {
        text: text.to_string(),
        reason: format!("bad numeric part `{num}`: {e}"),
    })?;
    let scale = unit_scale(unit).ok_or_else(|| ParamsError::BadQuantity {
        text: text.to_string(),
        reason: format!("unknown unit `{unit}`"),
    })?;
    Ok(value * scale)
}

fn unit_scale(unit: &str) -> Option<f64> {
    Some(match unit {
        // frequencies / rates (angular convention)
        "Hz" | "rad/s" => 1.0,
        "kHz" => 1e3,
        "MHz" => 1e6,
        "GHz" => 1e9,
        "THz" => 1e12,
        "PHz" => 1e15,
        // power
        "W" => 1.0,
        "mW" => 1e-3,
        "uW" | "µW" => 1e-6,
        "nW" => 1e-9,
        // temperature
        "K" => 1.0,
        "mK" => 1e-3,
        "uK" | "µK" => 1e-6,
        // length
        "m" => 1.0,
        "mm" => 1e-3,
        "um" | "µm" => 1e-6,
        "nm" => 1e-9,
        "pm" => 1e-12,
        "fm" => 1e-15,
        // mass
        "kg" => 1.0,
        "g" => 1e-3,
        "mg" => 1e-6,
        "ug" | "µg" => 1e-9,
        "ng" => 1e-12,
        "pg" => 1e-15,
        // pressure / moduli
        "Pa" => 1.0,
        "kPa" => 1e3,
        "MPa" => 1e6,
        "GPa" => 1e9,
        _ => return None,
    })
}

pub(crate) fn quantity<'de, D>(de: D) -> Result<f64, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(de)? {
        Raw::Num(x) => Ok(x),
        Raw::Text(s) => parse_quantity(&s).map_err(serde::de::Error::custom),
    }
}
