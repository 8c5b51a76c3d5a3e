//! Aerodynamics of the fiber taper flying above the spinning resonator:
//! drag-induced lift, elastic self-adjustment of the gap, intermolecular
//! forces, and the rotation-speed limits they impose.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::constants::{C, HBAR, K_B};

#[derive(Debug, Error)]
pub enum AeroError {
    #[error("invalid geometry: {field} = {value} must be {requirement}")]
    InvalidGeometry {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("no flying equilibrium: lift exceeds elastic capacity (beta = {beta} < 1)")]
    NoEquilibrium { beta: f64 },
    #[error("displacement {displacement} m outside the elastic branch (0, {limit} m]")]
    DisplacementOutOfRange { displacement: f64, limit: f64 },
}

/// Geometry and material data of the taper-resonator air gap.
///
/// The two dielectric/index triples describe (medium, taper, resonator);
/// defaults are a silica taper and resonator in air. `absorption_frequency`
/// is the electronic absorption frequency entering the dispersion part of
/// the Hamaker constant, kept in cyclic Hz and multiplied out explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaperGeometry {
    /// Fiber taper radius (m).
    pub taper_radius: f64,
    /// Length of the deformable taper section (m).
    pub contact_length: f64,
    /// Gap with the resonator at rest, before aerodynamic loading (m).
    pub rest_gap: f64,
    /// Operating taper-resonator separation (m).
    pub separation: f64,
    /// Young's modulus of the taper (Pa).
    pub youngs_modulus: f64,
    /// Elastic limit of the taper material (Pa).
    pub elastic_limit: f64,
    /// Dynamic viscosity of the surrounding air (Pa s).
    pub air_viscosity: f64,
    /// Short-range repulsion coefficient (J m^6).
    pub repulsive_coefficient: f64,
    /// Electronic absorption frequency (cyclic Hz).
    pub absorption_frequency: f64,
    /// Static dielectric constant of the medium.
    pub medium_permittivity: f64,
    /// Static dielectric constant of the taper.
    pub taper_permittivity: f64,
    /// Static dielectric constant of the resonator.
    pub resonator_permittivity: f64,
    /// Optical refractive index of the medium.
    pub medium_index: f64,
    /// Optical refractive index of the taper.
    pub taper_index: f64,
    /// Optical refractive index of the resonator.
    pub resonator_index: f64,
}

impl Default for TaperGeometry {
    fn default() -> Self {
        Self {
            taper_radius: 544e-9,
            contact_length: 3e-6,
            rest_gap: 0.0,
            separation: 250e-9,
            youngs_modulus: 75e9,
            elastic_limit: 9e9,
            air_viscosity: 1.81e-5,
            repulsive_coefficient: 1e-76,
            absorption_frequency: 3e15,
            medium_permittivity: 1.0,
            taper_permittivity: 3.9,
            resonator_permittivity: 3.9,
            medium_index: 1.0,
            taper_index: 1.48,
            resonator_index: 1.48,
        }
    }
}

impl TaperGeometry {
    pub fn validate(&self) -> Result<(), AeroError> {
        let positive: [(&'static str, f64); 6] = [
            ("taper_radius", self.taper_radius),
            ("contact_length", self.contact_length),
            ("separation", self.separation),
            ("youngs_modulus", self.youngs_modulus),
            ("elastic_limit", self.elastic_limit),
            ("air_viscosity", self.air_viscosity),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AeroError::InvalidGeometry {
                    field,
                    value,
                    requirement: "strictly positive and finite",
                });
            }
        }
        if !(self.rest_gap >= 0.0 && self.rest_gap <= self.separation) {
            return Err(AeroError::InvalidGeometry {
                field: "rest_gap",
                value: self.rest_gap,
                requirement: "within [0, separation]",
            });
        }
        Ok(())
    }
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1]; Gauss nodes sit at the
// even Kronrod indices.
const KRONROD_NODES: [f64; 8] = [
    0.000000000000000,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let centre = f(mid);
    let mut kronrod = KRONROD_WEIGHTS[0] * centre;
    let mut gauss = GAUSS_WEIGHTS[0] * centre;
    for i in 1..8 {
        let dx = half * KRONROD_NODES[i];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 0 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * half, gauss * half)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fine, coarse) = gauss_kronrod(f, a, b);
    if (fine - coarse).abs() <= tol || depth >= 48 {
        return fine;
    }
    let mid = 0.5 * (a + b);
    adaptive(f, a, mid, 0.5 * tol, depth + 1) + adaptive(f, mid, b, 0.5 * tol, depth + 1)
}

/// Adaptive quadrature of a smooth scalar function to the given relative
/// tolerance.
fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let (first, _) = gauss_kronrod(&f, a, b);
    let tol = rel_tol * first.abs().max(f64::MIN_POSITIVE);
    adaptive(&f, a, b, tol, 0)
}

/// Cross-sectional gap integral of the lubrication drag,
/// integral_0^r [h + r - sqrt(r^2 - x^2)]^(-3/2) dx (units m^-1/2).
pub fn gap_integral(g: &TaperGeometry) -> f64 {
    let (r, h) = (g.taper_radius, g.separation);
    // the integrand is finite but its slope diverges at x = r; the adaptive
    // rule refines there on its own
    integrate(
        |x| (h + r - (r * r - x * x).max(0.0).sqrt()).powf(-1.5),
        0.0,
        r,
        1e-10,
    )
}

/// Aerodynamic force the spinning resonator exerts on the taper (N),
/// linear in the rotation speed.
pub fn air_pressure(g: &TaperGeometry, resonator_radius: f64, omega: f64) -> f64 {
    6.19 * g.air_viscosity * resonator_radius.powf(2.5) * omega * gap_integral(g)
}

/// Equilibrium of elastic restoring force against aerodynamic lift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Taper deflection away from the rest position (m).
    pub displacement: f64,
    /// Stiffness-to-load ratio; the branch exists only for beta >= 1.
    pub beta: f64,
    /// Bending angle of the deflected taper (rad).
    pub bend_angle: f64,
    /// Material strain at the bend.
    pub strain: f64,
    /// Whether the small-angle elasticity model is trustworthy
    /// (|bend_angle| < 0.5).
    pub small_angle: bool,
}

/// Deflection at which the taper's elastic restoring force balances the
/// aerodynamic lift `t_air` (magnitude; the deflection is symmetric in the
/// sign of the drag). Errors when the lift exceeds what the elastic branch
/// can carry.
pub fn equilibrium_displacement(
    t_air: f64,
    g: &TaperGeometry,
) -> Result<Equilibrium, AeroError> {
    let lift = t_air.abs();
    let len = g.contact_length;
    if lift == 0.0 {
        return Ok(Equilibrium {
            displacement: 0.0,
            beta: f64::INFINITY,
            bend_angle: 0.0,
            strain: 0.0,
            small_angle: true,
        });
    }
    let beta = (std::f64::consts::PI * g.taper_radius.powi(2) * g.youngs_modulus
        / (3.0 * lift))
        .cbrt();
    if beta < 1.0 {
        return Err(AeroError::NoEquilibrium { beta });
    }
    // d = (L/2)(beta - sqrt(beta^2 - 1)), rationalized to avoid cancellation
    let displacement = 0.5 * len / (beta + (beta * beta - 1.0).sqrt());
    let bend_angle = 4.0 * len * displacement / (len * len + 4.0 * displacement * displacement);
    Ok(Equilibrium {
        displacement,
        beta,
        bend_angle,
        strain: bend_angle * bend_angle / 6.0,
        small_angle: bend_angle.abs() < 0.5,
    })
}

/// Slope of the elastic restoring force with respect to the separation
/// (N/m), strictly positive on the flying branch: the gap self-stabilizes.
pub fn elastic_restoring_slope(g: &TaperGeometry, d: f64) -> Result<f64, AeroError> {
    let len = g.contact_length;
    if !(d > 0.0 && d <= 0.5 * len) {
        return Err(AeroError::DisplacementOutOfRange {
            displacement: d,
            limit: 0.5 * len,
        });
    }
    let l2 = len * len;
    let d2 = 4.0 * d * d;
    Ok(16.0 * std::f64::consts::PI * g.taper_radius.powi(2) * g.youngs_modulus * l2 * d
        * (l2 - d2)
        / (3.0 * (l2 + d2).powi(3)))
}

/// Hamaker constant of the taper-medium-resonator stack at temperature
/// `t` (J): entropic term plus electronic dispersion term.
pub fn hamaker_constant(g: &TaperGeometry, t: f64) -> f64 {
    let em = |e: f64| e - g.medium_permittivity;
    let ep = |e: f64| e + g.medium_permittivity;
    let nm = |n: f64| (n * n - g.medium_index * g.medium_index).sqrt();
    let np = |n: f64| (n * n + g.medium_index * g.medium_index).sqrt();
    let (e1, e2) = (g.taper_permittivity, g.resonator_permittivity);
    let (n1, n2) = (g.taper_index, g.resonator_index);
    let entropic = 3.0 * em(e1) * em(e2) * K_B * t / (4.0 * ep(e1) * ep(e2));
    let nu = 3.0 * std::f64::consts::SQRT_2 * HBAR * g.absorption_frequency / 16.0;
    let dispersion = nu * (nm(n1) * nm(n2)).powi(2)
        / (np(n1) * np(n2) * (np(n1) + np(n2)));
    entropic + dispersion
}

/// Net intermolecular force between taper and resonator across gap
/// `separation` (N): van der Waals attraction, short-range repulsion, and
/// the retarded (Casimir) correction.
pub fn intermolecular_force(
    g: &TaperGeometry,
    resonator_radius: f64,
    hamaker: f64,
    separation: f64,
) -> f64 {
    let h = separation;
    let pi = std::f64::consts::PI;
    g.taper_radius
        * resonator_radius
        * (-hamaker / (6.0 * pi * h.powi(3)) + g.repulsive_coefficient / (45.0 * pi * h.powi(9))
            - pi * pi * C * HBAR / (240.0 * h.powi(4)))
}

/// Rotation-speed ceilings of the flying-taper configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinLimits {
    /// Speed at which aerodynamic lift saturates the elastic branch.
    pub omega_0: f64,
    /// Speed at which the taper deflection closes the operating gap.
    pub omega_1: f64,
    /// Speed at which the bending strain reaches the elastic limit.
    pub omega_2: f64,
    /// Smallest of the three ceilings.
    pub omega_max: f64,
    /// Reciprocal of the gap integral (m^1/2).
    pub gap_integral_inverse: f64,
    /// Cubed geometric leverage of the gap-closing condition.
    pub gap_factor: f64,
}

/// Evaluates all three rotation-speed limits for the given geometry and
/// resonator radius.
pub fn spin_limits(g: &TaperGeometry, resonator_radius: f64) -> SpinLimits {
    let varrho = 1.0 / gap_integral(g);
    let pi_r2 = std::f64::consts::PI * g.taper_radius.powi(2);
    let drag_scale = g.air_viscosity * resonator_radius.powf(2.5);
    let omega_0 = varrho * pi_r2 * g.youngs_modulus / (18.57 * drag_scale);
    let (len, h) = (g.contact_length, g.separation);
    let gap_factor = (4.0 * len * h / (len * len + 4.0 * h * h)).powi(3);
    let omega_1 = omega_0 * gap_factor;
    let omega_2 = varrho * pi_r2 * g.elastic_limit / (3.095 * drag_scale)
        * (6.0 * g.elastic_limit / g.youngs_modulus).sqrt();
    SpinLimits {
        omega_0,
        omega_1,
        omega_2,
        omega_max: omega_0.min(omega_1).min(omega_2),
        gap_integral_inverse: varrho,
        gap_factor,
    }
}

/// Ratio of the static optomechanical breathing amplitude to the taper
/// deflection; small values justify treating the gap as rigid.
pub fn breathing_ratio(q_s: f64, x_zp: f64, d: f64) -> f64 {
    q_s * x_zp / d
}
