//! Bipartite Gaussian entanglement between one optical mode and the
//! mechanical mode: partial-transpose symplectic eigenvalue and logarithmic
//! negativity, plus direction-resolved quantities.

use nalgebra::{Matrix2, Matrix4, Matrix6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{gaussian_state, DynamicsError};
use crate::optics::{steady_state, DriveConfig, OpticsError};
use crate::params::{DerivedConstants, SystemParams};

/// Which optical mode is kept in the two-mode reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpticalMode {
    Driven,
    Reflected,
}

#[derive(Debug, Error)]
pub enum EntanglementError {
    #[error("covariance matrix is unphysical (discriminant {discriminant} < 0)")]
    UnphysicalCovariance { discriminant: f64 },
    #[error("revival reference must be the stationary uncoupled scan (omega = 0, J = 0)")]
    BaselineMissing,
    #[error("revival reference scan contains no stable entanglement values")]
    BaselineEmpty,
    #[error("revival reference maximum is zero; factor undefined")]
    BaselineZero,
}

/// Projects the 6x6 covariance onto (optical mode, mechanical mode),
/// dropping the other optical mode.
pub fn reduce(v: &Matrix6<f64>, kept: OpticalMode) -> Matrix4<f64> {
    let rows = match kept {
        OpticalMode::Driven => [0usize, 1, 4, 5],
        OpticalMode::Reflected => [2, 3, 4, 5],
    };
    Matrix4::from_fn(|r, c| v[(rows[r], rows[c])])
}

/// Smaller symplectic eigenvalue of the partial transpose of a two-mode
/// covariance matrix. Values below 1/2 certify entanglement.
pub fn nu_minus(v: &Matrix4<f64>) -> Result<f64, EntanglementError> {
    let a = Matrix2::from_fn(|r, c| v[(r, c)]);
    let b = Matrix2::from_fn(|r, c| v[(r + 2, c + 2)]);
    let c = Matrix2::from_fn(|r, c| v[(r, c + 2)]);
    let sigma = a.determinant() + b.determinant() - 2.0 * c.determinant();
    let det_v = v.determinant();
    let disc = sigma * sigma - 4.0 * det_v;
    if disc < -1e-12 * sigma.mul_add(sigma, 1.0) {
        return Err(EntanglementError::UnphysicalCovariance { discriminant: disc });
    }
    let root = disc.max(0.0).sqrt();
    // nu^2 = (sigma - root) / 2, evaluated cancellation-free
    let nu_sq = if sigma > 0.0 {
        2.0 * det_v / (sigma + root)
    } else {
        (sigma - root) / 2.0
    };
    if nu_sq <= 0.0 {
        // no covariance matrix yields an imaginary symplectic eigenvalue
        return Err(EntanglementError::UnphysicalCovariance { discriminant: disc });
    }
    Ok(nu_sq.sqrt())
}

/// Logarithmic negativity max(0, -ln(2 nu)).
pub fn log_negativity(nu: f64) -> f64 {
    (-(2.0 * nu).ln()).max(0.0)
}

/// Entanglement verdict for a two-mode reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementResult {
    pub nu_minus: f64,
    pub log_negativity: f64,
    pub entangled: bool,
}

/// Reduces the full covariance to (driven mode, mechanics) and scores it.
pub fn entangle(v: &Matrix6<f64>) -> Result<EntanglementResult, EntanglementError> {
    entangle_mode(v, OpticalMode::Driven)
}

/// Same as [`entangle`] for a chosen optical mode.
pub fn entangle_mode(
    v: &Matrix6<f64>,
    kept: OpticalMode,
) -> Result<EntanglementResult, EntanglementError> {
    let nu = nu_minus(&reduce(v, kept))?;
    let log_neg = log_negativity(nu);
    Ok(EntanglementResult {
        nu_minus: nu,
        log_negativity: log_neg,
        entangled: nu < 0.5,
    })
}

/// Log negativity of the driven-mode/mechanics pair for one drive setting,
/// or `None` when the point is unstable or its working point does not
/// converge.
pub fn directional_log_negativity(
    p: &SystemParams,
    d: &DerivedConstants,
    drive: &DriveConfig,
) -> Result<Option<f64>, OpticsError> {
    let s = match steady_state(p, d, drive) {
        Ok(s) => s,
        Err(OpticsError::NotConverged { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    match gaussian_state(p, d, &s) {
        Ok(gs) => match entangle(&gs.covariance) {
            Ok(r) => Ok(Some(r.log_negativity)),
            Err(_) => Ok(None),
        },
        Err(DynamicsError::Unstable { .. }) => Ok(None),
        Err(DynamicsError::SingularSystem) => Ok(None),
    }
}

/// Difference of log negativities between the two input directions at
/// otherwise identical parameters; `None` when either direction is missing.
pub fn entanglement_difference(
    p: &SystemParams,
    d: &DerivedConstants,
    drive: &DriveConfig,
) -> Result<Option<f64>, OpticsError> {
    let forward = directional_log_negativity(p, d, drive)?;
    let backward = directional_log_negativity(p, d, &drive.reversed())?;
    Ok(match (forward, backward) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    })
}

/// One detuning scan at fixed rotation speed and backscattering; missing
/// entries mark unstable points.
#[derive(Debug, Clone)]
pub struct DetuningScan<'a> {
    pub omega: f64,
    pub backscattering: f64,
    pub log_negativity: &'a [Option<f64>],
}

impl DetuningScan<'_> {
    fn peak(&self) -> Option<f64> {
        self.log_negativity
            .iter()
            .flatten()
            .copied()
            .fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.max(x))))
    }
}

/// Ratio of the spun device's peak log negativity to the stationary
/// uncoupled reference peak over the same detuning grid. A scan with no
/// stable entanglement anywhere scores zero.
pub fn revival_factor(
    spun: &DetuningScan,
    baseline: &DetuningScan,
) -> Result<f64, EntanglementError> {
    if baseline.omega != 0.0 || baseline.backscattering != 0.0 {
        return Err(EntanglementError::BaselineMissing);
    }
    let reference = baseline.peak().ok_or(EntanglementError::BaselineEmpty)?;
    if reference <= 0.0 {
        return Err(EntanglementError::BaselineZero);
    }
    Ok(spun.peak().unwrap_or(0.0) / reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{ppt_nu_minus, tmsv_covariance};
    use crate::optics::{InputPort, RotationSense};
    use crate::params::{derive_constants, silica};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn driven_covariance(
        j_over_kappa: f64,
        delta_c_over_wm: f64,
        omega: f64,
    ) -> Matrix6<f64> {
        let mut p = silica();
        let d = derive_constants(&p).unwrap();
        p.backscattering = j_over_kappa * d.kappa;
        let drive = DriveConfig {
            power: 0.02,
            delta_c: delta_c_over_wm * p.omega_m,
            omega,
            input_port: InputPort::Left,
            rotation: RotationSense::Cw,
        };
        let s = steady_state(&p, &d, &drive).unwrap();
        gaussian_state(&p, &d, &s).unwrap().covariance
    }

    #[test]
    fn reduction_keeps_requested_blocks() {
        let v = driven_covariance(1.0, 1.2, 8e3);
        let vd = reduce(&v, OpticalMode::Driven);
        let vr = reduce(&v, OpticalMode::Reflected);
        assert_eq!(vd[(0, 0)], v[(0, 0)]);
        assert_eq!(vd[(2, 2)], v[(4, 4)]);
        assert_eq!(vd[(0, 2)], v[(0, 4)]);
        assert_eq!(vr[(0, 0)], v[(2, 2)]);
        assert_eq!(vr[(3, 3)], v[(5, 5)]);
        // re-embedding and reducing again is a no-op
        let mut embedded = Matrix6::<f64>::zeros();
        let idx = [0usize, 1, 4, 5];
        for r in 0..4 {
            for c in 0..4 {
                embedded[(idx[r], idx[c])] = vd[(r, c)];
            }
        }
        assert_eq!(reduce(&embedded, OpticalMode::Driven), vd);
    }

    #[test]
    fn vacuum_is_not_entangled() {
        let v = Matrix4::from_diagonal_element(0.5);
        let nu = nu_minus(&v).unwrap();
        assert_relative_eq!(nu, 0.5, max_relative = 1e-14);
        assert_eq!(log_negativity(nu), 0.0);
    }

    #[test]
    fn two_mode_squeezed_state_reference() {
        for r in [0.1, 0.5, 1.0] {
            let v = tmsv_covariance(r);
            let nu = nu_minus(&v).unwrap();
            assert_relative_eq!(nu, 0.5 * (-2.0 * r).exp(), max_relative = 1e-12);
            assert_relative_eq!(log_negativity(nu), 2.0 * r, max_relative = 1e-12);
        }
    }

    #[test]
    fn hybrid_formula_matches_ppt_spectrum() {
        for (j, dc, om) in [(0.0, 1.0, 8e3), (1.0, 1.0, 8e3), (2.0, 2.2, 23e3)] {
            let v = driven_covariance(j, dc, om);
            let v4 = reduce(&v, OpticalMode::Driven);
            let direct = nu_minus(&v4).unwrap();
            let brute = ppt_nu_minus(&v4);
            assert_relative_eq!(direct, brute, max_relative = 1e-10);
        }
    }

    #[test]
    fn unphysical_covariance_rejected() {
        // strongly negative-discriminant construction
        let mut v = Matrix4::from_diagonal_element(0.5);
        v[(0, 0)] = -1.0;
        assert!(matches!(
            nu_minus(&v),
            Err(EntanglementError::UnphysicalCovariance { .. })
        ));
    }

    #[test]
    fn directional_difference_flips_with_rotation_sense() {
        let p = silica();
        let d = derive_constants(&p).unwrap();
        let drive = DriveConfig {
            power: 0.02,
            delta_c: 1.2 * p.omega_m,
            omega: 8e3,
            input_port: InputPort::Left,
            rotation: RotationSense::Cw,
        };
        let cw = entanglement_difference(&p, &d, &drive).unwrap().unwrap();
        let mirrored = DriveConfig {
            rotation: RotationSense::Ccw,
            ..drive
        };
        let ccw = entanglement_difference(&p, &d, &mirrored).unwrap().unwrap();
        assert_relative_eq!(cw, -ccw, max_relative = 1e-9);
        assert!(cw.abs() > 1e-3, "expected visible nonreciprocity");
    }

    #[test]
    fn stationary_difference_vanishes() {
        let p = silica();
        let d = derive_constants(&p).unwrap();
        let drive = DriveConfig {
            power: 0.02,
            delta_c: 1.2 * p.omega_m,
            omega: 0.0,
            input_port: InputPort::Left,
            rotation: RotationSense::Cw,
        };
        let diff = entanglement_difference(&p, &d, &drive).unwrap().unwrap();
        assert!(diff.abs() <= 1e-9);
    }

    #[test]
    fn revival_factor_identity_and_errors() {
        let values = [Some(0.1), None, Some(0.2)];
        let base = DetuningScan {
            omega: 0.0,
            backscattering: 0.0,
            log_negativity: &values,
        };
        assert_relative_eq!(revival_factor(&base, &base).unwrap(), 1.0);
        let spun = DetuningScan {
            omega: 23e3,
            backscattering: 1e7,
            log_negativity: &values[..1],
        };
        assert_relative_eq!(revival_factor(&spun, &base).unwrap(), 0.5);
        assert!(matches!(
            revival_factor(&base, &spun),
            Err(EntanglementError::BaselineMissing)
        ));
        let empty = DetuningScan {
            omega: 0.0,
            backscattering: 0.0,
            log_negativity: &[None, None],
        };
        assert!(matches!(
            revival_factor(&base, &empty),
            Err(EntanglementError::BaselineEmpty)
        ));
        let all_unstable = DetuningScan {
            omega: 9e3,
            backscattering: 1e7,
            log_negativity: &[None, None],
        };
        assert_eq!(revival_factor(&all_unstable, &base).unwrap(), 0.0);
    }

    proptest! {
        /// Local phase rotations on either mode leave nu_minus invariant.
        #[test]
        fn nu_invariant_under_local_rotations(
            t1 in 0.0..std::f64::consts::TAU,
            t2 in 0.0..std::f64::consts::TAU,
        ) {
            let v = reduce(&driven_covariance(1.0, 1.2, 8e3), OpticalMode::Driven);
            let rot = |t: f64| Matrix2::new(t.cos(), t.sin(), -t.sin(), t.cos());
            let mut s = Matrix4::<f64>::zeros();
            s.fixed_view_mut::<2, 2>(0, 0).copy_from(&rot(t1));
            s.fixed_view_mut::<2, 2>(2, 2).copy_from(&rot(t2));
            let v_rot = s * v * s.transpose();
            let a = nu_minus(&v).unwrap();
            let b = nu_minus(&v_rot).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }

        /// Two-mode squeezed covariances score E_N = 2r for any squeezing.
        #[test]
        fn tmsv_log_negativity(r in 0.01..2.0_f64) {
            let v = tmsv_covariance(r);
            let nu = nu_minus(&v).unwrap();
            prop_assert!((log_negativity(nu) - 2.0 * r).abs() < 1e-10);
        }
    }
}
