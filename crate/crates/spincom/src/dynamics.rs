//! Linearized fluctuation dynamics: drift and diffusion matrices, stability
//! by two independent routes, and the stationary covariance matrix.
//!
//! Quadrature ordering is (X_driven, Y_driven, X_reflected, Y_reflected,
//! q, p) with vacuum variance 1/2.

use nalgebra::linalg::Schur;
use nalgebra::{Cholesky, DMatrix, DVector, Matrix6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::SteadyState;
use crate::params::{DerivedConstants, SystemParams};

/// Stability gate: stable means max Re(eig A) < -REL_MARGIN * kappa.
pub const REL_MARGIN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(
        "system not stable enough for a stationary covariance \
         (max real eigenvalue {max_real_eig} >= -{margin})"
    )]
    Unstable { max_real_eig: f64, margin: f64 },
    #[error("Lyapunov system is singular")]
    SingularSystem,
}

/// Drift matrix of the quadrature fluctuations around the working point.
pub fn build_drift(p: &SystemParams, d: &DerivedConstants, s: &SteadyState) -> Matrix6<f64> {
    let k = d.kappa;
    let j = p.backscattering;
    let (d1, d2) = (s.delta_tilde_driven, s.delta_tilde_reflected);
    let (g1, g2) = (s.g_driven, s.g_reflected);
    let w = p.omega_m;
    let g = p.gamma_m;
    Matrix6::from_rows(&[
        [-k, d1, 0.0, j, -g1.im, 0.0].into(),
        [-d1, -k, -j, 0.0, g1.re, 0.0].into(),
        [0.0, j, -k, d2, -g2.im, 0.0].into(),
        [-j, 0.0, -d2, -k, g2.re, 0.0].into(),
        [0.0, 0.0, 0.0, 0.0, 0.0, w].into(),
        [g1.re, g1.im, g2.re, g2.im, -w, -g].into(),
    ])
}

/// Diffusion matrix of the input noises: vacuum optical noise at rate kappa
/// per quadrature, thermal mechanical noise gamma_m (2 n + 1) on momentum.
pub fn build_diffusion(p: &SystemParams, d: &DerivedConstants) -> Matrix6<f64> {
    Matrix6::from_diagonal(
        &[
            d.kappa,
            d.kappa,
            d.kappa,
            d.kappa,
            0.0,
            p.gamma_m * (2.0 * d.n_thermal + 1.0),
        ]
        .into(),
    )
}

/// Largest real part over the eigenvalues of `a`.
///
/// Uses an iteration-capped Schur decomposition so that matrices on which the
/// QR iteration stalls (exactly degenerate imaginary pairs) return NaN instead
/// of hanging; NaN compares false against any margin, so such points are
/// conservatively treated as not provably stable.
pub fn max_real_eigenvalue(a: &Matrix6<f64>) -> f64 {
    match Schur::try_new(*a, f64::EPSILON, 100_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max),
        None => f64::NAN,
    }
}

/// Coefficients a_1..a_6 of the characteristic polynomial
/// lambda^6 + a_1 lambda^5 + ... + a_6, in closed form.
pub fn characteristic_coefficients(
    p: &SystemParams,
    d: &DerivedConstants,
    s: &SteadyState,
) -> [f64; 6] {
    let k = d.kappa;
    let g = p.gamma_m;
    let w = p.omega_m;
    let j = p.backscattering;
    let (d1, d2) = (s.delta_tilde_driven, s.delta_tilde_reflected);
    let g1sq = s.g_driven.norm_sqr();
    let g2sq = s.g_reflected.norm_sqr();

    let m0 = j * j + k * k;
    let m1 = d1 * d1 + d2 * d2;
    let m2 = (d1 * d2 - 2.0 * j * j) * d1 * d2;
    let m4 = 2.0 * j * (s.g_reflected.re * s.g_driven.re + s.g_reflected.im * s.g_driven.im);
    let m3 = w * (d1 * g1sq + d2 * g2sq + m4);
    // same combination with the detunings exchanged and the mixing negated;
    // closes the constant coefficient
    let m3x = w * (d2 * g1sq + d1 * g2sq - m4);
    let s0 = 2.0 * m0 + m1;
    let s1 = k * k + 2.0 * k * g + w * w;
    let s2_bare = m0 * m0 + k * k * m1 + m2;
    let s2_coupled = m2 - m3 + m0 * (j * j - k * k);
    let sp = (d1 * j * j - d2 * k * k) * g2sq;
    let sm = (d2 * j * j - d1 * k * k) * g1sq;

    [
        g + 4.0 * k,
        s0 + w * w + 4.0 * k * (k + g),
        s0 * (2.0 * k + g) + 4.0 * k * (w * w + k * g),
        s0 * s1 + s2_coupled + 4.0 * k * k * w * w,
        g * m2 - 2.0 * k * m3 + m0 * (g * m0 + 4.0 * k * w * w) + k * m1 * (k * g + 2.0 * w * w),
        w * (sp + sm + s2_bare * w - m0 * m4) - m3x * d1 * d2,
    ]
}

/// Leading principal minors (Hurwitz determinants) of the 6x6 Hurwitz matrix
/// built from coefficients normalized by powers of `scale`. Normalization
/// flips no signs; it only keeps the determinants within f64 range.
pub fn hurwitz_determinants(coeffs: &[f64; 6], scale: f64) -> [f64; 6] {
    assert!(scale > 0.0, "normalization scale must be positive");
    let mut c = [0.0_f64; 7];
    c[0] = 1.0;
    for (i, a) in coeffs.iter().enumerate() {
        c[i + 1] = a / scale.powi(i as i32 + 1);
    }
    let mut dets = [0.0_f64; 6];
    for k in 1..=6 {
        let m = DMatrix::<f64>::from_fn(k, k, |row, col| {
            // 1-based Hurwitz indexing: entry (l, n) = c[2l - n]
            let idx = 2 * (row as i64 + 1) - (col as i64 + 1);
            if (0..=6).contains(&idx) {
                c[idx as usize]
            } else {
                0.0
            }
        });
        dets[k - 1] = m.determinant();
    }
    dets
}

/// Sign-preserving logarithm: ln(x) for x > 0, -ln|x| for x < 0, 0 at 0.
pub fn signed_log(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else if x < 0.0 {
        -x.abs().ln()
    } else {
        0.0
    }
}

/// Stability verdicts from both routes, reported side by side (never
/// silently reconciled).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Characteristic polynomial coefficients a_1..a_6.
    pub coefficients: [f64; 6],
    /// Hurwitz determinants theta_1..theta_6 (kappa-normalized units).
    pub hurwitz_dets: [f64; 6],
    /// Signed-log of theta_5.
    pub theta5: f64,
    /// Signed-log of theta_6.
    pub theta6: f64,
    /// All Hurwitz determinants positive.
    pub rh_stable: bool,
    /// Max real eigenvalue part strictly negative.
    pub eig_stable: bool,
    pub max_real_eig: f64,
}

impl StabilityReport {
    /// Whether the two stability routes agree.
    pub fn routes_agree(&self) -> bool {
        self.rh_stable == self.eig_stable
    }

    /// Operational stability gate used before solving for the covariance.
    pub fn margin_stable(&self, kappa: f64) -> bool {
        self.max_real_eig < -REL_MARGIN * kappa
    }
}

/// Evaluates both stability routes for the working point.
pub fn stability(
    a: &Matrix6<f64>,
    p: &SystemParams,
    d: &DerivedConstants,
    s: &SteadyState,
) -> StabilityReport {
    let coefficients = characteristic_coefficients(p, d, s);
    let hurwitz_dets = hurwitz_determinants(&coefficients, d.kappa);
    let max_real_eig = max_real_eigenvalue(a);
    StabilityReport {
        coefficients,
        hurwitz_dets,
        theta5: signed_log(hurwitz_dets[4]),
        theta6: signed_log(hurwitz_dets[5]),
        rh_stable: hurwitz_dets.iter().all(|&t| t > 0.0),
        eig_stable: max_real_eig < 0.0,
        max_real_eig,
    }
}

/// Solves A V + V A^T = -D by dense vectorization (Kronecker sum, 36x36 LU).
///
/// Requires max Re(eig A) < -margin; the result is exactly symmetrized
/// (the defect removed is itself a solution component, so the residual is
/// not degraded).
pub fn solve_lyapunov(
    a: &Matrix6<f64>,
    d: &Matrix6<f64>,
    margin: f64,
) -> Result<Matrix6<f64>, DynamicsError> {
    let max_real_eig = max_real_eigenvalue(a);
    if max_real_eig >= -margin {
        return Err(DynamicsError::Unstable {
            max_real_eig,
            margin,
        });
    }
    // column-major vec: M[6q + r, 6q' + r'] = delta_qq' A[r,r'] + A[q,q'] delta_rr'
    let mut m = DMatrix::<f64>::zeros(36, 36);
    for q in 0..6 {
        for r in 0..6 {
            for c in 0..6 {
                m[(6 * q + r, 6 * q + c)] += a[(r, c)];
                m[(6 * r + q, 6 * c + q)] += a[(r, c)];
            }
        }
    }
    let rhs = DVector::<f64>::from_fn(36, |i, _| -d[(i % 6, i / 6)]);
    let sol = m.lu().solve(&rhs).ok_or(DynamicsError::SingularSystem)?;
    let v = Matrix6::from_fn(|r, c| sol[6 * c + r]);
    Ok(0.5 * (v + v.transpose()))
}

/// Relative residual ||A V + V A^T + D|| / ||D|| (Frobenius).
pub fn lyapunov_residual(a: &Matrix6<f64>, v: &Matrix6<f64>, d: &Matrix6<f64>) -> f64 {
    (a * v + v * a.transpose() + d).norm() / d.norm()
}

/// Symplectic eigenvalues of a 6x6 covariance matrix (moduli of the
/// eigenvalues of i Omega V, one per mode). Physical states have all
/// values >= 1/2.
///
/// Computed through a Cholesky factor V = L L^T: K = L^T Omega L is
/// antisymmetric (hence normal) with eigenvalues +/- i nu_j, so its singular
/// values are the nu_j, each doubled. The SVD route converges
/// unconditionally — a general QR iteration on Omega V can stall on its
/// exactly degenerate imaginary pairs — and keeps absolute accuracy
/// ~ eps * nu_max in the smallest value, which squaring K would destroy.
/// Returns NaN if V is not positive definite.
pub fn symplectic_eigenvalues(v: &Matrix6<f64>) -> [f64; 3] {
    let l = match Cholesky::new(*v) {
        Some(c) => c.unpack(),
        None => return [f64::NAN; 3],
    };
    // Omega L with Omega = blkdiag([[0,1],[-1,0]]; x3)
    let mut omega_l = Matrix6::<f64>::zeros();
    for b in 0..3 {
        for c in 0..6 {
            omega_l[(2 * b, c)] = l[(2 * b + 1, c)];
            omega_l[(2 * b + 1, c)] = -l[(2 * b, c)];
        }
    }
    let k = l.transpose() * omega_l;
    let mut nus: Vec<f64> = k.svd(false, false).singular_values.iter().copied().collect();
    nus.sort_by(|x, y| x.partial_cmp(y).unwrap());
    [nus[0], nus[2], nus[4]]
}

/// Drift, diffusion, and stationary covariance of the fluctuations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianState {
    pub drift: Matrix6<f64>,
    pub diffusion: Matrix6<f64>,
    pub covariance: Matrix6<f64>,
    pub stable: bool,
    /// Relative Lyapunov residual of the covariance.
    pub residual: f64,
    /// Smallest symplectic eigenvalue of the covariance.
    pub min_symplectic: f64,
}

/// Builds the fluctuation matrices and solves for the stationary covariance.
/// Fails with [`DynamicsError::Unstable`] when the working point is outside
/// the stability margin; sweep drivers record such points instead of aborting.
pub fn gaussian_state(
    p: &SystemParams,
    d: &DerivedConstants,
    s: &SteadyState,
) -> Result<GaussianState, DynamicsError> {
    let a = build_drift(p, d, s);
    let dm = build_diffusion(p, d);
    let v = solve_lyapunov(&a, &dm, REL_MARGIN * d.kappa)?;
    let residual = lyapunov_residual(&a, &v, &dm);
    let min_symplectic = symplectic_eigenvalues(&v)[0];
    Ok(GaussianState {
        drift: a,
        diffusion: dm,
        covariance: v,
        stable: true,
        residual,
        min_symplectic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{steady_state, DriveConfig, InputPort, RotationSense};
    use crate::params::{derive_constants, silica, thermal_occupation};
    use approx::assert_relative_eq;

    fn working_point(
        j_over_kappa: f64,
        delta_c_over_wm: f64,
        omega: f64,
        port: InputPort,
    ) -> (
        crate::params::SystemParams,
        crate::params::DerivedConstants,
        SteadyState,
    ) {
        let mut p = silica();
        let d = derive_constants(&p).unwrap();
        p.backscattering = j_over_kappa * d.kappa;
        let drive = DriveConfig {
            power: 0.02,
            delta_c: delta_c_over_wm * p.omega_m,
            omega,
            input_port: port,
            rotation: RotationSense::Cw,
        };
        let s = steady_state(&p, &d, &drive).unwrap();
        (p, d, s)
    }

    #[test]
    fn drift_entries_follow_couplings() {
        let (p, d, s) = working_point(1.0, 1.2, 8e3, InputPort::Left);
        let a = build_drift(&p, &d, &s);
        assert_eq!(a[(0, 4)], -s.g_driven.im);
        assert_eq!(a[(1, 4)], s.g_driven.re);
        assert_eq!(a[(2, 4)], -s.g_reflected.im);
        assert_eq!(a[(3, 4)], s.g_reflected.re);
        assert_eq!(a[(5, 0)], s.g_driven.re);
        assert_eq!(a[(5, 1)], s.g_driven.im);
        assert_eq!(a[(4, 5)], p.omega_m);
        assert_eq!(a[(5, 4)], -p.omega_m);
        assert_eq!(a[(5, 5)], -p.gamma_m);
        assert_eq!(a[(0, 1)], s.delta_tilde_driven);
        assert_eq!(a[(0, 3)], p.backscattering);
        assert_eq!(a[(4, 0)], 0.0);
    }

    #[test]
    fn diffusion_is_input_noise_diagonal() {
        let p = silica();
        let d = derive_constants(&p).unwrap();
        let dm = build_diffusion(&p, &d);
        for i in 0..4 {
            assert_eq!(dm[(i, i)], d.kappa);
        }
        assert_eq!(dm[(4, 4)], 0.0);
        assert_relative_eq!(
            dm[(5, 5)],
            p.gamma_m * (2.0 * thermal_occupation(p.omega_m, p.t_bath) + 1.0),
            max_relative = 1e-15
        );
        assert_eq!(dm.lower_triangle() - Matrix6::from_diagonal(&dm.diagonal()), Matrix6::zeros());
    }

    /// Iterative trace-based characteristic polynomial, used as an
    /// independent check of the closed forms.
    fn charpoly_leverrier(a: &Matrix6<f64>) -> [f64; 6] {
        let mut coeffs = [0.0_f64; 6];
        let mut m = *a;
        let mut c = -m.trace();
        coeffs[0] = c;
        for k in 2..=6 {
            m = a * (m + Matrix6::from_diagonal_element(c));
            c = -m.trace() / k as f64;
            coeffs[k - 1] = c;
        }
        coeffs
    }

    #[test]
    fn closed_form_coefficients_match_leverrier() {
        let cases = [
            working_point(0.0, 1.0, 8e3, InputPort::Left),
            working_point(1.0, 0.8, 23e3, InputPort::Right),
            working_point(2.0, 1.7, 23e3, InputPort::Left),
            working_point(0.5, 2.5, 40e3, InputPort::Right),
        ];
        for (p, d, s) in cases {
            let a = build_drift(&p, &d, &s);
            let closed = characteristic_coefficients(&p, &d, &s);
            let reference = charpoly_leverrier(&a);
            for i in 0..6 {
                assert_relative_eq!(closed[i], reference[i], max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn hurwitz_normalization_preserves_signs() {
        let (p, d, s) = working_point(2.0, 1.2, 23e3, InputPort::Left);
        let coeffs = characteristic_coefficients(&p, &d, &s);
        let a = hurwitz_determinants(&coeffs, d.kappa);
        let b = hurwitz_determinants(&coeffs, 2.0 * d.kappa);
        for i in 0..6 {
            assert_eq!(a[i].signum(), b[i].signum());
        }
    }

    #[test]
    fn stability_routes_agree_on_reference_points() {
        for (j, dc, om, port) in [
            (0.0, 1.0, 8e3, InputPort::Left),
            (0.0, 0.3, 8e3, InputPort::Left),
            (2.0, 0.4, 10e3, InputPort::Left),
            (2.0, 1.6, 23e3, InputPort::Right),
            (1.0, 2.2, 23e3, InputPort::Right),
        ] {
            let (p, d, s) = working_point(j, dc, om, port);
            let a = build_drift(&p, &d, &s);
            let report = stability(&a, &p, &d, &s);
            assert!(
                report.routes_agree(),
                "diverging verdicts at J={j} dc={dc}: {report:?}"
            );
        }
    }

    #[test]
    fn signed_log_conventions() {
        assert_eq!(signed_log(0.0), 0.0);
        assert_relative_eq!(signed_log(f64::exp(3.0)), 3.0);
        assert_relative_eq!(signed_log(-f64::exp(3.0)), -3.0);
    }

    #[test]
    fn lyapunov_identity_case() {
        let a = Matrix6::from_diagonal_element(-1.0);
        let d = Matrix6::identity();
        let v = solve_lyapunov(&a, &d, 1e-9).unwrap();
        assert_relative_eq!(v, Matrix6::from_diagonal_element(0.5), max_relative = 1e-14);
        assert_eq!(max_real_eigenvalue(&a), -1.0);
    }

    #[test]
    fn lyapunov_rejects_unstable_drift() {
        let mut a = Matrix6::from_diagonal_element(-1.0);
        a[(0, 0)] = 1e-12;
        let d = Matrix6::identity();
        assert!(matches!(
            solve_lyapunov(&a, &d, 1e-9),
            Err(DynamicsError::Unstable { .. })
        ));
    }

    #[test]
    fn undriven_cavity_covariance_is_vacuum_plus_thermal() {
        let p = silica();
        let d = derive_constants(&p).unwrap();
        let drive = DriveConfig {
            power: 0.0,
            delta_c: 0.9 * p.omega_m,
            ..DriveConfig::default()
        };
        let s = steady_state(&p, &d, &drive).unwrap();
        let gs = gaussian_state(&p, &d, &s).unwrap();
        let n = d.n_thermal;
        for i in 0..4 {
            assert_relative_eq!(gs.covariance[(i, i)], 0.5, max_relative = 1e-9);
        }
        assert_relative_eq!(gs.covariance[(4, 4)], n + 0.5, max_relative = 1e-9);
        assert_relative_eq!(gs.covariance[(5, 5)], n + 0.5, max_relative = 1e-9);
        for r in 0..6 {
            for c in 0..6 {
                if r != c {
                    assert!(gs.covariance[(r, c)].abs() < 1e-6);
                }
            }
        }
        let nu = symplectic_eigenvalues(&gs.covariance);
        assert_relative_eq!(nu[0], 0.5, max_relative = 1e-9);
        assert_relative_eq!(nu[2], n + 0.5, max_relative = 1e-9);
    }

    #[test]
    fn covariance_invariants_at_driven_point() {
        let (p, d, s) = working_point(1.0, 1.2, 8e3, InputPort::Left);
        let gs = gaussian_state(&p, &d, &s).unwrap();
        let v = gs.covariance;
        assert_eq!(v, v.transpose()); // exact after symmetrization
        assert!(gs.residual <= 1e-8, "residual {}", gs.residual);
        assert!(gs.min_symplectic >= 0.5 - 1e-9);
        assert!(v[(0, 0)] > 0.0 && v[(4, 4)] > 0.0);
    }

    #[test]
    fn unstable_point_reports_error() {
        // blue-detuned high-power working point inside the instability zone
        let (p, d, s) = working_point(2.0, 0.9, 0.0, InputPort::Left);
        let a = build_drift(&p, &d, &s);
        assert!(max_real_eigenvalue(&a) > 0.0);
        assert!(matches!(
            gaussian_state(&p, &d, &s),
            Err(DynamicsError::Unstable { .. })
        ));
    }
}
