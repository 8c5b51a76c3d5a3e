//! Slow, independent reference implementations used to cross-check the
//! production solvers in unit and integration tests. Nothing here is meant
//! for the hot path: each routine favours transparency over speed and
//! shares no code with the module it checks.

use nalgebra::{Cholesky, Matrix4, Matrix6, Vector6};
use num_complex::Complex64;

use crate::optics::SteadyState;
use crate::params::{DerivedConstants, SystemParams};

/// Nonlinear classical mean-field model in the amplitude basis
/// (Re a1, Im a1, Re a2, Im a2, q, p). Mode 1 is driven, mode 2 reflected;
/// detunings already include the rotation-induced shift but not the static
/// optomechanical displacement, which the model resolves dynamically.
#[derive(Debug, Clone, Copy)]
pub struct ClassicalSystem {
    pub kappa: f64,
    pub backscattering: f64,
    pub delta_driven: f64,
    pub delta_reflected: f64,
    pub g0: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    pub drive: f64,
}

impl ClassicalSystem {
    /// Assembles the mean-field model for a solved operating point.
    pub fn new(p: &SystemParams, d: &DerivedConstants, s: &SteadyState) -> Self {
        Self {
            kappa: d.kappa,
            backscattering: p.backscattering,
            delta_driven: s.delta_driven,
            delta_reflected: s.delta_reflected,
            g0: d.g0,
            omega_m: p.omega_m,
            gamma_m: p.gamma_m,
            drive: s.drive_amplitude,
        }
    }

    /// Time derivative of the classical state.
    pub fn rhs(&self, x: &Vector6<f64>) -> Vector6<f64> {
        let a1 = Complex64::new(x[0], x[1]);
        let a2 = Complex64::new(x[2], x[3]);
        let (q, p) = (x[4], x[5]);
        let i = Complex64::I;
        let shifted = |delta: f64| Complex64::new(self.kappa, delta - self.g0 * q);
        let da1 = -shifted(self.delta_driven) * a1 - i * self.backscattering * a2 + self.drive;
        let da2 = -shifted(self.delta_reflected) * a2 - i * self.backscattering * a1;
        let n_total = a1.norm_sqr() + a2.norm_sqr();
        Vector6::new(
            da1.re,
            da1.im,
            da2.re,
            da2.im,
            self.omega_m * p,
            -self.omega_m * q - self.gamma_m * p + self.g0 * n_total,
        )
    }

    /// Classical state corresponding to a solved operating point.
    pub fn fixed_point(s: &SteadyState) -> Vector6<f64> {
        Vector6::new(
            s.alpha_driven.re,
            s.alpha_driven.im,
            s.alpha_reflected.re,
            s.alpha_reflected.im,
            s.q_s,
            s.p_s,
        )
    }

    /// Central-difference Jacobian of [`Self::rhs`] at `x0`. Steps are
    /// scaled per component so large photon amplitudes keep precision.
    pub fn fd_jacobian(&self, x0: &Vector6<f64>) -> Matrix6<f64> {
        let mut jac = Matrix6::zeros();
        for col in 0..6 {
            let h = 1e-6 * x0[col].abs().max(1.0);
            let mut plus = *x0;
            let mut minus = *x0;
            plus[col] += h;
            minus[col] -= h;
            let df = (self.rhs(&plus) - self.rhs(&minus)) / (2.0 * h);
            jac.set_column(col, &df);
        }
        jac
    }
}

/// Transforms an amplitude-basis Jacobian into the quadrature basis used by
/// the fluctuation model: optical columns/rows pick up the sqrt(2) between
/// mean amplitudes and quadrature means, mechanics are untouched.
pub fn amplitude_to_quadrature(j: &Matrix6<f64>) -> Matrix6<f64> {
    let s = Vector6::new(
        std::f64::consts::SQRT_2,
        std::f64::consts::SQRT_2,
        std::f64::consts::SQRT_2,
        std::f64::consts::SQRT_2,
        1.0,
        1.0,
    );
    Matrix6::from_fn(|r, c| j[(r, c)] * s[r] / s[c])
}

/// Steady covariance by direct time-domain quadrature of
/// integral_0^T exp(At) D exp(A^T t) dt with composite Simpson weights.
/// `steps` must be even; `horizon` should cover several decay times.
pub fn lyapunov_quadrature(
    a: &Matrix6<f64>,
    d: &Matrix6<f64>,
    horizon: f64,
    steps: usize,
) -> Matrix6<f64> {
    assert!(steps >= 2 && steps % 2 == 0, "Simpson rule needs an even step count");
    let h = horizon / steps as f64;
    let propagator = (a * h).exp();
    let mut integrand = *d;
    let mut acc = *d; // weight 1 at t = 0
    for k in 1..=steps {
        integrand = propagator * integrand * propagator.transpose();
        let w = if k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * integrand;
    }
    acc * (h / 3.0)
}

/// Smaller symplectic eigenvalue of the partial transpose, computed from
/// the full spectrum of the transposed covariance with no two-mode shortcut
/// formulas.
///
/// The momentum flip V -> P V P preserves positive definiteness, so the
/// transposed matrix factors as L L^T and K = L^T Omega L is antisymmetric
/// — hence normal — with eigenvalues +/- i nu: the singular values of K are
/// the symplectic spectrum, each value doubled. The SVD cannot stall the
/// way a general QR iteration does on the exactly degenerate imaginary
/// pairs of Omega V, and it resolves the smallest value to absolute
/// accuracy ~ eps * nu_max.
pub fn ppt_nu_minus(v: &Matrix4<f64>) -> f64 {
    let flip = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
    let v_pt = flip * v * flip;
    let l = Cholesky::new(v_pt)
        .expect("covariance must be positive definite")
        .unpack();
    let mut omega_l = Matrix4::<f64>::zeros();
    for b in 0..2 {
        for c in 0..4 {
            omega_l[(2 * b, c)] = l[(2 * b + 1, c)];
            omega_l[(2 * b + 1, c)] = -l[(2 * b, c)];
        }
    }
    let k = l.transpose() * omega_l;
    let mut nus: Vec<f64> = k.svd(false, false).singular_values.iter().copied().collect();
    nus.sort_by(|x, y| x.partial_cmp(y).expect("singular values are finite"));
    nus[0]
}

/// Covariance matrix of a two-mode squeezed vacuum with squeezing `r`,
/// ordered (X1, Y1, X2, Y2) and normalized to vacuum variance 1/2.
pub fn tmsv_covariance(r: f64) -> Matrix4<f64> {
    let ch = (2.0 * r).cosh() / 2.0;
    let sh = (2.0 * r).sinh() / 2.0;
    Matrix4::new(
        ch, 0.0, sh, 0.0, //
        0.0, ch, 0.0, -sh, //
        sh, 0.0, ch, 0.0, //
        0.0, -sh, 0.0, ch,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadrature_matches_analytic_relaxation() {
        // For A = -I the steady covariance is D / 2.
        let a = Matrix6::from_diagonal_element(-1.0);
        let d = Matrix6::from_fn(|r, c| 0.1 * (r + c) as f64 + if r == c { 1.0 } else { 0.0 });
        let v = lyapunov_quadrature(&a, &d, 40.0, 4000);
        assert_relative_eq!(v, d / 2.0, max_relative = 1e-8);
    }

    #[test]
    fn quadrature_step_count_validated() {
        let a = Matrix6::from_diagonal_element(-1.0);
        let d = Matrix6::identity();
        let res = std::panic::catch_unwind(|| lyapunov_quadrature(&a, &d, 1.0, 3));
        assert!(res.is_err());
    }

    #[test]
    fn ppt_spectrum_on_squeezed_state() {
        for r in [0.0, 0.3, 1.2] {
            let nu = ppt_nu_minus(&tmsv_covariance(r));
            assert_relative_eq!(nu, 0.5 * (-2.0 * r).exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn squeezed_covariance_is_pure() {
        // purity: det V = 1/16 for any pure two-mode Gaussian state here
        for r in [0.0, 0.7] {
            assert_relative_eq!(
                tmsv_covariance(r).determinant(),
                1.0 / 16.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn dark_cavity_fixed_point_is_origin() {
        let sys = ClassicalSystem {
            kappa: 1.0,
            backscattering: 0.5,
            delta_driven: 2.0,
            delta_reflected: 1.0,
            g0: 1e-3,
            omega_m: 3.0,
            gamma_m: 0.01,
            drive: 0.0,
        };
        let rhs = sys.rhs(&Vector6::zeros());
        assert_eq!(rhs, Vector6::zeros());
    }

    #[test]
    fn jacobian_recovers_linear_part() {
        // With g0 = 0 the model is linear, so the Jacobian is exact and
        // state independent.
        let sys = ClassicalSystem {
            kappa: 1.5,
            backscattering: 0.8,
            delta_driven: 2.0,
            delta_reflected: -1.0,
            g0: 0.0,
            omega_m: 3.0,
            gamma_m: 0.02,
            drive: 4.0,
        };
        let x = Vector6::new(0.3, -0.2, 0.1, 0.5, -0.4, 0.9);
        let jac = sys.fd_jacobian(&x);
        // columns of the Jacobian reproduce rhs differences exactly
        let probe = Vector6::new(1.0, -2.0, 0.5, 0.25, 3.0, -1.0);
        let lhs = jac * probe;
        let rhs = sys.rhs(&(x + probe)) - sys.rhs(&x);
        assert_relative_eq!(lhs, rhs, epsilon = 1e-6 * probe.norm());
    }

    #[test]
    fn basis_change_rescales_mixed_blocks() {
        let mut j = Matrix6::zeros();
        j[(5, 0)] = 2.0; // mechanics row, optical column: shrinks by sqrt 2
        j[(0, 4)] = 3.0; // optical row, mechanics column: grows by sqrt 2
        j[(1, 1)] = 7.0; // same block: unchanged
        let q = amplitude_to_quadrature(&j);
        assert_relative_eq!(q[(5, 0)], 2.0 / std::f64::consts::SQRT_2);
        assert_relative_eq!(q[(0, 4)], 3.0 * std::f64::consts::SQRT_2);
        assert_relative_eq!(q[(1, 1)], 7.0);
    }
}
