//! Estimation errors, the auxiliary variable `zeta`, Lyapunov monitors,
//! exponential-rate fits and the sufficient gain conditions.
//!
//! With `R~ = R R_hat^T` and `x~ = x - x_hat`,
//! `zeta = L_gamma^-1 [(A - K C) x~ + B (I - R~)^T a_I]` obeys
//! `zeta_dot = gamma (A - K0 C) zeta + gamma^-2 B g(t)` with
//! `g = (I - R~)^T a_I_dot + R~^T [a_I]_x R b~`.

mod bounds;
mod lyapunov;

pub use bounds::{
    appendix_gain_bounds, e_of_m, em_spectrum, gain_bounds, m_matrix, BoundInputs, EmSpectrum,
    GainBoundReport,
};
pub use lyapunov::{solve_lyapunov, Lyapunov, LYAPUNOV_RESIDUAL_TOL};

use nalgebra::{Matrix6, Vector6};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::observer::{GainSet, ObserverState, SystemMatrices};
use crate::so3::{euler_zyx, psi, skew, so3_distance, Mat3, Rotation, Vec3};
use crate::vehicle::TrueState;

/// Raw estimation errors at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Errors {
    pub tilde_x: Vector6<f64>,
    /// `R R_hat^T`.
    pub r_tilde: Rotation,
    pub dist_r: f64,
    /// ZYX angles of `R~` as `[roll, pitch, yaw]`.
    pub euler_err: Vec3,
    pub tilde_b: Vec3,
}

impl Errors {
    pub fn p_err(&self) -> Vec3 {
        self.tilde_x.fixed_rows::<3>(0).into_owned()
    }

    pub fn v_err(&self) -> Vec3 {
        self.tilde_x.fixed_rows::<3>(3).into_owned()
    }
}

/// Errors plus the monitor values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSnapshot {
    pub t: f64,
    pub tilde_x: [f64; 6],
    pub dist_r: f64,
    pub euler_err: [f64; 3],
    pub tilde_b: [f64; 3],
    pub zeta: [f64; 6],
    pub v: f64,
    pub w: f64,
}

pub fn compute_errors(truth: &TrueState, gyro_bias: &Vec3, est: &ObserverState) -> Errors {
    let mut x = Vector6::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&truth.p);
    x.fixed_rows_mut::<3>(3).copy_from(&truth.v);
    let r_tilde = truth.attitude * est.r_hat.transpose();
    Errors {
        tilde_x: x - est.x_hat,
        r_tilde,
        dist_r: so3_distance(&r_tilde),
        euler_err: euler_zyx(&r_tilde),
        tilde_b: gyro_bias - est.b_hat,
    }
}

/// `L_gamma^-1 [(A - K C) x~ + B (I - R~)^T a_I]`.
pub fn compute_zeta(
    tilde_x: &Vector6<f64>,
    r_tilde: &Rotation,
    a_inertial: &Vec3,
    gains: &GainSet,
    sys: &SystemMatrices,
) -> Vector6<f64> {
    let coupling = (Mat3::identity() - r_tilde.matrix()).transpose() * a_inertial;
    let inner = gains.closed_loop(sys) * tilde_x + sys.b * coupling;
    let inv = gains.l_gamma.map_diagonal(|d| 1.0 / d);
    inner.component_mul(&inv)
}

/// `g(t) = (I - R~)^T a_I_dot + R~^T [a_I]_x R b~`.
pub fn zeta_forcing(
    r_tilde: &Rotation,
    attitude: &Rotation,
    a_inertial: &Vec3,
    a_inertial_rate: &Vec3,
    tilde_b: &Vec3,
) -> Vec3 {
    (Mat3::identity() - r_tilde.matrix()).transpose() * a_inertial_rate
        + r_tilde.matrix().transpose() * skew(a_inertial) * attitude.rotate(tilde_b)
}

/// Right-hand side of the `zeta` dynamics.
pub fn zeta_rate(
    zeta: &Vector6<f64>,
    forcing: &Vec3,
    gains: &GainSet,
    sys: &SystemMatrices,
) -> Vector6<f64> {
    let g = gains.gamma;
    gains.nominal_closed_loop(sys) * zeta * g + sys.b * forcing / (g * g)
}

/// `V = zeta^T P zeta / gamma`.
pub fn monitor_v(zeta: &Vector6<f64>, p: &Matrix6<f64>, gamma: f64) -> f64 {
    (zeta.transpose() * p * zeta)[0] / gamma
}

/// `W = |R~| + (mu k_R / 2 k_b) |b~|^2 + mu b~^T R_hat^T psi(R~) + gamma^5 V`,
/// with `|R~| = tr(I - R~) / 4`.
pub fn monitor_w(errors: &Errors, r_hat: &Rotation, gains: &GainSet, mu: f64, v: f64) -> f64 {
    let b = &errors.tilde_b;
    errors.dist_r
        + mu * gains.k_r / (2.0 * gains.k_b) * b.norm_squared()
        + mu * b.dot(&r_hat.inverse_rotate(&psi(errors.r_tilde.matrix())))
        + gains.gamma.powi(5) * v
}

/// Bound on `d|R~|/dt`: `c_b + k_R (rho1 |m_I|^2 + rho2 c2 c_hat2)`.
pub fn attitude_rate_bound(gains: &GainSet, m_inertial: &Vec3, c2: f64) -> f64 {
    let c_b = 2.0 * gains.c5 + gains.eps_b;
    c_b + gains.k_r * (gains.rho1 * m_inertial.norm_squared() + gains.rho2 * c2 * gains.c_hat2)
}

/// Least-squares fit of `log(value) = intercept + rate t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Minimum number of samples [`fit_exponential_rate`] accepts.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits an exponential to the samples with `t >= t_start` (and `t <= t_end`
/// when given).
pub fn fit_exponential_rate(
    series: &[(f64, f64)],
    t_start: f64,
    t_end: Option<f64>,
) -> Result<ExpFit> {
    let window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_start && t_end.is_none_or(|e| t <= e))
        .collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: window.len(),
        });
    }
    if let Some(&(t, value)) = window.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveSeries { t, value });
    }
    let n = window.len() as f64;
    let mean_t = window.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = window.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in &window {
        let (dt, dy) = (t - mean_t, v.ln() - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::TooFewSamples { needed: 2, got: 1 });
    }
    let rate = sty / stt;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sty * sty / (stt * syy)
    };
    Ok(ExpFit {
        rate,
        intercept: mean_y - rate * mean_t,
        r_squared,
        samples: window.len(),
    })
}
