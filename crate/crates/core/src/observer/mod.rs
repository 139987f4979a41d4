//! Navigation observers on SO(3) x R^9.
//!
//! Two variants share one integration scheme:
//!
//! * [`Variant::Proposed`] couples attitude and translation through the
//!   innovations `sigma_R` (which compares the accelerometer with the
//!   saturated translational residual) and `sigma_x`.
//! * [`Variant::Adhoc`] is the cascaded baseline: a complementary filter that
//!   assumes `a_I = -g e3`, feeding a Luenberger translational observer.

mod gains;
mod integrate;

pub use gains::{
    l_gamma, spectral_abscissa, synthesize_gains, GainParams, GainSet, SystemMatrices,
};
pub use integrate::{adhoc_step, proposed_step, Measurement, MeasurementHold, NavObserver};

use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::so3::{sat, skew, Rotation, Vec3};
use crate::vehicle::{ImuSample, E3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Proposed,
    Adhoc,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::Adhoc => "adhoc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    /// `[p_hat; v_hat]`.
    pub x_hat: Vector6<f64>,
    pub r_hat: Rotation,
    pub b_hat: Vec3,
}

impl ObserverState {
    pub fn new(p_hat: Vec3, v_hat: Vec3, r_hat: Rotation, b_hat: Vec3) -> Self {
        let mut x_hat = Vector6::zeros();
        x_hat.fixed_rows_mut::<3>(0).copy_from(&p_hat);
        x_hat.fixed_rows_mut::<3>(3).copy_from(&v_hat);
        ObserverState {
            x_hat,
            r_hat,
            b_hat,
        }
    }

    pub fn p_hat(&self) -> Vec3 {
        self.x_hat.fixed_rows::<3>(0).into_owned()
    }

    pub fn v_hat(&self) -> Vec3 {
        self.x_hat.fixed_rows::<3>(3).into_owned()
    }

    pub fn renormalized(&self) -> Self {
        ObserverState {
            r_hat: self.r_hat.renormalized(),
            ..*self
        }
    }

    /// Largest absolute entry across all components, for divergence checks.
    pub fn max_abs(&self) -> f64 {
        self.x_hat
            .amax()
            .max(self.b_hat.amax())
            .max(self.r_hat.matrix().amax())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovations {
    pub sigma_r: Vec3,
    pub sigma_p: Vec3,
    pub sigma_v: Vec3,
    /// Whether the saturation clipped `K_v (y - C x_hat)`.
    pub sat_active: bool,
    /// `|K_v (y - C x_hat)|` before saturation.
    pub kv_residual_norm: f64,
}

impl Innovations {
    pub fn sigma_x(&self) -> Vector6<f64> {
        let mut s = Vector6::zeros();
        s.fixed_rows_mut::<3>(0).copy_from(&self.sigma_p);
        s.fixed_rows_mut::<3>(3).copy_from(&self.sigma_v);
        s
    }
}

/// `K (y - C x_hat)` from a precomputed `K y`.
#[inline]
pub(crate) fn output_correction(
    gains: &GainSet,
    ky: &Vector6<f64>,
    x_hat: &Vector6<f64>,
) -> Vector6<f64> {
    ky - gains.kc * x_hat
}

/// `K (y - C x_hat)`.
pub fn output_residual(gains: &GainSet, y: &DVector<f64>, x_hat: &Vector6<f64>) -> Vector6<f64> {
    let ky = Vector6::from_iterator((&gains.k * y).iter().copied());
    output_correction(gains, &ky, x_hat)
}

pub(crate) fn proposed_innovations_from(
    imu: &ImuSample,
    correction: &Vector6<f64>,
    r_hat: &Rotation,
    gains: &GainSet,
    m_inertial: &Vec3,
) -> Innovations {
    let kv_residual: Vec3 = correction.fixed_rows::<3>(3).into_owned();
    let kv_residual_norm = kv_residual.norm();
    let clipped = sat(gains.c_hat2, &kv_residual);
    let sigma_r = gains.rho1 * imu.m_body.cross(&r_hat.inverse_rotate(m_inertial))
        + gains.rho2 * imu.a_body.cross(&r_hat.inverse_rotate(&clipped));
    let sigma_p =
        gains.k_r * (gains.kv_cp_inv * skew(&r_hat.rotate(&sigma_r)) * r_hat.rotate(&imu.a_body));
    let sigma_v = gains.kp_cp * sigma_p;
    Innovations {
        sigma_r,
        sigma_p,
        sigma_v,
        sat_active: kv_residual_norm > gains.c_hat2,
        kv_residual_norm,
    }
}

/// Innovations of the coupled observer.
///
/// `sigma_R = rho1 (m_B x R_hat^T m_I) + rho2 (a_B x R_hat^T sat(K_v (y - C x_hat)))`,
/// `sigma_p = k_R (K_v C_p)^-1 [R_hat sigma_R]_x R_hat a_B`, `sigma_v = K_p C_p sigma_p`.
pub fn proposed_innovations(
    imu: &ImuSample,
    y: &DVector<f64>,
    st: &ObserverState,
    gains: &GainSet,
    m_inertial: &Vec3,
) -> Innovations {
    let correction = output_residual(gains, y, &st.x_hat);
    proposed_innovations_from(imu, &correction, &st.r_hat, gains, m_inertial)
}

/// Attitude innovation of the cascaded baseline, which takes `-g e3` as the
/// inertial direction of the accelerometer reading.
pub fn adhoc_innovation(
    imu: &ImuSample,
    st: &ObserverState,
    gains: &GainSet,
    m_inertial: &Vec3,
    gravity: f64,
) -> Vec3 {
    gains.rho1 * imu.m_body.cross(&st.r_hat.inverse_rotate(m_inertial))
        + gains.rho2 * imu.a_body.cross(&st.r_hat.inverse_rotate(&(-gravity * E3)))
}
