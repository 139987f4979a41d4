//! Rotation-group primitives shared by the simulator and both observers.
//!
//! Rotations are stored as plain 3x3 matrices. `skew`/`vex`/`psi` follow the
//! usual cross-product conventions, [`so3_distance`] is the normalized distance
//! `tr(I - R) / 4` in `[0, 1]`, and [`sat`]/[`proj`] are the saturation and
//! smooth projection operators used in the bias and attitude update laws.

use std::ops::Mul;

use nalgebra::{Matrix3, SVector, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `|S + S^T|_F` accepted by [`vex`].
pub const SKEW_TOL: f64 = 1e-9;
/// Tolerance on `|R R^T - I|` and `|det R - 1|` accepted by [`Rotation::new`].
pub const ROTATION_TOL: f64 = 1e-9;

const SMALL_ANGLE: f64 = 1e-6;

/// An element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps `m` after checking orthonormality and unit determinant.
    pub fn new(m: Mat3) -> Result<Self> {
        let err = orthonormality_error(&m);
        if err > ROTATION_TOL || !err.is_finite() {
            return Err(Error::NotRotation(err));
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checking. Callers guarantee `m` is a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Largest of `|R R^T - I|_F` and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Nearest rotation in the Frobenius sense (polar factor).
    pub fn renormalized(&self) -> Self {
        nearest_rotation(&self.0)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn inverse_rotate(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

fn orthonormality_error(m: &Mat3) -> f64 {
    let ortho = (m * m.transpose() - Mat3::identity()).norm();
    ortho.max((m.determinant() - 1.0).abs())
}

/// `[x]_x`, so that `skew(x) * y == x.cross(y)`.
#[inline]
pub fn skew(x: &Vec3) -> Mat3 {
    Mat3::new(0.0, -x.z, x.y, x.z, 0.0, -x.x, -x.y, x.x, 0.0)
}

/// Inverse of [`skew`]. Rejects matrices whose symmetric part exceeds [`SKEW_TOL`].
pub fn vex(s: &Mat3) -> Result<Vec3> {
    let asym = (s + s.transpose()).norm();
    if asym > SKEW_TOL || !asym.is_finite() {
        return Err(Error::NotSkew(asym));
    }
    Ok(Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)]))
}

/// `vex` of the skew part of an arbitrary matrix.
#[inline]
pub fn psi(a: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        a[(2, 1)] - a[(1, 2)],
        a[(0, 2)] - a[(2, 0)],
        a[(1, 0)] - a[(0, 1)],
    )
}

/// Projection onto so(3): `(A - A^T) / 2`.
#[inline]
pub fn skew_part(a: &Mat3) -> Mat3 {
    0.5 * (a - a.transpose())
}

/// Normalized distance `tr(I - R) / 4`, clamped to `[0, 1]` against round-off.
pub fn so3_distance(r: &Rotation) -> f64 {
    (0.25 * (3.0 - r.0.trace())).clamp(0.0, 1.0)
}

/// Rodrigues' formula for `exp([v]_x)`.
pub fn exp_so3(v: &Vec3) -> Rotation {
    let theta_sq = v.norm_squared();
    let theta = theta_sq.sqrt();
    let k = skew(v);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    Rotation(Mat3::identity() + a * k + b * (k * k))
}

/// Nearest rotation to `m` (polar decomposition through the SVD).
pub fn nearest_rotation(m: &Mat3) -> Rotation {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut d = Mat3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Rotation(u * d * v_t)
}

/// ZYX (yaw-pitch-roll) Euler angles, returned as `[roll, pitch, yaw]`.
pub fn euler_zyx(r: &Rotation) -> Vec3 {
    let m = &r.0;
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let pitch = -m[(2, 0)].clamp(-1.0, 1.0).asin();
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    Vec3::new(roll, pitch, yaw)
}

/// `min(1, c / |x|) x`; the zero vector maps to itself.
pub fn sat<const N: usize>(c: f64, x: &SVector<f64, N>) -> SVector<f64, N> {
    let n = x.norm();
    if n <= c {
        *x
    } else {
        x * (c / n)
    }
}

/// Smooth projection keeping an estimate inside the ball of radius `c + eps`.
///
/// Returns `mu` unchanged inside the ball of radius `c` or when `mu` points
/// inward; otherwise removes a fraction `theta = min(1, (|phi| - c) / eps)` of
/// the radial component.
pub fn proj(c: f64, eps: f64, phi_hat: &Vec3, mu: &Vec3) -> Vec3 {
    let n = phi_hat.norm();
    let radial = phi_hat.dot(mu);
    if n < c || radial <= 0.0 {
        return *mu;
    }
    let theta = ((n - c) / eps).min(1.0);
    mu - phi_hat * (theta * radial / (n * n))
}

/// Rescales `phi` onto the closed ball of radius `r` if it lies outside.
pub fn clamp_to_ball(r: f64, phi: &Vec3) -> Vec3 {
    sat(r, phi)
}
