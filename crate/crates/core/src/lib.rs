//! Position-aided inertial navigation on SO(3) x R^9.
//!
//! The crate estimates position, velocity, attitude and gyro bias of a rigid
//! body from IMU readings (gyro, accelerometer, magnetometer) and a linear
//! position output `y = C_p p`, obtained either from a direct position fix or
//! from ranges to known anchors. It contains:
//!
//! - [`so3`]: rotation primitives, saturation and the smooth projection.
//! - [`vehicle`]: the ground-truth trajectory and sensor models.
//! - [`range`]: the range-to-linear-output frontend.
//! - [`observer`]: gain synthesis, the coupled observer and the cascaded baseline.
//! - [`diagnostics`]: estimation errors, Lyapunov monitors and gain bounds.
//! - [`harness`]: configuration, the simulation loop and artifact emission.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod observer;
pub mod range;
pub mod so3;
pub mod vehicle;

pub use error::{Error, Result};
