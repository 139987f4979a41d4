//! Ground-truth vehicle motion and the noise-free sensor models.
//!
//! Translation is prescribed analytically; attitude is integrated from the
//! prescribed body rate with exponential-map midpoint steps. The inertial
//! acceleration follows `v_dot = g e3 + a_I`, so a hovering body has
//! `a_I = -g e3`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::so3::{exp_so3, Rotation, Vec3};

pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Step used for central differences of the inertial acceleration.
const ACCEL_FD_STEP: f64 = 1e-4;

/// Prescribed translational motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// Unit circle at height 1 m with phase `2 pi t^2 / 100`.
    AcceleratingCircle,
    /// Stationary at a fixed position.
    Hover { position: [f64; 3] },
}

/// Prescribed body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularRate {
    /// `[sin(0.2 t), cos(0.1 t), sin(0.3 t + pi / 6)]`.
    Sinusoidal,
    Constant {
        omega: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Translation {
    pub p: Vec3,
    pub v: Vec3,
    /// `v_dot - g e3`.
    pub a_inertial: Vec3,
}

impl Trajectory {
    pub fn translation(&self, t: f64, gravity: f64) -> Translation {
        match *self {
            Trajectory::AcceleratingCircle => {
                let phase = PI * t * t / 50.0;
                let rate = PI * t / 25.0;
                let accel = PI / 25.0;
                let (s, c) = phase.sin_cos();
                let p = Vec3::new(c, s, 1.0);
                let v = Vec3::new(-s * rate, c * rate, 0.0);
                let p_ddot = Vec3::new(
                    -c * rate * rate - s * accel,
                    -s * rate * rate + c * accel,
                    0.0,
                );
                Translation {
                    p,
                    v,
                    a_inertial: p_ddot - gravity * E3,
                }
            }
            Trajectory::Hover { position } => Translation {
                p: Vec3::from(position),
                v: Vec3::zeros(),
                a_inertial: -gravity * E3,
            },
        }
    }

    /// Central-difference estimate of `d a_I / dt`.
    pub fn a_inertial_rate(&self, t: f64, gravity: f64) -> Vec3 {
        let h = ACCEL_FD_STEP;
        let ahead = self.translation(t + h, gravity).a_inertial;
        let behind = self.translation(t - h, gravity).a_inertial;
        (ahead - behind) / (2.0 * h)
    }
}

impl AngularRate {
    pub fn omega(&self, t: f64) -> Vec3 {
        match *self {
            AngularRate::Sinusoidal => {
                Vec3::new((0.2 * t).sin(), (0.1 * t).cos(), (0.3 * t + PI / 6.0).sin())
            }
            AngularRate::Constant { omega } => Vec3::from(omega),
        }
    }
}

/// Convenience wrappers for the default (accelerating circle) scenario.
pub fn true_translation(t: f64, gravity: f64) -> Translation {
    Trajectory::AcceleratingCircle.translation(t, gravity)
}

pub fn true_omega(t: f64) -> Vec3 {
    AngularRate::Sinusoidal.omega(t)
}

/// Optional additive white noise. All zeros (the default) means noise-free.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoise {
    pub gyro_std: f64,
    pub accel_std: f64,
    pub mag_std: f64,
    /// Applied to every range, or to every position component for direct fixes.
    pub position_std: f64,
}

/// One realization of the sensor noise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseSample {
    pub gyro: Vec3,
    pub accel: Vec3,
    pub mag: Vec3,
    pub position: Vec<f64>,
}

impl SensorNoise {
    pub fn is_zero(&self) -> bool {
        self.gyro_std == 0.0
            && self.accel_std == 0.0
            && self.mag_std == 0.0
            && self.position_std == 0.0
    }

    /// Draws one sample with `n_position` position-channel components.
    pub fn draw<R: Rng>(&self, rng: &mut R, n_position: usize) -> NoiseSample {
        NoiseSample {
            gyro: draw_vec(rng, self.gyro_std),
            accel: draw_vec(rng, self.accel_std),
            mag: draw_vec(rng, self.mag_std),
            position: (0..n_position)
                .map(|_| draw_scalar(rng, self.position_std))
                .collect(),
        }
    }
}

fn draw_scalar<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

fn draw_vec<R: Rng>(rng: &mut R, std: f64) -> Vec3 {
    Vec3::from_fn(|_, _| draw_scalar(rng, std))
}

impl NoiseSample {
    pub fn zero(n_position: usize) -> Self {
        NoiseSample {
            position: vec![0.0; n_position],
            ..NoiseSample::default()
        }
    }

    pub fn lerp(&self, other: &NoiseSample, s: f64) -> NoiseSample {
        NoiseSample {
            gyro: self.gyro.lerp(&other.gyro, s),
            accel: self.accel.lerp(&other.accel, s),
            mag: self.mag.lerp(&other.mag, s),
            position: self
                .position
                .iter()
                .zip(&other.position)
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        }
    }

    pub fn apply_imu(&self, imu: &ImuSample) -> ImuSample {
        ImuSample {
            omega_y: imu.omega_y + self.gyro,
            a_body: imu.a_body + self.accel,
            m_body: imu.m_body + self.mag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub gravity: f64,
    pub m_inertial: Vec3,
    pub gyro_bias: Vec3,
    pub anchors: Vec<Vec3>,
    pub t_end: f64,
    pub dt: f64,
    pub trajectory: Trajectory,
    pub angular_rate: AngularRate,
    pub initial_attitude: Rotation,
    pub noise: SensorNoise,
}

impl ScenarioConfig {
    /// Anchors of the reference range-sensing setup.
    pub fn default_anchors() -> Vec<Vec3> {
        vec![
            Vec3::new(1.0, 1.0, 2.0),
            Vec3::new(1.0, 3.0, 0.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(6.0, 5.0, 5.0),
        ]
    }

    /// Number of fixed steps covering `[0, t_end]`.
    pub fn step_count(&self) -> usize {
        // Guard against t_end / dt landing a hair under an integer.
        ((self.t_end / self.dt) * (1.0 + 1e-12)).floor() as usize
    }

    pub fn true_state(&self, t: f64, attitude: Rotation) -> TrueState {
        let tr = self.trajectory.translation(t, self.gravity);
        TrueState {
            t,
            p: tr.p,
            v: tr.v,
            a_inertial: tr.a_inertial,
            attitude,
            omega: self.angular_rate.omega(t),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            gravity: 9.81,
            m_inertial: Vec3::new(0.033, 0.1, 0.49),
            gyro_bias: Vec3::repeat(3.0_f64.to_radians()),
            anchors: Self::default_anchors(),
            t_end: 60.0,
            dt: 1e-3,
            trajectory: Trajectory::AcceleratingCircle,
            angular_rate: AngularRate::Sinusoidal,
            initial_attitude: exp_so3(&Vec3::new(PI / 2.0, 0.0, 0.0)),
            noise: SensorNoise::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueState {
    pub t: f64,
    pub p: Vec3,
    pub v: Vec3,
    pub a_inertial: Vec3,
    pub attitude: Rotation,
    pub omega: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Gyro reading, true rate plus constant bias.
    pub omega_y: Vec3,
    /// Apparent acceleration in the body frame.
    pub a_body: Vec3,
    /// Magnetic field in the body frame.
    pub m_body: Vec3,
}

impl ImuSample {
    /// Componentwise `(1 - s) self + s other`.
    pub fn lerp(&self, other: &ImuSample, s: f64) -> ImuSample {
        ImuSample {
            omega_y: self.omega_y.lerp(&other.omega_y, s),
            a_body: self.a_body.lerp(&other.a_body, s),
            m_body: self.m_body.lerp(&other.m_body, s),
        }
    }
}

/// One exponential-map step `R exp(dt [omega(t + dt/2)]_x)`.
pub fn propagate_true_attitude(r: &Rotation, t: f64, dt: f64, rate: &AngularRate) -> Rotation {
    let omega_mid = rate.omega(t + 0.5 * dt);
    r * &exp_so3(&(omega_mid * dt))
}

pub fn measure_imu(state: &TrueState, cfg: &ScenarioConfig) -> ImuSample {
    ImuSample {
        omega_y: state.omega + cfg.gyro_bias,
        a_body: state.attitude.inverse_rotate(&state.a_inertial),
        m_body: state.attitude.inverse_rotate(&cfg.m_inertial),
    }
}

pub fn measure_ranges(p: &Vec3, anchors: &[Vec3]) -> Vec<f64> {
    anchors.iter().map(|a| (p - a).norm()).collect()
}

/// Steps the ground truth forward on a fixed grid.
#[derive(Debug, Clone)]
pub struct TruthSimulator {
    cfg: ScenarioConfig,
    step: usize,
    attitude: Rotation,
}

impl TruthSimulator {
    pub fn new(cfg: ScenarioConfig) -> Self {
        let attitude = cfg.initial_attitude;
        TruthSimulator {
            cfg,
            step: 0,
            attitude,
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn state(&self) -> TrueState {
        self.cfg.true_state(self.time(), self.attitude)
    }

    /// State a fraction `s` of the next step ahead, reached by one attitude
    /// step of length `s dt`. `peek(1.0)` equals the state after `advance`.
    pub fn peek(&self, s: f64) -> TrueState {
        let t = self.time();
        if s == 0.0 {
            return self.state();
        }
        let h = s * self.cfg.dt;
        let attitude = propagate_true_attitude(&self.attitude, t, h, &self.cfg.angular_rate);
        self.cfg.true_state(t + h, attitude)
    }

    pub fn advance(&mut self) -> TrueState {
        let t = self.time();
        self.attitude =
            propagate_true_attitude(&self.attitude, t, self.cfg.dt, &self.cfg.angular_rate);
        self.step += 1;
        self.state()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }
}

/// Empirical trajectory constants over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `min |m_I x a_I|`.
    pub c0: f64,
    /// `min |a_I|`.
    pub c1: f64,
    /// `max |a_I|`.
    pub c2: f64,
    /// `max |d a_I / dt|`.
    pub c3: f64,
    /// `max |omega|`.
    pub c4: f64,
    /// `|b_omega|`.
    pub c5: f64,
    pub t_of_c0: f64,
    pub grid_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AssumptionViolation {
    /// Magnetic field and apparent acceleration become collinear.
    Collinear { c0: f64, t: f64 },
    /// Apparent acceleration vanishes somewhere on the grid.
    VanishingAcceleration { c1: f64 },
    /// Saturation level is not above `sqrt(8) c2`.
    SaturationTooLow { c_hat2: f64, required: f64 },
}

impl std::fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AssumptionViolation::Collinear { c0, t } => write!(
                f,
                "m_I and a_I are collinear (min |m_I x a_I| = {c0:e} at t = {t})"
            ),
            AssumptionViolation::VanishingAcceleration { c1 } => {
                write!(f, "apparent acceleration vanishes (min |a_I| = {c1:e})")
            }
            AssumptionViolation::SaturationTooLow { c_hat2, required } => write!(
                f,
                "c_hat2 = {c_hat2} does not exceed sqrt(8) c2 = {required}"
            ),
        }
    }
}

/// Threshold below which `c0` or `c1` counts as zero.
pub const ASSUMPTION_TOL: f64 = 1e-9;

impl AssumptionReport {
    /// Violations of the observability and boundedness assumptions. The
    /// saturation check is skipped when `c_hat2` is `None`.
    pub fn violations(&self, c_hat2: Option<f64>) -> Vec<AssumptionViolation> {
        let mut out = Vec::new();
        if self.c0 <= ASSUMPTION_TOL {
            out.push(AssumptionViolation::Collinear {
                c0: self.c0,
                t: self.t_of_c0,
            });
        }
        if self.c1 <= ASSUMPTION_TOL {
            out.push(AssumptionViolation::VanishingAcceleration { c1: self.c1 });
        }
        if let Some(c_hat2) = c_hat2 {
            let required = 8f64.sqrt() * self.c2;
            if c_hat2 <= required {
                out.push(AssumptionViolation::SaturationTooLow { c_hat2, required });
            }
        }
        out
    }

    pub fn observable(&self) -> bool {
        self.violations(None).is_empty()
    }
}

/// Evaluates the trajectory constants on `t_grid` (must be nonempty).
pub fn validate_assumptions(cfg: &ScenarioConfig, t_grid: &[f64]) -> AssumptionReport {
    assert!(!t_grid.is_empty(), "empty time grid");
    let mut r = AssumptionReport {
        c0: f64::INFINITY,
        c1: f64::INFINITY,
        c2: 0.0,
        c3: 0.0,
        c4: 0.0,
        c5: cfg.gyro_bias.norm(),
        t_of_c0: t_grid[0],
        grid_len: t_grid.len(),
    };
    for &t in t_grid {
        let a = cfg.trajectory.translation(t, cfg.gravity).a_inertial;
        let cross = cfg.m_inertial.cross(&a).norm();
        if cross < r.c0 {
            r.c0 = cross;
            r.t_of_c0 = t;
        }
        let an = a.norm();
        r.c1 = r.c1.min(an);
        r.c2 = r.c2.max(an);
        r.c3 =
            r.c3.max(cfg.trajectory.a_inertial_rate(t, cfg.gravity).norm());
        r.c4 = r.c4.max(cfg.angular_rate.omega(t).norm());
    }
    r
}

/// Uniform grid `0, dt, ..., t_end`.
pub fn time_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let n = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}
