//! Discrete-time stepping of the observers.
//!
//! The attitude estimate moves on SO(3) through a fourth-order commutator-free
//! exponential scheme; `x_hat` and `b_hat` move through the classical RK4
//! tableau that the scheme reduces to on vector spaces. Innovations are
//! recomputed at every stage and the bias projection is applied to every stage
//! derivative. After each step the bias estimate is clamped to the closed ball
//! of radius `c5 + eps_b`.
//!
//! The attitude correction is stiff when the apparent acceleration is large
//! (its linearized rate is roughly `k_R (rho1 |m|^2 + rho2 |a|^2)`), so a
//! sampling interval is split into as many internal substeps as needed to keep
//! `h * rate` below [`NavObserver::stiffness_limit`].

use nalgebra::{DVector, Vector6};

use super::{
    adhoc_innovation, output_correction, proposed_innovations_from, GainSet, Innovations,
    ObserverState, SystemMatrices, Variant,
};
use crate::so3::{exp_so3, proj, sat, Rotation, Vec3};
use crate::vehicle::{ImuSample, E3};

/// One sample of everything the observer consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub imu: ImuSample,
    pub y: DVector<f64>,
}

/// How measurements are reconstructed between two sampling instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementHold {
    /// Hold the sample taken at the start of the interval.
    ZeroOrder,
    /// Interpolate linearly between the samples at both ends.
    #[default]
    Linear,
}

/// Measurement after the output gain has been applied (`K y` instead of `y`).
#[derive(Debug, Clone, Copy)]
struct StageInput {
    imu: ImuSample,
    ky: Vector6<f64>,
}

impl StageInput {
    fn lerp(&self, other: &StageInput, s: f64) -> StageInput {
        StageInput {
            imu: self.imu.lerp(&other.imu, s),
            ky: self.ky.lerp(&other.ky, s),
        }
    }
}

struct Derivative {
    body_rate: Vec3,
    x_dot: Vector6<f64>,
    b_dot: Vec3,
}

#[derive(Debug, Clone)]
pub struct NavObserver {
    pub variant: Variant,
    pub gains: GainSet,
    pub sys: SystemMatrices,
    pub m_inertial: Vec3,
    pub gravity: f64,
    pub hold: MeasurementHold,
    /// Upper bound on `h * rate` per internal substep; `None` disables substepping.
    pub stiffness_limit: Option<f64>,
}

impl NavObserver {
    pub fn new(
        variant: Variant,
        gains: GainSet,
        sys: SystemMatrices,
        m_inertial: Vec3,
        gravity: f64,
    ) -> Self {
        NavObserver {
            variant,
            gains,
            sys,
            m_inertial,
            gravity,
            hold: MeasurementHold::Linear,
            stiffness_limit: Some(0.5),
        }
    }

    fn prepare(&self, m: &Measurement) -> StageInput {
        let ky = &self.gains.k * &m.y;
        StageInput {
            imu: m.imu,
            ky: Vector6::from_iterator(ky.iter().copied()),
        }
    }

    fn innovations_at(&self, st: &ObserverState, input: &StageInput) -> Innovations {
        let correction = output_correction(&self.gains, &input.ky, &st.x_hat);
        match self.variant {
            Variant::Proposed => proposed_innovations_from(
                &input.imu,
                &correction,
                &st.r_hat,
                &self.gains,
                &self.m_inertial,
            ),
            Variant::Adhoc => {
                let kv_residual: Vec3 = correction.fixed_rows::<3>(3).into_owned();
                Innovations {
                    sigma_r: adhoc_innovation(
                        &input.imu,
                        st,
                        &self.gains,
                        &self.m_inertial,
                        self.gravity,
                    ),
                    sigma_p: Vec3::zeros(),
                    sigma_v: Vec3::zeros(),
                    sat_active: false,
                    kv_residual_norm: kv_residual.norm(),
                }
            }
        }
    }

    /// Innovations at the given state for a single measurement.
    pub fn innovations(&self, st: &ObserverState, m: &Measurement) -> Innovations {
        self.innovations_at(st, &self.prepare(m))
    }

    fn derivative(&self, st: &ObserverState, input: &StageInput) -> Derivative {
        let g = &self.gains;
        let inn = self.innovations_at(st, input);
        let body_rate = input.imu.omega_y - st.b_hat + g.k_r * inn.sigma_r;
        let b_dot = proj(g.c5, g.eps_b, &st.b_hat, &(-g.k_b * inn.sigma_r));

        let accel = self.gravity * E3 + st.r_hat.rotate(&input.imu.a_body);
        // A x_hat + B (g e3 + R_hat a_B) + K (y - C x_hat)
        let mut drift = Vector6::zeros();
        drift
            .fixed_rows_mut::<3>(0)
            .copy_from(&st.x_hat.fixed_rows::<3>(3));
        drift.fixed_rows_mut::<3>(3).copy_from(&accel);
        let mut x_dot = drift + output_correction(g, &input.ky, &st.x_hat);
        if self.variant == Variant::Proposed {
            x_dot += inn.sigma_x();
        }
        Derivative {
            body_rate,
            x_dot,
            b_dot,
        }
    }

    /// Linearized rate of the attitude correction for the given input.
    fn stiffness(&self, imu: &ImuSample) -> f64 {
        let g = &self.gains;
        let a = imu.a_body.norm();
        let reference = match self.variant {
            Variant::Proposed => a.max(g.c_hat2),
            Variant::Adhoc => self.gravity,
        };
        g.k_r * (g.rho1 * imu.m_body.norm_squared() + g.rho2 * a * reference)
    }

    fn substeps(&self, start: &StageInput, end: &StageInput, dt: f64) -> usize {
        match self.stiffness_limit {
            None => 1,
            Some(limit) => {
                let rate = self.stiffness(&start.imu).max(self.stiffness(&end.imu));
                ((dt * rate / limit).ceil() as usize).max(1)
            }
        }
    }

    /// Advances the estimate over one sampling interval of length `dt`, with
    /// `start` and `end` the measurements at both ends of the interval.
    pub fn step(
        &self,
        st: &ObserverState,
        start: &Measurement,
        end: &Measurement,
        dt: f64,
    ) -> ObserverState {
        assert!(dt > 0.0, "step size must be positive");
        let s0 = self.prepare(start);
        let s1 = match self.hold {
            MeasurementHold::ZeroOrder => s0,
            MeasurementHold::Linear => self.prepare(end),
        };
        self.advance(st, dt, &s0, &s1, |frac| match self.hold {
            MeasurementHold::ZeroOrder => s0,
            MeasurementHold::Linear => s0.lerp(&s1, frac),
        })
    }

    /// Like [`NavObserver::step`], but every stage reads the measurement from
    /// `signal(s)`, the sensors at fraction `s` of the interval. With exact
    /// samples this integrates the continuous-time observer without any
    /// reconstruction error.
    pub fn step_sampled<F>(&self, st: &ObserverState, dt: f64, signal: F) -> ObserverState
    where
        F: Fn(f64) -> Measurement,
    {
        assert!(dt > 0.0, "step size must be positive");
        let s0 = self.prepare(&signal(0.0));
        let s1 = self.prepare(&signal(1.0));
        self.advance(st, dt, &s0, &s1, |frac| match frac {
            0.0 => s0,
            1.0 => s1,
            f => self.prepare(&signal(f)),
        })
    }

    fn advance<F>(
        &self,
        st: &ObserverState,
        dt: f64,
        s0: &StageInput,
        s1: &StageInput,
        input_at: F,
    ) -> ObserverState
    where
        F: Fn(f64) -> StageInput,
    {
        let n = self.substeps(s0, s1, dt);
        let h = dt / n as f64;
        let mut state = *st;
        let mut head = *s0;
        for j in 0..n {
            let half = input_at((j as f64 + 0.5) / n as f64);
            let tail = input_at((j + 1) as f64 / n as f64);
            state = self.substep(&state, h, &head, &half, &tail);
            head = tail;
        }
        state
    }

    fn substep(
        &self,
        st: &ObserverState,
        h: f64,
        in0: &StageInput,
        in_half: &StageInput,
        in1: &StageInput,
    ) -> ObserverState {
        let stage = |r: Rotation, x: Vector6<f64>, b: Vec3| ObserverState {
            x_hat: x,
            r_hat: r,
            b_hat: b,
        };
        let k1 = self.derivative(st, in0);
        let r2 = st.r_hat * exp_so3(&(k1.body_rate * (0.5 * h)));
        let s2 = stage(
            r2,
            st.x_hat + k1.x_dot * (0.5 * h),
            st.b_hat + k1.b_dot * (0.5 * h),
        );
        let k2 = self.derivative(&s2, in_half);
        let r3 = st.r_hat * exp_so3(&(k2.body_rate * (0.5 * h)));
        let s3 = stage(
            r3,
            st.x_hat + k2.x_dot * (0.5 * h),
            st.b_hat + k2.b_dot * (0.5 * h),
        );
        let k3 = self.derivative(&s3, in_half);
        let r4 = r2 * exp_so3(&((k3.body_rate - k1.body_rate * 0.5) * h));
        let s4 = stage(r4, st.x_hat + k3.x_dot * h, st.b_hat + k3.b_dot * h);
        let k4 = self.derivative(&s4, in1);

        let (u1, u2, u3, u4) = (k1.body_rate, k2.body_rate, k3.body_rate, k4.body_rate);
        let first = (u1 * 3.0 + u2 * 2.0 + u3 * 2.0 - u4) * (h / 12.0);
        let second = (-u1 + u2 * 2.0 + u3 * 2.0 + u4 * 3.0) * (h / 12.0);
        let r_hat = st.r_hat * exp_so3(&first) * exp_so3(&second);
        let x_hat = st.x_hat + (k1.x_dot + k2.x_dot * 2.0 + k3.x_dot * 2.0 + k4.x_dot) * (h / 6.0);
        let b_raw = st.b_hat + (k1.b_dot + k2.b_dot * 2.0 + k3.b_dot * 2.0 + k4.b_dot) * (h / 6.0);
        ObserverState {
            x_hat,
            r_hat,
            b_hat: sat(self.gains.bias_radius(), &b_raw),
        }
    }
}

/// One step of the coupled observer (see [`NavObserver::step`]).
#[allow(clippy::too_many_arguments)]
pub fn proposed_step(
    st: &ObserverState,
    start: &Measurement,
    end: &Measurement,
    gains: &GainSet,
    sys: &SystemMatrices,
    m_inertial: &Vec3,
    gravity: f64,
    dt: f64,
) -> ObserverState {
    NavObserver::new(
        Variant::Proposed,
        gains.clone(),
        sys.clone(),
        *m_inertial,
        gravity,
    )
    .step(st, start, end, dt)
}

/// One step of the cascaded baseline (see [`NavObserver::step`]).
#[allow(clippy::too_many_arguments)]
pub fn adhoc_step(
    st: &ObserverState,
    start: &Measurement,
    end: &Measurement,
    gains: &GainSet,
    sys: &SystemMatrices,
    m_inertial: &Vec3,
    gravity: f64,
    dt: f64,
) -> ObserverState {
    NavObserver::new(
        Variant::Adhoc,
        gains.clone(),
        sys.clone(),
        *m_inertial,
        gravity,
    )
    .step(st, start, end, dt)
}
