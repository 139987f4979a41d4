//! The fixed-step simulation loop.

use nalgebra::Vector6;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{InputMode, ObserverSelection, RunConfig, SensorMode};
use crate::diagnostics::{
    appendix_gain_bounds, compute_errors, compute_zeta, em_spectrum, monitor_v, monitor_w,
    solve_lyapunov, zeta_forcing, EmSpectrum, GainBoundReport, Lyapunov,
};
use crate::error::{Error, Result};
use crate::observer::{
    l_gamma, output_residual, synthesize_gains, GainSet, Innovations, Measurement, NavObserver,
    ObserverState, SystemMatrices, Variant,
};
use crate::range::PositionFrontend;
use crate::so3::{skew, Mat3, Vec3};
use crate::vehicle::{
    measure_imu, validate_assumptions, AssumptionReport, NoiseSample, TrueState, TruthSimulator,
};

/// Any state component above this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Per-step record of one observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverRecord {
    pub p_hat: Vec3,
    pub v_hat: Vec3,
    pub b_hat: Vec3,
    pub euler_err: Vec3,
    pub dist_r: f64,
    pub p_err_norm: f64,
    pub v_err_norm: f64,
    pub tilde_b_norm: f64,
    pub sigma_r_norm: f64,
    pub sat_active: bool,
    pub kv_residual_norm: f64,
    pub zeta: Vector6<f64>,
    pub v: f64,
    pub w: f64,
    /// `|R_hat^T R_hat - I|_F` before any re-orthonormalization at this step.
    pub orthonormality_error: f64,
}

impl ObserverRecord {
    pub fn x_err_norm(&self) -> f64 {
        self.p_err_norm.hypot(self.v_err_norm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    pub p: Vec3,
    pub v: Vec3,
    /// One entry per observer, in the order of [`RunLog::variants`].
    pub observers: Vec<ObserverRecord>,
}

/// Identity residuals at a decimated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorEntry {
    /// Relative error of `(A - K C) sigma_x = -k_R B [R_hat sigma_R]_x R_hat a_B`;
    /// `None` for the cascaded baseline, which has no `sigma_x`.
    pub sigma_x_identity: Option<f64>,
    /// Relative error of `K_v (y - C x_hat) = -B^T L_gamma zeta + (I - R~)^T a_I`.
    pub residual_identity: f64,
    /// Forcing `g(t)` of the `zeta` dynamics.
    pub forcing: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSample {
    pub step: usize,
    pub t: f64,
    pub observers: Vec<MonitorEntry>,
}

/// Everything fixed before the loop starts.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub gains: GainSet,
    pub sys: SystemMatrices,
    pub lyapunov: Lyapunov,
    pub assumptions: AssumptionReport,
    pub spectrum: EmSpectrum,
    /// `None` when the gain conditions cannot be evaluated (unobservable scenario).
    pub bounds: Option<GainBoundReport>,
    /// `mu` used in `W`; zero when `bounds` is `None`.
    pub mu: f64,
    /// Largest residual of the three `L_gamma` scaling identities.
    pub scaling_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub dt: f64,
    pub m_inertial: Vec3,
    pub variants: Vec<Variant>,
    pub rows: Vec<Row>,
    pub monitors: Vec<MonitorSample>,
    pub context: RunContext,
}

impl RunLog {
    pub fn index_of(&self, variant: Variant) -> Option<usize> {
        self.variants.iter().position(|v| *v == variant)
    }

    /// `(t, f(record))` for one observer.
    pub fn series<F>(&self, idx: usize, f: F) -> Vec<(f64, f64)>
    where
        F: Fn(&ObserverRecord) -> f64,
    {
        self.rows
            .iter()
            .map(|r| (r.t, f(&r.observers[idx])))
            .collect()
    }

    /// Rows at the decimated monitor samples.
    pub fn monitor_rows(&self) -> impl Iterator<Item = (&MonitorSample, &Row)> {
        self.monitors.iter().map(|m| (m, &self.rows[m.step]))
    }
}

/// Max residual of `L^-1 A L = gamma A`, `L^-1 B = gamma^-2 B`, `C L = gamma C`.
pub fn scaling_identity_residual(gamma: f64, sys: &SystemMatrices) -> f64 {
    let l = l_gamma(gamma);
    let l_inv = l
        .try_inverse()
        .expect("L_gamma is diagonal with positive entries");
    let r1 = (l_inv * sys.a * l - sys.a * gamma).norm() / (gamma * sys.a.norm());
    let r2 = (l_inv * sys.b - sys.b / (gamma * gamma)).norm() * gamma * gamma / sys.b.norm();
    let l_dyn = nalgebra::DMatrix::from_fn(6, 6, |i, j| l[(i, j)]);
    let r3 = (&sys.c * l_dyn - &sys.c * gamma).norm() / (gamma * sys.c.norm());
    r1.max(r2).max(r3)
}

fn relative(lhs: &[f64], rhs: &[f64]) -> f64 {
    let diff: f64 = lhs
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = lhs
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(rhs.iter().map(|b| b * b).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<(RunContext, PositionFrontend)> {
    let sc = &cfg.scenario;
    let frontend = match cfg.file.run.sensor_mode {
        SensorMode::Ranges => {
            PositionFrontend::ranges(sc.anchors.clone(), cfg.file.scenario.reference_anchor)?
        }
        SensorMode::Gps => PositionFrontend::Gps,
    };
    let c_p = frontend.c_p();
    let gains = synthesize_gains(&c_p, &cfg.gains, cfg.c5)?;
    let sys = SystemMatrices::new(&c_p)?;
    let lyapunov = solve_lyapunov(&gains.nominal_closed_loop(&sys))?;
    let grid = cfg.assumption_grid();
    let assumptions = validate_assumptions(sc, &grid);
    let spectrum = em_spectrum(sc, gains.rho1, gains.rho2, &grid);
    let mut warnings: Vec<String> = assumptions
        .violations(Some(gains.c_hat2))
        .iter()
        .map(|v| v.to_string())
        .collect();
    let bounds = match appendix_gain_bounds(
        &assumptions,
        cfg.file.run.epsilon,
        &gains,
        &spectrum,
        lyapunov.beta1,
        lyapunov.beta2,
    ) {
        Ok(b) => Some(b),
        Err(e @ Error::Unobservable { .. }) => {
            warnings.push(format!("{e}; W is evaluated with mu = 0"));
            None
        }
        Err(e) => return Err(e),
    };
    let mu = bounds.map_or(0.0, |b| b.mu);
    let scaling_residual = scaling_identity_residual(gains.gamma, &sys);
    Ok((
        RunContext {
            gains,
            sys,
            lyapunov,
            assumptions,
            spectrum,
            bounds,
            mu,
            scaling_residual,
            warnings,
        },
        frontend,
    ))
}

struct Sensors<'a> {
    cfg: &'a RunConfig,
    frontend: &'a PositionFrontend,
}

impl Sensors<'_> {
    fn measure(&self, st: &TrueState, noise: &NoiseSample) -> Result<Measurement> {
        Ok(Measurement {
            imu: noise.apply_imu(&measure_imu(st, &self.cfg.scenario)),
            y: self.frontend.output(&st.p, &noise.position)?,
        })
    }
}

struct Recorder<'a> {
    ctx: &'a RunContext,
    cfg: &'a RunConfig,
}

impl Recorder<'_> {
    fn record(
        &self,
        truth: &TrueState,
        st: &ObserverState,
        inn: &Innovations,
        orthonormality_error: f64,
    ) -> ObserverRecord {
        let ctx = self.ctx;
        let e = compute_errors(truth, &self.cfg.scenario.gyro_bias, st);
        let zeta = compute_zeta(
            &e.tilde_x,
            &e.r_tilde,
            &truth.a_inertial,
            &ctx.gains,
            &ctx.sys,
        );
        let v = monitor_v(&zeta, &ctx.lyapunov.p, ctx.gains.gamma);
        let w = monitor_w(&e, &st.r_hat, &ctx.gains, ctx.mu, v);
        ObserverRecord {
            p_hat: st.p_hat(),
            v_hat: st.v_hat(),
            b_hat: st.b_hat,
            euler_err: e.euler_err,
            dist_r: e.dist_r,
            p_err_norm: e.p_err().norm(),
            v_err_norm: e.v_err().norm(),
            tilde_b_norm: e.tilde_b.norm(),
            sigma_r_norm: inn.sigma_r.norm(),
            sat_active: inn.sat_active,
            kv_residual_norm: inn.kv_residual_norm,
            zeta,
            v,
            w,
            orthonormality_error,
        }
    }

    fn monitor(
        &self,
        variant: Variant,
        truth: &TrueState,
        st: &ObserverState,
        inn: &Innovations,
        meas: &Measurement,
        zeta: &Vector6<f64>,
    ) -> MonitorEntry {
        let ctx = self.ctx;
        let (gains, sys) = (&ctx.gains, &ctx.sys);
        let sigma_x_identity = (variant == Variant::Proposed).then(|| {
            let lhs = gains.closed_loop(sys) * inn.sigma_x();
            let rhs: Vector6<f64> = -gains.k_r
                * sys.b
                * (skew(&st.r_hat.rotate(&inn.sigma_r)) * st.r_hat.rotate(&meas.imu.a_body));
            relative(lhs.as_slice(), rhs.as_slice())
        });
        let e = compute_errors(truth, &self.cfg.scenario.gyro_bias, st);
        let residual = output_residual(gains, &meas.y, &st.x_hat);
        let lhs: Vec3 = residual.fixed_rows::<3>(3).into_owned();
        let rhs = -sys.b.transpose() * (gains.l_gamma * zeta)
            + (Mat3::identity() - e.r_tilde.matrix()).transpose() * truth.a_inertial;
        let sc = &self.cfg.scenario;
        let forcing = zeta_forcing(
            &e.r_tilde,
            &truth.attitude,
            &truth.a_inertial,
            &sc.trajectory.a_inertial_rate(truth.t, sc.gravity),
            &e.tilde_b,
        );
        MonitorEntry {
            sigma_x_identity,
            residual_identity: relative(lhs.as_slice(), rhs.as_slice()),
            forcing,
        }
    }
}

fn selected_variants(sel: ObserverSelection) -> Vec<Variant> {
    match sel {
        ObserverSelection::Proposed => vec![Variant::Proposed],
        ObserverSelection::Adhoc => vec![Variant::Adhoc],
        ObserverSelection::Both => vec![Variant::Proposed, Variant::Adhoc],
    }
}

fn check_divergence(t: f64, variant: Variant, st: &ObserverState) -> Result<()> {
    let m = st.max_abs();
    if !m.is_finite() || m > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            t,
            what: format!("{} observer state", variant.name()),
            value: m,
        });
    }
    Ok(())
}

/// Runs the configured scenario. Identical configurations give bit-identical logs.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunLog> {
    let (ctx, frontend) = prepare(cfg)?;
    let run = &cfg.file.run;
    let variants = selected_variants(run.observer);
    let observers: Vec<NavObserver> = variants
        .iter()
        .map(|&v| {
            let mut o = NavObserver::new(
                v,
                ctx.gains.clone(),
                ctx.sys.clone(),
                cfg.scenario.m_inertial,
                cfg.scenario.gravity,
            );
            o.hold = run.input.hold();
            o.stiffness_limit = cfg.stiffness_limit();
            o
        })
        .collect();
    let sensors = Sensors {
        cfg,
        frontend: &frontend,
    };
    let recorder = Recorder { ctx: &ctx, cfg };
    let noisy = !cfg.scenario.noise.is_zero();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let channels = frontend.channel_count();
    let draw = |rng: &mut ChaCha8Rng| {
        if noisy {
            cfg.scenario.noise.draw(rng, channels)
        } else {
            NoiseSample::zero(channels)
        }
    };

    let n = cfg.scenario.step_count();
    let mut sim = TruthSimulator::new(cfg.scenario.clone());
    let mut states = vec![cfg.initial; variants.len()];
    let mut rows = Vec::with_capacity(n + 1);
    let mut monitors = Vec::with_capacity(n / run.monitor_every + 1);

    let mut noise0 = draw(&mut rng);
    let mut truth = sim.state();
    let mut m0 = sensors.measure(&truth, &noise0)?;
    let mut ortho = vec![0.0; variants.len()];

    for k in 0..=n {
        // Record the state at step k.
        let mut records = Vec::with_capacity(variants.len());
        let mut entries = Vec::new();
        for (i, obs) in observers.iter().enumerate() {
            let inn = obs.innovations(&states[i], &m0);
            let rec = recorder.record(&truth, &states[i], &inn, ortho[i]);
            if k % run.monitor_every == 0 {
                entries.push(recorder.monitor(
                    variants[i],
                    &truth,
                    &states[i],
                    &inn,
                    &m0,
                    &rec.zeta,
                ));
            }
            records.push(rec);
        }
        if !entries.is_empty() {
            monitors.push(MonitorSample {
                step: k,
                t: truth.t,
                observers: entries,
            });
        }
        rows.push(Row {
            t: truth.t,
            p: truth.p,
            v: truth.v,
            observers: records,
        });
        if k == n {
            break;
        }

        let noise1 = draw(&mut rng);
        let m1 = sensors.measure(&sim.peek(1.0), &noise1)?;
        for (i, obs) in observers.iter().enumerate() {
            let next = match run.input {
                InputMode::Sampled => obs.step_sampled(&states[i], cfg.scenario.dt, |s| {
                    if s == 0.0 {
                        m0.clone()
                    } else if s == 1.0 {
                        m1.clone()
                    } else {
                        sensors
                            .measure(&sim.peek(s), &noise0.lerp(&noise1, s))
                            .expect("channel count fixed by the frontend")
                    }
                }),
                InputMode::Linear | InputMode::ZeroOrder => {
                    obs.step(&states[i], &m0, &m1, cfg.scenario.dt)
                }
            };
            check_divergence(sim.time() + cfg.scenario.dt, variants[i], &next)?;
            ortho[i] = next.r_hat.orthonormality_error();
            states[i] = if (k + 1) % run.renormalize_every == 0 {
                next.renormalized()
            } else {
                next
            };
        }
        truth = sim.advance();
        m0 = m1;
        noise0 = noise1;
    }
    Ok(RunLog {
        dt: cfg.scenario.dt,
        m_inertial: cfg.scenario.m_inertial,
        variants,
        rows,
        monitors,
        context: ctx,
    })
}
