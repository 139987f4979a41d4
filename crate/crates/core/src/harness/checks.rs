//! Post-run checks on a [`RunLog`]: error statistics, invariants and the
//! Lyapunov monitors.

use serde::Serialize;

use super::run::RunLog;
use crate::diagnostics::{attitude_rate_bound, fit_exponential_rate, zeta_rate, ExpFit};
use crate::observer::Variant;

/// Largest tolerated increase of `W` between monitor samples.
pub const W_INCREASE_TOL: f64 = 1e-9;

/// Time windows the checks are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckWindows {
    /// Window of the exponential fit of `|x~|`.
    pub fit: (f64, f64),
    /// Errors are compared with their peak from this time on.
    pub settle: f64,
    /// Window for late-time averages.
    pub late: (f64, f64),
    /// Start of the monitor and saturation checks.
    pub transient: f64,
}

impl CheckWindows {
    /// `fit = [5, 20]`, `settle = t_end / 2`, `late = [2 t_end / 3, t_end]`,
    /// `transient = 5`.
    pub fn for_horizon(t_end: f64) -> Self {
        CheckWindows {
            fit: (5.0, 20.0),
            settle: 0.5 * t_end,
            late: (2.0 * t_end / 3.0, t_end),
            transient: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserverChecks {
    pub observer: String,
    /// `[|p~|, |v~|, |R~|, |b~|]` at the last sample.
    pub final_errors: [f64; 4],
    pub peak_errors: [f64; 4],
    /// Largest error from `settle` on, divided by the peak.
    pub settled_ratio: [f64; 4],
    pub late_mean_dist_r: f64,
    pub late_mean_p_err: f64,
    pub late_max_p_err: f64,
    pub x_err_fit: Option<ExpFit>,
    pub max_b_hat_norm: f64,
    pub bias_radius: f64,
    pub max_orthonormality_error: f64,
    /// Last time the output saturation was active.
    pub last_saturation_t: Option<f64>,
    pub max_sigma_x_identity: Option<f64>,
    pub max_residual_identity: f64,
    /// Largest relative mismatch between finite-differenced `zeta` and its
    /// model right-hand side after the transient. Only defined for the
    /// coupled observer.
    pub max_zeta_dynamics_residual: Option<f64>,
    pub v_threshold: Option<f64>,
    pub v_checked: usize,
    pub v_violations: usize,
    pub w_checked: usize,
    pub w_violations: usize,
    pub w_max_increase: f64,
    /// Samples with `W <= 0` although some error is nonzero.
    pub w_nonpositive: usize,
    pub attitude_rate_bound: f64,
    pub max_attitude_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunChecks {
    pub windows: CheckWindows,
    pub scaling_residual: f64,
    pub observers: Vec<ObserverChecks>,
}

impl RunChecks {
    pub fn get(&self, name: &str) -> Option<&ObserverChecks> {
        self.observers.iter().find(|o| o.observer == name)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn analyze(log: &RunLog, windows: CheckWindows) -> RunChecks {
    let ctx = &log.context;
    let observers = (0..log.variants.len())
        .map(|i| analyze_observer(log, i, &windows))
        .collect();
    RunChecks {
        windows,
        scaling_residual: ctx.scaling_residual,
        observers,
    }
}

fn analyze_observer(log: &RunLog, i: usize, w: &CheckWindows) -> ObserverChecks {
    let ctx = &log.context;
    let rows = &log.rows;
    let errs =
        |r: &super::run::ObserverRecord| [r.p_err_norm, r.v_err_norm, r.dist_r, r.tilde_b_norm];

    let mut peak = [0.0f64; 4];
    let mut settled = [0.0f64; 4];
    for row in rows {
        let e = errs(&row.observers[i]);
        for j in 0..4 {
            peak[j] = peak[j].max(e[j]);
            if row.t >= w.settle {
                settled[j] = settled[j].max(e[j]);
            }
        }
    }
    let settled_ratio = std::array::from_fn(|j| {
        if peak[j] > 0.0 {
            settled[j] / peak[j]
        } else {
            0.0
        }
    });
    let final_errors = errs(&rows.last().expect("log has at least one row").observers[i]);

    let late = || {
        rows.iter()
            .filter(|r| r.t >= w.late.0 && r.t <= w.late.1)
            .map(|r| &r.observers[i])
    };
    let x_series = log.series(i, |r| r.x_err_norm());
    let x_err_fit = fit_exponential_rate(&x_series, w.fit.0, Some(w.fit.1)).ok();

    let last_saturation_t = rows
        .iter()
        .rev()
        .find(|r| r.observers[i].sat_active)
        .map(|r| r.t);

    let mut max_sigma_x: Option<f64> = None;
    let mut max_residual = 0.0f64;
    for m in &log.monitors {
        let e = &m.observers[i];
        if let Some(s) = e.sigma_x_identity {
            max_sigma_x = Some(max_sigma_x.map_or(s, |c| c.max(s)));
        }
        max_residual = max_residual.max(e.residual_identity);
    }

    // zeta dynamics by central differences at monitor samples.
    let coupled = log.variants[i] == Variant::Proposed;
    let mut max_zeta_res = 0.0f64;
    for m in log.monitors.iter().filter(|_| coupled) {
        if m.t < w.transient || m.step == 0 || m.step + 1 >= rows.len() {
            continue;
        }
        let z_prev = rows[m.step - 1].observers[i].zeta;
        let z_next = rows[m.step + 1].observers[i].zeta;
        let fd = (z_next - z_prev) / (2.0 * log.dt);
        let model = zeta_rate(
            &rows[m.step].observers[i].zeta,
            &m.observers[i].forcing,
            &ctx.gains,
            &ctx.sys,
        );
        let scale = fd.norm().max(model.norm());
        if scale > 0.0 {
            max_zeta_res = max_zeta_res.max((fd - model).norm() / scale);
        }
    }

    let v_threshold = ctx
        .bounds
        .map(|b| 4.0 * ctx.lyapunov.beta2 * b.c_g / ctx.gains.gamma.powi(3));
    let (mut v_checked, mut v_violations) = (0, 0);
    let (mut w_checked, mut w_violations, mut w_max_increase) = (0, 0, f64::NEG_INFINITY);
    let mut w_nonpositive = 0;
    for pair in log.monitors.windows(2) {
        let (a, b) = (
            &rows[pair[0].step].observers[i],
            &rows[pair[1].step].observers[i],
        );
        if let Some(thr) = v_threshold {
            if a.zeta.norm() >= thr {
                v_checked += 1;
                if b.v > a.v {
                    v_violations += 1;
                }
            }
        }
        if pair[0].t >= w.transient {
            w_checked += 1;
            let inc = b.w - a.w;
            w_max_increase = w_max_increase.max(inc);
            if inc > W_INCREASE_TOL {
                w_violations += 1;
            }
        }
    }
    for m in &log.monitors {
        let r = &rows[m.step].observers[i];
        let nonzero = r.dist_r > 0.0 || r.tilde_b_norm > 0.0 || r.zeta.norm() > 0.0;
        if nonzero && r.w <= 0.0 {
            w_nonpositive += 1;
        }
    }

    let rate_bound = attitude_rate_bound(&ctx.gains, &log.m_inertial, ctx.assumptions.c2);
    let max_attitude_rate = rows
        .windows(2)
        .map(|p| (p[1].observers[i].dist_r - p[0].observers[i].dist_r) / log.dt)
        .fold(f64::NEG_INFINITY, f64::max);

    ObserverChecks {
        observer: log.variants[i].name().to_string(),
        final_errors,
        peak_errors: peak,
        settled_ratio,
        late_mean_dist_r: mean(late().map(|r| r.dist_r)),
        late_mean_p_err: mean(late().map(|r| r.p_err_norm)),
        late_max_p_err: late().map(|r| r.p_err_norm).fold(f64::NAN, f64::max),
        x_err_fit,
        max_b_hat_norm: rows
            .iter()
            .map(|r| r.observers[i].b_hat.norm())
            .fold(0.0, f64::max),
        bias_radius: ctx.gains.bias_radius(),
        max_orthonormality_error: rows
            .iter()
            .map(|r| r.observers[i].orthonormality_error)
            .fold(0.0, f64::max),
        last_saturation_t,
        max_sigma_x_identity: max_sigma_x,
        max_residual_identity: max_residual,
        max_zeta_dynamics_residual: coupled.then_some(max_zeta_res),
        v_threshold,
        v_checked,
        v_violations,
        w_checked,
        w_violations,
        w_max_increase,
        w_nonpositive,
        attitude_rate_bound: rate_bound,
        max_attitude_rate,
    }
}
