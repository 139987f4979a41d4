//! Sufficient gain conditions for exponential stability.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observer::GainSet;
use crate::so3::{Mat3, Vec3};
use crate::vehicle::{AssumptionReport, ScenarioConfig, ASSUMPTION_TOL};

/// `rho1 m m^T + rho2 a a^T`.
pub fn m_matrix(rho1: f64, rho2: f64, m_i: &Vec3, a_i: &Vec3) -> Mat3 {
    rho1 * m_i * m_i.transpose() + rho2 * a_i * a_i.transpose()
}

/// `E(M) = (tr(M) I - M^T) / 2`.
pub fn e_of_m(m: &Mat3) -> Mat3 {
    0.5 * (Mat3::identity() * m.trace() - m.transpose())
}

/// Extreme eigenvalues of `E(M(t))` over a time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmSpectrum {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Where the minimum is attained.
    pub t_min: f64,
}

pub fn em_spectrum(cfg: &ScenarioConfig, rho1: f64, rho2: f64, t_grid: &[f64]) -> EmSpectrum {
    let mut out = EmSpectrum {
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        t_min: t_grid.first().copied().unwrap_or(0.0),
    };
    for &t in t_grid {
        let a_i = cfg.trajectory.translation(t, cfg.gravity).a_inertial;
        let e = e_of_m(&m_matrix(rho1, rho2, &cfg.m_inertial, &a_i));
        let eig = e.symmetric_eigenvalues();
        if eig.min() < out.lambda_min {
            out.lambda_min = eig.min();
            out.t_min = t;
        }
        out.lambda_max = out.lambda_max.max(eig.max());
    }
    out
}

/// Scalars the gain conditions are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub eps: f64,
    pub k_r: f64,
    pub k_b: f64,
    pub rho2: f64,
    pub gamma: f64,
    /// Bound on `|b_omega - b_hat|`.
    pub c_b: f64,
    /// Bound on `|omega|`.
    pub c_omega: f64,
    pub c2: f64,
    pub c3: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainBoundReport {
    pub eps: f64,
    pub mu_max: f64,
    /// The `mu` used in `k_R^min`, `gamma_min` and the `W` monitor.
    pub mu: f64,
    pub k_r_min: f64,
    pub gamma_min: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_min_em: f64,
    pub lambda_max_em: f64,
    pub c_b: f64,
    pub c_omega: f64,
    /// Bound on the forcing of the `zeta` dynamics.
    pub c_g: f64,
    pub k_r_ok: bool,
    pub gamma_ok: bool,
}

impl GainBoundReport {
    pub fn gains_sufficient(&self) -> bool {
        self.k_r_ok && self.gamma_ok
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.5 && eps < 1.0) {
        return Err(Error::validation(
            "epsilon",
            format!("must lie in (0.5, 1), got {eps}"),
        ));
    }
    Ok(())
}

/// Evaluates `mu_max`, `k_R^min` and `gamma_min`.
///
/// `mu` is taken as the minimizer of the `k_R` condition,
/// `1 / sqrt(2 alpha1 + 4 c_omega^2)`, capped at `mu_max / 2`. `gamma_min` is
/// evaluated at `max(k_R, k_R^min)`.
pub fn gain_bounds(inp: &BoundInputs) -> Result<GainBoundReport> {
    check_eps(inp.eps)?;
    if inp.lambda_min.is_nan() || inp.lambda_min <= 0.0 {
        return Err(Error::Unobservable {
            lambda_min: inp.lambda_min,
            t: f64::NAN,
        });
    }
    let sqrt2 = 2f64.sqrt();
    let alpha1 = 8.0 * inp.c_b * inp.c_b + 4.0 * inp.k_b * inp.lambda_max;
    let alpha2 = 8.0 * inp.lambda_max * inp.c_b * (sqrt2 + 4.0);
    let alpha3 = 2.0 * inp.k_b * inp.rho2 * inp.c2;
    let alpha4 = 2.0 * inp.rho2 * inp.c_b * inp.c2 * (sqrt2 + 4.0);

    let margin = inp.lambda_min * (1.0 - inp.eps * inp.eps);
    let mu_max = if alpha2 > 0.0 {
        margin / alpha2
    } else {
        f64::INFINITY
    };
    let mu_opt = 1.0 / (2.0 * alpha1 + 4.0 * inp.c_omega * inp.c_omega).sqrt();
    let mu = mu_opt.min(0.5 * mu_max);

    let k_r_min = (2.0 * mu * inp.k_b).max(
        (2.0 * alpha1 * mu * mu + (1.0 + 2.0 * inp.c_omega * mu).powi(2)) / (2.0 * mu * margin),
    );
    let k_r = inp.k_r.max(k_r_min);
    let gamma_min = (4.0 * inp.beta2 * inp.beta2 * inp.c2 * inp.c2 / mu).max(
        (k_r * inp.rho2 * inp.c2
            + 4.0 * sqrt2 * inp.beta2 * inp.c3
            + mu * (alpha3 + k_r * alpha4).powi(2))
            / (4.0 * k_r * margin),
    );
    Ok(GainBoundReport {
        eps: inp.eps,
        mu_max,
        mu,
        k_r_min,
        gamma_min,
        alpha1,
        alpha2,
        alpha3,
        alpha4,
        beta1: inp.beta1,
        beta2: inp.beta2,
        lambda_min_em: inp.lambda_min,
        lambda_max_em: inp.lambda_max,
        c_b: inp.c_b,
        c_omega: inp.c_omega,
        c_g: 8f64.sqrt() * inp.c3 + inp.c2 * inp.c_b,
        k_r_ok: inp.k_r > k_r_min,
        gamma_ok: inp.gamma > gamma_min,
    })
}

/// Gain conditions for a scenario: `c_b = 2 c5 + eps_b`, `c_omega = c4`.
pub fn appendix_gain_bounds(
    report: &AssumptionReport,
    eps: f64,
    gains: &GainSet,
    spectrum: &EmSpectrum,
    beta1: f64,
    beta2: f64,
) -> Result<GainBoundReport> {
    check_eps(eps)?;
    if spectrum.lambda_min <= ASSUMPTION_TOL {
        return Err(Error::Unobservable {
            lambda_min: spectrum.lambda_min,
            t: spectrum.t_min,
        });
    }
    let inp = BoundInputs {
        eps,
        k_r: gains.k_r,
        k_b: gains.k_b,
        rho2: gains.rho2,
        gamma: gains.gamma,
        c_b: 2.0 * gains.c5 + gains.eps_b,
        c_omega: report.c4,
        c2: report.c2,
        c3: report.c3,
        lambda_min: spectrum.lambda_min,
        lambda_max: spectrum.lambda_max,
        beta1,
        beta2,
    };
    gain_bounds(&inp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inputs() -> BoundInputs {
        BoundInputs {
            eps: 0.75,
            k_r: 2.0,
            k_b: 1.0,
            rho2: 1.0,
            gamma: 2.0,
            c_b: 0.2,
            c_omega: 1.5,
            c2: 60.0,
            c3: 30.0,
            lambda_min: 0.1,
            lambda_max: 3000.0,
            beta1: 0.05,
            beta2: 1.2,
        }
    }

    #[test]
    fn e_of_m_example() {
        // m = e3, a = e1: M = diag(1, 0, 1), E(M) = diag(1, 2, 1) / 2.
        let m = m_matrix(1.0, 1.0, &Vec3::z(), &Vec3::x());
        let e = e_of_m(&m);
        assert_relative_eq!(
            e,
            Mat3::from_diagonal(&Vec3::new(0.5, 1.0, 0.5)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn e_of_m_singular_when_collinear() {
        let m = m_matrix(1.0, 1.0, &Vec3::z(), &(Vec3::z() * -9.81));
        assert!(e_of_m(&m).symmetric_eigenvalues().min().abs() < 1e-12);
    }

    #[test]
    fn alphas_match_definitions() {
        let inp = inputs();
        let r = gain_bounds(&inp).unwrap();
        let s = 2f64.sqrt() + 4.0;
        assert_relative_eq!(r.alpha1, 8.0 * 0.04 + 4.0 * 3000.0, epsilon = 1e-9);
        assert_relative_eq!(r.alpha2, 8.0 * 3000.0 * 0.2 * s, epsilon = 1e-9);
        assert_relative_eq!(r.alpha3, 2.0 * 60.0, epsilon = 1e-12);
        assert_relative_eq!(r.alpha4, 2.0 * 0.2 * 60.0 * s, epsilon = 1e-9);
        assert_relative_eq!(r.mu_max, 0.1 * (1.0 - 0.5625) / r.alpha2, epsilon = 1e-15);
        assert!(r.mu < r.mu_max);
        assert!(r.k_r_min.is_finite() && r.gamma_min.is_finite());
        assert_relative_eq!(r.c_g, 8f64.sqrt() * 30.0 + 60.0 * 0.2, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_reduction() {
        // c_b = 0 and rho2 = 0 remove alpha2 and alpha4; with c_omega = 0 the
        // k_R condition is max{2 mu k_b, (2 alpha1 mu^2 + 1) / (2 mu lambda (1 - eps^2))}.
        let inp = BoundInputs {
            c_b: 0.0,
            rho2: 0.0,
            c_omega: 0.0,
            ..inputs()
        };
        let r = gain_bounds(&inp).unwrap();
        assert_eq!(r.alpha2, 0.0);
        assert_eq!(r.alpha4, 0.0);
        assert!(r.mu_max.is_infinite());
        let mu = r.mu;
        let margin = inp.lambda_min * (1.0 - inp.eps * inp.eps);
        let expected =
            (2.0 * mu * inp.k_b).max((2.0 * r.alpha1 * mu * mu + 1.0) / (2.0 * mu * margin));
        assert_relative_eq!(r.k_r_min, expected, epsilon = 1e-12);
    }

    #[test]
    fn chosen_mu_minimizes_kr_bound() {
        let inp = BoundInputs {
            c_b: 1e-9,
            ..inputs()
        };
        let r = gain_bounds(&inp).unwrap();
        let margin = inp.lambda_min * (1.0 - inp.eps * inp.eps);
        let f = |mu: f64| {
            (2.0 * r.alpha1 * mu * mu + (1.0 + 2.0 * inp.c_omega * mu).powi(2))
                / (2.0 * mu * margin)
        };
        assert!(f(r.mu) <= f(r.mu * 1.01));
        assert!(f(r.mu) <= f(r.mu * 0.99));
    }

    #[test]
    fn epsilon_range_enforced() {
        for eps in [0.5, 1.0, 0.2, f64::NAN] {
            let inp = BoundInputs { eps, ..inputs() };
            assert!(matches!(gain_bounds(&inp), Err(Error::Validation { .. })));
        }
    }

    #[test]
    fn unobservable_rejected() {
        let inp = BoundInputs {
            lambda_min: 0.0,
            ..inputs()
        };
        assert!(matches!(gain_bounds(&inp), Err(Error::Unobservable { .. })));
    }
}
