use nalgebra::{DMatrix, Matrix3, Matrix6, Matrix6x3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::range::{min_singular_value, RANK_TOL};

/// Block matrices of the double-integrator translational model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Matrix6<f64>,
    pub b: Matrix6x3<f64>,
    /// `[C_p, 0]`, `m x 6`.
    pub c: DMatrix<f64>,
    pub c_p: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn new(c_p: &DMatrix<f64>) -> Result<Self> {
        check_cp(c_p)?;
        let mut a = Matrix6::zeros();
        a.fixed_view_mut::<3, 3>(0, 3).fill_with_identity();
        let mut b = Matrix6x3::zeros();
        b.fixed_view_mut::<3, 3>(3, 0).fill_with_identity();
        let m = c_p.nrows();
        let mut c = DMatrix::zeros(m, 6);
        c.view_mut((0, 0), (m, 3)).copy_from(c_p);
        Ok(SystemMatrices {
            a,
            b,
            c,
            c_p: c_p.clone(),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

fn check_cp(c_p: &DMatrix<f64>) -> Result<()> {
    if c_p.ncols() != 3 || c_p.nrows() < 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            actual: c_p.ncols().min(c_p.nrows()),
        });
    }
    let sigma = min_singular_value(c_p);
    if sigma < RANK_TOL {
        return Err(Error::CoplanarAnchors(sigma));
    }
    Ok(())
}

/// Scalar tuning of either observer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainParams {
    pub k_r: f64,
    pub k_b: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub eps_b: f64,
    pub c_hat2: f64,
    pub gamma: f64,
    /// Radius of the bias projection ball. `None` means `1.05 |b_omega|`.
    pub c5: Option<f64>,
    /// Per-axis eigenvalue pair of `A - K0 C`; both must be negative.
    pub poles: [f64; 2],
}

impl Default for GainParams {
    fn default() -> Self {
        GainParams {
            k_r: 2.0,
            k_b: 1.0,
            rho1: 1.0,
            rho2: 1.0,
            eps_b: 0.001,
            c_hat2: 9.0 * 8f64.sqrt(),
            gamma: 2.0,
            c5: None,
            poles: [-3.0, -4.0],
        }
    }
}

impl GainParams {
    /// Characteristic polynomial `s^2 + s1 s + s2` of one axis.
    pub fn axis_polynomial(&self) -> (f64, f64) {
        let [l1, l2] = self.poles;
        (-(l1 + l2), l1 * l2)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_r", self.k_r),
            ("k_b", self.k_b),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("eps_b", self.eps_b),
            ("c_hat2", self.c_hat2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(
                    name,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::validation(
                "gamma",
                format!("must be >= 1, got {}", self.gamma),
            ));
        }
        if let Some(c5) = self.c5 {
            if !(c5 > 0.0 && c5.is_finite()) {
                return Err(Error::validation(
                    "c5",
                    format!("must be positive, got {c5}"),
                ));
            }
        }
        if let Some(p) = self.poles.iter().find(|p| !(**p < 0.0 && p.is_finite())) {
            return Err(Error::validation(
                "poles",
                format!("eigenvalues must have negative real part, got {p}"),
            ));
        }
        Ok(())
    }
}

/// Fully synthesized gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub k_r: f64,
    pub k_b: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub eps_b: f64,
    pub c_hat2: f64,
    pub gamma: f64,
    pub c5: f64,
    /// `6 x m`, places the eigenvalues of `A - K0 C`.
    pub k0: DMatrix<f64>,
    /// `L_gamma K0`.
    pub k: DMatrix<f64>,
    pub k_p: DMatrix<f64>,
    pub k_v: DMatrix<f64>,
    pub l_gamma: Matrix6<f64>,
    pub kv_cp: Matrix3<f64>,
    pub kv_cp_inv: Matrix3<f64>,
    pub kp_cp: Matrix3<f64>,
    /// `K C`, so that `K (y - C x) = K y - KC x`.
    pub kc: Matrix6<f64>,
}

/// `blockdiag(gamma I3, gamma^2 I3)`.
pub fn l_gamma(gamma: f64) -> Matrix6<f64> {
    Matrix6::from_diagonal(&Vector6::new(
        gamma,
        gamma,
        gamma,
        gamma * gamma,
        gamma * gamma,
        gamma * gamma,
    ))
}

fn to_fixed3(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

fn to_fixed6(m: &DMatrix<f64>) -> Matrix6<f64> {
    Matrix6::from_fn(|i, j| m[(i, j)])
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Matrix6<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Places the translational poles axis by axis and scales by `L_gamma`.
///
/// With `C_p^+` the left inverse of `C_p`, `K0 = [s1 C_p^+; s2 C_p^+]` gives
/// `K0 C = [s1 I; s2 I]`, so each axis has characteristic polynomial
/// `s^2 + s1 s + s2` with the requested roots.
pub fn synthesize_gains(
    c_p: &DMatrix<f64>,
    params: &GainParams,
    default_c5: f64,
) -> Result<GainSet> {
    params.validate()?;
    let sys = SystemMatrices::new(c_p)?;
    let c5 = params.c5.unwrap_or(default_c5);
    if !(c5 > 0.0 && c5.is_finite()) {
        return Err(Error::validation(
            "c5",
            format!("must be positive, got {c5}"),
        ));
    }

    let cpt = c_p.transpose();
    let gram_inv = (&cpt * c_p)
        .try_inverse()
        .ok_or(Error::CoplanarAnchors(0.0))?;
    let left_inv = gram_inv * cpt;
    let (s1, s2) = params.axis_polynomial();
    let m = c_p.nrows();
    let mut k0 = DMatrix::zeros(6, m);
    k0.view_mut((0, 0), (3, m)).copy_from(&(&left_inv * s1));
    k0.view_mut((3, 0), (3, m)).copy_from(&(&left_inv * s2));

    let a_cl = sys.a - to_fixed6(&(&k0 * &sys.c));
    let abscissa = spectral_abscissa(&a_cl);
    if abscissa.is_nan() || abscissa >= 0.0 {
        return Err(Error::NotHurwitz(abscissa));
    }

    let lg = l_gamma(params.gamma);
    let k = DMatrix::from_fn(6, m, |i, j| lg[(i, i)] * k0[(i, j)]);
    let k_p = k.rows(0, 3).into_owned();
    let k_v = k.rows(3, 3).into_owned();
    let kv_cp = to_fixed3(&(&k_v * c_p));
    let kv_cp_inv = kv_cp.try_inverse().ok_or(Error::SingularKvCp)?;
    if !kv_cp_inv.iter().all(|x| x.is_finite()) {
        return Err(Error::SingularKvCp);
    }
    let kp_cp = to_fixed3(&(&k_p * c_p));
    let kc = to_fixed6(&(&k * &sys.c));

    Ok(GainSet {
        k_r: params.k_r,
        k_b: params.k_b,
        rho1: params.rho1,
        rho2: params.rho2,
        eps_b: params.eps_b,
        c_hat2: params.c_hat2,
        gamma: params.gamma,
        c5,
        k0,
        k,
        k_p,
        k_v,
        l_gamma: lg,
        kv_cp,
        kv_cp_inv,
        kp_cp,
        kc,
    })
}

impl GainSet {
    /// `A - K0 C`.
    pub fn nominal_closed_loop(&self, sys: &SystemMatrices) -> Matrix6<f64> {
        sys.a - to_fixed6(&(&self.k0 * &sys.c))
    }

    /// `A - K C`.
    pub fn closed_loop(&self, sys: &SystemMatrices) -> Matrix6<f64> {
        sys.a - self.kc
    }

    /// Radius of the ball the bias estimate is confined to.
    pub fn bias_radius(&self) -> f64 {
        self.c5 + self.eps_b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::range::build_cp;
    use crate::vehicle::ScenarioConfig;
    use approx::assert_relative_eq;

    fn sorted_eigs(m: &Matrix6<f64>) -> Vec<(f64, f64)> {
        let mut v: Vec<_> = m
            .complex_eigenvalues()
            .iter()
            .map(|z| (z.re, z.im))
            .collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    }

    #[test]
    fn identity_output_gives_polynomial_coefficients() {
        let c_p = DMatrix::identity(3, 3);
        let p = GainParams {
            gamma: 1.0,
            ..GainParams::default()
        };
        let g = synthesize_gains(&c_p, &p, 0.1).unwrap();
        let mut expected = DMatrix::zeros(6, 3);
        expected.view_mut((0, 0), (3, 3)).fill_diagonal(7.0);
        expected.view_mut((3, 0), (3, 3)).fill_diagonal(12.0);
        assert_relative_eq!(g.k0, expected, epsilon = 1e-14);
    }

    #[test]
    fn gamma_scales_velocity_gain() {
        let g = synthesize_gains(&DMatrix::identity(3, 3), &GainParams::default(), 0.1).unwrap();
        assert_relative_eq!(g.kv_cp, Matrix3::identity() * 48.0, epsilon = 1e-12);
        assert_relative_eq!(g.kv_cp * g.kv_cp_inv, Matrix3::identity(), epsilon = 1e-14);
        assert_relative_eq!(g.kp_cp, Matrix3::identity() * 14.0, epsilon = 1e-12);
    }

    #[test]
    fn range_geometry_places_requested_eigenvalues() {
        let c_p = build_cp(&ScenarioConfig::default_anchors(), 0).unwrap();
        let g = synthesize_gains(&c_p, &GainParams::default(), 0.1).unwrap();
        let sys = SystemMatrices::new(&c_p).unwrap();
        let eigs = sorted_eigs(&g.nominal_closed_loop(&sys));
        let expected = [-4.0, -4.0, -4.0, -3.0, -3.0, -3.0];
        for ((re, im), e) in eigs.iter().zip(expected) {
            assert!((re - e).abs() < 1e-6, "{re} vs {e}");
            assert!(im.abs() < 1e-6);
        }
        // K = L_gamma K0 scales the closed loop by gamma.
        let eigs = sorted_eigs(&g.closed_loop(&sys));
        for ((re, _), e) in eigs.iter().zip(expected) {
            assert!((re - 2.0 * e).abs() < 1e-6);
        }
        let lg = DMatrix::from_fn(6, 6, |i, j| g.l_gamma[(i, j)]);
        assert_relative_eq!(g.k, lg * &g.k0, epsilon = 1e-12);
    }

    #[test]
    fn scaling_identities() {
        let c_p = build_cp(&ScenarioConfig::default_anchors(), 0).unwrap();
        let sys = SystemMatrices::new(&c_p).unwrap();
        for gamma in [1.0, 2.0, 10.0] {
            let l = l_gamma(gamma);
            let l_inv = l.try_inverse().unwrap();
            assert_relative_eq!(l_inv * sys.a * l, sys.a * gamma, epsilon = 1e-12);
            assert_relative_eq!(l_inv * sys.b, sys.b / (gamma * gamma), epsilon = 1e-15);
            let cl = &sys.c * DMatrix::from_fn(6, 6, |i, j| l[(i, j)]);
            assert_relative_eq!(cl, &sys.c * gamma, epsilon = 1e-12);
        }
    }

    #[test]
    fn unstable_poles_rejected() {
        let p = GainParams {
            poles: [2.0, -4.0],
            ..GainParams::default()
        };
        let err = synthesize_gains(&DMatrix::identity(3, 3), &p, 0.1).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn invalid_scalars_rejected() {
        let p = GainParams {
            gamma: 0.5,
            ..GainParams::default()
        };
        assert!(synthesize_gains(&DMatrix::identity(3, 3), &p, 0.1).is_err());
        let p = GainParams {
            k_r: 0.0,
            ..GainParams::default()
        };
        assert!(synthesize_gains(&DMatrix::identity(3, 3), &p, 0.1).is_err());
    }

    #[test]
    fn overdetermined_output_uses_left_inverse() {
        let mut anchors = ScenarioConfig::default_anchors();
        anchors.push(nalgebra::Vector3::new(-3.0, 0.5, 4.0));
        let c_p = build_cp(&anchors, 0).unwrap();
        let g = synthesize_gains(&c_p, &GainParams::default(), 0.1).unwrap();
        assert_eq!(g.k.shape(), (6, 4));
        assert_relative_eq!(g.kv_cp, Matrix3::identity() * 48.0, epsilon = 1e-10);
    }
}
