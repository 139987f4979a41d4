use nalgebra::{DMatrix, DVector, Matrix6};

use crate::error::{Error, Result};
use crate::observer::spectral_abscissa;

/// Largest acceptable `|P A + A^T P + I|_F`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Lyapunov {
    pub p: Matrix6<f64>,
    /// Smallest eigenvalue of `P`.
    pub beta1: f64,
    /// Largest eigenvalue of `P`.
    pub beta2: f64,
    pub residual: f64,
}

/// Solves `P A + A^T P = -I` for Hurwitz `A`.
///
/// The equation is vectorized as `(I (x) A^T + A^T (x) I) vec(P) = -vec(I)` and
/// solved by LU.
pub fn solve_lyapunov(a: &Matrix6<f64>) -> Result<Lyapunov> {
    let abscissa = spectral_abscissa(a);
    if abscissa.is_nan() || abscissa >= 0.0 {
        return Err(Error::NotHurwitz(abscissa));
    }
    const N: usize = 6;
    let at = a.transpose();
    let mut big = DMatrix::<f64>::zeros(N * N, N * N);
    // Column-major vec: P[(i, j)] sits at index j * N + i.
    for j in 0..N {
        for i in 0..N {
            let row = j * N + i;
            // (A^T P)[(i, j)] = sum_k A^T[(i, k)] P[(k, j)]
            for k in 0..N {
                big[(row, j * N + k)] += at[(i, k)];
            }
            // (P A)[(i, j)] = sum_k P[(i, k)] A[(k, j)]
            for k in 0..N {
                big[(row, k * N + i)] += a[(k, j)];
            }
        }
    }
    let rhs = DVector::from_fn(N * N, |idx, _| if idx % (N + 1) == 0 { -1.0 } else { 0.0 });
    let sol = big.lu().solve(&rhs).ok_or(Error::NotHurwitz(abscissa))?;
    let p = Matrix6::from_fn(|i, j| sol[j * N + i]);
    let p = 0.5 * (p + p.transpose());
    let residual = (p * a + at * p + Matrix6::identity()).norm();
    let eig = p.symmetric_eigenvalues();
    Ok(Lyapunov {
        p,
        beta1: eig.min(),
        beta2: eig.max(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn negative_identity() {
        let sol = solve_lyapunov(&(-Matrix6::identity())).unwrap();
        assert_relative_eq!(sol.p, Matrix6::identity() * 0.5, epsilon = 1e-14);
        assert_relative_eq!(sol.beta1, 0.5, epsilon = 1e-14);
        assert_relative_eq!(sol.beta2, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn companion_blocks_match_closed_form() {
        // Per axis A = [[-a, 1], [-b, 0]] gives
        // P = [[(1 + b) / 2a, -1/2], [-1/2, ((1 + b) / 2a + a / 2) / b]].
        let (a, b) = (7.0, 12.0);
        let mut acl = Matrix6::zeros();
        for i in 0..3 {
            acl[(i, i)] = -a;
            acl[(i, i + 3)] = 1.0;
            acl[(i + 3, i)] = -b;
        }
        let sol = solve_lyapunov(&acl).unwrap();
        let p1 = (1.0 + b) / (2.0 * a);
        let p3 = (p1 + a / 2.0) / b;
        for i in 0..3 {
            assert_relative_eq!(sol.p[(i, i)], p1, epsilon = 1e-12);
            assert_relative_eq!(sol.p[(i, i + 3)], -0.5, epsilon = 1e-12);
            assert_relative_eq!(sol.p[(i + 3, i + 3)], p3, epsilon = 1e-12);
        }
        assert!(sol.residual < LYAPUNOV_RESIDUAL_TOL);
        assert!(sol.beta1 > 0.0 && sol.beta1 <= sol.beta2);
    }

    #[test]
    fn unstable_matrix_rejected() {
        let mut a = -Matrix6::identity();
        a[(2, 2)] = 0.5;
        assert!(matches!(solve_lyapunov(&a), Err(Error::NotHurwitz(_))));
    }

    #[test]
    fn non_normal_matrix_residual() {
        let a = Matrix6::from_fn(|i, j| {
            if i == j {
                -1.0 - i as f64
            } else if j == i + 1 {
                3.0
            } else {
                0.1 * ((i * 7 + j * 3) % 5) as f64 - 0.2
            }
        });
        let sol = solve_lyapunov(&a).unwrap();
        assert!(sol.residual < LYAPUNOV_RESIDUAL_TOL);
        assert_relative_eq!(sol.p, sol.p.transpose(), epsilon = 1e-14);
        assert!(sol.beta1 > 0.0);
    }
}
