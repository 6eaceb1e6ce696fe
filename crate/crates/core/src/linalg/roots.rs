use nalgebra::DMatrix;
use num_complex::Complex64;

use super::eigen::complex_eigen;
use crate::error::{KoopmanError, Result};

const MAX_ABERTH_ITERATIONS: usize = 500;

/// Roots of `Σ_j coeffs[j] z^j`, coefficients in ascending degree.
///
/// Trailing zero coefficients are dropped and leading zero coefficients give
/// exact zero roots. The remaining roots are found by Aberth–Ehrlich
/// simultaneous iteration on the polynomial rescaled so that its constant and
/// leading coefficients have equal modulus, then refined by Newton steps that
/// are kept only when they lower the residual. Should the iteration stall,
/// the eigenvalues of the companion matrix are used instead.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let degree = match coeffs.iter().rposition(|c| c.norm() != 0.0) {
        Some(d) => d,
        None => return Err(KoopmanError::input("polynomial has no nonzero coefficient")),
    };
    let zeros = coeffs.iter().position(|c| c.norm() != 0.0).unwrap_or(0);
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let core = &coeffs[zeros..=degree];
    if core.len() == 1 {
        return Ok(roots);
    }
    let found = match aberth(core) {
        Some(r) => r,
        None => companion_roots(core)?,
    };
    roots.extend(found.into_iter().map(|z| polish(core, z)));
    Ok(roots)
}

fn aberth(coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    let rho = (coeffs[0].norm() / coeffs[n].norm()).powf(1.0 / n as f64);
    let scaled: Vec<Complex64> = coeffs.iter().enumerate().map(|(j, c)| c * rho.powi(j as i32)).collect();
    let mut w: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];
    for _ in 0..MAX_ABERTH_ITERATIONS {
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (p, dp) = eval_with_derivative(&scaled, w[k]);
            if p.norm() == 0.0 {
                done[k] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (w[k] - w[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if !step.is_finite() {
                return None;
            }
            w[k] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * w[k].norm().max(f64::MIN_POSITIVE) {
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return Some(w.into_iter().map(|z| z * rho).collect());
        }
    }
    None
}

fn companion_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let degree = coeffs.len() - 1;
    let lead = coeffs[degree];
    let mut companion = DMatrix::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for (i, c) in coeffs[..degree].iter().enumerate() {
        companion[(i, degree - 1)] = -c / lead;
    }
    Ok(complex_eigen(&companion)?.values)
}

fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let (mut p, mut dp) = eval_with_derivative(coeffs, z);
    for _ in 0..3 {
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let candidate = z - p / dp;
        let (cp, cdp) = eval_with_derivative(coeffs, candidate);
        if cp.norm().is_nan() || cp.norm() >= p.norm() {
            break;
        }
        z = candidate;
        p = cp;
        dp = cdp;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn product_coeffs(roots: &[Complex64]) -> Vec<Complex64> {
        let mut c = vec![c64(1.0, 0.0)];
        for r in roots {
            let mut next = vec![c64(0.0, 0.0); c.len() + 1];
            for (j, cj) in c.iter().enumerate() {
                next[j + 1] += cj;
                next[j] -= cj * r;
            }
            c = next;
        }
        c
    }

    #[test]
    fn recovers_prescribed_roots() {
        let roots = [c64(0.9, 0.0), c64(0.5, 0.0), c64(0.3, 0.8), c64(0.3, -0.8), c64(-1.1, 0.2)];
        let found = polynomial_roots(&product_coeffs(&roots)).unwrap();
        assert_eq!(found.len(), roots.len());
        for r in roots {
            let best = found.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "missing root {r}");
        }
    }

    #[test]
    fn agrees_with_companion_eigenvalues_on_badly_scaled_polynomial() {
        let roots = [c64(1e-3, 0.0), c64(0.02, 0.01), c64(3.0, 0.0), c64(40.0, -2.0), c64(-500.0, 0.0)];
        let c = product_coeffs(&roots);
        let found = polynomial_roots(&c).unwrap();
        let oracle = companion_roots(&c).unwrap();
        for r in roots {
            let best = found.iter().map(|z| (z - r).norm() / r.norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "missing root {r}");
            assert!(oracle.iter().any(|z| (z - r).norm() / r.norm() < 1e-8));
        }
    }

    #[test]
    fn unit_circle_roots_of_unity() {
        let mut c = vec![c64(0.0, 0.0); 9];
        c[0] = c64(-1.0, 0.0);
        c[8] = c64(1.0, 0.0);
        for z in polynomial_roots(&c).unwrap() {
            assert!((z.norm() - 1.0).abs() < 1e-13);
            assert!((z.powu(8) - c64(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn trailing_zeros_and_constants() {
        assert!(polynomial_roots(&[c64(2.0, 0.0), c64(0.0, 0.0)]).unwrap().is_empty());
        assert!(polynomial_roots(&[c64(0.0, 0.0)]).is_err());
        let r = polynomial_roots(&[c64(-3.0, 0.0), c64(1.5, 0.0), c64(0.0, 0.0)]).unwrap();
        assert!((r[0] - c64(2.0, 0.0)).norm() < 1e-15);
        // z²(z − 1)
        let r = polynomial_roots(&[c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0), c64(1.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
    }
}
