use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{KoopmanError, Result};

/// Eigenvalues and unit-norm right eigenvectors of a general complex matrix.
#[derive(Debug, Clone)]
pub struct ComplexEigen {
    pub values: Vec<Complex64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: DMatrix<Complex64>,
}

const ITERATIONS_PER_EIGENVALUE: usize = 60;

/// Complex Schur decomposition by Hessenberg reduction and shifted QR
/// sweeps, followed by back-substitution for the eigenvectors.
pub fn complex_eigen(a: &DMatrix<Complex64>) -> Result<ComplexEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(KoopmanError::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok(ComplexEigen { values: Vec::new(), vectors: DMatrix::zeros(0, 0) });
    }
    let mut h = a.clone();
    let mut z = DMatrix::<Complex64>::identity(n, n);
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z)?;

    let values: Vec<Complex64> = (0..n).map(|k| h[(k, k)]).collect();
    let norm = h.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = norm * f64::EPSILON;
    let mut vectors = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut y = DVector::from_element(n, Complex64::new(0.0, 0.0));
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += h[(i, j)] * y[j];
            }
            let mut denom = h[(i, i)] - values[k];
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[i] = -acc / denom;
        }
        let x = &z * y;
        let xn = x.norm();
        vectors.set_column(k, &(x / Complex64::new(xn, 0.0)));
    }
    Ok(ComplexEigen { values, vectors })
}

/// Unitary reduction `A = Z H Zᴴ` to upper Hessenberg form.
fn hessenberg(h: &mut DMatrix<Complex64>, z: &mut DMatrix<Complex64>) {
    let n = h.nrows();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { Complex64::new(1.0, 0.0) };
        let mut v = x;
        v[0] += phase * norm;
        let beta = 2.0 / v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        // rows k+1.. of H
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            let s = dot * beta;
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= vi * s;
            }
        }
        // columns k+1.. of H and Z
        for m in [&mut *h, &mut *z] {
            for i in 0..n {
                let dot: Complex64 = v.iter().enumerate().map(|(j, vj)| m[(i, k + 1 + j)] * vj).sum();
                let s = dot * beta;
                for (j, vj) in v.iter().enumerate() {
                    m[(i, k + 1 + j)] -= s * vj.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Rotation `[c s; −s̄ c]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    if b.norm() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let norm = a.norm().hypot(b.norm());
    let phase = a / a.norm();
    (a.norm() / norm, phase * b.conj() / norm)
}

/// Reduces Hessenberg `h` to upper triangular Schur form in place.
fn schur(h: &mut DMatrix<Complex64>, z: &mut DMatrix<Complex64>) -> Result<()> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let mut rotations: Vec<(f64, Complex64)> = Vec::with_capacity(n);
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let scale = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if h[(l, l - 1)].norm() <= eps * scale || h[(l, l - 1)].norm() < f64::MIN_POSITIVE {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > ITERATIONS_PER_EIGENVALUE * n {
            return Err(KoopmanError::NoConvergence(total));
        }

        let mu = if iter.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.25 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        rotations.clear();
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let (x, y) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            h[(k + 1, k)] = Complex64::new(0.0, 0.0);
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = l + offset;
            for i in 0..=(k + 1).min(hi) {
                let (x, y) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let (x, y) = (z[(i, k)], z[(i, k + 1)]);
                z[(i, k)] = x * c + y * s.conj();
                z[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(())
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() < (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn check_pairs(a: &DMatrix<Complex64>) -> ComplexEigen {
        let eig = complex_eigen(a).unwrap();
        for k in 0..a.nrows() {
            let v = eig.vectors.column(k);
            let r = a * v - v * eig.values[k];
            assert!(r.norm() < 1e-10 * a.norm().max(1.0), "pair {k} residual {}", r.norm());
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        eig
    }

    #[test]
    fn rotation_block_has_conjugate_pair() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let a = DMatrix::from_row_slice(2, 2, &[c64(c, 0.0), c64(-s, 0.0), c64(s, 0.0), c64(c, 0.0)]);
        let eig = check_pairs(&a);
        let mut args: Vec<f64> = eig.values.iter().map(|z| z.arg()).collect();
        args.sort_by(f64::total_cmp);
        assert!((args[0] + 0.3).abs() < 1e-14 && (args[1] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn known_spectrum_after_similarity() {
        let diag = [c64(0.9, 0.0), c64(0.5, 0.0), c64(-0.2, 0.7), c64(1.0, -1.0), c64(0.05, 0.0)];
        let n = diag.len();
        let p = DMatrix::from_fn(n, n, |i, j| c64(1.0 / (1.0 + i as f64 + 2.0 * j as f64), ((i * j) as f64 * 0.3).sin()));
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { c64(0.0, 0.0) });
        let a = &p * d * p.clone().try_inverse().unwrap();
        let eig = check_pairs(&a);
        for target in diag {
            let best = eig.values.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "missing {target}");
        }
    }

    #[test]
    fn companion_matrix_of_cubic() {
        // roots 1, 2, 3: z³ − 6z² + 11z − 6
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[c64(0.0, 0.0), c64(0.0, 0.0), c64(6.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(-11.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0), c64(6.0, 0.0)],
        );
        let eig = check_pairs(&a);
        let mut re: Vec<f64> = eig.values.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (x, y) in re.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn random_dense_matrix() {
        let a = DMatrix::from_fn(12, 12, |i, j| c64(((i * 13 + j * 7) as f64).sin(), ((i + 3 * j) as f64 * 0.7).cos()));
        let eig = check_pairs(&a);
        let trace: Complex64 = (0..12).map(|i| a[(i, i)]).sum();
        let sum: Complex64 = eig.values.iter().sum();
        assert!((trace - sum).norm() < 1e-11);
    }
}
