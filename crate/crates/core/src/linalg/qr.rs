use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Minimum-norm least-squares solution of `A x ≈ b`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: DVector<Complex64>,
    /// Numerical rank found by the pivoted factorization.
    pub rank: usize,
    /// `‖b − A x‖₂`.
    pub residual: f64,
}

/// Householder reflector `H = I − β v vᴴ` that maps a vector onto a multiple
/// of the first unit vector.
struct Reflector {
    v: Vec<Complex64>,
    beta: f64,
}

impl Reflector {
    /// Builds the reflector for `x` and returns it with the image `α e₁`.
    fn new(x: &[Complex64]) -> (Self, Complex64) {
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (Reflector { v: vec![Complex64::new(0.0, 0.0); x.len()], beta: 0.0 }, Complex64::new(0.0, 0.0));
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
        (Reflector { v, beta }, alpha)
    }

    /// Applies `H` to the column segment `a[offset.., col]`.
    fn apply_to_column(&self, a: &mut DMatrix<Complex64>, offset: usize, col: usize) {
        if self.beta == 0.0 {
            return;
        }
        let mut dot = Complex64::new(0.0, 0.0);
        for (i, vi) in self.v.iter().enumerate() {
            dot += vi.conj() * a[(offset + i, col)];
        }
        let scale = dot * self.beta;
        for (i, vi) in self.v.iter().enumerate() {
            a[(offset + i, col)] -= vi * scale;
        }
    }

    fn apply_to_vector(&self, b: &mut DVector<Complex64>, offset: usize) {
        if self.beta == 0.0 {
            return;
        }
        let mut dot = Complex64::new(0.0, 0.0);
        for (i, vi) in self.v.iter().enumerate() {
            dot += vi.conj() * b[offset + i];
        }
        let scale = dot * self.beta;
        for (i, vi) in self.v.iter().enumerate() {
            b[offset + i] -= vi * scale;
        }
    }
}

/// Householder QR of `a`, optionally with column pivoting, stopped at the
/// numerical rank. The triangular factor overwrites `a`'s upper part.
///
/// Returns the reflectors, the column permutation and the rank.
fn householder_qr(a: &mut DMatrix<Complex64>, pivot: bool, rel_tol: f64) -> (Vec<Reflector>, Vec<usize>, usize) {
    let (m, n) = a.shape();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors = Vec::new();
    let mut lead = 0.0;
    for j in 0..m.min(n) {
        let column_norm = |a: &DMatrix<Complex64>, c: usize| (j..m).map(|i| a[(i, c)].norm_sqr()).sum::<f64>();
        if pivot {
            let (best, _) = (j..n)
                .map(|c| (c, column_norm(a, c)))
                .fold((j, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if best != j {
                a.swap_columns(j, best);
                perm.swap(j, best);
            }
        }
        let norm = column_norm(a, j).sqrt();
        if j == 0 {
            lead = norm;
        }
        if norm == 0.0 || norm <= rel_tol * lead {
            break;
        }
        let x: Vec<Complex64> = (j..m).map(|i| a[(i, j)]).collect();
        let (h, alpha) = Reflector::new(&x);
        a[(j, j)] = alpha;
        for i in j + 1..m {
            a[(i, j)] = Complex64::new(0.0, 0.0);
        }
        for c in j + 1..n {
            h.apply_to_column(a, j, c);
        }
        reflectors.push(h);
    }
    let rank = reflectors.len();
    (reflectors, perm, rank)
}

/// Minimum-norm least squares through a complete orthogonal decomposition:
/// pivoted QR `A P = Q [R₁₁ R₁₂]`, followed by a QR of `[R₁₁ R₁₂]ᴴ`.
///
/// Columns whose pivoted norm falls below `rel_tol` times the leading one are
/// treated as dependent.
pub fn least_squares_min_norm(a: &DMatrix<Complex64>, b: &DVector<Complex64>, rel_tol: f64) -> LeastSquares {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "right-hand side length must match row count");
    let mut work = a.clone();
    let (reflectors, perm, rank) = householder_qr(&mut work, true, rel_tol);
    let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
    if rank > 0 {
        let mut qb = b.clone();
        for (j, h) in reflectors.iter().enumerate() {
            h.apply_to_vector(&mut qb, j);
        }
        // T = [R11 R12] (rank × n); minimum-norm y solves T y = d through Tᴴ = Z S
        let mut th = DMatrix::from_fn(n, rank, |i, j| if i >= j { work[(j, i)].conj() } else { Complex64::new(0.0, 0.0) });
        let (zref, _, _) = householder_qr(&mut th, false, 0.0);
        // forward substitution Sᴴ w = d
        let mut w = vec![Complex64::new(0.0, 0.0); rank];
        for i in 0..rank {
            let mut acc = qb[i];
            for k in 0..i {
                acc -= th[(k, i)].conj() * w[k];
            }
            w[i] = acc / th[(i, i)].conj();
        }
        // y = Z w, Z = H₀ H₁ ⋯ applied to [w; 0]
        let mut y = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for i in 0..rank {
            y[i] = w[i];
        }
        for (j, h) in zref.iter().enumerate().rev() {
            h.apply_to_vector(&mut y, j);
        }
        for (k, &p) in perm.iter().enumerate() {
            x[p] = y[k];
        }
    }
    let residual = (b - a * &x).norm();
    LeastSquares { x, rank, residual }
}
