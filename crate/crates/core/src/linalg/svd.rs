use nalgebra::DMatrix;
use num_complex::Complex64;

/// Thin singular value decomposition `A = U diag(σ) Vᴴ`.
///
/// `U` is `m × k`, `V` is `n × k` with `k = min(m, n)`; singular values are
/// sorted in decreasing order. Columns of `U` belonging to zero singular
/// values are left as zero vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<Complex64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<Complex64>,
}

impl Svd {
    /// Number of singular values above `rel_tol · σ₀`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let lead = self.sigma.first().copied().unwrap_or(0.0);
        if lead == 0.0 {
            return 0;
        }
        self.sigma.iter().take_while(|&&s| s > rel_tol * lead).count()
    }
}

const MAX_SWEEPS: usize = 80;

/// One-sided Jacobi SVD. Accurate to working precision for the small dense
/// matrices met in mode decompositions.
pub fn thin_svd(a: &DMatrix<Complex64>) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = tall_svd(&a.adjoint());
        return Svd { u: t.v, sigma: t.sigma, v: t.u };
    }
    tall_svd(a)
}

fn tall_svd(a: &DMatrix<Complex64>) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<Complex64>::identity(n, n);
    let eps = f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if alpha == 0.0 || beta == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, phase, c, s);
                rotate(&mut v, p, q, phase, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &(j, s)) in order.iter().enumerate() {
        sigma.push(s);
        if s > 0.0 {
            for i in 0..m {
                u[(i, k)] = w[(i, j)] / s;
            }
        }
        vs.set_column(k, &v.column(j));
    }
    Svd { u, sigma, v: vs }
}

/// Applies the plane rotation that orthogonalises columns `p` and `q`, after
/// rotating the phase of column `q` so that their inner product is real.
fn rotate(x: &mut DMatrix<Complex64>, p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    for i in 0..x.nrows() {
        let xp = x[(i, p)];
        let xq = x[(i, q)] * phase;
        x[(i, p)] = xp * c - xq * s;
        x[(i, q)] = xp * s + xq * c;
    }
}
