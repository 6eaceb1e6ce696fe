use num_complex::Complex64;

use crate::error::{KoopmanError, Result};

/// Solves `Σ_i x_i λ_i^j = b_j` for `j = 0..n`, i.e. `Vᵀ x = b` with the
/// Vandermonde matrix `V[i][j] = λ_i^j`, in `O(n²)` operations.
///
/// Nodes closer than `tol · max(1, |λ_i|)` are rejected since the system is
/// then numerically singular.
#[allow(clippy::needless_range_loop)]
pub fn solve_vandermonde(nodes: &[Complex64], rhs: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let n = nodes.len();
    if rhs.len() != n {
        return Err(KoopmanError::DimensionMismatch { expected: n, got: rhs.len() });
    }
    check_distinct(nodes, tol)?;
    let mut f = rhs.to_vec();
    if n == 0 {
        return Ok(f);
    }
    let last = n - 1;
    for k in 0..last {
        for i in (k + 1..=last).rev() {
            let prev = f[i - 1];
            f[i] -= nodes[k] * prev;
        }
    }
    for k in (0..last).rev() {
        for i in k + 1..=last {
            f[i] /= nodes[i] - nodes[i - k - 1];
        }
        for i in k..last {
            let next = f[i + 1];
            f[i] -= next;
        }
    }
    Ok(f)
}

/// Errors with the first pair of nodes that coincide within tolerance.
pub(crate) fn check_distinct(nodes: &[Complex64], tol: f64) -> Result<()> {
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let scale = nodes[i].norm().max(nodes[j].norm()).max(1.0);
            if (nodes[i] - nodes[j]).norm() <= tol * scale {
                return Err(KoopmanError::DegenerateVandermonde { i, j, tol });
            }
        }
    }
    Ok(())
}
