//! Small dense linear algebra: Gaussian elimination and one-sided Jacobi SVD.
//!
//! Matrices are row-major `Vec<F>` with explicit dimensions.

use crate::scalar::Scalar;

/// Solves `a x = b` for square `a` (n × n) with partial pivoting.
///
/// Returns `None` if a pivot vanishes.
pub fn solve<F: Scalar>(n: usize, a: &[F], b: &[F]) -> Option<Vec<F>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .abs()
                .partial_cmp(&m[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv * n + col].abs() <= F::min_positive_value() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == F::zero() {
                continue;
            }
            for k in col..n {
                let t = m[col * n + k];
                m[row * n + k] -= f * t;
            }
            let t = x[col];
            x[row] -= f * t;
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Some(x)
}

/// Inverse of a square matrix via Gauss-Jordan elimination.
pub fn inverse<F: Scalar>(n: usize, a: &[F]) -> Option<Vec<F>> {
    let mut m = a.to_vec();
    let mut inv = vec![F::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = F::one();
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .abs()
                .partial_cmp(&m[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv * n + col].abs() <= F::min_positive_value() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col];
            if f == F::zero() {
                continue;
            }
            for k in 0..n {
                let (tm, ti) = (m[col * n + k], inv[col * n + k]);
                m[row * n + k] -= f * tm;
                inv[row * n + k] -= f * ti;
            }
        }
    }
    Some(inv)
}

/// Thin singular value decomposition `a = u diag(sigma) vᵀ` of an `rows × cols`
/// matrix with `rows ≥ cols`, by one-sided Jacobi rotations.
pub struct Svd<F> {
    /// `rows × cols`, orthonormal columns for nonzero singular values.
    pub u: Vec<F>,
    pub sigma: Vec<F>,
    /// `cols × cols` orthogonal.
    pub v: Vec<F>,
}

pub fn svd<F: Scalar>(rows: usize, cols: usize, a: &[F]) -> Svd<F> {
    assert!(rows >= cols, "svd expects a tall matrix");
    let mut w = a.to_vec();
    let mut v = vec![F::zero(); cols * cols];
    for i in 0..cols {
        v[i * cols + i] = F::one();
    }
    let tol = F::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (F::zero(), F::zero(), F::zero());
                for i in 0..rows {
                    let (x, y) = (w[i * cols + p], w[i * cols + q]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == F::zero() {
                    continue;
                }
                rotated = true;
                let two = F::lit(2.0);
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (F::one() + zeta * zeta).sqrt());
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (w[i * cols + p], w[i * cols + q]);
                    w[i * cols + p] = c * x - s * y;
                    w[i * cols + q] = s * x + c * y;
                }
                for i in 0..cols {
                    let (x, y) = (v[i * cols + p], v[i * cols + q]);
                    v[i * cols + p] = c * x - s * y;
                    v[i * cols + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![F::zero(); cols];
    let mut u = vec![F::zero(); rows * cols];
    for j in 0..cols {
        let norm = (0..rows)
            .map(|i| w[i * cols + j] * w[i * cols + j])
            .sum::<F>()
            .sqrt();
        sigma[j] = norm;
        if norm > F::zero() {
            for i in 0..rows {
                u[i * cols + j] = w[i * cols + j] / norm;
            }
        }
    }
    Svd { u, sigma, v }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_2x2() {
        let x = solve::<f64>(2, &[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_is_none() {
        assert!(solve(2, &[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]).is_none());
        assert!(inverse(2, &[1.0, 2.0, 2.0, 4.0]).is_none());
    }

    #[test]
    fn inverse_roundtrip() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.1, 0.3, 2.0];
        let inv = inverse(3, &a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((e - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn svd_reconstructs_and_detects_rank() {
        // third column = first + second
        let a = [1.0, 2.0, 3.0, 0.0, 1.0, 1.0, 4.0, -1.0, 3.0, 2.0, 2.0, 4.0];
        let d = svd(4, 3, &a);
        let mut s = d.sigma.clone();
        s.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!(s[2] / s[0] < 1e-12);
        for i in 0..4 {
            for j in 0..3 {
                let e: f64 = (0..3).map(|k| d.u[i * 3 + k] * d.sigma[k] * d.v[j * 3 + k]).sum();
                assert!((e - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }
}
