//! Dense symmetric reduction to tridiagonal form (Householder) and a small
//! cyclic Jacobi eigensolver for low-dimensional symmetric matrices.

use crate::linalg::{dot, norm2};

/// Householder tridiagonalization of a dense symmetric matrix.
///
/// The reflectors are kept so selected tridiagonal eigenvectors can be
/// transformed back to the original basis without accumulating the full
/// orthogonal factor.
pub struct DenseTridiagonalization {
    n: usize,
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// reflector k acts on indices k+1..n; stored with v[0] = 1 implicit
    reflectors: Vec<(usize, f64, Vec<f64>)>, // (start, beta, v)
}

impl DenseTridiagonalization {
    /// Reduce `a` (row-major n×n, symmetric; consumed) to tridiagonal form.
    pub fn new(mut a: Vec<f64>, n: usize) -> Self {
        assert_eq!(a.len(), n * n);
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut off = vec![0.0; n.saturating_sub(1)];

        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1; // active column length below the diagonal
            let mut x = vec![0.0; m];
            for i in 0..m {
                x[i] = a[(k + 1 + i) * n + k];
            }
            let alpha = norm2(&x);
            if alpha == 0.0 {
                off[k] = 0.0;
                continue;
            }
            let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut v = x.clone();
            v[0] += sign * alpha;
            let vnorm2 = dot(&v, &v);
            if vnorm2 == 0.0 {
                off[k] = -sign * alpha;
                continue;
            }
            let beta = 2.0 / vnorm2;
            off[k] = -sign * alpha;

            // p = beta * A22 * v  (A22 = a[k+1.., k+1..])
            let mut p = vec![0.0; m];
            for i in 0..m {
                let row = (k + 1 + i) * n + (k + 1);
                let mut s = 0.0;
                for j in 0..m {
                    s += a[row + j] * v[j];
                }
                p[i] = beta * s;
            }
            // w = p - (beta/2)(pᵀv) v
            let coeff = 0.5 * beta * dot(&p, &v);
            let mut w = p;
            for i in 0..m {
                w[i] -= coeff * v[i];
            }
            // A22 -= v wᵀ + w vᵀ
            for i in 0..m {
                let row = (k + 1 + i) * n + (k + 1);
                let (vi, wi) = (v[i], w[i]);
                for j in 0..m {
                    a[row + j] -= vi * w[j] + wi * v[j];
                }
            }
            // clear the eliminated column (kept implicitly by `off`)
            a[(k + 1) * n + k] = off[k];
            for i in 1..m {
                a[(k + 1 + i) * n + k] = 0.0;
            }
            reflectors.push((k + 1, beta, v));
        }
        if n >= 2 {
            off[n - 2] = a[(n - 1) * n + (n - 2)];
        }
        let diag = (0..n).map(|i| a[i * n + i]).collect();
        DenseTridiagonalization {
            n,
            diag,
            off,
            reflectors,
        }
    }

    /// Map a tridiagonal-basis vector back to the original basis: x = Q y.
    pub fn back_transform(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let mut x = y.to_vec();
        for (start, beta, v) in self.reflectors.iter().rev() {
            let seg = &mut x[*start..];
            let s = beta * dot(v, seg);
            for (xi, vi) in seg.iter_mut().zip(v) {
                *xi -= s * vi;
            }
        }
        x
    }
}

/// Solve the SPD system A x = b by dense Cholesky (A row-major, consumed).
pub fn solve_spd(mut a: Vec<f64>, n: usize, b: &[f64]) -> crate::error::Result<Vec<f64>> {
    use crate::error::CoreError;
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(CoreError::Solver {
                message: format!("dense Cholesky pivot {d:.3e} at column {j}"),
                worst_residual: d,
            });
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= a[i * n + k] * x[k];
        }
        x[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= a[k * n + i] * x[k];
        }
        x[i] /= a[i * n + i];
    }
    Ok(x)
}

/// Numerical row rank by modified Gram-Schmidt with a relative threshold.
pub fn row_rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = rows.iter().map(|r| norm2(r)).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return 0;
    }
    for row in rows {
        let mut v = row.clone();
        for b in &basis {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let nrm = norm2(&v);
        if nrm > rel_tol * scale {
            for x in v.iter_mut() {
                *x /= nrm;
            }
            basis.push(v);
        }
    }
    basis.len()
}

/// Cyclic Jacobi eigendecomposition for small dense symmetric matrices.
/// Returns (eigenvalues ascending, eigenvectors as rows of the same order).
pub fn jacobi_eigen(a_in: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a_in.len(), n * n);
    let mut a = a_in.to_vec();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut offdiag = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                offdiag += a[i * n + j] * a[i * n + j];
            }
        }
        if offdiag.sqrt() < 1e-15 * (1.0 + norm2(&a)) {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[p * n + r];
                if apr.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[r * n + r] - a[p * n + p]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akr = a[k * n + r];
                    a[k * n + p] = c * akp - s * akr;
                    a[k * n + r] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let ark = a[r * n + k];
                    a[p * n + k] = c * apk - s * ark;
                    a[r * n + k] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[k * n + p];
                    let qkr = q[k * n + r];
                    q[k * n + p] = c * qkp - s * qkr;
                    q[k * n + r] = s * qkp + c * qkr;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..n).map(|row| q[row * n + col]).collect())
        .collect();
    (values, vectors)
}
