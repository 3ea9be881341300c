//! Symmetric tridiagonal eigenvalues (implicit-shift QL) and selected
//! eigenvectors (inverse iteration with cluster reorthogonalization).

use crate::error::{CoreError, Result};
use crate::fields::rng::SplitMix64;
use crate::linalg::{axpy, dot, norm2};

/// All eigenvalues of the symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` (`e.len() == d.len() - 1`), ascending.
///
/// Implicit-shift QL with Wilkinson-style shifts; eigenvalues only, so the
/// cost is O(n²) overall.
pub fn ql_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(n > 0 && off.len() + 1 == n);
    if n == 1 {
        return Ok(vec![diag[0]]);
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            // locate a negligible off-diagonal element
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(CoreError::Solver {
                    message: format!("QL failed to converge for eigenvalue {l}"),
                    worst_residual: e[l].abs(),
                });
            }
            // implicit shift from the leading 2x2
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}

/// Eigenvectors of a symmetric tridiagonal matrix for the given eigenvalues,
/// by inverse iteration. Eigenvalues closer than `cluster_tol` (absolute)
/// are reorthogonalized against each other so degenerate groups come out
/// orthonormal. Deterministic in `seed`.
pub fn tridiag_eigenvectors(
    diag: &[f64],
    off: &[f64],
    eigenvalues: &[f64],
    cluster_tol: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n = diag.len();
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut rng = SplitMix64::new(seed);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());

    for (idx, &lambda) in eigenvalues.iter().enumerate() {
        // group of previously computed vectors with nearby eigenvalues
        let group_start = (0..idx)
            .rev()
            .take_while(|&j| (eigenvalues[j + 1] - eigenvalues[j]).abs() <= cluster_tol)
            .last()
            .unwrap_or(idx);
        // slight perturbation keeps the factorization nonsingular; the
        // iteration still converges onto the exact eigenspace
        let shift = lambda + scale * f64::EPSILON * (1.0 + (idx - group_start) as f64);
        let lu = TriLu::factor(diag, off, shift);
        let mut x: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
        let nrm = norm2(&x);
        for v in x.iter_mut() {
            *v /= nrm;
        }
        for _ in 0..3 {
            for prev in &vectors[group_start..idx] {
                let c = dot(&x, prev);
                axpy(-c, prev, &mut x);
            }
            let mut y = lu.solve(&x);
            let nrm = norm2(&y);
            if nrm == 0.0 {
                y = x.clone();
            } else {
                for v in y.iter_mut() {
                    *v /= nrm;
                }
            }
            x = y;
        }
        for prev in &vectors[group_start..idx] {
            let c = dot(&x, prev);
            axpy(-c, prev, &mut x);
        }
        let nrm = norm2(&x);
        for v in x.iter_mut() {
            *v /= nrm;
        }
        vectors.push(x);
    }
    vectors
}

/// LU factorization of (T - shift·I) with partial pivoting, for a
/// symmetric tridiagonal T.
struct TriLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swap: Vec<bool>,
}

impl TriLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64) -> TriLu {
        let n = diag.len();
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swap = vec![false; n.saturating_sub(1)];

        let mut p = diag[0] - shift;
        let mut q = if n > 1 { off[0] } else { 0.0 };
        let mut r = 0.0;
        for i in 0..n.saturating_sub(1) {
            let sub = off[i];
            let dnext = diag[i + 1] - shift;
            let enext = if i + 1 < n - 1 { off[i + 1] } else { 0.0 };
            if sub.abs() > p.abs() {
                swap[i] = true;
                u0[i] = sub;
                u1[i] = dnext;
                u2[i] = enext;
                let m = p / sub;
                mult[i] = m;
                p = q - m * dnext;
                q = r - m * enext;
            } else {
                swap[i] = false;
                u0[i] = if p == 0.0 { tiny } else { p };
                u1[i] = q;
                u2[i] = r;
                let m = sub / u0[i];
                mult[i] = m;
                p = dnext - m * q;
                q = enext - m * r;
            }
            r = 0.0;
        }
        u0[n - 1] = if p == 0.0 { tiny } else { p };
        TriLu { u0, u1, u2, mult, swap }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n - 1 {
            if self.swap[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.mult[i] * y[i];
        }
        let mut x = vec![0.0; n];
        x[n - 1] = y[n - 1] / self.u0[n - 1];
        if n >= 2 {
            x[n - 2] = (y[n - 2] - self.u1[n - 2] * x[n - 1]) / self.u0[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (y[i] - self.u1[i] * x[i + 1] - self.u2[i] * x[i + 2]) / self.u0[i];
        }
        x
    }
}
