//! Eigensolver routing and multiplicity clustering.
//!
//! The generalized problem (A+B)φ = λMφ with diagonal positive M is reduced
//! to standard form Ã = M^{-1/2}(A+B)M^{-1/2}. Tridiagonal operators (1-D
//! grids) go through implicit-shift QL plus inverse iteration at any size;
//! other operators are reduced densely up to `dense_threshold` and handed
//! to shift-invert Lanczos above it.

use crate::error::{CoreError, Result};
use crate::linalg::{
    self, lowest_eigenpairs, ql_eigenvalues, tridiag_eigenvectors, DenseTridiagonalization,
    LanczosParams, SymDiags,
};
use crate::spectral::{EigenSystem, RobinOperator};
use serde::{Deserialize, Serialize};

/// Default relative gap tolerance: eigenvalues closer than
/// 1e-7·(1 + |λ|) are treated as one cluster.
pub const DEFAULT_GAP_TOL_REL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct SolveParams {
    /// Dense reduction below this dimension, shift-invert Lanczos above.
    pub dense_threshold: usize,
    /// Residual certificate: require ‖(A+B)φ−λMφ‖/‖Mφ‖ ≤ tol·scale(Ã).
    pub residual_tol: f64,
    pub lanczos: LanczosParams,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            dense_threshold: 4000,
            residual_tol: 1e-9,
            lanczos: LanczosParams::default(),
        }
    }
}

/// Solve the generalized symmetric eigenproblem for the `k` lowest pairs.
pub fn solve_eigen(op: &RobinOperator, k: usize, params: &SolveParams) -> Result<EigenSystem> {
    let n = op.dim;
    if k == 0 || k > n {
        return Err(CoreError::Contract(format!(
            "requested {k} eigenpairs of a dimension-{n} operator"
        )));
    }
    // standard form: Ã = M^{-1/2}(A+B)M^{-1/2}
    let inv_sqrt_m: Vec<f64> = op.mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
    let mut scaled = op.stiffness.clone();
    for i in 0..n {
        scaled.bands[0][i] += op.boundary_diag[i];
    }
    scaled.scale_symmetric(&inv_sqrt_m);

    let (lo, hi) = scaled.gershgorin_bounds();
    let scale = lo.abs().max(hi.abs()).max(1.0);

    let (values, std_vectors) = if scaled.offsets == [0, 1] {
        tridiagonal_path(&scaled, k, scale, params)?
    } else if n <= params.dense_threshold {
        dense_path(&scaled, k, scale, params)?
    } else {
        let mut lanczos = params.lanczos.clone();
        lanczos.residual_tol = lanczos.residual_tol.min(params.residual_tol);
        lowest_eigenpairs(&scaled, k, &lanczos)?
    };

    // tighten orthonormality, then map back: φ = M^{-1/2} ψ
    let mut std_vectors = std_vectors;
    for i in 0..std_vectors.len() {
        let (head, tail) = std_vectors.split_at_mut(i);
        let v = &mut tail[0];
        for w in head.iter() {
            let c = linalg::dot(v, w);
            linalg::axpy(-c, w, v);
        }
        let nrm = linalg::norm2(v);
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
    let mut vectors: Vec<Vec<f64>> = std_vectors
        .into_iter()
        .map(|psi| {
            psi.iter()
                .zip(&inv_sqrt_m)
                .map(|(p, s)| p * s)
                .collect::<Vec<f64>>()
        })
        .collect();
    // canonical sign: the entry of largest magnitude is positive
    for v in vectors.iter_mut() {
        let mut best = 0usize;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[best].abs() {
                best = i;
            }
        }
        if v[best] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }

    let residual_tol = params.residual_tol * scale;
    let mut residuals = Vec::with_capacity(k);
    let mut worst = 0.0f64;
    let mut y = vec![0.0; n];
    for (lambda, phi) in values.iter().zip(&vectors) {
        op.apply(phi, &mut y);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let m_phi = op.mass[i] * phi[i];
            let r = y[i] - lambda * m_phi;
            num += r * r;
            den += m_phi * m_phi;
        }
        let r = num.sqrt() / den.sqrt();
        worst = worst.max(r);
        residuals.push(r);
    }
    if worst > residual_tol {
        return Err(CoreError::Solver {
            message: format!("residual certificate failed: {worst:.3e} > {residual_tol:.3e}"),
            worst_residual: worst,
        });
    }
    Ok(EigenSystem {
        values,
        vectors,
        residuals,
        residual_tol,
        k,
    })
}

fn tridiagonal_path(
    scaled: &SymDiags,
    k: usize,
    scale: f64,
    params: &SolveParams,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let diag = &scaled.bands[0];
    let off = &scaled.bands[1];
    let all = ql_eigenvalues(diag, off)?;
    let selected = all[..k].to_vec();
    let vectors = tridiag_eigenvectors(diag, off, &selected, 1e-8 * scale, params.lanczos.seed);
    Ok((selected, vectors))
}

fn dense_path(
    scaled: &SymDiags,
    k: usize,
    scale: f64,
    params: &SolveParams,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = scaled.n;
    let dense = scaled.to_dense();
    let tri = DenseTridiagonalization::new(dense, n);
    let all = ql_eigenvalues(&tri.diag, &tri.off)?;
    let selected = all[..k].to_vec();
    let tvecs =
        tridiag_eigenvectors(&tri.diag, &tri.off, &selected, 1e-8 * scale, params.lanczos.seed);
    let vectors = tvecs.iter().map(|y| tri.back_transform(y)).collect();
    Ok((selected, vectors))
}

/// Contiguous run of eigenvalues treated as one spectral cluster.
/// Indices are 0-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub end: usize,
    /// gap to the previous cluster (∞ for the first)
    pub gap_below: f64,
    /// gap to the next cluster (∞ for the last)
    pub gap_above: f64,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start && index <= self.end
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Partition ascending eigenvalues into clusters: adjacent values merge when
/// their gap is below `gap_tol·(1 + |λ|)`, and merging is transitive.
pub fn cluster_eigenvalues(values: &[f64], gap_tol: f64) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    if values.is_empty() {
        return clusters;
    }
    let merge = |a: f64, b: f64| (b - a).abs() < gap_tol * (1.0 + 0.5 * (a.abs() + b.abs()));
    let mut start = 0usize;
    for i in 1..=values.len() {
        let split = i == values.len() || !merge(values[i - 1], values[i]);
        if split {
            let gap_below = if start == 0 {
                f64::INFINITY
            } else {
                values[start] - values[start - 1]
            };
            let gap_above = if i == values.len() {
                f64::INFINITY
            } else {
                values[i] - values[i - 1]
            };
            clusters.push(Cluster {
                start,
                end: i - 1,
                gap_below,
                gap_above,
            });
            start = i;
        }
    }
    clusters
}
