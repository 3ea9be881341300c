//! Riesz projectors onto eigenvalue clusters and analytic branch tracking.
//!
//! For a finite symmetric operator the contour integral of the resolvent
//! reduces exactly to the spectral sum over the enclosed eigenpairs, so the
//! projector is stored as its M-orthonormal basis.

use crate::error::{CoreError, Result};
use crate::fields::BoundaryField;
use crate::spectral::{solve_eigen, EigenSystem, ForwardProblem, SolveParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: f64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, lambda: f64) -> bool {
        (lambda - self.center).abs() < self.radius
    }
}

/// Rank-r spectral projector P = Σ φᵢ (φᵢᵀ M ·) over the eigenvalues inside
/// the disk.
#[derive(Debug, Clone)]
pub struct RieszProjector {
    /// 0-based eigenpair indices inside the contour
    pub indices: Vec<usize>,
    /// the selected M-orthonormal eigenvectors
    pub vectors: Vec<Vec<f64>>,
}

impl RieszProjector {
    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    /// y = P x (needs the mass diagonal for the M-inner products).
    pub fn apply(&self, mass: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for v in &self.vectors {
            let c: f64 = v
                .iter()
                .zip(x)
                .zip(mass)
                .map(|((vi, xi), mi)| vi * xi * mi)
                .sum();
            crate::linalg::axpy(c, v, &mut y);
        }
        y
    }
}

/// Build the projector for the eigenvalues of `eigsys` inside the disk.
///
/// Errors when an eigenvalue sits on the contour (within relative 1e−6 of
/// the circle) or when the disk extends past the computed part of the
/// spectrum, which would make the rank uncertifiable.
pub fn riesz_projector(eigsys: &EigenSystem, center: f64, radius: f64) -> Result<RieszProjector> {
    if !(radius > 0.0) {
        return Err(CoreError::Contour("radius must be positive".into()));
    }
    let top = eigsys.values.last().copied().unwrap_or(f64::NEG_INFINITY);
    if center + radius >= top {
        return Err(CoreError::Contour(format!(
            "disk reaches {:.6e}, beyond the computed spectrum (λ_max = {top:.6e})",
            center + radius
        )));
    }
    let mut indices = Vec::new();
    for (i, &lambda) in eigsys.values.iter().enumerate() {
        let dist = (lambda - center).abs();
        if (dist - radius).abs() <= radius * 1e-6 {
            return Err(CoreError::Contour(format!(
                "eigenvalue {lambda:.9e} lies on the contour |λ − {center:.3e}| = {radius:.3e}"
            )));
        }
        if dist < radius {
            indices.push(i);
        }
    }
    let vectors = indices.iter().map(|&i| eigsys.vectors[i].clone()).collect();
    Ok(RieszProjector { indices, vectors })
}

/// Eigenvector branch along an impedance path, by projecting the starting
/// vector with the Riesz projector of the (fixed) disk at each grid point:
/// φ(t) = P(t)φ₀ / ‖P(t)φ₀‖_M.
#[derive(Debug, Clone)]
pub struct TrackedBranch {
    pub ts: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// reported continuity constant: max ‖φ(t_{i+1}) − φ(t_i)‖_M / Δt
    pub continuity: f64,
}

pub fn track_branch(
    problem: &ForwardProblem,
    phi0: &[f64],
    omega_at: impl Fn(f64) -> BoundaryField,
    t_grid: &[f64],
    disk: Disk,
    k_solve: usize,
    params: &SolveParams,
) -> Result<TrackedBranch> {
    if t_grid.is_empty() {
        return Err(CoreError::Contract("empty t grid".into()));
    }
    let op0 = problem.operator(&omega_at(t_grid[0]))?;
    let norm0 = op0.m_norm(phi0);
    if (norm0 - 1.0).abs() > 1e-8 {
        return Err(CoreError::Contract(format!(
            "starting vector is not M-normalized (‖φ₀‖_M = {norm0})"
        )));
    }

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let omega = omega_at(t);
        let op = problem.operator(&omega)?;
        let sys = solve_eigen(&op, k_solve, params)?;
        let proj = riesz_projector(&sys, disk.center, disk.radius)?;
        let mut w = proj.apply(&op.mass, phi0);
        let nrm = op.m_norm(&w);
        if nrm < 1e-8 {
            return Err(CoreError::BranchLoss {
                t,
                projection_norm: nrm,
            });
        }
        for x in w.iter_mut() {
            *x /= nrm;
        }
        states.push(w);
    }

    let mass = &op0.mass;
    let mut continuity = 0.0f64;
    for i in 0..t_grid.len() - 1 {
        let dt = (t_grid[i + 1] - t_grid[i]).abs().max(f64::MIN_POSITIVE);
        let diff: f64 = states[i]
            .iter()
            .zip(&states[i + 1])
            .zip(mass)
            .map(|((a, b), m)| (a - b) * (a - b) * m)
            .sum::<f64>()
            .sqrt();
        continuity = continuity.max(diff / dt);
    }
    Ok(TrackedBranch {
        ts: t_grid.to_vec(),
        states,
        continuity,
    })
}
