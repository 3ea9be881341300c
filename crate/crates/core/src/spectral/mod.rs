//! The discrete Robin Schrödinger operator and its spectral machinery.
//!
//! Assembly follows the quadratic form: stiffness from the tensor-trapezoid
//! Dirichlet energy, potential and mass lumped with the volume weights, and
//! the impedance entering as a diagonal boundary term with arc weights.
//! The Robin condition uses the interior normal, (∂_ν + ω)u|_∂Ω = 0, so the
//! boundary term carries a minus sign:
//!
//! ```text
//! Q^ω(u) = ∫ (|∇u|² + q|u|²) dV − ∫_∂Ω ω|u|² dS,
//! ```
//!
//! which is what makes dλ_k(ω̃) = −∫|φ_k|²ω̃ dS and λ₁ ≈ −h for a small
//! positive endpoint impedance. A conformally Euclidean metric g = c·δ on a
//! 2-D domain keeps the Dirichlet energy flat and turns the problem into a
//! generalized one:
//!
//! ```text
//! (A + Q_{c·q} + B_ω) φ = λ M_c φ,     M_c = diag(c·w_V),
//! ```
//!
//! with the boundary weights carrying √c. On an interval the metric factor
//! is trivial and M = diag(w_V).

mod projector;
mod solve;

pub use projector::{riesz_projector, track_branch, Disk, RieszProjector, TrackedBranch};
pub use solve::{cluster_eigenvalues, solve_eigen, Cluster, SolveParams, DEFAULT_GAP_TOL_REL};

use crate::error::{CoreError, Result};
use crate::fields::{BoundaryField, ScalarField};
use crate::geometry::{BoundaryMesh, GridKind, Mesh};
use crate::linalg::SymDiags;

/// Assembled operator of the generalized eigenproblem
/// (stiffness + potential + boundary) φ = λ·M φ.
#[derive(Debug, Clone)]
pub struct RobinOperator {
    /// Dirichlet energy plus (metric-weighted) potential, by diagonals.
    pub stiffness: SymDiags,
    /// Diagonal boundary form −ω·√c·w_S, indexed by mesh node (zero off
    /// ∂Ω); the minus sign is the interior-normal Robin convention.
    pub boundary_diag: Vec<f64>,
    /// Diagonal metric mass, c·w_V (w_V on an interval).
    pub mass: Vec<f64>,
    /// Metric arc weights √c·w_S per boundary position; these are the dS
    /// quadrature weights all boundary integrals of eigenfunctions use.
    pub boundary_measure: Vec<f64>,
    pub dim: usize,
}

impl RobinOperator {
    /// y = (A + B_ω) x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.stiffness.matvec(x, y);
        for i in 0..self.dim {
            if self.boundary_diag[i] != 0.0 {
                y[i] += self.boundary_diag[i] * x[i];
            }
        }
    }

    /// Value of the discrete quadratic form Q^ω(u) = uᵀ(A + B_ω)u.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let mut y = vec![0.0; self.dim];
        self.apply(u, &mut y);
        crate::linalg::dot(u, &y)
    }

    /// M-weighted inner product.
    pub fn m_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.mass)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    pub fn m_norm(&self, x: &[f64]) -> f64 {
        self.m_dot(x, x).sqrt()
    }
}

/// Forward problem bundle: domain, coefficients, and the impedance-free
/// part of the assembly, so sweeps over ω only rewrite the boundary term.
#[derive(Debug, Clone)]
pub struct ForwardProblem {
    pub mesh: Mesh,
    pub bmesh: BoundaryMesh,
    pub q: ScalarField,
    pub c: ScalarField,
    base_stiffness: SymDiags,
    mass: Vec<f64>,
    boundary_measure: Vec<f64>,
}

impl ForwardProblem {
    pub fn new(mesh: Mesh, bmesh: BoundaryMesh, q: ScalarField, c: ScalarField) -> Result<Self> {
        let n = mesh.num_nodes();
        if q.values.len() != n || c.values.len() != n {
            return Err(CoreError::Contract(
                "field lengths do not match the mesh".into(),
            ));
        }
        if c.values.iter().any(|&v| !(v > 0.0)) {
            return Err(CoreError::Config("conformal factor must be positive".into()));
        }
        if mesh.is_interval() && c.values.iter().any(|&v| v != 1.0) {
            return Err(CoreError::Config(
                "conformal factor must be identically 1 on an interval domain".into(),
            ));
        }

        let offsets = match mesh.kind {
            GridKind::Interval { .. } => vec![0, 1],
            GridKind::Rectangle { nx, .. } => vec![0, 1, nx],
        };
        let mut stiffness = SymDiags::zeros(n, offsets);
        for &(a, b, coef) in &mesh.edges {
            let off = b - a;
            let band_idx = stiffness
                .offsets
                .iter()
                .position(|&d| d == off)
                .expect("edge offset outside the stencil");
            stiffness.bands[0][a] += coef;
            stiffness.bands[0][b] += coef;
            stiffness.bands[band_idx][a] -= coef;
        }
        let metric = |i: usize| if mesh.is_interval() { 1.0 } else { c.values[i] };
        for i in 0..n {
            stiffness.bands[0][i] += q.values[i] * metric(i) * mesh.weights[i];
        }
        let mass: Vec<f64> = (0..n).map(|i| metric(i) * mesh.weights[i]).collect();
        let boundary_measure: Vec<f64> = (0..bmesh.len())
            .map(|p| {
                let node = bmesh.node_indices[p];
                bmesh.weights[p] * metric(node).sqrt()
            })
            .collect();
        Ok(ForwardProblem {
            mesh,
            bmesh,
            q,
            c,
            base_stiffness: stiffness,
            mass,
            boundary_measure,
        })
    }

    /// Assemble the operator for a given impedance.
    pub fn operator(&self, omega: &BoundaryField) -> Result<RobinOperator> {
        if omega.len() != self.bmesh.len() {
            return Err(CoreError::Contract(
                "impedance length does not match the boundary".into(),
            ));
        }
        let n = self.mesh.num_nodes();
        let mut boundary_diag = vec![0.0; n];
        for p in 0..self.bmesh.len() {
            let node = self.bmesh.node_indices[p];
            boundary_diag[node] -= omega.values[p] * self.boundary_measure[p];
        }
        Ok(RobinOperator {
            stiffness: self.base_stiffness.clone(),
            boundary_diag,
            mass: self.mass.clone(),
            boundary_measure: self.boundary_measure.clone(),
            dim: n,
        })
    }

    /// Assemble and solve in one step.
    pub fn solve(
        &self,
        omega: &BoundaryField,
        k: usize,
        params: &SolveParams,
    ) -> Result<EigenSystem> {
        solve_eigen(&self.operator(omega)?, k, params)
    }
}

/// Spec-level assembly entry point.
pub fn assemble(
    mesh: &Mesh,
    bmesh: &BoundaryMesh,
    q: &ScalarField,
    c: &ScalarField,
    omega: &BoundaryField,
) -> Result<RobinOperator> {
    let problem = ForwardProblem::new(mesh.clone(), bmesh.clone(), q.clone(), c.clone())?;
    problem.operator(omega)
}

/// Ascending eigenvalues with M-orthonormal eigenvectors and per-pair
/// residual certificates ‖(A+B)φ − λMφ‖ / ‖Mφ‖.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// absolute residual threshold the certificates were checked against
    pub residual_tol: f64,
    pub k: usize,
}

impl EigenSystem {
    /// Restriction of eigenvector `k` (0-based) to the boundary positions,
    /// in the M-normalized scaling.
    pub fn boundary_trace(&self, k: usize, bmesh: &BoundaryMesh) -> BoundaryField {
        assert!(k < self.k, "eigenpair index {k} out of range");
        let v = &self.vectors[k];
        BoundaryField {
            values: bmesh.node_indices.iter().map(|&i| v[i]).collect(),
        }
    }
}

/// Free-function form of [`EigenSystem::boundary_trace`].
pub fn boundary_trace(eigsys: &EigenSystem, k: usize, bmesh: &BoundaryMesh) -> BoundaryField {
    eigsys.boundary_trace(k, bmesh)
}
