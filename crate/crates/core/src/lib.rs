//! Forward and inverse spectral computations for Schrödinger operators with
//! third-type (Robin) boundary conditions on interval and rectangle domains.
//!
//! The forward side discretizes the quadratic form
//!
//! ```text
//! Q^ω(u) = ∫_Ω (|∇u|² + q|u|²) dV  +  ∫_∂Ω ω|u|² dS
//! ```
//!
//! on a uniform tensor grid and solves the resulting symmetric generalized
//! eigenproblem. The inverse side sees the operator only through a
//! [`SpectralOracle`](inversion::SpectralOracle) — the map from an impedance
//! ω on the boundary to the first K eigenvalues — together with a boundary
//! patch Σ, and reconstructs the eigenvalue list and the eigenfunction traces
//! on Σ up to one global sign per eigenfunction.

pub mod analytic;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod inversion;
pub mod linalg;
pub mod perturbation;
pub mod spectral;

pub use error::{CoreError, Result};
pub use fields::{BoundaryField, BumpBasis, BumpShape, ScalarField};
pub use geometry::{BoundaryMesh, DomainSpec, Mesh, SigmaPatch};
pub use inversion::{BoundarySpectralData, SpectralOracle, TraceMagnitude};
pub use perturbation::{GateauxTable, ImpedancePath};
pub use spectral::{Cluster, EigenSystem, RobinOperator, SolveParams};
