//! The inverse side: reconstruct boundary spectral data {λ_k, ±φ_k|_Σ}
//! from the spectral oracle and the patch Σ, and compare it against
//! forward-solver ground truth.

mod bsd;
mod magnitude;
mod oracle;
mod sign;

pub use bsd::{
    assemble_bsd, compare_bsd, ground_truth_bsd, trace_span_residual, BoundarySpectralData,
    BsdComparison, BsdEntry, BsdParams, EntryStatus, KComparison, Provenance,
};
pub use magnitude::{
    fit_magnitude, recover_cluster_traces, recover_trace_magnitude, ClusterRecovery,
    SigmaGeometry, TraceMagnitude,
};
pub use oracle::{
    omega_hash, write_records, ForwardOracle, OracleRecord, RecordingOracle, ReplayOracle,
    SpectralOracle,
};
pub use sign::{recover_sign, SignedTrace, ZeroBand};
