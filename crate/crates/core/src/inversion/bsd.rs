//! End-to-end boundary spectral data: eigenvalues with signed eigenfunction
//! traces on Σ, assembled from the oracle alone. Simple eigenvalues go
//! through the derivative route; degenerate clusters through the splitting
//! limit. The ± per eigenfunction is fundamental, so every entry carries
//! `sign_ambiguous = true` and all comparisons quotient it out.

use crate::error::{CoreError, Result};
use crate::fields::rng::SplitMix64;
use crate::fields::{bump_basis, random_bump, BoundaryField, BumpShape};
use crate::geometry::{BoundaryMesh, SigmaPatch};
use crate::inversion::{
    fit_magnitude, recover_cluster_traces, recover_sign, SigmaGeometry, SpectralOracle,
    TraceMagnitude,
};
use crate::perturbation::{cluster_split_basis, gateaux_table, TableEntry};
use crate::spectral::{cluster_eigenvalues, Cluster, ForwardProblem, SolveParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsdParams {
    /// bump directions J for the moment system
    pub bump_count: usize,
    pub bump_shape: BumpShape,
    /// base FD step (bump directions have unit sup-norm)
    pub fd_step: f64,
    /// Tikhonov multiplier; effective penalty is reg·‖D‖
    pub reg: f64,
    /// relative gap tolerance for clustering and simplicity checks
    pub gap_tol: f64,
    pub zero_tol: f64,
    pub fit_window: usize,
    /// cluster splitting schedule s_n = s0·2^{−n}, n < schedule_len
    pub cluster_s0: f64,
    pub cluster_schedule_len: usize,
    /// Cauchy stop for the cluster limit (relative L²(Σ))
    pub cluster_tol: f64,
    pub eta_retries: usize,
    pub seed: u64,
    /// extra eigenvalues queried beyond K for cluster boundaries
    pub extra_eigen: usize,
}

impl Default for BsdParams {
    fn default() -> Self {
        BsdParams {
            bump_count: 40,
            bump_shape: BumpShape::Hat,
            fd_step: 1e-4,
            reg: 1e-8,
            gap_tol: 1e-7,
            zero_tol: 1e-6,
            fit_window: 12,
            cluster_s0: 0.05,
            cluster_schedule_len: 8,
            cluster_tol: 5e-3,
            eta_retries: 3,
            seed: 0,
            extra_eigen: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    SimpleBranch,
    ClusterLimit {
        /// 0-based index range of the cluster
        members: (usize, usize),
        /// the splitting direction that was actually used
        eta: Vec<f64>,
        steps_used: usize,
        s_final: f64,
        history: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    Failed { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsdEntry {
    /// 0-based eigenvalue index
    pub index: usize,
    pub lambda: f64,
    /// signed trace on the patch nodes (None when recovery failed)
    pub trace: Option<Vec<f64>>,
    /// recovered magnitude diagnostics
    pub magnitude: Option<TraceMagnitude>,
    /// the global ± of this trace is irreducible, never a numerical artifact
    pub sign_ambiguous: bool,
    pub provenance: Provenance,
    pub status: EntryStatus,
}

/// The pipeline's output: {λ_k, ±φ_k|_Σ} with per-entry provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundarySpectralData {
    pub sigma: SigmaPatch,
    /// patch arc coordinates
    pub arcs: Vec<f64>,
    /// patch quadrature weights (metric measure)
    pub weights: Vec<f64>,
    pub entries: Vec<BsdEntry>,
}

impl BoundarySpectralData {
    pub fn entry(&self, index: usize) -> Option<&BsdEntry> {
        self.entries.iter().find(|e| e.index == index)
    }
}

/// Run the full recovery for the first `k_count` eigenpairs.
pub fn assemble_bsd(
    oracle: &dyn SpectralOracle,
    bmesh: &BoundaryMesh,
    sigma: &SigmaPatch,
    boundary_measure: &[f64],
    omega0: &BoundaryField,
    k_count: usize,
    params: &BsdParams,
) -> Result<BoundarySpectralData> {
    let geom = SigmaGeometry::new(bmesh, sigma, boundary_measure);
    if k_count == 0 {
        return Ok(BoundarySpectralData {
            sigma: *sigma,
            arcs: geom.arcs,
            weights: geom.weights,
            entries: Vec::new(),
        });
    }

    // query enough eigenvalues that no cluster is cut at the top
    let mut count = k_count + params.extra_eigen.max(1);
    let (base_vals, clusters) = loop {
        let vals = oracle.eigenvalues(omega0, count)?;
        let clusters = cluster_eigenvalues(&vals, params.gap_tol);
        let cut = clusters
            .iter()
            .filter(|c| c.start < k_count)
            .any(|c| c.end + 1 >= count);
        if !cut {
            break (vals, clusters);
        }
        count += 4;
        if count > k_count + 16 {
            return Err(CoreError::Solver {
                message: format!(
                    "cluster at index {k_count} extends beyond {count} computed eigenvalues"
                ),
                worst_residual: f64::NAN,
            });
        }
    };

    let bumps = bump_basis(bmesh, sigma, params.bump_count, params.bump_shape)?;

    let mut entries: Vec<BsdEntry> = Vec::new();

    // batched derivative table for all simple indices below k_count
    let simple_rows: Vec<usize> = clusters
        .iter()
        .filter(|c| c.multiplicity() == 1 && c.start < k_count)
        .map(|c| c.start)
        .collect();
    if !simple_rows.is_empty() {
        let table = gateaux_table(
            oracle,
            omega0,
            &bumps,
            &simple_rows,
            params.fd_step,
            true,
            params.gap_tol,
        )?;
        for (r, &k) in simple_rows.iter().enumerate() {
            let moments: Result<Vec<f64>> = table.entries[r]
                .iter()
                .map(|e| match e {
                    TableEntry::Ok { estimate, .. } => Ok(*estimate),
                    TableEntry::Degenerate { detail } => Err(CoreError::Multiplicity {
                        k: k + 1,
                        detail: detail.clone(),
                    }),
                })
                .collect();
            let entry = match moments.and_then(|m| fit_magnitude(&m, &bumps, &geom, params.reg)) {
                Ok(mag) => finish_entry(k, base_vals[k], mag, Provenance::SimpleBranch, &geom, params),
                Err(e) => failed_entry(k, base_vals[k], Provenance::SimpleBranch, e),
            };
            entries.push(entry);
        }
    }

    // degenerate clusters via the splitting limit
    for cluster in clusters.iter().filter(|c| c.multiplicity() > 1 && c.start < k_count) {
        let schedule: Vec<f64> = (0..params.cluster_schedule_len)
            .map(|n| params.cluster_s0 * 2f64.powi(-(n as i32)))
            .collect();
        let mut recovery = None;
        let mut last_err: Option<CoreError> = None;
        let mut eta_used = None;
        for retry in 0..params.eta_retries.max(1) {
            let eta_seed =
                SplitMix64::stream(params.seed, &format!("eta/{}/{retry}", cluster.start))
                    .next_u64();
            let eta = random_bump(bmesh, sigma, eta_seed, 1.0)?;
            match recover_cluster_traces(
                oracle,
                omega0,
                cluster,
                &eta,
                &schedule,
                &bumps,
                &geom,
                params.fd_step,
                params.reg,
                params.cluster_tol,
                params.gap_tol,
            ) {
                Ok(rec) => {
                    recovery = Some(rec);
                    eta_used = Some(eta);
                    break;
                }
                Err(e @ CoreError::SplitFailure { .. }) => {
                    last_err = Some(e);
                    continue;
                }
                Err(other) => {
                    last_err = Some(other);
                    break;
                }
            }
        }
        match (recovery, eta_used) {
            (Some(rec), Some(eta)) => {
                let provenance = |_: usize| Provenance::ClusterLimit {
                    members: (cluster.start, cluster.end),
                    eta: eta.values.clone(),
                    steps_used: rec.steps_used,
                    s_final: rec.s_final,
                    history: rec.history.clone(),
                };
                for (offset, mag) in rec.magnitudes.iter().enumerate() {
                    let k = cluster.start + offset;
                    if k >= k_count {
                        continue;
                    }
                    entries.push(finish_entry(
                        k,
                        base_vals[k],
                        mag.clone(),
                        provenance(k),
                        &geom,
                        params,
                    ));
                }
            }
            _ => {
                let reason = last_err
                    .map(|e| e.to_string())
                    .unwrap_or_else(|| "cluster recovery failed".into());
                for k in cluster.indices().filter(|&k| k < k_count) {
                    entries.push(BsdEntry {
                        index: k,
                        lambda: base_vals[k],
                        trace: None,
                        magnitude: None,
                        sign_ambiguous: true,
                        provenance: Provenance::ClusterLimit {
                            members: (cluster.start, cluster.end),
                            eta: Vec::new(),
                            steps_used: 0,
                            s_final: 0.0,
                            history: Vec::new(),
                        },
                        status: EntryStatus::Failed {
                            reason: reason.clone(),
                        },
                    });
                }
            }
        }
    }

    entries.sort_by_key(|e| e.index);
    Ok(BoundarySpectralData {
        sigma: *sigma,
        arcs: geom.arcs,
        weights: geom.weights,
        entries,
    })
}

fn finish_entry(
    k: usize,
    lambda: f64,
    magnitude: TraceMagnitude,
    provenance: Provenance,
    geom: &SigmaGeometry,
    params: &BsdParams,
) -> BsdEntry {
    if magnitude.resolution_failure {
        return BsdEntry {
            index: k,
            lambda,
            trace: None,
            magnitude: Some(magnitude),
            sign_ambiguous: true,
            provenance,
            status: EntryStatus::Failed {
                reason: "moment data below resolution".into(),
            },
        };
    }
    let xi: Vec<f64> = magnitude.rho.iter().map(|&r| r.sqrt()).collect();
    if xi.len() < 4 {
        // a patch of isolated points (the 1-D boundary) has no arc to
        // continue along; the data reduce to magnitudes with the
        // anchor-positive convention
        return BsdEntry {
            index: k,
            lambda,
            trace: Some(xi),
            magnitude: Some(magnitude),
            sign_ambiguous: true,
            provenance,
            status: EntryStatus::Ok,
        };
    }
    match recover_sign(&xi, &geom.arcs, params.zero_tol, params.fit_window) {
        Ok(signed) => BsdEntry {
            index: k,
            lambda,
            trace: Some(signed.values),
            magnitude: Some(magnitude),
            sign_ambiguous: true,
            provenance,
            status: EntryStatus::Ok,
        },
        Err(e) => BsdEntry {
            index: k,
            lambda,
            trace: None,
            magnitude: Some(magnitude),
            sign_ambiguous: true,
            provenance,
            status: EntryStatus::Failed {
                reason: e.to_string(),
            },
        },
    }
}

fn failed_entry(k: usize, lambda: f64, provenance: Provenance, err: CoreError) -> BsdEntry {
    BsdEntry {
        index: k,
        lambda,
        trace: None,
        magnitude: None,
        sign_ambiguous: true,
        provenance,
        status: EntryStatus::Failed {
            reason: err.to_string(),
        },
    }
}

/// Per-eigenpair comparison of two data sets over the same Σ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsdComparison {
    pub per_k: Vec<KComparison>,
    pub max_trace_err: f64,
    pub max_eig_abs_err: f64,
    pub max_eig_rel_err: f64,
    pub missing: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KComparison {
    /// 1-based eigenvalue index for presentation
    pub k: usize,
    pub eig_abs_err: f64,
    pub eig_rel_err: f64,
    /// min over ±1 of ‖σψ − φ‖ / ‖φ‖ in the weighted L²(Σ) norm
    pub trace_rel_err: Option<f64>,
}

pub fn compare_bsd(
    recovered: &BoundarySpectralData,
    truth: &BoundarySpectralData,
) -> Result<BsdComparison> {
    if recovered.sigma != truth.sigma || recovered.arcs.len() != truth.arcs.len() {
        return Err(CoreError::Contract("Σ mismatch between data sets".into()));
    }
    if recovered.entries.len() != truth.entries.len() {
        return Err(CoreError::Contract(format!(
            "entry count mismatch: {} vs {}",
            recovered.entries.len(),
            truth.entries.len()
        )));
    }
    let wnorm = |f: &[f64]| -> f64 {
        f.iter()
            .zip(&truth.weights)
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt()
    };
    let mut per_k = Vec::new();
    let mut max_trace: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut missing = 0usize;
    for (r, t) in recovered.entries.iter().zip(&truth.entries) {
        if r.index != t.index {
            return Err(CoreError::Contract("entry index mismatch".into()));
        }
        let abs = (r.lambda - t.lambda).abs();
        let rel = abs / t.lambda.abs().max(1e-300);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
        let trace_err = match (&r.trace, &t.trace) {
            (Some(a), Some(b)) => {
                let plus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let minus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let err = wnorm(&plus).min(wnorm(&minus)) / wnorm(b).max(1e-300);
                max_trace = max_trace.max(err);
                Some(err)
            }
            _ => {
                missing += 1;
                None
            }
        };
        per_k.push(KComparison {
            k: r.index + 1,
            eig_abs_err: abs,
            eig_rel_err: rel,
            trace_rel_err: trace_err,
        });
    }
    Ok(BsdComparison {
        per_k,
        max_trace_err: max_trace,
        max_eig_abs_err: max_abs,
        max_eig_rel_err: max_rel,
        missing,
    })
}

/// Forward-solver ground truth shaped like a recovered data set: simple
/// entries take the direct boundary trace; cluster entries take the
/// perturbation-adapted basis for the η recorded in the recovery's
/// provenance.
pub fn ground_truth_bsd(
    problem: &ForwardProblem,
    omega0: &BoundaryField,
    recovered: &BoundarySpectralData,
    solve_params: &SolveParams,
) -> Result<BoundarySpectralData> {
    let needed = recovered
        .entries
        .iter()
        .map(|e| match &e.provenance {
            Provenance::SimpleBranch => e.index,
            Provenance::ClusterLimit { members, .. } => members.1,
        })
        .max()
        .map_or(1, |m| m + 2);
    let sys = problem.solve(omega0, needed, solve_params)?;
    let op = problem.operator(omega0)?;
    let sigma = recovered.sigma;

    let mut entries = Vec::with_capacity(recovered.entries.len());
    for e in &recovered.entries {
        let trace_full = match &e.provenance {
            Provenance::SimpleBranch => sys.boundary_trace(e.index, &problem.bmesh).values,
            Provenance::ClusterLimit { members, eta, .. } => {
                if eta.is_empty() {
                    // recovery failed before an η was fixed; fall back to
                    // the raw eigenvector of this index
                    sys.boundary_trace(e.index, &problem.bmesh).values
                } else {
                    let cluster = Cluster {
                        start: members.0,
                        end: members.1,
                        gap_below: f64::INFINITY,
                        gap_above: f64::INFINITY,
                    };
                    let eta_field = BoundaryField { values: eta.clone() };
                    let (_, basis) = cluster_split_basis(
                        &sys,
                        &cluster,
                        &eta_field,
                        &op.boundary_measure,
                        &problem.bmesh,
                    );
                    let member = &basis[e.index - members.0];
                    problem
                        .bmesh
                        .node_indices
                        .iter()
                        .map(|&i| member[i])
                        .collect()
                }
            }
        };
        let trace: Vec<f64> = sigma.positions().map(|p| trace_full[p]).collect();
        entries.push(BsdEntry {
            index: e.index,
            lambda: sys.values[e.index],
            trace: Some(trace),
            magnitude: None,
            sign_ambiguous: true,
            provenance: e.provenance.clone(),
            status: EntryStatus::Ok,
        });
    }
    Ok(BoundarySpectralData {
        sigma,
        arcs: recovered.arcs.clone(),
        weights: recovered.weights.clone(),
        entries,
    })
}

/// Residual of projecting `candidate` onto the span of `basis` in the
/// weighted inner product — the orthogonality shadow of the cluster limit.
pub fn trace_span_residual(candidate: &[f64], basis: &[Vec<f64>], weights: &[f64]) -> f64 {
    let wdot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    };
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for b in basis {
        let mut v = b.to_vec();
        for e in &ortho {
            let c = wdot(&v, e);
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi -= c * ei;
            }
        }
        let nrm = wdot(&v, &v).sqrt();
        if nrm > 1e-14 {
            for x in v.iter_mut() {
                *x /= nrm;
            }
            ortho.push(v);
        }
    }
    let mut resid = candidate.to_vec();
    for e in &ortho {
        let c = wdot(&resid, e);
        for (ri, ei) in resid.iter_mut().zip(e) {
            *ri -= c * ei;
        }
    }
    wdot(&resid, &resid).sqrt() / wdot(candidate, candidate).sqrt().max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::geometry::{build_mesh, make_sigma, DomainSpec};
    use crate::inversion::{ForwardOracle, RecordingOracle, ReplayOracle};

    fn interval_oracle(n: usize) -> (ForwardOracle, BoundaryField, SigmaPatch) {
        let (mesh, bmesh) = build_mesh(&DomainSpec::Interval { length: 1.0, n }).unwrap();
        let q = ScalarField::constant(&mesh, 0.0);
        let c = ScalarField::constant(&mesh, 1.0);
        let p = ForwardProblem::new(mesh, bmesh.clone(), q, c).unwrap();
        let w = BoundaryField::zeros(&bmesh);
        let sigma = make_sigma(&bmesh, 0.0, 2.0).unwrap();
        (ForwardOracle::new(p, SolveParams::default()), w, sigma)
    }

    #[test]
    fn interval_bsd_reproduces_one_dimensional_data() {
        let (oracle, w, sigma) = interval_oracle(2001);
        let problem = oracle.problem().clone();
        let op = problem.operator(&w).unwrap();
        let params = BsdParams {
            bump_count: 2,
            ..Default::default()
        };
        let bsd = assemble_bsd(
            &oracle,
            &problem.bmesh,
            &sigma,
            &op.boundary_measure,
            &w,
            6,
            &params,
        )
        .unwrap();
        assert_eq!(bsd.entries.len(), 6);
        // λ_k = ((k−1)π)² and |φ_k(0)| ∈ {1, √2, √2, …}
        for (i, entry) in bsd.entries.iter().enumerate() {
            let exact = crate::analytic::neumann_interval_eigenvalue(i, 1.0);
            assert!((entry.lambda - exact).abs() <= 1e-3 * exact.max(1.0));
            assert!(matches!(entry.status, EntryStatus::Ok), "entry {i}: {:?}", entry.status);
            assert!(entry.sign_ambiguous);
            let trace = entry.trace.as_ref().unwrap();
            let expect = if i == 0 { 1.0 } else { 2f64.sqrt() };
            assert!(
                (trace[0].abs() - expect).abs() < 5e-3,
                "k={i}: |φ(0)| = {} vs {expect}",
                trace[0].abs()
            );
        }
    }

    #[test]
    fn empty_request_gives_empty_data() {
        let (oracle, w, sigma) = interval_oracle(101);
        let problem = oracle.problem().clone();
        let op = problem.operator(&w).unwrap();
        let bsd = assemble_bsd(
            &oracle,
            &problem.bmesh,
            &sigma,
            &op.boundary_measure,
            &w,
            0,
            &BsdParams::default(),
        )
        .unwrap();
        assert!(bsd.entries.is_empty());
    }

    #[test]
    fn compare_bsd_trivial_cases() {
        let (oracle, w, sigma) = interval_oracle(401);
        let problem = oracle.problem().clone();
        let op = problem.operator(&w).unwrap();
        let params = BsdParams {
            bump_count: 2,
            ..Default::default()
        };
        let bsd = assemble_bsd(
            &oracle,
            &problem.bmesh,
            &sigma,
            &op.boundary_measure,
            &w,
            3,
            &params,
        )
        .unwrap();
        let same = compare_bsd(&bsd, &bsd).unwrap();
        assert_eq!(same.max_trace_err, 0.0);
        assert_eq!(same.max_eig_abs_err, 0.0);

        // global sign flip is quotiented out
        let mut flipped = bsd.clone();
        for e in flipped.entries.iter_mut() {
            if let Some(t) = e.trace.as_mut() {
                for v in t.iter_mut() {
                    *v = -*v;
                }
            }
        }
        let cmp = compare_bsd(&flipped, &bsd).unwrap();
        assert_eq!(cmp.max_trace_err, 0.0);

        // small perturbation obeys the triangle bound
        let mut shifted = bsd.clone();
        let delta = 1e-3;
        if let Some(t) = shifted.entries[0].trace.as_mut() {
            for v in t.iter_mut() {
                *v += delta;
            }
        }
        let cmp = compare_bsd(&shifted, &bsd).unwrap();
        let norm_delta = {
            let d = vec![delta; bsd.arcs.len()];
            d.iter()
                .zip(&bsd.weights)
                .map(|(v, w)| v * v * w)
                .sum::<f64>()
                .sqrt()
        };
        let base = bsd.entries[0].trace.as_ref().unwrap();
        let norm_base = base
            .iter()
            .zip(&bsd.weights)
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt();
        assert!(cmp.per_k[0].trace_rel_err.unwrap() <= norm_delta / norm_base + 1e-12);
    }

    #[test]
    fn pipeline_runs_on_replay_alone() {
        // data-model firewall: record a run, then replay it with no
        // forward solver in sight and get identical output
        let (oracle, w, sigma) = interval_oracle(801);
        let problem = oracle.problem().clone();
        let op = problem.operator(&w).unwrap();
        let params = BsdParams {
            bump_count: 2,
            ..Default::default()
        };
        let recorder = RecordingOracle::new(&oracle);
        let bsd1 = assemble_bsd(
            &recorder,
            &problem.bmesh,
            &sigma,
            &op.boundary_measure,
            &w,
            4,
            &params,
        )
        .unwrap();
        let replay = ReplayOracle::from_records(recorder.into_records());
        let bsd2 = assemble_bsd(
            &replay,
            &problem.bmesh,
            &sigma,
            &op.boundary_measure,
            &w,
            4,
            &params,
        )
        .unwrap();
        let j1 = serde_json::to_string(&bsd1).unwrap();
        let j2 = serde_json::to_string(&bsd2).unwrap();
        assert_eq!(j1, j2);
    }

    #[test]
    fn square_cluster_entries_match_adapted_truth() {
        // 41×41 keeps this a minutes-free unit test; the acceptance suite
        // runs the full benchmark
        let (mesh, bmesh) =
            build_mesh(&DomainSpec::Rectangle { a: 1.0, b: 1.0, nx: 41, ny: 41 }).unwrap();
        let q = ScalarField::constant(&mesh, 0.0);
        let c = ScalarField::constant(&mesh, 1.0);
        let problem = ForwardProblem::new(mesh, bmesh.clone(), q, c).unwrap();
        let w = BoundaryField::zeros(&bmesh);
        let sigma = make_sigma(&bmesh, 0.0, 1.0).unwrap();
        let solve_params = SolveParams {
            dense_threshold: 600,
            ..Default::default()
        };
        let op = problem.operator(&w).unwrap();
        let oracle = ForwardOracle::new(problem.clone(), solve_params.clone());
        let params = BsdParams {
            bump_count: 24,
            cluster_schedule_len: 6,
            cluster_tol: 2e-2,
            ..Default::default()
        };
        let bsd = assemble_bsd(
            &oracle,
            &bmesh,
            &sigma,
            &op.boundary_measure,
            &w,
            3,
            &params,
        )
        .unwrap();
        for e in &bsd.entries {
            assert!(matches!(e.status, EntryStatus::Ok), "entry {}: {:?}", e.index, e.status);
        }
        assert!(matches!(bsd.entries[1].provenance, Provenance::ClusterLimit { .. }));
        let truth = ground_truth_bsd(&problem, &w, &bsd, &solve_params).unwrap();
        let cmp = compare_bsd(&bsd, &truth).unwrap();
        assert!(cmp.max_trace_err < 0.05, "max trace err {:.4}", cmp.max_trace_err);
        assert!(cmp.max_eig_rel_err < 1e-8);

        // orthogonality shadow: recovered cluster traces lie in the span of
        // the true eigenspace traces
        let span: Vec<Vec<f64>> = [1usize, 2]
            .iter()
            .map(|&k| {
                let sys = problem.solve(&w, 4, &solve_params).unwrap();
                sigma
                    .positions()
                    .map(|p| sys.boundary_trace(k, &bmesh).values[p])
                    .collect()
            })
            .collect();
        for k in [1usize, 2] {
            let r = trace_span_residual(
                bsd.entries[k].trace.as_ref().unwrap(),
                &span,
                &bsd.weights,
            );
            assert!(r < 0.05, "span residual {r:.4} for entry {k}");
        }
    }
}
