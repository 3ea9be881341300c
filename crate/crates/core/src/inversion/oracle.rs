//! The spectral oracle: the only channel through which the inversion side
//! may see the operator. It maps an impedance on ∂Ω to the first K
//! eigenvalues and exposes nothing else — in particular no eigenvectors.

use crate::error::{CoreError, Result};
use crate::fields::BoundaryField;
use crate::spectral::{ForwardProblem, SolveParams};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

/// Deterministic map ω ↦ (λ_1(ω), …, λ_count(ω)), ascending.
pub trait SpectralOracle: Sync {
    fn eigenvalues(&self, omega: &BoundaryField, count: usize) -> Result<Vec<f64>>;
}

pub(crate) fn omega_key(omega: &BoundaryField) -> Vec<u64> {
    omega.values.iter().map(|v| v.to_bits()).collect()
}

/// Short FNV-1a fingerprint of an impedance, for error messages and logs.
pub fn omega_hash(omega: &BoundaryField) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for bits in omega_key(omega) {
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Oracle backed by the forward solver, with a query cache keyed on the
/// exact nodal bits of ω and a certified warm path for nearby queries.
///
/// Derivative estimation floods the oracle with impedances that differ
/// from a base point only by a small boundary term. The warm path projects
/// the perturbed operator onto the base point's eigenbasis (Rayleigh-Ritz);
/// the result is accepted only when the residual certificate bounds the
/// eigenvalue error by `warm_tol`, otherwise the query falls back to a full
/// eigensolve. Everything is deterministic: the warm basis is replaced only
/// by queries outside the warm radius, which the pipelines issue
/// sequentially.
pub struct ForwardOracle {
    problem: ForwardProblem,
    params: SolveParams,
    cache: Mutex<HashMap<Vec<u64>, Vec<f64>>>,
    warm: Mutex<Option<std::sync::Arc<WarmBasis>>>,
    /// sup-norm radius around the warm base inside which warm answers are
    /// attempted
    warm_radius: f64,
    /// certified absolute eigenvalue error bound, scaled by (1 + |λ|)
    warm_tol: f64,
    full_solves: std::sync::atomic::AtomicUsize,
}

struct WarmBasis {
    base_key: Vec<u64>,
    base_omega: BoundaryField,
    /// standard-form eigenvectors ψ = M^{1/2}φ, orthonormal
    psi: Vec<Vec<f64>>,
    theta: Vec<f64>,
    /// std-form residual norms ‖Ãψ − θψ‖ of the basis pairs
    base_residuals: Vec<f64>,
    /// first eigenvalue beyond the basis (complement marker)
    tail: f64,
    inv_mass: Vec<f64>,
}

impl ForwardOracle {
    pub fn new(problem: ForwardProblem, params: SolveParams) -> Self {
        ForwardOracle {
            problem,
            params,
            cache: Mutex::new(HashMap::new()),
            warm: Mutex::new(None),
            warm_radius: 0.02,
            warm_tol: 1e-5,
            full_solves: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    /// Number of full eigensolves performed so far (warm hits excluded);
    /// a diagnostic for query-plan efficiency.
    pub fn full_solve_count(&self) -> usize {
        self.full_solves.load(std::sync::atomic::Ordering::Relaxed)
    }

    pub fn problem(&self) -> &ForwardProblem {
        &self.problem
    }

    /// extra basis vectors beyond the requested count
    const BASIS_EXTRA: usize = 4;
    /// extra eigenvalues beyond the basis, for the complement gap
    const TAIL_EXTRA: usize = 2;

    fn full_solve(&self, omega: &BoundaryField, count: usize, key: &[u64]) -> Result<Vec<f64>> {
        self.full_solves
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let m = count + Self::BASIS_EXTRA;
        let k_solve = (m + Self::TAIL_EXTRA).min(self.problem.mesh.num_nodes());
        let sys = self.problem.solve(omega, k_solve, &self.params)?;

        // refresh the warm basis only from out-of-radius (base-point)
        // queries so parallel derivative fan-outs never race on it
        let mut warm = self.warm.lock().unwrap();
        let replace = match warm.as_ref() {
            None => true,
            Some(w) => {
                w.base_key == key
                    || sup_distance(omega, &w.base_omega) > self.warm_radius * omega_scale(omega)
            }
        };
        if replace && sys.k > m {
            let op = self.problem.operator(omega)?;
            let inv_mass: Vec<f64> = op.mass.iter().map(|&v| 1.0 / v).collect();
            let psi: Vec<Vec<f64>> = sys.vectors[..m]
                .iter()
                .map(|phi| {
                    phi.iter()
                        .zip(&op.mass)
                        .map(|(p, mm)| p * mm.sqrt())
                        .collect()
                })
                .collect();
            // std-form residuals of the basis pairs
            let mut base_residuals = Vec::with_capacity(m);
            let n = op.dim;
            let mut ax = vec![0.0; n];
            let sqrt_m: Vec<f64> = op.mass.iter().map(|v| v.sqrt()).collect();
            for (j, psi_j) in psi.iter().enumerate() {
                // Ã ψ = M^{-1/2}(A+B)M^{-1/2} ψ
                let phi: Vec<f64> = psi_j
                    .iter()
                    .zip(&sqrt_m)
                    .map(|(p, s)| p / s)
                    .collect();
                op.apply(&phi, &mut ax);
                let mut resid = 0.0;
                for i in 0..n {
                    let r = ax[i] / sqrt_m[i] - sys.values[j] * psi_j[i];
                    resid += r * r;
                }
                base_residuals.push(resid.sqrt());
            }
            *warm = Some(std::sync::Arc::new(WarmBasis {
                base_key: key.to_vec(),
                base_omega: omega.clone(),
                psi,
                theta: sys.values[..m].to_vec(),
                base_residuals,
                tail: sys.values[m],
                inv_mass,
            }));
        }
        Ok(sys.values)
    }

    /// Rayleigh-Ritz answer from the warm basis, or None when the
    /// certificate fails.
    fn warm_solve(&self, omega: &BoundaryField, count: usize) -> Option<Vec<f64>> {
        let w = self.warm.lock().unwrap().clone()?;
        let m = w.psi.len();
        if count + 2 > m {
            return None;
        }
        if sup_distance(omega, &w.base_omega) > self.warm_radius * omega_scale(omega) {
            return None;
        }
        let bmesh = &self.problem.bmesh;
        // std-form diagonal perturbation, supported on boundary nodes:
        // Δ_ii = −(ω−ω₀)·measure / M  (interior-normal sign)
        let mut delta: Vec<(usize, f64)> = Vec::with_capacity(bmesh.len());
        let mut weyl = 0.0f64;
        for p in 0..bmesh.len() {
            let node = bmesh.node_indices[p];
            let d = -(omega.values[p] - w.base_omega.values[p])
                * self.problem_boundary_measure(p)
                * w.inv_mass[node];
            if d != 0.0 {
                delta.push((node, d));
                weyl = weyl.max(d.abs());
            }
        }
        // Ritz matrix B = diag(θ) + ψᵀ Δ ψ
        let mut b = vec![0.0; m * m];
        for a in 0..m {
            b[a * m + a] = w.theta[a];
            for bb in 0..=a {
                let mut v = 0.0;
                for &(node, d) in &delta {
                    v += d * w.psi[a][node] * w.psi[bb][node];
                }
                b[a * m + bb] += v;
                if a != bb {
                    b[bb * m + a] += v;
                }
            }
        }
        let (ritz, svecs) = crate::linalg::jacobi_eigen(&b, m);

        let n = w.psi[0].len();
        // residuals: Ã_p y − θ'y = Σ_j s_j(θ_j − θ')ψ_j + P(Δ⊙y) + Σ s_j e_j
        let base_err: f64 = w
            .base_residuals
            .iter()
            .map(|e| e * e)
            .sum::<f64>()
            .sqrt();
        let mut residuals = Vec::with_capacity(m);
        let mut work = vec![0.0; n];
        for i in 0..m {
            let s = &svecs[i];
            for v in work.iter_mut() {
                *v = 0.0;
            }
            for (j, psi_j) in w.psi.iter().enumerate() {
                let coef = s[j] * (w.theta[j] - ritz[i]);
                if coef != 0.0 {
                    crate::linalg::axpy(coef, psi_j, &mut work);
                }
            }
            for &(node, d) in &delta {
                let y_node: f64 = w.psi.iter().zip(s).map(|(p, c)| c * p[node]).sum();
                work[node] += d * y_node;
            }
            residuals.push(crate::linalg::norm2(&work) + base_err);
        }

        // group Ritz values and certify each group against its gap to the
        // rest of the spectrum (complement floor from the base tail)
        let tail_floor = w.tail - weyl;
        let group_tol = |lam: f64| 1e-5 * (1.0 + lam.abs());
        let mut i = 0;
        while i < count {
            let mut j = i;
            while j + 1 < m && ritz[j + 1] - ritz[j] <= group_tol(ritz[j]) {
                j += 1;
            }
            let gap_below = if i == 0 {
                f64::INFINITY
            } else {
                ritz[i] - ritz[i - 1]
            };
            let gap_above = if j + 1 < m {
                ritz[j + 1] - ritz[j]
            } else {
                f64::INFINITY
            };
            let gap = gap_below.min(gap_above).min((tail_floor - ritz[j]).abs());
            if gap <= 0.0 {
                return None;
            }
            let worst_r = residuals[i..=j].iter().cloned().fold(0.0f64, f64::max);
            let bound = worst_r * worst_r / gap;
            if bound > self.warm_tol * (1.0 + ritz[j].abs()) {
                return None;
            }
            i = j + 1;
        }
        Some(ritz[..count].to_vec())
    }

    fn problem_boundary_measure(&self, position: usize) -> f64 {
        // √c·w_S; c is constant-in-ω so this is impedance-independent
        let node = self.problem.bmesh.node_indices[position];
        let metric = if self.problem.mesh.is_interval() {
            1.0
        } else {
            self.problem.c.values[node]
        };
        self.problem.bmesh.weights[position] * metric.sqrt()
    }
}

fn sup_distance(a: &BoundaryField, b: &BoundaryField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn omega_scale(omega: &BoundaryField) -> f64 {
    1.0 + omega.sup_norm()
}

impl SpectralOracle for ForwardOracle {
    fn eigenvalues(&self, omega: &BoundaryField, count: usize) -> Result<Vec<f64>> {
        let key = omega_key(omega);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            if hit.len() >= count {
                return Ok(hit[..count].to_vec());
            }
        }
        let values = match self.warm_solve(omega, count) {
            Some(v) => v,
            None => self.full_solve(omega, count, &key)?,
        };
        let mut cache = self.cache.lock().unwrap();
        let entry = cache.entry(key).or_default();
        if values.len() > entry.len() {
            *entry = values.clone();
        }
        Ok(values[..count.min(values.len())].to_vec())
    }
}

/// One replay record: the impedance and the eigenvalues it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRecord {
    pub omega: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Wrapper that records every (ω, λ) pair passing through an inner oracle,
/// to materialize the local spectral data as a replay file.
pub struct RecordingOracle<'a> {
    inner: &'a dyn SpectralOracle,
    log: Mutex<HashMap<Vec<u64>, OracleRecord>>,
}

impl<'a> RecordingOracle<'a> {
    pub fn new(inner: &'a dyn SpectralOracle) -> Self {
        RecordingOracle {
            inner,
            log: Mutex::new(HashMap::new()),
        }
    }

    /// Records in canonical (key-sorted) order, so the file bytes do not
    /// depend on query scheduling.
    pub fn into_records(self) -> Vec<OracleRecord> {
        let map = self.log.into_inner().unwrap();
        let mut pairs: Vec<(Vec<u64>, OracleRecord)> = map.into_iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        pairs.into_iter().map(|(_, r)| r).collect()
    }

    pub fn query_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }
}

impl SpectralOracle for RecordingOracle<'_> {
    fn eigenvalues(&self, omega: &BoundaryField, count: usize) -> Result<Vec<f64>> {
        let values = self.inner.eigenvalues(omega, count)?;
        let mut log = self.log.lock().unwrap();
        let entry = log.entry(omega_key(omega)).or_insert_with(|| OracleRecord {
            omega: omega.values.clone(),
            eigenvalues: Vec::new(),
        });
        if values.len() > entry.eigenvalues.len() {
            entry.eigenvalues = values.clone();
        }
        Ok(values)
    }
}

/// Replays recorded query/result pairs; queries are matched by exact nodal
/// equality of ω (bitwise, via the lossless JSON round-trip of binary64).
pub struct ReplayOracle {
    map: HashMap<Vec<u64>, Vec<f64>>,
}

impl ReplayOracle {
    pub fn from_records(records: Vec<OracleRecord>) -> Self {
        let map = records
            .into_iter()
            .map(|r| {
                let key = r.omega.iter().map(|v| v.to_bits()).collect();
                (key, r.eigenvalues)
            })
            .collect();
        ReplayOracle { map }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let records: Vec<OracleRecord> = serde_json::from_str(&text)?;
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn write_records(records: &[OracleRecord], path: &Path) -> Result<()> {
    let text = serde_json::to_string(records)?;
    std::fs::write(path, text)?;
    Ok(())
}

impl SpectralOracle for ReplayOracle {
    fn eigenvalues(&self, omega: &BoundaryField, count: usize) -> Result<Vec<f64>> {
        let key = omega_key(omega);
        match self.map.get(&key) {
            None => Err(CoreError::MissingQuery {
                omega_hash: omega_hash(omega),
            }),
            Some(values) if values.len() < count => Err(CoreError::MissingQuery {
                omega_hash: format!(
                    "{} (recorded {} eigenvalues, {count} requested)",
                    omega_hash(omega),
                    values.len()
                ),
            }),
            Some(values) => Ok(values[..count].to_vec()),
        }
    }
}
