//! Scenario execution and persistence.
//!
//! Every scenario writes `results.json` (deterministic bytes for a fixed
//! config and seed), recovery scenarios add `traces.csv`, record-oracle
//! adds `oracle.json`, and the manifest is always written last so its
//! presence implies complete outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use robinlab_core::fields::{bump_basis, BoundaryField};
use robinlab_core::geometry::{build_mesh, make_sigma, SigmaPatch};
use robinlab_core::inversion::{
    assemble_bsd, compare_bsd, ground_truth_bsd, write_records, BoundarySpectralData,
    BsdComparison, EntryStatus, ForwardOracle, Provenance, RecordingOracle, ReplayOracle,
    SpectralOracle,
};
use robinlab_core::perturbation::{hadamard_check, simplify_spectrum, HadamardReport, SimplifyResult};
use robinlab_core::spectral::{cluster_eigenvalues, ForwardProblem, SolveParams};

use crate::config::{ExperimentConfig, OracleConfig, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub wall_clock_seconds: f64,
    pub scenario: String,
    pub result_files: Vec<String>,
    pub per_k_status: Vec<KStatus>,
    pub effective_config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KStatus {
    /// 1-based eigenvalue index
    pub k: usize,
    pub status: String,
}

#[derive(Debug, Serialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
enum ScenarioResults {
    Forward {
        k: usize,
        eigenvalues: Vec<f64>,
        residuals: Vec<f64>,
        clusters: Vec<ClusterRow>,
    },
    HadamardCheck {
        report: HadamardReport,
    },
    Simplify {
        result: SimplifyResult,
    },
    Recover {
        k: usize,
        per_k: Vec<RecoverRow>,
    },
    EndToEnd {
        k: usize,
        per_k: Vec<RecoverRow>,
        comparison: BsdComparison,
    },
    RecordOracle {
        queries: usize,
        file: String,
    },
}

#[derive(Debug, Serialize)]
struct ClusterRow {
    /// 1-based inclusive eigenvalue range
    k_first: usize,
    k_last: usize,
    multiplicity: usize,
}

#[derive(Debug, Serialize)]
struct RecoverRow {
    /// 1-based eigenvalue index
    k: usize,
    lambda: f64,
    status: String,
    provenance: String,
    sign_ambiguous: bool,
    clipped_mass: Option<f64>,
    fit_residual: Option<f64>,
}

/// Execute the scenario described by `config` and write all outputs under
/// its `output_dir`. Returns the manifest (which is also written, last).
pub fn run(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    config.validate()?;
    let started = Instant::now();
    let out_dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out_dir)?;

    let setup = Setup::build(config)?;
    let mut files: Vec<String> = Vec::new();
    let mut per_k: Vec<KStatus> = Vec::new();

    let results = match config.scenario {
        Scenario::Forward => scenario_forward(config, &setup)?,
        Scenario::HadamardCheck => scenario_hadamard(config, &setup)?,
        Scenario::Simplify => scenario_simplify(config, &setup)?,
        Scenario::Recover | Scenario::EndToEnd => {
            scenario_recover(config, &setup, &out_dir, &mut files, &mut per_k)?
        }
        Scenario::RecordOracle => scenario_record(config, &setup, &out_dir)?,
    };
    if let ScenarioResults::RecordOracle { file, .. } = &results {
        files.push(file.clone());
    }

    let results_json = serde_json::to_string_pretty(&results)
        .map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(out_dir.join("results.json"), &results_json)?;
    files.insert(0, "results.json".into());

    if per_k.is_empty() {
        if let ScenarioResults::Forward { eigenvalues, .. } = &results {
            per_k = (1..=eigenvalues.len())
                .map(|k| KStatus {
                    k,
                    status: "ok".into(),
                })
                .collect();
        }
    }

    let manifest = RunManifest {
        config_hash: config_hash(config)?,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        scenario: config.scenario.name().to_string(),
        result_files: files,
        per_k_status: per_k,
        effective_config: config.clone(),
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(out_dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

fn config_hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Io(e.to_string()))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

/// Domain, fields, operator skeleton and patch shared by the scenarios.
struct Setup {
    problem: ForwardProblem,
    omega0: BoundaryField,
    sigma: Option<SigmaPatch>,
    boundary_measure: Vec<f64>,
    solve_params: SolveParams,
}

impl Setup {
    fn build(config: &ExperimentConfig) -> Result<Self, CliError> {
        let (mesh, bmesh) = build_mesh(&config.domain)?;
        let q = config.fields.q.build(&mesh, "q")?;
        let c = config.fields.c.build(&mesh, "c")?;
        let omega0 = config.fields.omega0.build(&bmesh)?;
        let problem = ForwardProblem::new(mesh, bmesh, q, c)?;
        let sigma = match &config.sigma {
            Some(s) => Some(make_sigma(&problem.bmesh, s.arc_start, s.arc_end)?),
            None => None,
        };
        let op = problem.operator(&omega0)?;
        Ok(Setup {
            boundary_measure: op.boundary_measure.clone(),
            solve_params: config.params.solve_params(),
            problem,
            omega0,
            sigma,
        })
    }

    fn sigma(&self) -> SigmaPatch {
        self.sigma.expect("validated: scenario requires sigma")
    }
}

fn scenario_forward(
    config: &ExperimentConfig,
    setup: &Setup,
) -> Result<ScenarioResults, CliError> {
    let sys = setup
        .problem
        .solve(&setup.omega0, config.params.k, &setup.solve_params)?;
    let clusters = cluster_eigenvalues(&sys.values, config.params.gap_tol)
        .into_iter()
        .map(|c| ClusterRow {
            k_first: c.start + 1,
            k_last: c.end + 1,
            multiplicity: c.multiplicity(),
        })
        .collect();
    Ok(ScenarioResults::Forward {
        k: config.params.k,
        eigenvalues: sys.values,
        residuals: sys.residuals,
        clusters,
    })
}

fn scenario_hadamard(
    config: &ExperimentConfig,
    setup: &Setup,
) -> Result<ScenarioResults, CliError> {
    let params = &config.params;
    let sys = setup
        .problem
        .solve(&setup.omega0, params.k, &setup.solve_params)?;
    let sigma = setup.sigma();
    let bumps = bump_basis(&setup.problem.bmesh, &sigma, params.j_bumps, params.bump_shape)?;
    let oracle = ForwardOracle::new(setup.problem.clone(), setup.solve_params.clone());
    let report = hadamard_check(
        &sys,
        &setup.boundary_measure,
        &setup.problem.bmesh,
        &oracle,
        &setup.omega0,
        &bumps,
        params.fd_step,
        params.gap_tol,
        1e-4,
    )?;
    Ok(ScenarioResults::HadamardCheck { report })
}

fn scenario_simplify(
    config: &ExperimentConfig,
    setup: &Setup,
) -> Result<ScenarioResults, CliError> {
    let params = &config.params;
    let oracle = ForwardOracle::new(setup.problem.clone(), setup.solve_params.clone());
    let result = simplify_spectrum(
        &oracle,
        &setup.problem.bmesh,
        &setup.sigma(),
        &setup.omega0,
        params.k_max,
        params.epsilon,
        config.seed,
        params.budget,
        params.gap_tol,
    )?;
    Ok(ScenarioResults::Simplify { result })
}

fn recover_rows(bsd: &BoundarySpectralData) -> (Vec<RecoverRow>, Vec<KStatus>) {
    let mut rows = Vec::with_capacity(bsd.entries.len());
    let mut statuses = Vec::with_capacity(bsd.entries.len());
    for e in &bsd.entries {
        let status = match &e.status {
            EntryStatus::Ok => "ok".to_string(),
            EntryStatus::Failed { reason } => format!("failed: {reason}"),
        };
        let provenance = match &e.provenance {
            Provenance::SimpleBranch => "simple-branch".to_string(),
            Provenance::ClusterLimit { members, steps_used, .. } => format!(
                "cluster-limit[k{}..k{}, {} steps]",
                members.0 + 1,
                members.1 + 1,
                steps_used
            ),
        };
        statuses.push(KStatus {
            k: e.index + 1,
            status: status.clone(),
        });
        rows.push(RecoverRow {
            k: e.index + 1,
            lambda: e.lambda,
            status,
            provenance,
            sign_ambiguous: e.sign_ambiguous,
            clipped_mass: e.magnitude.as_ref().map(|m| m.clipped_mass),
            fit_residual: e.magnitude.as_ref().map(|m| m.fit_residual),
        });
    }
    (rows, statuses)
}

fn scenario_recover(
    config: &ExperimentConfig,
    setup: &Setup,
    out_dir: &Path,
    files: &mut Vec<String>,
    per_k: &mut Vec<KStatus>,
) -> Result<ScenarioResults, CliError> {
    let params = &config.params;
    let sigma = setup.sigma();
    let bsd_params = config.params.bsd_params(config.seed);

    let forward_oracle;
    let replay_oracle;
    let oracle: &dyn SpectralOracle = match &config.oracle {
        OracleConfig::Forward => {
            forward_oracle =
                ForwardOracle::new(setup.problem.clone(), setup.solve_params.clone());
            &forward_oracle
        }
        OracleConfig::Replay { path } => {
            replay_oracle = ReplayOracle::load(Path::new(path))?;
            &replay_oracle
        }
    };

    let bsd = assemble_bsd(
        oracle,
        &setup.problem.bmesh,
        &sigma,
        &setup.boundary_measure,
        &setup.omega0,
        params.k,
        &bsd_params,
    )?;
    let (rows, statuses) = recover_rows(&bsd);
    *per_k = statuses;

    // ground truth comes from the forward solver, which the experiment side
    // always has (the oracle choice only constrains the inversion side)
    let truth = ground_truth_bsd(&setup.problem, &setup.omega0, &bsd, &setup.solve_params)?;
    write_traces_csv(&out_dir.join("traces.csv"), &bsd, Some(&truth))?;
    files.push("traces.csv".into());

    if matches!(config.scenario, Scenario::EndToEnd) {
        let comparison = compare_bsd(&bsd, &truth)?;
        Ok(ScenarioResults::EndToEnd {
            k: params.k,
            per_k: rows,
            comparison,
        })
    } else {
        Ok(ScenarioResults::Recover {
            k: params.k,
            per_k: rows,
        })
    }
}

fn scenario_record(
    config: &ExperimentConfig,
    setup: &Setup,
    out_dir: &Path,
) -> Result<ScenarioResults, CliError> {
    let params = &config.params;
    let sigma = setup.sigma();
    let bsd_params = config.params.bsd_params(config.seed);
    let forward = ForwardOracle::new(setup.problem.clone(), setup.solve_params.clone());
    let recorder = RecordingOracle::new(&forward);
    // run exactly the plan a recover scenario would issue
    let _ = assemble_bsd(
        &recorder,
        &setup.problem.bmesh,
        &sigma,
        &setup.boundary_measure,
        &setup.omega0,
        params.k,
        &bsd_params,
    )?;
    let queries = recorder.query_count();
    let records = recorder.into_records();
    write_records(&records, &out_dir.join("oracle.json"))?;
    Ok(ScenarioResults::RecordOracle {
        queries,
        file: "oracle.json".into(),
    })
}

/// CSV schema: k (1-based), arc coordinate, true trace (empty when
/// unavailable), recovered trace (empty when that k failed).
fn write_traces_csv(
    path: &Path,
    bsd: &BoundarySpectralData,
    truth: Option<&BoundarySpectralData>,
) -> Result<(), CliError> {
    let mut text = String::from("k,s,true_trace,recovered_trace\n");
    for entry in &bsd.entries {
        let true_trace = truth
            .and_then(|t| t.entry(entry.index))
            .and_then(|e| e.trace.as_ref());
        for (i, s) in bsd.arcs.iter().enumerate() {
            let tv = true_trace.map_or(String::new(), |t| format!("{}", t[i]));
            let rv = entry
                .trace
                .as_ref()
                .map_or(String::new(), |t| format!("{}", t[i]));
            let _ = writeln!(text, "{},{},{},{}", entry.index + 1, s, tv, rv);
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}
