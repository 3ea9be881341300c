//! Experiment configuration: JSON schema, field presets and validation.

use robinlab_core::fields::{BoundaryField, ScalarField};
use robinlab_core::geometry::{BoundaryMesh, DomainSpec, Mesh};
use robinlab_core::inversion::BsdParams;
use robinlab_core::fields::BumpShape;
use robinlab_core::spectral::SolveParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Forward,
    HadamardCheck,
    Simplify,
    Recover,
    EndToEnd,
    RecordOracle,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Forward => "forward",
            Scenario::HadamardCheck => "hadamard-check",
            Scenario::Simplify => "simplify",
            Scenario::Recover => "recover",
            Scenario::EndToEnd => "end-to-end",
            Scenario::RecordOracle => "record-oracle",
        }
    }

    pub fn needs_sigma(&self) -> bool {
        !matches!(self, Scenario::Forward)
    }
}

/// Volume-field preset (q and c on Ω).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum VolumePreset {
    Constant { value: f64 },
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        height: f64,
    },
    Array { values: Vec<f64> },
}

impl Default for VolumePreset {
    fn default() -> Self {
        VolumePreset::Constant { value: 0.0 }
    }
}

impl VolumePreset {
    pub fn build(&self, mesh: &Mesh, field_name: &str) -> Result<ScalarField, CliError> {
        match self {
            VolumePreset::Constant { value } => Ok(ScalarField::constant(mesh, *value)),
            VolumePreset::GaussianBump {
                center,
                width,
                height,
            } => {
                if center.is_empty() || center.len() > 2 {
                    return Err(CliError::config(format!(
                        "fields.{field_name}.center must have 1 or 2 coordinates"
                    )));
                }
                if !(*width > 0.0) {
                    return Err(CliError::config(format!(
                        "fields.{field_name}.width must be positive"
                    )));
                }
                let (cx, cy) = (center[0], center.get(1).copied().unwrap_or(0.0));
                let (w, h) = (*width, *height);
                Ok(ScalarField::from_fn(mesh, move |x, y| {
                    let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                    h * (-d2 / (2.0 * w * w)).exp()
                }))
            }
            VolumePreset::Array { values } => ScalarField::from_values(mesh, values.clone())
                .map_err(|e| CliError::config(format!("fields.{field_name}: {e}"))),
        }
    }
}

/// Boundary-field preset (ω₀ on ∂Ω); `s` is the cumulative arc coordinate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum BoundaryPreset {
    Constant { value: f64 },
    /// a + b·s/|∂Ω|
    ArcLinear { a: f64, b: f64 },
    GaussianArc { center: f64, width: f64, height: f64 },
    Array { values: Vec<f64> },
}

impl Default for BoundaryPreset {
    fn default() -> Self {
        BoundaryPreset::Constant { value: 0.0 }
    }
}

impl BoundaryPreset {
    pub fn build(&self, bmesh: &BoundaryMesh) -> Result<BoundaryField, CliError> {
        match self {
            BoundaryPreset::Constant { value } => Ok(BoundaryField::constant(bmesh, *value)),
            BoundaryPreset::ArcLinear { a, b } => Ok(BoundaryField {
                values: bmesh
                    .arc
                    .iter()
                    .map(|s| a + b * s / bmesh.total_arc)
                    .collect(),
            }),
            BoundaryPreset::GaussianArc {
                center,
                width,
                height,
            } => {
                if !(*width > 0.0) {
                    return Err(CliError::config(
                        "fields.omega0.width must be positive".into(),
                    ));
                }
                Ok(BoundaryField {
                    values: bmesh
                        .arc
                        .iter()
                        .map(|s| height * (-((s - center) / width).powi(2) / 2.0).exp())
                        .collect(),
                })
            }
            BoundaryPreset::Array { values } => BoundaryField::from_values(bmesh, values.clone())
                .map_err(|e| CliError::config(format!("fields.omega0: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldsConfig {
    #[serde(default)]
    pub q: VolumePreset,
    #[serde(default = "default_conformal")]
    pub c: VolumePreset,
    #[serde(default)]
    pub omega0: BoundaryPreset,
}

impl Default for FieldsConfig {
    fn default() -> Self {
        FieldsConfig {
            q: VolumePreset::default(),
            c: default_conformal(),
            omega0: BoundaryPreset::default(),
        }
    }
}

fn default_conformal() -> VolumePreset {
    VolumePreset::Constant { value: 1.0 }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SigmaConfig {
    pub arc_start: f64,
    pub arc_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleConfig {
    Forward,
    Replay { path: String },
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::Forward
    }
}

/// Numeric knobs; scenario validation checks the ones it needs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct NumericParams {
    pub k: usize,
    pub j_bumps: usize,
    pub bump_shape: BumpShape,
    pub fd_step: f64,
    pub reg: f64,
    pub gap_tol: f64,
    pub zero_tol: f64,
    pub fit_window: usize,
    pub cluster_s0: f64,
    pub cluster_schedule_len: usize,
    pub cluster_tol: f64,
    pub eta_retries: usize,
    pub extra_eigen: usize,
    /// simplicity search
    pub k_max: usize,
    pub epsilon: f64,
    pub budget: usize,
    /// eigensolver routing
    pub dense_threshold: usize,
    pub residual_tol: f64,
}

impl Default for NumericParams {
    fn default() -> Self {
        let bsd = BsdParams::default();
        let solve = SolveParams::default();
        NumericParams {
            k: 6,
            j_bumps: bsd.bump_count,
            bump_shape: bsd.bump_shape,
            fd_step: bsd.fd_step,
            reg: bsd.reg,
            gap_tol: bsd.gap_tol,
            zero_tol: bsd.zero_tol,
            fit_window: bsd.fit_window,
            cluster_s0: bsd.cluster_s0,
            cluster_schedule_len: bsd.cluster_schedule_len,
            cluster_tol: bsd.cluster_tol,
            eta_retries: bsd.eta_retries,
            extra_eigen: bsd.extra_eigen,
            k_max: 6,
            epsilon: 0.1,
            budget: 50,
            dense_threshold: solve.dense_threshold,
            residual_tol: solve.residual_tol,
        }
    }
}

impl NumericParams {
    pub fn bsd_params(&self, seed: u64) -> BsdParams {
        BsdParams {
            bump_count: self.j_bumps,
            bump_shape: self.bump_shape,
            fd_step: self.fd_step,
            reg: self.reg,
            gap_tol: self.gap_tol,
            zero_tol: self.zero_tol,
            fit_window: self.fit_window,
            cluster_s0: self.cluster_s0,
            cluster_schedule_len: self.cluster_schedule_len,
            cluster_tol: self.cluster_tol,
            eta_retries: self.eta_retries,
            seed,
            extra_eigen: self.extra_eigen,
        }
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            dense_threshold: self.dense_threshold,
            residual_tol: self.residual_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub sigma: Option<SigmaConfig>,
    pub scenario: Scenario,
    #[serde(default)]
    pub params: NumericParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn default_output_dir() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config parse error: {e}")))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.domain
            .validate()
            .map_err(|e| CliError::config(format!("domain: {e}")))?;
        let p = &self.params;
        for (name, value) in [
            ("params.fd_step", p.fd_step),
            ("params.reg", p.reg),
            ("params.gap_tol", p.gap_tol),
            ("params.zero_tol", p.zero_tol),
            ("params.cluster_s0", p.cluster_s0),
            ("params.cluster_tol", p.cluster_tol),
            ("params.residual_tol", p.residual_tol),
        ] {
            if !(value > 0.0) {
                return Err(CliError::config(format!("{name} must be positive")));
            }
        }
        if self.scenario.needs_sigma() && self.sigma.is_none() {
            return Err(CliError::config(format!(
                "missing \"sigma\" for scenario={}",
                self.scenario.name()
            )));
        }
        if let Some(s) = &self.sigma {
            if !(s.arc_start >= 0.0 && s.arc_start < s.arc_end) {
                return Err(CliError::config(
                    "sigma: need 0 <= arc_start < arc_end".into(),
                ));
            }
        }
        match self.scenario {
            Scenario::Simplify => {
                if !(p.epsilon > 0.0) {
                    return Err(CliError::config("params.epsilon must be positive".into()));
                }
                if p.k_max == 0 || p.budget == 0 {
                    return Err(CliError::config(
                        "params.k_max and params.budget must be at least 1".into(),
                    ));
                }
            }
            Scenario::HadamardCheck => {
                if p.j_bumps < 2 {
                    return Err(CliError::config("params.j_bumps must be at least 2".into()));
                }
                if p.k == 0 {
                    return Err(CliError::config("params.k must be at least 1".into()));
                }
            }
            Scenario::Forward => {
                if p.k == 0 {
                    return Err(CliError::config("params.k must be at least 1".into()));
                }
            }
            _ => {}
        }
        if let OracleConfig::Replay { path } = &self.oracle {
            if matches!(self.scenario, Scenario::RecordOracle) {
                return Err(CliError::config(
                    "record-oracle requires the forward oracle".into(),
                ));
            }
            if path.is_empty() {
                return Err(CliError::config("oracle.path must not be empty".into()));
            }
        }
        Ok(())
    }
}
