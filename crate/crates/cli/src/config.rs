//! Scenario configuration: a single versioned JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vlasov_core::diagnostics::{Beta, Psi, ResidualQuadrature};
use vlasov_core::dynamics::IntegratorConfig;
use vlasov_core::fields::Coupling;
use vlasov_core::kernel::{MollifierShape, MollifierSpec};
use vlasov_core::phase::{GridGeometry, InitialProfile, SamplingMode};

use crate::error::{CliError, Result};
use crate::scenario::physical_to_sigma;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Limit {
    Qes,
    Qms,
}

/// Particle charge `q`, mass `m`, gravitational constant `g` and vacuum
/// permittivity `epsilon0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub q: f64,
    pub m: f64,
    pub g: f64,
    pub epsilon0: f64,
    pub limit: Limit,
    /// Keep the magnetic self-field.
    #[serde(default = "enabled")]
    pub magnetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    Explicit { sigma_e: i8, sigma_b: i8 },
    Physical(PhysicalParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardOptions {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Allowed excess of `d_N / d_1` over the factorial bound, as a fraction.
    #[serde(default = "default_bound_slack")]
    pub bound_slack: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            iterations: default_iterations(),
            samples: default_samples(),
            bound_slack: default_bound_slack(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsOptions {
    #[serde(default = "default_casimirs")]
    pub casimirs: Vec<Psi>,
    /// Casimir lattice spacing in units of the profile's smallest widths.
    #[serde(default = "default_casimir_resolution")]
    pub casimir_resolution: f64,
    #[serde(default = "default_casimir_v_margin")]
    pub casimir_v_margin: f64,
    /// Relative Casimir drift allowed between `t = 0` and `T`.
    #[serde(default = "default_casimir_tolerance")]
    pub casimir_tolerance: f64,
    /// Energy tolerance as a fraction of the initial energy.
    #[serde(default = "default_tolerance")]
    pub energy_tolerance: f64,
    #[serde(default = "default_tolerance")]
    pub residual_tolerance: f64,
    #[serde(default = "default_identity_tolerance")]
    pub identity_tolerance: f64,
    #[serde(default = "default_beta")]
    pub beta: Beta,
    #[serde(default)]
    pub quadrature: ResidualQuadrature,
    /// Step of the backward characteristics used by the Casimir and
    /// residual diagnostics.
    #[serde(default = "default_transport_dt")]
    pub transport_dt: f64,
    /// Tabulate snapshot fields on the grid before transporting lattices.
    #[serde(default = "enabled")]
    pub gridded_history: bool,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions {
            casimirs: default_casimirs(),
            casimir_resolution: default_casimir_resolution(),
            casimir_v_margin: default_casimir_v_margin(),
            casimir_tolerance: default_casimir_tolerance(),
            energy_tolerance: default_tolerance(),
            residual_tolerance: default_tolerance(),
            identity_tolerance: default_identity_tolerance(),
            beta: default_beta(),
            quadrature: ResidualQuadrature::default(),
            transport_dt: default_transport_dt(),
            gridded_history: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub coupling: CouplingSpec,
    pub profile: InitialProfile,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub sampling: SamplingMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mollifier")]
    pub mollifier: MollifierSpec,
    /// Diagnostic grid; derived from the profile when absent.
    #[serde(default)]
    pub grid: Option<GridGeometry>,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorConfig,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Smallness threshold on `||f0||_{3/2}` for `sigma_E = -1`.
    #[serde(default)]
    pub smallness: Option<f64>,
    #[serde(default)]
    pub picard: PicardOptions,
    #[serde(default)]
    pub diagnostics: DiagnosticsOptions,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn enabled() -> bool {
    true
}
fn default_particles() -> usize {
    4096
}
fn default_mollifier() -> MollifierSpec {
    MollifierSpec {
        level: 8,
        shape: MollifierShape::UniformBall,
    }
}
fn default_integrator() -> IntegratorConfig {
    IntegratorConfig::rk4(0.01)
}
fn default_stride() -> usize {
    10
}
fn default_iterations() -> usize {
    4
}
fn default_samples() -> usize {
    512
}
fn default_bound_slack() -> f64 {
    0.5
}
fn default_casimirs() -> Vec<Psi> {
    vec![Psi::Square]
}
fn default_casimir_resolution() -> f64 {
    0.8
}
fn default_casimir_v_margin() -> f64 {
    0.0
}
fn default_casimir_tolerance() -> f64 {
    0.005
}
fn default_tolerance() -> f64 {
    0.01
}
fn default_identity_tolerance() -> f64 {
    0.05
}
fn default_transport_dt() -> f64 {
    0.1
}
fn default_beta() -> Beta {
    Beta::Arctan
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be positive, got {x}")))
    }
}

impl ScenarioConfig {
    /// Minimal configuration with every optional field at its default.
    pub fn new(coupling: CouplingSpec, profile: InitialProfile, t_final: f64) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            coupling,
            profile,
            particles: default_particles(),
            sampling: SamplingMode::default(),
            seed: 0,
            mollifier: default_mollifier(),
            grid: None,
            integrator: default_integrator(),
            t_final,
            snapshot_stride: default_stride(),
            smallness: None,
            picard: PicardOptions::default(),
            diagnostics: DiagnosticsOptions::default(),
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match self.coupling {
            CouplingSpec::Explicit { sigma_e, sigma_b } => {
                Coupling::new(sigma_e, sigma_b).map_err(|e| config_error(e.to_string()))?;
            }
            CouplingSpec::Physical(p) => {
                physical_to_sigma(&p)?;
            }
        }
        self.profile
            .validate()
            .map_err(|e| config_error(format!("profile: {e}")))?;
        if self.particles == 0 {
            return Err(config_error("particles must be at least 1"));
        }
        MollifierSpec::new(self.mollifier.level, self.mollifier.shape)
            .map_err(|e| config_error(e.to_string()))?;
        if let Some(g) = &self.grid {
            GridGeometry::new(g.origin, g.spacing, g.dims)
                .map_err(|e| config_error(format!("grid: {e}")))?;
        }
        self.integrator
            .validate()
            .map_err(|e| config_error(format!("integrator: {e}")))?;
        positive("t_final", self.t_final)?;
        if self.snapshot_stride == 0 {
            return Err(config_error("snapshot_stride must be at least 1"));
        }
        if let Some(eps) = self.smallness {
            positive("smallness", eps)?;
        }
        if self.picard.iterations == 0 || self.picard.samples == 0 {
            return Err(config_error("picard iterations and samples must be at least 1"));
        }
        if !(self.picard.bound_slack >= 0.0) {
            return Err(config_error("picard bound_slack must be nonnegative"));
        }
        let d = &self.diagnostics;
        positive("casimir_resolution", d.casimir_resolution)?;
        if !(d.casimir_v_margin >= 0.0) {
            return Err(config_error("casimir_v_margin must be nonnegative"));
        }
        for (name, tol) in [
            ("casimir_tolerance", d.casimir_tolerance),
            ("energy_tolerance", d.energy_tolerance),
            ("residual_tolerance", d.residual_tolerance),
            ("identity_tolerance", d.identity_tolerance),
        ] {
            positive(name, tol)?;
        }
        positive("transport_dt", d.transport_dt)?;
        let q = d.quadrature;
        if q.time_pieces == 0 || q.time_order == 0 || q.space_pieces == 0 || q.space_order == 0 {
            return Err(config_error("quadrature pieces and orders must be positive"));
        }
        Ok(())
    }

    /// Canonical pretty-printed JSON.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical compact JSON, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex_digest(&bytes)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Parses and validates a config document.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        config_error(format!(
            "line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}
