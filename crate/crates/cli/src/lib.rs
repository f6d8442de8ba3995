//! Scenario configuration, physical-parameter mapping and run orchestration
//! for the `vlasov` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;
pub mod run;
pub mod scenario;

pub use config::{parse_config, parse_config_str, CouplingSpec, Limit, PhysicalParams, ScenarioConfig};
pub use error::{exit, CliError, Result};
pub use manifest::{Check, RunManifest, RunState};
pub use run::{execute, Command};
pub use scenario::{physical_to_sigma, Scenario, SigmaResolution};
