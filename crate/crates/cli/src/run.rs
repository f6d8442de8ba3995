//! Orchestration of the `simulate`, `picard`, `diagnose` and `validate`
//! subcommands and the artifacts they leave in the output directory.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use vlasov_core::diagnostics::{
    casimir, continuity_residual, effective_series, energy_identities, energy_inequality_check,
    energy_ledger, finite_energy_criterion, initial_admissibility, interpolation_check,
    renorm_residual, BoundReport, CasimirReport, EnergyLedger, FiniteEnergyReport,
    IdentityReport, InequalityReport, LedgerSpec, PhaseDensity, ResidualQuadrature,
    ResidualReport, ValidationReport,
};
use vlasov_core::dynamics::{
    picard_solve, run_coupled, FieldHistory, IntegratorConfig, PicardConfig, PicardReport,
    RunStatus,
};
use vlasov_core::phase::{deposit, GridGeometry, PhaseLattice};

use crate::config::ScenarioConfig;
use crate::error::{CliError, Result};
use crate::manifest::{artifact_hashes, Check, RunManifest, RunState};
use crate::scenario::Scenario;

pub const CONFIG_FILE: &str = "config.json";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const PICARD_FILE: &str = "picard.json";
pub const RESIDUALS_FILE: &str = "residuals.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const VALIDATION_FILE: &str = "validation.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Cells per axis of the lattice on which the interpolation bound is checked.
const BOUND_CELLS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Picard,
    Diagnose,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Picard => "picard",
            Command::Diagnose => "diagnose",
            Command::Validate => "validate",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Command> {
        Ok(match s {
            "simulate" => Command::Simulate,
            "picard" => Command::Picard,
            "diagnose" => Command::Diagnose,
            "validate" => Command::Validate,
            _ => return Err(CliError::Config(format!("unknown subcommand {s:?}"))),
        })
    }
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn outcome(checks: Vec<Check>) -> (RunState, Vec<Check>) {
    let state = if checks.iter().all(|c| c.passed) {
        RunState::Completed
    } else {
        RunState::ChecksFailed
    };
    (state, checks)
}

/// Admissibility of the initial data; an inadmissible profile is a
/// validation error.
pub fn validate(scn: &Scenario, out: &Path) -> Result<ValidationReport> {
    let report = initial_admissibility(&scn.profile, scn.sigma.sigma_e, scn.epsilon)?;
    write_json(out.join(VALIDATION_FILE), &report)?;
    Ok(report.into_result()?)
}

fn validation_checks(r: &ValidationReport) -> Vec<Check> {
    r.checks
        .iter()
        .map(|c| Check {
            name: c.name.clone(),
            value: c.value,
            limit: c.limit,
            passed: c.passed,
        })
        .collect()
}

pub fn ledger_spec(scn: &Scenario) -> LedgerSpec {
    LedgerSpec {
        grid: scn.grid,
        grid_shape: scn.config.mollifier.shape,
    }
}

/// Result of `simulate` before anything is written.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub history: FieldHistory,
    pub status: RunStatus,
    pub ledger: EnergyLedger,
}

pub fn simulate_history(scn: &Scenario) -> Result<Simulation> {
    let c = &scn.config;
    let ensemble = scn.initial_ensemble()?;
    let run = run_coupled(
        &ensemble,
        c.t_final,
        &c.integrator,
        &scn.fields,
        c.snapshot_stride,
    )?;
    let ledger = energy_ledger(&run.history, &ledger_spec(scn))?;
    Ok(Simulation {
        history: run.history,
        status: run.status,
        ledger,
    })
}

fn energy_checks(
    scn: &Scenario,
    ledger: &EnergyLedger,
    completed: bool,
) -> Result<(Option<InequalityReport>, Option<FiniteEnergyReport>, Vec<Check>)> {
    let mut checks = Vec::new();
    let mut ineq = None;
    let mut finite = None;
    if ledger.rows.len() >= 2 {
        let r = energy_inequality_check(ledger, scn.config.diagnostics.energy_tolerance)?;
        checks.push(Check {
            name: "energy_inequality".into(),
            value: if r.equality_checked {
                r.max_defect
            } else {
                r.max_excess
            },
            limit: Some(r.tolerance),
            passed: r.passed,
        });
        ineq = Some(r);
    }
    if completed {
        let f = finite_energy_criterion(ledger, scn.t_final())?;
        checks.push(Check::holds("finite_energy", f.value, f.passed));
        finite = Some(f);
    }
    Ok((ineq, finite, checks))
}

fn simulate(scn: &Scenario, out: &Path) -> Result<(RunState, Vec<Check>)> {
    let v = validate(scn, out)?;
    let mut checks = validation_checks(&v);
    let sim = simulate_history(scn)?;
    sim.history.export(out.join(SNAPSHOT_DIR), &scn.hash)?;
    sim.ledger.save_csv(out.join(LEDGER_FILE))?;
    let completed = sim.status == RunStatus::Completed;
    let (_, _, energy) = energy_checks(scn, &sim.ledger, completed)?;
    checks.extend(energy);
    if let RunStatus::BlowUp { time, speed, guard } = sim.status {
        return Ok((RunState::BlowUp { time, speed, guard }, checks));
    }
    Ok(outcome(checks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardSummary {
    pub report: PicardReport,
    pub c_fit: Option<f64>,
    /// `d_N / d_1`.
    pub measured_ratio: Option<f64>,
    /// `T^(N-1) / N! * c_fit`.
    pub factorial_bound: Option<f64>,
    pub bound_slack: f64,
    pub status: RunStatus,
}

pub fn picard_summary(scn: &Scenario) -> Result<PicardSummary> {
    let c = &scn.config;
    let sample = scn.picard_sample()?;
    let out = picard_solve(
        &sample,
        &PicardConfig {
            t_final: c.t_final,
            iterations: c.picard.iterations,
            integrator: c.integrator,
            fields: scn.fields,
        },
    )?;
    let d = &out.report.distances;
    let n = d.len();
    let measured_ratio = match (d.first(), d.last()) {
        (Some(&a), Some(&b)) if a > 0.0 => Some(b / a),
        _ => None,
    };
    Ok(PicardSummary {
        c_fit: out.report.c_fit(),
        factorial_bound: if n > 0 {
            out.report.factorial_bound_ratio(n)
        } else {
            None
        },
        measured_ratio,
        bound_slack: c.picard.bound_slack,
        status: out.status,
        report: out.report,
    })
}

pub fn picard_checks(s: &PicardSummary) -> Vec<Check> {
    let d = &s.report.distances;
    let vanishing = d.iter().all(|&x| x == 0.0);
    let mut checks = vec![Check::holds(
        "picard_contraction",
        d.last().copied().unwrap_or(0.0),
        !d.is_empty() && (vanishing || s.report.strictly_decreasing()),
    )];
    if let (Some(r), Some(b)) = (s.measured_ratio, s.factorial_bound) {
        checks.push(Check::at_most(
            "picard_factorial_bound",
            r,
            b * (1.0 + s.bound_slack),
        ));
    }
    checks
}

fn picard(scn: &Scenario, out: &Path) -> Result<(RunState, Vec<Check>)> {
    let v = validate(scn, out)?;
    let mut checks = validation_checks(&v);
    let summary = picard_summary(scn)?;
    write_json(out.join(PICARD_FILE), &summary)?;
    checks.extend(picard_checks(&summary));
    if let RunStatus::BlowUp { time, speed, guard } = summary.status {
        return Ok((RunState::BlowUp { time, speed, guard }, checks));
    }
    Ok(outcome(checks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSuite {
    pub quadrature: ResidualQuadrature,
    pub dt: f64,
    pub grid: GridGeometry,
    pub renormalized: Vec<ResidualReport>,
    pub continuity: Vec<ResidualReport>,
}

impl ResidualSuite {
    pub fn worst(&self) -> f64 {
        self.renormalized
            .iter()
            .chain(&self.continuity)
            .map(|r| r.normalized)
            .fold(0.0, f64::max)
    }
}

/// Renormalized transport residuals of `f0` carried along `history`, and
/// continuity residuals of the deposited snapshots.
pub fn residual_suite(
    scn: &Scenario,
    history: &FieldHistory,
    grid: &GridGeometry,
    quad: &ResidualQuadrature,
    dt: f64,
) -> Result<ResidualSuite> {
    let c = &scn.config;
    let cfg = IntegratorConfig {
        dt,
        ..c.integrator
    };
    cfg.validate()?;
    let t_end = history.end_time();
    let domain = scn.core_box();
    let renormalized = scn
        .test_functions()
        .iter()
        .map(|phi| {
            Ok(renorm_residual(
                history,
                t_end,
                &scn.profile,
                c.diagnostics.beta,
                phi,
                &domain,
                quad,
                &cfg,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    let series = effective_series(history, grid)?;
    let continuity = scn
        .spatial_test_functions()
        .iter()
        .map(|phi| Ok(continuity_residual(&series, phi, quad.time_order)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualSuite {
        quadrature: *quad,
        dt,
        grid: *grid,
        renormalized,
        continuity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirDrift {
    pub id: String,
    pub initial: f64,
    pub terminal: f64,
    pub relative_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirSummary {
    pub lattice: PhaseLattice,
    pub initial: CasimirReport,
    pub terminal: CasimirReport,
    pub drifts: Vec<CasimirDrift>,
}

pub fn casimir_summary(scn: &Scenario, history: &FieldHistory) -> Result<CasimirSummary> {
    let c = &scn.config;
    let lattice = scn.casimir_lattice()?;
    let psis = &c.diagnostics.casimirs;
    let cfg = IntegratorConfig {
        dt: c.diagnostics.transport_dt,
        ..c.integrator
    };
    let t = history.end_time();
    let initial = casimir(history, &scn.profile, psis, 0.0, &lattice, &cfg)?;
    let terminal = casimir(history, &scn.profile, psis, t, &lattice, &cfg)?;
    let drifts = initial
        .values
        .iter()
        .zip(&terminal.values)
        .map(|(a, b)| CasimirDrift {
            id: a.psi.id(),
            initial: a.value,
            terminal: b.value,
            relative_drift: if a.value == 0.0 {
                (b.value - a.value).abs()
            } else {
                ((b.value - a.value) / a.value).abs()
            },
        })
        .collect();
    Ok(CasimirSummary {
        lattice,
        initial,
        terminal,
        drifts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub energy_inequality: Option<InequalityReport>,
    pub finite_energy: Option<FiniteEnergyReport>,
    pub casimir: CasimirSummary,
    pub identities: Vec<(f64, IdentityReport)>,
    pub interpolation: BoundReport,
}

fn diagnose(scn: &Scenario, out: &Path) -> Result<(RunState, Vec<Check>)> {
    let snap = out.join(SNAPSHOT_DIR);
    if !snap.join("manifest.json").is_file() {
        return Err(CliError::Config(format!(
            "{} holds no simulated run",
            out.display()
        )));
    }
    let (history, hm) = FieldHistory::import(&snap)?;
    if hm.config_hash != scn.hash {
        return Err(CliError::Config(format!(
            "run in {} was produced by config {}, not {}",
            out.display(),
            hm.config_hash,
            scn.hash
        )));
    }
    let d = &scn.config.diagnostics;
    let completed = (history.end_time() - scn.t_final()).abs() <= 1e-9 * scn.t_final().max(1.0);
    let (history, transport) = if d.gridded_history {
        (
            history.clone().with_grids(&scn.grid),
            history.with_grids(&scn.transport_grid()?),
        )
    } else {
        (history.clone(), history)
    };
    let mut checks = Vec::new();

    let ledger = energy_ledger(&history, &crate::run::ledger_spec(scn))?;
    let (energy_inequality, finite_energy, energy) = energy_checks(scn, &ledger, completed)?;
    checks.extend(energy);

    let suite = residual_suite(
        scn,
        &history,
        &scn.grid,
        &d.quadrature,
        d.transport_dt,
    )?;
    for r in suite.renormalized.iter() {
        checks.push(Check::at_most(
            format!("renormalized_residual_{}", r.test_function),
            r.normalized,
            d.residual_tolerance,
        ));
    }
    for r in suite.continuity.iter() {
        checks.push(Check::at_most(
            format!("continuity_residual_{}", r.test_function),
            r.normalized,
            d.residual_tolerance,
        ));
    }
    write_json(out.join(RESIDUALS_FILE), &suite)?;

    let cas = casimir_summary(scn, &transport)?;
    for dr in &cas.drifts {
        checks.push(Check::at_most(
            format!("casimir_{}", dr.id),
            dr.relative_drift,
            d.casimir_tolerance,
        ));
    }
    checks.push(Check::holds(
        "casimir_coverage",
        cas.terminal.escaped_fraction,
        !cas.initial.coverage_warning && !cas.terminal.coverage_warning,
    ));

    let mut identities = Vec::new();
    for s in [&history.snapshots()[0], history.snapshots().last().unwrap()] {
        let dep = deposit(&s.ensemble, &scn.grid)?;
        let id = energy_identities(&dep, scn.config.mollifier.shape, d.identity_tolerance)?;
        checks.push(Check::at_most(
            format!("electric_identity_t{}", s.time()),
            id.electric_discrepancy,
            d.identity_tolerance,
        ));
        checks.push(Check::holds(
            format!("magnetic_inequality_t{}", s.time()),
            id.magnetic_discrepancy,
            id.magnetic_inequality_holds,
        ));
        identities.push((s.time(), id));
    }

    let lattice = PhaseLattice::uniform(scn.core_box(), BOUND_CELLS)?;
    let interpolation = interpolation_check(&PhaseDensity::from_profile(&scn.profile, lattice), 1.5)?;
    checks.push(Check::holds(
        "interpolation_bound",
        interpolation.margin,
        interpolation.passed,
    ));

    write_json(
        out.join(DIAGNOSTICS_FILE),
        &DiagnosticsReport {
            energy_inequality,
            finite_energy,
            casimir: cas,
            identities,
            interpolation,
        },
    )?;
    Ok(outcome(checks))
}

/// Runs `cmd` on `config`, writing every artifact and the manifest into `out`.
/// Errors are recorded in the manifest; only failure to write it is returned.
pub fn execute(cmd: Command, config: ScenarioConfig, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    std::fs::create_dir_all(out)?;
    let mut m = RunManifest::new(cmd.name());
    m.seed = Some(config.seed);
    m.config_hash = Some(config.hash());
    m.mollifier = Some(config.mollifier);
    let mut stored = config.clone();
    stored.output = None;
    std::fs::write(out.join(CONFIG_FILE), stored.emit())?;

    let result = Scenario::resolve(config).and_then(|scn| {
        m.sigma_e = Some(scn.sigma.sigma_e);
        m.sigma_b = Some(scn.sigma.sigma_b);
        m.rescale = Some(scn.sigma.rescale);
        m.magnetic_ratio = scn.sigma.magnetic_ratio;
        match cmd {
            Command::Simulate => simulate(&scn, out),
            Command::Picard => picard(&scn, out),
            Command::Diagnose => diagnose(&scn, out),
            Command::Validate => {
                let r = initial_admissibility(&scn.profile, scn.sigma.sigma_e, scn.epsilon)?;
                write_json(out.join(VALIDATION_FILE), &r)?;
                let checks = validation_checks(&r);
                if r.passed {
                    Ok(outcome(checks))
                } else {
                    let msg = r.into_result().unwrap_err().to_string();
                    Ok((RunState::Invalid { message: msg }, checks))
                }
            }
        }
    });
    let (state, checks) = match result {
        Ok(x) => x,
        Err(e) => {
            let message = e.to_string();
            let state = if e.exit_code() == crate::error::exit::INVALID {
                RunState::Invalid { message }
            } else {
                RunState::Failed { message }
            };
            let checks = match std::fs::read_to_string(out.join(VALIDATION_FILE))
                .ok()
                .and_then(|t| serde_json::from_str::<ValidationReport>(&t).ok())
            {
                Some(r) if cmd != Command::Diagnose => validation_checks(&r),
                _ => Vec::new(),
            };
            (state, checks)
        }
    };
    m.all_passed = checks.iter().all(|c| c.passed);
    m.checks = checks;
    m.exit_code = state.exit_code();
    m.state = state;
    m.artifacts = artifact_hashes(out)?;
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.save(out)?;
    Ok(m)
}
