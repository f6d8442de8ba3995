//! Energy functionals, identities, inequalities, Casimirs and weak-form
//! residuals of simulated histories.

pub mod bounds;
pub mod casimir;
pub mod energy;
pub mod ledger;
pub mod residual;

pub use bounds::{
    default_smallness, initial_admissibility, interpolation_check, interpolation_constant,
    interpolation_exponents, sobolev_ratio, validate_initial, AdmissibilityCheck, BoundReport,
    PhaseDensity, ValidationReport,
};
pub use casimir::{casimir, transport_box, CasimirReport, CasimirValue, Psi, COVERAGE_THRESHOLD};
pub use energy::{
    deposit_tails, effective_series, energy_identities, mollified_energy_convergence,
    particle_potential_energies, potential_energies, profile_deposit, relativistic_energy,
    ConvergenceRow, ConvergenceTable, EffectivePair, IdentityReport,
};
pub use ledger::{
    energy_inequality_check, energy_ledger, finite_energy_criterion, EnergyLedger,
    FiniteEnergyReport, InequalityReport, InequalityRow, LedgerRow, LedgerSpec, LEDGER_COLUMNS,
};
pub use residual::{
    continuity_residual, renorm_residual, Beta, Bump, ResidualQuadrature, ResidualReport,
    TestFunction, TestValue,
};
