//! Per-snapshot energy ledger, the energy inequality and the finite-energy
//! criterion.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::energy::{deposit_tails, particle_potential_energies, potential_energies};
use crate::dynamics::history::FieldHistory;
use crate::error::{invalid, Error, Result};
use crate::fields::{grid_fields, grid_mollifier, Coupling};
use crate::kernel::MollifierShape;
use crate::phase::grid::{deposit, GridGeometry};

/// Column names of the ledger CSV before any Casimir columns.
pub const LEDGER_COLUMNS: [&str; 12] = [
    "time",
    "mass",
    "grid_mass",
    "escaped_weight",
    "relativistic_energy",
    "electric_pe",
    "magnetic_pe",
    "electric_pe_grid",
    "magnetic_pe_grid",
    "e_field_energy",
    "b_field_energy",
    "total_energy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub time: f64,
    /// `sum w`.
    pub mass: f64,
    pub grid_mass: f64,
    pub escaped_weight: f64,
    pub relativistic_energy: f64,
    /// Particle pair energy `1/2 sum w_i w_j H_n(x_i - x_j)`, no sign.
    pub electric_pe: f64,
    pub magnetic_pe: f64,
    /// Same energies from the deposited grid.
    pub electric_pe_grid: f64,
    pub magnetic_pe_grid: f64,
    /// `1/2 int |E|^2` and `1/2 int |B|^2`, couplings applied, tails included.
    pub e_field_energy: f64,
    pub b_field_energy: f64,
    /// `relativistic_energy + sigma_E electric_pe`.
    pub total_energy: f64,
    pub casimirs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub coupling: Coupling,
    pub casimir_ids: Vec<String>,
    pub rows: Vec<LedgerRow>,
}

/// Grid and mollifier shape used for the grid columns of the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerSpec {
    pub grid: GridGeometry,
    pub grid_shape: MollifierShape,
}

/// Builds one row per snapshot of `history`, in snapshot order.
pub fn energy_ledger(history: &FieldHistory, spec: &LedgerSpec) -> Result<EnergyLedger> {
    let coupling = history.fields.coupling;
    let particle_mollifier = history.fields.mollifier.mollifier();
    let gm = grid_mollifier(&spec.grid, spec.grid_shape)?;
    let rows = history
        .snapshots()
        .par_iter()
        .map(|s| {
            let ens = &s.ensemble;
            let dep = deposit(ens, &spec.grid)?;
            let (electric_pe, magnetic_pe) = particle_potential_energies(ens, particle_mollifier);
            let (electric_pe_grid, magnetic_pe_grid) = potential_energies(&dep, gm);
            let (e_field_energy, b_field_energy) = if coupling.is_free() {
                (0.0, 0.0)
            } else {
                let with_b = coupling.sigma_b != 0;
                let f = grid_fields(&dep, gm, with_b);
                let tails = deposit_tails(&dep)?;
                let se2 = coupling.se() * coupling.se();
                let b = if with_b {
                    0.5 * (f.b.energy() + tails.magnetic_curl)
                } else {
                    0.0
                };
                (0.5 * se2 * (f.e.energy() + tails.electric), b)
            };
            let relativistic_energy = ens.relativistic_energy();
            Ok(LedgerRow {
                time: s.time(),
                mass: ens.total_weight(),
                grid_mass: dep.grid_mass(),
                escaped_weight: dep.escaped_weight,
                relativistic_energy,
                electric_pe,
                magnetic_pe,
                electric_pe_grid,
                magnetic_pe_grid,
                e_field_energy,
                b_field_energy,
                total_energy: relativistic_energy + coupling.se() * electric_pe,
                casimirs: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyLedger {
        coupling,
        casimir_ids: Vec::new(),
        rows,
    })
}

impl EnergyLedger {
    /// Appends a Casimir column with one value per row.
    pub fn attach_casimir(&mut self, id: impl Into<String>, values: &[f64]) -> Result<()> {
        if values.len() != self.rows.len() {
            return invalid(format!(
                "{} Casimir values for {} ledger rows",
                values.len(),
                self.rows.len()
            ));
        }
        self.casimir_ids.push(id.into());
        for (r, &v) in self.rows.iter_mut().zip(values) {
            r.casimirs.push(v);
        }
        Ok(())
    }

    pub fn header(&self) -> Vec<String> {
        LEDGER_COLUMNS
            .iter()
            .map(|c| c.to_string())
            .chain(self.casimir_ids.iter().map(|id| format!("casimir_{id}")))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        out.write_record(self.header()).map_err(csv_err)?;
        for r in &self.rows {
            let fixed = [
                r.time,
                r.mass,
                r.grid_mass,
                r.escaped_weight,
                r.relativistic_energy,
                r.electric_pe,
                r.magnetic_pe,
                r.electric_pe_grid,
                r.magnetic_pe_grid,
                r.e_field_energy,
                r.b_field_energy,
                r.total_energy,
            ];
            out.write_record(fixed.iter().chain(&r.casimirs).map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a ledger written by `write_csv`; the coupling is not stored in the
    /// file and must be supplied.
    pub fn read_csv<R: Read>(r: R, coupling: Coupling) -> Result<EnergyLedger> {
        let mut rd = csv::Reader::from_reader(r);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        let header: Vec<String> = rd
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(String::from)
            .collect();
        if header.len() < LEDGER_COLUMNS.len() || header[..LEDGER_COLUMNS.len()] != LEDGER_COLUMNS {
            return Err(Error::Format("unexpected ledger header".into()));
        }
        let casimir_ids = header[LEDGER_COLUMNS.len()..]
            .iter()
            .map(|h| {
                h.strip_prefix("casimir_")
                    .map(String::from)
                    .ok_or_else(|| Error::Format(format!("unknown column {h}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let v = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(LedgerRow {
                time: v[0],
                mass: v[1],
                grid_mass: v[2],
                escaped_weight: v[3],
                relativistic_energy: v[4],
                electric_pe: v[5],
                magnetic_pe: v[6],
                electric_pe_grid: v[7],
                magnetic_pe_grid: v[8],
                e_field_energy: v[9],
                b_field_energy: v[10],
                total_energy: v[11],
                casimirs: v[12..].to_vec(),
            });
        }
        Ok(EnergyLedger {
            coupling,
            casimir_ids,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    pub time: f64,
    /// `REL + sigma_E PE_elec`.
    pub energy: f64,
    /// `(E_0 - energy) / |E_0|`; negative when the energy grew.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub sigma_e: i8,
    pub sigma_b: i8,
    pub tolerance: f64,
    pub initial_energy: f64,
    pub rows: Vec<InequalityRow>,
    /// Largest relative growth of the energy above its initial value.
    pub max_excess: f64,
    /// Largest relative deviation in either direction.
    pub max_defect: f64,
    /// Whether the equality (not just the inequality) was required.
    pub equality_checked: bool,
    /// Largest `REL(t) / E_0 - 1`, reported for repulsive runs.
    pub relativistic_excess: f64,
    pub passed: bool,
}

/// Checks `REL(t) + sigma_E PE(t) <= REL(0) + sigma_E PE(0)` up to the relative
/// tolerance `tol` at every row, and the equality when `sigma_B = 0`.
pub fn energy_inequality_check(ledger: &EnergyLedger, tol: f64) -> Result<InequalityReport> {
    if ledger.rows.len() < 2 {
        return invalid(format!(
            "ledger needs at least 2 snapshots, has {}",
            ledger.rows.len()
        ));
    }
    if !(tol >= 0.0) {
        return invalid(format!("tolerance must be nonnegative, got {tol}"));
    }
    let se = ledger.coupling.se();
    let energy = |r: &LedgerRow| r.relativistic_energy + se * r.electric_pe;
    let e0 = energy(&ledger.rows[0]);
    let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
    let rows: Vec<InequalityRow> = ledger
        .rows
        .iter()
        .map(|r| {
            let e = energy(r);
            InequalityRow {
                time: r.time,
                energy: e,
                margin: (e0 - e) / scale,
            }
        })
        .collect();
    let max_excess = rows.iter().map(|r| -r.margin).fold(0.0, f64::max);
    let max_defect = rows.iter().map(|r| r.margin.abs()).fold(0.0, f64::max);
    let relativistic_excess = ledger
        .rows
        .iter()
        .map(|r| r.relativistic_energy / scale - e0 / scale)
        .fold(f64::MIN, f64::max);
    let equality_checked = ledger.coupling.sigma_b == 0;
    let mut passed = max_excess <= tol && max_excess.is_finite();
    if equality_checked {
        passed &= max_defect <= tol;
    }
    if ledger.coupling.sigma_e == 1 {
        passed &= relativistic_excess <= tol;
    }
    Ok(InequalityReport {
        sigma_e: ledger.coupling.sigma_e,
        sigma_b: ledger.coupling.sigma_b,
        tolerance: tol,
        initial_energy: e0,
        rows,
        max_excess,
        max_defect,
        equality_checked,
        relativistic_excess,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteEnergyReport {
    pub t_final: f64,
    /// Trapezoidal `int_0^T (REL + 1/2 int |E|^2 + 1/2 int |B|^2) dt`.
    pub value: f64,
    pub passed: bool,
}

pub fn finite_energy_criterion(ledger: &EnergyLedger, t_final: f64) -> Result<FiniteEnergyReport> {
    if !(t_final >= 0.0) {
        return invalid(format!("final time must be nonnegative, got {t_final}"));
    }
    let slack = 1e-9 * t_final.max(1.0);
    match (ledger.rows.first(), ledger.rows.last()) {
        (Some(a), Some(b)) if a.time <= slack && b.time >= t_final - slack => {}
        _ => return invalid(format!("ledger does not cover [0, {t_final}]")),
    }
    let g = |r: &LedgerRow| r.relativistic_energy + r.e_field_energy + r.b_field_energy;
    let rows: Vec<&LedgerRow> = ledger
        .rows
        .iter()
        .filter(|r| r.time <= t_final + slack)
        .collect();
    let value: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[1].time - w[0].time) * (g(w[0]) + g(w[1])))
        .sum();
    Ok(FiniteEnergyReport {
        t_final,
        value,
        passed: value.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, rel: f64, pe: f64) -> LedgerRow {
        LedgerRow {
            time: t,
            mass: 1.0,
            grid_mass: 1.0,
            escaped_weight: 0.0,
            relativistic_energy: rel,
            electric_pe: pe,
            magnetic_pe: 0.0,
            electric_pe_grid: pe,
            magnetic_pe_grid: 0.0,
            e_field_energy: 0.0,
            b_field_energy: 0.0,
            total_energy: rel + pe,
            casimirs: Vec::new(),
        }
    }

    fn ledger(se: i8, sb: i8, rows: Vec<LedgerRow>) -> EnergyLedger {
        EnergyLedger {
            coupling: Coupling::new(se, sb).unwrap(),
            casimir_ids: Vec::new(),
            rows,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut l = ledger(
            1,
            0,
            vec![row(0.0, 1.1, 0.1 + 0.2), row(0.5, 1.0 / 3.0, 1e-300)],
        );
        l.attach_casimir("square", &[0.25, 0.2500000001]).unwrap();
        assert!(l.attach_casimir("bad", &[1.0]).is_err());
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,mass,grid_mass,"));
        assert!(text.lines().next().unwrap().ends_with(",casimir_square"));
        assert_eq!(EnergyLedger::read_csv(&buf[..], l.coupling).unwrap(), l);
    }

    #[test]
    fn inequality_requires_two_rows() {
        assert!(energy_inequality_check(&ledger(0, 0, vec![row(0.0, 1.0, 0.0)]), 0.01).is_err());
    }

    #[test]
    fn equality_enforced_only_without_magnetism() {
        let rows = vec![row(0.0, 2.0, 0.5), row(0.1, 1.9, 0.5)];
        let r = energy_inequality_check(&ledger(1, 1, rows.clone()), 0.01).unwrap();
        assert!(r.passed && !r.equality_checked);
        let r = energy_inequality_check(&ledger(1, 0, rows), 0.01).unwrap();
        assert!(!r.passed && r.max_defect > 0.03);
    }

    #[test]
    fn growth_fails_inequality() {
        let rows = vec![row(0.0, 2.0, 0.0), row(0.1, 2.1, 0.0)];
        let r = energy_inequality_check(&ledger(-1, 1, rows), 0.01).unwrap();
        assert!(!r.passed);
        assert!((r.max_excess - 0.05).abs() < 1e-12);
    }

    #[test]
    fn finite_energy_of_constant_integrand() {
        let l = ledger(
            0,
            0,
            (0..=4).map(|k| row(0.25 * k as f64, 3.0, 0.0)).collect(),
        );
        let r = finite_energy_criterion(&l, 1.0).unwrap();
        assert_eq!(r.value, 3.0);
        assert!(r.passed);
        assert!(finite_energy_criterion(&l, 2.0).is_err());
        let empty = ledger(0, 0, vec![row(0.0, 0.0, 0.0), row(1.0, 0.0, 0.0)]);
        assert_eq!(finite_energy_criterion(&empty, 1.0).unwrap().value, 0.0);
    }
}
