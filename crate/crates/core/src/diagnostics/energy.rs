//! Energy functionals of ensembles and deposited grids, the field-energy
//! identities and the mollified-energy convergence table.

use serde::{Deserialize, Serialize};

use crate::dynamics::history::FieldHistory;
use crate::error::{invalid, Result};
use crate::fields::{
    eval_potential_grid, field_tails, grid_fields, grid_mollifier, grid_potential_pairings,
    potential_sums, FieldTails, Moment, Sources,
};
use crate::kernel::{KernelFamily, Mollifier, MollifierShape, FOUR_PI};
use crate::phase::ensemble::Ensemble;
use crate::phase::grid::{
    deposit, grid_curl, grid_div, DepositGrid, GridGeometry, ScalarGrid, VectorGrid,
};
use crate::phase::profile::InitialProfile;
use crate::vec3::Vec3;

/// `sum w sqrt(1 + |v|^2)`.
pub fn relativistic_energy(ensemble: &Ensemble) -> f64 {
    ensemble.relativistic_energy()
}

/// Deposited `(rho, J)` of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePair {
    pub time: f64,
    pub deposit: DepositGrid,
}

/// Deposits every snapshot of `history` on `geometry`.
pub fn effective_series(
    history: &FieldHistory,
    geometry: &GridGeometry,
) -> Result<Vec<EffectivePair>> {
    history
        .snapshots()
        .iter()
        .map(|s| {
            Ok(EffectivePair {
                time: s.time(),
                deposit: deposit(&s.ensemble, geometry)?,
            })
        })
        .collect()
}

/// `(1/2 sum (H * rho) rho h^3, 1/2 sum (H * J) . J h^3)`, magnitudes without
/// coupling signs.
pub fn potential_energies(deposit: &DepositGrid, mollifier: Mollifier) -> (f64, f64) {
    let (e, m) = grid_potential_pairings(deposit, mollifier);
    (0.5 * e, 0.5 * m)
}

/// Pair energies `1/2 sum_ij w_i w_j H_R(x_i - x_j)` and
/// `1/2 sum_ij (w v_hat)_i . (w v_hat)_j H_R(x_i - x_j)`, self terms included.
pub fn particle_potential_energies(ensemble: &Ensemble, mollifier: Mollifier) -> (f64, f64) {
    if ensemble.is_empty() {
        return (0.0, 0.0);
    }
    let sources = Sources::from_ensemble(ensemble);
    let xs: Vec<Vec3> = ensemble.particles.iter().map(|p| p.x).collect();
    let with_vector = sources.has_vector_weights();
    let sums = potential_sums(
        &sources,
        &xs,
        KernelFamily::with_mollifier(mollifier),
        with_vector,
    );
    let mut e = 0.0;
    let mut m = 0.0;
    for (p, (phi, a)) in ensemble.particles.iter().zip(sums) {
        e += p.w * phi;
        m += a.dot(crate::kernel::hat(p.v) * p.w);
    }
    (0.5 * e, 0.5 * m)
}

/// Region covered by the node cubes of `g`.
pub(crate) fn node_region(g: &GridGeometry) -> (Vec3, Vec3) {
    let half = Vec3::new(0.5, 0.5, 0.5) * g.spacing;
    (g.origin - half, g.upper() + half)
}

/// Total charge, total current and centre of charge of a deposit.
pub(crate) fn moments(deposit: &DepositGrid) -> (f64, Vec3, Vec3) {
    let g = deposit.geometry();
    let vol = g.cell_volume();
    let mut m = 0.0;
    let mut c = Vec3::ZERO;
    for n in 0..g.len() {
        let r = deposit.rho.values[n];
        m += r;
        c += g.node_flat(n) * r;
    }
    let (lo, hi) = node_region(g);
    let center = if m > 0.0 {
        c * (1.0 / m)
    } else {
        (lo + hi) * 0.5
    };
    (m * vol, deposit.current.integral(), center)
}

/// Field energy outside the node region, far-field approximation.
pub fn deposit_tails(deposit: &DepositGrid) -> Result<FieldTails> {
    let (lo, hi) = node_region(deposit.geometry());
    let (charge, current, center) = moments(deposit);
    field_tails(lo, hi, center, charge, current)
}

/// The quantities of the two field-energy identities on one deposit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `int |E|^2` (grid sum plus exterior tail).
    pub e_squared: f64,
    /// `int (H * rho) rho`.
    pub h_rho_rho: f64,
    /// `int |curl (H * J)|^2 = int |B|^2`.
    pub curl_a_squared: f64,
    /// `int (H * J) . J`.
    pub h_j_j: f64,
    /// `int (div (H * J))^2`.
    pub div_a_squared: f64,
    /// `|e_squared - h_rho_rho| / h_rho_rho`.
    pub electric_discrepancy: f64,
    /// `|curl_a_squared + div_a_squared - h_j_j| / h_j_j`.
    pub magnetic_discrepancy: f64,
    /// `int |B|^2 <= int (H * J) . J` up to `tolerance`.
    pub magnetic_inequality_holds: bool,
    pub tolerance: f64,
    pub tails: FieldTails,
    /// Monopole bound `M^2 / (4 pi d)` on the exterior electric energy, `d` the
    /// distance from the centre of charge to the nearest face.
    pub monopole_tail_bound: f64,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn grid_energy(f: &ScalarGrid) -> f64 {
    f.values.iter().map(|v| v * v).sum::<f64>() * f.geometry.cell_volume()
}

/// Evaluates both identities with the grid mollifier of `shape` and checks the
/// magnetic one as an inequality with relative tolerance `tol`.
pub fn energy_identities(
    deposit: &DepositGrid,
    shape: MollifierShape,
    tol: f64,
) -> Result<IdentityReport> {
    let g = *deposit.geometry();
    let m = grid_mollifier(&g, shape)?;
    let tails = deposit_tails(deposit)?;
    let (h_rho_rho, h_j_j) = grid_potential_pairings(deposit, m);
    let fields = grid_fields(deposit, m, false);
    let e_squared = fields.e.energy() + tails.electric;
    let has_current = deposit.current.values.iter().any(|j| *j != Vec3::ZERO);
    let (curl_a_squared, div_a_squared) = if has_current {
        let a = eval_potential_grid(deposit, Moment::Current, m);
        let a = a.as_vector().expect("current potential is a vector");
        (
            grid_curl(a)?.energy() + tails.magnetic_curl,
            grid_energy(&grid_div(a)?) + tails.magnetic_div,
        )
    } else {
        (0.0, 0.0)
    };
    let (lo, hi) = node_region(&g);
    let (charge, _, center) = moments(deposit);
    let d = (0..3)
        .map(|k| (center[k] - lo[k]).min(hi[k] - center[k]))
        .fold(f64::INFINITY, f64::min);
    let monopole_tail_bound = if charge == 0.0 {
        0.0
    } else {
        charge * charge / (FOUR_PI * d)
    };
    Ok(IdentityReport {
        e_squared,
        h_rho_rho,
        curl_a_squared,
        h_j_j,
        div_a_squared,
        electric_discrepancy: rel_gap(e_squared, h_rho_rho),
        magnetic_discrepancy: rel_gap(curl_a_squared + div_a_squared, h_j_j),
        magnetic_inequality_holds: curl_a_squared <= h_j_j + tol * h_j_j.abs()
            && h_j_j >= -tol * h_rho_rho.abs(),
        tolerance: tol,
        tails,
        monopole_tail_bound,
    })
}

/// Grid densities of a profile: node values of `(rho, J)` from velocity
/// quadrature with `nv` cells per axis.
pub fn profile_deposit(
    profile: &InitialProfile,
    geometry: &GridGeometry,
    nv: usize,
) -> Result<DepositGrid> {
    if nv == 0 {
        return invalid("velocity quadrature needs at least one cell");
    }
    let nodes = geometry.nodes();
    let moments: Vec<(f64, Vec3)> = {
        use rayon::prelude::*;
        nodes
            .par_iter()
            .map(|&x| profile.velocity_moments(x, nv))
            .collect()
    };
    let rho = ScalarGrid {
        geometry: *geometry,
        values: moments.iter().map(|m| m.0).collect(),
    };
    let current = VectorGrid {
        geometry: *geometry,
        values: moments.iter().map(|m| m.1).collect(),
    };
    DepositGrid::from_densities(rho, current)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: u32,
    /// Effective radius `max(1/k, h)`.
    pub radius: f64,
    pub electric_pe: f64,
    pub magnetic_pe: f64,
    /// `|PE(k) - PE(previous k)|` for the electric energy.
    pub difference: Option<f64>,
    /// `|PE(k) - PE(infinity)|`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Energies with the grid mollifier of radius `h`.
    pub reference_electric: f64,
    pub reference_magnetic: f64,
    pub differences_decrease: bool,
    pub errors_decrease: bool,
}

/// Potential energies of a fixed deposit with `H * eta^k` for each level `k`,
/// the mollifier radius never falling below one grid spacing.
pub fn mollified_energy_convergence(
    deposit: &DepositGrid,
    levels: &[u32],
    shape: MollifierShape,
) -> Result<ConvergenceTable> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] == 0 {
        return invalid("levels must be positive and strictly increasing");
    }
    let h = deposit.geometry().spacing;
    let (reference_electric, reference_magnetic) =
        potential_energies(deposit, Mollifier::new(h, shape)?);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    for &k in levels {
        let radius = (1.0 / k as f64).max(h);
        let (e, m) = potential_energies(deposit, Mollifier::new(radius, shape)?);
        rows.push(ConvergenceRow {
            level: k,
            radius,
            electric_pe: e,
            magnetic_pe: m,
            difference: rows.last().map(|r| (e - r.electric_pe).abs()),
            error: (e - reference_electric).abs(),
        });
    }
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.difference).collect();
    let errors_decrease = rows.windows(2).all(|w| w[1].error <= w[0].error);
    Ok(ConvergenceTable {
        differences_decrease: diffs.windows(2).all(|w| w[1] <= w[0]),
        errors_decrease,
        rows,
        reference_electric,
        reference_magnetic,
    })
}
