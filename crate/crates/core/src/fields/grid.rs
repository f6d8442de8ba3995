//! Potentials and fields of deposited grid densities by direct summation over
//! the occupied nodes.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::direct::{kernel_sums, potential_sums, SourceSegment, Sources};
use crate::kernel::{KernelFamily, Mollifier, MollifierShape};
use crate::phase::grid::{DepositGrid, GridGeometry, ScalarGrid, VectorGrid};
use crate::vec3::Vec3;

/// Mollifier of radius one grid spacing, used for grid self-interactions.
pub fn grid_mollifier(geometry: &GridGeometry, shape: MollifierShape) -> Result<Mollifier> {
    Mollifier::new(geometry.spacing, shape)
}

/// Occupied nodes as point sources with `w = rho h^3` and `q = J h^3`, in node order.
pub fn grid_sources(deposit: &DepositGrid) -> Sources {
    let g = deposit.geometry();
    let vol = g.cell_volume();
    let mut seg = SourceSegment::default();
    for n in 0..g.len() {
        let r = deposit.rho.values[n];
        let j = deposit.current.values[n];
        if r != 0.0 || j != Vec3::ZERO {
            seg.push(g.node_flat(n), r * vol, j * vol);
        }
    }
    Sources::from_segment(seg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Rho,
    Current,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridPotential {
    /// `H * rho`.
    Electric(ScalarGrid),
    /// `H * J`.
    Magnetic(VectorGrid),
}

impl GridPotential {
    pub fn as_scalar(&self) -> Option<&ScalarGrid> {
        match self {
            GridPotential::Electric(s) => Some(s),
            GridPotential::Magnetic(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&VectorGrid> {
        match self {
            GridPotential::Magnetic(v) => Some(v),
            GridPotential::Electric(_) => None,
        }
    }
}

/// `(H_R * mu)` at every node, `mu` being `rho` or `J`, by a direct double sum
/// with the mollified potential `H_R` (finite on the diagonal).
pub fn eval_potential_grid(
    deposit: &DepositGrid,
    which: Moment,
    mollifier: Mollifier,
) -> GridPotential {
    let g = *deposit.geometry();
    let sources = grid_sources(deposit);
    let targets = g.nodes();
    let kernel = KernelFamily::with_mollifier(mollifier);
    match which {
        Moment::Rho => {
            let values = potential_sums(&sources, &targets, kernel, false)
                .into_iter()
                .map(|(p, _)| p)
                .collect();
            GridPotential::Electric(ScalarGrid {
                geometry: g,
                values,
            })
        }
        Moment::Current => {
            let values = potential_sums(&sources, &targets, kernel, true)
                .into_iter()
                .map(|(_, a)| a)
                .collect();
            GridPotential::Magnetic(VectorGrid {
                geometry: g,
                values,
            })
        }
    }
}

/// `(int (H_R * rho) rho, int (H_R * J) . J)` evaluated only at occupied nodes.
pub fn grid_potential_pairings(deposit: &DepositGrid, mollifier: Mollifier) -> (f64, f64) {
    let g = deposit.geometry();
    let vol = g.cell_volume();
    let sources = grid_sources(deposit);
    let seg = &sources.segments[0];
    let targets: Vec<Vec3> = (0..seg.len()).map(|j| seg.position(j)).collect();
    let occupied: Vec<usize> = (0..g.len())
        .filter(|&n| deposit.rho.values[n] != 0.0 || deposit.current.values[n] != Vec3::ZERO)
        .collect();
    let with_vector = sources.has_vector_weights();
    let sums = potential_sums(
        &sources,
        &targets,
        KernelFamily::with_mollifier(mollifier),
        with_vector,
    );
    let mut electric = 0.0;
    let mut magnetic = 0.0;
    for (&n, (p, a)) in occupied.iter().zip(sums) {
        electric += p * deposit.rho.values[n];
        magnetic += a.dot(deposit.current.values[n]);
    }
    (electric * vol, magnetic * vol)
}

/// `E = K_R * rho` and `B = J x K_R` (unit couplings) at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFields {
    pub e: VectorGrid,
    pub b: VectorGrid,
}

pub fn grid_fields(deposit: &DepositGrid, mollifier: Mollifier, with_b: bool) -> GridFields {
    let g = *deposit.geometry();
    let sources = grid_sources(deposit);
    let sums = kernel_sums(
        &sources,
        &g.nodes(),
        KernelFamily::with_mollifier(mollifier),
        with_b,
    );
    let (e, b): (Vec<Vec3>, Vec<Vec3>) = sums.into_iter().unzip();
    GridFields {
        e: VectorGrid {
            geometry: g,
            values: e,
        },
        b: VectorGrid {
            geometry: g,
            values: b,
        },
    }
}

/// `sum |F|^2 h^3` (callers apply the factor 1/2).
pub fn field_energy(field: &VectorGrid) -> f64 {
    field.energy()
}
