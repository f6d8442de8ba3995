//! Phase-space representations of the distribution `f`: analytic profiles,
//! particle ensembles and deposited position-space grids.

pub mod ensemble;
pub mod grid;
pub mod lattice;
pub mod profile;

pub use ensemble::{
    lattice_per_dim, lattice_total_weight, sample_ensemble, sample_on_lattice, Ensemble, Particle,
    SamplingMode, DEFAULT_LATTICE_PER_DIM,
};
pub use grid::{
    deposit, grid_curl, grid_div, grid_grad, DepositGrid, GridGeometry, GridSidecar, ScalarGrid,
    VectorGrid,
};
pub use lattice::{PhaseBox, PhaseLattice};
pub use profile::{
    band_decompose, Band, BandDecomposition, GaussianLump, InitialProfile, PhaseTable, ProfileShape,
};
