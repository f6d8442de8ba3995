//! Field-energy identities and potential energies of a uniform unit ball.

use std::f64::consts::PI;

use vlasov_core::diagnostics::{energy_identities, mollified_energy_convergence, potential_energies};
use vlasov_core::fields::grid_mollifier;
use vlasov_core::kernel::MollifierShape;
use vlasov_core::phase::grid::{DepositGrid, GridGeometry, ScalarGrid, VectorGrid};
use vlasov_core::Vec3;

/// Self-energy `1/2 int (H * rho) rho` of a unit-mass ball of radius 1.
const BALL_SELF_ENERGY: f64 = 3.0 / (20.0 * PI);

fn unit_ball(half_width: f64, n: usize) -> DepositGrid {
    let g = GridGeometry::cube(Vec3::ZERO, half_width, n).unwrap();
    let density = 3.0 / (4.0 * PI);
    let rho = ScalarGrid::from_fn_averaged(g, 6, |x| if x.norm_squared() < 1.0 { density } else { 0.0 });
    DepositGrid::from_densities(rho, VectorGrid::zeros(g)).unwrap()
}

#[test]
fn unit_ball_identity_at_48() {
    let r = energy_identities(&unit_ball(3.0, 48), MollifierShape::UniformBall, 0.01).unwrap();
    assert!(r.electric_discrepancy <= 0.05, "{r:?}");
    assert!((0.5 * r.h_rho_rho - BALL_SELF_ENERGY).abs() <= 0.05 * BALL_SELF_ENERGY);
    assert!((0.5 * r.e_squared - BALL_SELF_ENERGY).abs() <= 0.05 * BALL_SELF_ENERGY);
    assert_eq!((r.h_j_j, r.curl_a_squared, r.div_a_squared), (0.0, 0.0, 0.0));
}

#[test]
fn unit_ball_potential_energy() {
    let d = unit_ball(3.0, 48);
    let (e, m) = potential_energies(&d, grid_mollifier(d.geometry(), MollifierShape::UniformBall).unwrap());
    assert!((e - BALL_SELF_ENERGY).abs() <= 0.05 * BALL_SELF_ENERGY, "{e}");
    assert_eq!(m, 0.0);
}

#[test]
fn mollified_energy_differences_shrink_as_the_level_doubles() {
    let d = unit_ball(1.05, 36);
    assert!(d.geometry().spacing < 1.0 / 16.0);
    let t = mollified_energy_convergence(&d, &[4, 8, 16], MollifierShape::UniformBall).unwrap();
    assert!(t.differences_decrease, "{t:?}");
    assert!(t.errors_decrease, "{t:?}");
    for row in &t.rows {
        assert!(row.electric_pe < t.reference_electric);
    }
}
