//! Self-consistent fields `E = sigma_E K * rho`, `B = sigma_B J x K`, their
//! potentials, field energies and the phase-space vector field `b`.

pub mod direct;
pub mod grid;
pub mod tail;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::{hat, KernelFamily, MollifierSpec};
use crate::phase::ensemble::Ensemble;
use crate::phase::lattice::PhaseBox;
use crate::vec3::{PhasePoint, Vec3};

pub use direct::{kernel_sums, potential_sums, SourceSegment, Sources};
pub use grid::{
    eval_potential_grid, field_energy, grid_fields, grid_mollifier, grid_potential_pairings,
    grid_sources, GridFields, GridPotential, Moment,
};
pub use tail::{exterior_power_integral, field_tails, FieldTails};

/// Coupling signs of the system: `sigma_E` in {-1, 0, 1}, `sigma_B` in {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub sigma_e: i8,
    pub sigma_b: i8,
}

impl Coupling {
    pub const FREE: Coupling = Coupling {
        sigma_e: 0,
        sigma_b: 0,
    };

    pub fn new(sigma_e: i8, sigma_b: i8) -> Result<Self> {
        if !(-1..=1).contains(&sigma_e) {
            return invalid(format!("sigma_E must be -1, 0 or 1, got {sigma_e}"));
        }
        if !(0..=1).contains(&sigma_b) {
            return invalid(format!("sigma_B must be 0 or 1, got {sigma_b}"));
        }
        Ok(Coupling { sigma_e, sigma_b })
    }

    pub fn is_free(&self) -> bool {
        self.sigma_e == 0 && self.sigma_b == 0
    }

    pub fn se(&self) -> f64 {
        self.sigma_e as f64
    }

    pub fn sb(&self) -> f64 {
        self.sigma_b as f64
    }
}

/// `E` and `B` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSample {
    pub e: Vec3,
    pub b: Vec3,
}

impl FieldSample {
    pub const ZERO: FieldSample = FieldSample {
        e: Vec3::ZERO,
        b: Vec3::ZERO,
    };

    pub fn is_finite(&self) -> bool {
        self.e.is_finite() && self.b.is_finite()
    }

    /// `(1 - s) self + s other`.
    pub fn lerp(&self, other: &FieldSample, s: f64) -> FieldSample {
        FieldSample {
            e: self.e * (1.0 - s) + other.e * s,
            b: self.b * (1.0 - s) + other.b * s,
        }
    }
}

/// Fields of `sources` at `targets` with the given coupling and kernel.
pub fn eval_fields(
    sources: &Sources,
    targets: &[Vec3],
    coupling: Coupling,
    kernel: KernelFamily,
) -> Vec<FieldSample> {
    if coupling.is_free() {
        return vec![FieldSample::ZERO; targets.len()];
    }
    let with_b = coupling.sigma_b != 0;
    kernel_sums(sources, targets, kernel, with_b)
        .into_iter()
        .map(|(e, b)| FieldSample {
            e: if coupling.sigma_e == 0 {
                Vec3::ZERO
            } else {
                e * coupling.se()
            },
            b: if with_b { b } else { Vec3::ZERO },
        })
        .collect()
}

/// `E(x) = sigma_E sum w_j K^n(x - x_j)`, `B(x) = sigma_B sum w_j v_hat_j x K^n(x - x_j)`.
pub fn eval_fields_direct(
    ensemble: &Ensemble,
    targets: &[Vec3],
    coupling: Coupling,
    spec: &MollifierSpec,
) -> Result<Vec<FieldSample>> {
    if ensemble.is_empty() {
        return invalid("field evaluation needs a nonempty ensemble");
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return invalid(format!("target {i} is not finite"));
    }
    Ok(eval_fields(
        &Sources::from_ensemble(ensemble),
        targets,
        coupling,
        KernelFamily::mollified(spec),
    ))
}

/// `b(x, v) = (v_hat, E + v_hat x B)`, returned as a phase-space vector.
#[inline]
pub fn lorentz_rhs(z: PhasePoint, e: Vec3, b: Vec3) -> PhasePoint {
    let u = hat(z.v);
    PhasePoint::new(u, e + u.cross(b))
}

/// Largest central-difference six-dimensional divergence of
/// `b = (v_hat, E(x) + v_hat x B(x))` over `samples` random points of `region`.
pub fn divergence_check_b<F>(
    fields: F,
    region: &PhaseBox,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(Vec3) -> FieldSample,
{
    if !(h > 0.0) {
        return invalid(format!("step must be positive, got {h}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let z = PhasePoint::from_array(std::array::from_fn(|d| {
            rng.random_range(region.lo[d]..region.hi[d])
        }));
        let rhs = |z: PhasePoint| {
            let f = fields(z.x);
            lorentz_rhs(z, f.e, f.b).to_array()
        };
        let mut div = 0.0;
        for d in 0..6 {
            let mut p = z.to_array();
            let mut m = z.to_array();
            p[d] += h;
            m[d] -= h;
            div +=
                (rhs(PhasePoint::from_array(p))[d] - rhs(PhasePoint::from_array(m))[d]) / (2.0 * h);
        }
        worst = worst.max(div.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::MollifierShape;
    use crate::phase::ensemble::Particle;
    use std::f64::consts::PI;

    fn level1() -> MollifierSpec {
        MollifierSpec::new(1, MollifierShape::UniformBall).unwrap()
    }

    #[test]
    fn coupling_validation() {
        assert!(Coupling::new(2, 0).is_err());
        assert!(Coupling::new(0, -1).is_err());
        assert!(Coupling::new(-1, 1).is_ok());
    }

    #[test]
    fn resting_particle_field() {
        let ens = Ensemble::new(vec![Particle::at_rest(Vec3::ZERO, 1.0)], 0.0).unwrap();
        let f = eval_fields_direct(
            &ens,
            &[Vec3::new(0.0, 1.0, 0.0)],
            Coupling::new(1, 1).unwrap(),
            &level1(),
        )
        .unwrap();
        assert!((f[0].e - Vec3::new(0.0, 1.0 / (4.0 * PI), 0.0)).norm() < 1e-17);
        assert_eq!(f[0].b, Vec3::ZERO);
    }

    #[test]
    fn moving_particle_magnetic_field() {
        let v = Vec3::new(3.0, 0.0, 0.0);
        let u = 3.0 / 10f64.sqrt();
        let ens = Ensemble::new(vec![Particle::new(Vec3::ZERO, v, 1.0)], 0.0).unwrap();
        let target = [Vec3::new(0.0, 1.0, 0.0)];
        let f = eval_fields_direct(&ens, &target, Coupling::new(1, 1).unwrap(), &level1()).unwrap();
        // (u, 0, 0) x (0, 1/(4 pi), 0) = (0, 0, u/(4 pi))
        assert!((f[0].b - Vec3::new(0.0, 0.0, u / (4.0 * PI))).norm() < 1e-16);
        let off =
            eval_fields_direct(&ens, &target, Coupling::new(1, 0).unwrap(), &level1()).unwrap();
        assert_eq!(off[0].b, Vec3::ZERO);
    }

    #[test]
    fn mirror_pair_cancels_at_origin() {
        let ens = Ensemble::new(
            vec![
                Particle::at_rest(Vec3::new(0.3, -0.2, 0.1), 1.0),
                Particle::at_rest(Vec3::new(-0.3, 0.2, -0.1), 1.0),
            ],
            0.0,
        )
        .unwrap();
        let f = eval_fields_direct(&ens, &[Vec3::ZERO], Coupling::new(1, 1).unwrap(), &level1())
            .unwrap();
        assert_eq!(f[0].e, Vec3::ZERO);
    }

    #[test]
    fn sign_flips_with_sigma_e() {
        let ens = Ensemble::new(vec![Particle::at_rest(Vec3::ZERO, 1.0)], 0.0).unwrap();
        let t = [Vec3::new(0.5, 0.5, 0.0)];
        let plus = eval_fields_direct(&ens, &t, Coupling::new(1, 0).unwrap(), &level1()).unwrap();
        let minus = eval_fields_direct(&ens, &t, Coupling::new(-1, 0).unwrap(), &level1()).unwrap();
        assert_eq!(plus[0].e, -minus[0].e);
        let none = eval_fields_direct(&ens, &t, Coupling::new(0, 1).unwrap(), &level1()).unwrap();
        assert_eq!(none[0].e, Vec3::ZERO);
    }

    #[test]
    fn lorentz_rhs_examples() {
        let r = lorentz_rhs(PhasePoint::default(), Vec3::ZERO, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(r, PhasePoint::default());
        let r = lorentz_rhs(
            PhasePoint::new(Vec3::ZERO, Vec3::new(3.0, 0.0, 0.0)),
            Vec3::ZERO,
            Vec3::new(0.0, 0.0, 1.0),
        );
        let u = 3.0 / 10f64.sqrt();
        assert!((r.x - Vec3::new(u, 0.0, 0.0)).norm() < 1e-16);
        assert!((r.v - Vec3::new(0.0, -u, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn divergence_of_free_and_constant_fields() {
        let region = PhaseBox::new([-1.0; 6], [1.0; 6]).unwrap();
        let free = divergence_check_b(|_| FieldSample::ZERO, &region, 1e-4, 50, 1).unwrap();
        assert_eq!(free, 0.0);
        let constant_b = |_| FieldSample {
            e: Vec3::ZERO,
            b: Vec3::new(0.3, -1.0, 0.7),
        };
        assert!(divergence_check_b(constant_b, &region, 1e-4, 50, 2).unwrap() <= 1e-8);
        assert!(divergence_check_b(constant_b, &region, 0.0, 5, 2).is_err());
    }
}
