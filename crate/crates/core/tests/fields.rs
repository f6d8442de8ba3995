//! Field evaluation: superposition, divergence-free transport and the
//! magnetic energy inequality on deposited currents.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlasov_core::diagnostics::energy_identities;
use vlasov_core::fields::{divergence_check_b, eval_fields, eval_fields_direct, Coupling, Sources};
use vlasov_core::kernel::{KernelFamily, MollifierShape, MollifierSpec};
use vlasov_core::phase::{deposit, Ensemble, GridGeometry, Particle, PhaseBox};
use vlasov_core::Vec3;

fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, spread: f64, speed: f64) -> Ensemble {
    let mut cube = |r: f64| Vec3::from_array(std::array::from_fn(|_| rng.random_range(-r..r)));
    let particles = (0..n)
        .map(|_| {
            let x = cube(spread);
            let v = cube(speed);
            let w = 0.55 + 0.45 * cube(1.0).x;
            Particle::new(x, v, w)
        })
        .collect();
    Ensemble::new(particles, 0.0).unwrap()
}

fn ensemble_strategy() -> impl Strategy<Value = Ensemble> {
    prop::collection::vec(
        (
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform3(-3.0f64..3.0),
            0.01f64..1.0,
        ),
        1..40,
    )
    .prop_map(|v| {
        Ensemble::new(
            v.into_iter()
                .map(|(x, u, w)| Particle::new(Vec3::from_array(x), Vec3::from_array(u), w))
                .collect(),
            0.0,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fields_superpose_over_source_segments(a in ensemble_strategy(), b in ensemble_strategy()) {
        let targets = [Vec3::new(0.3, -0.2, 0.9), Vec3::new(1.5, 1.5, -1.5), Vec3::ZERO];
        let kernel = KernelFamily::mollified(&MollifierSpec::new(4, MollifierShape::WendlandC2).unwrap());
        let c = Coupling::new(1, 1).unwrap();
        let both = eval_fields(&Sources::from_parts(&[&a, &b]), &targets, c, kernel);
        let fa = eval_fields(&Sources::from_ensemble(&a), &targets, c, kernel);
        let fb = eval_fields(&Sources::from_ensemble(&b), &targets, c, kernel);
        for k in 0..targets.len() {
            let scale = 1.0 + fa[k].e.norm() + fb[k].e.norm() + fa[k].b.norm() + fb[k].b.norm();
            prop_assert!((both[k].e - fa[k].e - fb[k].e).norm() <= 1e-12 * scale);
            prop_assert!((both[k].b - fa[k].b - fb[k].b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn electric_field_flips_with_sigma_e(e in ensemble_strategy()) {
        let spec = MollifierSpec::new(8, MollifierShape::UniformBall).unwrap();
        let x = [Vec3::new(0.1, 0.4, -0.3)];
        let plus = eval_fields_direct(&e, &x, Coupling::new(1, 0).unwrap(), &spec).unwrap();
        let minus = eval_fields_direct(&e, &x, Coupling::new(-1, 0).unwrap(), &spec).unwrap();
        prop_assert_eq!(plus[0].e, -minus[0].e);
        prop_assert_eq!(plus[0].b, Vec3::ZERO);
    }
}

#[test]
fn coupled_vector_field_is_divergence_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e = random_ensemble(&mut rng, 300, 0.5, 1.0);
    let spec = MollifierSpec::new(8, MollifierShape::WendlandC2).unwrap();
    let region = PhaseBox::new([-0.8, -0.8, -0.8, -2.0, -2.0, -2.0], [0.8, 0.8, 0.8, 2.0, 2.0, 2.0]).unwrap();
    for (se, sb) in [(1, 0), (-1, 0), (1, 1), (-1, 1)] {
        let c = Coupling::new(se, sb).unwrap();
        let div = divergence_check_b(
            |x| eval_fields_direct(&e, &[x], c, &spec).unwrap()[0],
            &region,
            1e-4,
            50,
            3,
        )
        .unwrap();
        assert!(div <= 1e-5, "sigma = ({se}, {sb}): {div}");
    }
}

#[test]
fn magnetic_energy_is_nonnegative_and_bounds_the_curl_on_random_currents() {
    let g = GridGeometry::cube(Vec3::ZERO, 1.5, 16).unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_ensemble(&mut rng, 1500, 0.6, 2.0);
        let d = deposit(&e, &g).unwrap();
        let r = energy_identities(&d, MollifierShape::UniformBall, 0.05).unwrap();
        assert!(r.h_j_j >= 0.0, "seed {seed}: {r:?}");
        assert!(
            r.curl_a_squared + r.div_a_squared <= 1.05 * r.h_j_j,
            "seed {seed}: {r:?}"
        );
        assert!(r.magnetic_inequality_holds);
    }
}
