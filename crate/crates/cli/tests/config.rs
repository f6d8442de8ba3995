//! Config documents survive an emit/parse round trip.

use proptest::prelude::*;
use vlasov_cli::{parse_config_str, presets, CouplingSpec, Limit, PhysicalParams, ScenarioConfig};
use vlasov_core::kernel::MollifierShape;

fn coupling() -> impl Strategy<Value = CouplingSpec> {
    prop_oneof![
        (-1i8..=1, 0i8..=1).prop_map(|(sigma_e, sigma_b)| CouplingSpec::Explicit { sigma_e, sigma_b }),
        (1e-3f64..10.0, 1e-3f64..10.0, 1e-3f64..10.0, any::<bool>(), any::<bool>()).prop_map(
            |(q, m, g, qms, magnetic)| CouplingSpec::Physical(PhysicalParams {
                q,
                m,
                g,
                epsilon0: 1.0,
                limit: if qms { Limit::Qms } else { Limit::Qes },
                magnetic,
            })
        ),
    ]
}

fn config() -> impl Strategy<Value = ScenarioConfig> {
    (
        coupling(),
        1usize..5000,
        any::<u64>(),
        1u32..64,
        any::<bool>(),
        1e-4f64..0.1,
        0.01f64..1.0,
        1usize..50,
        0.0f64..1.0,
    )
        .prop_map(|(coupling, particles, seed, level, wendland, dt, t_final, stride, slack)| {
            let mut c = presets::free_streaming();
            c.coupling = coupling;
            c.particles = particles;
            c.seed = seed;
            c.mollifier.level = level;
            if wendland {
                c.mollifier.shape = MollifierShape::WendlandC2;
            }
            c.integrator.dt = dt;
            c.t_final = t_final;
            c.snapshot_stride = stride;
            c.picard.bound_slack = slack;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn emit_then_parse_is_identity(c in config()) {
        let text = c.emit();
        let back = parse_config_str(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_output_but_not_seed(c in config(), dir in "[a-z]{1,8}") {
        let mut moved = c.clone();
        moved.output = Some(dir.into());
        prop_assert_eq!(moved.hash(), c.hash());
        let mut reseeded = c.clone();
        reseeded.seed = c.seed.wrapping_add(1);
        prop_assert_ne!(reseeded.hash(), c.hash());
    }
}

#[test]
fn every_preset_round_trips() {
    for name in presets::PRESET_NAMES {
        let c = presets::preset(name).unwrap();
        assert_eq!(parse_config_str(&c.emit()).unwrap(), c, "{name}");
    }
}

#[test]
fn unknown_keys_are_rejected_with_a_location() {
    let mut v: serde_json::Value = serde_json::from_str(&presets::free_streaming().emit()).unwrap();
    v["integrator"]["tyop"] = serde_json::json!(1);
    let err = parse_config_str(&serde_json::to_string_pretty(&v).unwrap()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("tyop") && msg.contains("line"), "{msg}");
}
