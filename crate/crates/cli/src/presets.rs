//! Ready-made scenarios.

use std::f64::consts::PI;

use vlasov_core::kernel::MollifierShape;
use vlasov_core::phase::{GaussianLump, InitialProfile};
use vlasov_core::Vec3;

use crate::config::{CouplingSpec, ScenarioConfig};

pub const PRESET_NAMES: [&str; 7] = [
    "free-streaming",
    "weak-coupling",
    "two-cluster",
    "vlasov-poisson-plasma",
    "vlasov-poisson-gravity",
    "vlasov-biot-savart-plasma",
    "vlasov-biot-savart-gravity",
];

/// Gaussian lump of total mass `mass`.
pub fn lump(x_center: Vec3, v_center: Vec3, x_width: f64, v_width: f64, mass: f64) -> GaussianLump {
    GaussianLump {
        x_center,
        v_center,
        x_width,
        v_width,
        amplitude: mass / ((2.0 * PI).powi(3) * (x_width * v_width).powi(3)),
    }
}

fn explicit(sigma_e: i8, sigma_b: i8) -> CouplingSpec {
    CouplingSpec::Explicit { sigma_e, sigma_b }
}

/// One drifting lump, no fields, 1000 particles, `T = 1`.
pub fn free_streaming() -> ScenarioConfig {
    let profile = InitialProfile::gaussian(vec![lump(
        Vec3::ZERO,
        Vec3::new(0.3, -0.1, 0.0),
        0.3,
        0.4,
        1.0,
    )])
    .expect("valid preset profile");
    let mut c = ScenarioConfig::new(explicit(0, 0), profile, 1.0);
    c.particles = 1000;
    c
}

/// Single lump of mass 0.01 with both fields on, `T = 0.5`.
pub fn weak_coupling() -> ScenarioConfig {
    let profile = InitialProfile::gaussian(vec![lump(
        Vec3::ZERO,
        Vec3::new(0.2, 0.0, 0.0),
        0.3,
        0.3,
        0.01,
    )])
    .expect("valid preset profile");
    let mut c = ScenarioConfig::new(explicit(1, 1), profile, 0.5);
    c.particles = 512;
    c.picard.samples = 512;
    c.picard.iterations = 4;
    c
}

/// Two counter-streaming lumps of total mass 1, `T = 0.5`, with the
/// Wendland mollifier and `dt = 0.05`.
pub fn two_cluster(sigma_e: i8, sigma_b: i8) -> ScenarioConfig {
    let profile = InitialProfile::gaussian(vec![
        lump(
            Vec3::new(-0.4, 0.0, 0.0),
            Vec3::new(0.0, 0.2, 0.0),
            0.15,
            0.25,
            0.5,
        ),
        lump(
            Vec3::new(0.4, 0.0, 0.0),
            Vec3::new(0.0, -0.2, 0.0),
            0.15,
            0.25,
            0.5,
        ),
    ])
    .expect("valid preset profile");
    let mut c = ScenarioConfig::new(explicit(sigma_e, sigma_b), profile, 0.5);
    c.mollifier.shape = MollifierShape::WendlandC2;
    c.integrator.dt = 0.05;
    c.snapshot_stride = 2;
    c
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "free-streaming" => free_streaming(),
        "weak-coupling" => weak_coupling(),
        "two-cluster" | "vlasov-poisson-plasma" => two_cluster(1, 0),
        "vlasov-poisson-gravity" => two_cluster(-1, 0),
        "vlasov-biot-savart-plasma" => two_cluster(1, 1),
        "vlasov-biot-savart-gravity" => two_cluster(-1, 1),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn lump_mass() {
        let l = lump(Vec3::ZERO, Vec3::ZERO, 0.2, 0.7, 0.37);
        assert!((l.mass() - 0.37).abs() < 1e-15);
    }
}
