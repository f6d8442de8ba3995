//! Casimir integrals `int psi(f_t)` by back-tracing lattice points to `t = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{backtrace_many, FieldSource, IntegratorConfig};
use crate::error::{invalid, Result};
use crate::phase::lattice::{PhaseBox, PhaseLattice};
use crate::phase::profile::InitialProfile;
use crate::vec3::PhasePoint;

/// Escaped fraction above which a coverage warning is attached.
pub const COVERAGE_THRESHOLD: f64 = 1e-3;

const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psi {
    /// `s^2`.
    Square,
    /// `min(s, 1)`.
    MinOne,
    /// `1_{s > c}`.
    Above { c: f64 },
}

impl Psi {
    pub fn apply(&self, s: f64) -> f64 {
        match *self {
            Psi::Square => s * s,
            Psi::MinOne => s.min(1.0),
            Psi::Above { c } => {
                if s > c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn id(&self) -> String {
        match *self {
            Psi::Square => "square".into(),
            Psi::MinOne => "min_one".into(),
            Psi::Above { c } => format!("above_{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirValue {
    pub psi: Psi,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirReport {
    pub time: f64,
    pub values: Vec<CasimirValue>,
    /// `int f_t` over the lattice.
    pub captured_mass: f64,
    /// `1 - captured_mass / mass(f0)`, clamped at 0.
    pub escaped_fraction: f64,
    pub coverage_warning: bool,
}

/// Midpoint quadrature of `psi(f_t)` over `lattice` for every `psi`, with
/// `f_t(z) = f0(Z^{-1}(t, z))`.
pub fn casimir(
    src: &dyn FieldSource,
    profile: &InitialProfile,
    psis: &[Psi],
    t: f64,
    lattice: &PhaseLattice,
    cfg: &IntegratorConfig,
) -> Result<CasimirReport> {
    if !(t >= 0.0) {
        return invalid(format!("time must be nonnegative, got {t}"));
    }
    let mut sums = vec![0.0; psis.len()];
    let mut mass = 0.0;
    let total = lattice.len();
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let pts: Vec<PhasePoint> = (start..end)
            .into_par_iter()
            .map(|n| lattice.center(lattice.unflatten(n)))
            .collect();
        let pre = if t == 0.0 {
            pts
        } else {
            backtrace_many(&pts, t, src, cfg)?
        };
        let f: Vec<f64> = pre
            .par_iter()
            .map(|z| profile.evaluate_or_zero(*z))
            .collect();
        for (k, psi) in psis.iter().enumerate() {
            sums[k] += f.iter().map(|&s| psi.apply(s)).sum::<f64>();
        }
        mass += f.iter().sum::<f64>();
        start = end;
    }
    let vol = lattice.cell_volume();
    let captured_mass = mass * vol;
    let m0 = profile.mass();
    let escaped_fraction = if m0 > 0.0 {
        (1.0 - captured_mass / m0).max(0.0)
    } else {
        0.0
    };
    Ok(CasimirReport {
        time: t,
        values: psis
            .iter()
            .zip(&sums)
            .map(|(psi, s)| CasimirValue {
                psi: *psi,
                time: t,
                value: s * vol,
            })
            .collect(),
        captured_mass,
        escaped_fraction,
        coverage_warning: escaped_fraction > COVERAGE_THRESHOLD,
    })
}

/// Bounding box of the profile widened by the distance a point can travel in
/// time `t` (`|v_hat| < 1`) and by `v_margin` in velocity.
pub fn transport_box(profile: &InitialProfile, t: f64, v_margin: f64) -> PhaseBox {
    let m = t.abs();
    profile
        .bounding_box()
        .expanded([m, m, m, v_margin, v_margin, v_margin])
}
