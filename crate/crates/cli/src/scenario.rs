//! Resolution of a config into the quantities the core consumes: coupling
//! signs, rescaled profile, diagnostic grid and lattices.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use vlasov_core::diagnostics::{default_smallness, Bump, TestFunction};
use vlasov_core::dynamics::FieldConfig;
use vlasov_core::fields::Coupling;
use vlasov_core::phase::{
    sample_ensemble, Ensemble, GridGeometry, InitialProfile, PhaseBox, PhaseLattice,
    ProfileShape,
};
use vlasov_core::Vec3;

use crate::config::{CouplingSpec, PhysicalParams, ScenarioConfig};
use crate::error::{CliError, Result};

/// Relative tolerance under which `q^2 / (4 pi eps0 m)` and `G m` count as equal.
pub const CRITICAL_RTOL: f64 = 1e-12;

/// Half-width, in profile widths, of the box treated as a Gaussian's core.
pub const CORE_WIDTHS: f64 = 4.5;

/// Nodes per axis of the derived diagnostic grid.
pub const GRID_NODES: usize = 32;

/// Nodes per axis of the grid used for backward characteristics.
pub const TRANSPORT_NODES: usize = 40;

/// Padding of the transport grid in units of `T`.
pub const TRANSPORT_REACH: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaResolution {
    pub sigma_e: i8,
    pub sigma_b: i8,
    /// Positive factor folded into the particle weights.
    pub rescale: f64,
    /// Magnetic coefficient `q^2 / (4 pi eps0 m)` divided by `rescale`.
    pub magnetic_ratio: Option<f64>,
}

impl SigmaResolution {
    pub fn coupling(&self) -> Coupling {
        Coupling {
            sigma_e: self.sigma_e,
            sigma_b: self.sigma_b,
        }
    }
}

/// `|q_c| = sqrt(4 pi eps0 G) m`.
pub fn critical_charge(m: f64, g: f64, epsilon0: f64) -> f64 {
    (4.0 * PI * epsilon0 * g).sqrt() * m
}

/// Signs and weight rescale for physical constants. The electric coefficient
/// `q^2 / (4 pi eps0 m) - G m` fixes `sigma_E` and, in absolute value, the
/// rescale; at the critical charge the magnetic coefficient is used instead.
pub fn physical_to_sigma(p: &PhysicalParams) -> Result<SigmaResolution> {
    let bad = |msg: String| Err(CliError::Config(msg));
    if !(p.m > 0.0) || !p.m.is_finite() {
        return bad(format!("mass must be positive, got {}", p.m));
    }
    if !(p.g >= 0.0) || !p.g.is_finite() {
        return bad(format!("G must be nonnegative, got {}", p.g));
    }
    if !(p.epsilon0 > 0.0) || !p.epsilon0.is_finite() {
        return bad(format!("epsilon0 must be positive, got {}", p.epsilon0));
    }
    if !p.q.is_finite() {
        return bad(format!("charge must be finite, got {}", p.q));
    }
    let coulomb = p.q * p.q / (4.0 * PI * p.epsilon0 * p.m);
    let newton = p.g * p.m;
    let diff = coulomb - newton;
    let sigma_b = i8::from(p.magnetic);
    if diff.abs() <= CRITICAL_RTOL * coulomb.max(newton) {
        if !p.magnetic {
            return bad(format!(
                "q = q_c = {} with the magnetic field disabled leaves no field",
                critical_charge(p.m, p.g, p.epsilon0)
            ));
        }
        if coulomb == 0.0 {
            return bad("q = 0 and G = 0 leave no field".into());
        }
        return Ok(SigmaResolution {
            sigma_e: 0,
            sigma_b,
            rescale: coulomb,
            magnetic_ratio: Some(1.0),
        });
    }
    let rescale = diff.abs();
    Ok(SigmaResolution {
        sigma_e: if diff > 0.0 { 1 } else { -1 },
        sigma_b,
        rescale,
        magnetic_ratio: p.magnetic.then(|| coulomb / rescale),
    })
}

/// A validated config together with everything derived from it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub sigma: SigmaResolution,
    pub fields: FieldConfig,
    /// Initial profile with the rescale applied.
    pub profile: InitialProfile,
    pub grid: GridGeometry,
    pub epsilon: f64,
    pub hash: String,
}

impl Scenario {
    pub fn resolve(config: ScenarioConfig) -> Result<Scenario> {
        config.validate()?;
        let sigma = match config.coupling {
            CouplingSpec::Explicit { sigma_e, sigma_b } => SigmaResolution {
                sigma_e,
                sigma_b,
                rescale: 1.0,
                magnetic_ratio: None,
            },
            CouplingSpec::Physical(p) => physical_to_sigma(&p)?,
        };
        let profile = if sigma.rescale == 1.0 {
            config.profile.clone()
        } else {
            config.profile.scaled(sigma.rescale)
        };
        let grid = match config.grid {
            Some(g) => g,
            None => derived_grid(&profile, config.t_final)?,
        };
        let fields = FieldConfig {
            coupling: sigma.coupling(),
            mollifier: config.mollifier,
        };
        Ok(Scenario {
            epsilon: config.smallness.unwrap_or_else(default_smallness),
            hash: config.hash(),
            config,
            sigma,
            fields,
            profile,
            grid,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.config.t_final
    }

    pub fn initial_ensemble(&self) -> Result<Ensemble> {
        let c = &self.config;
        Ok(sample_ensemble(&self.profile, c.particles, c.seed, c.sampling)?)
    }

    pub fn picard_sample(&self) -> Result<Ensemble> {
        let c = &self.config;
        Ok(sample_ensemble(
            &self.profile,
            c.picard.samples,
            c.seed,
            c.sampling,
        )?)
    }

    pub fn transport_grid(&self) -> Result<GridGeometry> {
        transport_grid(&self.profile, self.t_final())
    }

    /// Box carrying essentially all of the initial mass.
    pub fn core_box(&self) -> PhaseBox {
        core_box(&self.profile)
    }

    /// Lattice for Casimir integrals at times up to `T`.
    pub fn casimir_lattice(&self) -> Result<PhaseLattice> {
        let d = &self.config.diagnostics;
        let t = self.t_final();
        let m = d.casimir_v_margin;
        let b = self.core_box().expanded([t, t, t, m, m, m]);
        let (sx, sv) = widths(&self.profile);
        let dims = std::array::from_fn(|k| {
            let h = d.casimir_resolution * if k < 3 { sx } else { sv };
            ((b.hi[k] - b.lo[k]) / h).ceil().max(1.0) as usize
        });
        Ok(PhaseLattice::new(b, dims)?)
    }

    /// Test functions centred on the profile's lumps: one with a time bump
    /// per lump and one without for the first lump.
    pub fn test_functions(&self) -> Vec<TestFunction> {
        self.lump_test_functions(1.0)
    }

    /// Velocity-independent test functions with twice as wide spatial bumps.
    pub fn spatial_test_functions(&self) -> Vec<TestFunction> {
        self.lump_test_functions(2.0)
            .into_iter()
            .map(|mut f| {
                f.v = None;
                f.id = format!("{}_x", f.id);
                f
            })
            .collect()
    }

    fn lump_test_functions(&self, widen: f64) -> Vec<TestFunction> {
        let t = self.t_final();
        let time = Bump::new(0.5 * t, 0.5 * t).expect("positive final time");
        let mut out = Vec::new();
        for (k, (xc, vc, rx, rv)) in lumps(&self.profile).into_iter().enumerate() {
            let b = |c: Vec3, r: f64| -> [Bump; 3] {
                [
                    Bump::new(c.x, r).expect("positive width"),
                    Bump::new(c.y, r).expect("positive width"),
                    Bump::new(c.z, r).expect("positive width"),
                ]
            };
            let rx = rx * widen;
            out.push(TestFunction {
                id: format!("lump{k}"),
                t: Some(time),
                x: Some(b(xc, rx)),
                v: Some(b(vc, rv)),
            });
            if k == 0 {
                out.push(TestFunction {
                    id: format!("lump{k}_endpoints"),
                    t: None,
                    x: Some(b(xc, rx)),
                    v: Some(b(vc, rv)),
                });
            }
        }
        out
    }
}

/// Centres and bump radii `(x, v, r_x, r_v)` of the profile's lumps.
fn lumps(profile: &InitialProfile) -> Vec<(Vec3, Vec3, f64, f64)> {
    match &profile.shape {
        ProfileShape::GaussianProduct { lumps } => lumps
            .iter()
            .map(|l| (l.x_center, l.v_center, 1.2 * l.x_width, 1.2 * l.v_width))
            .collect(),
        ProfileShape::BallBall {
            x_center,
            v_center,
            x_radius,
            v_radius,
            ..
        } => vec![(*x_center, *v_center, *x_radius, *v_radius)],
        ProfileShape::Tabulated { table } => {
            let b = table.bounds();
            let c: [f64; 6] = std::array::from_fn(|d| 0.5 * (b.lo[d] + b.hi[d]));
            let r = |d0: usize| {
                (d0..d0 + 3)
                    .map(|d| 0.4 * (b.hi[d] - b.lo[d]))
                    .fold(f64::INFINITY, f64::min)
            };
            vec![(
                Vec3::new(c[0], c[1], c[2]),
                Vec3::new(c[3], c[4], c[5]),
                r(0),
                r(3),
            )]
        }
    }
}

/// Smallest position and velocity widths of the profile.
pub fn widths(profile: &InitialProfile) -> (f64, f64) {
    match &profile.shape {
        ProfileShape::GaussianProduct { lumps } => (
            lumps.iter().map(|l| l.x_width).fold(f64::INFINITY, f64::min),
            lumps.iter().map(|l| l.v_width).fold(f64::INFINITY, f64::min),
        ),
        ProfileShape::BallBall {
            x_radius, v_radius, ..
        } => (0.25 * x_radius, 0.25 * v_radius),
        ProfileShape::Tabulated { table } => (
            table.spacing[..3].iter().copied().fold(f64::INFINITY, f64::min),
            table.spacing[3..].iter().copied().fold(f64::INFINITY, f64::min),
        ),
    }
}

pub fn core_box(profile: &InitialProfile) -> PhaseBox {
    match &profile.shape {
        ProfileShape::GaussianProduct { lumps } => lumps
            .iter()
            .map(|l| {
                let c = [
                    l.x_center.x,
                    l.x_center.y,
                    l.x_center.z,
                    l.v_center.x,
                    l.v_center.y,
                    l.v_center.z,
                ];
                let r: [f64; 6] = std::array::from_fn(|d| {
                    CORE_WIDTHS * if d < 3 { l.x_width } else { l.v_width }
                });
                PhaseBox {
                    lo: std::array::from_fn(|d| c[d] - r[d]),
                    hi: std::array::from_fn(|d| c[d] + r[d]),
                }
            })
            .reduce(|a, b| a.union(&b))
            .unwrap_or_else(|| profile.bounding_box()),
        _ => profile.bounding_box(),
    }
}

/// Cube of [`GRID_NODES`] nodes around the spatial core, widened by the
/// distance `t_final` a particle can travel.
pub fn derived_grid(profile: &InitialProfile, t_final: f64) -> Result<GridGeometry> {
    core_cube(profile, t_final, GRID_NODES)
}

/// Grid large enough that characteristics traced back from the Casimir
/// lattice stay inside it.
pub fn transport_grid(profile: &InitialProfile, t_final: f64) -> Result<GridGeometry> {
    core_cube(profile, TRANSPORT_REACH * t_final, TRANSPORT_NODES)
}

fn core_cube(profile: &InitialProfile, pad: f64, nodes: usize) -> Result<GridGeometry> {
    let b = core_box(profile);
    let center = Vec3::new(
        0.5 * (b.lo[0] + b.hi[0]),
        0.5 * (b.lo[1] + b.hi[1]),
        0.5 * (b.lo[2] + b.hi[2]),
    );
    let half = (0..3)
        .map(|d| 0.5 * (b.hi[d] - b.lo[d]))
        .fold(0.0, f64::max)
        + pad;
    Ok(GridGeometry::cube(center, half, nodes)?)
}
