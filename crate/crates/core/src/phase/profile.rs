//! Analytic and tabulated initial distributions `f0(x, v)`, optionally restricted
//! to a level band `k <= f0 < k+1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{hat, lorentz_factor};
use crate::phase::lattice::{PhaseBox, PhaseLattice};
use crate::quadrature::{composite, GaussLegendre};
use crate::vec3::{PhasePoint, Vec3};

/// Half-width, in standard deviations, of the box treated as a Gaussian's support.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 6.0;

/// `amplitude * exp(-|x-xc|^2 / 2 sx^2 - |v-vc|^2 / 2 sv^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianLump {
    pub x_center: Vec3,
    pub v_center: Vec3,
    pub x_width: f64,
    pub v_width: f64,
    pub amplitude: f64,
}

impl GaussianLump {
    pub fn mass(&self) -> f64 {
        self.amplitude * (2.0 * PI).powi(3) * (self.x_width * self.v_width).powi(3)
    }

    #[inline]
    fn value(&self, z: PhasePoint) -> f64 {
        let dx = (z.x - self.x_center).norm_squared() / (self.x_width * self.x_width);
        let dv = (z.v - self.v_center).norm_squared() / (self.v_width * self.v_width);
        self.amplitude * (-0.5 * (dx + dv)).exp()
    }

    fn support(&self) -> PhaseBox {
        let rx = GAUSSIAN_SUPPORT_WIDTHS * self.x_width;
        let rv = GAUSSIAN_SUPPORT_WIDTHS * self.v_width;
        let c = PhasePoint::new(self.x_center, self.v_center).to_array();
        let r = [rx, rx, rx, rv, rv, rv];
        PhaseBox {
            lo: std::array::from_fn(|d| c[d] - r[d]),
            hi: std::array::from_fn(|d| c[d] + r[d]),
        }
    }
}

/// Piecewise-constant phase-space table; cell `i` along axis `d` covers
/// `[origin[d] + i h[d], origin[d] + (i+1) h[d])`. Axis 0 varies slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseTable {
    pub origin: [f64; 6],
    pub spacing: [f64; 6],
    pub dims: [usize; 6],
    pub values: Vec<f64>,
}

impl PhaseTable {
    pub fn new(
        origin: [f64; 6],
        spacing: [f64; 6],
        dims: [usize; 6],
        values: Vec<f64>,
    ) -> Result<Self> {
        let t = PhaseTable {
            origin,
            spacing,
            dims,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spacing.iter().any(|&h| !(h > 0.0)) {
            return invalid("table spacing must be positive");
        }
        if self.dims.contains(&0) {
            return invalid("table dims must be positive");
        }
        if self.values.len() != self.dims.iter().product::<usize>() {
            return invalid(format!(
                "table has {} values, dims need {}",
                self.values.len(),
                self.dims.iter().product::<usize>()
            ));
        }
        if self.values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return invalid("table values must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn bounds(&self) -> PhaseBox {
        PhaseBox {
            lo: self.origin,
            hi: std::array::from_fn(|d| self.origin[d] + self.dims[d] as f64 * self.spacing[d]),
        }
    }

    pub fn flat_index(&self, idx: [usize; 6]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn unflatten(&self, mut n: usize) -> [usize; 6] {
        let mut idx = [0usize; 6];
        for d in (0..6).rev() {
            idx[d] = n % self.dims[d];
            n /= self.dims[d];
        }
        idx
    }

    pub fn cell_center(&self, idx: [usize; 6]) -> PhasePoint {
        PhasePoint::from_array(std::array::from_fn(|d| {
            self.origin[d] + (idx[d] as f64 + 0.5) * self.spacing[d]
        }))
    }

    pub fn lookup(&self, z: PhasePoint) -> Result<f64> {
        let a = z.to_array();
        let mut idx = [0usize; 6];
        for d in 0..6 {
            let s = (a[d] - self.origin[d]) / self.spacing[d];
            if !(s >= 0.0) || s >= self.dims[d] as f64 {
                return Err(Error::OutOfDomain(format!("{z:?} (axis {d})")));
            }
            idx[d] = (s as usize).min(self.dims[d] - 1);
        }
        Ok(self.values[self.flat_index(idx)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileShape {
    GaussianProduct {
        lumps: Vec<GaussianLump>,
    },
    /// Uniform on `B(x_center, x_radius) x B(v_center, v_radius)` with total `mass`.
    BallBall {
        x_center: Vec3,
        v_center: Vec3,
        x_radius: f64,
        v_radius: f64,
        mass: f64,
    },
    Tabulated {
        table: PhaseTable,
    },
}

/// Level band `lo <= f < hi`; `hi = None` is the open-ended remainder band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl Band {
    #[inline]
    pub fn admits(&self, value: f64) -> bool {
        value >= self.lo as f64 && self.hi.is_none_or(|h| value < h as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialProfile {
    pub shape: ProfileShape,
    #[serde(default)]
    pub band: Option<Band>,
}

fn ball_volume(r: f64) -> f64 {
    4.0 / 3.0 * PI * r * r * r
}

impl InitialProfile {
    pub fn gaussian(lumps: Vec<GaussianLump>) -> Result<Self> {
        let p = InitialProfile {
            shape: ProfileShape::GaussianProduct { lumps },
            band: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn ball_ball(
        x_center: Vec3,
        v_center: Vec3,
        x_radius: f64,
        v_radius: f64,
        mass: f64,
    ) -> Result<Self> {
        let p = InitialProfile {
            shape: ProfileShape::BallBall {
                x_center,
                v_center,
                x_radius,
                v_radius,
                mass,
            },
            band: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn tabulated(table: PhaseTable) -> Result<Self> {
        let p = InitialProfile {
            shape: ProfileShape::Tabulated { table },
            band: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_band(&self, band: Band) -> InitialProfile {
        InitialProfile {
            shape: self.shape.clone(),
            band: Some(band),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            ProfileShape::GaussianProduct { lumps } => {
                if lumps.is_empty() {
                    return invalid("gaussian profile needs at least one lump");
                }
                for l in lumps {
                    if !(l.x_width > 0.0 && l.v_width > 0.0) {
                        return invalid("gaussian widths must be positive");
                    }
                    if !(l.amplitude >= 0.0) || !l.amplitude.is_finite() {
                        return invalid("gaussian amplitude must be finite and nonnegative");
                    }
                    if !(l.x_center.is_finite() && l.v_center.is_finite()) {
                        return invalid("gaussian centers must be finite");
                    }
                }
            }
            ProfileShape::BallBall {
                x_center,
                v_center,
                x_radius,
                v_radius,
                mass,
            } => {
                if !(*x_radius > 0.0 && *v_radius > 0.0) {
                    return invalid("ball radii must be positive");
                }
                if !(*mass >= 0.0) || !mass.is_finite() {
                    return invalid("ball mass must be finite and nonnegative");
                }
                if !(x_center.is_finite() && v_center.is_finite()) {
                    return invalid("ball centers must be finite");
                }
            }
            ProfileShape::Tabulated { table } => table.validate()?,
        }
        if let Some(b) = self.band {
            if b.hi.is_some_and(|h| h <= b.lo) {
                return invalid(format!("empty band [{}, {:?})", b.lo, b.hi));
            }
        }
        Ok(())
    }

    /// Value of the profile ignoring any band restriction.
    pub fn evaluate_unbanded(&self, z: PhasePoint) -> Result<f64> {
        Ok(match &self.shape {
            ProfileShape::GaussianProduct { lumps } => lumps.iter().map(|l| l.value(z)).sum(),
            ProfileShape::BallBall {
                x_center,
                v_center,
                x_radius,
                v_radius,
                mass,
            } => {
                let inside = (z.x - *x_center).norm_squared() < x_radius * x_radius
                    && (z.v - *v_center).norm_squared() < v_radius * v_radius;
                if inside {
                    mass / (ball_volume(*x_radius) * ball_volume(*v_radius))
                } else {
                    0.0
                }
            }
            ProfileShape::Tabulated { table } => table.lookup(z)?,
        })
    }

    /// `f0(z)`; zero outside the band when one is set.
    pub fn evaluate(&self, z: PhasePoint) -> Result<f64> {
        let f = self.evaluate_unbanded(z)?;
        Ok(match self.band {
            Some(b) if !b.admits(f) => 0.0,
            _ => f,
        })
    }

    /// Like [`evaluate`](Self::evaluate) but returns zero outside a tabulated domain.
    pub fn evaluate_or_zero(&self, z: PhasePoint) -> f64 {
        self.evaluate(z).unwrap_or(0.0)
    }

    /// Box containing the support (for Gaussians, `GAUSSIAN_SUPPORT_WIDTHS` widths).
    pub fn bounding_box(&self) -> PhaseBox {
        match &self.shape {
            ProfileShape::GaussianProduct { lumps } => lumps
                .iter()
                .skip(1)
                .fold(lumps[0].support(), |acc, l| acc.union(&l.support())),
            ProfileShape::BallBall {
                x_center,
                v_center,
                x_radius,
                v_radius,
                ..
            } => {
                let c = PhasePoint::new(*x_center, *v_center).to_array();
                let r = [
                    *x_radius, *x_radius, *x_radius, *v_radius, *v_radius, *v_radius,
                ];
                PhaseBox {
                    lo: std::array::from_fn(|d| c[d] - r[d]),
                    hi: std::array::from_fn(|d| c[d] + r[d]),
                }
            }
            ProfileShape::Tabulated { table } => table.bounds(),
        }
    }

    /// Upper bound on `sup f0` (exact except for overlapping Gaussian lumps).
    pub fn sup_bound(&self) -> f64 {
        match &self.shape {
            ProfileShape::GaussianProduct { lumps } => lumps.iter().map(|l| l.amplitude).sum(),
            ProfileShape::BallBall {
                x_radius,
                v_radius,
                mass,
                ..
            } => mass / (ball_volume(*x_radius) * ball_volume(*v_radius)),
            ProfileShape::Tabulated { table } => table.values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// The profile multiplied by `c > 0` (band thresholds are unchanged).
    pub fn scaled(&self, c: f64) -> InitialProfile {
        let shape = match &self.shape {
            ProfileShape::GaussianProduct { lumps } => ProfileShape::GaussianProduct {
                lumps: lumps
                    .iter()
                    .map(|l| GaussianLump {
                        amplitude: l.amplitude * c,
                        ..l.clone()
                    })
                    .collect(),
            },
            ProfileShape::BallBall {
                x_center,
                v_center,
                x_radius,
                v_radius,
                mass,
            } => ProfileShape::BallBall {
                x_center: *x_center,
                v_center: *v_center,
                x_radius: *x_radius,
                v_radius: *v_radius,
                mass: mass * c,
            },
            ProfileShape::Tabulated { table } => ProfileShape::Tabulated {
                table: PhaseTable {
                    values: table.values.iter().map(|v| v * c).collect(),
                    ..table.clone()
                },
            },
        };
        InitialProfile {
            shape,
            band: self.band,
        }
    }

    /// Default midpoint lattice for quadrature of this profile.
    ///
    /// Gaussians get a spacing of at most 0.8 widths, where the midpoint rule is
    /// spectrally accurate; balls get 24 cells per axis.
    pub fn quadrature_lattice(&self) -> PhaseLattice {
        self.gaussian_lattice(0.8)
    }

    /// Midpoint lattice for `int f^p`. Gaussian spacings shrink like
    /// `1/sqrt(p)` above `p = 3/2`.
    pub fn quadrature_lattice_for(&self, p: f64) -> PhaseLattice {
        self.gaussian_lattice(0.8 * (1.5 / p.max(1.5)).sqrt())
    }

    fn gaussian_lattice(&self, spacing: f64) -> PhaseLattice {
        let bounds = self.bounding_box();
        let dims = match &self.shape {
            ProfileShape::GaussianProduct { lumps } => {
                let wx = lumps
                    .iter()
                    .map(|l| l.x_width)
                    .fold(f64::INFINITY, f64::min);
                let wv = lumps
                    .iter()
                    .map(|l| l.v_width)
                    .fold(f64::INFINITY, f64::min);
                std::array::from_fn(|d| {
                    let w = if d < 3 { wx } else { wv };
                    (((bounds.hi[d] - bounds.lo[d]) / (spacing * w)).ceil() as usize).clamp(4, 40)
                })
            }
            ProfileShape::BallBall { .. } => [24; 6],
            ProfileShape::Tabulated { table } => table.dims,
        };
        PhaseLattice { bounds, dims }
    }

    /// `int f0`: closed form when unbanded, lattice quadrature otherwise.
    pub fn mass(&self) -> f64 {
        if self.band.is_some() {
            let lat = self.quadrature_lattice();
            return lat.integrate(|z| self.evaluate_or_zero(z));
        }
        match &self.shape {
            ProfileShape::GaussianProduct { lumps } => lumps.iter().map(GaussianLump::mass).sum(),
            ProfileShape::BallBall { mass, .. } => *mass,
            ProfileShape::Tabulated { table } => {
                table.values.iter().sum::<f64>() * table.cell_volume()
            }
        }
    }

    /// `||f0||_{L^p(R^6)}`. Closed forms for a single unbanded Gaussian lump, balls
    /// and tables; midpoint lattice quadrature otherwise.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return invalid(format!("L^p norm needs p >= 1, got {p}"));
        }
        if self.band.is_none() {
            match &self.shape {
                ProfileShape::GaussianProduct { lumps } if lumps.len() == 1 => {
                    let l = &lumps[0];
                    let per = (2.0 * PI / p).powi(3) * (l.x_width * l.v_width).powi(3);
                    return Ok(l.amplitude * per.powf(1.0 / p));
                }
                ProfileShape::BallBall {
                    x_radius,
                    v_radius,
                    mass,
                    ..
                } => {
                    let vol = ball_volume(*x_radius) * ball_volume(*v_radius);
                    return Ok(mass / vol * vol.powf(1.0 / p));
                }
                ProfileShape::Tabulated { table } => {
                    let s: f64 = table.values.iter().map(|v| v.powf(p)).sum();
                    return Ok((s * table.cell_volume()).powf(1.0 / p));
                }
                _ => {}
            }
        }
        self.lp_norm_quadrature(p, &self.quadrature_lattice_for(p))
    }

    pub fn lp_norm_quadrature(&self, p: f64, lattice: &PhaseLattice) -> Result<f64> {
        if !(p >= 1.0) {
            return invalid(format!("L^p norm needs p >= 1, got {p}"));
        }
        Ok(lattice
            .integrate(|z| self.evaluate_or_zero(z).powf(p))
            .powf(1.0 / p))
    }

    /// `int sqrt(1+|v|^2) f0`: radial quadrature about each velocity centre for
    /// unbanded Gaussians and balls, lattice quadrature otherwise.
    pub fn relativistic_energy(&self) -> f64 {
        if self.band.is_none() {
            match &self.shape {
                ProfileShape::GaussianProduct { lumps } => {
                    let rule = GaussLegendre::new(16);
                    return lumps
                        .iter()
                        .map(|l| {
                            let sv = l.v_width;
                            let breaks: Vec<f64> = (0..=8).map(|k| 1.5 * sv * k as f64).collect();
                            let radial: f64 = composite(&rule, &breaks)
                                .into_iter()
                                .map(|(r, w)| {
                                    w * r
                                        * r
                                        * (-0.5 * r * r / (sv * sv)).exp()
                                        * shell_lorentz_mean(l.v_center, r)
                                })
                                .sum();
                            l.amplitude
                                * (2.0 * PI * l.x_width * l.x_width).powf(1.5)
                                * 4.0
                                * PI
                                * radial
                        })
                        .sum();
                }
                ProfileShape::BallBall {
                    v_center,
                    v_radius,
                    mass,
                    ..
                } => {
                    let radial = GaussLegendre::new(32).integrate(0.0, *v_radius, |r| {
                        4.0 * PI * r * r * shell_lorentz_mean(*v_center, r)
                    });
                    return mass / ball_volume(*v_radius) * radial;
                }
                ProfileShape::Tabulated { .. } => {}
            }
        }
        let lat = self.quadrature_lattice();
        lat.integrate(|z| lorentz_factor(z.v) * self.evaluate_or_zero(z))
    }

    /// `(rho, J)` at position `x`: midpoint quadrature over the velocity box with
    /// `nv` cells per axis.
    pub fn velocity_moments(&self, x: Vec3, nv: usize) -> (f64, Vec3) {
        let b = self.bounding_box();
        let h: [f64; 3] = std::array::from_fn(|d| (b.hi[d + 3] - b.lo[d + 3]) / nv as f64);
        let dv = h[0] * h[1] * h[2];
        let mut rho = 0.0;
        let mut j = Vec3::ZERO;
        for a in 0..nv {
            for bb in 0..nv {
                for c in 0..nv {
                    let v = Vec3::new(
                        b.lo[3] + (a as f64 + 0.5) * h[0],
                        b.lo[4] + (bb as f64 + 0.5) * h[1],
                        b.lo[5] + (c as f64 + 0.5) * h[2],
                    );
                    let f = self.evaluate_or_zero(PhasePoint::new(x, v));
                    if f != 0.0 {
                        rho += f;
                        j += hat(v) * f;
                    }
                }
            }
        }
        (rho * dv, j * dv)
    }
}

/// Mean of `sqrt(1 + |v|^2)` over the sphere `|v - c| = r`:
/// `((1 + (r+|c|)^2)^(3/2) - (1 + (r-|c|)^2)^(3/2)) / (6 r |c|)`.
fn shell_lorentz_mean(c: Vec3, r: f64) -> f64 {
    let a = 1.0 + c.norm_squared() + r * r;
    let b = 2.0 * r * c.norm();
    let e = b / a;
    if e < 1e-4 {
        return a.sqrt() * (1.0 - e * e / 24.0);
    }
    ((a + b).powf(1.5) - (a - b).powf(1.5)) / (3.0 * b)
}

/// Level-band partition of a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDecomposition {
    /// Bands `[k, k+1)` for `k = 0..kmax`.
    pub bands: Vec<InitialProfile>,
    /// The open band `[kmax, inf)`, so the partition is exact.
    pub remainder: InitialProfile,
}

impl BandDecomposition {
    pub fn all(&self) -> impl Iterator<Item = &InitialProfile> {
        self.bands.iter().chain(std::iter::once(&self.remainder))
    }
}

pub fn band_decompose(profile: &InitialProfile, kmax: u32) -> Result<BandDecomposition> {
    if kmax < 1 {
        return invalid("band decomposition needs kmax >= 1");
    }
    if profile.band.is_some() {
        return invalid("profile is already restricted to a band");
    }
    let bands = (0..kmax)
        .map(|k| {
            profile.with_band(Band {
                lo: k,
                hi: Some(k + 1),
            })
        })
        .collect();
    let remainder = profile.with_band(Band { lo: kmax, hi: None });
    Ok(BandDecomposition { bands, remainder })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relativistic_energy_of_gaussian_matches_tensor_quadrature() {
        let l = GaussianLump {
            x_center: Vec3::new(1.0, 0.0, 0.0),
            v_center: Vec3::new(0.7, -0.4, 0.2),
            x_width: 0.4,
            v_width: 0.6,
            amplitude: 1.5,
        };
        let p = InitialProfile::gaussian(vec![l.clone()]).unwrap();
        // oracle: tensor Gauss-Legendre over the velocity box, x factor in closed form
        let rule = GaussLegendre::new(48);
        let nodes: Vec<Vec<(f64, f64)>> = (0..3)
            .map(|d| rule.on_interval(l.v_center[d] - 7.0 * 0.6, l.v_center[d] + 7.0 * 0.6))
            .collect();
        let mut acc = 0.0;
        for &(a, wa) in &nodes[0] {
            for &(b, wb) in &nodes[1] {
                for &(c, wc) in &nodes[2] {
                    let v = Vec3::new(a, b, c);
                    let g = (-0.5 * (v - l.v_center).norm_squared() / 0.36).exp();
                    acc += wa * wb * wc * g * lorentz_factor(v);
                }
            }
        }
        let oracle = 1.5 * (2.0 * PI * 0.16f64).powf(1.5) * acc;
        assert!((p.relativistic_energy() - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn relativistic_energy_of_centred_ball_is_closed_form() {
        let r: f64 = 1.3;
        let p = InitialProfile::ball_ball(Vec3::ZERO, Vec3::ZERO, 0.5, r, 2.0).unwrap();
        let antiderivative = (r * (2.0 * r * r + 1.0) * (1.0 + r * r).sqrt() - r.asinh()) / 8.0;
        let exact = 2.0 / (4.0 / 3.0 * PI * r.powi(3)) * 4.0 * PI * antiderivative;
        assert!((p.relativistic_energy() - exact).abs() < 1e-12 * exact);
    }

    fn lump(amplitude: f64) -> GaussianLump {
        GaussianLump {
            x_center: Vec3::ZERO,
            v_center: Vec3::ZERO,
            x_width: 1.0,
            v_width: 1.0,
            amplitude,
        }
    }

    fn unit_ballball() -> InitialProfile {
        InitialProfile::ball_ball(Vec3::ZERO, Vec3::ZERO, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_peak_is_amplitude() {
        let p = InitialProfile::gaussian(vec![lump(2.75)]).unwrap();
        assert_eq!(p.evaluate(PhasePoint::default()).unwrap(), 2.75);
    }

    #[test]
    fn band_excludes_values_outside() {
        let p = InitialProfile::gaussian(vec![lump(1.5)]).unwrap();
        let band = p.with_band(Band { lo: 2, hi: Some(3) });
        // find a point with unbanded value k - 0.5 = 1.5 (the peak)
        assert_eq!(band.evaluate(PhasePoint::default()).unwrap(), 0.0);
        let band1 = p.with_band(Band { lo: 1, hi: Some(2) });
        assert_eq!(band1.evaluate(PhasePoint::default()).unwrap(), 1.5);
    }

    #[test]
    fn ballball_inside_value() {
        let p = unit_ballball();
        let f = p
            .evaluate(PhasePoint::new(
                Vec3::new(0.2, 0.1, 0.0),
                Vec3::new(0.0, -0.5, 0.3),
            ))
            .unwrap();
        let oracle = 1.0 / (4.0 * PI / 3.0).powi(2);
        assert!((f - oracle).abs() < 1e-15);
        assert!((f - 0.0569932).abs() < 1e-7);
        let out = p
            .evaluate(PhasePoint::new(Vec3::new(1.2, 0.0, 0.0), Vec3::ZERO))
            .unwrap();
        assert_eq!(out, 0.0);
    }

    #[test]
    fn tabulated_lookup_and_out_of_domain() {
        let table =
            PhaseTable::new([0.0; 6], [1.0; 6], [2, 1, 1, 1, 1, 1], vec![0.5, 3.0]).unwrap();
        let p = InitialProfile::tabulated(table).unwrap();
        let z = PhasePoint::from_array([1.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(p.evaluate(z).unwrap(), 3.0);
        let far = PhasePoint::from_array([2.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        assert!(matches!(p.evaluate(far), Err(Error::OutOfDomain(_))));
        assert_eq!(p.mass(), 3.5);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(InitialProfile::gaussian(vec![GaussianLump {
            x_width: 0.0,
            ..lump(1.0)
        }])
        .is_err());
        assert!(InitialProfile::ball_ball(Vec3::ZERO, Vec3::ZERO, -1.0, 1.0, 1.0).is_err());
        assert!(PhaseTable::new([0.0; 6], [1.0; 6], [2, 1, 1, 1, 1, 1], vec![1.0]).is_err());
        assert!(PhaseTable::new([0.0; 6], [1.0; 6], [1; 6], vec![-1.0]).is_err());
    }

    #[test]
    fn single_band_covers_small_profile() {
        let p = InitialProfile::gaussian(vec![lump(0.9)]).unwrap();
        let dec = band_decompose(&p, 1).unwrap();
        assert_eq!(dec.bands.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let z = PhasePoint::from_array(std::array::from_fn(|_| rng.random_range(-3.0..3.0)));
            assert_eq!(dec.bands[0].evaluate(z).unwrap(), p.evaluate(z).unwrap());
            assert_eq!(dec.remainder.evaluate(z).unwrap(), 0.0);
        }
    }

    #[test]
    fn bands_partition_pointwise() {
        let p = InitialProfile::gaussian(vec![lump(2.5)]).unwrap();
        let dec = band_decompose(&p, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let z = PhasePoint::from_array(std::array::from_fn(|_| rng.random_range(-1.5..1.5)));
            let sum: f64 = dec.bands.iter().map(|b| b.evaluate(z).unwrap()).sum();
            assert_eq!(sum, p.evaluate(z).unwrap());
        }
        assert!(band_decompose(&p, 0).is_err());
        assert!(band_decompose(&dec.bands[0], 2).is_err());
    }

    #[test]
    fn band_masses_sum_to_total() {
        let p = InitialProfile::gaussian(vec![lump(2.5)]).unwrap();
        let dec = band_decompose(&p, 3).unwrap();
        let total: f64 = dec.all().map(|b| b.mass()).sum();
        let exact = p.mass();
        assert!((total - exact).abs() / exact < 1e-6, "{total} vs {exact}");
    }

    #[test]
    fn lp_norm_examples() {
        assert!((unit_ballball().lp_norm(1.0).unwrap() - 1.0).abs() < 1e-12);
        let table = PhaseTable::new([0.0; 6], [1.0; 6], [1; 6], vec![1.0]).unwrap();
        let cube = InitialProfile::tabulated(table).unwrap();
        for p in [1.0, 1.5, 2.0, 7.0] {
            assert!((cube.lp_norm(p).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(cube.lp_norm(0.5).is_err());
        let g = InitialProfile::gaussian(vec![lump(1.3)]).unwrap();
        for p in [1.0, 1.5, 3.0] {
            let closed = g.lp_norm(p).unwrap();
            let quad = g.lp_norm_quadrature(p, &g.quadrature_lattice_for(p)).unwrap();
            assert!(
                (closed - quad).abs() / closed < 1e-6,
                "p={p}: {closed} vs {quad}"
            );
            for c in [2.0, 5.0] {
                let scaled = g.scaled(c).lp_norm(p).unwrap();
                assert!((scaled - c * closed).abs() < 1e-12 * scaled);
            }
        }
    }

    #[test]
    fn velocity_moments_of_resting_gaussian() {
        let g = InitialProfile::gaussian(vec![lump(1.0)]).unwrap();
        let (rho, j) = g.velocity_moments(Vec3::new(0.5, 0.0, 0.0), 24);
        let oracle = (2.0 * PI).powf(1.5) * (-0.125f64).exp();
        assert!((rho - oracle).abs() / oracle < 1e-8);
        assert!(j.norm() < 1e-12);
    }
}
