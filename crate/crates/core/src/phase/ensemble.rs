//! Weighted particle ensembles and their sampling from an initial profile.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{hat, lorentz_factor};
use crate::phase::lattice::{hashed_unit, PhaseLattice};
use crate::phase::profile::{InitialProfile, ProfileShape};
use crate::vec3::{PhasePoint, Vec3};

/// Cells per axis of the lattice used when the lattice resolution is not tied to
/// a particle count.
pub const DEFAULT_LATTICE_PER_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: Vec3,
    pub v: Vec3,
    pub w: f64,
}

impl Particle {
    pub fn new(x: Vec3, v: Vec3, w: f64) -> Self {
        Particle { x, v, w }
    }

    pub fn at_rest(x: Vec3, w: f64) -> Self {
        Particle {
            x,
            v: Vec3::ZERO,
            w,
        }
    }

    pub fn phase(&self) -> PhasePoint {
        PhasePoint::new(self.x, self.v)
    }

    pub fn with_phase(&self, z: PhasePoint) -> Particle {
        Particle {
            x: z.x,
            v: z.v,
            w: self.w,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.v.is_finite() && self.w.is_finite() && self.w >= 0.0
    }
}

/// Flat CSV row `x,y,z,vx,vy,vz,w`.
#[derive(Serialize, Deserialize)]
struct ParticleRow {
    x: f64,
    y: f64,
    z: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    w: f64,
}

impl From<&Particle> for ParticleRow {
    fn from(p: &Particle) -> Self {
        ParticleRow {
            x: p.x.x,
            y: p.x.y,
            z: p.x.z,
            vx: p.v.x,
            vy: p.v.y,
            vz: p.v.z,
            w: p.w,
        }
    }
}

impl From<ParticleRow> for Particle {
    fn from(r: ParticleRow) -> Self {
        Particle::new(Vec3::new(r.x, r.y, r.z), Vec3::new(r.vx, r.vy, r.vz), r.w)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub time: f64,
}

impl Ensemble {
    pub fn new(particles: Vec<Particle>, time: f64) -> Result<Self> {
        if let Some(i) = particles.iter().position(|p| !p.is_valid()) {
            return invalid(format!(
                "particle {i} has non-finite data or negative weight"
            ));
        }
        if !(time >= 0.0) || !time.is_finite() {
            return invalid(format!(
                "ensemble time must be finite and nonnegative, got {time}"
            ));
        }
        Ok(Ensemble { particles, time })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// `sum w`, accumulated in index order.
    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.w).sum()
    }

    /// `sum w sqrt(1 + |v|^2)`.
    pub fn relativistic_energy(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.w * lorentz_factor(p.v))
            .sum()
    }

    /// `sum w v` (momentum-like variable).
    pub fn momentum(&self) -> Vec3 {
        self.particles
            .iter()
            .fold(Vec3::ZERO, |acc, p| acc + p.v * p.w)
    }

    /// `sum w v_hat`, the net current.
    pub fn net_current(&self) -> Vec3 {
        self.particles
            .iter()
            .fold(Vec3::ZERO, |acc, p| acc + hat(p.v) * p.w)
    }

    pub fn max_speed(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.v.norm())
            .fold(0.0, f64::max)
    }

    /// Particles of `self` followed by those of `other`, at `self.time`.
    pub fn concat(&self, other: &Ensemble) -> Ensemble {
        let mut particles = self.particles.clone();
        particles.extend_from_slice(&other.particles);
        Ensemble {
            particles,
            time: self.time,
        }
    }

    /// Every weight multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Ensemble {
        Ensemble {
            particles: self
                .particles
                .iter()
                .map(|p| Particle { w: p.w * c, ..*p })
                .collect(),
            time: self.time,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.particles {
            wr.serialize(ParticleRow::from(p)).map_err(csv_error)?;
        }
        if self.particles.is_empty() {
            wr.write_record(["x", "y", "z", "vx", "vy", "vz", "w"])
                .map_err(csv_error)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, time: f64) -> Result<Ensemble> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(csv_error)?;
        if header.iter().collect::<Vec<_>>() != ["x", "y", "z", "vx", "vy", "vz", "w"] {
            return Err(Error::Format(format!(
                "unexpected ensemble header {header:?}"
            )));
        }
        let particles = rd
            .deserialize::<ParticleRow>()
            .map(|row| row.map(Particle::from).map_err(csv_error))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(particles, time)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: impl AsRef<Path>, time: f64) -> Result<Ensemble> {
        let f = std::fs::File::open(path)?;
        Ensemble::read_csv(std::io::BufReader::new(f), time)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One jittered point per lattice cell over the profile's bounding box, with
    /// `w = f0(z) * cell volume`; cells where `f0` vanishes are dropped.
    StratifiedLattice,
    /// `N` independent draws from `f0 / mass`, each with weight `mass / N`.
    #[default]
    MonteCarlo,
}

/// Cells per axis used by the lattice mode for a requested particle count.
pub fn lattice_per_dim(n: usize) -> usize {
    let mut k = (n as f64).powf(1.0 / 6.0).round() as usize;
    while k.pow(6) > n {
        k -= 1;
    }
    while (k + 1).pow(6) <= n {
        k += 1;
    }
    k.max(1)
}

/// Jittered point of cell `flat` of `lattice`; the jitter depends only on
/// `(seed, flat)`.
fn jittered_point(lattice: &PhaseLattice, flat: usize, seed: u64) -> PhasePoint {
    let idx = lattice.unflatten(flat);
    let base = 6 * flat as u64;
    let frac = std::array::from_fn(|d| hashed_unit(seed, base + d as u64));
    lattice.point_in_cell(idx, frac)
}

/// Particles of the stratified-lattice discretization on an explicit lattice.
pub fn sample_on_lattice(profile: &InitialProfile, lattice: &PhaseLattice, seed: u64) -> Ensemble {
    let vol = lattice.cell_volume();
    let particles = (0..lattice.len())
        .into_par_iter()
        .filter_map(|flat| {
            let z = jittered_point(lattice, flat, seed);
            let f = profile.evaluate_or_zero(z);
            (f > 0.0).then(|| Particle::new(z.x, z.v, f * vol))
        })
        .collect();
    Ensemble {
        particles,
        time: 0.0,
    }
}

/// `sum w` of [`sample_on_lattice`] without materializing the particles.
pub fn lattice_total_weight(profile: &InitialProfile, lattice: &PhaseLattice, seed: u64) -> f64 {
    let inner: usize = lattice.dims[1..].iter().product();
    let partials: Vec<f64> = (0..lattice.dims[0])
        .into_par_iter()
        .map(|i0| {
            let mut acc = 0.0;
            for rest in 0..inner {
                let z = jittered_point(lattice, i0 * inner + rest, seed);
                acc += profile.evaluate_or_zero(z);
            }
            acc
        })
        .collect();
    partials.iter().sum::<f64>() * lattice.cell_volume()
}

/// Discretizes `profile` into about `n` particles, deterministically in `seed`.
pub fn sample_ensemble(
    profile: &InitialProfile,
    n: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Ensemble> {
    if n == 0 {
        return invalid("sample_ensemble needs N >= 1");
    }
    profile.validate()?;
    let mass = profile.mass();
    if !(mass > 0.0) || !mass.is_finite() {
        return invalid(format!(
            "profile mass must be finite and positive, got {mass}"
        ));
    }
    match mode {
        SamplingMode::StratifiedLattice => {
            let lattice = PhaseLattice::uniform(profile.bounding_box(), lattice_per_dim(n))?;
            let ens = sample_on_lattice(profile, &lattice, seed);
            if ens.is_empty() {
                return invalid("lattice too coarse: every cell evaluates to zero");
            }
            Ok(ens)
        }
        SamplingMode::MonteCarlo => sample_monte_carlo(profile, n, seed, mass),
    }
}

fn uniform_in_ball<R: Rng>(rng: &mut R, center: Vec3, radius: f64) -> Vec3 {
    loop {
        let u = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if u.norm_squared() < 1.0 {
            return center + u * radius;
        }
    }
}

fn normal3<R: Rng>(rng: &mut R, center: Vec3, width: f64) -> Vec3 {
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    center + Vec3::new(g(), g(), g()) * width
}

/// Index `i` with `cumulative[i-1] <= u < cumulative[i]`.
fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn draw_unbanded<R: Rng>(rng: &mut R, profile: &InitialProfile, cum: &[f64]) -> PhasePoint {
    match &profile.shape {
        ProfileShape::GaussianProduct { lumps } => {
            let l = &lumps[pick(cum, rng.random::<f64>() * cum[cum.len() - 1])];
            PhasePoint::new(
                normal3(rng, l.x_center, l.x_width),
                normal3(rng, l.v_center, l.v_width),
            )
        }
        ProfileShape::BallBall {
            x_center,
            v_center,
            x_radius,
            v_radius,
            ..
        } => PhasePoint::new(
            uniform_in_ball(rng, *x_center, *x_radius),
            uniform_in_ball(rng, *v_center, *v_radius),
        ),
        ProfileShape::Tabulated { table } => {
            let cell = table.unflatten(pick(cum, rng.random::<f64>() * cum[cum.len() - 1]));
            PhasePoint::from_array(std::array::from_fn(|d| {
                table.origin[d] + (cell[d] as f64 + rng.random::<f64>()) * table.spacing[d]
            }))
        }
    }
}

fn sample_monte_carlo(
    profile: &InitialProfile,
    n: usize,
    seed: u64,
    mass: f64,
) -> Result<Ensemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cum = match &profile.shape {
        ProfileShape::GaussianProduct { lumps } => cumulative(lumps.iter().map(|l| l.mass())),
        ProfileShape::BallBall { .. } => vec![1.0],
        ProfileShape::Tabulated { table } => cumulative(table.values.iter().copied()),
    };
    let w = mass / n as f64;
    let max_attempts = 10_000 * n.max(100);
    let mut particles = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while particles.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return invalid("band rejection sampling accepts too rarely");
        }
        let z = draw_unbanded(&mut rng, profile, &cum);
        if let Some(b) = profile.band {
            if !b.admits(profile.evaluate_unbanded(z)?) {
                continue;
            }
        }
        particles.push(Particle::new(z.x, z.v, w));
    }
    Ok(Ensemble {
        particles,
        time: 0.0,
    })
}
