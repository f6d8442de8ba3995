//! Uniform node grids in position space, cloud-in-cell deposition of `(rho, J)`,
//! finite-difference vector calculus and the binary grid format.
//!
//! Values live on nodes; node `(i, j, k)` sits at `origin + h (i, j, k)` and
//! represents the volume `h^3`. Flat storage is row-major with `i` slowest.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::hat;
use crate::phase::ensemble::Ensemble;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn new(origin: Vec3, spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return invalid(format!("grid spacing must be positive, got {spacing}"));
        }
        if dims.iter().any(|&n| n < 2) {
            return invalid(format!(
                "grid needs at least two nodes per axis, got {dims:?}"
            ));
        }
        if !origin.is_finite() {
            return invalid("grid origin must be finite");
        }
        Ok(GridGeometry {
            origin,
            spacing,
            dims,
        })
    }

    /// `n^3` nodes spanning `center +- half_width` on every axis.
    pub fn cube(center: Vec3, half_width: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return invalid("grid needs at least two nodes per axis");
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        GridGeometry::new(
            center - Vec3::new(half_width, half_width, half_width),
            h,
            [n; 3],
        )
    }

    /// Same box with half the spacing.
    pub fn refined(&self) -> GridGeometry {
        GridGeometry {
            origin: self.origin,
            spacing: 0.5 * self.spacing,
            dims: self.dims.map(|n| 2 * n - 1),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn unflatten(&self, n: usize) -> [usize; 3] {
        let k = n % self.dims[2];
        let j = (n / self.dims[2]) % self.dims[1];
        [n / (self.dims[1] * self.dims[2]), j, k]
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing;
        self.origin + Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h)
    }

    pub fn node_flat(&self, n: usize) -> Vec3 {
        let [i, j, k] = self.unflatten(n);
        self.node(i, j, k)
    }

    pub fn nodes(&self) -> Vec<Vec3> {
        (0..self.len()).map(|n| self.node_flat(n)).collect()
    }

    /// Far corner `origin + h (dims - 1)`.
    pub fn upper(&self) -> Vec3 {
        self.node(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    pub fn contains(&self, x: Vec3) -> bool {
        let hi = self.upper();
        (0..3).all(|d| x[d] >= self.origin[d] && x[d] <= hi[d])
    }

    /// Lower node index and fractional offsets of the cell containing `x`, or
    /// `None` outside the node box.
    #[inline]
    pub fn locate(&self, x: Vec3) -> Option<([usize; 3], [f64; 3])> {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..3 {
            let s = (x[d] - self.origin[d]) / self.spacing;
            let top = (self.dims[d] - 1) as f64;
            if !(s >= 0.0 && s <= top) {
                return None;
            }
            let b = (s.floor() as usize).min(self.dims[d] - 2);
            base[d] = b;
            frac[d] = s - b as f64;
        }
        Some((base, frac))
    }
}

/// The eight trilinear corner weights, ordered by `(di, dj, dk)` bits.
#[inline]
fn corner_weights(frac: [f64; 3]) -> [f64; 8] {
    let [fx, fy, fz] = frac;
    let (gx, gy, gz) = (1.0 - fx, 1.0 - fy, 1.0 - fz);
    [
        gx * gy * gz,
        gx * gy * fz,
        gx * fy * gz,
        gx * fy * fz,
        fx * gy * gz,
        fx * gy * fz,
        fx * fy * gz,
        fx * fy * fz,
    ]
}

#[inline]
fn corner_index(g: &GridGeometry, base: [usize; 3], c: usize) -> usize {
    g.index(
        base[0] + (c >> 2),
        base[1] + ((c >> 1) & 1),
        base[2] + (c & 1),
    )
}

fn require_same(a: &GridGeometry, b: &GridGeometry) -> Result<()> {
    if a != b {
        return invalid("grid geometries differ");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(geometry: GridGeometry) -> Self {
        ScalarGrid {
            values: vec![0.0; geometry.len()],
            geometry,
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return invalid(format!(
                "{} values for {} nodes",
                values.len(),
                geometry.len()
            ));
        }
        Ok(ScalarGrid { geometry, values })
    }

    pub fn from_fn(geometry: GridGeometry, f: impl Fn(Vec3) -> f64) -> Self {
        ScalarGrid {
            values: (0..geometry.len())
                .map(|n| f(geometry.node_flat(n)))
                .collect(),
            geometry,
        }
    }

    /// Node values equal to the mean of `f` over the node's cube `[-h/2, h/2]^3`,
    /// estimated with `sub^3` midpoint samples.
    pub fn from_fn_averaged(geometry: GridGeometry, sub: usize, f: impl Fn(Vec3) -> f64) -> Self {
        let h = geometry.spacing;
        let offsets: Vec<f64> = (0..sub)
            .map(|a| ((a as f64 + 0.5) / sub as f64 - 0.5) * h)
            .collect();
        let norm = 1.0 / (sub * sub * sub) as f64;
        ScalarGrid::from_fn(geometry, |x| {
            let mut acc = 0.0;
            for &a in &offsets {
                for &b in &offsets {
                    for &c in &offsets {
                        acc += f(x + Vec3::new(a, b, c));
                    }
                }
            }
            acc * norm
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.geometry.index(i, j, k)]
    }

    /// `sum value * h^3`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.cell_volume()
    }

    /// `(sum |value|^p h^3)^(1/p)`, exact for piecewise-constant node data.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return invalid(format!("L^p norm needs p >= 1, got {p}"));
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        Ok((s * self.geometry.cell_volume()).powf(1.0 / p))
    }

    /// `sum a b h^3`.
    pub fn inner(&self, other: &ScalarGrid) -> Result<f64> {
        require_same(&self.geometry, &other.geometry)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.geometry.cell_volume())
    }

    pub fn scaled(&self, c: f64) -> ScalarGrid {
        ScalarGrid {
            geometry: self.geometry,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Data moved by `shift` nodes along each axis; vacated nodes are zero.
    pub fn shifted(&self, shift: [isize; 3]) -> ScalarGrid {
        let g = self.geometry;
        let mut out = ScalarGrid::zeros(g);
        for n in 0..g.len() {
            let idx = g.unflatten(n);
            let src: Option<Vec<usize>> = (0..3)
                .map(|d| {
                    let s = idx[d] as isize - shift[d];
                    (s >= 0 && (s as usize) < g.dims[d]).then_some(s as usize)
                })
                .collect();
            if let Some(s) = src {
                out.values[n] = self.get(s[0], s[1], s[2]);
            }
        }
        out
    }

    /// Trilinear interpolation; `None` outside the node box.
    pub fn sample(&self, x: Vec3) -> Option<f64> {
        let (base, frac) = self.geometry.locate(x)?;
        let w = corner_weights(frac);
        Some(
            (0..8)
                .map(|c| w[c] * self.values[corner_index(&self.geometry, base, c)])
                .sum(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    pub geometry: GridGeometry,
    pub values: Vec<Vec3>,
}

impl VectorGrid {
    pub fn zeros(geometry: GridGeometry) -> Self {
        VectorGrid {
            values: vec![Vec3::ZERO; geometry.len()],
            geometry,
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != geometry.len() {
            return invalid(format!(
                "{} values for {} nodes",
                values.len(),
                geometry.len()
            ));
        }
        Ok(VectorGrid { geometry, values })
    }

    pub fn from_fn(geometry: GridGeometry, f: impl Fn(Vec3) -> Vec3) -> Self {
        VectorGrid {
            values: (0..geometry.len())
                .map(|n| f(geometry.node_flat(n)))
                .collect(),
            geometry,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.values[self.geometry.index(i, j, k)]
    }

    pub fn component(&self, d: usize) -> ScalarGrid {
        ScalarGrid {
            geometry: self.geometry,
            values: self.values.iter().map(|v| v[d]).collect(),
        }
    }

    /// `sum |F|^2 h^3`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_squared()).sum::<f64>() * self.geometry.cell_volume()
    }

    /// `sum a . b h^3`.
    pub fn inner(&self, other: &VectorGrid) -> Result<f64> {
        require_same(&self.geometry, &other.geometry)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.dot(*b))
            .sum();
        Ok(s * self.geometry.cell_volume())
    }

    /// `sum F h^3`.
    pub fn integral(&self) -> Vec3 {
        self.values.iter().fold(Vec3::ZERO, |acc, v| acc + *v) * self.geometry.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> VectorGrid {
        VectorGrid {
            geometry: self.geometry,
            values: self.values.iter().map(|v| *v * c).collect(),
        }
    }

    pub fn sample(&self, x: Vec3) -> Option<Vec3> {
        let (base, frac) = self.geometry.locate(x)?;
        let w = corner_weights(frac);
        Some((0..8).fold(Vec3::ZERO, |acc, c| {
            acc + self.values[corner_index(&self.geometry, base, c)] * w[c]
        }))
    }
}

/// Second-order derivative of `f` along `axis` at node `idx`: central in the
/// interior, one-sided three-point at the two ends.
#[inline]
fn axis_derivative(
    g: &GridGeometry,
    f: &impl Fn(usize) -> f64,
    idx: [usize; 3],
    axis: usize,
) -> f64 {
    let n = g.dims[axis];
    let at = |m: usize| {
        let mut q = idx;
        q[axis] = m;
        f(g.index(q[0], q[1], q[2]))
    };
    let i = idx[axis];
    let inv = 1.0 / (2.0 * g.spacing);
    if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv
    } else if i == n - 1 {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) * inv
    } else {
        (at(i + 1) - at(i - 1)) * inv
    }
}

fn require_stencil(g: &GridGeometry) -> Result<()> {
    if g.dims.iter().any(|&n| n < 3) {
        return invalid(format!(
            "finite differences need at least 3 nodes per axis, got {:?}",
            g.dims
        ));
    }
    Ok(())
}

pub fn grid_grad(f: &ScalarGrid) -> Result<VectorGrid> {
    let g = f.geometry;
    require_stencil(&g)?;
    let get = |n: usize| f.values[n];
    let values = (0..g.len())
        .map(|n| {
            let idx = g.unflatten(n);
            Vec3::new(
                axis_derivative(&g, &get, idx, 0),
                axis_derivative(&g, &get, idx, 1),
                axis_derivative(&g, &get, idx, 2),
            )
        })
        .collect();
    Ok(VectorGrid {
        geometry: g,
        values,
    })
}

pub fn grid_div(f: &VectorGrid) -> Result<ScalarGrid> {
    let g = f.geometry;
    require_stencil(&g)?;
    let values = (0..g.len())
        .map(|n| {
            let idx = g.unflatten(n);
            (0..3)
                .map(|d| axis_derivative(&g, &|m| f.values[m][d], idx, d))
                .sum()
        })
        .collect();
    Ok(ScalarGrid {
        geometry: g,
        values,
    })
}

pub fn grid_curl(f: &VectorGrid) -> Result<VectorGrid> {
    let g = f.geometry;
    require_stencil(&g)?;
    let values = (0..g.len())
        .map(|n| {
            let idx = g.unflatten(n);
            let d =
                |comp: usize, axis: usize| axis_derivative(&g, &|m| f.values[m][comp], idx, axis);
            Vec3::new(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1))
        })
        .collect();
    Ok(VectorGrid {
        geometry: g,
        values,
    })
}

/// Fixed-point scale for exact deposition sums.
const FIXED_SCALE: f64 = (1u128 << 96) as f64;
/// Largest per-contribution magnitude representable without overflow risk.
const FIXED_LIMIT: f64 = (1u64 << 30) as f64;

#[inline]
fn to_fixed(x: f64) -> i128 {
    (x * FIXED_SCALE).round() as i128
}

#[inline]
fn from_fixed(n: i128) -> f64 {
    n as f64 / FIXED_SCALE
}

/// Exact per-node sums of `w` and `w v_hat` (in units of mass, not density).
#[derive(Debug, Clone, PartialEq)]
struct ExactMoments {
    mass: Vec<i128>,
    current: Vec<[i128; 3]>,
    escaped: i128,
}

/// Cloud-in-cell deposit of an ensemble: node densities `rho`, currents `J` and
/// the weight of particles outside the node box.
#[derive(Debug, Clone, PartialEq)]
pub struct DepositGrid {
    pub rho: ScalarGrid,
    pub current: VectorGrid,
    pub escaped_weight: f64,
    exact: ExactMoments,
}

impl DepositGrid {
    pub fn geometry(&self) -> &GridGeometry {
        &self.rho.geometry
    }

    /// `sum rho h^3`.
    pub fn grid_mass(&self) -> f64 {
        self.rho.integral()
    }

    /// Sum of two deposits on the same geometry, computed from the exact moments,
    /// so it is bitwise equal to the deposit of the concatenated ensembles.
    pub fn merged(&self, other: &DepositGrid) -> Result<DepositGrid> {
        require_same(self.geometry(), other.geometry())?;
        let exact = ExactMoments {
            mass: self
                .exact
                .mass
                .iter()
                .zip(&other.exact.mass)
                .map(|(a, b)| a + b)
                .collect(),
            current: self
                .exact
                .current
                .iter()
                .zip(&other.exact.current)
                .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
                .collect(),
            escaped: self.exact.escaped + other.exact.escaped,
        };
        Ok(DepositGrid::from_exact(*self.geometry(), exact))
    }

    fn from_exact(geometry: GridGeometry, exact: ExactMoments) -> DepositGrid {
        let inv_vol = 1.0 / geometry.cell_volume();
        let rho = exact
            .mass
            .iter()
            .map(|&m| from_fixed(m) * inv_vol)
            .collect();
        let current = exact
            .current
            .iter()
            .map(|c| Vec3::new(from_fixed(c[0]), from_fixed(c[1]), from_fixed(c[2])) * inv_vol)
            .collect();
        DepositGrid {
            rho: ScalarGrid {
                geometry,
                values: rho,
            },
            current: VectorGrid {
                geometry,
                values: current,
            },
            escaped_weight: from_fixed(exact.escaped),
            exact,
        }
    }

    /// Builds a deposit from node densities directly (no particles, no escapes).
    pub fn from_densities(rho: ScalarGrid, current: VectorGrid) -> Result<DepositGrid> {
        require_same(&rho.geometry, &current.geometry)?;
        let vol = rho.geometry.cell_volume();
        let exact = ExactMoments {
            mass: rho.values.iter().map(|&r| to_fixed(r * vol)).collect(),
            current: current
                .values
                .iter()
                .map(|j| {
                    [
                        to_fixed(j.x * vol),
                        to_fixed(j.y * vol),
                        to_fixed(j.z * vol),
                    ]
                })
                .collect(),
            escaped: 0,
        };
        Ok(DepositGrid {
            rho,
            current,
            escaped_weight: 0.0,
            exact,
        })
    }
}

/// Cloud-in-cell deposition of `w` and `w v_hat`. Accumulation is exact in
/// fixed point, so the result does not depend on particle order.
pub fn deposit(ensemble: &Ensemble, geometry: &GridGeometry) -> Result<DepositGrid> {
    let g = GridGeometry::new(geometry.origin, geometry.spacing, geometry.dims)?;
    let mut mass = vec![0i128; g.len()];
    let mut current = vec![[0i128; 3]; g.len()];
    let mut escaped = 0i128;
    for (i, p) in ensemble.particles.iter().enumerate() {
        if !(p.w.abs() < FIXED_LIMIT) {
            return invalid(format!(
                "particle {i} weight {} too large for deposition",
                p.w
            ));
        }
        match g.locate(p.x) {
            None => escaped += to_fixed(p.w),
            Some((base, frac)) => {
                let u = hat(p.v);
                for (c, wc) in corner_weights(frac).into_iter().enumerate() {
                    if wc == 0.0 {
                        continue;
                    }
                    let n = corner_index(&g, base, c);
                    let m = p.w * wc;
                    mass[n] += to_fixed(m);
                    let cur = &mut current[n];
                    cur[0] += to_fixed(m * u.x);
                    cur[1] += to_fixed(m * u.y);
                    cur[2] += to_fixed(m * u.z);
                }
            }
        }
    }
    Ok(DepositGrid::from_exact(
        g,
        ExactMoments {
            mass,
            current,
            escaped,
        },
    ))
}

/// JSON sidecar of a binary grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSidecar {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
    pub components: usize,
    pub layout: String,
}

const LAYOUT: &str = "row-major, i slowest, components innermost, little-endian f64";

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_raw(
    path: &Path,
    geometry: &GridGeometry,
    components: usize,
    data: impl Iterator<Item = f64>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for x in data {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    let sidecar = GridSidecar {
        origin: geometry.origin.to_array(),
        spacing: geometry.spacing,
        dims: geometry.dims,
        components,
        layout: LAYOUT.to_string(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn read_raw(path: &Path, components: usize) -> Result<(GridGeometry, Vec<f64>)> {
    let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.components != components {
        return Err(Error::Format(format!(
            "expected {components} components, sidecar says {}",
            sidecar.components
        )));
    }
    let geometry = GridGeometry::new(
        Vec3::from_array(sidecar.origin),
        sidecar.spacing,
        sidecar.dims,
    )?;
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * components * geometry.len() {
        return Err(Error::Format(format!(
            "{} bytes for {} nodes",
            bytes.len(),
            geometry.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((geometry, data))
}

impl ScalarGrid {
    /// Writes `path` (raw data) and `path.json` (sidecar).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_raw(
            path.as_ref(),
            &self.geometry,
            1,
            self.values.iter().copied(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScalarGrid> {
        let (geometry, values) = read_raw(path.as_ref(), 1)?;
        Ok(ScalarGrid { geometry, values })
    }
}

impl VectorGrid {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_raw(
            path.as_ref(),
            &self.geometry,
            3,
            self.values.iter().flat_map(|v| v.to_array()),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<VectorGrid> {
        let (geometry, data) = read_raw(path.as_ref(), 3)?;
        let values = data
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect();
        Ok(VectorGrid { geometry, values })
    }
}
