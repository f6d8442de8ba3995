//! Direct summation of kernel and potential sums over point sources.
//!
//! Sources are stored as structure-of-arrays segments. Within a segment the sum
//! runs in index order over four interleaved lanes (source `j` feeds lane
//! `j % 4`), the lanes are combined as `(l0 + l1) + (l2 + l3)`, and segment
//! results are added in segment order. The order never depends on the number of
//! worker threads.

use rayon::prelude::*;

use crate::kernel::{hat, KernelFamily, MollifierShape, FOUR_PI};
use crate::phase::ensemble::Ensemble;
use crate::vec3::Vec3;

const LANES: usize = 4;

/// One contiguous block of point sources with scalar weight `w` and vector
/// weight `q` (for particles, `q = w v_hat`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceSegment {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
    qx: Vec<f64>,
    qy: Vec<f64>,
    qz: Vec<f64>,
}

impl SourceSegment {
    pub fn from_ensemble(ensemble: &Ensemble) -> Self {
        let mut s = SourceSegment::default();
        for p in &ensemble.particles {
            s.push(p.x, p.w, hat(p.v) * p.w);
        }
        s
    }

    pub fn push(&mut self, x: Vec3, w: f64, q: Vec3) {
        self.x.push(x.x);
        self.y.push(x.y);
        self.z.push(x.z);
        self.w.push(w);
        self.qx.push(q.x);
        self.qy.push(q.y);
        self.qz.push(q.z);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn position(&self, j: usize) -> Vec3 {
        Vec3::new(self.x[j], self.y[j], self.z[j])
    }

    pub fn has_vector_weights(&self) -> bool {
        self.qx
            .iter()
            .chain(&self.qy)
            .chain(&self.qz)
            .any(|&q| q != 0.0)
    }
}

/// Ordered list of source segments; the field of the set is the segment-ordered
/// sum of segment fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sources {
    pub segments: Vec<SourceSegment>,
}

impl Sources {
    pub fn from_ensemble(ensemble: &Ensemble) -> Self {
        Sources {
            segments: vec![SourceSegment::from_ensemble(ensemble)],
        }
    }

    /// One segment per ensemble, in order.
    pub fn from_parts(parts: &[&Ensemble]) -> Self {
        Sources {
            segments: parts
                .iter()
                .map(|e| SourceSegment::from_ensemble(e))
                .collect(),
        }
    }

    pub fn from_segment(segment: SourceSegment) -> Self {
        Sources {
            segments: vec![segment],
        }
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(SourceSegment::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_vector_weights(&self) -> bool {
        self.segments.iter().any(SourceSegment::has_vector_weights)
    }
}

#[inline(always)]
fn reduce(l: [f64; LANES]) -> f64 {
    (l[0] + l[1]) + (l[2] + l[3])
}

/// `(sum w f(r2) d, sum q x (f(r2) d))` with `d = x - x_j`.
#[inline(always)]
fn kernel_segment<F: Fn(f64) -> f64>(
    s: &SourceSegment,
    x: Vec3,
    with_b: bool,
    factor: &F,
) -> (Vec3, Vec3) {
    let n = s.len();
    let mut ex = [0.0; LANES];
    let mut ey = [0.0; LANES];
    let mut ez = [0.0; LANES];
    let mut bx = [0.0; LANES];
    let mut by = [0.0; LANES];
    let mut bz = [0.0; LANES];
    let full = n / LANES * LANES;
    let mut b = 0;
    while b < full {
        let dx: [f64; LANES] = std::array::from_fn(|l| x.x - s.x[b + l]);
        let dy: [f64; LANES] = std::array::from_fn(|l| x.y - s.y[b + l]);
        let dz: [f64; LANES] = std::array::from_fn(|l| x.z - s.z[b + l]);
        let f: [f64; LANES] =
            std::array::from_fn(|l| factor(dx[l] * dx[l] + dy[l] * dy[l] + dz[l] * dz[l]));
        for l in 0..LANES {
            let c = s.w[b + l] * f[l];
            ex[l] += c * dx[l];
            ey[l] += c * dy[l];
            ez[l] += c * dz[l];
        }
        if with_b {
            for l in 0..LANES {
                let (kx, ky, kz) = (f[l] * dx[l], f[l] * dy[l], f[l] * dz[l]);
                let (qx, qy, qz) = (s.qx[b + l], s.qy[b + l], s.qz[b + l]);
                bx[l] += qy * kz - qz * ky;
                by[l] += qz * kx - qx * kz;
                bz[l] += qx * ky - qy * kx;
            }
        }
        b += LANES;
    }
    for j in full..n {
        let l = j - full;
        let (dx, dy, dz) = (x.x - s.x[j], x.y - s.y[j], x.z - s.z[j]);
        let f = factor(dx * dx + dy * dy + dz * dz);
        let c = s.w[j] * f;
        ex[l] += c * dx;
        ey[l] += c * dy;
        ez[l] += c * dz;
        if with_b {
            let (kx, ky, kz) = (f * dx, f * dy, f * dz);
            bx[l] += s.qy[j] * kz - s.qz[j] * ky;
            by[l] += s.qz[j] * kx - s.qx[j] * kz;
            bz[l] += s.qx[j] * ky - s.qy[j] * kx;
        }
    }
    (
        Vec3::new(reduce(ex), reduce(ey), reduce(ez)),
        Vec3::new(reduce(bx), reduce(by), reduce(bz)),
    )
}

/// `(sum w P(r2), sum q P(r2))`.
#[inline(always)]
fn potential_segment<F: Fn(f64) -> f64>(
    s: &SourceSegment,
    x: Vec3,
    with_vector: bool,
    pot: &F,
) -> (f64, Vec3) {
    let n = s.len();
    let mut ps = [0.0; LANES];
    let mut ax = [0.0; LANES];
    let mut ay = [0.0; LANES];
    let mut az = [0.0; LANES];
    let full = n / LANES * LANES;
    let mut b = 0;
    while b < full {
        let h: [f64; LANES] = std::array::from_fn(|l| {
            let (dx, dy, dz) = (x.x - s.x[b + l], x.y - s.y[b + l], x.z - s.z[b + l]);
            pot(dx * dx + dy * dy + dz * dz)
        });
        for l in 0..LANES {
            ps[l] += s.w[b + l] * h[l];
        }
        if with_vector {
            for l in 0..LANES {
                ax[l] += s.qx[b + l] * h[l];
                ay[l] += s.qy[b + l] * h[l];
                az[l] += s.qz[b + l] * h[l];
            }
        }
        b += LANES;
    }
    for j in full..n {
        let l = j - full;
        let (dx, dy, dz) = (x.x - s.x[j], x.y - s.y[j], x.z - s.z[j]);
        let h = pot(dx * dx + dy * dy + dz * dz);
        ps[l] += s.w[j] * h;
        if with_vector {
            ax[l] += s.qx[j] * h;
            ay[l] += s.qy[j] * h;
            az[l] += s.qz[j] * h;
        }
    }
    (reduce(ps), Vec3::new(reduce(ax), reduce(ay), reduce(az)))
}

fn singular_factor(r2: f64) -> f64 {
    1.0 / (FOUR_PI * r2 * r2.sqrt())
}

/// Dispatches a per-target closure on a monomorphized kernel factor.
macro_rules! with_factor {
    ($kernel:expr, |$f:ident| $body:expr) => {{
        match $kernel.mollifier {
            None => {
                let $f = &singular_factor;
                $body
            }
            Some(m) => match m.shape() {
                MollifierShape::UniformBall => {
                    let r = m.radius();
                    let r2c = r * r;
                    let inv = 1.0 / (FOUR_PI * r * r * r);
                    let $f = &move |r2: f64| if r2 >= r2c { singular_factor(r2) } else { inv };
                    $body
                }
                MollifierShape::WendlandC2 => {
                    let $f = &move |r2: f64| m.kernel_factor(r2);
                    $body
                }
            },
        }
    }};
}

/// `(sum_j w_j K(x - x_j), sum_j q_j x K(x - x_j))` at every target.
pub fn kernel_sums(
    sources: &Sources,
    targets: &[Vec3],
    kernel: KernelFamily,
    with_b: bool,
) -> Vec<(Vec3, Vec3)> {
    with_factor!(kernel, |f| {
        targets
            .par_iter()
            .with_min_len(16)
            .map(|&x| {
                let mut acc: Option<(Vec3, Vec3)> = None;
                for seg in &sources.segments {
                    let (e, b) = kernel_segment(seg, x, with_b, f);
                    acc = Some(match acc {
                        None => (e, b),
                        Some((ae, ab)) => (ae + e, ab + b),
                    });
                }
                acc.unwrap_or((Vec3::ZERO, Vec3::ZERO))
            })
            .collect()
    })
}

/// `(sum_j w_j H(x - x_j), sum_j q_j H(x - x_j))` at every target.
pub fn potential_sums(
    sources: &Sources,
    targets: &[Vec3],
    kernel: KernelFamily,
    with_vector: bool,
) -> Vec<(f64, Vec3)> {
    match kernel.mollifier {
        None => potential_targets(sources, targets, with_vector, &|r2: f64| {
            kernel.potential_from_r2(r2)
        }),
        Some(m) => potential_targets(sources, targets, with_vector, &move |r2: f64| {
            m.potential_from_r2(r2)
        }),
    }
}

fn potential_targets<F: Fn(f64) -> f64 + Sync>(
    sources: &Sources,
    targets: &[Vec3],
    with_vector: bool,
    pot: &F,
) -> Vec<(f64, Vec3)> {
    targets
        .par_iter()
        .with_min_len(16)
        .map(|&x| {
            let mut acc: Option<(f64, Vec3)> = None;
            for seg in &sources.segments {
                let (p, a) = potential_segment(seg, x, with_vector, pot);
                acc = Some(match acc {
                    None => (p, a),
                    Some((ap, aa)) => (ap + p, aa + a),
                });
            }
            acc.unwrap_or((0.0, Vec3::ZERO))
        })
        .collect()
}
