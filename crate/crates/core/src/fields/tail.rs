//! Far-field energy outside a truncation box, from the monopole terms of the
//! charge and current distributions.
//!
//! For a box containing `c`, a ray from `c` in direction `w` leaves the box at
//! distance `s(w)`, so `int_{outside} g(w) |x - c|^-k dx = int g(w) s(w)^(3-k) / (k-3) dw`.
//! On a face at distance `d` from `c`, `dw = d |p - c|^-3 dA`, which turns the
//! solid-angle integral into a sum of face integrals.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::FOUR_PI;
use crate::quadrature::{composite, GaussLegendre};
use crate::vec3::Vec3;

const PIECES: usize = 12;
const ORDER: usize = 8;

/// `int_{R^3 \ [lo, hi]} g((x-c)/|x-c|) |x - c|^-k dx` for `k > 3` and `c` inside the box.
pub fn exterior_power_integral(
    lo: Vec3,
    hi: Vec3,
    c: Vec3,
    k: f64,
    g: impl Fn(Vec3) -> f64,
) -> Result<f64> {
    if !(k > 3.0) {
        return invalid(format!("exterior power integral diverges for k = {k}"));
    }
    if (0..3).any(|d| !(c[d] > lo[d] && c[d] < hi[d])) {
        return invalid("center must lie strictly inside the box");
    }
    let rule = GaussLegendre::new(ORDER);
    let nodes = |a: f64, b: f64| {
        let breaks: Vec<f64> = (0..=PIECES)
            .map(|i| a + (b - a) * i as f64 / PIECES as f64)
            .collect();
        composite(&rule, &breaks)
    };
    let mut total = 0.0;
    for axis in 0..3 {
        let (p, q) = ((axis + 1) % 3, (axis + 2) % 3);
        let up = nodes(lo[p], hi[p]);
        let uq = nodes(lo[q], hi[q]);
        for (plane, d) in [
            (lo[axis], c[axis] - lo[axis]),
            (hi[axis], hi[axis] - c[axis]),
        ] {
            let mut face = 0.0;
            for &(a, wa) in &up {
                for &(b, wb) in &uq {
                    let mut x = Vec3::ZERO;
                    x = set(x, axis, plane);
                    x = set(x, p, a);
                    x = set(x, q, b);
                    let r = x - c;
                    let rho = r.norm();
                    face += wa * wb * g(r / rho) * rho.powf(-k);
                }
            }
            total += d / (k - 3.0) * face;
        }
    }
    Ok(total)
}

fn set(mut v: Vec3, axis: usize, value: f64) -> Vec3 {
    match axis {
        0 => v.x = value,
        1 => v.y = value,
        _ => v.z = value,
    }
    v
}

/// Field energy outside a box, from a point charge `charge` and a point current
/// element `current` at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldTails {
    /// `int_outside |E|^2` with `|E| = charge / (4 pi r^2)`.
    pub electric: f64,
    /// `int_outside |curl A|^2` with `A = current H`.
    pub magnetic_curl: f64,
    /// `int_outside (div A)^2` with `A = current H`.
    pub magnetic_div: f64,
}

pub fn field_tails(
    lo: Vec3,
    hi: Vec3,
    center: Vec3,
    charge: f64,
    current: Vec3,
) -> Result<FieldTails> {
    let norm = 1.0 / (FOUR_PI * FOUR_PI);
    let radial = exterior_power_integral(lo, hi, center, 4.0, |_| 1.0)?;
    let (magnetic_curl, magnetic_div) = if current == Vec3::ZERO {
        (0.0, 0.0)
    } else {
        (
            norm * exterior_power_integral(lo, hi, center, 4.0, |w| {
                current.cross(w).norm_squared()
            })?,
            norm * exterior_power_integral(lo, hi, center, 4.0, |w| current.dot(w).powi(2))?,
        )
    };
    Ok(FieldTails {
        electric: norm * charge * charge * radial,
        magnetic_curl,
        magnetic_div,
    })
}
