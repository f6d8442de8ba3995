//! Axis-aligned boxes and midpoint lattices in six-dimensional phase space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::vec3::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub lo: [f64; 6],
    pub hi: [f64; 6],
}

impl PhaseBox {
    pub fn new(lo: [f64; 6], hi: [f64; 6]) -> Result<Self> {
        for d in 0..6 {
            if !(hi[d] > lo[d]) || !lo[d].is_finite() || !hi[d].is_finite() {
                return invalid(format!(
                    "degenerate phase box along axis {d}: [{}, {}]",
                    lo[d], hi[d]
                ));
            }
        }
        Ok(PhaseBox { lo, hi })
    }

    pub fn union(&self, o: &PhaseBox) -> PhaseBox {
        PhaseBox {
            lo: std::array::from_fn(|d| self.lo[d].min(o.lo[d])),
            hi: std::array::from_fn(|d| self.hi[d].max(o.hi[d])),
        }
    }

    pub fn contains(&self, z: PhasePoint) -> bool {
        let a = z.to_array();
        (0..6).all(|d| a[d] >= self.lo[d] && a[d] <= self.hi[d])
    }

    /// Grows every side by `margin[d]`.
    pub fn expanded(&self, margin: [f64; 6]) -> PhaseBox {
        PhaseBox {
            lo: std::array::from_fn(|d| self.lo[d] - margin[d]),
            hi: std::array::from_fn(|d| self.hi[d] + margin[d]),
        }
    }

    pub fn volume(&self) -> f64 {
        (0..6).map(|d| self.hi[d] - self.lo[d]).product()
    }
}

/// Midpoint lattice of `dims[0] x ... x dims[5]` cells covering a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLattice {
    pub bounds: PhaseBox,
    pub dims: [usize; 6],
}

impl PhaseLattice {
    pub fn new(bounds: PhaseBox, dims: [usize; 6]) -> Result<Self> {
        if dims.contains(&0) {
            return invalid("phase lattice needs at least one cell per axis");
        }
        Ok(PhaseLattice { bounds, dims })
    }

    pub fn uniform(bounds: PhaseBox, per_dim: usize) -> Result<Self> {
        PhaseLattice::new(bounds, [per_dim; 6])
    }

    pub fn spacing(&self) -> [f64; 6] {
        std::array::from_fn(|d| (self.bounds.hi[d] - self.bounds.lo[d]) / self.dims[d] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of flat cell `n` (axis 0 slowest).
    pub fn unflatten(&self, mut n: usize) -> [usize; 6] {
        let mut idx = [0usize; 6];
        for d in (0..6).rev() {
            idx[d] = n % self.dims[d];
            n /= self.dims[d];
        }
        idx
    }

    /// Point at fractional offset `frac` (each in [0,1)) inside cell `idx`.
    pub fn point_in_cell(&self, idx: [usize; 6], frac: [f64; 6]) -> PhasePoint {
        let h = self.spacing();
        PhasePoint::from_array(std::array::from_fn(|d| {
            self.bounds.lo[d] + (idx[d] as f64 + frac[d]) * h[d]
        }))
    }

    pub fn center(&self, idx: [usize; 6]) -> PhasePoint {
        self.point_in_cell(idx, [0.5; 6])
    }

    /// Midpoint-rule integral of `f`; parallel over the slowest axis with an
    /// ordered final reduction, so the result does not depend on thread count.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(PhasePoint) -> f64 + Sync,
    {
        let inner: usize = self.dims[1..].iter().product();
        let partials: Vec<f64> = (0..self.dims[0])
            .into_par_iter()
            .map(|i0| {
                let mut acc = 0.0;
                for rest in 0..inner {
                    let idx = self.unflatten(i0 * inner + rest);
                    acc += f(self.center(idx));
                }
                acc
            })
            .collect();
        partials.iter().sum::<f64>() * self.cell_volume()
    }
}

/// SplitMix64 finalizer: a counter-based hash giving independent streams per cell.
#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0,1) from `(seed, counter)`.
#[inline]
pub(crate) fn hashed_unit(seed: u64, counter: u64) -> f64 {
    let bits = splitmix64(splitmix64(seed) ^ counter.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> PhaseBox {
        PhaseBox::new([-1.0; 6], [1.0; 6]).unwrap()
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(PhaseBox::new([0.0; 6], [0.0; 6]).is_err());
        assert!(PhaseLattice::new(unit_box(), [1, 1, 0, 1, 1, 1]).is_err());
    }

    #[test]
    fn integrates_constants_and_linear_functions_exactly() {
        let lat = PhaseLattice::uniform(unit_box(), 4).unwrap();
        assert!((lat.integrate(|_| 1.0) - 64.0).abs() < 1e-12);
        assert!(lat.integrate(|z| z.x.x + z.v.z).abs() < 1e-12);
    }

    #[test]
    fn unflatten_matches_row_major_order() {
        let lat = PhaseLattice::new(unit_box(), [2, 3, 4, 5, 6, 7]).unwrap();
        let n = ((((3 + 2) * 4 + 3) * 5 + 4) * 6 + 5) * 7 + 6;
        assert_eq!(lat.unflatten(n), [1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn hashed_unit_is_in_range_and_seed_dependent() {
        let a: Vec<f64> = (0..1000).map(|i| hashed_unit(7, i)).collect();
        assert!(a.iter().all(|&u| (0.0..1.0).contains(&u)));
        let mean = a.iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05);
        assert_ne!(hashed_unit(7, 3), hashed_unit(8, 3));
    }
}
