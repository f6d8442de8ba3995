//! Relativistic velocity map and the Coulomb/Newton kernels, exact and mollified.
//!
//! The mollified kernels are closed forms: for a radial unit-mass bump of radius
//! `R`, the shell theorem gives `K_R(x) = K(x) m(|x|/R)` where `m` is the mass
//! fraction enclosed within `|x|`, and `H_R = H` outside the support. No numerical
//! convolution is ever performed here.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::vec3::Vec3;

pub const FOUR_PI: f64 = 4.0 * PI;

/// `v / sqrt(1 + |v|^2)`, the physical velocity of momentum variable `v`.
pub fn hat_velocity(v: Vec3) -> Result<Vec3> {
    if !v.is_finite() {
        return invalid(format!("non-finite velocity {v:?}"));
    }
    Ok(hat(v))
}

/// Unchecked version of [`hat_velocity`] for inner loops.
///
/// The returned norm is strictly below one for every finite input; when
/// rounding would reach the light cone the result is pulled back by a few ulps.
#[inline]
pub fn hat(v: Vec3) -> Vec3 {
    let n2 = v.norm_squared();
    let mut u = if n2.is_finite() {
        v / (1.0 + n2).sqrt()
    } else {
        let s = v.max_abs();
        let w = v / s;
        w / w.norm()
    };
    while u.norm_squared() >= 1.0 {
        u = u * (1.0 - 4.0 * f64::EPSILON);
    }
    u
}

/// `sqrt(1 + |v|^2)`.
#[inline]
pub fn lorentz_factor(v: Vec3) -> f64 {
    (1.0 + v.norm_squared()).sqrt()
}

#[inline]
fn coulomb_factor(r2: f64) -> f64 {
    1.0 / (FOUR_PI * r2 * r2.sqrt())
}

#[inline]
fn newton_from_r2(r2: f64) -> f64 {
    1.0 / (FOUR_PI * r2.sqrt())
}

/// `K(x) = x / (4 pi |x|^3)`.
pub fn coulomb_kernel(x: Vec3) -> Result<Vec3> {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(x * coulomb_factor(r2))
}

/// `H(x) = 1 / (4 pi |x|)`, with `grad H = -K`.
pub fn newton_potential(x: Vec3) -> Result<f64> {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(newton_from_r2(r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierShape {
    /// Normalized indicator of the ball.
    #[default]
    UniformBall,
    /// Wendland's C2 bump `(1-s)^4 (4s+1)`.
    WendlandC2,
}

/// Mollifier `eta^n(x) = n^3 eta(n x)` identified by its integer level `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierSpec {
    pub level: u32,
    #[serde(default)]
    pub shape: MollifierShape,
}

impl MollifierSpec {
    pub fn new(level: u32, shape: MollifierShape) -> Result<Self> {
        if level == 0 {
            return invalid("mollifier level must be positive");
        }
        Ok(MollifierSpec { level, shape })
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.level as f64
    }

    pub fn mollifier(&self) -> Mollifier {
        Mollifier {
            radius: self.radius(),
            shape: self.shape,
        }
    }
}

/// Unit-mass radial bump with an arbitrary support radius.
///
/// [`MollifierSpec`] maps onto this with radius `1/n`; grid potentials use a
/// radius of one cell, which is generally not the reciprocal of an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    radius: f64,
    shape: MollifierShape,
}

impl Mollifier {
    pub fn new(radius: f64, shape: MollifierShape) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("mollifier radius must be positive, got {radius}"));
        }
        Ok(Mollifier { radius, shape })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn shape(&self) -> MollifierShape {
        self.shape
    }

    /// Bump density at distance `r` from its center.
    pub fn density(&self, r: f64) -> f64 {
        let big_r = self.radius;
        if r >= big_r {
            return 0.0;
        }
        let s = r / big_r;
        let r3 = big_r * big_r * big_r;
        match self.shape {
            MollifierShape::UniformBall => 3.0 / (FOUR_PI * r3),
            MollifierShape::WendlandC2 => {
                let t = 1.0 - s;
                21.0 / (2.0 * PI) * t * t * t * t * (4.0 * s + 1.0) / r3
            }
        }
    }

    /// Fraction of the bump's mass inside the ball of radius `r`.
    pub fn enclosed_fraction(&self, r: f64) -> f64 {
        let s = r / self.radius;
        if s >= 1.0 {
            return 1.0;
        }
        match self.shape {
            MollifierShape::UniformBall => s * s * s,
            MollifierShape::WendlandC2 => {
                let s2 = s * s;
                s2 * s * (14.0 + s2 * (-84.0 + s * (140.0 + s * (-90.0 + 21.0 * s))))
            }
        }
    }

    /// Scalar `c` with `K_R(x) = c x`, given `r2 = |x|^2`.
    #[inline]
    pub fn kernel_factor(&self, r2: f64) -> f64 {
        let big_r = self.radius;
        if r2 >= big_r * big_r {
            return coulomb_factor(r2);
        }
        let inv = 1.0 / (FOUR_PI * big_r * big_r * big_r);
        match self.shape {
            MollifierShape::UniformBall => inv,
            MollifierShape::WendlandC2 => {
                let s = r2.sqrt() / big_r;
                let s2 = s * s;
                inv * (14.0 + s2 * (-84.0 + s * (140.0 + s * (-90.0 + 21.0 * s))))
            }
        }
    }

    /// `(H * eta_R)(x)` given `r2 = |x|^2`.
    #[inline]
    pub fn potential_from_r2(&self, r2: f64) -> f64 {
        let big_r = self.radius;
        if r2 >= big_r * big_r {
            return newton_from_r2(r2);
        }
        let s2 = r2 / (big_r * big_r);
        match self.shape {
            MollifierShape::UniformBall => (3.0 - s2) / (2.0 * FOUR_PI * big_r),
            MollifierShape::WendlandC2 => {
                let s = s2.sqrt();
                let poly = 3.0 + s2 * (-7.0 + s2 * (21.0 + s * (-28.0 + s * (15.0 - 3.0 * s))));
                poly / (FOUR_PI * big_r)
            }
        }
    }

    pub fn kernel(&self, x: Vec3) -> Vec3 {
        x * self.kernel_factor(x.norm_squared())
    }

    pub fn potential(&self, x: Vec3) -> f64 {
        self.potential_from_r2(x.norm_squared())
    }
}

/// `K^n(x) = (K * eta^n)(x)`; defined everywhere, zero at the origin.
pub fn mollified_kernel(x: Vec3, spec: &MollifierSpec) -> Vec3 {
    spec.mollifier().kernel(x)
}

/// `(H * eta^n)(x)`; maximal at the origin.
pub fn mollified_potential(x: Vec3, spec: &MollifierSpec) -> f64 {
    spec.mollifier().potential(x)
}

/// Either the singular pair (K, H) or its mollification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFamily {
    pub mollifier: Option<Mollifier>,
}

impl KernelFamily {
    pub fn singular() -> Self {
        KernelFamily { mollifier: None }
    }

    pub fn mollified(spec: &MollifierSpec) -> Self {
        KernelFamily {
            mollifier: Some(spec.mollifier()),
        }
    }

    pub fn with_mollifier(m: Mollifier) -> Self {
        KernelFamily { mollifier: Some(m) }
    }

    pub fn kernel(&self, x: Vec3) -> Result<Vec3> {
        match &self.mollifier {
            Some(m) => Ok(m.kernel(x)),
            None => coulomb_kernel(x),
        }
    }

    pub fn potential(&self, x: Vec3) -> Result<f64> {
        match &self.mollifier {
            Some(m) => Ok(m.potential(x)),
            None => newton_potential(x),
        }
    }

    /// Kernel factor; infinite at `r2 = 0` for the singular family.
    #[inline]
    pub fn factor(&self, r2: f64) -> f64 {
        match &self.mollifier {
            Some(m) => m.kernel_factor(r2),
            None => coulomb_factor(r2),
        }
    }

    #[inline]
    pub fn potential_from_r2(&self, r2: f64) -> f64 {
        match &self.mollifier {
            Some(m) => m.potential_from_r2(r2),
            None => newton_from_r2(r2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use proptest::prelude::*;

    fn spec(n: u32, shape: MollifierShape) -> MollifierSpec {
        MollifierSpec::new(n, shape).unwrap()
    }

    #[test]
    fn hat_velocity_examples() {
        assert_eq!(hat_velocity(Vec3::ZERO).unwrap(), Vec3::ZERO);
        let u = hat_velocity(Vec3::new(3.0, 0.0, 0.0)).unwrap();
        assert!((u.x - 3.0 / 10f64.sqrt()).abs() < 1e-15);
        assert!((u.x - 0.9486833).abs() < 1e-7);
        assert_eq!((u.y, u.z), (0.0, 0.0));

        let w = hat_velocity(Vec3::new(0.0, 1e6, 0.0)).unwrap();
        let gap = 1.0 - w.norm();
        // series oracle: 1 - |v̂| = 1/(2|v|^2) + O(|v|^-4)
        assert!(gap > 0.0);
        assert!((gap - 5e-13).abs() < 1e-15, "gap {gap}");
    }

    #[test]
    fn hat_velocity_rejects_non_finite() {
        assert!(hat_velocity(Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(hat_velocity(Vec3::new(0.0, f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn hat_stays_inside_light_cone_for_huge_momenta() {
        for s in [1e8, 1e12, 1e200, f64::MAX] {
            let u = hat(Vec3::new(s, -s, s));
            assert!(u.norm() < 1.0, "s = {s}");
            assert!(u.is_finite());
        }
    }

    #[test]
    fn coulomb_examples() {
        let k = coulomb_kernel(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((k.x - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((k.x - 0.0795775).abs() < 1e-7);
        let k2 = coulomb_kernel(Vec3::new(0.0, 2.0, 0.0)).unwrap();
        assert!((k2.y - 1.0 / (16.0 * PI)).abs() < 1e-16);
        assert!((k2.y - 0.0198944).abs() < 1e-7);
        assert!(matches!(
            coulomb_kernel(Vec3::ZERO),
            Err(Error::Singularity)
        ));
    }

    #[test]
    fn newton_examples() {
        let h1 = newton_potential(Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((h1 - 0.0795775).abs() < 1e-7);
        let h2 = newton_potential(Vec3::new(0.0, 2.0, 0.0)).unwrap();
        assert_eq!(h2, 0.5 * h1);
        let h10 = newton_potential(Vec3::new(6.0, 8.0, 0.0)).unwrap();
        assert!((h10 - 0.00795775).abs() < 1e-8);
        assert!(matches!(
            newton_potential(Vec3::ZERO),
            Err(Error::Singularity)
        ));
    }

    #[test]
    fn kernel_family_singular_errors_at_origin() {
        let fam = KernelFamily::singular();
        assert!(fam.kernel(Vec3::ZERO).is_err());
        assert!(fam.potential(Vec3::ZERO).is_err());
        let moll = KernelFamily::mollified(&spec(3, MollifierShape::UniformBall));
        assert_eq!(moll.kernel(Vec3::ZERO).unwrap(), Vec3::ZERO);
    }

    #[test]
    fn mollifier_integrates_to_one_radially() {
        // independent radial quadrature of the density, not of enclosed_fraction
        let rule = GaussLegendre::new(24);
        for shape in [MollifierShape::UniformBall, MollifierShape::WendlandC2] {
            for n in [1, 2, 7] {
                let m = spec(n, shape).mollifier();
                let mass = rule.integrate(0.0, m.radius(), |r| m.density(r) * FOUR_PI * r * r);
                assert!((mass - 1.0).abs() < 1e-6, "{shape:?} n={n} mass={mass}");
                let half =
                    rule.integrate(0.0, 0.4 * m.radius(), |r| m.density(r) * FOUR_PI * r * r);
                assert!((half - m.enclosed_fraction(0.4 * m.radius())).abs() < 1e-12);
            }
        }
    }

    /// Midpoint quadrature of `int K(x - y) eta(y) dy` over a cube stencil, with the
    /// discretized bump renormalized to unit mass.
    fn stencil_convolution(x: Vec3, m: &Mollifier, cells: usize) -> Vec3 {
        let r = m.radius();
        let h = 2.0 * r / cells as f64;
        let mut acc = Vec3::ZERO;
        let mut mass = 0.0;
        for i in 0..cells {
            for j in 0..cells {
                for k in 0..cells {
                    let y = Vec3::new(
                        -r + (i as f64 + 0.5) * h,
                        -r + (j as f64 + 0.5) * h,
                        -r + (k as f64 + 0.5) * h,
                    );
                    let d = m.density(y.norm());
                    if d == 0.0 {
                        continue;
                    }
                    mass += d;
                    acc += coulomb_kernel(x - y).unwrap() * d;
                }
            }
        }
        acc / mass
    }

    #[test]
    fn mollified_kernel_matches_stencil_convolution_outside_support() {
        for shape in [MollifierShape::UniformBall, MollifierShape::WendlandC2] {
            let s = spec(1, shape);
            let x = Vec3::new(2.0, 0.0, 0.0);
            let closed = mollified_kernel(x, &s);
            assert_eq!(closed, coulomb_kernel(x).unwrap());
            let quad = stencil_convolution(x, &s.mollifier(), 64);
            assert!(
                (quad - closed).norm() / closed.norm() < 1e-4,
                "{shape:?}: {quad:?} vs {closed:?}"
            );
        }
    }

    #[test]
    fn mollified_kernel_inside_support_matches_radial_gauss_law() {
        // Gauss's law with the enclosed mass from radial quadrature of the density
        let rule = GaussLegendre::new(24);
        for shape in [MollifierShape::UniformBall, MollifierShape::WendlandC2] {
            let m = spec(1, shape).mollifier();
            for x in [
                Vec3::new(0.3, 0.2, -0.1),
                Vec3::new(0.0, 0.05, 0.0),
                Vec3::new(-0.6, 0.5, 0.4),
            ] {
                let r = x.norm();
                let enclosed = rule.integrate(0.0, r, |s| FOUR_PI * s * s * m.density(s));
                let oracle = x * (enclosed / (FOUR_PI * r * r * r));
                assert!(
                    (m.kernel(x) - oracle).norm() < 1e-13 * oracle.norm().max(1.0),
                    "{shape:?} {x:?}"
                );
            }
        }
    }

    #[test]
    fn mollified_kernel_origin_and_junction() {
        for shape in [MollifierShape::UniformBall, MollifierShape::WendlandC2] {
            assert_eq!(mollified_kernel(Vec3::ZERO, &spec(2, shape)), Vec3::ZERO);
        }
        // both branches at |x| = 1/n
        let n = 2.0f64;
        let x = Vec3::new(0.5, 0.0, 0.0);
        let inner = x * (n * n * n / FOUR_PI);
        let outer = coulomb_kernel(x).unwrap();
        assert!((inner - outer).norm() < 1e-15);
        assert!((outer.x - n * n / FOUR_PI).abs() < 1e-15);
        let m = spec(2, MollifierShape::WendlandC2).mollifier();
        let below = m.kernel(x * (1.0 - 1e-12));
        assert!((below - outer).norm() < 1e-10);
    }

    #[test]
    fn mollified_potential_examples() {
        let s1 = spec(1, MollifierShape::UniformBall);
        let h0 = mollified_potential(Vec3::ZERO, &s1);
        assert!((h0 - 3.0 / (8.0 * PI)).abs() < 1e-16);
        assert!((h0 - 0.1193662).abs() < 1e-7);
        // radial oracle: int H(y) eta(y) dy = int_0^1 r eta(r) dr
        let rule = GaussLegendre::new(20);
        for shape in [MollifierShape::UniformBall, MollifierShape::WendlandC2] {
            let m = spec(1, shape).mollifier();
            let oracle = rule.integrate(0.0, 1.0, |r| r * m.density(r));
            assert!(
                (oracle - m.potential(Vec3::ZERO)).abs() < 1e-12,
                "{shape:?}"
            );
        }
        let at_one = mollified_potential(Vec3::new(0.0, 1.0, 0.0), &s1);
        assert!((at_one - 1.0 / FOUR_PI).abs() < 1e-16);
        let inner_branch = (3.0 - 1.0) / (8.0 * PI);
        assert!((inner_branch - 1.0 / FOUR_PI).abs() < 1e-16);
        let far = Vec3::new(0.0, 0.0, 2.0);
        assert_eq!(
            mollified_potential(far, &spec(4, MollifierShape::UniformBall)),
            newton_potential(far).unwrap()
        );
    }

    #[test]
    fn wendland_potential_is_continuous_and_peaked() {
        let m = spec(3, MollifierShape::WendlandC2).mollifier();
        let r = m.radius();
        let inside = m.potential_from_r2((r * (1.0 - 1e-12)).powi(2));
        let outside = newton_potential(Vec3::new(r, 0.0, 0.0)).unwrap();
        assert!((inside - outside).abs() < 1e-9);
        let mut prev = m.potential(Vec3::ZERO);
        for i in 1..50 {
            let p = m.potential(Vec3::new(i as f64 * r / 25.0, 0.0, 0.0));
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn sup_norm_scales_as_level_squared() {
        let sup = |n: u32| {
            let m = spec(n, MollifierShape::UniformBall).mollifier();
            (1..=400)
                .map(|i| {
                    m.kernel(Vec3::new(i as f64 * 2.0 / (400.0 * n as f64), 0.0, 0.0))
                        .norm()
                })
                .fold(0.0, f64::max)
        };
        let base = sup(1);
        for n in [2u32, 4, 8] {
            let ratio = sup(n) / base / (n * n) as f64;
            assert!((ratio - 1.0).abs() < 0.1, "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn coulomb_is_divergence_free_away_from_origin() {
        // five-point central differences
        let h = 1e-4;
        let div = |x: Vec3| {
            let e = [
                Vec3::new(h, 0.0, 0.0),
                Vec3::new(0.0, h, 0.0),
                Vec3::new(0.0, 0.0, h),
            ];
            (0..3)
                .map(|i| {
                    let k = |s: f64| coulomb_kernel(x + e[i] * s).unwrap()[i];
                    (8.0 * (k(1.0) - k(-1.0)) - (k(2.0) - k(-2.0))) / (12.0 * h)
                })
                .sum::<f64>()
        };
        for x in [
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.07, 0.05, -0.06),
            Vec3::new(1.0, 2.0, -0.5),
            Vec3::new(-0.3, 0.2, 0.9),
        ] {
            assert!(div(x).abs() < 1e-6, "x={x:?} div={}", div(x));
        }
    }

    #[test]
    fn potential_gradient_is_minus_kernel_second_order() {
        let err = |x: Vec3, h: f64| {
            let e = [
                Vec3::new(h, 0.0, 0.0),
                Vec3::new(0.0, h, 0.0),
                Vec3::new(0.0, 0.0, h),
            ];
            let g = Vec3::from_array(std::array::from_fn(|i| {
                (newton_potential(x + e[i]).unwrap() - newton_potential(x - e[i]).unwrap())
                    / (2.0 * h)
            }));
            (g + coulomb_kernel(x).unwrap()).norm()
        };
        for x in [Vec3::new(0.5, 0.3, -0.2), Vec3::new(1.2, -0.4, 0.8)] {
            let e1 = err(x, 1e-2);
            let e2 = err(x, 5e-3);
            assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "ratio {}", e1 / e2);
        }
    }

    proptest! {
        #[test]
        fn hat_norm_below_one_and_increasing(
            dir in prop::array::uniform3(-1.0f64..1.0),
            s in 0.0f64..1e6,
        ) {
            let d = Vec3::from_array(dir);
            prop_assume!(d.norm() > 1e-3);
            let d = d / d.norm();
            let a = hat(d * s).norm();
            let b = hat(d * (s * 1.01 + 1e-3)).norm();
            prop_assert!(a < 1.0 && b < 1.0);
            prop_assert!(b > a);
        }

        #[test]
        fn coulomb_is_odd(x in prop::array::uniform3(-5.0f64..5.0)) {
            let x = Vec3::from_array(x);
            prop_assume!(x.norm() > 1e-6);
            prop_assert_eq!(coulomb_kernel(-x).unwrap(), -coulomb_kernel(x).unwrap());
        }

        #[test]
        fn uniform_ball_is_exact_outside_support(
            x in prop::array::uniform3(-3.0f64..3.0),
            n in 1u32..16,
        ) {
            let x = Vec3::from_array(x);
            let s = spec(n, MollifierShape::UniformBall);
            prop_assume!(x.norm() >= s.radius());
            prop_assert_eq!(mollified_kernel(x, &s), coulomb_kernel(x).unwrap());
            prop_assert_eq!(mollified_potential(x, &s), newton_potential(x).unwrap());
        }
    }
}
