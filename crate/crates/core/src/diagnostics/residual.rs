//! Weak-form residuals of the renormalized transport equation and of the
//! continuity equation, with tensor-product polynomial bump test functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::energy::{node_region, EffectivePair};
use crate::dynamics::{backtrace_many, FieldSource, IntegratorConfig};
use crate::error::{invalid, Result};
use crate::fields::lorentz_rhs;
use crate::phase::lattice::PhaseBox;
use crate::phase::profile::InitialProfile;
use crate::quadrature::{composite, GaussLegendre};
use crate::vec3::{PhasePoint, Vec3};

/// `(1 - s^2)^3` on `|s| < 1` with `s = (y - center) / half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    pub fn new(center: f64, half_width: f64) -> Result<Bump> {
        if !(half_width > 0.0) || !center.is_finite() || !half_width.is_finite() {
            return invalid(format!(
                "bump needs a finite centre and positive width, got {center}, {half_width}"
            ));
        }
        Ok(Bump { center, half_width })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    /// Value and derivative at `y`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let s = (y - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let u = 1.0 - s * s;
        (u * u * u, -6.0 * s * u * u / self.half_width)
    }
}

/// `phi(t, x, v) = b_t(t) prod b_x(x_i) prod b_v(v_i)`; an absent factor is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub id: String,
    pub t: Option<Bump>,
    pub x: Option<[Bump; 3]>,
    pub v: Option<[Bump; 3]>,
}

/// Value, time derivative and phase-space gradient of a test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestValue {
    pub phi: f64,
    pub dt: f64,
    pub grad: PhasePoint,
}

fn product(bumps: &Option<[Bump; 3]>, y: Vec3) -> (f64, Vec3) {
    let Some(b) = bumps else {
        return (1.0, Vec3::ZERO);
    };
    let e: [(f64, f64); 3] = std::array::from_fn(|i| b[i].eval(y[i]));
    let value = e[0].0 * e[1].0 * e[2].0;
    (
        value,
        Vec3::new(
            e[0].1 * e[1].0 * e[2].0,
            e[0].0 * e[1].1 * e[2].0,
            e[0].0 * e[1].0 * e[2].1,
        ),
    )
}

impl TestFunction {
    pub fn time_factor(&self, t: f64) -> (f64, f64) {
        self.t.map_or((1.0, 0.0), |b| b.eval(t))
    }

    pub fn space_factor(&self, x: Vec3) -> (f64, Vec3) {
        product(&self.x, x)
    }

    pub fn velocity_factor(&self, v: Vec3) -> (f64, Vec3) {
        product(&self.v, v)
    }

    pub fn eval(&self, t: f64, z: PhasePoint) -> TestValue {
        let (pt, dpt) = self.time_factor(t);
        let (px, gx) = self.space_factor(z.x);
        let (pv, gv) = self.velocity_factor(z.v);
        TestValue {
            phi: pt * px * pv,
            dt: dpt * px * pv,
            grad: PhasePoint::new(gx * (pt * pv), gv * (pt * px)),
        }
    }
}

/// Bounded renormalizations `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Beta {
    Arctan,
    /// `s / (1 + s)`.
    Rational,
    /// `cap tanh(s / cap)`, a smoothed `min(s, cap)`.
    Saturated {
        cap: f64,
    },
}

impl Beta {
    pub fn apply(&self, s: f64) -> f64 {
        match *self {
            Beta::Arctan => s.atan(),
            Beta::Rational => s / (1.0 + s),
            Beta::Saturated { cap } => cap * (s / cap).tanh(),
        }
    }

    pub fn id(&self) -> String {
        match *self {
            Beta::Arctan => "arctan".into(),
            Beta::Rational => "rational".into(),
            Beta::Saturated { cap } => format!("saturated_{cap}"),
        }
    }
}

/// Composite Gauss-Legendre resolution: `pieces` equal subintervals of
/// `order` points along every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualQuadrature {
    pub time_pieces: usize,
    pub time_order: usize,
    pub space_pieces: usize,
    pub space_order: usize,
}

impl Default for ResidualQuadrature {
    fn default() -> Self {
        ResidualQuadrature {
            time_pieces: 4,
            time_order: 3,
            space_pieces: 1,
            space_order: 4,
        }
    }
}

impl ResidualQuadrature {
    /// Twice the time pieces and two more Gauss points per space axis.
    pub fn refined(&self) -> ResidualQuadrature {
        ResidualQuadrature {
            time_pieces: 2 * self.time_pieces,
            space_order: self.space_order + 2,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.time_pieces == 0
            || self.time_order == 0
            || self.space_pieces == 0
            || self.space_order == 0
        {
            return invalid("quadrature pieces and orders must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub test_function: String,
    /// `None` for the continuity residual.
    pub beta: Option<String>,
    pub residual: f64,
    /// L1 size of the terms of the weak form.
    pub scale: f64,
    /// `|residual| / scale`, 0 when the scale is 0.
    pub normalized: f64,
}

impl ResidualReport {
    fn new(test_function: &str, beta: Option<String>, residual: f64, scale: f64) -> ResidualReport {
        let normalized = if scale > 0.0 {
            residual.abs() / scale
        } else {
            0.0
        };
        ResidualReport {
            test_function: test_function.to_string(),
            beta,
            residual,
            scale,
            normalized,
        }
    }
}

fn uniform_breaks(lo: f64, hi: f64, pieces: usize) -> Vec<f64> {
    (0..=pieces)
        .map(|k| {
            if k == pieces {
                hi
            } else {
                lo + (hi - lo) * k as f64 / pieces as f64
            }
        })
        .collect()
}

fn axis_rule(lo: f64, hi: f64, q: &ResidualQuadrature) -> Vec<(f64, f64)> {
    composite(
        &GaussLegendre::new(q.space_order),
        &uniform_breaks(lo, hi, q.space_pieces),
    )
}

fn inside(outer: (f64, f64), inner: (f64, f64)) -> bool {
    let slack = 1e-12 * (outer.1 - outer.0).abs().max(1.0);
    inner.0 >= outer.0 - slack && inner.1 <= outer.1 + slack
}

/// Time interval of integration: the bump support, or `[0, t_end]`.
fn time_span(phi: &TestFunction, t_end: f64) -> Result<(f64, f64)> {
    match phi.t {
        None => Ok((0.0, t_end)),
        Some(b) => {
            let s = b.support();
            if !inside((0.0, t_end), s) {
                return invalid(format!(
                    "test function {} time support {s:?} leaves [0, {t_end}]",
                    phi.id
                ));
            }
            Ok(s)
        }
    }
}

/// `int phi_0 beta(f_0) - int phi_T beta(f_T) + int int [d_t phi + b . grad phi] beta(f_t)`
/// over `[0, t_end]`; the phase-space quadrature covers the support of each
/// present factor and the corresponding axes of `domain` otherwise.
#[allow(clippy::too_many_arguments)]
pub fn renorm_residual(
    src: &dyn FieldSource,
    t_end: f64,
    profile: &InitialProfile,
    beta: Beta,
    phi: &TestFunction,
    domain: &PhaseBox,
    quad: &ResidualQuadrature,
    cfg: &IntegratorConfig,
) -> Result<ResidualReport> {
    quad.validate()?;
    if !(t_end > 0.0) {
        return invalid(format!("final time must be positive, got {t_end}"));
    }
    let (t_lo, t_hi) = time_span(phi, t_end)?;
    let mut axes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(6);
    for d in 0..6 {
        let bumps = if d < 3 { &phi.x } else { &phi.v };
        let range = (domain.lo[d], domain.hi[d]);
        let (lo, hi) = match bumps {
            Some(b) => {
                let s = b[d % 3].support();
                if !inside(range, s) {
                    return invalid(format!(
                        "test function {} support {s:?} leaves the domain on axis {d}",
                        phi.id
                    ));
                }
                s
            }
            None => range,
        };
        axes.push(axis_rule(lo, hi, quad));
    }
    let dims: [usize; 6] = std::array::from_fn(|d| axes[d].len());
    let total: usize = dims.iter().product();
    let point = |mut n: usize| -> (PhasePoint, f64) {
        let mut z = [0.0; 6];
        let mut w = 1.0;
        for d in (0..6).rev() {
            let (y, wy) = axes[d][n % dims[d]];
            n /= dims[d];
            z[d] = y;
            w *= wy;
        }
        (PhasePoint::from_array(z), w)
    };
    let nodes: Vec<(PhasePoint, f64)> = (0..total).into_par_iter().map(point).collect();
    let zs: Vec<PhasePoint> = nodes.iter().map(|n| n.0).collect();

    let beta_f = |t: f64| -> Result<Vec<f64>> {
        let pre = if t == 0.0 {
            zs.clone()
        } else {
            backtrace_many(&zs, t, src, cfg)?
        };
        Ok(pre
            .par_iter()
            .map(|z| beta.apply(profile.evaluate_or_zero(*z)))
            .collect())
    };
    let boundary = |t: f64| -> Result<f64> {
        if phi.time_factor(t).0 == 0.0 {
            return Ok(0.0);
        }
        let bf = beta_f(t)?;
        Ok(nodes
            .iter()
            .zip(&bf)
            .map(|((z, w), b)| w * phi.eval(t, *z).phi * b)
            .sum())
    };
    let initial = boundary(0.0)?;
    let terminal = boundary(t_end)?;

    let mut bulk = 0.0;
    let mut bulk_abs = 0.0;
    let time_nodes = composite(
        &GaussLegendre::new(quad.time_order),
        &uniform_breaks(t_lo, t_hi, quad.time_pieces),
    );
    let xs: Vec<Vec3> = zs.iter().map(|z| z.x).collect();
    for (t, wt) in time_nodes {
        let bf = beta_f(t)?;
        let fields = src.fields_many(&xs, t)?;
        let terms: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|n| {
                let (z, w) = nodes[n];
                let tv = phi.eval(t, z);
                let b = lorentz_rhs(z, fields[n].e, fields[n].b);
                w * (tv.dt + tv.grad.x.dot(b.x) + tv.grad.v.dot(b.v)) * bf[n]
            })
            .collect();
        bulk += wt * terms.iter().sum::<f64>();
        bulk_abs += wt * terms.iter().map(|v| v.abs()).sum::<f64>();
    }
    let residual = initial - terminal + bulk;
    let scale = initial.abs() + terminal.abs() + bulk_abs;
    Ok(ResidualReport::new(
        &phi.id,
        Some(beta.id()),
        residual,
        scale,
    ))
}

/// `int phi_0 rho_0 - int phi_T rho_T + int int (d_t phi rho + grad phi . J)`
/// over the snapshot series, with `rho` and `J` linear in time between
/// snapshots and node sums in space. `time_order` Gauss points are used on
/// every snapshot interval.
pub fn continuity_residual(
    series: &[EffectivePair],
    phi: &TestFunction,
    time_order: usize,
) -> Result<ResidualReport> {
    if series.len() < 2 {
        return invalid("continuity residual needs at least two snapshots");
    }
    if time_order == 0 {
        return invalid("time quadrature order must be positive");
    }
    if phi.v.is_some() {
        return invalid(format!("test function {} depends on velocity", phi.id));
    }
    let g = *series[0].deposit.geometry();
    if series.iter().any(|p| p.deposit.geometry() != &g)
        || series.windows(2).any(|w| !(w[1].time > w[0].time))
    {
        return invalid("snapshots must share one grid and have increasing times");
    }
    let t0 = series[0].time;
    let t_end = series[series.len() - 1].time;
    if t0 != 0.0 {
        return invalid("snapshot series must start at t = 0");
    }
    let (t_lo, t_hi) = time_span(phi, t_end)?;
    let (lo, hi) = node_region(&g);
    if let Some(b) = &phi.x {
        for d in 0..3 {
            if !inside((lo[d], hi[d]), b[d].support()) {
                return invalid(format!(
                    "test function {} support leaves the grid on axis {d}",
                    phi.id
                ));
            }
        }
    }
    let vol = g.cell_volume();
    let space: Vec<(f64, Vec3)> = (0..g.len())
        .map(|n| phi.space_factor(g.node_flat(n)))
        .collect();
    let pairing = |k: usize| -> f64 {
        let d = &series[k].deposit;
        space
            .iter()
            .zip(&d.rho.values)
            .map(|((p, _), r)| p * r)
            .sum::<f64>()
            * vol
    };
    let initial = phi.time_factor(0.0).0 * pairing(0);
    let terminal = phi.time_factor(t_end).0 * pairing(series.len() - 1);

    let rule = GaussLegendre::new(time_order);
    let mut bulk = 0.0;
    let mut bulk_abs = 0.0;
    for k in 0..series.len() - 1 {
        let (a, b) = (series[k].time.max(t_lo), series[k + 1].time.min(t_hi));
        if !(b > a) {
            continue;
        }
        let (da, db) = (&series[k].deposit, &series[k + 1].deposit);
        let span = series[k + 1].time - series[k].time;
        for (t, wt) in rule.on_interval(a, b) {
            let s = (t - series[k].time) / span;
            let (pt, dpt) = phi.time_factor(t);
            let terms: Vec<f64> = (0..g.len())
                .into_par_iter()
                .map(|n| {
                    let rho = da.rho.values[n] * (1.0 - s) + db.rho.values[n] * s;
                    let j = da.current.values[n] * (1.0 - s) + db.current.values[n] * s;
                    let (px, gx) = space[n];
                    dpt * px * rho + pt * gx.dot(j)
                })
                .collect();
            bulk += wt * vol * terms.iter().sum::<f64>();
            bulk_abs += wt * vol * terms.iter().map(|v| v.abs()).sum::<f64>();
        }
    }
    let residual = initial - terminal + bulk;
    let scale = initial.abs() + terminal.abs() + bulk_abs;
    Ok(ResidualReport::new(&phi.id, None, residual, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ZeroField;
    use crate::phase::ensemble::{Ensemble, Particle};
    use crate::phase::grid::{deposit, GridGeometry};
    use crate::phase::profile::GaussianLump;

    fn bumps(c: [f64; 3], r: f64) -> [Bump; 3] {
        std::array::from_fn(|i| Bump::new(c[i], r).unwrap())
    }

    #[test]
    fn bump_derivative_matches_difference() {
        let b = Bump::new(0.3, 0.7).unwrap();
        for &y in &[-0.2, 0.1, 0.5, 0.9] {
            let h = 1e-6;
            let fd = (b.eval(y + h).0 - b.eval(y - h).0) / (2.0 * h);
            assert!((fd - b.eval(y).1).abs() < 1e-8);
        }
        assert_eq!(b.eval(1.0), (0.0, 0.0));
        assert!(Bump::new(0.0, 0.0).is_err());
    }

    #[test]
    fn beta_family() {
        assert_eq!(Beta::Arctan.apply(0.0), 0.0);
        assert!((Beta::Rational.apply(1.0) - 0.5).abs() < 1e-16);
        assert!(Beta::Saturated { cap: 2.0 }.apply(1e9) <= 2.0);
        assert!((Beta::Saturated { cap: 2.0 }.apply(1e-3) - 1e-3).abs() < 1e-9);
    }

    fn lump() -> InitialProfile {
        InitialProfile::gaussian(vec![GaussianLump {
            x_center: Vec3::ZERO,
            v_center: Vec3::new(0.4, 0.0, 0.0),
            x_width: 0.5,
            v_width: 0.5,
            amplitude: 0.5,
        }])
        .unwrap()
    }

    fn phi() -> TestFunction {
        TestFunction {
            id: "bump".into(),
            t: Some(Bump::new(0.5, 0.5).unwrap()),
            x: Some(bumps([0.2, 0.0, 0.0], 0.6)),
            v: Some(bumps([0.4, 0.0, 0.0], 0.6)),
        }
    }

    #[test]
    fn zero_data_has_zero_residual() {
        let p = lump().scaled(0.0);
        let domain = PhaseBox::new([-2.0; 6], [2.0; 6]).unwrap();
        let q = ResidualQuadrature {
            time_pieces: 1,
            time_order: 2,
            space_pieces: 1,
            space_order: 2,
        };
        let r = renorm_residual(
            &ZeroField,
            1.0,
            &p,
            Beta::Arctan,
            &phi(),
            &domain,
            &q,
            &IntegratorConfig::rk4(0.1),
        )
        .unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.normalized, 0.0);
    }

    #[test]
    fn free_streaming_residual_is_small_and_shrinks_under_refinement() {
        let domain = PhaseBox::new([-2.0; 6], [2.0; 6]).unwrap();
        let cfg = IntegratorConfig::rk4(0.05);
        let q = ResidualQuadrature {
            time_pieces: 2,
            time_order: 3,
            space_pieces: 1,
            space_order: 4,
        };
        let a = renorm_residual(
            &ZeroField,
            1.0,
            &lump(),
            Beta::Arctan,
            &phi(),
            &domain,
            &q,
            &cfg,
        )
        .unwrap();
        let b = renorm_residual(
            &ZeroField,
            1.0,
            &lump(),
            Beta::Arctan,
            &phi(),
            &domain,
            &q.refined(),
            &cfg,
        )
        .unwrap();
        assert!(b.normalized <= 1e-4, "{b:?}");
        assert!(b.residual.abs() <= 0.5 * a.residual.abs(), "{a:?} {b:?}");
    }

    #[test]
    fn support_outside_domain_is_rejected() {
        let domain = PhaseBox::new([-0.5; 6], [0.5; 6]).unwrap();
        let r = renorm_residual(
            &ZeroField,
            1.0,
            &lump(),
            Beta::Arctan,
            &phi(),
            &domain,
            &ResidualQuadrature::default(),
            &IntegratorConfig::rk4(0.1),
        );
        assert!(r.is_err());
        let mut late = phi();
        late.t = Some(Bump::new(1.0, 0.5).unwrap());
        let domain = PhaseBox::new([-2.0; 6], [2.0; 6]).unwrap();
        assert!(renorm_residual(
            &ZeroField,
            1.0,
            &lump(),
            Beta::Arctan,
            &late,
            &domain,
            &ResidualQuadrature::default(),
            &IntegratorConfig::rk4(0.1)
        )
        .is_err());
    }

    #[test]
    fn static_ensemble_continuity_residual_vanishes() {
        let g = GridGeometry::cube(Vec3::ZERO, 1.0, 9).unwrap();
        let ens = Ensemble::new(
            (0..20)
                .map(|i| Particle::at_rest(Vec3::new(0.05 * i as f64 - 0.5, 0.1, -0.2), 0.05))
                .collect(),
            0.0,
        )
        .unwrap();
        let series: Vec<EffectivePair> = (0..5)
            .map(|k| EffectivePair {
                time: 0.25 * k as f64,
                deposit: deposit(&ens, &g).unwrap(),
            })
            .collect();
        let phi = TestFunction {
            id: "t".into(),
            t: Some(Bump::new(0.5, 0.5).unwrap()),
            x: Some(bumps([0.0; 3], 0.9)),
            v: None,
        };
        let r = continuity_residual(&series, &phi, 4).unwrap();
        assert!(r.residual.abs() <= 1e-10, "{r:?}");
    }
}
