//! Characteristics `z' = b_t(z)`: single steps, flows along frozen field
//! histories, the self-consistent particle evolution and Picard iteration.

pub mod coupled;
pub mod history;
pub mod picard;

use nalgebra::Matrix6;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{eval_fields, lorentz_rhs, Coupling, FieldSample, Sources};
use crate::kernel::{hat, KernelFamily};
use crate::phase::ensemble::Ensemble;
use crate::phase::profile::InitialProfile;
use crate::vec3::{PhasePoint, Vec3};

pub use coupled::{run_coupled, RunOutcome, RunStatus};
pub use history::{FieldConfig, FieldHistory, GriddedFields, HistoryManifest, Snapshot};
pub use picard::{picard_solve, PicardConfig, PicardOutcome, PicardReport};

/// Time-dependent `(E, B)` evaluated at many points at once.
pub trait FieldSource: Sync {
    fn fields_many(&self, xs: &[Vec3], t: f64) -> Result<Vec<FieldSample>>;

    fn fields_at(&self, x: Vec3, t: f64) -> Result<FieldSample> {
        Ok(self.fields_many(&[x], t)?[0])
    }
}

/// `E = B = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl FieldSource for ZeroField {
    fn fields_many(&self, xs: &[Vec3], _t: f64) -> Result<Vec<FieldSample>> {
        Ok(vec![FieldSample::ZERO; xs.len()])
    }
}

/// Constant fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformField(pub FieldSample);

impl FieldSource for UniformField {
    fn fields_many(&self, xs: &[Vec3], _t: f64) -> Result<Vec<FieldSample>> {
        Ok(vec![self.0; xs.len()])
    }
}

/// Time-independent fields of a frozen ensemble.
#[derive(Debug, Clone)]
pub struct FrozenField {
    sources: Sources,
    coupling: Coupling,
    kernel: KernelFamily,
}

impl FrozenField {
    pub fn new(ensemble: &Ensemble, fields: &FieldConfig) -> Self {
        FrozenField {
            sources: Sources::from_ensemble(ensemble),
            coupling: fields.coupling,
            kernel: fields.kernel(),
        }
    }
}

impl FieldSource for FrozenField {
    fn fields_many(&self, xs: &[Vec3], _t: f64) -> Result<Vec<FieldSample>> {
        Ok(eval_fields(&self.sources, xs, self.coupling, self.kernel))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    /// Relativistic Boris push: half drift, electric half kick, magnetic
    /// rotation, electric half kick, half drift.
    Boris,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    pub v_max_guard: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, scheme: Scheme, v_max_guard: f64) -> Result<Self> {
        let c = IntegratorConfig {
            dt,
            scheme,
            v_max_guard,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            scheme: Scheme::Rk4,
            v_max_guard: 1e8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.v_max_guard > 0.0) {
            return invalid(format!(
                "v_max_guard must be positive, got {}",
                self.v_max_guard
            ));
        }
        Ok(())
    }

    /// Checks the guard against the initial speeds.
    pub fn validate_for(&self, ensemble: &Ensemble) -> Result<()> {
        self.validate()?;
        let vmax = ensemble.max_speed();
        if !(self.v_max_guard > vmax) {
            return invalid(format!(
                "v_max_guard {} does not exceed initial max |v| {vmax}",
                self.v_max_guard
            ));
        }
        Ok(())
    }

    /// Number of equal steps covering `span` with steps no longer than `dt`.
    pub fn steps_for(&self, span: f64) -> usize {
        let n = (span.abs() / self.dt * (1.0 - 1e-12)).ceil();
        (n as usize).max(1)
    }
}

fn check_fields(f: &[FieldSample], step: usize) -> Result<()> {
    if f.iter().all(FieldSample::is_finite) {
        Ok(())
    } else {
        Err(Error::NumericalFailure {
            step,
            what: "non-finite field value".into(),
        })
    }
}

fn axpy(z: &[PhasePoint], k: &[PhasePoint], a: f64) -> Vec<PhasePoint> {
    z.iter()
        .zip(k)
        .map(|(z, k)| PhasePoint::new(z.x + k.x * a, z.v + k.v * a))
        .collect()
}

fn rhs_many(z: &[PhasePoint], f: &[FieldSample]) -> Vec<PhasePoint> {
    z.par_iter()
        .zip(f)
        .map(|(z, f)| lorentz_rhs(*z, f.e, f.b))
        .collect()
}

fn positions(z: &[PhasePoint]) -> Vec<Vec3> {
    z.iter().map(|z| z.x).collect()
}

/// One RK4 step of size `h` (negative for backward) from time `t`.
fn rk4_step(
    z: &[PhasePoint],
    t: f64,
    h: f64,
    src: &dyn FieldSource,
    step: usize,
) -> Result<Vec<PhasePoint>> {
    let stage = |y: &[PhasePoint], ts: f64| -> Result<Vec<PhasePoint>> {
        let f = src.fields_many(&positions(y), ts)?;
        check_fields(&f, step)?;
        Ok(rhs_many(y, &f))
    };
    let k1 = stage(z, t)?;
    let k2 = stage(&axpy(z, &k1, 0.5 * h), t + 0.5 * h)?;
    let k3 = stage(&axpy(z, &k2, 0.5 * h), t + 0.5 * h)?;
    let k4 = stage(&axpy(z, &k3, h), t + h)?;
    Ok((0..z.len())
        .map(|i| {
            let dx = (k1[i].x + (k2[i].x + k3[i].x) * 2.0 + k4[i].x) * (h / 6.0);
            let dv = (k1[i].v + (k2[i].v + k3[i].v) * 2.0 + k4[i].v) * (h / 6.0);
            PhasePoint::new(z[i].x + dx, z[i].v + dv)
        })
        .collect())
}

/// Relativistic Boris update of the momentum variable in fields `(e, b)` over `h`.
#[inline]
pub fn boris_kick(v: Vec3, e: Vec3, b: Vec3, h: f64) -> Vec3 {
    let minus = v + e * (0.5 * h);
    let gamma = (1.0 + minus.norm_squared()).sqrt();
    let tv = b * (0.5 * h / gamma);
    let prime = minus + minus.cross(tv);
    let sv = tv * (2.0 / (1.0 + tv.norm_squared()));
    let plus = minus + prime.cross(sv);
    plus + e * (0.5 * h)
}

fn boris_step(
    z: &[PhasePoint],
    t: f64,
    h: f64,
    src: &dyn FieldSource,
    step: usize,
) -> Result<Vec<PhasePoint>> {
    let half: Vec<Vec3> = z.iter().map(|z| z.x + hat(z.v) * (0.5 * h)).collect();
    let f = src.fields_many(&half, t + 0.5 * h)?;
    check_fields(&f, step)?;
    Ok(z.iter()
        .zip(&half)
        .zip(&f)
        .map(|((z, &xh), f)| {
            let v = boris_kick(z.v, f.e, f.b, h);
            PhasePoint::new(xh + hat(v) * (0.5 * h), v)
        })
        .collect())
}

fn guard(z: &[PhasePoint], t: f64, cfg: &IntegratorConfig) -> Result<()> {
    let speed = z.iter().map(|z| z.v.norm()).fold(0.0, f64::max);
    if !speed.is_finite() || speed > cfg.v_max_guard {
        return Err(Error::BlowUp {
            time: t,
            speed,
            guard: cfg.v_max_guard,
        });
    }
    Ok(())
}

/// One step of size `h` of the configured scheme applied to every point.
pub fn step_many(
    z: &[PhasePoint],
    t: f64,
    h: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
    step: usize,
) -> Result<Vec<PhasePoint>> {
    let next = match cfg.scheme {
        Scheme::Rk4 => rk4_step(z, t, h, src, step)?,
        Scheme::Boris => boris_step(z, t, h, src, step)?,
    };
    guard(&next, t + h, cfg)?;
    Ok(next)
}

/// One step of size `cfg.dt` from `(z, t)`.
pub fn step(
    z: PhasePoint,
    t: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
) -> Result<PhasePoint> {
    cfg.validate()?;
    Ok(step_many(&[z], t, cfg.dt, src, cfg, 0)?[0])
}

/// States at the `n + 1` equally spaced times from `t0` to `t1`, where `n`
/// is the smallest step count with `|h| <= dt`.
pub fn flow_recording(
    z: &[PhasePoint],
    t0: f64,
    t1: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, Vec<PhasePoint>)>> {
    cfg.validate()?;
    let mut out = vec![(t0, z.to_vec())];
    if t1 == t0 {
        return Ok(out);
    }
    let n = cfg.steps_for(t1 - t0);
    let h = (t1 - t0) / n as f64;
    let mut cur = z.to_vec();
    for k in 0..n {
        let t = t0 + k as f64 * h;
        cur = step_many(&cur, t, h, src, cfg, k)?;
        let tk = if k + 1 == n {
            t1
        } else {
            t0 + (k + 1) as f64 * h
        };
        out.push((tk, cur.clone()));
    }
    Ok(out)
}

/// Flow map from `t0` to `t1` (either direction) applied to every point.
pub fn flow_many(
    z: &[PhasePoint],
    t0: f64,
    t1: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
) -> Result<Vec<PhasePoint>> {
    cfg.validate()?;
    if t1 == t0 {
        return Ok(z.to_vec());
    }
    let n = cfg.steps_for(t1 - t0);
    let h = (t1 - t0) / n as f64;
    let mut cur = z.to_vec();
    for k in 0..n {
        cur = step_many(&cur, t0 + k as f64 * h, h, src, cfg, k)?;
    }
    Ok(cur)
}

pub fn flow(
    z: PhasePoint,
    t0: f64,
    t1: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
) -> Result<PhasePoint> {
    Ok(flow_many(&[z], t0, t1, src, cfg)?[0])
}

/// Preimage at time 0 of the state `z` at time `t`.
pub fn backtrace(
    z: PhasePoint,
    t: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
) -> Result<PhasePoint> {
    flow(z, t, 0.0, src, cfg)
}

pub fn backtrace_many(
    z: &[PhasePoint],
    t: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
) -> Result<Vec<PhasePoint>> {
    flow_many(z, t, 0.0, src, cfg)
}

/// Lagrangian value `f_t(z) = f0(Z^{-1}(t, z))`; zero where the preimage
/// leaves a tabulated profile's domain.
pub fn evaluate_f(
    z: PhasePoint,
    t: f64,
    src: &dyn FieldSource,
    profile: &InitialProfile,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    Ok(profile.evaluate_or_zero(backtrace(z, t, src, cfg)?))
}

/// Determinant of the central-difference Jacobian of the flow map `0 -> t` at `z`.
pub fn flow_jacobian(
    z: PhasePoint,
    t: f64,
    h: f64,
    src: &dyn FieldSource,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !(h > 0.0) {
        return invalid(format!("difference step must be positive, got {h}"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let base = z.to_array();
    let mut probes = Vec::with_capacity(12);
    for d in 0..6 {
        for s in [1.0, -1.0] {
            let mut p = base;
            p[d] += s * h;
            probes.push(PhasePoint::from_array(p));
        }
    }
    let moved = flow_many(&probes, 0.0, t, src, cfg)?;
    let mut m = Matrix6::<f64>::zeros();
    for d in 0..6 {
        let plus = moved[2 * d].to_array();
        let minus = moved[2 * d + 1].to_array();
        for r in 0..6 {
            m[(r, d)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    Ok(m.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z0() -> PhasePoint {
        PhasePoint::new(Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.5, 1.0, -0.7))
    }

    #[test]
    fn free_streaming_step_is_exact() {
        let cfg = IntegratorConfig::rk4(0.01);
        let z = step(z0(), 0.0, &ZeroField, &cfg).unwrap();
        let expect = z0().x + hat(z0().v) * 0.01;
        assert!((z.x - expect).norm() < 1e-16);
        assert_eq!(z.v, z0().v);
    }

    #[test]
    fn magnetic_rotation_preserves_speed() {
        let cfg = IntegratorConfig::rk4(1e-3);
        let src = UniformField(FieldSample {
            e: Vec3::ZERO,
            b: Vec3::new(0.0, 0.0, 1.0),
        });
        let z = flow(z0(), 0.0, 1.0, &src, &cfg).unwrap();
        assert!((z.v.norm() - z0().v.norm()).abs() <= 1e-10);
        let boris = IntegratorConfig {
            scheme: Scheme::Boris,
            ..cfg
        };
        let zb = flow(z0(), 0.0, 1.0, &src, &boris).unwrap();
        assert!((zb.v.norm() - z0().v.norm()).abs() <= 1e-13);
    }

    #[test]
    fn constant_electric_field_accelerates_linearly() {
        let e = 0.7;
        let cfg = IntegratorConfig::rk4(1e-2);
        let src = UniformField(FieldSample {
            e: Vec3::new(e, 0.0, 0.0),
            b: Vec3::ZERO,
        });
        let start = PhasePoint::new(Vec3::ZERO, Vec3::ZERO);
        let traj = flow_recording(&[start], 0.0, 1.0, &src, &cfg).unwrap();
        for (t, z) in traj {
            assert!(
                (z[0].v - Vec3::new(e * t, 0.0, 0.0)).norm() < 1e-14,
                "t={t}"
            );
        }
    }

    #[test]
    fn blow_up_guard_triggers() {
        let cfg = IntegratorConfig::new(0.1, Scheme::Rk4, 5.0).unwrap();
        let src = UniformField(FieldSample {
            e: Vec3::new(100.0, 0.0, 0.0),
            b: Vec3::ZERO,
        });
        let err = flow(z0(), 0.0, 1.0, &src, &cfg).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn backtrace_inverts_free_streaming() {
        let cfg = IntegratorConfig::rk4(0.05);
        assert_eq!(backtrace(z0(), 0.0, &ZeroField, &cfg).unwrap(), z0());
        let back = backtrace(z0(), 0.7, &ZeroField, &cfg).unwrap();
        assert!((back.x - (z0().x - hat(z0().v) * 0.7)).norm() < 1e-15);
        assert_eq!(back.v, z0().v);
    }

    #[test]
    fn free_jacobian_is_one() {
        let cfg = IntegratorConfig::rk4(0.05);
        assert_eq!(
            flow_jacobian(z0(), 0.0, 1e-4, &ZeroField, &cfg).unwrap(),
            1.0
        );
        let d = flow_jacobian(z0(), 0.5, 1e-4, &ZeroField, &cfg).unwrap();
        assert!((d - 1.0).abs() < 1e-10, "{d}");
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, Scheme::Rk4, 1.0).is_err());
        let ens = Ensemble::new(
            vec![crate::phase::Particle::new(
                Vec3::ZERO,
                Vec3::new(3.0, 0.0, 0.0),
                1.0,
            )],
            0.0,
        )
        .unwrap();
        assert!(IntegratorConfig::rk4(0.1).validate_for(&ens).is_ok());
        assert!(IntegratorConfig::new(0.1, Scheme::Rk4, 2.0)
            .unwrap()
            .validate_for(&ens)
            .is_err());
        assert_eq!(IntegratorConfig::rk4(0.1).steps_for(1.0), 10);
        assert_eq!(IntegratorConfig::rk4(0.3).steps_for(1.0), 4);
    }
}
