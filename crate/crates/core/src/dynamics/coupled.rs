//! Self-consistent particle evolution: every particle is advanced with the
//! fields of the whole ensemble, re-evaluated at each integrator stage.

use serde::{Deserialize, Serialize};

use crate::dynamics::history::{FieldConfig, FieldHistory};
use crate::dynamics::{boris_kick, IntegratorConfig, Scheme};
use crate::error::{invalid, Error, Result};
use crate::fields::{eval_fields, lorentz_rhs, FieldSample, Sources};
use crate::kernel::hat;
use crate::phase::ensemble::{Ensemble, Particle};
use crate::vec3::{PhasePoint, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp { time: f64, speed: f64, guard: f64 },
}

/// History of a run; on blow-up it holds every snapshot recorded before the abort.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: FieldHistory,
    pub status: RunStatus,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

fn fields_of(particles: &[Particle], fc: &FieldConfig, step: usize) -> Result<Vec<FieldSample>> {
    if fc.coupling.is_free() {
        return Ok(vec![FieldSample::ZERO; particles.len()]);
    }
    let ens = Ensemble {
        particles: particles.to_vec(),
        time: 0.0,
    };
    let xs: Vec<Vec3> = particles.iter().map(|p| p.x).collect();
    let f = eval_fields(&Sources::from_ensemble(&ens), &xs, fc.coupling, fc.kernel());
    if !f.iter().all(FieldSample::is_finite) {
        return Err(Error::NumericalFailure {
            step,
            what: "non-finite field value".into(),
        });
    }
    Ok(f)
}

fn moved(p: &[Particle], k: &[PhasePoint], a: f64) -> Vec<Particle> {
    p.iter()
        .zip(k)
        .map(|(p, k)| Particle {
            x: p.x + k.x * a,
            v: p.v + k.v * a,
            w: p.w,
        })
        .collect()
}

fn rhs(p: &[Particle], f: &[FieldSample]) -> Vec<PhasePoint> {
    p.iter()
        .zip(f)
        .map(|(p, f)| lorentz_rhs(p.phase(), f.e, f.b))
        .collect()
}

fn coupled_step(
    p: &[Particle],
    h: f64,
    fc: &FieldConfig,
    scheme: Scheme,
    step: usize,
) -> Result<Vec<Particle>> {
    match scheme {
        Scheme::Rk4 => {
            let k1 = rhs(p, &fields_of(p, fc, step)?);
            let y2 = moved(p, &k1, 0.5 * h);
            let k2 = rhs(&y2, &fields_of(&y2, fc, step)?);
            let y3 = moved(p, &k2, 0.5 * h);
            let k3 = rhs(&y3, &fields_of(&y3, fc, step)?);
            let y4 = moved(p, &k3, h);
            let k4 = rhs(&y4, &fields_of(&y4, fc, step)?);
            Ok((0..p.len())
                .map(|i| {
                    let dx = (k1[i].x + (k2[i].x + k3[i].x) * 2.0 + k4[i].x) * (h / 6.0);
                    let dv = (k1[i].v + (k2[i].v + k3[i].v) * 2.0 + k4[i].v) * (h / 6.0);
                    Particle {
                        x: p[i].x + dx,
                        v: p[i].v + dv,
                        w: p[i].w,
                    }
                })
                .collect())
        }
        Scheme::Boris => {
            let half: Vec<Particle> = p
                .iter()
                .map(|q| Particle {
                    x: q.x + hat(q.v) * (0.5 * h),
                    ..*q
                })
                .collect();
            let f = fields_of(&half, fc, step)?;
            Ok(half
                .iter()
                .zip(&f)
                .map(|(q, f)| {
                    let v = boris_kick(q.v, f.e, f.b, h);
                    Particle {
                        x: q.x + hat(v) * (0.5 * h),
                        v,
                        w: q.w,
                    }
                })
                .collect())
        }
    }
}

/// Advances `ensemble0` to time `t_final`, recording a snapshot every `stride`
/// steps and at the final time.
pub fn run_coupled(
    ensemble0: &Ensemble,
    t_final: f64,
    cfg: &IntegratorConfig,
    fields: &FieldConfig,
    stride: usize,
) -> Result<RunOutcome> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return invalid(format!("final time must be positive, got {t_final}"));
    }
    if stride == 0 {
        return invalid("snapshot stride must be at least 1");
    }
    if ensemble0.time != 0.0 {
        return invalid("initial ensemble must be at t = 0");
    }
    cfg.validate_for(ensemble0)?;
    let n = cfg.steps_for(t_final);
    let h = t_final / n as f64;
    let mut history = FieldHistory::new(*fields, ensemble0.clone())?;
    let mut cur = ensemble0.particles.clone();
    for k in 0..n {
        cur = coupled_step(&cur, h, fields, cfg.scheme, k)?;
        let t = if k + 1 == n {
            t_final
        } else {
            (k + 1) as f64 * h
        };
        let speed = cur.iter().map(|p| p.v.norm()).fold(0.0, f64::max);
        if !speed.is_finite() || speed > cfg.v_max_guard {
            return Ok(RunOutcome {
                history,
                status: RunStatus::BlowUp {
                    time: t,
                    speed,
                    guard: cfg.v_max_guard,
                },
            });
        }
        if (k + 1) % stride == 0 || k + 1 == n {
            history.push(Ensemble {
                particles: cur.clone(),
                time: t,
            })?;
        }
    }
    Ok(RunOutcome {
        history,
        status: RunStatus::Completed,
    })
}
