//! Global Picard iteration on characteristics.
//!
//! Iterate 0 is free streaming. Iterate `n + 1` transports the sample ensemble
//! along the field history generated by iterate `n`; `d_n` is the largest
//! phase-space distance between iterates `n` and `n - 1` over all samples and
//! recorded times.

use serde::{Deserialize, Serialize};

use crate::dynamics::coupled::RunStatus;
use crate::dynamics::history::{FieldConfig, FieldHistory};
use crate::dynamics::{flow_recording, IntegratorConfig, ZeroField};
use crate::error::{invalid, Error, Result};
use crate::phase::ensemble::{Ensemble, Particle};
use crate::vec3::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub t_final: f64,
    pub iterations: usize,
    pub integrator: IntegratorConfig,
    pub fields: FieldConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateSummary {
    pub index: usize,
    /// Largest distance to the free-streaming iterate.
    pub departure_from_free: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub t_final: f64,
    pub samples: usize,
    pub times: Vec<f64>,
    /// `d_1, ..., d_N` (entry `i` is `d_{i+1}`).
    pub distances: Vec<f64>,
    /// `d_{n+1} / d_n` for consecutive entries of `distances`.
    pub ratios: Vec<f64>,
    pub iterates: Vec<IterateSummary>,
}

impl PicardReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    /// `d_1 / T`.
    pub fn c_fit(&self) -> Option<f64> {
        self.distances.first().map(|d| d / self.t_final)
    }

    /// `T^(n-1) / n! * C_fit`, the factorial bound on `d_n / d_1` with the
    /// constant fitted from `d_1`.
    pub fn factorial_bound_ratio(&self, n: usize) -> Option<f64> {
        let c = self.c_fit()?;
        let fact: f64 = (2..=n).map(|k| k as f64).product();
        Some(self.t_final.powi(n as i32 - 1) / fact * c)
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub report: PicardReport,
    /// Field history generated by the last completed iterate.
    pub history: FieldHistory,
    pub status: RunStatus,
}

fn max_distance(a: &[(f64, Vec<PhasePoint>)], b: &[(f64, Vec<PhasePoint>)]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|((_, za), (_, zb))| za.iter().zip(zb).map(|(p, q)| p.distance(*q)))
        .fold(0.0, f64::max)
}

fn history_of(
    traj: &[(f64, Vec<PhasePoint>)],
    weights: &[f64],
    fields: FieldConfig,
) -> Result<FieldHistory> {
    let ensembles = traj
        .iter()
        .map(|(t, zs)| Ensemble {
            particles: zs
                .iter()
                .zip(weights)
                .map(|(z, &w)| Particle::new(z.x, z.v, w))
                .collect(),
            time: *t,
        })
        .collect();
    FieldHistory::from_ensembles(fields, ensembles)
}

pub fn picard_solve(sample: &Ensemble, cfg: &PicardConfig) -> Result<PicardOutcome> {
    if !(cfg.t_final > 0.0) {
        return invalid(format!("final time must be positive, got {}", cfg.t_final));
    }
    if cfg.iterations == 0 {
        return invalid("Picard iteration needs at least one iterate");
    }
    if sample.is_empty() {
        return invalid("Picard iteration needs a nonempty sample ensemble");
    }
    cfg.integrator.validate_for(sample)?;
    let z0: Vec<PhasePoint> = sample.particles.iter().map(Particle::phase).collect();
    let weights: Vec<f64> = sample.particles.iter().map(|p| p.w).collect();
    let free = flow_recording(&z0, 0.0, cfg.t_final, &ZeroField, &cfg.integrator)?;
    let times: Vec<f64> = free.iter().map(|(t, _)| *t).collect();
    let mut report = PicardReport {
        t_final: cfg.t_final,
        samples: z0.len(),
        times,
        distances: Vec::new(),
        ratios: Vec::new(),
        iterates: vec![IterateSummary {
            index: 0,
            departure_from_free: 0.0,
        }],
    };
    let mut history = history_of(&free, &weights, cfg.fields)?;
    let mut prev = free.clone();
    for n in 1..=cfg.iterations {
        let next = match flow_recording(&z0, 0.0, cfg.t_final, &history, &cfg.integrator) {
            Ok(t) => t,
            Err(Error::BlowUp { time, speed, guard }) => {
                return Ok(PicardOutcome {
                    report,
                    history,
                    status: RunStatus::BlowUp { time, speed, guard },
                });
            }
            Err(e) => return Err(e),
        };
        let d = max_distance(&next, &prev);
        if let Some(&last) = report.distances.last() {
            report.ratios.push(if last > 0.0 { d / last } else { 0.0 });
        }
        report.distances.push(d);
        report.iterates.push(IterateSummary {
            index: n,
            departure_from_free: max_distance(&next, &free),
        });
        history = history_of(&next, &weights, cfg.fields)?;
        prev = next;
    }
    Ok(PicardOutcome {
        report,
        history,
        status: RunStatus::Completed,
    })
}
