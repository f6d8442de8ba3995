//! Time-indexed field records used to transport points along a frozen `b_t`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::FieldSource;
use crate::error::{invalid, Error, Result};
use crate::fields::{eval_fields, Coupling, FieldSample, Sources};
use crate::kernel::{KernelFamily, MollifierSpec};
use crate::phase::ensemble::Ensemble;
use crate::phase::grid::{GridGeometry, VectorGrid};
use crate::vec3::Vec3;

/// Coupling and kernel of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub coupling: Coupling,
    pub mollifier: MollifierSpec,
}

impl FieldConfig {
    pub fn kernel(&self) -> KernelFamily {
        KernelFamily::mollified(&self.mollifier)
    }
}

/// Fields tabulated on grid nodes, couplings already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedFields {
    pub e: VectorGrid,
    pub b: VectorGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub ensemble: Ensemble,
    pub gridded: Option<GriddedFields>,
    sources: Sources,
}

impl Snapshot {
    fn new(ensemble: Ensemble) -> Snapshot {
        let sources = Sources::from_ensemble(&ensemble);
        Snapshot {
            ensemble,
            gridded: None,
            sources,
        }
    }

    pub fn time(&self) -> f64 {
        self.ensemble.time
    }

    fn fields_many(&self, xs: &[Vec3], fc: &FieldConfig) -> Vec<FieldSample> {
        let Some(g) = &self.gridded else {
            return eval_fields(&self.sources, xs, fc.coupling, fc.kernel());
        };
        let mut out = vec![FieldSample::ZERO; xs.len()];
        let mut outside = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            match (g.e.sample(x), g.b.sample(x)) {
                (Some(e), Some(b)) => out[i] = FieldSample { e, b },
                _ => outside.push(i),
            }
        }
        if !outside.is_empty() {
            let pts: Vec<Vec3> = outside.iter().map(|&i| xs[i]).collect();
            for (i, f) in
                outside
                    .into_iter()
                    .zip(eval_fields(&self.sources, &pts, fc.coupling, fc.kernel()))
            {
                out[i] = f;
            }
        }
        out
    }
}

/// Snapshots at strictly increasing times starting at 0, with fields
/// interpolated linearly in time between them.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub fields: FieldConfig,
    snapshots: Vec<Snapshot>,
}

impl FieldHistory {
    pub fn new(fields: FieldConfig, first: Ensemble) -> Result<Self> {
        if first.time != 0.0 {
            return invalid(format!("history must start at t = 0, got {}", first.time));
        }
        Ok(FieldHistory {
            fields,
            snapshots: vec![Snapshot::new(first)],
        })
    }

    pub fn from_ensembles(fields: FieldConfig, ensembles: Vec<Ensemble>) -> Result<Self> {
        let mut it = ensembles.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::InvalidInput("history needs at least one snapshot".into()))?;
        let mut h = FieldHistory::new(fields, first)?;
        for e in it {
            h.push(e)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, ensemble: Ensemble) -> Result<()> {
        let last = self.end_time();
        if !(ensemble.time > last) {
            return invalid(format!(
                "snapshot time {} does not exceed {last}",
                ensemble.time
            ));
        }
        self.snapshots.push(Snapshot::new(ensemble));
        Ok(())
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Snapshot::time).collect()
    }

    pub fn end_time(&self) -> f64 {
        self.snapshots.last().map_or(0.0, Snapshot::time)
    }

    pub fn last(&self) -> &Ensemble {
        &self
            .snapshots
            .last()
            .expect("history is never empty")
            .ensemble
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Tabulates every snapshot's fields on `geometry`; evaluation then
    /// interpolates trilinearly inside the grid and sums directly outside it.
    pub fn with_grids(mut self, geometry: &GridGeometry) -> FieldHistory {
        let nodes = geometry.nodes();
        let fc = self.fields;
        for s in &mut self.snapshots {
            s.gridded = None;
            let f = s.fields_many(&nodes, &fc);
            let e = VectorGrid {
                geometry: *geometry,
                values: f.iter().map(|q| q.e).collect(),
            };
            let b = VectorGrid {
                geometry: *geometry,
                values: f.iter().map(|q| q.b).collect(),
            };
            s.gridded = Some(GriddedFields { e, b });
        }
        self
    }

    /// Snapshot interval `k` and weight `s` with `t = (1-s) t_k + s t_{k+1}`.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let end = self.end_time();
        let slack = 1e-9 * end.max(1.0);
        if !(t >= -slack && t <= end + slack) {
            return Err(Error::OutOfDomain(format!(
                "t = {t} outside history [0, {end}]"
            )));
        }
        if self.snapshots.len() == 1 {
            return Ok((0, 0.0));
        }
        let times = self.times();
        let k = times
            .partition_point(|&tk| tk <= t)
            .clamp(1, times.len() - 1)
            - 1;
        let s = ((t - times[k]) / (times[k + 1] - times[k])).clamp(0.0, 1.0);
        Ok((k, s))
    }

    /// Writes one CSV per snapshot and `manifest.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>, config_hash: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.len());
        for (k, s) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:05}.csv");
            s.ensemble.save_csv(dir.join(&name))?;
            files.push(name);
        }
        let manifest = HistoryManifest {
            times: self.times(),
            files,
            config_hash: config_hash.to_string(),
            sigma_e: self.fields.coupling.sigma_e,
            sigma_b: self.fields.coupling.sigma_b,
            mollifier: self.fields.mollifier,
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    pub fn import(dir: impl AsRef<Path>) -> Result<(FieldHistory, HistoryManifest)> {
        let dir = dir.as_ref();
        let manifest: HistoryManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.times.len() != manifest.files.len() {
            return Err(Error::Format(
                "manifest times and files differ in length".into(),
            ));
        }
        let fields = FieldConfig {
            coupling: Coupling::new(manifest.sigma_e, manifest.sigma_b)?,
            mollifier: manifest.mollifier,
        };
        let ensembles = manifest
            .times
            .iter()
            .zip(&manifest.files)
            .map(|(&t, f)| Ensemble::load_csv(dir.join(f), t))
            .collect::<Result<Vec<_>>>()?;
        Ok((FieldHistory::from_ensembles(fields, ensembles)?, manifest))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryManifest {
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub config_hash: String,
    pub sigma_e: i8,
    pub sigma_b: i8,
    pub mollifier: MollifierSpec,
}

impl FieldSource for FieldHistory {
    fn fields_many(&self, xs: &[Vec3], t: f64) -> Result<Vec<FieldSample>> {
        if self.fields.coupling.is_free() {
            return Ok(vec![FieldSample::ZERO; xs.len()]);
        }
        let (k, s) = self.locate(t)?;
        let a = self.snapshots[k].fields_many(xs, &self.fields);
        if s == 0.0 {
            return Ok(a);
        }
        let b = self.snapshots[k + 1].fields_many(xs, &self.fields);
        if s == 1.0 {
            return Ok(b);
        }
        Ok(a.iter().zip(&b).map(|(p, q)| p.lerp(q, s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::MollifierShape;
    use crate::phase::ensemble::Particle;

    fn config() -> FieldConfig {
        FieldConfig {
            coupling: Coupling::new(1, 1).unwrap(),
            mollifier: MollifierSpec::new(4, MollifierShape::UniformBall).unwrap(),
        }
    }

    fn ensemble(t: f64, x: f64) -> Ensemble {
        Ensemble::new(
            vec![Particle::new(
                Vec3::new(x, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                1.0,
            )],
            t,
        )
        .unwrap()
    }

    #[test]
    fn times_must_increase_from_zero() {
        assert!(FieldHistory::new(config(), ensemble(0.5, 0.0)).is_err());
        let mut h = FieldHistory::new(config(), ensemble(0.0, 0.0)).unwrap();
        assert!(h.push(ensemble(0.0, 0.0)).is_err());
        h.push(ensemble(0.1, 0.0)).unwrap();
        assert_eq!(h.times(), vec![0.0, 0.1]);
    }

    #[test]
    fn fields_interpolate_linearly_in_time() {
        let h =
            FieldHistory::from_ensembles(config(), vec![ensemble(0.0, 0.0), ensemble(1.0, 0.5)])
                .unwrap();
        let x = [Vec3::new(2.0, 1.0, 0.0)];
        let a = h.fields_many(&x, 0.0).unwrap()[0];
        let b = h.fields_many(&x, 1.0).unwrap()[0];
        let mid = h.fields_many(&x, 0.25).unwrap()[0];
        assert!((mid.e - (a.e * 0.75 + b.e * 0.25)).norm() < 1e-16);
        assert!((mid.b - (a.b * 0.75 + b.b * 0.25)).norm() < 1e-16);
        assert!(h.fields_many(&x, 1.5).is_err());
    }

    #[test]
    fn gridded_fields_agree_with_direct_at_nodes() {
        let h =
            FieldHistory::from_ensembles(config(), vec![ensemble(0.0, 0.0), ensemble(1.0, 0.1)])
                .unwrap();
        let g = GridGeometry::cube(Vec3::ZERO, 1.0, 9).unwrap();
        let gridded = h.clone().with_grids(&g);
        let node = [g.node(1, 7, 2), Vec3::new(3.0, 0.0, 0.0)];
        let a = h.fields_many(&node, 0.4).unwrap();
        let b = gridded.fields_many(&node, 0.4).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p.e - q.e).norm() < 1e-15 && (p.b - q.b).norm() < 1e-15);
        }
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let h =
            FieldHistory::from_ensembles(config(), vec![ensemble(0.0, 0.0), ensemble(0.25, 0.3)])
                .unwrap();
        h.export(dir.path(), "abc").unwrap();
        let (back, manifest) = FieldHistory::import(dir.path()).unwrap();
        assert_eq!(back, h);
        assert_eq!(manifest.config_hash, "abc");
        assert_eq!(manifest.mollifier.level, 4);
    }
}
