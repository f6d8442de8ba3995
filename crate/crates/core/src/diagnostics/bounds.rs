//! Interpolation and Sobolev bounds on grid densities and the admissibility of
//! initial data.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{eval_potential_grid, grid_mollifier, Moment};
use crate::kernel::{MollifierShape, FOUR_PI};
use crate::phase::grid::{DepositGrid, ScalarGrid, VectorGrid};
use crate::phase::lattice::PhaseLattice;
use crate::phase::profile::InitialProfile;
use crate::quadrature::GaussLegendre;

/// Exponents `(p, theta)` with `p = (4q - 3)/(3q - 2)`, `theta = 3(q - 1)/(4q - 3)`.
pub fn interpolation_exponents(q: f64) -> (f64, f64) {
    (
        (4.0 * q - 3.0) / (3.0 * q - 2.0),
        3.0 * (q - 1.0) / (4.0 * q - 3.0),
    )
}

/// `C(q) = (1 + a) a^(-theta) (4 pi / 3)^((q - 1)(1 - theta)/q)` with
/// `a = 3(q - 1)/q`, the minimum over `R` of `a' R^a + b R^(-1)` for
/// `rho(x) <= C ||f(x,.)||_q^(1 - theta) ||sqrt(1+|v|^2) f(x,.)||_1^theta`.
pub fn interpolation_constant(q: f64) -> f64 {
    if q == 1.0 {
        return 1.0;
    }
    let a = 3.0 * (q - 1.0) / q;
    let (_, theta) = interpolation_exponents(q);
    (1.0 + a) * a.powf(-theta) * (4.0 * PI / 3.0).powf((q - 1.0) * (1.0 - theta) / q)
}

/// Sharp constant of `int int rho(x) rho(y) / |x - y| <= C ||rho||_{6/5}^2`.
pub fn hardy_littlewood_sobolev_constant() -> f64 {
    (4.0 / 3.0) * (4.0 / PI.sqrt()).powf(2.0 / 3.0)
}

/// Default smallness threshold for `||f0||_{3/2}` when `sigma_E = -1`:
/// `1/2 int (H * rho) rho <= (C_HLS / 8 pi) C(3/2)^2 ||f||_{3/2} REL`, so the
/// energy controls `REL` while `||f0||_{3/2}` stays below the reciprocal.
pub fn default_smallness() -> f64 {
    let c = interpolation_constant(1.5);
    1.0 / (hardy_littlewood_sobolev_constant() / (2.0 * FOUR_PI) * c * c)
}

/// Piecewise-constant phase-space density: `values[n]` is the value on cell
/// `n` of `lattice`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDensity {
    pub lattice: PhaseLattice,
    pub values: Vec<f64>,
}

impl PhaseDensity {
    pub fn new(lattice: PhaseLattice, values: Vec<f64>) -> Result<PhaseDensity> {
        if values.len() != lattice.len() {
            return invalid(format!(
                "{} values for {} cells",
                values.len(),
                lattice.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return invalid(format!("cell {i} has a negative or non-finite value"));
        }
        Ok(PhaseDensity { lattice, values })
    }

    /// Profile values at the cell centres.
    pub fn from_profile(profile: &InitialProfile, lattice: PhaseLattice) -> PhaseDensity {
        let values = (0..lattice.len())
            .into_par_iter()
            .map(|n| profile.evaluate_or_zero(lattice.center(lattice.unflatten(n))))
            .collect();
        PhaseDensity { lattice, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub q: f64,
    pub p: f64,
    pub theta: f64,
    pub constant: f64,
    /// `||rho||_p`.
    pub lhs: f64,
    pub f_q_norm: f64,
    pub weighted_l1: f64,
    /// `C(q) ||sqrt(1+|v|^2) f||_1^theta ||f||_q^(1 - theta)`.
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

/// Evaluates both sides of the interpolation inequality for a piecewise-constant
/// density; the weight `sqrt(1 + |v|^2)` is averaged over each velocity cell
/// with a 3-point Gauss rule per axis.
pub fn interpolation_check(f: &PhaseDensity, q: f64) -> Result<BoundReport> {
    if !(q >= 1.0) || !q.is_finite() {
        return invalid(format!("interpolation needs q >= 1, got {q}"));
    }
    let lat = &f.lattice;
    let d = lat.dims;
    let h = lat.spacing();
    let nx = d[0] * d[1] * d[2];
    let nv = d[3] * d[4] * d[5];
    let dx = h[0] * h[1] * h[2];
    let dv = h[3] * h[4] * h[5];
    let rule = GaussLegendre::new(3);
    let axis_nodes = |a: usize, i: usize| {
        let lo = lat.bounds.lo[a] + i as f64 * h[a];
        rule.on_interval(lo, lo + h[a])
    };
    let weight: Vec<f64> = (0..nv)
        .map(|m| {
            let (i, j, k) = (m / (d[4] * d[5]), (m / d[5]) % d[4], m % d[5]);
            let mut acc = 0.0;
            for (a, wa) in axis_nodes(3, i) {
                for (b, wb) in axis_nodes(4, j) {
                    for (c, wc) in axis_nodes(5, k) {
                        acc += wa * wb * wc * (1.0 + a * a + b * b + c * c).sqrt();
                    }
                }
            }
            acc / dv
        })
        .collect();
    let (p, theta) = interpolation_exponents(q);
    let mut rho_p = 0.0;
    let mut f_q = 0.0;
    let mut weighted = 0.0;
    for ix in 0..nx {
        let cells = &f.values[ix * nv..(ix + 1) * nv];
        let rho: f64 = cells.iter().sum::<f64>() * dv;
        rho_p += rho.powf(p);
        f_q += cells.iter().map(|v| v.powf(q)).sum::<f64>();
        weighted += cells.iter().zip(&weight).map(|(v, w)| v * w).sum::<f64>();
    }
    let lhs = (rho_p * dx).powf(1.0 / p);
    let f_q_norm = (f_q * dx * dv).powf(1.0 / q);
    let weighted_l1 = weighted * dx * dv;
    let constant = interpolation_constant(q);
    let rhs = constant * weighted_l1.powf(theta) * f_q_norm.powf(1.0 - theta);
    let margin = rhs - lhs;
    let passed = if q == 1.0 {
        (lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE)
    } else {
        margin > 0.0
    };
    Ok(BoundReport {
        q,
        p,
        theta,
        constant,
        lhs,
        f_q_norm,
        weighted_l1,
        rhs,
        margin,
        passed,
    })
}

/// `||H * rho||_6 / ||rho||_{6/5}` on the grid, the potential summed directly
/// with the grid mollifier.
pub fn sobolev_ratio(rho: &ScalarGrid, shape: MollifierShape) -> Result<f64> {
    if rho.values.iter().all(|&r| r == 0.0) {
        return Err(Error::UndefinedRatio("density vanishes identically".into()));
    }
    let g = rho.geometry;
    let dep = DepositGrid::from_densities(rho.clone(), VectorGrid::zeros(g))?;
    let pot = eval_potential_grid(&dep, Moment::Rho, grid_mollifier(&g, shape)?);
    let phi = pot.as_scalar().expect("density potential is scalar");
    Ok(phi.lp_norm(6.0)? / rho.lp_norm(1.2)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityCheck {
    pub name: String,
    pub value: f64,
    pub limit: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sigma_e: i8,
    pub epsilon: f64,
    pub checks: Vec<AdmissibilityCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<ValidationReport> {
        if let Some(c) = self.checks.iter().find(|c| !c.passed) {
            let limit = c.limit.map_or(String::new(), |l| format!(" (limit {l})"));
            return Err(Error::Validation(format!(
                "{} violated: value {}{limit}",
                c.name, c.value
            )));
        }
        Ok(self)
    }
}

/// Integrability and smallness conditions on `f0` for the given `sigma_E`.
pub fn initial_admissibility(
    profile: &InitialProfile,
    sigma_e: i8,
    epsilon: f64,
) -> Result<ValidationReport> {
    if !(-1..=1).contains(&sigma_e) {
        return invalid(format!("sigma_E must be -1, 0 or 1, got {sigma_e}"));
    }
    if !(epsilon > 0.0) {
        return invalid(format!(
            "smallness threshold must be positive, got {epsilon}"
        ));
    }
    let mut checks = Vec::new();
    let l1 = profile.lp_norm(1.0)?;
    checks.push(AdmissibilityCheck {
        name: "l1_integrability".into(),
        value: l1,
        limit: None,
        passed: l1.is_finite(),
    });
    if sigma_e != 1 {
        let l32 = profile.lp_norm(1.5)?;
        checks.push(AdmissibilityCheck {
            name: "l3/2_integrability".into(),
            value: l32,
            limit: None,
            passed: l32.is_finite(),
        });
        if sigma_e == -1 {
            checks.push(AdmissibilityCheck {
                name: "l3/2_smallness".into(),
                value: l32,
                limit: Some(epsilon),
                passed: l32 < epsilon,
            });
        }
    }
    let rel = profile.relativistic_energy();
    checks.push(AdmissibilityCheck {
        name: "initial_energy_finite".into(),
        value: rel,
        limit: None,
        passed: rel.is_finite(),
    });
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        sigma_e,
        epsilon,
        checks,
        passed,
    })
}

/// As `initial_admissibility`, failing with a validation error naming the
/// first violated condition.
pub fn validate_initial(
    profile: &InitialProfile,
    sigma_e: i8,
    epsilon: f64,
) -> Result<ValidationReport> {
    initial_admissibility(profile, sigma_e, epsilon)?.into_result()
}
