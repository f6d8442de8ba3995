//! Particle simulation of relativistic Vlasov systems with Coulomb and
//! Biot-Savart self-fields, together with the energy, transport and
//! weak-form diagnostics used to check a run.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod kernel;
pub mod phase;
pub mod quadrature;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::{PhasePoint, Vec3};
