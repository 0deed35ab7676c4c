//! Continuous weak measurement of open quantum systems through repeated
//! interactions with qubit probes.
//!
//! Each time step couples the system to a fresh probe qubit and measures the
//! probe. Projecting the interaction onto probe outcomes gives Kraus operators
//! ([`schemes`]); sampling them yields conditional trajectories ([`stepper`],
//! [`ensemble`]) whose averages follow a Gaussian-bath master equation
//! ([`oracle`]). [`appendix`] examines which probe models admit a consistent
//! homodyne unraveling of a squeezed bath.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appendix;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod schemes;
pub mod stepper;

pub use density::{check_density, renormalize, superop_d, superop_g, superop_h, DensityMatrix, HealthReport};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use schemes::{BathParams, KrausSet, OutcomeChannel, OutcomeValue, SchemeConfig, SchemeTag, SystemModel};
