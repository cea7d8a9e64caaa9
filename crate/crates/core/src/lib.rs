//! Phase reduction toolkit for limit-cycle oscillators.
//!
//! The pipeline runs bottom-up: [`models`] supplies vector fields, [`ode`]
//! integrates them, [`limit_cycle`] locates the attracting orbit,
//! [`phase`] computes asymptotic phase, isochrons and the phase
//! sensitivity function, [`reduction`] and [`network`] build and simulate
//! phase models, and [`diagnostics`] measures synchronization.

pub mod diagnostics;
pub mod error;
pub mod fourier;
pub mod io;
pub mod limit_cycle;
pub mod models;
pub mod network;
pub mod phase;
pub mod ode;
pub mod quadrature;
pub mod reduction;
pub mod roots;

pub use error::{Error, Result};
pub use limit_cycle::{find_limit_cycle, CycleOptions, LimitCycle};
pub use models::{make_model, OscillatorModel, Perturbation};
pub use ode::{Section, Tolerance, Trajectory};
