//! Adaptive explicit integration: the flow map, dense trajectories and
//! section crossings.

mod dopri;
mod events;
mod trajectory;

pub use dopri::{DenseSegment, Stepper};
pub use events::{find_crossing, Crossing, Direction, Section};
pub use trajectory::Trajectory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of `ẋ = F(t, x)`.
pub trait System: Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]);

    /// States the integrator may visit; leaving this set aborts integration.
    fn admissible(&self, _x: &[f64]) -> bool {
        true
    }
}

impl<S: System + ?Sized> System for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (**self).rhs(t, x, dx)
    }
    fn admissible(&self, x: &[f64]) -> bool {
        (**self).admissible(x)
    }
}

/// Mixed relative/absolute local error tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    /// Default for cycle, isochron and sensitivity computations.
    pub const GEOMETRY: Tolerance = Tolerance {
        rel: 1e-9,
        abs: 1e-11,
    };
    /// Tighter setting used where phases are differentiated numerically.
    pub const FINE: Tolerance = Tolerance {
        rel: 1e-12,
        abs: 1e-14,
    };
    /// Long simulations and sweeps.
    pub const SWEEP: Tolerance = Tolerance {
        rel: 1e-7,
        abs: 1e-9,
    };

    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rel > 0.0 && self.abs > 0.0 && self.rel.is_finite() && self.abs.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "tolerances must be positive, got rel = {}, abs = {}",
                self.rel, self.abs
            )))
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::GEOMETRY
    }
}

fn check_start<S: System>(sys: &S, x0: &[f64], span: (f64, f64), tol: Tolerance) -> Result<()> {
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    if !span.0.is_finite() || !span.1.is_finite() {
        return Err(Error::InvalidArgument("time span must be finite".into()));
    }
    tol.validate()?;
    if !sys.admissible(x0) {
        return Err(Error::OutsideBasin { state: x0.to_vec() });
    }
    Ok(())
}

/// Integrate over `span` (either direction), recording every accepted step
/// together with its dense-output segment.
pub fn integrate<S: System>(sys: &S, x0: &[f64], span: (f64, f64), tol: Tolerance) -> Result<Trajectory> {
    check_start(sys, x0, span, tol)?;
    let mut traj = Trajectory::start(span.0, x0);
    if span.0 == span.1 {
        return Ok(traj);
    }
    let mut stepper = Stepper::new(sys, span.0, x0, span.1, tol);
    while let Some(seg) = stepper.step()? {
        traj.push(seg);
    }
    Ok(traj)
}

/// Endpoint of the flow: `φ(t, x0)` for an autonomous or explicitly
/// time-dependent system started at time 0.
pub fn flow<S: System>(sys: &S, x0: &[f64], t: f64, tol: Tolerance) -> Result<Vec<f64>> {
    flow_between(sys, x0, (0.0, t), tol)
}

/// Endpoint of the solution started at `span.0` and evaluated at `span.1`.
pub fn flow_between<S: System>(sys: &S, x0: &[f64], span: (f64, f64), tol: Tolerance) -> Result<Vec<f64>> {
    check_start(sys, x0, span, tol)?;
    if span.0 == span.1 {
        return Ok(x0.to_vec());
    }
    let mut stepper = Stepper::new(sys, span.0, x0, span.1, tol);
    while stepper.step()?.is_some() {}
    Ok(stepper.state().to_vec())
}

/// Dense samples of the solution at the requested (monotone) times.
pub fn sample<S: System>(sys: &S, x0: &[f64], t0: f64, times: &[f64], tol: Tolerance) -> Result<Vec<Vec<f64>>> {
    let Some(&t_end) = times.last() else {
        return Ok(Vec::new());
    };
    check_start(sys, x0, (t0, t_end), tol)?;
    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    let forward = t_end >= t0;
    let before = |t: f64, bound: f64| if forward { t <= bound } else { t >= bound };
    while idx < times.len() && times[idx] == t0 {
        out.push(x0.to_vec());
        idx += 1;
    }
    if idx == times.len() {
        return Ok(out);
    }
    let mut stepper = Stepper::new(sys, t0, x0, t_end, tol);
    while idx < times.len() {
        let Some(seg) = stepper.step()? else { break };
        while idx < times.len() && before(times[idx], seg.t1()) {
            out.push(seg.eval(times[idx]));
            idx += 1;
        }
    }
    while idx < times.len() {
        out.push(stepper.state().to_vec());
        idx += 1;
    }
    Ok(out)
}

/// Plain closure-backed system, handy for tests and small scalar problems.
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> System for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.f)(t, x, dx)
    }
}
