use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_start, Stepper, System, Tolerance};
use crate::error::{Error, Result};
use crate::roots::brent;

/// Root tolerance on the level function at an accepted crossing.
pub const CROSSING_TOL: f64 = 1e-10;

/// Which sign change of the level function counts as a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `s` goes from negative to non-negative.
    Increasing,
    /// `s` goes from positive to non-positive.
    Decreasing,
    Either,
}

#[derive(Clone)]
enum Level {
    Hyperplane { normal: Vec<f64>, offset: f64 },
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// Zero set of a level function `s`, crossed in a given direction.
#[derive(Clone)]
pub struct Section {
    level: Level,
    pub direction: Direction,
}

impl fmt::Debug for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.level {
            Level::Hyperplane { normal, offset } => f
                .debug_struct("Section")
                .field("normal", normal)
                .field("offset", offset)
                .field("direction", &self.direction)
                .finish(),
            Level::Function(_) => f
                .debug_struct("Section")
                .field("level", &"<fn>")
                .field("direction", &self.direction)
                .finish(),
        }
    }
}

impl Section {
    /// `s(x) = normal · x − offset`.
    pub fn hyperplane(normal: Vec<f64>, offset: f64, direction: Direction) -> Self {
        Self {
            level: Level::Hyperplane { normal, offset },
            direction,
        }
    }

    /// `s(x) = x[axis] − value`.
    pub fn coordinate(dim: usize, axis: usize, value: f64, direction: Direction) -> Self {
        let mut normal = vec![0.0; dim];
        normal[axis] = 1.0;
        Self::hyperplane(normal, value, direction)
    }

    pub fn from_fn<F>(level: F, direction: Direction) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            level: Level::Function(Arc::new(level)),
            direction,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.level {
            Level::Hyperplane { normal, offset } => {
                normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() - offset
            }
            Level::Function(f) => f(x),
        }
    }

    /// `(normal, offset)` when the section is a hyperplane.
    pub fn as_hyperplane(&self) -> Option<(&[f64], f64)> {
        match &self.level {
            Level::Hyperplane { normal, offset } => Some((normal, *offset)),
            Level::Function(_) => None,
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.level {
            Level::Hyperplane { normal, .. } => normal.clone(),
            Level::Function(f) => {
                let mut xp = x.to_vec();
                (0..x.len())
                    .map(|i| {
                        let h = 1e-6 * x[i].abs().max(1.0);
                        xp[i] = x[i] + h;
                        let up = f(&xp);
                        xp[i] = x[i] - h;
                        let dn = f(&xp);
                        xp[i] = x[i];
                        (up - dn) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    pub(crate) fn is_crossing(&self, before: f64, after: f64) -> bool {
        let up = before < 0.0 && after >= 0.0;
        let down = before > 0.0 && after <= 0.0;
        match self.direction {
            Direction::Increasing => up,
            Direction::Decreasing => down,
            Direction::Either => up || down,
        }
    }
}

/// A located section crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub x: Vec<f64>,
}

/// First crossing of `section` at a time in `(0, t_max]` for the solution
/// started at `x0` at time 0.
pub fn find_crossing<S: System>(
    sys: &S,
    x0: &[f64],
    section: &Section,
    t_max: f64,
    tol: Tolerance,
) -> Result<Crossing> {
    check_start(sys, x0, (0.0, t_max), tol)?;
    if t_max <= 0.0 {
        return Err(Error::InvalidArgument("t_max must be positive".into()));
    }
    let mut stepper = Stepper::new(sys, 0.0, x0, t_max, tol);
    let mut s_prev = section.eval(x0);
    let mut buf = vec![0.0; sys.dim()];
    while let Some(seg) = stepper.step()? {
        let s_next = section.eval(stepper.state());
        if section.is_crossing(s_prev, s_next) {
            let (a, b) = if seg.h > 0.0 { (seg.t0, seg.t1()) } else { (seg.t1(), seg.t0) };
            let t_star = brent(
                |t| {
                    seg.eval_into(t, &mut buf);
                    section.eval(&buf)
                },
                a,
                b,
                1e-15,
                200,
            )
            .unwrap_or(b);
            let x_star = if t_star == seg.t1() {
                stepper.state().to_vec()
            } else {
                seg.eval(t_star)
            };
            let s_val = section.eval(&x_star);
            if s_val.abs() > CROSSING_TOL {
                return Err(Error::InvalidArgument(format!(
                    "crossing refinement stalled at |s| = {s_val:e}"
                )));
            }
            let mut f = vec![0.0; sys.dim()];
            sys.rhs(t_star, &x_star, &mut f);
            let grad = section.gradient(&x_star);
            let dot: f64 = grad.iter().zip(&f).map(|(g, v)| g * v).sum();
            let scale = norm(&grad) * norm(&f);
            if dot.abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::TangentialCrossing {
                    t: t_star,
                    transversality: dot,
                });
            }
            return Ok(Crossing { t: t_star, x: x_star });
        }
        s_prev = s_next;
    }
    Err(Error::NoCrossing { t_max })
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
