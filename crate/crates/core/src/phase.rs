//! Asymptotic phase, isochrons and the phase sensitivity function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{node, wrap_diff, wrap_phase, PeriodicInterpolant};
use crate::limit_cycle::LimitCycle;
use crate::models::OscillatorModel;
use crate::ode::{self, System, Tolerance};
use crate::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseOptions {
    pub tol: Tolerance,
    /// Distance to the cycle at which the phase is read off.
    pub settle_distance: f64,
    /// Lower bound on the number of periods in the settling budget.
    pub min_periods: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::FINE,
            settle_distance: 1e-9,
            min_periods: 10.0,
        }
    }
}

/// Asymptotic phase `Θ(x)` with default options.
pub fn asymptotic_phase(model: &OscillatorModel, cycle: &LimitCycle, x: &[f64]) -> Result<f64> {
    asymptotic_phase_with(model, cycle, x, &PhaseOptions::default())
}

/// Integrates `x` forward one period at a time until it is within
/// `settle_distance` of the cycle, projects onto the cycle and rotates the
/// phase back by `ω₀ t`.
pub fn asymptotic_phase_with(
    model: &OscillatorModel,
    cycle: &LimitCycle,
    x: &[f64],
    opts: &PhaseOptions,
) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    if !model.in_basin(x) {
        return Err(Error::OutsideBasin { state: x.to_vec() });
    }
    let budget = opts.min_periods.max(12.0 / cycle.floquet.abs()).ceil() as usize;
    let mut state = x.to_vec();
    let mut elapsed = 0.0;
    let (mut theta, mut d) = cycle.project(&state);
    let mut periods = 0;
    while d >= opts.settle_distance {
        if periods == budget {
            return Err(Error::NoPhaseConvergence {
                budget: budget as f64 * cycle.period,
                distance: d,
            });
        }
        state = ode::flow(model, &state, cycle.period, opts.tol)?;
        elapsed += cycle.period;
        periods += 1;
        (theta, d) = cycle.project(&state);
    }
    Ok(wrap_phase(theta - cycle.omega0 * elapsed))
}

/// A sampled level set `{Θ = θ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isochron {
    pub theta: f64,
    /// Ordered by distance from the cycle.
    pub points: Vec<Vec<f64>>,
    /// Smallest and largest distance from the cycle centre covered.
    pub extent: (f64, f64),
}

impl Isochron {
    /// CSV rows `index, x1 … xn`.
    pub fn to_csv(&self) -> String {
        let dim = self.points.first().map_or(0, Vec::len);
        let mut header = vec!["index".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        let rows = self.points.iter().enumerate().map(|(k, p)| {
            std::iter::once(k as f64).chain(p.iter().copied()).collect::<Vec<_>>()
        });
        crate::io::csv_table(&header, rows)
    }
}

/// Level set of the asymptotic phase through `γ(θ)` for a planar model,
/// with points at `n_points` evenly spaced distances from the cycle centre
/// in `radial_range`.
pub fn compute_isochron(
    model: &OscillatorModel,
    cycle: &LimitCycle,
    theta: f64,
    radial_range: (f64, f64),
    n_points: usize,
) -> Result<Isochron> {
    let z = phase_sensitivity(model, cycle, Method::Adjoint)?;
    compute_isochron_with(model, cycle, &z, theta, radial_range, n_points)
}

/// As [`compute_isochron`], reusing a precomputed sensitivity function for
/// the tangent direction at `γ(θ)`.
pub fn compute_isochron_with(
    model: &OscillatorModel,
    cycle: &LimitCycle,
    z: &PhaseSensitivity,
    theta: f64,
    radial_range: (f64, f64),
    n_points: usize,
) -> Result<Isochron> {
    if model.dim() != 2 {
        return Err(Error::InvalidArgument("isochrons are computed for planar models only".into()));
    }
    let (r_lo, r_hi) = radial_range;
    if !(r_lo.is_finite() && r_hi.is_finite() && 0.0 < r_lo && r_lo <= r_hi) {
        return Err(Error::InvalidArgument(format!("bad radial range ({r_lo}, {r_hi})")));
    }
    if n_points == 0 {
        return Err(Error::InvalidArgument("n_points must be positive".into()));
    }
    let theta = wrap_phase(theta);
    let centre = cycle_centre(cycle);
    let base = cycle.gamma_at(theta);
    let r_base = radius(&base, &centre);

    let targets: Vec<f64> = if r_lo == r_hi {
        vec![r_lo]
    } else {
        let n = n_points.max(2);
        (0..n).map(|i| r_lo + (r_hi - r_lo) * i as f64 / (n - 1) as f64).collect()
    };

    // isochron tangent at γ(θ) is orthogonal to Z(θ); orient it outwards
    let zt = z.at(theta);
    let mut v = [-zt[1], zt[0]];
    let out = [base[0] - centre[0], base[1] - centre[1]];
    if v[0] * out[0] + v[1] * out[1] < 0.0 {
        v = [-v[0], -v[1]];
    }
    let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let v = [v[0] / nv, v[1] / nv];

    let ctx = IsoCtx {
        model,
        cycle,
        base: &base,
        v,
        centre: &centre,
        theta,
    };
    // radii this close to γ(θ) are represented by γ(θ) itself
    let snap = 1e-9 * r_base.max(1.0);
    let mut points = Vec::with_capacity(targets.len() + 1);
    if r_lo <= r_base + snap && r_base - snap <= r_hi {
        points.push(base.clone());
    }
    for &rho in &targets {
        if (rho - r_base).abs() <= snap {
            continue;
        }
        points.push(ctx.point_at_radius(rho, r_base)?);
    }
    let mut keyed: Vec<(f64, Vec<f64>)> = points.into_iter().map(|p| (cycle.distance(&p), p)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radii = keyed.iter().map(|(_, p)| radius(p, &centre));
    let extent = radii.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    Ok(Isochron {
        theta,
        points: keyed.into_iter().map(|(_, p)| p).collect(),
        extent,
    })
}

fn cycle_centre(cycle: &LimitCycle) -> Vec<f64> {
    let m = cycle.grid_len();
    let mut c = vec![0.0; cycle.dim()];
    for k in 0..m {
        for (ci, pi) in c.iter_mut().zip(cycle.point(k)) {
            *ci += pi / m as f64;
        }
    }
    c
}

fn radius(x: &[f64], centre: &[f64]) -> f64 {
    x.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

struct IsoCtx<'a> {
    model: &'a OscillatorModel,
    cycle: &'a LimitCycle,
    base: &'a [f64],
    v: [f64; 2],
    centre: &'a [f64],
    theta: f64,
}

impl IsoCtx<'_> {
    fn seed(&self, s: f64) -> Vec<f64> {
        vec![self.base[0] + s * self.v[0], self.base[1] + s * self.v[1]]
    }

    /// Seed at signed offset `s`, mapped back `k` whole periods; `None` when
    /// the backward flow blows up or leaves the basin.
    fn mapped(&self, s: f64, k: usize) -> Option<Vec<f64>> {
        let x = self.seed(s);
        if k == 0 {
            return Some(x);
        }
        ode::flow(self.model, &x, -(k as f64) * self.cycle.period, Tolerance::FINE).ok()
    }

    fn point_at_radius(&self, rho: f64, r_base: f64) -> Result<Vec<f64>> {
        let outward = rho > r_base;
        let sign = if outward { 1.0 } else { -1.0 };
        let offset = (rho - r_base).abs();
        let contraction = (self.cycle.floquet * self.cycle.period).exp();
        // fewest whole periods that bring the seed within 1e-4 of the cycle
        let mut k = 0usize;
        while offset * contraction.powi(k as i32) > 1e-4 && k < 64 {
            k += 1;
        }
        // residual of the landing radius; failures count as overshoot
        let resid = |s: f64| -> f64 {
            match self.mapped(sign * s, k) {
                Some(x) => sign * (radius(&x, self.centre) - rho),
                None => 1.0,
            }
        };
        let s0 = offset * contraction.powi(k as i32);
        let (mut lo, mut hi) = (s0 * 0.25, s0 * 4.0);
        let mut tries = 0;
        while resid(lo) > 0.0 {
            lo *= 0.25;
            tries += 1;
            if tries > 40 {
                return Err(Error::Isochron(format!("cannot bracket radius {rho} from below")));
            }
        }
        tries = 0;
        while resid(hi) < 0.0 {
            hi *= 4.0;
            tries += 1;
            if tries > 40 {
                return Err(Error::Isochron(format!("cannot bracket radius {rho} from above")));
            }
        }
        let s = brent(resid, lo, hi, 1e-16 * hi.max(1e-300) + 1e-300, 200)
            .ok_or_else(|| Error::Isochron(format!("radius {rho} not bracketed")))?;
        let mut x = self
            .mapped(sign * s, k)
            .ok_or_else(|| Error::Isochron(format!("backward flow failed at radius {rho}")))?;

        // slide along the flow onto the exact level set
        let opts = PhaseOptions::default();
        for _ in 0..3 {
            let phase = asymptotic_phase_with(self.model, self.cycle, &x, &opts)?;
            let err = wrap_diff(phase - self.theta);
            if err.abs() <= 1e-6 {
                break;
            }
            x = ode::flow(self.model, &x, -err / self.cycle.omega0, Tolerance::FINE)?;
        }
        let phase = asymptotic_phase_with(self.model, self.cycle, &x, &opts)?;
        let err = wrap_diff(phase - self.theta);
        if err.abs() >= 1e-4 {
            return Err(Error::Isochron(format!(
                "point at radius {rho} has phase error {err:e}"
            )));
        }
        Ok(x)
    }
}

/// How to compute the phase sensitivity function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adjoint,
    FiniteDifference,
}

/// `Z(θ) = ∇Θ` on the cycle, sampled on the cycle's phase grid.
#[derive(Debug, Clone)]
pub struct PhaseSensitivity {
    pub omega0: f64,
    pub method: Method,
    values: PeriodicInterpolant,
}

impl PhaseSensitivity {
    /// Wrap samples `Z(θ_k)` given node-major on a uniform grid.
    pub fn from_samples(omega0: f64, method: Method, samples: Vec<f64>, dim: usize) -> Self {
        Self {
            omega0,
            method,
            values: PeriodicInterpolant::new(samples, dim),
        }
    }

    /// Sample a known sensitivity function on `m` nodes.
    pub fn from_fn<F>(omega0: f64, m: usize, dim: usize, f: F) -> Self
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        Self {
            omega0,
            method: Method::Adjoint,
            values: PeriodicInterpolant::from_fn(m, dim, f),
        }
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values.width()
    }

    pub fn grid_phase(&self, k: usize) -> f64 {
        node(k, self.grid_len())
    }

    pub fn node(&self, k: usize) -> &[f64] {
        self.values.node_value(k)
    }

    pub fn at(&self, theta: f64) -> Vec<f64> {
        self.values.eval(theta)
    }

    pub fn at_into(&self, theta: f64, out: &mut [f64]) {
        self.values.eval_into(theta, out)
    }

    /// Largest `|Z·f(γ) − ω₀|` over the grid.
    pub fn normalization_error(&self, model: &OscillatorModel, cycle: &LimitCycle) -> f64 {
        (0..self.grid_len())
            .map(|k| {
                let f = model.f(&cycle.gamma_at(self.grid_phase(k)));
                let dot: f64 = f.iter().zip(self.node(k)).map(|(a, b)| a * b).sum();
                (dot - self.omega0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// CSV rows `theta, z1 … zn`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["theta".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("z{i}")));
        let rows = (0..self.grid_len()).map(|k| {
            std::iter::once(self.grid_phase(k))
                .chain(self.node(k).iter().copied())
                .collect::<Vec<_>>()
        });
        crate::io::csv_table(&header, rows)
    }
}

pub fn phase_sensitivity(model: &OscillatorModel, cycle: &LimitCycle, method: Method) -> Result<PhaseSensitivity> {
    match method {
        Method::Adjoint => adjoint(model, cycle),
        Method::FiniteDifference => finite_difference(model, cycle),
    }
}

struct Adjoint<'a> {
    model: &'a OscillatorModel,
    cycle: &'a LimitCycle,
}

impl System for Adjoint<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn rhs(&self, t: f64, z: &[f64], dz: &mut [f64]) {
        let n = self.model.dim();
        let x = self.cycle.gamma_at(self.cycle.omega0 * t);
        let j = self.model.jacobian_or_fd(&x);
        for c in 0..n {
            dz[c] = -(0..n).map(|r| j[r * n + c] * z[r]).sum::<f64>();
        }
    }
}

const ADJOINT_CHANGE: f64 = 1e-8;
const ADJOINT_MAX_PERIODS: usize = 200;

/// Backward integration of `Z' = −Df(γ(t))ᵀ Z` until it repeats after one
/// period, then pointwise normalization `Z·f = ω₀`.
fn adjoint(model: &OscillatorModel, cycle: &LimitCycle) -> Result<PhaseSensitivity> {
    let n = model.dim();
    let sys = Adjoint { model, cycle };
    let tol = Tolerance::FINE;
    let period = cycle.period;
    let normalise = |z: &mut [f64], x: &[f64]| {
        let f = model.f(x);
        let dot: f64 = f.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        for zi in z.iter_mut() {
            *zi *= cycle.omega0 / dot;
        }
    };
    let f0 = model.f(cycle.point(0));
    let ff: f64 = f0.iter().map(|v| v * v).sum();
    let mut z: Vec<f64> = f0.iter().map(|v| v * cycle.omega0 / ff).collect();
    let mut change = f64::INFINITY;
    for _ in 0..ADJOINT_MAX_PERIODS {
        let mut next = ode::flow_between(&sys, &z, (period, 0.0), tol)?;
        normalise(&mut next, cycle.point(0));
        change = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = next;
        if change < ADJOINT_CHANGE {
            break;
        }
    }
    if change >= ADJOINT_CHANGE || !change.is_finite() {
        return Err(Error::AdjointDiverged { change });
    }
    let m = cycle.grid_len();
    let traj = ode::integrate(&sys, &z, (period, 0.0), tol)?;
    let mut samples = Vec::with_capacity(m * n);
    for k in 0..m {
        let mut zk = if k == 0 { z.clone() } else { traj.eval(period * k as f64 / m as f64)? };
        normalise(&mut zk, cycle.point(k));
        samples.extend(zk);
    }
    Ok(PhaseSensitivity::from_samples(cycle.omega0, Method::Adjoint, samples, n))
}

const FD_STEP: f64 = 1e-5;

/// Central differences of the asymptotic phase at every grid node.
fn finite_difference(model: &OscillatorModel, cycle: &LimitCycle) -> Result<PhaseSensitivity> {
    use rayon::prelude::*;
    let n = model.dim();
    let m = cycle.grid_len();
    // both displaced points run for the same whole number of periods, so any
    // projection bias of the stored cycle cancels in the difference
    let decay = (cycle.floquet * cycle.period).exp();
    let periods = ((1e-14 / FD_STEP).ln() / decay.ln()).ceil().max(1.0) as usize;
    let phase_after = |x: &[f64]| -> Result<f64> {
        let y = ode::flow(model, x, periods as f64 * cycle.period, Tolerance::FINE)?;
        Ok(cycle.project(&y).0)
    };
    let rows: Vec<Result<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let x = cycle.point(k);
            let mut row = vec![0.0; n];
            for i in 0..n {
                let h = FD_STEP * x[i].abs().max(1.0);
                let mut xp = x.to_vec();
                xp[i] += h;
                let mut xm = x.to_vec();
                xm[i] -= h;
                if !model.in_basin(&xp) || !model.in_basin(&xm) {
                    return Err(Error::OutsideBasin { state: x.to_vec() });
                }
                let tp = phase_after(&xp)?;
                let tm = phase_after(&xm)?;
                row[i] = wrap_diff(tp - tm) / (2.0 * h);
            }
            Ok(row)
        })
        .collect();
    let mut samples = Vec::with_capacity(m * n);
    for r in rows {
        samples.extend(r?);
    }
    Ok(PhaseSensitivity::from_samples(cycle.omega0, Method::FiniteDifference, samples, n))
}
