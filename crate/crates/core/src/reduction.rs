//! First-order phase reduction of a periodically or almost-periodically
//! forced oscillator.
//!
//! Conventions: the reduced equation is `θ' = ω₀ + ε Z(θ)·p(γ(θ), t)` and,
//! in a frame rotating at `Ω`, the slow phase `ψ = θ − Ωt` obeys the
//! averaged equation `ψ' = (ω₀ − Ω) + ε Γ̄(ψ)`.

use std::f64::consts::TAU;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{node, wrap_diff, wrap_phase, PeriodicInterpolant};
use crate::limit_cycle::LimitCycle;
use crate::models::{Forced, OscillatorModel, Perturbation};
use crate::ode::{self, FnSystem, Tolerance, Trajectory};
use crate::phase::{asymptotic_phase, PhaseSensitivity};
use crate::quadrature::GaussLegendre;
use crate::roots::brent;

/// Coupling strengths above this trigger a validity warning.
pub const WEAK_COUPLING_LIMIT: f64 = 0.3;

/// Gauss–Legendre nodes per forcing period.
pub const NODES_PER_PERIOD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PeriodicAverage,
    MeanValue,
    Analytic,
}

/// A 2π-periodic scalar function sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct CouplingFunction {
    pub provenance: Provenance,
    values: PeriodicInterpolant,
}

impl CouplingFunction {
    pub fn from_samples(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coupling samples must be finite and non-empty".into()));
        }
        Ok(Self {
            provenance,
            values: PeriodicInterpolant::new(values, 1),
        })
    }

    /// Samples `f` on `m` nodes; tagged analytic.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        Self {
            provenance: Provenance::Analytic,
            values: PeriodicInterpolant::from_fn(m, 1, |phi| vec![f(phi)]),
        }
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    pub fn grid_phase(&self, k: usize) -> f64 {
        node(k, self.grid_len())
    }

    pub fn node(&self, k: usize) -> f64 {
        self.values.node_value(k)[0]
    }

    pub fn values(&self) -> &[f64] {
        self.values.samples()
    }

    pub fn eval(&self, phi: f64) -> f64 {
        let mut out = [0.0];
        self.values.eval_into(phi, &mut out);
        out[0]
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        self.values.derivative(phi)[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            provenance: self.provenance,
            values: PeriodicInterpolant::new(self.values().iter().map(|v| a * v).collect(), 1),
        }
    }

    /// CSV rows `phi, q`.
    pub fn to_csv(&self) -> String {
        let header = ["phi".to_string(), "q".to_string()];
        let rows = (0..self.grid_len()).map(|k| [self.grid_phase(k), self.node(k)]);
        crate::io::csv_table(&header, rows)
    }
}

/// `Γ(θ, t) = Z(θ)·p(γ(θ), t)`.
pub fn gamma_instantaneous(
    z: &PhaseSensitivity,
    cycle: &LimitCycle,
    pert: &Perturbation,
    theta: f64,
    t: f64,
) -> f64 {
    let x = cycle.gamma_at(theta);
    let p = pert.eval(&x, t);
    z.at(theta).iter().zip(&p).map(|(a, b)| a * b).sum()
}

fn warn_if_strong(eps: f64) {
    if eps > WEAK_COUPLING_LIMIT {
        warn!("ε = {eps} exceeds {WEAK_COUPLING_LIMIT}; first-order phase reduction may be inaccurate");
    }
}

/// Integrates `θ' = ω₀ + ε Γ(θ, t)`; the returned one-dimensional
/// trajectory holds the unwrapped phase.
pub fn simulate_reduced(
    z: &PhaseSensitivity,
    cycle: &LimitCycle,
    pert: &Perturbation,
    theta0: f64,
    t_span: (f64, f64),
    tol: Tolerance,
) -> Result<Trajectory> {
    let eps = pert.amplitude;
    warn_if_strong(eps);
    let omega0 = cycle.omega0;
    let sys = FnSystem::new(1, |t: f64, th: &[f64], d: &mut [f64]| {
        d[0] = omega0;
        if eps != 0.0 {
            d[0] += eps * gamma_instantaneous(z, cycle, pert, th[0], t);
        }
    });
    ode::integrate(&sys, &[theta0], t_span, tol)
}

/// Integrates the averaged slow-phase equation `ψ' = Δ + ε q̄(ψ)`.
pub fn simulate_averaged(
    q: &CouplingFunction,
    detuning: f64,
    eps: f64,
    psi0: f64,
    t_span: (f64, f64),
    tol: Tolerance,
) -> Result<Trajectory> {
    warn_if_strong(eps);
    let sys = FnSystem::new(1, |_t: f64, psi: &[f64], d: &mut [f64]| {
        d[0] = detuning + eps * q.eval(psi[0]);
    });
    ode::integrate(&sys, &[psi0], t_span, tol)
}

/// Smallest common period of the rotating frame `2π/Ω` and the forcing
/// period, as `(n_frame, n_forcing)` multiples up to 64.
fn common_period(frame: f64, forcing: f64) -> Option<(usize, usize)> {
    for n_force in 1..=64usize {
        let ratio = n_force as f64 * forcing / frame;
        let n_frame = ratio.round();
        if n_frame >= 1.0 && (ratio - n_frame).abs() <= 1e-10 * ratio.max(1.0) {
            return Some((n_frame as usize, n_force));
        }
    }
    None
}

/// `Γ̄(ψ) = (1/T)∫₀ᵀ Z(ψ + Ωt)·p(γ(ψ + Ωt), t) dt` on the cycle's phase
/// grid, where `T` is the common period of the frame rotating at `omega`
/// and the forcing.
pub fn average_periodic(
    z: &PhaseSensitivity,
    cycle: &LimitCycle,
    pert: &Perturbation,
    omega: f64,
) -> Result<CouplingFunction> {
    use rayon::prelude::*;
    let forcing = pert
        .period
        .ok_or_else(|| Error::InvalidArgument("average_periodic needs a periodic perturbation".into()))?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument("frame frequency must be positive".into()));
    }
    let (_, n_force) = common_period(TAU / omega, forcing).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "frame period {} and forcing period {forcing} are not commensurate; use mean_value",
            TAU / omega
        ))
    })?;
    let span = n_force as f64 * forcing;
    let gl = GaussLegendre::new(NODES_PER_PERIOD);
    let m = z.grid_len();
    let values: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let psi = node(k, m);
            let integral = gl.integrate_composite(0.0, span, n_force, |t| {
                gamma_instantaneous(z, cycle, pert, psi + omega * t, t)
            });
            integral / span
        })
        .collect();
    Ok(CouplingFunction {
        provenance: Provenance::PeriodicAverage,
        values: PeriodicInterpolant::new(values, 1),
    })
}

const MEAN_FIRST_WINDOW: f64 = 8.0 * std::f64::consts::PI;
const MEAN_PANEL: f64 = 0.5;
const MEAN_NODES: usize = 16;

fn hann_mean(g: &impl Fn(f64) -> f64, gl: &GaussLegendre, window: f64) -> f64 {
    let panels = (window / MEAN_PANEL).ceil() as usize;
    let w = TAU / window;
    gl.integrate_composite(0.0, window, panels, |t| g(t) * (1.0 - (w * t).cos())) / window
}

/// Long-time mean `lim (1/T)∫₀ᵀ g(t) dt`.
///
/// Each estimate is a Hann-weighted average over `[0, W]`; windows double
/// from `8π` until two successive estimates differ by less than `tol` or
/// `W` would exceed `t_max`.
pub fn mean_value(g: impl Fn(f64) -> f64, t_max: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidArgument("mean_value needs positive t_max and tol".into()));
    }
    let gl = GaussLegendre::new(MEAN_NODES);
    let mut window = MEAN_FIRST_WINDOW.min(t_max / 2.0);
    let mut prev = hann_mean(&g, &gl, window);
    let mut spread = f64::INFINITY;
    while window * 2.0 <= t_max * (1.0 + 1e-12) {
        window *= 2.0;
        let next = hann_mean(&g, &gl, window);
        spread = (next - prev).abs();
        prev = next;
        if spread < tol {
            return Ok(next);
        }
    }
    Err(Error::MeanValueDiverged {
        t_max,
        estimate: prev,
        spread,
    })
}

/// A zero `ψ*` of `Δ + ε q̄(ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub psi: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockResult {
    pub locked: bool,
    /// Sorted by phase in `[0, 2π)`.
    pub fixed_points: Vec<FixedPoint>,
    /// `|Δ| / ε`.
    pub condition_value: f64,
}

/// Fixed points of the slow-phase equation `ψ' = Δ + ε q̄(ψ)`, stable where
/// the right-hand side has negative slope.
pub fn lock_analysis(detuning: f64, eps: f64, q: &CouplingFunction) -> Result<LockResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("lock_analysis needs ε > 0".into()));
    }
    let rhs = |psi: f64| detuning + eps * q.eval(psi);
    let n = 8 * q.grid_len().max(64);
    let h = TAU / n as f64;
    let vals: Vec<f64> = (0..n).map(|i| rhs(i as f64 * h)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        let (va, vb) = (vals[i], vals[(i + 1) % n]);
        if va == 0.0 {
            roots.push(a);
        } else if va * vb < 0.0 {
            if let Some(r) = brent(rhs, a, b, 1e-15, 200) {
                roots.push(wrap_phase(r));
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| wrap_diff(*a - *b).abs() < 1e-10);
    if roots.len() > 1 && wrap_diff(roots[0] - roots[roots.len() - 1]).abs() < 1e-10 {
        roots.pop();
    }
    let fixed_points: Vec<FixedPoint> = roots
        .into_iter()
        .map(|psi| FixedPoint {
            psi,
            stable: eps * q.derivative(psi) < 0.0,
        })
        .collect();
    Ok(LockResult {
        locked: fixed_points.iter().any(|p| p.stable),
        fixed_points,
        condition_value: detuning.abs() / eps,
    })
}

/// Phase error of the first-order reduction against the full forced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedComparison {
    pub times: Vec<f64>,
    /// Wrapped `Θ(x(t)) − θ(t)`.
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub rms_error: f64,
}

/// Runs the full forced model from `γ(θ₀)` and the reduced equation from
/// `θ₀`, comparing the asymptotic phase of the full state with the reduced
/// phase at `samples` evenly spaced times in `(0, horizon]`.
pub fn compare_forced(
    model: &OscillatorModel,
    cycle: &LimitCycle,
    z: &PhaseSensitivity,
    pert: &Perturbation,
    theta0: f64,
    horizon: f64,
    samples: usize,
    tol: Tolerance,
) -> Result<ForcedComparison> {
    if samples == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidArgument("need a positive horizon and at least one sample".into()));
    }
    let times: Vec<f64> = (1..=samples).map(|i| horizon * i as f64 / samples as f64).collect();
    let x0 = cycle.gamma_at(theta0);
    let forced = Forced {
        model,
        perturbation: pert,
    };
    let full = ode::sample(&forced, &x0, 0.0, &times, tol)?;
    let reduced = simulate_reduced(z, cycle, pert, theta0, (0.0, horizon), tol)?;
    let mut errors = Vec::with_capacity(samples);
    for (t, x) in times.iter().zip(&full) {
        let full_phase = asymptotic_phase(model, cycle, x)?;
        let red = reduced.eval(*t)?[0];
        errors.push(wrap_diff(full_phase - red));
    }
    let max_error = errors.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let rms_error = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    Ok(ForcedComparison {
        times,
        errors,
        max_error,
        rms_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn common_periods() {
        assert_eq!(common_period(TAU, TAU), Some((1, 1)));
        assert_eq!(common_period(TAU, TAU / 2.0), Some((1, 2)));
        assert_eq!(common_period(TAU, 1.5 * TAU), Some((3, 2)));
        assert_eq!(common_period(TAU, 2f64.sqrt() * TAU), None);
    }

    #[test]
    fn sine_lock_points() {
        let q = CouplingFunction::from_fn(256, |p| -p.sin());
        let r = lock_analysis(0.0, 0.3, &q).unwrap();
        assert_eq!(r.fixed_points.len(), 2);
        assert_abs_diff_eq!(r.fixed_points[0].psi, 0.0, epsilon = 1e-12);
        assert!(r.fixed_points[0].stable);
        assert_abs_diff_eq!(r.fixed_points[1].psi, std::f64::consts::PI, epsilon = 1e-12);
        assert!(!r.fixed_points[1].stable);
    }

    #[test]
    fn mean_of_constant() {
        assert_abs_diff_eq!(mean_value(|_| 3.25, 1e4, 1e-6).unwrap(), 3.25, epsilon = 1e-12);
    }
}
