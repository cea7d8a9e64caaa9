//! Synchronization measures, critical-coupling sweeps and scaling fits for
//! pairs of coupled oscillators.

use std::f64::consts::TAU;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_cycle::{find_default_cycle, CycleOptions};
use crate::network::{default_phases, sample_full, NetworkSpec, PhaseModel};
use crate::ode::Tolerance;

/// Guard against division by an exactly vanishing first-order force.
pub const FORCE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    /// RMS of `dφ/dt` over the tail.
    #[serde(rename = "S")]
    pub s: f64,
    pub locked: bool,
    /// Circular mean of the phase difference over the tail, when locked.
    pub psi_star: Option<f64>,
    /// Whole `2π` excursions of the unwrapped difference over the tail.
    pub slips: usize,
}

/// Lift a phase signal by removing jumps larger than `π`.
pub fn unwrap(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (k, &p) in phase.iter().enumerate() {
        if k > 0 {
            let jump = p - phase[k - 1];
            if jump > std::f64::consts::PI {
                offset -= TAU;
            } else if jump < -std::f64::consts::PI {
                offset += TAU;
            }
        }
        out.push(p + offset);
    }
    out
}

/// Synchronization measure of the phase difference `φ(t)`, discarding the
/// leading `transient_frac` of the time span. Locked means `S` below
/// `s_threshold` with no phase slips.
pub fn sync_measure(times: &[f64], phi: &[f64], transient_frac: f64, s_threshold: f64) -> Result<SyncReport> {
    if times.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: phi.len(),
        });
    }
    if !(0.0..1.0).contains(&transient_frac) {
        return Err(Error::InvalidArgument("transient_frac must be in [0, 1)".into()));
    }
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(Error::TooShort("empty trajectory".into()));
    };
    let cut = t0 + transient_frac * (t1 - t0);
    let start = times.partition_point(|&t| t < cut);
    let lifted = unwrap(phi);
    let tail = &lifted[start..];
    let tail_t = &times[start..];
    if tail.len() < 3 {
        return Err(Error::TooShort(format!("{} samples after the transient", tail.len())));
    }
    let rates: Vec<f64> = (1..tail.len() - 1)
        .map(|k| (tail[k + 1] - tail[k - 1]) / (tail_t[k + 1] - tail_t[k - 1]))
        .collect();
    let s = (rates.iter().map(|r| r * r).sum::<f64>() / rates.len() as f64).sqrt();
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let slips = ((hi - lo) / TAU).floor() as usize;
    let locked = s < s_threshold && slips == 0;
    let psi_star = locked.then(|| {
        let (sn, cs) = tail.iter().fold((0.0, 0.0), |(a, b), p| (a + p.sin(), b + p.cos()));
        crate::fourier::wrap_phase(sn.atan2(cs))
    });
    Ok(SyncReport {
        s,
        locked,
        psi_star,
        slips,
    })
}

/// How a single coupled-pair run is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockCriterion {
    /// Locking threshold on `S` relative to the natural frequency.
    pub s_rel_threshold: f64,
    pub transient_frac: f64,
    /// The tail lasts `max(tail_eps_mult / ε, min_tail)`.
    pub tail_eps_mult: f64,
    pub min_tail: f64,
    pub sample_dt: f64,
    pub tol: Tolerance,
}

impl Default for LockCriterion {
    fn default() -> Self {
        Self {
            s_rel_threshold: 1e-3,
            transient_frac: 0.5,
            tail_eps_mult: 10.0,
            min_tail: 500.0,
            sample_dt: 0.5,
            tol: Tolerance::SWEEP,
        }
    }
}

impl LockCriterion {
    pub fn tail(&self, eps: f64) -> f64 {
        if eps > 0.0 {
            (self.tail_eps_mult / eps).max(self.min_tail)
        } else {
            self.min_tail
        }
    }

    pub fn horizon(&self, eps: f64) -> f64 {
        self.tail(eps) / (1.0 - self.transient_frac)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_rel_threshold > 0.0 && self.min_tail > 0.0 && self.sample_dt > 0.0 && self.tail_eps_mult >= 0.0)
            || !(0.0..1.0).contains(&self.transient_frac)
        {
            return Err(Error::InvalidArgument("invalid lock criterion".into()));
        }
        self.tol.validate()
    }
}

/// Sampled phase difference `θ₂ − θ₁` of a two-node run.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRun {
    pub times: Vec<f64>,
    /// Per node, polar angle of the state.
    pub phases: Vec<[f64; 2]>,
    pub report: SyncReport,
}

impl PairRun {
    /// CSV rows `t, theta1, theta2, phi`.
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = ["t", "theta1", "theta2", "phi"].iter().map(|s| s.to_string()).collect();
        let phi = unwrap(&self.phases.iter().map(|p| p[1] - p[0]).collect::<Vec<_>>());
        let rows = self
            .times
            .iter()
            .zip(&self.phases)
            .zip(&phi)
            .map(|((t, p), d)| [*t, p[0], p[1], *d]);
        crate::io::csv_table(&header, rows)
    }
}

/// Simulates a two-node network from on-cycle states at phases `(0, π/2)`
/// and measures the synchronization of the polar-angle difference.
pub fn run_pair(spec: &NetworkSpec, criterion: &LockCriterion) -> Result<PairRun> {
    criterion.validate()?;
    if spec.len() != 2 || spec.node_dim() != 2 {
        return Err(Error::InvalidArgument("run_pair needs two planar nodes".into()));
    }
    let cycles = spec
        .models
        .iter()
        .map(|m| find_default_cycle(m, &CycleOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    let natural = cycles.iter().map(|c| c.omega0).sum::<f64>() / 2.0;
    let x0 = spec.on_cycle_state(&cycles, &default_phases(2));
    let horizon = criterion.horizon(spec.epsilon);
    let n = (horizon / criterion.sample_dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
    let states = sample_full(spec, &x0, &times, criterion.tol)?;
    let phases: Vec<[f64; 2]> = states.iter().map(|x| [x[1].atan2(x[0]), x[3].atan2(x[2])]).collect();
    let phi: Vec<f64> = phases.iter().map(|p| p[1] - p[0]).collect();
    let report = sync_measure(&times, &phi, criterion.transient_frac, criterion.s_rel_threshold * natural)?;
    Ok(PairRun {
        times,
        phases,
        report,
    })
}

/// Where the locking threshold lies relative to the scanned grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Threshold {
    /// Smallest locked coupling after bisection of the bracket `(lo, hi]`.
    Found { eps_c: f64, lo: f64, hi: f64 },
    /// Already locked at the smallest grid value.
    BelowRange { eps_min: f64 },
    /// Not locked anywhere on the grid.
    AboveRange { eps_max: f64 },
}

impl Threshold {
    pub fn eps_c(&self) -> Option<f64> {
        match self {
            Threshold::Found { eps_c, .. } => Some(*eps_c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta_omega: f64,
    pub epsilon: f64,
    #[serde(flatten)]
    pub report: SyncReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCoupling {
    pub delta_omega: f64,
    pub threshold: Threshold,
    /// Every run, ordered by `ε`.
    pub runs: Vec<SweepPoint>,
}

/// Relative bracket width at which bisection stops.
pub const BISECTION_REL_WIDTH: f64 = 0.05;

/// Builds a network for given `(Δω, ε)`.
pub type Template<'a> = dyn Fn(f64, f64) -> Result<NetworkSpec> + Sync + 'a;

/// Scans `eps_grid` (in parallel), then bisects the first unlocked→locked
/// bracket to a relative width of 5%.
pub fn critical_coupling(
    template: &Template<'_>,
    delta_omega: f64,
    eps_grid: &[f64],
    criterion: &LockCriterion,
) -> Result<CriticalCoupling> {
    if eps_grid.is_empty() || eps_grid.windows(2).any(|w| w[0] >= w[1]) || eps_grid[0] < 0.0 {
        return Err(Error::InvalidArgument("eps_grid must be non-empty, non-negative and increasing".into()));
    }
    let run = |eps: f64| -> Result<SweepPoint> {
        let spec = template(delta_omega, eps)?;
        let report = run_pair(&spec, criterion)?.report;
        Ok(SweepPoint {
            delta_omega,
            epsilon: eps,
            report,
        })
    };
    let mut runs: Vec<SweepPoint> = eps_grid.par_iter().map(|&e| run(e)).collect::<Result<_>>()?;
    let first = runs.iter().position(|r| r.report.locked);
    let threshold = match first {
        None => Threshold::AboveRange {
            eps_max: eps_grid[eps_grid.len() - 1],
        },
        Some(0) => Threshold::BelowRange { eps_min: eps_grid[0] },
        Some(i) => {
            let (mut lo, mut hi) = (eps_grid[i - 1], eps_grid[i]);
            while (hi - lo) > BISECTION_REL_WIDTH * hi {
                let mid = 0.5 * (lo + hi);
                let point = run(mid)?;
                if point.report.locked {
                    hi = mid;
                } else {
                    lo = mid;
                }
                runs.push(point);
            }
            Threshold::Found { eps_c: hi, lo, hi }
        }
    };
    runs.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    Ok(CriticalCoupling {
        delta_omega,
        threshold,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// `(Δω, ε_c)` pairs.
    pub points: Vec<(f64, f64)>,
    pub exponent: f64,
    /// Intercept of `ln ε_c = intercept + exponent · ln Δω`.
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln Δω, ln ε_c)`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("scaling fit needs at least 3 points".into()));
    }
    if points.iter().any(|(d, e)| !(*d > 0.0 && *e > 0.0)) {
        return Err(Error::InvalidArgument("scaling fit needs positive Δω and ε_c".into()));
    }
    let (dmin, dmax) = points
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), (d, _)| (a.min(*d), b.max(*d)));
    if dmax / dmin < 10.0 {
        warn!("detunings span {:.2} decades; less than one decade", (dmax / dmin).log10());
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("scaling fit needs distinct detunings".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit {
        points: points.to_vec(),
        exponent,
        intercept,
        r_squared,
    })
}

/// Critical coupling at every detuning followed by the log–log fit.
pub fn scaling_sweep(
    template: &Template<'_>,
    detunings: &[f64],
    eps_grid: &[f64],
    criterion: &LockCriterion,
) -> Result<(ScalingFit, Vec<CriticalCoupling>)> {
    let results: Vec<CriticalCoupling> = detunings
        .par_iter()
        .map(|&d| critical_coupling(template, d, eps_grid, criterion))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(results.len());
    for r in &results {
        let eps_c = r.threshold.eps_c().ok_or_else(|| {
            Error::Sweep(format!("no threshold for Δω = {}: {:?}", r.delta_omega, r.threshold))
        })?;
        points.push((r.delta_omega, eps_c));
    }
    Ok((scaling_fit(&points)?, results))
}

/// Empirical ratio of the effective locking force to the first-order force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRatio {
    /// `ε · max|Γ|` of the first-order pair coupling.
    pub first_order_force: f64,
    /// Detuning balanced at the locking threshold.
    pub effective_force: f64,
    pub empirical_effective_ratio: f64,
    pub first_order_vanishing: bool,
}

/// `(F_eff − F₁) / max(F₁, 10⁻³⁰)`.
pub fn effective_ratio(first_order_force: f64, effective_force: f64) -> OrderRatio {
    OrderRatio {
        first_order_force,
        effective_force,
        empirical_effective_ratio: (effective_force - first_order_force) / first_order_force.max(FORCE_FLOOR),
        first_order_vanishing: first_order_force <= FORCE_FLOOR,
    }
}

/// Compares the first-order force of the pair `(0, 1)` at `eps_c` with the
/// detuning it must balance at the observed threshold.
pub fn order_ratio(pm: &PhaseModel, eps_c: f64, delta_omega: f64) -> Result<OrderRatio> {
    if pm.len() < 2 {
        return Err(Error::InvalidArgument("order_ratio needs a pair".into()));
    }
    if !(eps_c > 0.0) {
        return Err(Error::InvalidArgument("threshold coupling must be positive".into()));
    }
    let gamma = pm.pair_coupling(0, 1);
    Ok(effective_ratio(eps_c * gamma.max_abs(), delta_omega.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_removes_jumps() {
        let raw = [3.0, -3.2, -3.0, 3.1];
        let u = unwrap(&raw);
        assert!((u[1] - (-3.2 + TAU)).abs() < 1e-15);
        assert!((u[3] - 3.1).abs() < 1e-15);
    }

    #[test]
    fn guard_rail_ratio() {
        let r = effective_ratio(0.0, 0.02);
        assert_eq!(r.empirical_effective_ratio, 0.02 / FORCE_FLOOR);
        assert!(r.first_order_vanishing && r.empirical_effective_ratio.is_finite());
    }
}
