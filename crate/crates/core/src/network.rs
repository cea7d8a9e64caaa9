//! Networks of weakly coupled oscillators and their phase models.
//!
//! The full system is `ẋᵢ = fᵢ(xᵢ) + ε Σⱼ Aᵢⱼ(t) h(xᵢ, xⱼ)` with
//! `Aᵢⱼ(t) = aᵢⱼ + bᵢⱼ cos ν₁t + cᵢⱼ cos ν₂t`. The phase model is
//! `θᵢ' = Ωᵢ + ε Σⱼ q̄ᵢⱼ(θⱼ − θᵢ)`, where `q̄ᵢⱼ` already carries the mean of
//! `Aᵢⱼ`.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{node, wrap_diff};
use crate::limit_cycle::{find_default_cycle, CycleOptions, LimitCycle};
use crate::models::OscillatorModel;
use crate::ode::{self, FnSystem, System, Tolerance, Trajectory};
use crate::phase::{asymptotic_phase, phase_sensitivity, Method, PhaseSensitivity};
use crate::reduction::{mean_value, CouplingFunction, Provenance};

/// Coefficients of `A(t) = a + b cos ν₁t + c cos ν₂t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeWeight {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EdgeWeight {
    pub fn constant(a: f64) -> Self {
        Self { a, b: 0.0, c: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0 && self.c == 0.0
    }

    pub fn is_constant(&self) -> bool {
        self.b == 0.0 && self.c == 0.0
    }

    pub fn at(&self, t: f64, nu: (f64, f64)) -> f64 {
        let mut v = self.a;
        if self.b != 0.0 {
            v += self.b * (nu.0 * t).cos();
        }
        if self.c != 0.0 {
            v += self.c * (nu.1 * t).cos();
        }
        v
    }
}

pub type CouplingFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Pairwise coupling `h(xᵢ, xⱼ)`.
#[derive(Clone)]
pub enum Coupling {
    /// `h = xⱼ`
    Direct,
    /// `h = xⱼ − xᵢ`
    Diffusive,
    Custom(CouplingFn),
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Direct => f.write_str("Direct"),
            Coupling::Diffusive => f.write_str("Diffusive"),
            Coupling::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

impl Coupling {
    pub fn eval_into(&self, xi: &[f64], xj: &[f64], out: &mut [f64]) {
        match self {
            Coupling::Direct => out.copy_from_slice(xj),
            Coupling::Diffusive => {
                for ((o, a), b) in out.iter_mut().zip(xi).zip(xj) {
                    *o = b - a;
                }
            }
            Coupling::Custom(h) => h(xi, xj, out),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub models: Vec<OscillatorModel>,
    pub epsilon: f64,
    /// `adjacency[i][j]` weighs the influence of node `j` on node `i`.
    pub adjacency: Vec<Vec<EdgeWeight>>,
    pub nu: (f64, f64),
    pub coupling: Coupling,
    /// Per-node override of the sensitivity function.
    pub prescribed_z: Vec<Option<PhaseSensitivity>>,
    pub allow_self_coupling: bool,
}

impl NetworkSpec {
    /// Network with constant weights `a`, no prescribed sensitivities.
    pub fn new(models: Vec<OscillatorModel>, epsilon: f64, weights: Vec<Vec<f64>>, coupling: Coupling) -> Result<Self> {
        let n = models.len();
        let spec = Self {
            models,
            epsilon,
            adjacency: weights
                .into_iter()
                .map(|row| row.into_iter().map(EdgeWeight::constant).collect())
                .collect(),
            nu: (1.0, SQRT_2),
            coupling,
            prescribed_z: vec![None; n],
            allow_self_coupling: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// State dimension of a single node.
    pub fn node_dim(&self) -> usize {
        self.models.first().map_or(0, OscillatorModel::dim)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidArgument("network needs at least one node".into()));
        }
        let dim = self.node_dim();
        if let Some(m) = self.models.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            });
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument("epsilon must be finite and non-negative".into()));
        }
        if self.adjacency.len() != n || self.adjacency.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!("adjacency must be {n}×{n}")));
        }
        if self.prescribed_z.len() != n {
            return Err(Error::InvalidArgument("prescribed_z needs one entry per node".into()));
        }
        let mut varying = (false, false);
        for (i, row) in self.adjacency.iter().enumerate() {
            if !self.allow_self_coupling && !row[i].is_zero() {
                return Err(Error::InvalidArgument(format!("self-coupling on node {i}")));
            }
            for w in row {
                if ![w.a, w.b, w.c].iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite edge weight".into()));
                }
                varying.0 |= w.b != 0.0;
                varying.1 |= w.c != 0.0;
            }
        }
        if (varying.0 && !(self.nu.0 > 0.0)) || (varying.1 && !(self.nu.1 > 0.0)) {
            return Err(Error::InvalidArgument("modulation frequencies must be positive".into()));
        }
        for z in self.prescribed_z.iter().flatten() {
            if z.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: z.dim(),
                });
            }
        }
        Ok(())
    }

    /// Stacked on-cycle initial state `γᵢ(θᵢ)`.
    pub fn on_cycle_state(&self, cycles: &[LimitCycle], phases: &[f64]) -> Vec<f64> {
        cycles.iter().zip(phases).flat_map(|(c, th)| c.gamma_at(*th)).collect()
    }
}

/// Prescribed Stuart–Landau sensitivity `Z(θ) = i e^{−iθ}` as the real pair
/// `(sin θ, cos θ)`.
pub fn stuart_landau_prescribed_z(omega0: f64, m: usize) -> PhaseSensitivity {
    PhaseSensitivity::from_fn(omega0, m, 2, |th| vec![th.sin(), th.cos()])
}

/// Antisymmetric coupling magnitude of the two-node Stuart–Landau setup.
pub const SL_PAIR_KAPPA: f64 = 2.0 * SQRT_2;

/// Two Stuart–Landau oscillators (`c₂ = 0`) at frequencies `1 ∓ Δω/2`,
/// direct coupling `h = z_k` with weights `a₁₂ = κ`, `a₂₁ = −κ` and the
/// prescribed sensitivity `i e^{−iθ}` on both nodes.
///
/// The first-order terms cancel in the phase-difference equation; the
/// second-order drift gives `φ' ≈ Δω + κ²ε² sin 2φ`.
pub fn stuart_landau_pair(delta_omega: f64, epsilon: f64) -> Result<NetworkSpec> {
    let models = vec![
        OscillatorModel::stuart_landau(1.0 - delta_omega / 2.0, 0.0),
        OscillatorModel::stuart_landau(1.0 + delta_omega / 2.0, 0.0),
    ];
    let mut spec = NetworkSpec::new(
        models,
        epsilon,
        vec![vec![0.0, SL_PAIR_KAPPA], vec![-SL_PAIR_KAPPA, 0.0]],
        Coupling::Direct,
    )?;
    spec.prescribed_z = spec
        .models
        .iter()
        .map(|m| Some(stuart_landau_prescribed_z(m.analytic_frequency().unwrap_or(1.0), 256)))
        .collect();
    Ok(spec)
}

/// Default initial phases `(0, π/2, π, …)`.
pub fn default_phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * FRAC_PI_2).collect()
}

struct Network<'a> {
    spec: &'a NetworkSpec,
    dim: usize,
}

impl System for Network<'_> {
    fn dim(&self) -> usize {
        self.dim * self.spec.len()
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let d = self.dim;
        let eps = self.spec.epsilon;
        let mut h = vec![0.0; d];
        for (i, model) in self.spec.models.iter().enumerate() {
            let xi = &x[i * d..(i + 1) * d];
            let out = &mut dx[i * d..(i + 1) * d];
            model.f_into(xi, out);
            if eps == 0.0 {
                continue;
            }
            for (j, w) in self.spec.adjacency[i].iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                let a = w.at(t, self.spec.nu);
                self.spec.coupling.eval_into(xi, &x[j * d..(j + 1) * d], &mut h);
                for (o, v) in out.iter_mut().zip(&h) {
                    *o += eps * a * v;
                }
            }
        }
    }

    fn admissible(&self, x: &[f64]) -> bool {
        let d = self.dim;
        self.spec
            .models
            .iter()
            .enumerate()
            .all(|(i, m)| m.in_basin(&x[i * d..(i + 1) * d]))
    }
}

/// Integrates the coupled network from the stacked state `x0`.
pub fn simulate_full(spec: &NetworkSpec, x0: &[f64], t_span: (f64, f64), tol: Tolerance) -> Result<Trajectory> {
    spec.validate()?;
    let sys = Network {
        spec,
        dim: spec.node_dim(),
    };
    ode::integrate(&sys, x0, t_span, tol)
}

/// Stacked network states at the given times.
pub fn sample_full(spec: &NetworkSpec, x0: &[f64], times: &[f64], tol: Tolerance) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let sys = Network {
        spec,
        dim: spec.node_dim(),
    };
    ode::sample(&sys, x0, 0.0, times, tol)
}

#[derive(Debug, Clone)]
pub struct PhaseModel {
    pub epsilon: f64,
    /// Natural frequencies `Ωᵢ`.
    pub omega: Vec<f64>,
    /// `q[i][j]`, `None` for absent edges.
    pub q: Vec<Vec<Option<CouplingFunction>>>,
    pub cycles: Vec<LimitCycle>,
    pub sensitivities: Vec<PhaseSensitivity>,
}

impl PhaseModel {
    /// Phase model from given frequencies and couplings, without node cycles.
    pub fn from_couplings(epsilon: f64, omega: Vec<f64>, q: Vec<Vec<Option<CouplingFunction>>>) -> Result<Self> {
        let n = omega.len();
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!("coupling matrix must be {n}×{n}")));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("natural frequencies must be finite".into()));
        }
        Ok(Self {
            epsilon,
            omega,
            q,
            cycles: Vec::new(),
            sensitivities: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Right-hand side of the phase equations.
    pub fn rhs(&self, theta: &[f64], out: &mut [f64]) {
        for (i, row) in self.q.iter().enumerate() {
            let mut v = self.omega[i];
            if self.epsilon != 0.0 {
                for (j, q) in row.iter().enumerate() {
                    if let Some(q) = q {
                        v += self.epsilon * q.eval(theta[j] - theta[i]);
                    }
                }
            }
            out[i] = v;
        }
    }

    /// Effective coupling of the phase difference `φ = θⱼ − θᵢ` of a pair:
    /// `φ' = (Ωⱼ − Ωᵢ) + ε Γ(φ)` with `Γ(φ) = q̄ⱼᵢ(−φ) − q̄ᵢⱼ(φ)`.
    pub fn pair_coupling(&self, i: usize, j: usize) -> CouplingFunction {
        let m = self.q[i][j]
            .as_ref()
            .or(self.q[j][i].as_ref())
            .map_or(256, CouplingFunction::grid_len);
        let eval = |q: &Option<CouplingFunction>, phi: f64| q.as_ref().map_or(0.0, |q| q.eval(phi));
        let samples: Vec<f64> = (0..m)
            .map(|k| {
                let phi = node(k, m);
                eval(&self.q[j][i], -phi) - eval(&self.q[i][j], phi)
            })
            .collect();
        CouplingFunction::from_samples(samples, Provenance::Analytic).expect("finite coupling")
    }
}

/// Options for [`build_phase_model_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub cycle: CycleOptions,
    /// Horizon and tolerance of the mean value of time-varying weights.
    pub mean_t_max: f64,
    pub mean_tol: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            cycle: CycleOptions::default(),
            mean_t_max: 1e6,
            mean_tol: 1e-10,
        }
    }
}

pub fn build_phase_model(spec: &NetworkSpec) -> Result<PhaseModel> {
    build_phase_model_with(spec, &BuildOptions::default())
}

/// Locates every node's cycle and sensitivity (unless prescribed) and
/// averages each edge's interaction:
/// `q̄ᵢⱼ(φ) = M[Aᵢⱼ] · (1/2π)∫ Zᵢ(s)·h(γᵢ(s), γⱼ(s + φ)) ds`.
pub fn build_phase_model_with(spec: &NetworkSpec, opts: &BuildOptions) -> Result<PhaseModel> {
    spec.validate()?;
    let n = spec.len();
    let d = spec.node_dim();
    let mut cycles = Vec::with_capacity(n);
    let mut sensitivities = Vec::with_capacity(n);
    for (model, pz) in spec.models.iter().zip(&spec.prescribed_z) {
        let cycle = find_default_cycle(model, &opts.cycle)?;
        let z = match pz {
            Some(z) => z.clone(),
            None => phase_sensitivity(model, &cycle, Method::Adjoint)?,
        };
        cycles.push(cycle);
        sensitivities.push(z);
    }
    let mut q = vec![vec![None; n]; n];
    let mut h = vec![0.0; d];
    for i in 0..n {
        let ci = &cycles[i];
        let m = ci.grid_len();
        let zi: Vec<Vec<f64>> = (0..m).map(|k| sensitivities[i].at(ci.grid_phase(k))).collect();
        for j in 0..n {
            let w = spec.adjacency[i][j];
            if w.is_zero() {
                continue;
            }
            let (mean_a, provenance) = if w.is_constant() {
                (w.a, Provenance::PeriodicAverage)
            } else {
                let nu = spec.nu;
                (mean_value(|t| w.at(t, nu), opts.mean_t_max, opts.mean_tol)?, Provenance::MeanValue)
            };
            let cj = &cycles[j];
            let mut values = Vec::with_capacity(m);
            for l in 0..m {
                let phi = node(l, m);
                let mut acc = 0.0;
                for (k, z) in zi.iter().enumerate() {
                    let s = node(k, m);
                    let xj = if cj.grid_len() == m {
                        cj.point((k + l) % m).to_vec()
                    } else {
                        cj.gamma_at(s + phi)
                    };
                    spec.coupling.eval_into(ci.point(k), &xj, &mut h);
                    acc += z.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
                }
                values.push(mean_a * acc / m as f64);
            }
            q[i][j] = Some(CouplingFunction::from_samples(values, provenance)?);
        }
    }
    let omega: Vec<f64> = cycles.iter().map(|c| c.omega0).collect();
    let pm = PhaseModel {
        epsilon: spec.epsilon,
        omega,
        q,
        cycles,
        sensitivities,
    };
    let qmax = pm.q.iter().flatten().flatten().map(CouplingFunction::max_abs).fold(0.0, f64::max);
    let widest = pm.omega.iter().fold(0.0_f64, |m, w| m.max(*w)) - pm.omega.iter().fold(f64::INFINITY, |m, w| m.min(*w));
    if spec.epsilon > 0.0 && widest > 10.0 * spec.epsilon * qmax {
        warn!("detuning {widest:e} exceeds 10·ε·max|q̄| = {:e}", 10.0 * spec.epsilon * qmax);
    }
    Ok(pm)
}

/// Integrates the phase model; the trajectory holds unwrapped phases.
pub fn simulate_phase_model(pm: &PhaseModel, theta0: &[f64], t_span: (f64, f64), tol: Tolerance) -> Result<Trajectory> {
    if theta0.len() != pm.len() {
        return Err(Error::DimensionMismatch {
            expected: pm.len(),
            got: theta0.len(),
        });
    }
    let sys = FnSystem::new(pm.len(), |_t: f64, th: &[f64], d: &mut [f64]| pm.rhs(th, d));
    ode::integrate(&sys, theta0, t_span, tol)
}

/// Full-versus-reduced phase discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub horizon: f64,
    pub times: Vec<f64>,
    /// Per sample, per node: asymptotic phase of the full state.
    pub full: Vec<Vec<f64>>,
    /// Per sample, per node: reduced phase (unwrapped).
    pub reduced: Vec<Vec<f64>>,
    pub max_error: f64,
    pub rms_error: f64,
    /// Mean frequency of each node over the second half of the horizon.
    pub full_frequency: Vec<f64>,
    pub reduced_frequency: Vec<f64>,
    /// Largest frequency mismatch; flags a failure of the first-order model.
    pub frequency_discrepancy: f64,
}

/// Runs both models from on-cycle states with the given initial phases over
/// `horizon_mult / ε` (or `horizon_mult` periods when `ε = 0`).
pub fn compare_full_vs_reduced(
    spec: &NetworkSpec,
    pm: &PhaseModel,
    theta0: &[f64],
    horizon_mult: f64,
    samples: usize,
    tol: Tolerance,
) -> Result<ComparisonReport> {
    let n = spec.len();
    if theta0.len() != n || pm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta0.len(),
        });
    }
    if samples < 2 || !(horizon_mult > 0.0) {
        return Err(Error::InvalidArgument("need horizon_mult > 0 and at least 2 samples".into()));
    }
    let horizon = if spec.epsilon > 0.0 {
        horizon_mult / spec.epsilon
    } else {
        horizon_mult * pm.cycles.iter().map(|c| c.period).fold(0.0, f64::max)
    };
    let x0 = spec.on_cycle_state(&pm.cycles, theta0);
    // the reduced model starts from the asymptotic phases of the full state
    let d = spec.node_dim();
    let start: Vec<f64> = (0..n)
        .map(|i| asymptotic_phase(&spec.models[i], &pm.cycles[i], &x0[i * d..(i + 1) * d]))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..samples).map(|k| horizon * k as f64 / (samples - 1) as f64).collect();
    let states = sample_full(spec, &x0, &times, tol)?;
    let red = simulate_phase_model(pm, &start, (0.0, horizon), tol)?;

    let mut full = Vec::with_capacity(samples);
    let mut reduced = Vec::with_capacity(samples);
    for (t, x) in times.iter().zip(&states) {
        let guide = red.eval(*t)?;
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let th = asymptotic_phase(&spec.models[i], &pm.cycles[i], &x[i * d..(i + 1) * d])?;
            // nearest lift to the reduced phase
            row.push(guide[i] + wrap_diff(th - guide[i]));
        }
        full.push(row);
        reduced.push(guide);
    }
    let errs: Vec<f64> = full
        .iter()
        .zip(&reduced)
        .flat_map(|(f, r)| f.iter().zip(r).map(|(a, b)| wrap_diff(a - b)))
        .collect();
    let max_error = errs.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let rms_error = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    let half = samples / 2;
    let span = times[samples - 1] - times[half];
    let freq = |rows: &[Vec<f64>]| -> Vec<f64> { (0..n).map(|i| (rows[samples - 1][i] - rows[half][i]) / span).collect() };
    let full_frequency = unwrap_rows(&full, &times, &pm.omega).map(|r| freq(&r))?;
    let reduced_frequency = freq(&reduced);
    let frequency_discrepancy = full_frequency
        .iter()
        .zip(&reduced_frequency)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ComparisonReport {
        horizon,
        times,
        full,
        reduced,
        max_error,
        rms_error,
        full_frequency,
        reduced_frequency,
        frequency_discrepancy,
    })
}

/// Lifts sampled phases so that consecutive samples follow the nominal
/// rotation `Ωᵢ Δt`.
fn unwrap_rows(rows: &[Vec<f64>], times: &[f64], omega: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if k == 0 {
            out.push(row.clone());
            continue;
        }
        let dt = times[k] - times[k - 1];
        let lifted = row
            .iter()
            .enumerate()
            .map(|(i, th)| {
                let predicted = out[k - 1][i] + omega[i] * dt;
                predicted + wrap_diff(th - predicted)
            })
            .collect();
        out.push(lifted);
    }
    Ok(out)
}
