//! Locating the attracting periodic orbit.
//!
//! The cycle is found as a fixed point of the first-return map on a
//! hyperplane section (Newton with a finite-difference derivative), then
//! resampled at `M` equally spaced times from the anchor so that grid index
//! and phase coincide: `θ_k = 2πk/M = ω₀ t_k`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{node, wrap_phase, PeriodicInterpolant};
use crate::models::OscillatorModel;
use crate::ode::{self, find_crossing, Section, System, Tolerance};
use crate::roots::brent;

pub const DEFAULT_GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleOptions {
    pub tol: Tolerance,
    /// Number of uniform phase samples `M`.
    pub grid: usize,
    /// Stop when `‖P(x) − x‖` falls below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Time budget for a single return to the section.
    pub max_return_time: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::new(1e-11, 1e-13),
            grid: DEFAULT_GRID,
            newton_tol: 1e-10,
            max_newton: 50,
            max_return_time: 200.0,
        }
    }
}

/// An exponentially stable periodic orbit with its uniform phase grid.
#[derive(Debug, Clone)]
pub struct LimitCycle {
    pub period: f64,
    pub omega0: f64,
    /// Signed nontrivial Floquet exponent per unit time (negative).
    pub floquet: f64,
    pub anchor: Vec<f64>,
    points: PeriodicInterpolant,
}

/// JSON summary of a cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    #[serde(rename = "T")]
    pub period: f64,
    pub omega0: f64,
    pub floquet: f64,
    pub anchor: Vec<f64>,
    pub grid: usize,
}

impl LimitCycle {
    pub fn dim(&self) -> usize {
        self.points.width()
    }

    pub fn grid_len(&self) -> usize {
        self.points.len()
    }

    pub fn grid_phase(&self, k: usize) -> f64 {
        node(k, self.grid_len())
    }

    /// Stored sample γ(θ_k).
    pub fn point(&self, k: usize) -> &[f64] {
        self.points.node_value(k)
    }

    /// γ(θ), interpolated; exact at grid nodes, θ taken mod 2π.
    pub fn gamma_at(&self, theta: f64) -> Vec<f64> {
        self.points.eval(theta)
    }

    pub fn gamma_into(&self, theta: f64, out: &mut [f64]) {
        self.points.eval_into(theta, out)
    }

    /// dγ/dθ (equals f(γ(θ))/ω₀).
    pub fn tangent(&self, theta: f64) -> Vec<f64> {
        self.points.derivative(theta)
    }

    /// Phase of the cycle point associated with `x` by the local section
    /// `(x − γ(θ)) · γ'(θ) = 0`, and the distance `‖x − γ(θ)‖`.
    pub fn project(&self, x: &[f64]) -> (f64, f64) {
        let m = self.grid_len();
        let (mut best_k, mut best_d) = (0, f64::INFINITY);
        for k in 0..m {
            let d = dist2(x, self.point(k));
            if d < best_d {
                best_d = d;
                best_k = k;
            }
        }
        let h = TAU / m as f64;
        let center = self.grid_phase(best_k);
        let g = |theta: f64| -> f64 {
            let p = self.gamma_at(theta);
            let t = self.tangent(theta);
            x.iter().zip(&p).zip(&t).map(|((xi, pi), ti)| (xi - pi) * ti).sum()
        };
        let theta = match brent(g, center - h, center + h, 1e-15, 100) {
            Some(t) => t,
            None => {
                // no sign change within one cell: fall back to Newton from the node
                let mut theta = center;
                for _ in 0..8 {
                    let p = self.gamma_at(theta);
                    let t = self.tangent(theta);
                    let tt = self.points.second_derivative(theta);
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for i in 0..x.len() {
                        num += (x[i] - p[i]) * t[i];
                        den += -t[i] * t[i] + (x[i] - p[i]) * tt[i];
                    }
                    let step = (num / den).clamp(-h, h);
                    theta -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                theta
            }
        };
        let theta = wrap_phase(theta);
        let d = dist2(x, &self.gamma_at(theta)).sqrt();
        (theta, d)
    }

    /// Distance from `x` to the cycle.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.project(x).1
    }

    pub fn summary(&self) -> CycleSummary {
        CycleSummary {
            period: self.period,
            omega0: self.omega0,
            floquet: self.floquet,
            anchor: self.anchor.clone(),
            grid: self.grid_len(),
        }
    }

    /// CSV rows `theta, x1 … xn` over the grid.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["theta".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        let rows = (0..self.grid_len()).map(|k| {
            std::iter::once(self.grid_phase(k))
                .chain(self.point(k).iter().copied())
                .collect::<Vec<_>>()
        });
        crate::io::csv_table(&header, rows)
    }

    /// Build from a known orbit sampled at `m` uniform phases; used for
    /// prescribed cycles and in tests.
    pub fn from_samples(period: f64, floquet: f64, samples: Vec<f64>, dim: usize) -> Self {
        let points = PeriodicInterpolant::new(samples, dim);
        let anchor = points.node_value(0).to_vec();
        Self {
            period,
            omega0: TAU / period,
            floquet,
            anchor,
            points,
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Orthonormal basis of the hyperplane orthogonal to `normal` (columns).
fn plane_basis(normal: &[f64]) -> DMatrix<f64> {
    let n = normal.len();
    let nrm = DVector::from_column_slice(normal).normalize();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    for e in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = DVector::zeros(n);
        v[e] = 1.0;
        v -= &nrm * nrm.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
    }
    DMatrix::from_columns(&basis)
}

struct ReturnMap<'a> {
    model: &'a OscillatorModel,
    section: &'a Section,
    base: DVector<f64>,
    basis: DMatrix<f64>,
    opts: CycleOptions,
}

impl ReturnMap<'_> {
    fn lift(&self, u: &DVector<f64>) -> Vec<f64> {
        (&self.base + &self.basis * u).as_slice().to_vec()
    }

    fn coords(&self, x: &[f64]) -> DVector<f64> {
        self.basis.transpose() * (DVector::from_column_slice(x) - &self.base)
    }

    /// `(P(u), return time)`.
    fn apply(&self, u: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let x = self.lift(u);
        let c = find_crossing(self.model, &x, self.section, self.opts.max_return_time, self.opts.tol)?;
        Ok((self.coords(&c.x), c.t))
    }

    fn derivative(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let k = u.len();
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let h = 1e-6 * u[j].abs().max(1.0);
            let mut up = u.clone();
            up[j] += h;
            let mut dn = u.clone();
            dn[j] -= h;
            let (pu, _) = self.apply(&up)?;
            let (pd, _) = self.apply(&dn)?;
            jac.set_column(j, &((pu - pd) / (2.0 * h)));
        }
        Ok(jac)
    }
}

/// Newton iteration on the first-return map of a hyperplane `section`,
/// started from the first crossing of the trajectory through `guess`.
pub fn find_limit_cycle(
    model: &OscillatorModel,
    guess: &[f64],
    section: &Section,
    opts: &CycleOptions,
) -> Result<LimitCycle> {
    let (normal, offset) = section.as_hyperplane().ok_or_else(|| {
        Error::InvalidArgument("find_limit_cycle needs a hyperplane section".into())
    })?;
    if normal.len() != model.dim() || guess.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: guess.len(),
        });
    }
    if opts.grid < 4 {
        return Err(Error::InvalidArgument("grid must have at least 4 nodes".into()));
    }
    let nn: f64 = normal.iter().map(|v| v * v).sum();
    let base = DVector::from_iterator(normal.len(), normal.iter().map(|v| v * offset / nn));
    let map = ReturnMap {
        model,
        section,
        base,
        basis: plane_basis(normal),
        opts: *opts,
    };

    let first = find_crossing(model, guess, section, opts.max_return_time, opts.tol)?;
    let mut u = map.coords(&first.x);
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_newton {
        let (pu, _) = map.apply(&u)?;
        let r = &pu - &u;
        residual = r.norm();
        if residual <= opts.newton_tol {
            converged = true;
            break;
        }
        let dp = map.derivative(&u)?;
        let eye = DMatrix::identity(u.len(), u.len());
        let jac = &dp - eye;
        let near_unit = dp
            .complex_eigenvalues()
            .iter()
            .any(|mu| (mu - nalgebra::Complex::new(1.0, 0.0)).norm() < 1e-9);
        if near_unit {
            return Err(Error::SingularReturnMap);
        }
        let step = jac.lu().solve(&(-&r)).ok_or(Error::SingularReturnMap)?;
        // damp if the full step leaves the basin or misses the section
        let mut lambda = 1.0;
        loop {
            let trial = &u + &step * lambda;
            match map.apply(&trial) {
                Ok((pt, _)) if (&pt - &trial).norm() < residual || lambda < 1e-3 => {
                    u = trial;
                    break;
                }
                _ if lambda < 1e-3 => {
                    return Err(Error::NewtonDiverged {
                        iterations: opts.max_newton,
                        residual,
                    })
                }
                _ => lambda *= 0.5,
            }
        }
    }
    if !converged {
        return Err(Error::NewtonDiverged {
            iterations: opts.max_newton,
            residual,
        });
    }

    let x_star = map.lift(&u);
    let (_, period) = map.apply(&u)?;
    let anchor = choose_anchor(model, &x_star, period, section, opts.tol)?;
    let m = opts.grid;
    let times: Vec<f64> = (0..m).map(|k| period * k as f64 / m as f64).collect();
    let samples = ode::sample(model, &anchor, 0.0, &times, opts.tol)?;
    let flat: Vec<f64> = samples.into_iter().flatten().collect();
    let mut cycle = LimitCycle {
        period,
        omega0: TAU / period,
        floquet: f64::NAN,
        anchor,
        points: PeriodicInterpolant::new(flat, model.dim()),
    };
    let lambda = floquet_exponent(model, &cycle, opts.tol)?;
    if lambda >= 0.0 || !lambda.is_finite() {
        return Err(Error::NotStable(lambda));
    }
    cycle.floquet = lambda;
    Ok(cycle)
}

/// Convenience wrapper using the model's built-in guess and section.
pub fn find_default_cycle(model: &OscillatorModel, opts: &CycleOptions) -> Result<LimitCycle> {
    let hint = model.cycle_hint().ok_or_else(|| {
        Error::InvalidArgument(format!("model `{}` has no cycle hint; supply guess and section", model.name()))
    })?;
    find_limit_cycle(model, &hint.guess, &hint.section, opts)
}

/// Among the section crossings over one period, the one with maximal first
/// coordinate (then maximal second).
fn choose_anchor(
    model: &OscillatorModel,
    x_star: &[f64],
    period: f64,
    section: &Section,
    tol: Tolerance,
) -> Result<Vec<f64>> {
    let traj = ode::integrate(model, x_star, (0.0, period), tol)?;
    let mut best = x_star.to_vec();
    let mut buf = vec![0.0; model.dim()];
    for seg in traj.segments() {
        let s0 = section.eval(seg.start());
        let end = seg.end();
        let s1 = section.eval(&end);
        // skip the step that ends back at x* itself
        if !section.is_crossing(s0, s1) || seg.t1() >= period * (1.0 - 1e-9) {
            continue;
        }
        let t = brent(
            |t| {
                seg.eval_into(t, &mut buf);
                section.eval(&buf)
            },
            seg.t0,
            seg.t1(),
            1e-15,
            200,
        )
        .unwrap_or(seg.t1());
        if t < 1e-9 * period {
            continue;
        }
        let x = seg.eval(t);
        let better = x[0] > best[0] + 1e-12
            || ((x[0] - best[0]).abs() <= 1e-12 && x.get(1).zip(best.get(1)).is_some_and(|(a, b)| a > b));
        if better {
            best = x;
        }
    }
    Ok(best)
}

/// Nontrivial Floquet exponent `λ = ln|μ| / T`.
///
/// Planar cycles use Liouville's formula `ln μ = ∫₀ᵀ div f(γ(t)) dt`
/// (spectrally accurate on the periodic grid); higher dimensions take the
/// leading non-unit eigenvalue of the monodromy matrix.
pub fn floquet_exponent(model: &OscillatorModel, cycle: &LimitCycle, tol: Tolerance) -> Result<f64> {
    let n = model.dim();
    if n == 2 {
        let m = cycle.grid_len();
        let mean_div: f64 = (0..m)
            .map(|k| {
                let j = model.jacobian_or_fd(cycle.point(k));
                j[0] + j[3]
            })
            .sum::<f64>()
            / m as f64;
        return Ok(mean_div);
    }
    let mono = monodromy(model, cycle, tol)?;
    let eig = mono.complex_eigenvalues();
    let mut mods: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    let trivial = eig
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - nalgebra::Complex::new(1.0, 0.0))
                .norm()
                .total_cmp(&(b.1 - nalgebra::Complex::new(1.0, 0.0)).norm())
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    mods.remove(trivial);
    let lead = mods.into_iter().fold(0.0, f64::max);
    Ok(lead.ln() / cycle.period)
}

struct Variational<'a> {
    model: &'a OscillatorModel,
}

impl System for Variational<'_> {
    fn dim(&self) -> usize {
        let n = self.model.dim();
        n + n * n
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.model.dim();
        let (x, phi) = y.split_at(n);
        let (dx, dphi) = dy.split_at_mut(n);
        self.model.f_into(x, dx);
        let j = self.model.jacobian_or_fd(x);
        // Φ' = J Φ, Φ stored row-major
        for r in 0..n {
            for c in 0..n {
                dphi[r * n + c] = (0..n).map(|k| j[r * n + k] * phi[k * n + c]).sum();
            }
        }
    }
}

/// Monodromy matrix `∂φ(T, x)/∂x` at the anchor, from the variational
/// equations.
pub fn monodromy(model: &OscillatorModel, cycle: &LimitCycle, tol: Tolerance) -> Result<DMatrix<f64>> {
    let n = model.dim();
    let mut y0 = cycle.anchor.clone();
    for r in 0..n {
        for c in 0..n {
            y0.push(if r == c { 1.0 } else { 0.0 });
        }
    }
    let sys = Variational { model };
    let y = ode::flow(&sys, &y0, cycle.period, tol)?;
    Ok(DMatrix::from_row_slice(n, n, &y[n..]))
}
