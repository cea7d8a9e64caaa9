//! Oscillator vector fields and external perturbations.
//!
//! The built-in planar models all belong to the λ–ω family
//!
//! ```text
//! ṙ = σ r (1 − r²),    φ̇ = ω + κ (r² − 1)
//! ```
//!
//! with the unit circle as attracting cycle, which gives them closed-form
//! asymptotic phase `Θ = sgn(ω)·(φ + (κ/σ) ln r)`:
//!
//! | model           | σ | ω       | κ    |
//! |-----------------|---|---------|------|
//! | `radial`        | 1 | 1       | 0    |
//! | `spiral`        | 1 | 1       | 1    |
//! | `stuart_landau` | 1 | ω − c₂  | −c₂  |
//! | `custom`        | σ | ω       | κ    |
//!
//! Stuart–Landau states are stored as `(Re z, Im z)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{Direction, Section, System};

/// States closer than this to the origin are in the excluded phaseless
/// neighbourhood of the built-in models.
pub const PHASELESS_RADIUS: f64 = 1e-3;

pub type VectorFieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Row-major `dim × dim` Jacobian.
pub type JacobianFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Radial,
    Spiral,
    StuartLandau { omega: f64, c2: f64 },
    LambdaOmega { sigma: f64, omega: f64, kappa: f64 },
    Closure { f: VectorFieldFn, jac: Option<JacobianFn> },
}

/// Where to start looking for the cycle and which section to use.
#[derive(Debug, Clone)]
pub struct CycleHint {
    pub guess: Vec<f64>,
    pub section: Section,
}

/// An autonomous vector field with an (assumed) exponentially stable limit
/// cycle. Immutable once built; cheap to clone.
#[derive(Clone)]
pub struct OscillatorModel {
    name: String,
    dim: usize,
    kind: Kind,
    params: BTreeMap<String, f64>,
    min_radius: Option<f64>,
    hint: Option<CycleHint>,
}

impl fmt::Debug for OscillatorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OscillatorModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .finish()
    }
}

fn take(params: &BTreeMap<String, f64>, model: &str, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::MissingParam {
        model: model.to_string(),
        param: key.to_string(),
    })
}

fn reject_extra(params: &BTreeMap<String, f64>, model: &str, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidArgument(format!(
            "model `{model}` has no parameter `{k}`"
        ))),
        None => Ok(()),
    }
}

/// Build one of the named models.
///
/// `stuart_landau` needs `omega` and `c2`; `custom` is the λ–ω oscillator
/// with parameters `sigma`, `omega`, `kappa`. Arbitrary vector fields go
/// through [`OscillatorModel::from_fn`].
pub fn make_model(name: &str, params: &BTreeMap<String, f64>) -> Result<OscillatorModel> {
    let kind = match name {
        "radial" => {
            reject_extra(params, name, &[])?;
            Kind::Radial
        }
        "spiral" => {
            reject_extra(params, name, &[])?;
            Kind::Spiral
        }
        "stuart_landau" => {
            reject_extra(params, name, &["omega", "c2"])?;
            Kind::StuartLandau {
                omega: take(params, name, "omega")?,
                c2: take(params, name, "c2")?,
            }
        }
        "custom" => {
            reject_extra(params, name, &["sigma", "omega", "kappa"])?;
            let sigma = take(params, name, "sigma")?;
            if sigma <= 0.0 {
                return Err(Error::InvalidArgument("custom model needs sigma > 0".into()));
            }
            Kind::LambdaOmega {
                sigma,
                omega: take(params, name, "omega")?,
                kappa: take(params, name, "kappa")?,
            }
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    let model = OscillatorModel {
        name: name.to_string(),
        dim: 2,
        kind,
        params: params.clone(),
        min_radius: Some(PHASELESS_RADIUS),
        hint: None,
    };
    let hint = CycleHint {
        guess: vec![1.2, 0.0],
        section: Section::coordinate(
            2,
            1,
            0.0,
            if model.polar().map_or(true, |(_, w, _)| w >= 0.0) {
                Direction::Increasing
            } else {
                Direction::Decreasing
            },
        ),
    };
    Ok(model.with_cycle_hint(hint))
}

impl OscillatorModel {
    pub fn radial() -> Self {
        make_model("radial", &BTreeMap::new()).expect("built-in")
    }

    pub fn spiral() -> Self {
        make_model("spiral", &BTreeMap::new()).expect("built-in")
    }

    pub fn stuart_landau(omega: f64, c2: f64) -> Self {
        let params = BTreeMap::from([("omega".to_string(), omega), ("c2".to_string(), c2)]);
        make_model("stuart_landau", &params).expect("built-in")
    }

    /// A user-supplied field. No basin restriction, no oracles.
    pub fn from_fn<F>(name: &str, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            dim,
            kind: Kind::Closure {
                f: Arc::new(f),
                jac: None,
            },
            params: BTreeMap::new(),
            min_radius: None,
            hint: None,
        }
    }

    /// Attach an analytic Jacobian to a closure model.
    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if let Kind::Closure { jac: slot, .. } = &mut self.kind {
            *slot = Some(Arc::new(jac));
        }
        self
    }

    pub fn with_cycle_hint(mut self, hint: CycleHint) -> Self {
        self.hint = Some(hint);
        self
    }

    /// Exclude a ball of this radius around the origin from the basin.
    pub fn with_min_radius(mut self, r: Option<f64>) -> Self {
        self.min_radius = r;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn cycle_hint(&self) -> Option<&CycleHint> {
        self.hint.as_ref()
    }

    /// `(σ, ω, κ)` of the λ–ω form, for the built-in models.
    fn polar(&self) -> Option<(f64, f64, f64)> {
        match self.kind {
            Kind::Radial => Some((1.0, 1.0, 0.0)),
            Kind::Spiral => Some((1.0, 1.0, 1.0)),
            Kind::StuartLandau { omega, c2 } => Some((1.0, omega - c2, -c2)),
            Kind::LambdaOmega { sigma, omega, kappa } => Some((sigma, omega, kappa)),
            Kind::Closure { .. } => None,
        }
    }

    /// Angular frequency on the cycle implied by the parameters, where known
    /// in closed form (`Ω = ω − c₂` for Stuart–Landau).
    pub fn analytic_frequency(&self) -> Option<f64> {
        self.polar().map(|(_, w, _)| w.abs())
    }

    pub fn in_basin(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.min_radius {
            Some(r) => x.iter().map(|v| v * v).sum::<f64>() >= r * r,
            None => true,
        }
    }

    pub fn f_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Radial => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                out[0] = x[0] - x[1] - x[0] * r2;
                out[1] = x[0] + x[1] - x[1] * r2;
            }
            Kind::Spiral => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                out[0] = x[0] - (x[0] + x[1]) * r2;
                out[1] = x[1] + (x[0] - x[1]) * r2;
            }
            Kind::StuartLandau { omega, c2 } => {
                let z = Complex64::new(x[0], x[1]);
                let dz = Complex64::new(1.0, *omega) * z - Complex64::new(1.0, *c2) * z.norm_sqr() * z;
                out[0] = dz.re;
                out[1] = dz.im;
            }
            Kind::LambdaOmega { sigma, omega, kappa } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let radial = sigma * (1.0 - r2);
                let angular = omega + kappa * (r2 - 1.0);
                out[0] = radial * x[0] - angular * x[1];
                out[1] = radial * x[1] + angular * x[0];
            }
            Kind::Closure { f, .. } => f(x, out),
        }
    }

    pub fn f(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.f_into(x, &mut out);
        out
    }

    /// Analytic Jacobian, if the model has one.
    pub fn jacobian(&self, x: &[f64]) -> Option<Vec<f64>> {
        if let Kind::Closure { jac, .. } = &self.kind {
            return jac.as_ref().map(|j| {
                let mut out = vec![0.0; self.dim * self.dim];
                j(x, &mut out);
                out
            });
        }
        let (sigma, omega, kappa) = self.polar()?;
        let (px, py) = (x[0], x[1]);
        let r2 = px * px + py * py;
        let angular = omega + kappa * (r2 - 1.0);
        Some(vec![
            sigma * (1.0 - r2) - 2.0 * sigma * px * px - 2.0 * kappa * px * py,
            -2.0 * sigma * px * py - angular - 2.0 * kappa * py * py,
            -2.0 * sigma * px * py + angular + 2.0 * kappa * px * px,
            sigma * (1.0 - r2) - 2.0 * sigma * py * py + 2.0 * kappa * px * py,
        ])
    }

    /// Analytic Jacobian or a central finite difference of `f`.
    pub fn jacobian_or_fd(&self, x: &[f64]) -> Vec<f64> {
        if let Some(j) = self.jacobian(x) {
            return j;
        }
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        let mut xp = x.to_vec();
        let mut up = vec![0.0; n];
        let mut dn = vec![0.0; n];
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            self.f_into(&xp, &mut up);
            xp[j] = x[j] - h;
            self.f_into(&xp, &mut dn);
            xp[j] = x[j];
            for i in 0..n {
                out[i * n + j] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        out
    }

    /// Closed-form asymptotic phase in `[0, 2π)` (θ = 0 on the positive
    /// x-axis of the unit cycle).
    pub fn analytic_phase(&self, x: &[f64]) -> Option<f64> {
        let (sigma, omega, kappa) = self.polar()?;
        if omega == 0.0 || !self.in_basin(x) {
            return None;
        }
        let r = x[0].hypot(x[1]);
        let angle = x[1].atan2(x[0]);
        let theta = omega.signum() * (angle + kappa / sigma * r.ln());
        Some(theta.rem_euclid(TAU))
    }

    /// Closed-form `∇Θ` at the cycle point of phase `theta`.
    pub fn analytic_z(&self, theta: f64) -> Option<Vec<f64>> {
        let (sigma, omega, kappa) = self.polar()?;
        if omega == 0.0 {
            return None;
        }
        let s = omega.signum();
        let angle = s * theta;
        let (sin, cos) = angle.sin_cos();
        let q = kappa / sigma;
        // ∇φ = (−sin, cos), ∇ln r = (cos, sin) on r = 1
        Some(vec![s * (-sin + q * cos), s * (cos + q * sin)])
    }
}

impl System for OscillatorModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
        self.f_into(x, dx)
    }
    fn admissible(&self, x: &[f64]) -> bool {
        self.in_basin(x)
    }
}

pub type PerturbationFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Weak external forcing `ε p(x, t)`.
#[derive(Clone)]
pub struct Perturbation {
    dim: usize,
    p: PerturbationFn,
    /// `None` marks almost-periodic forcing.
    pub period: Option<f64>,
    pub amplitude: f64,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("amplitude", &self.amplitude)
            .finish()
    }
}

impl Perturbation {
    pub fn new<F>(dim: usize, period: Option<f64>, amplitude: f64, p: F) -> Result<Self>
    where
        F: Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        if amplitude < 0.0 || !amplitude.is_finite() {
            return Err(Error::InvalidArgument("perturbation amplitude must be >= 0".into()));
        }
        if let Some(t) = period {
            if t <= 0.0 || !t.is_finite() {
                return Err(Error::InvalidArgument("perturbation period must be > 0".into()));
            }
        }
        Ok(Self {
            dim,
            p: Arc::new(p),
            period,
            amplitude,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, Some(TAU), 0.0, |_x, _t, out: &mut [f64]| out.fill(0.0)).expect("valid")
    }

    /// `p(x, t) = direction · sin(Ω t)`.
    pub fn sinusoidal(direction: Vec<f64>, omega: f64, amplitude: f64) -> Result<Self> {
        if omega <= 0.0 {
            return Err(Error::InvalidArgument("forcing frequency must be > 0".into()));
        }
        let dim = direction.len();
        Self::new(dim, Some(TAU / omega), amplitude, move |_x, t, out: &mut [f64]| {
            let s = (omega * t).sin();
            for (o, d) in out.iter_mut().zip(&direction) {
                *o = d * s;
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unscaled `p(x, t)`.
    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.p)(x, t, out)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, t, &mut out);
        out
    }

    /// Spot-check `p(x, t + T) = p(x, t)` at the given points.
    pub fn is_periodic_at(&self, points: &[(Vec<f64>, f64)], tol: f64) -> bool {
        let Some(period) = self.period else {
            return false;
        };
        points.iter().all(|(x, t)| {
            let a = self.eval(x, *t);
            let b = self.eval(x, t + period);
            a.iter().zip(&b).all(|(u, v)| (u - v).abs() <= tol * (1.0 + u.abs()))
        })
    }
}

/// `ẋ = f(x) + ε p(x, t)`.
pub struct Forced<'a> {
    pub model: &'a OscillatorModel,
    pub perturbation: &'a Perturbation,
}

impl System for Forced<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        self.model.f_into(x, dx);
        let eps = self.perturbation.amplitude;
        if eps != 0.0 {
            let mut p = vec![0.0; dx.len()];
            self.perturbation.eval_into(x, t, &mut p);
            for (d, v) in dx.iter_mut().zip(&p) {
                *d += eps * v;
            }
        }
    }
    fn admissible(&self, x: &[f64]) -> bool {
        self.model.in_basin(x)
    }
}
