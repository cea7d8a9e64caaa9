//! Dormand–Prince 5(4) with PI step control and the fourth-order
//! continuous extension (Hairer, Nørsett & Wanner, `dopri5`).

use super::{System, Tolerance};
use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const MAX_STEPS: usize = 50_000_000;

/// One accepted step and its interpolant.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    /// Five coefficient blocks of length `dim`, flattened.
    pub coeffs: Vec<f64>,
}

impl DenseSegment {
    pub fn dim(&self) -> usize {
        self.coeffs.len() / 5
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> &[f64] {
        &self.coeffs[..self.dim()]
    }

    pub fn end(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.coeffs[i] + self.coeffs[n + i]).collect()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.dim();
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.coeffs;
        for i in 0..n {
            out[i] = c[i] + s * (c[n + i] + s1 * (c[2 * n + i] + s * (c[3 * n + i] + s1 * c[4 * n + i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }
}

/// Step-by-step driver; each call to [`Stepper::step`] returns one accepted
/// step until `t_end` is reached.
pub struct Stepper<'a, S: System> {
    sys: &'a S,
    tol: Tolerance,
    t: f64,
    t_end: f64,
    dir: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    h: f64,
    fac_old: f64,
    steps: usize,
    done: bool,
}

impl<'a, S: System> Stepper<'a, S> {
    pub fn new(sys: &'a S, t0: f64, x0: &[f64], t_end: f64, tol: Tolerance) -> Self {
        let n = sys.dim();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        sys.rhs(t0, x0, &mut k[0]);
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let mut stepper = Self {
            sys,
            tol,
            t: t0,
            t_end,
            dir,
            y: x0.to_vec(),
            k,
            ytmp: vec![0.0; n],
            ynew: vec![0.0; n],
            h: 0.0,
            fac_old: 1e-4,
            steps: 0,
            done: t0 == t_end,
        };
        stepper.h = stepper.initial_step();
        stepper
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.abs + self.tol.rel * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len();
        let span = (self.t_end - self.t).abs();
        if span == 0.0 {
            return 0.0;
        }
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..n {
            let sk = self.scale(self.y[i], 0.0);
            dnf += (self.k[0][i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(span);
        for i in 0..n {
            self.ytmp[i] = self.y[i] + self.dir * h * self.k[0][i];
        }
        let mut f1 = vec![0.0; n];
        self.sys.rhs(self.t + self.dir * h, &self.ytmp, &mut f1);
        let mut der2 = 0.0;
        for i in 0..n {
            let sk = self.scale(self.y[i], 0.0);
            der2 += ((f1[i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(span)
    }

    /// Advance by one accepted step. Returns `None` once `t_end` is reached.
    pub fn step(&mut self) -> Result<Option<DenseSegment>> {
        if self.done {
            return Ok(None);
        }
        let n = self.y.len();
        let expo1 = 0.2 - BETA * 0.75;
        loop {
            if self.steps >= MAX_STEPS {
                return Err(Error::TooManySteps(MAX_STEPS));
            }
            let remaining = (self.t_end - self.t).abs();
            let mut last = false;
            if self.h >= remaining * (1.0 - 1e-12) {
                self.h = remaining;
                last = true;
            }
            if self.h <= 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(Error::StepSizeUnderflow { t: self.t, h: self.h });
            }
            let h = self.dir * self.h;
            let t = self.t;
            self.stages(t, h);
            let t_new = if last { self.t_end } else { t + h };

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * self.k[0][i]
                        + E3 * self.k[2][i]
                        + E4 * self.k[3][i]
                        + E5 * self.k[4][i]
                        + E6 * self.k[5][i]
                        + E7 * self.k[6][i]);
                let sk = self.scale(self.y[i], self.ynew[i]);
                err += (e / sk).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() || self.ynew.iter().any(|v| !v.is_finite()) {
                self.h *= FAC_MIN;
                self.steps += 1;
                if self.h <= 1e-14 * self.t.abs().max(1.0) {
                    return Err(Error::NonFinite { t: self.t });
                }
                continue;
            }
            let fac11 = err.powf(expo1);
            let mut fac = fac11 / self.fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let h_new = self.h / fac;
            self.steps += 1;

            if err <= 1.0 {
                self.fac_old = err.max(1e-4);
                if !self.sys.admissible(&self.ynew) {
                    return Err(Error::OutsideBasin {
                        state: self.ynew.clone(),
                    });
                }
                let mut coeffs = vec![0.0; 5 * n];
                for i in 0..n {
                    let y0 = self.y[i];
                    let y1 = self.ynew[i];
                    let dy = y1 - y0;
                    let bspl = h * self.k[0][i] - dy;
                    coeffs[i] = y0;
                    coeffs[n + i] = dy;
                    coeffs[2 * n + i] = bspl;
                    coeffs[3 * n + i] = dy - h * self.k[6][i] - bspl;
                    coeffs[4 * n + i] = h
                        * (D1 * self.k[0][i]
                            + D3 * self.k[2][i]
                            + D4 * self.k[3][i]
                            + D5 * self.k[4][i]
                            + D6 * self.k[5][i]
                            + D7 * self.k[6][i]);
                }
                let seg = DenseSegment { t0: t, h, coeffs };
                std::mem::swap(&mut self.y, &mut self.ynew);
                // FSAL
                let (first, rest) = self.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                self.t = t_new;
                if last {
                    self.done = true;
                } else {
                    self.h = h_new.min((self.t_end - self.t).abs());
                }
                return Ok(Some(seg));
            } else {
                self.h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            }
        }
    }

    fn stages(&mut self, t: f64, h: f64) {
        let n = self.y.len();
        let y = &self.y;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ytmp = &mut self.ytmp;
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        self.sys.rhs(t + C2 * h, ytmp, k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        self.sys.rhs(t + C3 * h, ytmp, k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        self.sys.rhs(t + C4 * h, ytmp, k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        self.sys.rhs(t + C5 * h, ytmp, k5);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        self.sys.rhs(t + h, ytmp, k6);
        let ynew = &mut self.ynew;
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        self.sys.rhs(t + h, ynew, k7);
    }
}
