//! Trigonometric interpolation of uniformly sampled 2π-periodic data.

use std::f64::consts::TAU;

use num_complex::Complex64;

/// Band-limited interpolant through `m` uniform samples on `[0, 2π)`.
///
/// Samples are vector valued (`width` components per node). The interpolant
/// reproduces the stored samples at the nodes; between nodes it is the
/// unique trigonometric polynomial of degree `m/2` (Nyquist term split
/// symmetrically for even `m`).
#[derive(Debug, Clone)]
pub struct PeriodicInterpolant {
    m: usize,
    width: usize,
    samples: Vec<f64>,
    // coeffs[c * (half + 1) + k] for k = 0..=half, component c
    coeffs: Vec<Complex64>,
    half: usize,
}

impl PeriodicInterpolant {
    /// Build from node-major samples: `samples[k * width + c]`.
    pub fn new(samples: Vec<f64>, width: usize) -> Self {
        assert!(width > 0, "width must be positive");
        assert!(
            !samples.is_empty() && samples.len() % width == 0,
            "sample count must be a positive multiple of width"
        );
        let m = samples.len() / width;
        let half = m / 2;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); width * (half + 1)];
        for c in 0..width {
            for k in 0..=half {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..m {
                    let angle = -TAU * ((k * j) % m) as f64 / m as f64;
                    acc += Complex64::from_polar(1.0, angle) * samples[j * width + c];
                }
                let mut coef = acc / m as f64;
                if k > 0 && !(m % 2 == 0 && k == half) {
                    coef *= 2.0;
                }
                coeffs[c * (half + 1) + k] = coef;
            }
        }
        Self {
            m,
            width,
            samples,
            coeffs,
            half,
        }
    }

    /// Build from a function sampled at `m` uniform nodes.
    pub fn from_fn<F>(m: usize, width: usize, mut f: F) -> Self
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        let mut samples = Vec::with_capacity(m * width);
        for k in 0..m {
            let v = f(node(k, m));
            assert_eq!(v.len(), width, "sample width mismatch");
            samples.extend_from_slice(&v);
        }
        Self::new(samples, width)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Stored samples at node `k`.
    pub fn node_value(&self, k: usize) -> &[f64] {
        &self.samples[k * self.width..(k + 1) * self.width]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// If `theta` is (to rounding) a grid node, return its index.
    fn node_index(&self, theta: f64) -> Option<usize> {
        let pos = wrap_phase(theta) / (TAU / self.m as f64);
        let k = pos.round();
        if (pos - k).abs() < 1e-12 {
            Some(k as usize % self.m)
        } else {
            None
        }
    }

    /// Evaluate the `order`-th derivative into `out`.
    fn eval_order(&self, theta: f64, order: u32, out: &mut [f64]) {
        let theta = wrap_phase(theta);
        let base = Complex64::from_polar(1.0, theta);
        for c in 0..self.width {
            let row = &self.coeffs[c * (self.half + 1)..(c + 1) * (self.half + 1)];
            let mut w = Complex64::new(1.0, 0.0);
            let mut acc = 0.0;
            for (k, coef) in row.iter().enumerate() {
                let term = coef * w;
                acc += match order {
                    0 => term.re,
                    // d/dθ e^{ikθ} = ik e^{ikθ}
                    1 => -(k as f64) * term.im,
                    _ => -((k * k) as f64) * term.re,
                };
                w *= base;
            }
            out[c] = acc;
        }
    }

    pub fn eval_into(&self, theta: f64, out: &mut [f64]) {
        if let Some(k) = self.node_index(theta) {
            out.copy_from_slice(self.node_value(k));
            return;
        }
        self.eval_order(theta, 0, out);
    }

    pub fn eval(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.eval_into(theta, &mut out);
        out
    }

    pub fn derivative(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.eval_order(theta, 1, &mut out);
        out
    }

    pub fn second_derivative(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.eval_order(theta, 2, &mut out);
        out
    }

    /// Mean over one period, per component.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.width)
            .map(|c| self.coeffs[c * (self.half + 1)].re)
            .collect()
    }
}

/// Phase of grid node `k` out of `m`.
pub fn node(k: usize, m: usize) -> f64 {
    TAU * k as f64 / m as f64
}

/// Wrap into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wrap a phase difference into `(-π, π]`.
pub fn wrap_diff(delta: f64) -> f64 {
    let w = delta.rem_euclid(TAU);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}
