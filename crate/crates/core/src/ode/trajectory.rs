use super::DenseSegment;
use crate::error::{Error, Result};

/// Accepted steps of one integration with dense output between them.
///
/// Times are strictly monotone in the direction of integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    segments: Vec<DenseSegment>,
}

impl Trajectory {
    pub(crate) fn start(t0: f64, x0: &[f64]) -> Self {
        Self {
            dim: x0.len(),
            times: vec![t0],
            states: x0.to_vec(),
            segments: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, seg: DenseSegment) {
        let t1 = seg.t1();
        self.states.extend(seg.end());
        self.times.push(t1);
        self.segments.push(seg);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.dim)
    }

    /// Dense-output segments, one per accepted step.
    pub fn segments(&self) -> &[DenseSegment] {
        &self.segments
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    fn forward(&self) -> bool {
        self.last_time() >= self.first_time()
    }

    /// Interpolated state at `t`; stored states are returned verbatim at
    /// step times.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = if self.forward() {
            (self.first_time(), self.last_time())
        } else {
            (self.last_time(), self.first_time())
        };
        if t < lo || t > hi {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside trajectory span [{lo}, {hi}]"
            )));
        }
        // index of the first time not before t (in integration order)
        let idx = if self.forward() {
            self.times.partition_point(|&s| s < t)
        } else {
            self.times.partition_point(|&s| s > t)
        };
        if idx < self.len() && self.times[idx] == t {
            return Ok(self.state(idx).to_vec());
        }
        let seg = &self.segments[idx.max(1) - 1];
        Ok(seg.eval(t))
    }

    /// CSV rows `t, x1 … xn` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        let rows = self
            .times
            .iter()
            .zip(self.states())
            .map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect::<Vec<_>>());
        crate::io::csv_table(&header, rows)
    }
}
