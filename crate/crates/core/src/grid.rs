use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling grid `t0 + k * dt`, `k = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::invalid("time grid", "dt must be positive and finite"));
        }
        if len == 0 {
            return Err(Error::invalid("time grid", "grid must contain at least one sample"));
        }
        Ok(Self { t0, dt, len })
    }

    /// Grid spanning `[start, end]` with spacing no larger than `max_dt`.
    pub fn spanning(start: f64, end: f64, max_dt: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::invalid("time grid", "end must exceed start"));
        }
        let steps = ((end - start) / max_dt).ceil().max(1.0) as usize;
        Self::new(start, (end - start) / steps as f64, steps + 1)
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.time(k))
    }

    /// Index of the sample nearest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt).round();
        k.clamp(0.0, (self.len - 1) as f64) as usize
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.end()
    }
}

/// Trapezoid rule over uniformly spaced samples.
pub fn trapezoid(values: impl ExactSizeIterator<Item = f64>, dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (k, v) in values.enumerate() {
        sum += if k == 0 || k == n - 1 { 0.5 * v } else { v };
    }
    sum * dt
}
