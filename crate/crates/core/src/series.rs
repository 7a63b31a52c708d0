use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform output grid `t_k = k * sample_dt`, `k = 0..=n_samples`, with an
/// internal step that divides `sample_dt` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub sample_dt: f64,
    pub t_max: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, sample_dt: f64, t_max: f64) -> Result<Self> {
        let g = TimeGrid { dt, sample_dt, t_max };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        check("dt", self.dt)?;
        check("sample_dt", self.sample_dt)?;
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter {
                field: "t_max",
                reason: format!("must be nonnegative and finite, got {}", self.t_max),
            });
        }
        Ok(())
    }

    /// Number of sample intervals (the grid has one more point).
    pub fn n_samples(&self) -> usize {
        (self.t_max / self.sample_dt).round() as usize
    }

    pub fn steps_per_sample(&self) -> usize {
        ((self.sample_dt / self.dt).round() as usize).max(1)
    }

    /// Internal step actually taken, `sample_dt / steps_per_sample`.
    pub fn step(&self) -> f64 {
        self.sample_dt / self.steps_per_sample() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.sample_dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_samples()).map(|k| self.time(k)).collect()
    }

    /// Grid index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.sample_dt).round();
        if k < 0.0 || k as usize > self.n_samples() || (k * self.sample_dt - t).abs() > 1e-9 * self.sample_dt.max(1.0) {
            return Err(Error::NotOnGrid { t });
        }
        Ok(k as usize)
    }

    /// Last grid time.
    pub fn horizon(&self) -> f64 {
        self.time(self.n_samples())
    }
}

/// Named real columns sampled on a time axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// One row per time, one value per name.
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(names: Vec<String>) -> Self {
        TimeSeries {
            names,
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.names.len());
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}
