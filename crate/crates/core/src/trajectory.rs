use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::StateReport;

/// Uniform grid with `steps` intervals covering `[start, end]` exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Uses the smallest step count whose spacing does not exceed `dt`.
    pub fn new(start: f64, end: f64, dt: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(Error::InvalidWindow { start, end });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("step {dt} must be positive")));
        }
        let span = end - start;
        let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(if span > 0.0 { 1.0 } else { 0.0 });
        Ok(Self {
            start,
            end,
            steps: steps as usize,
        })
    }

    pub fn step(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            (self.end - self.start) / self.steps as f64
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.end
        } else {
            self.start + k as f64 * self.step()
        }
    }

    /// Store every `stride` steps so that roughly `samples` points are kept
    /// (the final point is always stored).
    pub fn stride_for(&self, samples: usize) -> usize {
        (self.steps / samples.max(1)).max(1)
    }
}

/// Evolution window `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// `[-half, +half]`.
    pub fn symmetric(half: f64) -> Result<Self> {
        Self::new(-half, half)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn max_abs_time(&self) -> f64 {
        self.start.abs().max(self.end.abs())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub state: StateReport,
    /// `<a + a^dagger>` on the joint state; zero for qubit-only runs.
    pub field_quadrature: f64,
    /// Population in the top two Fock levels; zero for qubit-only runs.
    pub meter_tail: f64,
}

/// Transfer probability `P(t)` with per-sample state diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub p_values: Vec<f64>,
    pub diagnostics: Vec<SampleDiagnostics>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            p_values: Vec::with_capacity(n),
            diagnostics: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, p: f64, diag: SampleDiagnostics) {
        self.times.push(t);
        self.p_values.push(p);
        self.diagnostics.push(diag);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_p(&self) -> f64 {
        self.p_values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    /// Index of the stored sample nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
    }

    /// Max |P_a(t) − P_b(t)| over samples stored at matching times.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        let mut worst: f64 = 0.0;
        let mut j = 0;
        for (i, &t) in self.times.iter().enumerate() {
            while j < other.times.len() && other.times[j] < t - 1e-9 {
                j += 1;
            }
            if j < other.times.len() && (other.times[j] - t).abs() <= 1e-9 {
                worst = worst.max((self.p_values[i] - other.p_values[j]).abs());
            }
        }
        worst
    }

    pub fn worst_report(&self) -> StateReport {
        self.diagnostics
            .iter()
            .map(|d| d.state)
            .fold(
                StateReport {
                    trace_error: 0.0,
                    hermiticity_error: 0.0,
                    min_eigenvalue: f64::INFINITY,
                },
                StateReport::merge,
            )
    }

    pub fn max_meter_tail(&self) -> f64 {
        self.diagnostics.iter().fold(0.0, |a, d| a.max(d.meter_tail))
    }

    /// Mean of P over the samples with `t >= from`.
    pub fn mean_p_after(&self, from: f64) -> f64 {
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.p_values)
            .filter(|(t, _)| **t >= from)
            .map(|(_, p)| *p)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    /// Peak-to-trough spread of P over samples with `t >= from`.
    pub fn spread_after(&self, from: f64) -> f64 {
        let (lo, hi) = self
            .times
            .iter()
            .zip(&self.p_values)
            .filter(|(t, _)| **t >= from)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, p)| {
                (lo.min(*p), hi.max(*p))
            });
        hi - lo
    }
}
