//! Zero-phase Butterworth low-pass filtering and finite-difference
//! derivatives of uniformly sampled series.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::PmuRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    pub order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            cutoff_hz: 5.0,
            sample_rate_hz: 60.0,
            order: 2,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::config("sample rate must be positive"));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::config(alloc::format!(
                "cutoff {} Hz must lie strictly between 0 and Nyquist ({} Hz)",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        if self.order == 0 {
            return Err(Error::config("filter order must be at least 1"));
        }
        Ok(())
    }

    /// Samples of odd reflection added to each end before filtering.
    fn pad_len(&self) -> usize {
        3 * (self.order + 1)
    }

    /// Shortest series [`lowpass`] accepts.
    pub fn min_len(&self) -> usize {
        (6 * self.order + 1).max(self.pad_len() + 1)
    }
}

/// One biquad in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a constant input `u` a fixed point.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        [y - self.b[0] * u, self.b[2] * u - self.a[1] * y]
    }
}

/// Butterworth low-pass as cascaded second-order sections via the bilinear
/// transform with frequency prewarping.
fn butterworth_sections(spec: &FilterSpec) -> Vec<Biquad> {
    let k = libm::tan(PI * spec.cutoff_hz / spec.sample_rate_hz);
    let n = spec.order;
    let mut sections = Vec::with_capacity(n.div_ceil(2));
    for pair in 0..n / 2 {
        let q = 1.0 / (2.0 * libm::sin(PI * (2 * pair + 1) as f64 / (2 * n) as f64));
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        sections.push(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        });
    }
    if n % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        sections.push(Biquad {
            b: [k * norm, k * norm, 0.0],
            a: [(k - 1.0) * norm, 0.0],
        });
    }
    sections
}

fn filter_pass(sections: &[Biquad], data: &mut [f64]) {
    let Some(&first) = data.first() else { return };
    let mut level = first;
    for s in sections {
        let [mut z1, mut z2] = s.steady_state(level);
        level *= s.dc_gain();
        for x in data.iter_mut() {
            let y = s.b[0] * *x + z1;
            z1 = s.b[1] * *x - s.a[0] * y + z2;
            z2 = s.b[2] * *x - s.a[1] * y;
            *x = y;
        }
    }
}

/// Zero-phase low-pass: the Butterworth cascade is run forward, then over the
/// reversed output. Ends are extended by odd reflection and each pass starts
/// from the steady state of its first sample.
pub fn lowpass(series: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = series.len();
    if n < spec.min_len() {
        return Err(Error::Input(alloc::format!(
            "series of length {n} is shorter than the filter minimum {}",
            spec.min_len()
        )));
    }
    let pad = spec.pad_len();
    let first = series[0];
    let last = series[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - series[i]));
    ext.extend_from_slice(series);
    ext.extend((1..=pad).map(|i| 2.0 * last - series[n - 1 - i]));

    let sections = butterworth_sections(spec);
    filter_pass(&sections, &mut ext);
    ext.reverse();
    filter_pass(&sections, &mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// Low-passes both channels of a record. Filter ringing below zero in the
/// magnitude channel is clamped away.
pub fn filter_record(record: &PmuRecord, spec: &FilterSpec) -> Result<PmuRecord> {
    let mut mag = lowpass(record.i_mag(), spec)?;
    mag.iter_mut().for_each(|m| *m = m.max(0.0));
    let phase = lowpass(record.i_phase(), spec)?;
    PmuRecord::new(record.dt(), mag, phase, record.source())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOrder {
    First,
    Second,
}

/// Second-order accurate derivative estimate at every sample: central
/// stencils in the interior, one-sided stencils at the two ends.
pub fn finite_difference(series: &[f64], dt: f64, order: DiffOrder) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 5 {
        return Err(Error::Input(alloc::format!(
            "finite differences need at least 5 samples, got {n}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("dt must be positive"));
    }
    let x = series;
    let mut out = vec![0.0; n];
    match order {
        DiffOrder::First => {
            for t in 1..n - 1 {
                out[t] = (x[t + 1] - x[t - 1]) / (2.0 * dt);
            }
            out[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
            out[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt);
        }
        DiffOrder::Second => {
            let dt2 = dt * dt;
            for t in 1..n - 1 {
                out[t] = (x[t + 1] - 2.0 * x[t] + x[t - 1]) / dt2;
            }
            out[0] = (2.0 * x[0] - 5.0 * x[1] + 4.0 * x[2] - x[3]) / dt2;
            out[n - 1] = (2.0 * x[n - 1] - 5.0 * x[n - 2] + 4.0 * x[n - 3] - x[n - 4]) / dt2;
        }
    }
    Ok(out)
}
