//! Realism scoring of PMU records: recover the rotor angle through a fixed
//! SMIB circuit, fit swing-equation coefficients by least squares, re-simulate
//! from the same initial state and measure the range-normalized deviation.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::signal::{finite_difference, DiffOrder};
use crate::sim::{simulate_smib, unwrap_phase, InitialState, PmuRecord, SmibCircuit, SwingCoefficients};

/// Error level above which a sample is classified unrealistic.
pub const DEFAULT_THRESHOLD: f64 = 0.09;

/// Bins in the error histogram of a [`ValidationReport`].
pub const HISTOGRAM_BINS: usize = 20;

/// Rotor angle reconstructed from a current record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredAngle {
    pub delta: Vec<f64>,
    /// Largest `| |V + jX·I| − E |` over the record. Zero (up to rounding) for
    /// records that really came from the circuit.
    pub emf_residual: f64,
}

/// Inverts the SMIB current relation: `E e^{jδ} = V + jX·I`.
pub fn recover_rotor_angle(record: &PmuRecord, circuit: &SmibCircuit) -> Result<RecoveredAngle> {
    circuit.validate()?;
    let jx = Complex64::new(0.0, circuit.x_line);
    let v = Complex64::new(circuit.v_inf, 0.0);
    let mut emf_residual: f64 = 0.0;
    let mut delta: Vec<f64> = record
        .i_mag()
        .iter()
        .zip(record.i_phase())
        .map(|(&m, &p)| {
            let emf = v + jx * Complex64::from_polar(m, p);
            emf_residual = emf_residual.max((emf.norm() - circuit.e_internal).abs());
            emf.arg()
        })
        .collect();
    unwrap_phase(&mut delta);
    Ok(RecoveredAngle { delta, emf_residual })
}

/// Least-squares system `[δ'(t), sin δ(t), 1]·(α, β, γ) = −δ''(t)` over the
/// interior samples, as a row-major matrix and target vector.
pub fn swing_regression(delta: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if delta.len() < 10 {
        return Err(Error::Input(alloc::format!(
            "identification needs at least 10 samples, got {}",
            delta.len()
        )));
    }
    let d1 = finite_difference(delta, dt, DiffOrder::First)?;
    let d2 = finite_difference(delta, dt, DiffOrder::Second)?;
    let n = delta.len();
    let mut a = Vec::with_capacity(3 * (n - 2));
    let mut b = Vec::with_capacity(n - 2);
    for t in 1..n - 1 {
        a.extend_from_slice(&[d1[t], libm::sin(delta[t]), 1.0]);
        b.push(-d2[t]);
    }
    Ok((a, b))
}

/// Fits swing coefficients to a sampled rotor angle.
pub fn fit_swing_params(delta: &[f64], dt: f64) -> Result<SwingCoefficients> {
    let (a, b) = swing_regression(delta, dt)?;
    let x = least_squares(&a, b.len(), 3, &b)?;
    Ok(SwingCoefficients::new(x[0], x[1], x[2]))
}

/// Integrates the fitted model from the observed initial angle and a
/// one-sided estimate of the initial speed.
pub fn resimulate(fitted: SwingCoefficients, delta: &[f64], dt: f64) -> Result<Vec<f64>> {
    if delta.len() < 5 {
        return Err(Error::Input("re-simulation needs at least 5 samples".into()));
    }
    let omega0 = finite_difference(delta, dt, DiffOrder::First)?[0];
    let init = InitialState {
        delta0: delta[0],
        omega0,
    };
    Ok(simulate_smib(fitted, init, dt, delta.len())?.delta().to_vec())
}

/// `mean_t |δ_est − δ| / (max δ − min δ)`.
pub fn mean_relative_error(delta: &[f64], delta_est: &[f64]) -> Result<f64> {
    if delta.len() != delta_est.len() {
        return Err(Error::shape("observed and estimated profiles differ in length"));
    }
    if delta.is_empty() {
        return Err(Error::Input("empty profile".into()));
    }
    let (lo, hi) = delta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::UndefinedNormalization);
    }
    let total: f64 = delta.iter().zip(delta_est).map(|(d, e)| (e - d).abs()).sum();
    Ok(total / delta.len() as f64 / range)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub fitted: SwingCoefficients,
    pub delta_observed: Vec<f64>,
    pub delta_estimated: Vec<f64>,
    pub error: f64,
    pub realistic: bool,
    pub emf_residual: f64,
}

/// Runs recover → fit → re-simulate → score on one record.
pub fn identify(record: &PmuRecord, circuit: &SmibCircuit, threshold: f64) -> Result<IdentificationResult> {
    let recovered = recover_rotor_angle(record, circuit)?;
    let fitted = fit_swing_params(&recovered.delta, record.dt())?;
    let estimated = resimulate(fitted, &recovered.delta, record.dt())?;
    let error = mean_relative_error(&recovered.delta, &estimated)?;
    if !error.is_finite() {
        return Err(Error::IntegrationDiverged { step: estimated.len() });
    }
    Ok(IdentificationResult {
        fitted,
        delta_observed: recovered.delta,
        delta_estimated: estimated,
        error,
        realistic: error <= threshold,
        emf_residual: recovered.emf_residual,
    })
}

/// Per-record outcome kept in a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub index: usize,
    pub error: Option<f64>,
    pub realistic: bool,
    pub fitted: Option<SwingCoefficients>,
    pub emf_residual: Option<f64>,
    /// Why identification failed, if it did.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `HISTOGRAM_BINS + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub threshold: f64,
    pub total: usize,
    pub realistic_count: usize,
    pub realistic_fraction: f64,
    pub failed_count: usize,
    pub histogram: Histogram,
    pub samples: Vec<SampleSummary>,
}

/// Equal-width bins over `[0, max finite error]`. Failed samples are counted
/// in the last bin so the counts always sum to the sample total.
fn error_histogram(samples: &[SampleSummary]) -> Histogram {
    let max = samples
        .iter()
        .filter_map(|s| s.error)
        .fold(0.0_f64, f64::max);
    let width = max / HISTOGRAM_BINS as f64;
    let edges = (0..=HISTOGRAM_BINS).map(|i| width * i as f64).collect();
    let mut counts = vec![0; HISTOGRAM_BINS];
    for s in samples {
        let bin = match s.error {
            Some(e) if max > 0.0 => ((e / max * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1),
            Some(_) => 0,
            None => HISTOGRAM_BINS - 1,
        };
        counts[bin] += 1;
    }
    Histogram { edges, counts }
}

/// Scores every record. Records whose identification fails (flat, rank
/// deficient, divergent) count as unrealistic.
pub fn validate_dataset(records: &[PmuRecord], circuit: &SmibCircuit, threshold: f64) -> Result<ValidationReport> {
    if records.is_empty() {
        return Err(Error::Input("no records to validate".into()));
    }
    if threshold.is_nan() {
        return Err(Error::config("threshold must be a number"));
    }
    circuit.validate()?;
    let samples: Vec<SampleSummary> = records
        .iter()
        .enumerate()
        .map(|(index, record)| summarize(index, identify(record, circuit, threshold)))
        .collect();
    Ok(aggregate(samples, threshold))
}

/// Turns one identification outcome into a report row.
pub fn summarize(index: usize, outcome: Result<IdentificationResult>) -> SampleSummary {
    match outcome {
        Ok(r) => SampleSummary {
            index,
            error: Some(r.error),
            realistic: r.realistic,
            fitted: Some(r.fitted),
            emf_residual: Some(r.emf_residual),
            failure: None,
        },
        Err(e) => SampleSummary {
            index,
            error: None,
            realistic: false,
            fitted: None,
            emf_residual: None,
            failure: Some(e.to_string()),
        },
    }
}

/// Folds per-sample rows (in index order) into a report.
pub fn aggregate(samples: Vec<SampleSummary>, threshold: f64) -> ValidationReport {
    let total = samples.len();
    let realistic_count = samples.iter().filter(|s| s.realistic).count();
    let failed_count = samples.iter().filter(|s| s.error.is_none()).count();
    ValidationReport {
        threshold,
        total,
        realistic_count,
        realistic_fraction: if total == 0 { 0.0 } else { realistic_count as f64 / total as f64 },
        failed_count,
        histogram: error_histogram(&samples),
        samples,
    }
}
