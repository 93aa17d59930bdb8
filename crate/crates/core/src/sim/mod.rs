//! Power-system dynamics: single-machine-infinite-bus (SMIB) swing dynamics,
//! a classical multi-machine model, and conversion of rotor trajectories into
//! PMU current-phasor records.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod dataset;
mod multimachine;
pub mod ode;
mod smib;

pub use dataset::{build_dataset, DatasetConfig, SystemKind, SEQUENCE_LEN};
pub use multimachine::{
    kron_reduce, simulate_ninebus, FaultSpec, MonitoredLine, MultiMachineCase, FAULT_ADMITTANCE,
};
pub use smib::{
    rotor_to_pmu, sample_initial_conditions, simulate_smib, simulate_smib_substeps, InitialRanges,
    DEFAULT_SUBSTEPS,
};

/// PMU reporting rate used throughout the pipeline.
pub const SAMPLE_RATE_HZ: f64 = 60.0;

/// Coefficients of `δ'' + α δ' + β sin δ + γ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwingCoefficients {
    /// Damping, 1/s.
    pub alpha: f64,
    /// Synchronizing coefficient, 1/s².
    pub beta: f64,
    /// Constant forcing, 1/s².
    pub gamma: f64,
}

impl SwingCoefficients {
    pub const fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        SwingCoefficients { alpha, beta, gamma }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite()
    }

    /// Rotor acceleration at the given state.
    #[inline]
    pub fn acceleration(&self, delta: f64, omega: f64) -> f64 {
        -self.alpha * omega - self.beta * libm::sin(delta) - self.gamma
    }
}

impl Default for SwingCoefficients {
    fn default() -> Self {
        SwingCoefficients::new(0.5, 5.0, -1.0)
    }
}

/// Generator EMF behind a reactance, tied to an infinite bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmibCircuit {
    pub e_internal: f64,
    pub v_inf: f64,
    pub x_line: f64,
}

impl SmibCircuit {
    pub fn new(e_internal: f64, v_inf: f64, x_line: f64) -> Result<Self> {
        let circuit = SmibCircuit {
            e_internal,
            v_inf,
            x_line,
        };
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.e_internal) && ok(self.v_inf) && ok(self.x_line)) {
            return Err(Error::config("SMIB circuit constants must be positive and finite"));
        }
        Ok(())
    }
}

impl Default for SmibCircuit {
    fn default() -> Self {
        SmibCircuit {
            e_internal: 1.05,
            v_inf: 1.0,
            x_line: 0.5,
        }
    }
}

/// Post-disturbance initial condition of the SMIB rotor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub delta0: f64,
    pub omega0: f64,
}

/// Rotor angle and speed deviation sampled at a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorTrajectory {
    dt: f64,
    delta: Vec<f64>,
    omega: Vec<f64>,
}

impl RotorTrajectory {
    pub fn new(dt: f64, delta: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("trajectory step must be positive"));
        }
        if delta.len() != omega.len() || delta.len() < 2 {
            return Err(Error::shape("trajectory channels must have equal length >= 2"));
        }
        Ok(RotorTrajectory { dt, delta, omega })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

/// Where a PMU record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Simulated,
    Synthetic,
}

impl SourceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceTag::Simulated => "simulated",
            SourceTag::Synthetic => "synthetic",
        }
    }
}

/// A two-channel current-phasor time series: magnitude (p.u.) and phase (rad).
#[derive(Debug, Clone, PartialEq)]
pub struct PmuRecord {
    dt: f64,
    i_mag: Vec<f64>,
    i_phase: Vec<f64>,
    source: SourceTag,
}

impl PmuRecord {
    pub fn new(dt: f64, i_mag: Vec<f64>, i_phase: Vec<f64>, source: SourceTag) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("record step must be positive"));
        }
        if i_mag.len() != i_phase.len() {
            return Err(Error::shape(alloc::format!(
                "magnitude has {} samples, phase has {}",
                i_mag.len(),
                i_phase.len()
            )));
        }
        if let Some(t) = i_mag.iter().position(|m| !(*m >= 0.0)) {
            return Err(Error::Input(alloc::format!(
                "current magnitude at step {t} is negative or NaN"
            )));
        }
        Ok(PmuRecord {
            dt,
            i_mag,
            i_phase,
            source,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn i_mag(&self) -> &[f64] {
        &self.i_mag
    }

    pub fn i_phase(&self) -> &[f64] {
        &self.i_phase
    }

    pub fn source(&self) -> SourceTag {
        self.source
    }

    pub fn len(&self) -> usize {
        self.i_mag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_mag.is_empty()
    }

    /// Keeps only the first `len` steps.
    pub fn truncated(mut self, len: usize) -> Self {
        self.i_mag.truncate(len);
        self.i_phase.truncate(len);
        self
    }
}

/// Removes ±2π jumps so adjacent samples differ by at most π.
pub fn unwrap_phase(phase: &mut [f64]) {
    for t in 1..phase.len() {
        let mut d = phase[t] - phase[t - 1];
        if d > PI || d < -PI {
            d -= 2.0 * PI * libm::round(d / (2.0 * PI));
            phase[t] = phase[t - 1] + d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn unwrap_removes_branch_cut_jumps() {
        let mut p = vec![3.0, -3.0, -2.5, 3.1];
        unwrap_phase(&mut p);
        for w in p.windows(2) {
            assert!((w[1] - w[0]).abs() < PI);
        }
        assert!((p[1] - (2.0 * PI - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn record_rejects_negative_magnitude() {
        let err = PmuRecord::new(0.1, vec![1.0, -0.1], vec![0.0, 0.0], SourceTag::Simulated);
        assert!(err.is_err());
        let err = PmuRecord::new(0.1, vec![1.0], vec![0.0, 0.0], SourceTag::Simulated);
        assert!(matches!(err, Err(Error::Shape(_))));
    }
}
