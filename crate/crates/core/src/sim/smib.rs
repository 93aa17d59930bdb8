use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ode::Rk4;
use super::{
    unwrap_phase, InitialState, PmuRecord, RotorTrajectory, SmibCircuit, SourceTag,
    SwingCoefficients,
};
use crate::error::{Error, Result};

/// RK4 substeps taken per recorded sample.
pub const DEFAULT_SUBSTEPS: usize = 4;

/// Integrates the swing equation from `init`, recording `steps` samples
/// spaced `dt` apart (the first sample is the initial state).
pub fn simulate_smib(
    coeffs: SwingCoefficients,
    init: InitialState,
    dt: f64,
    steps: usize,
) -> Result<RotorTrajectory> {
    simulate_smib_substeps(coeffs, init, dt, steps, DEFAULT_SUBSTEPS)
}

/// [`simulate_smib`] with an explicit number of RK4 substeps per sample.
pub fn simulate_smib_substeps(
    coeffs: SwingCoefficients,
    init: InitialState,
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<RotorTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("dt must be positive"));
    }
    if steps < 2 {
        return Err(Error::config("at least two steps are required"));
    }
    if substeps == 0 {
        return Err(Error::config("substeps must be at least 1"));
    }
    if !(init.delta0.is_finite() && init.omega0.is_finite()) {
        return Err(Error::IntegrationDiverged { step: 0 });
    }

    let h = dt / substeps as f64;
    let mut rk = Rk4::new(2);
    let mut state = [init.delta0, init.omega0];
    let mut delta = Vec::with_capacity(steps);
    let mut omega = Vec::with_capacity(steps);
    delta.push(state[0]);
    omega.push(state[1]);
    for step in 1..steps {
        for _ in 0..substeps {
            rk.step(&mut state, h, |s, d| {
                d[0] = s[1];
                d[1] = coeffs.acceleration(s[0], s[1]);
            });
        }
        if !(state[0].is_finite() && state[1].is_finite()) {
            return Err(Error::IntegrationDiverged { step });
        }
        delta.push(state[0]);
        omega.push(state[1]);
    }
    RotorTrajectory::new(dt, delta, omega)
}

/// Line current `I = (E e^{jδ} − V) / (jX)` at each rotor angle, as an
/// unwrapped magnitude/phase record.
pub fn rotor_to_pmu(rotor: &RotorTrajectory, circuit: &SmibCircuit) -> Result<PmuRecord> {
    circuit.validate()?;
    let jx = Complex64::new(0.0, circuit.x_line);
    let v = Complex64::new(circuit.v_inf, 0.0);
    let (i_mag, mut i_phase): (Vec<f64>, Vec<f64>) = rotor
        .delta()
        .iter()
        .map(|&d| {
            let current = (Complex64::from_polar(circuit.e_internal, d) - v) / jx;
            (current.norm(), current.arg())
        })
        .unzip();
    unwrap_phase(&mut i_phase);
    PmuRecord::new(rotor.dt(), i_mag, i_phase, SourceTag::Simulated)
}

/// Closed intervals from which initial conditions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialRanges {
    pub delta0: (f64, f64),
    pub omega0: (f64, f64),
}

impl Default for InitialRanges {
    fn default() -> Self {
        InitialRanges {
            delta0: (0.2, 1.0),
            omega0: (-1.0, 1.0),
        }
    }
}

impl InitialRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("delta0", self.delta0), ("omega0", self.omega0)] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::config(alloc::format!(
                    "{name} range [{lo}, {hi}] is empty or not finite"
                )));
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    let u: f64 = rng.gen();
    (lo + (hi - lo) * u).clamp(lo, hi)
}

/// Draws an initial state uniformly from `ranges`.
pub fn sample_initial_conditions<R: Rng + ?Sized>(
    ranges: &InitialRanges,
    rng: &mut R,
) -> Result<InitialState> {
    ranges.validate()?;
    let delta0 = uniform(rng, ranges.delta0);
    let omega0 = uniform(rng, ranges.omega0);
    Ok(InitialState { delta0, omega0 })
}
