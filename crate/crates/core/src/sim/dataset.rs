use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::multimachine::{simulate_ninebus, FaultSpec, MultiMachineCase};
use super::smib::{rotor_to_pmu, sample_initial_conditions, simulate_smib, InitialRanges};
use super::{PmuRecord, SmibCircuit, SwingCoefficients, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// Steps kept from each recording.
pub const SEQUENCE_LEN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Smib,
    Ninebus,
}

/// Everything needed to turn a seed into a training corpus.
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub dt: f64,
    /// Length of each recording in seconds, before truncation.
    pub horizon: f64,
    pub seq_len: usize,
    pub coeffs: SwingCoefficients,
    pub circuit: SmibCircuit,
    pub ranges: InitialRanges,
    pub case: MultiMachineCase,
    /// Fault durations are drawn uniformly from this interval.
    pub fault_duration: (f64, f64),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            dt: 1.0 / SAMPLE_RATE_HZ,
            horizon: 4.0,
            seq_len: SEQUENCE_LEN,
            coeffs: SwingCoefficients::default(),
            circuit: SmibCircuit::default(),
            ranges: InitialRanges::default(),
            case: MultiMachineCase::wscc_ninebus(),
            fault_duration: (0.05, 0.3),
        }
    }
}

impl DatasetConfig {
    fn recorded_steps(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.horizon.is_finite()) {
            return Err(Error::config("dt and horizon must be positive and finite"));
        }
        if self.seq_len < 2 || self.recorded_steps() < self.seq_len {
            return Err(Error::config(alloc::format!(
                "horizon of {} s at dt {} holds fewer than {} steps",
                self.horizon,
                self.dt,
                self.seq_len
            )));
        }
        if !self.coeffs.is_finite() {
            return Err(Error::config("swing coefficients must be finite"));
        }
        self.circuit.validate()?;
        self.ranges.validate()?;
        let (lo, hi) = self.fault_duration;
        if !(lo >= 0.0 && hi.is_finite() && lo <= hi) {
            return Err(Error::config("fault duration range is empty or negative"));
        }
        Ok(())
    }
}

/// Independent random stream for one sample of a seeded dataset.
pub(crate) fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn one_sample(system: SystemKind, config: &DatasetConfig, rng: &mut ChaCha8Rng) -> Result<PmuRecord> {
    let record = match system {
        SystemKind::Smib => {
            let init = sample_initial_conditions(&config.ranges, rng)?;
            let rotor = simulate_smib(config.coeffs, init, config.dt, config.recorded_steps())?;
            rotor_to_pmu(&rotor, &config.circuit)?
        }
        SystemKind::Ninebus => {
            let fault_bus = rng.gen_range(1..=config.case.n_bus());
            let (lo, hi) = config.fault_duration;
            let duration = if lo == hi { lo } else { lo + (hi - lo) * rng.gen::<f64>() };
            let fault = FaultSpec { fault_bus, duration };
            simulate_ninebus(&config.case, &fault, config.dt, config.horizon)?
        }
    };
    Ok(record.truncated(config.seq_len))
}

/// Simulates `n_samples` records. Sample `i` draws from its own stream
/// derived from `(seed, i)`, so the corpus does not depend on evaluation order.
pub fn build_dataset(
    system: SystemKind,
    n_samples: usize,
    config: &DatasetConfig,
    seed: u64,
) -> Result<Vec<PmuRecord>> {
    if n_samples == 0 {
        return Err(Error::config("n_samples must be at least 1"));
    }
    config.validate()?;
    (0..n_samples)
        .map(|i| one_sample(system, config, &mut sample_rng(seed, i)).map_err(|e| e.in_sample(i)))
        .collect()
}
