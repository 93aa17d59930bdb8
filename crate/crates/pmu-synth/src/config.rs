//! Pipeline configuration file. Every field has a default, so a config file
//! only needs the values it changes.

use std::path::PathBuf;

use pmu_synth_core::ident::DEFAULT_THRESHOLD;
use pmu_synth_core::signal::FilterSpec;
use pmu_synth_core::sim::{
    DatasetConfig, InitialRanges, MultiMachineCase, SmibCircuit, SwingCoefficients, SystemKind, SAMPLE_RATE_HZ,
    SEQUENCE_LEN,
};
use pmu_synth_core::wgan::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::case::load_case;
use crate::error::{CliError, CliResult};

/// Training-set size used when neither flags nor config say otherwise.
pub const DEFAULT_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seq_len: usize,
    pub coeffs: SwingCoefficients,
    pub circuit: SmibCircuit,
    pub ranges: InitialRanges,
    pub fault_duration: (f64, f64),
    /// Multi-machine case file; the bundled WSCC 9-bus case when absent.
    pub case_file: Option<PathBuf>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 1.0 / SAMPLE_RATE_HZ,
            horizon: 4.0,
            seq_len: SEQUENCE_LEN,
            coeffs: SwingCoefficients::default(),
            circuit: SmibCircuit::default(),
            ranges: InitialRanges::default(),
            fault_duration: (0.05, 0.3),
            case_file: None,
        }
    }
}

impl SimulationConfig {
    pub fn dataset_config(&self) -> CliResult<DatasetConfig> {
        let case = match &self.case_file {
            Some(path) => load_case(path)?,
            None => MultiMachineCase::wscc_ninebus(),
        };
        let cfg = DatasetConfig {
            dt: self.dt,
            horizon: self.horizon,
            seq_len: self.seq_len,
            coeffs: self.coeffs,
            circuit: self.circuit,
            ranges: self.ranges,
            case,
            fault_duration: self.fault_duration,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub system: SystemKind,
    pub samples: usize,
    pub simulation: SimulationConfig,
    pub train: TrainConfig,
    pub filter: FilterSpec,
    pub threshold: f64,
    /// Master seed; drives simulation, training and generation.
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            system: SystemKind::Smib,
            samples: DEFAULT_SAMPLES,
            simulation: SimulationConfig::default(),
            train: TrainConfig::default(),
            filter: FilterSpec::default(),
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.samples == 0 {
            return Err(CliError::usage("samples must be at least 1"));
        }
        if self.out.as_os_str().is_empty() {
            return Err(CliError::usage("output path must be nonempty"));
        }
        if !(self.threshold >= 0.0) {
            return Err(CliError::usage("threshold must be non-negative"));
        }
        self.train.validate()?;
        self.filter.validate()?;
        self.simulation.dataset_config()?;
        Ok(())
    }
}
