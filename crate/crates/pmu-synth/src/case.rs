//! JSON case files for classical multi-machine systems.

use std::path::Path;

use num_complex::Complex64;
use pmu_synth_core::linalg::ComplexMatrix;
use pmu_synth_core::sim::{MonitoredLine, MultiMachineCase};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_json;

/// Relative tolerance when checking a stored reduced admittance against the
/// one derived from the full network.
const REDUCED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoredLineFile {
    pub from_bus: usize,
    pub to_bus: usize,
    pub series: [f64; 2],
    pub shunt_half: [f64; 2],
}

/// On-disk case. Matrices are row-major lists of `[re, im]` pairs; the full
/// admittance orders generator internal nodes before network buses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub n_gen: usize,
    pub n_bus: usize,
    #[serde(rename = "M")]
    pub inertia: Vec<f64>,
    #[serde(rename = "D")]
    pub damping: Vec<f64>,
    #[serde(rename = "Pm")]
    pub mech_power: Vec<f64>,
    #[serde(rename = "E")]
    pub emf: Vec<f64>,
    /// Initial rotor angles, rad.
    pub delta0: Vec<f64>,
    #[serde(rename = "Y_full")]
    pub y_full: Vec<[f64; 2]>,
    #[serde(rename = "Y_reduced")]
    pub y_reduced: Vec<[f64; 2]>,
    pub monitored_line: MonitoredLineFile,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn complex([re, im]: [f64; 2]) -> Complex64 {
    Complex64::new(re, im)
}

fn flatten(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    m.data.iter().copied().map(pair).collect()
}

impl CaseFile {
    pub fn from_case(case: &MultiMachineCase) -> Self {
        let line = case.monitored();
        CaseFile {
            n_gen: case.n_gen(),
            n_bus: case.n_bus(),
            inertia: case.inertia().to_vec(),
            damping: case.damping().to_vec(),
            mech_power: case.mech_power().to_vec(),
            emf: case.emf().to_vec(),
            delta0: case.delta0().to_vec(),
            y_full: flatten(case.y_full()),
            y_reduced: flatten(case.y_reduced()),
            monitored_line: MonitoredLineFile {
                from_bus: line.from_bus,
                to_bus: line.to_bus,
                series: pair(line.series),
                shunt_half: pair(line.shunt_half),
            },
        }
    }

    /// Builds the case and checks the stored reduced admittance against the
    /// Kron reduction of the stored full admittance.
    pub fn into_case(self) -> CliResult<MultiMachineCase> {
        let n = self.n_gen + self.n_bus;
        let y_full = ComplexMatrix::from_vec(n, n, self.y_full.iter().copied().map(complex).collect())?;
        let line = &self.monitored_line;
        let monitored = MonitoredLine {
            from_bus: line.from_bus,
            to_bus: line.to_bus,
            series: complex(line.series),
            shunt_half: complex(line.shunt_half),
        };
        let case = MultiMachineCase::new(
            self.n_gen,
            self.n_bus,
            self.inertia,
            self.damping,
            self.mech_power,
            self.emf,
            self.delta0,
            y_full,
            monitored,
        )?;
        let derived = &case.y_reduced().data;
        if self.y_reduced.len() != derived.len() {
            return Err(CliError::usage(format!(
                "Y_reduced has {} entries, expected {}",
                self.y_reduced.len(),
                derived.len()
            )));
        }
        let scale = derived.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for (i, (stored, d)) in self.y_reduced.iter().zip(derived).enumerate() {
            if (complex(*stored) - d).norm() > REDUCED_TOLERANCE * scale {
                return Err(CliError::usage(format!(
                    "Y_reduced entry {i} disagrees with the reduction of Y_full"
                )));
            }
        }
        Ok(case)
    }
}

pub fn load_case(path: &Path) -> CliResult<MultiMachineCase> {
    read_json::<CaseFile>(path)?.into_case()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_case_round_trips() {
        let case = MultiMachineCase::wscc_ninebus();
        let file = CaseFile::from_case(&case);
        assert_eq!(file.clone().into_case().unwrap(), case);
        let json = serde_json::to_string(&file).unwrap();
        let back: CaseFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn bundled_case_matches_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("cases/wscc9.json");
        let loaded = load_case(&path).unwrap();
        assert_eq!(loaded, MultiMachineCase::wscc_ninebus());
    }

    #[test]
    fn inconsistent_reduction_is_rejected() {
        let mut file = CaseFile::from_case(&MultiMachineCase::wscc_ninebus());
        file.y_reduced[0][1] += 1e-3;
        assert!(matches!(file.into_case(), Err(CliError::Usage(_))));
    }

    #[test]
    fn wrong_generator_count_is_rejected() {
        let mut file = CaseFile::from_case(&MultiMachineCase::wscc_ninebus());
        file.inertia.pop();
        assert!(file.into_case().is_err());
    }
}

