//! Dataset CSV files with a JSON metadata sidecar.
//!
//! The CSV has one row per (sample, step) with columns
//! `sample_id,step,time_s,i_mag_pu,i_phase_rad`, ordered by sample then step.
//! Values are written in shortest round-trip form, so reading and rewriting a
//! file reproduces it byte for byte.

use std::path::{Path, PathBuf};

use pmu_synth_core::signal::FilterSpec;
use pmu_synth_core::sim::{PmuRecord, SourceTag, SystemKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_bytes, read_json, write_bytes, write_json};

pub const CSV_HEADER: [&str; 5] = ["sample_id", "step", "time_s", "i_mag_pu", "i_phase_rad"];
pub const CHANNELS: [&str; 2] = ["i_mag_pu", "i_phase_rad"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub dt: f64,
    pub channels: Vec<String>,
    pub sample_count: usize,
    pub seq_len: usize,
    pub source_tag: SourceTag,
    /// Simulated system, when the data came from simulation.
    pub system: Option<SystemKind>,
    /// SHA-256 of whatever produced the data: the simulation settings or the
    /// generating checkpoint.
    pub config_digest: String,
    /// Low-pass filter applied after generation; `null` if none.
    pub filter: Option<FilterSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<PmuRecord>,
}

/// `data/run.csv` → `data/run.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.meta.json"))
}

pub fn to_csv(records: &[PmuRecord]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(CSV_HEADER).map_err(err)?;
    for (id, r) in records.iter().enumerate() {
        for step in 0..r.len() {
            let time = step as f64 * r.dt();
            w.write_record([
                id.to_string(),
                step.to_string(),
                time.to_string(),
                r.i_mag()[step].to_string(),
                r.i_phase()[step].to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
}

pub fn write_dataset(csv_path: &Path, dataset: &Dataset) -> CliResult<()> {
    let meta = &dataset.meta;
    if meta.sample_count != dataset.records.len() {
        return Err(CliError::runtime("metadata sample count disagrees with the records"));
    }
    if dataset.records.iter().any(|r| r.len() != meta.seq_len) {
        return Err(CliError::runtime("record length disagrees with metadata"));
    }
    write_bytes(csv_path, &to_csv(&dataset.records)?)?;
    write_json(&meta_path(csv_path), meta)
}

#[derive(Debug, Deserialize)]
struct Row {
    sample_id: usize,
    step: usize,
    #[allow(dead_code)]
    time_s: f64,
    i_mag_pu: f64,
    i_phase_rad: f64,
}

pub fn read_dataset(csv_path: &Path) -> CliResult<Dataset> {
    let meta: DatasetMeta = read_json(&meta_path(csv_path))?;
    let bad = |msg: String| CliError::runtime(format!("{}: {msg}", csv_path.display()));
    if meta.channels != CHANNELS {
        return Err(bad(format!("unsupported channels {:?}", meta.channels)));
    }
    if meta.sample_count == 0 {
        return Err(bad("dataset has no samples".into()));
    }
    let bytes = read_bytes(csv_path)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {:?}", header)));
    }
    let mut records = Vec::with_capacity(meta.sample_count);
    let mut mag = Vec::with_capacity(meta.seq_len);
    let mut phase = Vec::with_capacity(meta.seq_len);
    let mut rows = 0usize;
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let (id, step) = (rows / meta.seq_len, rows % meta.seq_len);
        if row.sample_id != id || row.step != step {
            return Err(bad(format!(
                "row {} is ({}, {}), expected ({id}, {step})",
                line + 2,
                row.sample_id,
                row.step
            )));
        }
        mag.push(row.i_mag_pu);
        phase.push(row.i_phase_rad);
        rows += 1;
        if step + 1 == meta.seq_len {
            let r = PmuRecord::new(meta.dt, std::mem::take(&mut mag), std::mem::take(&mut phase), meta.source_tag)
                .map_err(|e| bad(format!("sample {id}: {e}")))?;
            records.push(r);
        }
    }
    if rows != meta.sample_count * meta.seq_len {
        return Err(bad(format!(
            "{rows} rows, expected {} samples of {} steps",
            meta.sample_count, meta.seq_len
        )));
    }
    Ok(Dataset { meta, records })
}
