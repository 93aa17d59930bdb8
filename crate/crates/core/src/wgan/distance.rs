use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::PmuRecord;

/// Empirical 1-D Wasserstein-1 distance between equally sized sample sets:
/// the mean absolute difference of the sorted samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("sample sets must be nonempty".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Input(alloc::format!(
            "sample sets differ in size: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("samples must be finite".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

/// Marginal W1 per channel and time step between two record sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistances {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl MarginalDistances {
    fn all(&self) -> impl Iterator<Item = &f64> {
        self.magnitude.iter().chain(&self.phase)
    }

    pub fn mean(&self) -> f64 {
        let n = self.magnitude.len() + self.phase.len();
        self.all().sum::<f64>() / n as f64
    }

    pub fn max(&self) -> f64 {
        self.all().copied().fold(0.0, f64::max)
    }
}

pub fn marginal_distances(a: &[PmuRecord], b: &[PmuRecord]) -> Result<MarginalDistances> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(alloc::format!(
            "datasets must have equal nonzero sample counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let len = a[0].len();
    if a.iter().chain(b).any(|r| r.len() != len) {
        return Err(Error::shape("all records must have the same length"));
    }
    let column = |set: &[PmuRecord], t: usize, mag: bool| -> Vec<f64> {
        set.iter()
            .map(|r| if mag { r.i_mag()[t] } else { r.i_phase()[t] })
            .collect()
    };
    let per_step = |mag: bool| -> Result<Vec<f64>> {
        (0..len)
            .map(|t| wasserstein_1d(&column(a, t, mag), &column(b, t, mag)))
            .collect()
    };
    Ok(MarginalDistances {
        magnitude: per_step(true)?,
        phase: per_step(false)?,
    })
}
