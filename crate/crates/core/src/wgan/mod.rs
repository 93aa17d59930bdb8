//! Weight-clipped Wasserstein GAN over fixed-length multichannel sequences.
//!
//! The generator has one dense head per channel, all fed the same noise
//! vector. The critic sees the channels concatenated, magnitude block first.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{forward, init_network, predict, Activation, Matrix, NetworkParameters, NetworkSpec};
use crate::sim::{PmuRecord, SourceTag};

mod distance;
mod train;

pub use distance::{marginal_distances, wasserstein_1d, MarginalDistances};
pub use train::{
    critic_objective, generator_objective, stack_gradient_check, train, train_iteration, train_observed,
    Checkpoint, LossHistory, RngState, TrainObserver,
};

/// Lower and upper ends of the normalized data range.
pub const NORMALIZED_RANGE: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub critic_steps: usize,
    pub clip: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub noise_dim: usize,
    pub seed: u64,
    /// Final critic activation; `Linear` keeps the objective unbounded.
    pub critic_output: Activation,
    /// Hidden widths of each generator head.
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            critic_steps: 5,
            clip: 0.01,
            learning_rate: 1e-4,
            iterations: 20_000,
            noise_dim: 32,
            seed: 0,
            critic_output: Activation::Linear,
            generator_hidden: vec![64, 128],
            critic_hidden: vec![128, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("critic_steps", self.critic_steps),
            ("iterations", self.iterations),
            ("noise_dim", self.noise_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(alloc::format!("{name} must be at least 1")));
            }
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(Error::config(alloc::format!("clip must be positive, got {}", self.clip)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(alloc::format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.critic_output == Activation::Relu {
            return Err(Error::config("critic output must be linear or sigmoid"));
        }
        if self.generator_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be at least 1"));
        }
        Ok(())
    }

    pub fn generator_head_spec(&self, seq_len: usize) -> Result<NetworkSpec> {
        let mut sizes = vec![self.noise_dim];
        sizes.extend_from_slice(&self.generator_hidden);
        sizes.push(seq_len);
        NetworkSpec::relu_stack(sizes, Activation::Sigmoid)
    }

    pub fn critic_spec(&self, input_width: usize) -> Result<NetworkSpec> {
        let mut sizes = vec![input_width];
        sizes.extend_from_slice(&self.critic_hidden);
        sizes.push(1);
        NetworkSpec::relu_stack(sizes, self.critic_output)
    }
}

/// `rows x cols` matrix of independent standard normal draws.
pub fn sample_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix { rows, cols, data }
}

/// A network together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: NetworkParameters,
}

impl Network {
    pub fn new(spec: NetworkSpec, params: NetworkParameters) -> Result<Self> {
        spec.validate()?;
        params.check(&spec)?;
        Ok(Network { spec, params })
    }

    pub fn init(spec: NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        let params = init_network(&spec, rng)?;
        Ok(Network { spec, params })
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        predict(&self.params, &self.spec, batch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub heads: Vec<Network>,
}

impl GeneratorModel {
    pub fn noise_dim(&self) -> usize {
        self.heads[0].spec.input_size()
    }

    pub fn seq_len(&self) -> usize {
        self.heads[0].spec.output_size()
    }

    pub fn channels(&self) -> usize {
        self.heads.len()
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.heads.first().ok_or_else(|| Error::config("generator has no heads"))?;
        for head in &self.heads {
            head.params.check(&head.spec)?;
            if head.spec.input_size() != first.spec.input_size()
                || head.spec.output_size() != first.spec.output_size()
            {
                return Err(Error::shape("generator heads differ in noise or output width"));
            }
        }
        Ok(())
    }

    /// Normalized samples, one row per noise row, channels side by side.
    pub fn sample(&self, noise: &Matrix) -> Result<Matrix> {
        let mut out: Option<Matrix> = None;
        for head in &self.heads {
            let y = head.predict(noise)?;
            out = Some(match out {
                None => y,
                Some(acc) => acc.hstack(&y)?,
            });
        }
        out.ok_or_else(|| Error::config("generator has no heads"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticModel {
    pub net: Network,
}

impl CriticModel {
    pub fn input_width(&self) -> usize {
        self.net.spec.input_size()
    }

    pub fn validate(&self) -> Result<()> {
        self.net.params.check(&self.net.spec)?;
        if self.net.spec.output_size() != 1 {
            return Err(Error::shape("critic must have a scalar output"));
        }
        Ok(())
    }

    /// One score per batch row.
    pub fn score(&self, batch: &Matrix) -> Result<Vec<f64>> {
        Ok(forward(&self.net.params, &self.net.spec, batch)?.output.data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
}

/// Per-channel affine map from the data range onto [`NORMALIZED_RANGE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lo: f64,
    pub hi: f64,
    pub channels: Vec<ChannelRange>,
}

impl Normalization {
    /// Fits one range per channel over `raw` (samples x channels·seq_len).
    pub fn fit(raw: &Matrix, channels: usize) -> Result<Self> {
        if channels == 0 || raw.cols % channels != 0 || raw.rows == 0 {
            return Err(Error::shape("data width is not a whole number of channels"));
        }
        let len = raw.cols / channels;
        let mut ranges = Vec::with_capacity(channels);
        for c in 0..channels {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for r in 0..raw.rows {
                for &v in &raw.row(r)[c * len..(c + 1) * len] {
                    min = min.min(v);
                    max = max.max(v);
                }
            }
            if !(max > min) || !(max - min).is_finite() {
                return Err(Error::UndefinedNormalization);
            }
            ranges.push(ChannelRange { min, max });
        }
        Ok(Normalization {
            lo: NORMALIZED_RANGE.0,
            hi: NORMALIZED_RANGE.1,
            channels: ranges,
        })
    }

    fn apply(&self, m: &mut Matrix, inverse: bool) -> Result<()> {
        let k = self.channels.len();
        if k == 0 || m.cols % k != 0 {
            return Err(Error::shape("data width does not match normalization channels"));
        }
        let len = m.cols / k;
        for r in 0..m.rows {
            let row = m.row_mut(r);
            for (c, range) in self.channels.iter().enumerate() {
                let scale = (self.hi - self.lo) / (range.max - range.min);
                for v in &mut row[c * len..(c + 1) * len] {
                    *v = if inverse {
                        range.min + (*v - self.lo) / scale
                    } else {
                        self.lo + (*v - range.min) * scale
                    };
                }
            }
        }
        Ok(())
    }

    pub fn normalize(&self, m: &mut Matrix) -> Result<()> {
        self.apply(m, false)
    }

    pub fn denormalize(&self, m: &mut Matrix) -> Result<()> {
        self.apply(m, true)
    }
}

/// Normalized training rows plus what is needed to map generated rows back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub dt: f64,
    pub channels: usize,
    pub seq_len: usize,
    /// One normalized sample per row.
    pub data: Matrix,
    pub normalization: Normalization,
}

impl TrainingSet {
    /// `raw` holds one sample per row, channel blocks of `raw.cols / channels`.
    pub fn from_matrix(raw: Matrix, channels: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        let normalization = Normalization::fit(&raw, channels)?;
        let mut data = raw;
        normalization.normalize(&mut data)?;
        Ok(TrainingSet {
            dt,
            channels,
            seq_len: data.cols / channels,
            data,
            normalization,
        })
    }

    /// Magnitude and phase channels of equally long records.
    pub fn from_records(records: &[PmuRecord]) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::Input("empty dataset".into()))?;
        let len = first.len();
        let mut data = Vec::with_capacity(records.len() * 2 * len);
        for (i, r) in records.iter().enumerate() {
            if r.len() != len {
                return Err(Error::shape(alloc::format!(
                    "record {i} has {} steps, expected {len}",
                    r.len()
                )));
            }
            data.extend_from_slice(r.i_mag());
            data.extend_from_slice(r.i_phase());
        }
        let raw = Matrix::from_vec(records.len(), 2 * len, data)?;
        TrainingSet::from_matrix(raw, 2, first.dt())
    }

    pub fn len(&self) -> usize {
        self.data.rows
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows == 0
    }

    pub(crate) fn rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.data.cols);
        for &i in indices {
            data.extend_from_slice(self.data.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.data.cols,
            data,
        }
    }
}

/// De-normalized generator output, one sample per row.
pub fn generate_raw<R: Rng + ?Sized>(checkpoint: &Checkpoint, n: usize, rng: &mut R) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::config("number of samples must be at least 1"));
    }
    let noise = sample_noise(n, checkpoint.generator.noise_dim(), rng);
    let mut out = checkpoint.generator.sample(&noise)?;
    checkpoint.normalization.denormalize(&mut out)?;
    Ok(out)
}

/// Synthetic records from a two-channel (magnitude, phase) checkpoint.
/// Magnitudes are clamped at zero.
pub fn generate<R: Rng + ?Sized>(checkpoint: &Checkpoint, n: usize, rng: &mut R) -> Result<Vec<PmuRecord>> {
    if checkpoint.generator.channels() != 2 {
        return Err(Error::shape("records need a magnitude and a phase head"));
    }
    let raw = generate_raw(checkpoint, n, rng)?;
    let len = checkpoint.generator.seq_len();
    (0..n)
        .map(|r| {
            let row = raw.row(r);
            let mag = row[..len].iter().map(|v| v.max(0.0)).collect();
            PmuRecord::new(checkpoint.dt, mag, row[len..].to_vec(), SourceTag::Synthetic)
        })
        .collect()
}

#[cfg(test)]
mod tests;
