use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_noise, CriticModel, GeneratorModel, Network, Normalization, TrainConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::nn::{
    backward, check_parameters, clip_params, forward, rmsprop_step, ForwardCache, GradCheckOptions,
    GradCheckReport, Matrix, NetworkParameters, OptimizerState,
};

/// Position of a ChaCha8 stream, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Complete training state; training resumed from it continues bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Completed iterations.
    pub iteration: usize,
    pub dt: f64,
    pub normalization: Normalization,
    pub generator: GeneratorModel,
    pub critic: CriticModel,
    /// One optimizer state per generator head.
    pub generator_optimizer: Vec<OptimizerState>,
    pub critic_optimizer: OptimizerState,
    pub rng: RngState,
}

impl Checkpoint {
    /// Freshly initialized models for `data`. Parameters are drawn from the
    /// same stream that training continues on.
    pub fn new(data: &TrainingSet, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let head_spec = config.generator_head_spec(data.seq_len)?;
        let heads = (0..data.channels)
            .map(|_| Network::init(head_spec.clone(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let critic = CriticModel {
            net: Network::init(config.critic_spec(data.channels * data.seq_len)?, &mut rng)?,
        };
        let generator_optimizer = heads.iter().map(|h| OptimizerState::new(&h.params)).collect();
        let critic_optimizer = OptimizerState::new(&critic.net.params);
        Ok(Checkpoint {
            config: config.clone(),
            iteration: 0,
            dt: data.dt,
            normalization: data.normalization.clone(),
            generator: GeneratorModel { heads },
            critic,
            generator_optimizer,
            critic_optimizer,
            rng: RngState::capture(&rng),
        })
    }

    /// Structural consistency, independent of any dataset.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.generator.validate()?;
        self.critic.validate()?;
        if self.iteration > self.config.iterations {
            return Err(Error::config(alloc::format!(
                "checkpoint is at iteration {} beyond the configured {}",
                self.iteration,
                self.config.iterations
            )));
        }
        let channels = self.generator.channels();
        if self.normalization.channels.len() != channels {
            return Err(Error::shape("normalization channels differ from generator heads"));
        }
        if self.critic.input_width() != channels * self.generator.seq_len() {
            return Err(Error::shape("critic input width differs from generator output"));
        }
        if self.generator.noise_dim() != self.config.noise_dim {
            return Err(Error::shape("generator noise width differs from configuration"));
        }
        if self.generator_optimizer.len() != channels {
            return Err(Error::shape("one optimizer state per generator head required"));
        }
        for (opt, head) in self.generator_optimizer.iter().zip(&self.generator.heads) {
            opt.accumulator.check(&head.spec)?;
        }
        self.critic_optimizer.accumulator.check(&self.critic.net.spec)?;
        Ok(())
    }

    pub fn check_compatible(&self, data: &TrainingSet) -> Result<()> {
        self.validate()?;
        if data.channels != self.generator.channels() || data.seq_len != self.generator.seq_len() {
            return Err(Error::shape(alloc::format!(
                "dataset has {} channels of {} steps, models expect {} of {}",
                data.channels,
                data.seq_len,
                self.generator.channels(),
                self.generator.seq_len()
            )));
        }
        if data.len() < self.config.batch_size {
            return Err(Error::config(alloc::format!(
                "dataset has {} samples, fewer than the batch size {}",
                data.len(),
                self.config.batch_size
            )));
        }
        Ok(())
    }
}

/// Critic objective and generator loss per completed iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    /// 1-based iteration number of the first entry.
    pub first_iteration: usize,
    /// Objective of the last critic step in each iteration.
    pub critic: Vec<f64>,
    pub generator: Vec<f64>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.critic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.critic.is_empty()
    }
}

/// Hooks into the training loop. All methods default to no-ops.
pub trait TrainObserver {
    /// Called after each critic update and its clipping.
    fn critic_updated(&mut self, _iteration: usize, _step: usize, _critic: &CriticModel) {}
    /// Called once an iteration has finished.
    fn iteration_done(&mut self, _checkpoint: &Checkpoint, _critic_objective: f64, _generator_loss: f64) {}
}

impl TrainObserver for () {}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `mean D(real) − mean D(fake)`.
pub fn critic_objective(critic: &CriticModel, real: &Matrix, fake: &Matrix) -> Result<f64> {
    if real.rows != fake.rows || real.cols != fake.cols || real.rows == 0 {
        return Err(Error::shape("real and fake batches must have equal nonzero shapes"));
    }
    Ok(mean(&critic.score(real)?) - mean(&critic.score(fake)?))
}

/// `−mean D(fake)`.
pub fn generator_objective(critic: &CriticModel, fake: &Matrix) -> Result<f64> {
    if fake.rows == 0 {
        return Err(Error::shape("empty batch"));
    }
    Ok(-mean(&critic.score(fake)?))
}

/// Objective and gradient of its negation with respect to the critic.
pub(crate) fn critic_gradients(critic: &CriticModel, real: &Matrix, fake: &Matrix) -> Result<(f64, NetworkParameters)> {
    let n = real.rows;
    let batch = real.vstack(fake)?;
    let net = &critic.net;
    let cache = forward(&net.params, &net.spec, &batch)?;
    let scores = &cache.output.data;
    let objective = mean(&scores[..n]) - mean(&scores[n..]);
    let w = 1.0 / n as f64;
    let mut grad_out = Matrix::zeros(2 * n, 1);
    grad_out.data[..n].iter_mut().for_each(|g| *g = -w);
    grad_out.data[n..].iter_mut().for_each(|g| *g = w);
    let (grads, _) = backward(&net.params, &net.spec, &cache, &grad_out)?;
    Ok((objective, grads))
}

pub(crate) struct GeneratorPass {
    heads: Vec<ForwardCache>,
    critic: ForwardCache,
    loss: f64,
}

fn generator_pass(generator: &GeneratorModel, critic: &CriticModel, noise: &Matrix) -> Result<GeneratorPass> {
    let heads = generator
        .heads
        .iter()
        .map(|h| forward(&h.params, &h.spec, noise))
        .collect::<Result<Vec<_>>>()?;
    let mut fake = heads[0].output.clone();
    for h in &heads[1..] {
        fake = fake.hstack(&h.output)?;
    }
    let critic_cache = forward(&critic.net.params, &critic.net.spec, &fake)?;
    let loss = -mean(&critic_cache.output.data);
    Ok(GeneratorPass {
        heads,
        critic: critic_cache,
        loss,
    })
}

/// Loss `−mean D(G(z))` and its gradient for every generator head.
pub(crate) fn generator_gradients(
    generator: &GeneratorModel,
    critic: &CriticModel,
    noise: &Matrix,
) -> Result<(f64, Vec<NetworkParameters>, GeneratorPass)> {
    let pass = generator_pass(generator, critic, noise)?;
    let n = noise.rows;
    let mut grad_out = Matrix::zeros(n, 1);
    grad_out.data.iter_mut().for_each(|g| *g = -1.0 / n as f64);
    let (_, input_grad) = backward(&critic.net.params, &critic.net.spec, &pass.critic, &grad_out)?;
    let len = generator.seq_len();
    let grads = generator
        .heads
        .iter()
        .zip(&pass.heads)
        .enumerate()
        .map(|(c, (head, cache))| {
            let upstream = input_grad.columns(c * len, len);
            Ok(backward(&head.params, &head.spec, cache, &upstream)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pass.loss, grads, pass))
}

fn draw_batch(data: &TrainingSet, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let picked = index::sample(rng, data.len(), n).into_vec();
    data.rows(&picked)
}

/// Advances `state` by one iteration: `critic_steps` critic updates, each on
/// a fresh real batch and fresh noise and followed by clipping, then one
/// generator update. Returns `(critic objective, generator loss)`. On error
/// `state` is left untouched.
pub fn train_iteration<O: TrainObserver + ?Sized>(
    state: &mut Checkpoint,
    data: &TrainingSet,
    observer: &mut O,
) -> Result<(f64, f64)> {
    state.check_compatible(data)?;
    if state.iteration >= state.config.iterations {
        return Err(Error::config(alloc::format!(
            "checkpoint already completed its {} iterations",
            state.config.iterations
        )));
    }
    let mut next = state.clone();
    let losses = advance(&mut next, data, observer)?;
    *state = next;
    observer.iteration_done(state, losses.0, losses.1);
    Ok(losses)
}

fn advance<O: TrainObserver + ?Sized>(
    state: &mut Checkpoint,
    data: &TrainingSet,
    observer: &mut O,
) -> Result<(f64, f64)> {
    let iteration = state.iteration + 1;
    let diverged = Error::TrainingDiverged { iteration };
    let cfg = state.config.clone();
    let mut rng = state.rng.restore();

    let mut objective = 0.0;
    for step in 0..cfg.critic_steps {
        let real = draw_batch(data, cfg.batch_size, &mut rng);
        let noise = sample_noise(cfg.batch_size, cfg.noise_dim, &mut rng);
        let fake = state.generator.sample(&noise)?;
        let (value, grads) = critic_gradients(&state.critic, &real, &fake)?;
        if !value.is_finite() || !grads.is_finite() {
            return Err(diverged);
        }
        objective = value;
        let params = &mut state.critic.net.params;
        rmsprop_step(params, &grads, &mut state.critic_optimizer, cfg.learning_rate)?;
        clip_params(params, cfg.clip)?;
        observer.critic_updated(iteration, step, &state.critic);
    }

    let noise = sample_noise(cfg.batch_size, cfg.noise_dim, &mut rng);
    let (loss, grads, _) = generator_gradients(&state.generator, &state.critic, &noise)?;
    if !loss.is_finite() || !grads.iter().all(NetworkParameters::is_finite) {
        return Err(diverged);
    }
    for ((head, g), opt) in state
        .generator
        .heads
        .iter_mut()
        .zip(&grads)
        .zip(&mut state.generator_optimizer)
    {
        rmsprop_step(&mut head.params, g, opt, cfg.learning_rate)?;
    }
    if !state.generator.heads.iter().all(|h| h.params.is_finite()) {
        return Err(diverged);
    }

    state.rng = RngState::capture(&rng);
    state.iteration = iteration;
    Ok((objective, loss))
}

/// Continues `state` until it reaches `state.config.iterations`.
pub fn train_observed<O: TrainObserver + ?Sized>(
    state: &mut Checkpoint,
    data: &TrainingSet,
    observer: &mut O,
) -> Result<LossHistory> {
    state.check_compatible(data)?;
    let mut history = LossHistory {
        first_iteration: state.iteration + 1,
        ..LossHistory::default()
    };
    while state.iteration < state.config.iterations {
        let (c, g) = train_iteration(state, data, observer)?;
        history.critic.push(c);
        history.generator.push(g);
    }
    Ok(history)
}

/// Trains fresh models for `config.iterations` iterations.
pub fn train(data: &TrainingSet, config: &TrainConfig) -> Result<(Checkpoint, LossHistory)> {
    let mut state = Checkpoint::new(data, config)?;
    let history = train_observed(&mut state, data, &mut ())?;
    Ok((state, history))
}

fn concat_layers(parts: &[&NetworkParameters]) -> NetworkParameters {
    NetworkParameters {
        layers: parts.iter().flat_map(|p| p.layers.iter().cloned()).collect(),
    }
}

/// Finite-difference checks of the critic update and of the generator
/// update back-propagated through the critic. Returns `(critic, generator)`.
pub fn stack_gradient_check(
    generator: &GeneratorModel,
    critic: &CriticModel,
    noise: &Matrix,
    real: &Matrix,
    options: &GradCheckOptions,
) -> Result<(GradCheckReport, GradCheckReport)> {
    generator.validate()?;
    critic.validate()?;
    let fake = generator.sample(noise)?;
    let (_, critic_grads) = critic_gradients(critic, real, &fake)?;
    let batch = real.vstack(&fake)?;
    let spec = &critic.net.spec;
    let critic_report = check_parameters(&critic.net.params, &critic_grads, options, |p| {
        let cache = forward(p, spec, &batch)?;
        let n = real.rows;
        let scores = &cache.output.data;
        Ok((mean(&scores[n..]) - mean(&scores[..n]), cache.relu_mask(spec)))
    })?;

    let (_, head_grads, _) = generator_gradients(generator, critic, noise)?;
    let params = concat_layers(&generator.heads.iter().map(|h| &h.params).collect::<Vec<_>>());
    let analytic = concat_layers(&head_grads.iter().collect::<Vec<_>>());
    let depth = generator.heads[0].spec.num_layers();
    let mut probe = generator.clone();
    let generator_report = check_parameters(&params, &analytic, options, |p| {
        for (head, layers) in probe.heads.iter_mut().zip(p.layers.chunks(depth)) {
            head.params.layers.clone_from_slice(layers);
        }
        let pass = generator_pass(&probe, critic, noise)?;
        let mut mask = Vec::new();
        for (head, cache) in probe.heads.iter().zip(&pass.heads) {
            mask.extend(cache.relu_mask(&head.spec));
        }
        mask.extend(pass.critic.relu_mask(spec));
        Ok((pass.loss, mask))
    })?;
    Ok((critic_report, generator_report))
}
