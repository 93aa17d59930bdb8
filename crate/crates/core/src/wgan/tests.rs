use super::*;
use crate::nn::{GradCheckOptions, Layer};
use crate::sim::{build_dataset, DatasetConfig, SystemKind};
use alloc::vec;
use proptest::prelude::*;
use rand::SeedableRng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_config() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        iterations: 10,
        noise_dim: 4,
        seed: 11,
        generator_hidden: vec![6, 5],
        critic_hidden: vec![7, 4],
        ..TrainConfig::default()
    }
}

fn small_set(seed: u64) -> TrainingSet {
    let mut r = rng(seed);
    let raw = sample_noise(24, 2 * 6, &mut r);
    TrainingSet::from_matrix(raw, 2, 0.1).unwrap()
}

/// Critic whose last layer is all zeros except the bias.
fn constant_critic(width: usize, value: f64) -> CriticModel {
    let cfg = small_config();
    let mut net = Network::init(cfg.critic_spec(width).unwrap(), &mut rng(1)).unwrap();
    let last = net.params.layers.last_mut().unwrap();
    last.weights.iter_mut().for_each(|w| *w = 0.0);
    last.bias[0] = value;
    CriticModel { net }
}

fn linear_critic(w: &[f64], b: f64) -> CriticModel {
    let spec = NetworkSpec::relu_stack(vec![w.len(), 1], Activation::Linear).unwrap();
    let params = NetworkParameters {
        layers: vec![Layer {
            rows: 1,
            cols: w.len(),
            weights: w.to_vec(),
            bias: vec![b],
        }],
    };
    CriticModel {
        net: Network::new(spec, params).unwrap(),
    }
}

#[test]
fn default_config_matches_documented_values() {
    let c = TrainConfig::default();
    assert_eq!((c.batch_size, c.critic_steps, c.iterations, c.noise_dim), (64, 5, 20_000, 32));
    assert_eq!((c.clip, c.learning_rate), (0.01, 1e-4));
    assert_eq!(c.critic_output, Activation::Linear);
    assert_eq!(c.generator_head_spec(200).unwrap().layer_sizes, vec![32, 64, 128, 200]);
    assert_eq!(c.critic_spec(400).unwrap().layer_sizes, vec![400, 128, 64, 1]);
    c.validate().unwrap();
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { critic_steps: 0, ..TrainConfig::default() },
        TrainConfig { clip: 0.0, ..TrainConfig::default() },
        TrainConfig { learning_rate: -1e-4, ..TrainConfig::default() },
        TrainConfig { iterations: 0, ..TrainConfig::default() },
        TrainConfig { noise_dim: 0, ..TrainConfig::default() },
        TrainConfig { critic_output: Activation::Relu, ..TrainConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn noise_is_deterministic_per_seed() {
    assert_eq!(sample_noise(5, 3, &mut rng(4)), sample_noise(5, 3, &mut rng(4)));
    assert_ne!(sample_noise(5, 3, &mut rng(4)), sample_noise(5, 3, &mut rng(5)));
    let one = sample_noise(1, 1, &mut rng(0));
    assert_eq!(one.data.len(), 1);
    assert!(one.data[0].is_finite());
}

#[test]
fn noise_moments_are_standard_normal() {
    let m = sample_noise(1000, 100, &mut rng(9));
    let n = m.data.len() as f64;
    let mean = m.data.iter().sum::<f64>() / n;
    let var = m.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.02, "{mean}");
    assert!((var - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn constant_critic_has_zero_objective() {
    let critic = constant_critic(12, 0.37);
    let a = sample_noise(8, 12, &mut rng(1));
    let b = sample_noise(8, 12, &mut rng(2));
    assert_eq!(critic_objective(&critic, &a, &b).unwrap(), 0.0);
}

#[test]
fn identical_batches_have_zero_objective() {
    let critic = CriticModel {
        net: Network::init(small_config().critic_spec(12).unwrap(), &mut rng(3)).unwrap(),
    };
    let a = sample_noise(8, 12, &mut rng(4));
    assert_eq!(critic_objective(&critic, &a, &a).unwrap(), 0.0);
}

#[test]
fn linear_critic_objective_is_projection_of_mean_difference() {
    let w = [0.5, -1.25, 2.0];
    let critic = linear_critic(&w, 0.3);
    let real = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap();
    let fake = Matrix::from_vec(2, 3, vec![0.0, 1.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
    // mean(real) = (0, 1, 3.5), mean(fake) = (1, 1.5, 1.5)
    let expected = 0.5 * -1.0 + -1.25 * -0.5 + 2.0 * 2.0;
    let got = critic_objective(&critic, &real, &fake).unwrap();
    assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
}

#[test]
fn objective_shape_mismatch_is_an_error() {
    let critic = linear_critic(&[1.0, 1.0], 0.0);
    let a = Matrix::zeros(3, 2);
    let b = Matrix::zeros(2, 2);
    assert!(matches!(critic_objective(&critic, &a, &b), Err(Error::Shape(_))));
    let wide = Matrix::zeros(3, 5);
    assert!(matches!(generator_objective(&critic, &wide), Err(Error::Shape(_))));
}

#[test]
fn zero_critic_gives_zero_generator_loss_and_gradients() {
    let data = small_set(1);
    let mut ckpt = Checkpoint::new(&data, &small_config()).unwrap();
    ckpt.critic = constant_critic(12, 0.0);
    let noise = sample_noise(8, 4, &mut rng(6));
    let fake = ckpt.generator.sample(&noise).unwrap();
    assert_eq!(generator_objective(&ckpt.critic, &fake).unwrap(), 0.0);
    let (loss, grads, _) = train::generator_gradients(&ckpt.generator, &ckpt.critic, &noise).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.iter().all(|g| g.values().all(|v| *v == 0.0)));
}

#[test]
fn generator_objective_is_invariant_to_duplication() {
    let critic = CriticModel {
        net: Network::init(small_config().critic_spec(12).unwrap(), &mut rng(7)).unwrap(),
    };
    let fake = sample_noise(5, 12, &mut rng(8));
    let doubled = fake.vstack(&fake).unwrap();
    let a = generator_objective(&critic, &fake).unwrap();
    let b = generator_objective(&critic, &doubled).unwrap();
    assert!((a - b).abs() < 1e-15);
}

#[test]
fn tiny_stack_gradients_match_finite_differences() {
    let data = small_set(2);
    let mut cfg = small_config();
    cfg.clip = 10.0;
    let ckpt = Checkpoint::new(&data, &cfg).unwrap();
    let noise = sample_noise(6, 4, &mut rng(12));
    let real = data.rows(&[0, 3, 5, 7, 9, 11]);
    let (c, g) =
        stack_gradient_check(&ckpt.generator, &ckpt.critic, &noise, &real, &GradCheckOptions::default()).unwrap();
    assert!(c.max_rel_error < 1e-5, "{c:?}");
    assert!(g.max_rel_error < 1e-5, "{g:?}");
    assert_eq!(g.layers.len(), 6);
    assert!(g.layers.iter().all(|l| l.checked > 0));
}

#[test]
fn sigmoid_critic_stack_gradients_match() {
    let data = small_set(3);
    let cfg = TrainConfig {
        critic_output: Activation::Sigmoid,
        ..small_config()
    };
    let ckpt = Checkpoint::new(&data, &cfg).unwrap();
    let noise = sample_noise(6, 4, &mut rng(13));
    let real = data.rows(&[1, 2, 4, 6, 8, 10]);
    let (c, g) =
        stack_gradient_check(&ckpt.generator, &ckpt.critic, &noise, &real, &GradCheckOptions::default()).unwrap();
    assert!(c.max_rel_error < 1e-5 && g.max_rel_error < 1e-5, "{c:?} {g:?}");
}

struct ClipAudit {
    clip: f64,
    updates: usize,
    violations: usize,
    per_iteration: Vec<(usize, usize)>,
}

impl TrainObserver for ClipAudit {
    fn critic_updated(&mut self, iteration: usize, step: usize, critic: &CriticModel) {
        self.updates += 1;
        self.per_iteration.push((iteration, step));
        if critic.net.params.values().any(|v| v.abs() > self.clip) {
            self.violations += 1;
        }
    }
}

#[test]
fn every_critic_update_respects_the_clip() {
    let data = small_set(4);
    let cfg = TrainConfig {
        iterations: 20,
        ..small_config()
    };
    let mut ckpt = Checkpoint::new(&data, &cfg).unwrap();
    let mut audit = ClipAudit {
        clip: cfg.clip,
        updates: 0,
        violations: 0,
        per_iteration: Vec::new(),
    };
    let history = train_observed(&mut ckpt, &data, &mut audit).unwrap();
    assert_eq!(audit.updates, 20 * cfg.critic_steps);
    assert_eq!(audit.violations, 0);
    assert_eq!(history.len(), 20);
    assert_eq!(history.first_iteration, 1);
}

#[test]
fn one_iteration_applies_k_critic_updates_and_one_generator_update() {
    let data = small_set(5);
    let cfg = TrainConfig {
        iterations: 1,
        ..small_config()
    };
    let start = Checkpoint::new(&data, &cfg).unwrap();
    let mut ckpt = start.clone();
    let mut audit = ClipAudit {
        clip: cfg.clip,
        updates: 0,
        violations: 0,
        per_iteration: Vec::new(),
    };
    let history = train_observed(&mut ckpt, &data, &mut audit).unwrap();
    assert_eq!(audit.per_iteration, vec![(1, 0), (1, 1), (1, 2), (1, 3), (1, 4)]);
    assert_eq!(history.len(), 1);
    assert_eq!(ckpt.iteration, 1);
    assert_ne!(ckpt.generator, start.generator);
    // One RMSProp step from a zero accumulator moves each weight by at most lr/sqrt(1-ρ).
    let bound = cfg.learning_rate / (1.0 - crate::nn::RMSPROP_DECAY).sqrt() * (1.0 + 1e-9);
    for (a, b) in ckpt.generator.heads.iter().zip(&start.generator.heads) {
        for (x, y) in a.params.values().zip(b.params.values()) {
            assert!((x - y).abs() <= bound);
        }
    }
}

#[test]
fn iterations_are_deterministic() {
    let data = small_set(6);
    let cfg = small_config();
    let (a, ha) = train(&data, &cfg).unwrap();
    let (b, hb) = train(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let other = TrainConfig { seed: 12, ..cfg };
    assert_ne!(train(&data, &other).unwrap().0, a);
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let data = small_set(7);
    let cfg = small_config();
    let (full, full_hist) = train(&data, &cfg).unwrap();
    let (mut part, first) = train(&data, &TrainConfig { iterations: 4, ..cfg.clone() }).unwrap();
    part.config.iterations = cfg.iterations;
    let rest = train_observed(&mut part, &data, &mut ()).unwrap();
    assert_eq!(part, full);
    assert_eq!(rest.first_iteration, 5);
    let mut joined = first.critic.clone();
    joined.extend(&rest.critic);
    assert_eq!(joined, full_hist.critic);
}

#[test]
fn batch_larger_than_dataset_is_rejected() {
    let data = small_set(8);
    let cfg = TrainConfig {
        batch_size: 25,
        ..small_config()
    };
    assert!(matches!(train(&data, &cfg), Err(Error::Config(_))));
}

#[test]
fn nonfinite_loss_reports_iteration_and_keeps_state() {
    let mut data = small_set(9);
    let mut ckpt = Checkpoint::new(&data, &small_config()).unwrap();
    train_iteration(&mut ckpt, &data, &mut ()).unwrap();
    data.data.data.iter_mut().for_each(|v| *v = f64::INFINITY);
    let before = ckpt.clone();
    let err = train_iteration(&mut ckpt, &data, &mut ()).unwrap_err();
    assert_eq!(err, Error::TrainingDiverged { iteration: 2 });
    assert_eq!(ckpt, before);
}

#[test]
fn finished_checkpoint_does_not_advance() {
    let data = small_set(9);
    let (mut ckpt, _) = train(&data, &TrainConfig { iterations: 2, ..small_config() }).unwrap();
    assert!(matches!(train_iteration(&mut ckpt, &data, &mut ()), Err(Error::Config(_))));
    assert!(train_observed(&mut ckpt, &data, &mut ()).unwrap().is_empty());
}

#[test]
fn nonfinite_checkpoint_is_rejected() {
    let data = small_set(9);
    let mut ckpt = Checkpoint::new(&data, &small_config()).unwrap();
    ckpt.generator.heads[0].params.layers[0].bias[0] = f64::NAN;
    assert!(matches!(train_iteration(&mut ckpt, &data, &mut ()), Err(Error::Input(_))));
}

#[test]
fn normalization_round_trips() {
    let raw = sample_noise(10, 8, &mut rng(14));
    let set = TrainingSet::from_matrix(raw.clone(), 2, 0.5).unwrap();
    let lo = set.data.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = set.data.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((lo - 0.05).abs() < 1e-12 && (hi - 0.95).abs() < 1e-12);
    let mut back = set.data.clone();
    set.normalization.denormalize(&mut back).unwrap();
    for (a, b) in back.data.iter().zip(&raw.data) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn flat_channel_cannot_be_normalized() {
    let mut raw = sample_noise(4, 6, &mut rng(15));
    for r in 0..4 {
        raw.row_mut(r)[3..].iter_mut().for_each(|v| *v = 2.0);
    }
    assert_eq!(TrainingSet::from_matrix(raw, 2, 0.1).unwrap_err(), Error::UndefinedNormalization);
}

#[test]
fn generated_records_are_synthetic_and_deterministic() {
    let records = build_dataset(SystemKind::Smib, 12, &DatasetConfig::default(), 3).unwrap();
    let data = TrainingSet::from_records(&records).unwrap();
    assert_eq!((data.channels, data.seq_len), (2, 200));
    let cfg = TrainConfig {
        iterations: 2,
        ..small_config()
    };
    let (ckpt, _) = train(&data, &cfg).unwrap();
    let a = generate(&ckpt, 7, &mut rng(21)).unwrap();
    let b = generate(&ckpt, 7, &mut rng(21)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 7);
    for r in &a {
        assert_eq!(r.len(), 200);
        assert_eq!(r.source(), SourceTag::Synthetic);
        assert!(r.i_mag().iter().all(|&m| m >= 0.0));
        assert_eq!(r.dt(), 1.0 / 60.0);
    }
}

#[test]
fn generated_values_stay_inside_the_denormalized_band() {
    let data = small_set(10);
    let (ckpt, _) = train(&data, &TrainConfig { iterations: 1, ..small_config() }).unwrap();
    let out = generate_raw(&ckpt, 50, &mut rng(1)).unwrap();
    for (c, range) in ckpt.normalization.channels.iter().enumerate() {
        let width = range.max - range.min;
        let lo = range.min - 0.05 / 0.9 * width;
        let hi = range.max + 0.05 / 0.9 * width;
        for r in 0..50 {
            for &v in &out.row(r)[c * 6..(c + 1) * 6] {
                assert!(v > lo && v < hi);
            }
        }
    }
}

#[test]
fn checkpoint_validation_catches_inconsistency() {
    let data = small_set(11);
    let mut ckpt = Checkpoint::new(&data, &small_config()).unwrap();
    ckpt.validate().unwrap();
    ckpt.iteration = 11;
    assert!(ckpt.validate().is_err());
    ckpt.iteration = 0;
    ckpt.generator_optimizer.pop();
    assert!(ckpt.validate().is_err());
}

#[test]
fn rng_state_round_trips() {
    use rand::RngCore;
    let mut r = rng(77);
    for _ in 0..13 {
        r.next_u32();
    }
    let state = RngState::capture(&r);
    let mut restored = state.restore();
    assert_eq!(r.next_u64(), restored.next_u64());
}

#[test]
fn wasserstein_examples() {
    assert_eq!(wasserstein_1d(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(wasserstein_1d(&[2.5], &[-1.0]).unwrap(), 3.5);
    assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.5, 1.5]).unwrap(), 0.5);
    assert!(matches!(wasserstein_1d(&[1.0], &[1.0, 2.0]), Err(Error::Input(_))));
    assert!(matches!(wasserstein_1d(&[], &[]), Err(Error::Input(_))));
}

/// Minimum over all pairings of the mean absolute difference.
fn brute_force(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &mut Vec<f64>, acc: f64, best: &mut f64) {
        if a.is_empty() {
            *best = best.min(acc);
            return;
        }
        for i in 0..b.len() {
            let v = b.swap_remove(i);
            go(&a[1..], b, acc + (a[0] - v).abs(), best);
            b.push(v);
            let last = b.len() - 1;
            b.swap(i, last);
        }
    }
    let mut best = f64::INFINITY;
    go(a, &mut b.to_vec(), 0.0, &mut best);
    best / a.len() as f64
}

proptest! {
    #[test]
    fn wasserstein_matches_exhaustive_pairing(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..7)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let fast = wasserstein_1d(&a, &b).unwrap();
        prop_assert!((fast - brute_force(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_is_a_metric(
        triples in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..20)
    ) {
        let a: Vec<f64> = triples.iter().map(|t| t.0).collect();
        let b: Vec<f64> = triples.iter().map(|t| t.1).collect();
        let c: Vec<f64> = triples.iter().map(|t| t.2).collect();
        let ab = wasserstein_1d(&a, &b).unwrap();
        prop_assert_eq!(ab, wasserstein_1d(&b, &a).unwrap());
        prop_assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        let ac = wasserstein_1d(&a, &c).unwrap();
        let cb = wasserstein_1d(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn critic_objective_vanishes_on_equal_batches(seed in 0u64..200, rows in 1usize..6) {
        let critic = CriticModel {
            net: Network::init(small_config().critic_spec(5).unwrap(), &mut rng(seed)).unwrap(),
        };
        let a = sample_noise(rows, 5, &mut rng(seed + 1));
        prop_assert_eq!(critic_objective(&critic, &a, &a).unwrap(), 0.0);
    }
}

#[test]
fn marginals_of_a_shifted_channel() {
    let a = build_dataset(SystemKind::Smib, 5, &DatasetConfig::default(), 1).unwrap();
    let b: Vec<PmuRecord> = a
        .iter()
        .map(|r| {
            let phase = r.i_phase().iter().map(|p| p + 0.5).collect();
            PmuRecord::new(r.dt(), r.i_mag().to_vec(), phase, r.source()).unwrap()
        })
        .collect();
    let same = marginal_distances(&a, &a).unwrap();
    assert_eq!((same.mean(), same.max()), (0.0, 0.0));
    let shifted = marginal_distances(&a, &b).unwrap();
    assert!(shifted.magnitude.iter().all(|&d| d == 0.0));
    assert!(shifted.phase.iter().all(|&d| (d - 0.5).abs() < 1e-12));
    assert!(marginal_distances(&a, &b[..4]).is_err());
}

