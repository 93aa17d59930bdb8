use std::path::{Path, PathBuf};
use std::time::Instant;

use pmu_synth_core::ident::{validate_dataset, ValidationReport};
use pmu_synth_core::nn::{
    backward, check_parameters, forward, Activation, GradCheckOptions, GradCheckReport, LossTag, Matrix, NetworkSpec,
};
use pmu_synth_core::signal::{filter_record, FilterSpec};
use pmu_synth_core::sim::{build_dataset, SourceTag, SystemKind};
use pmu_synth_core::wgan::{
    generate, marginal_distances, stack_gradient_check, train_observed, Checkpoint, CriticModel, GeneratorModel,
    Network, TrainObserver, TrainingSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cli::{
    Cli, Command, CriticOutputArg, GenerateArgs, GradcheckArgs, SimulateArgs, SystemArg, TrainArgs,
    WdistArgs,
};
use crate::config::PipelineConfig;
use crate::dataset::{read_dataset, write_dataset, Dataset, DatasetMeta, CHANNELS};
use crate::error::{CliError, CliResult};
use crate::io::{digest_of, read_bytes, read_json, sha256_hex, to_json, write_bytes, write_json, write_series_csv};

pub const DATASET_FILE: &str = "dataset.csv";
pub const SYNTHETIC_FILE: &str = "synthetic.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CRITIC_LOSS_FILE: &str = "loss_critic.csv";
pub const GENERATOR_LOSS_FILE: &str = "loss_generator.csv";
pub const REPORT_FILE: &str = "report.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const WDIST_FILE: &str = "wdist.json";
pub const GRADCHECK_FILE: &str = "gradcheck.json";

/// Largest relative gradient error `gradcheck` accepts.
pub const GRADCHECK_LIMIT: f64 = 1e-4;

/// Configuration after applying the global flags.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub verbose: bool,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> CliResult<Self> {
        let g = &cli.global;
        let mut config = match &g.config {
            Some(path) => read_json::<PipelineConfig>(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = g.seed {
            config.seed = seed;
        }
        if let Some(out) = &g.out {
            config.out = out.clone();
        }
        Ok(Context {
            config,
            verbose: g.verbose,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut ctx = Context::from_cli(cli)?;
    match &cli.command {
        Command::Simulate(args) => {
            apply_simulate_args(&mut ctx.config, args);
            ctx.config.validate()?;
            let path = simulate(&ctx)?;
            println!("wrote {} samples to {}", ctx.config.samples, path.display());
        }
        Command::Train(args) => {
            apply_train_args(&mut ctx.config, args);
            ctx.config.validate()?;
            let ckpt = train(&ctx, &args.data, args.resume.as_deref())?;
            println!(
                "trained {} iterations; checkpoint at {}",
                ckpt.iteration,
                ctx.out(CHECKPOINT_FILE).display()
            );
        }
        Command::Generate(args) => {
            let samples = args.samples.unwrap_or(ctx.config.samples);
            let filter = generate_filter(&mut ctx.config, args);
            ctx.config.validate()?;
            if samples == 0 {
                return Err(CliError::usage("samples must be at least 1"));
            }
            let path = generate_synthetic(&ctx, &args.checkpoint, samples, filter)?;
            println!("wrote {samples} synthetic samples to {}", path.display());
        }
        Command::Validate(args) => {
            if let Some(t) = args.threshold {
                ctx.config.threshold = t;
            }
            ctx.config.validate()?;
            let report = validate(&ctx, &args.data)?;
            println!("realistic_fraction {}", report.realistic_fraction);
        }
        Command::Wdist(args) => {
            let summary = wdist(&ctx, args)?;
            println!("mean {} max {}", summary.mean, summary.max);
        }
        Command::Gradcheck(args) => {
            ctx.config.validate()?;
            gradcheck(&ctx, args)?;
        }
    }
    Ok(())
}

fn apply_simulate_args(cfg: &mut PipelineConfig, args: &SimulateArgs) {
    if let Some(system) = args.system {
        cfg.system = match system {
            SystemArg::Smib => SystemKind::Smib,
            SystemArg::Ninebus => SystemKind::Ninebus,
        };
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
}

/// Everything that determines a simulated corpus.
#[derive(Serialize)]
struct SimulationDigest<'a> {
    system: SystemKind,
    samples: usize,
    simulation: &'a crate::config::SimulationConfig,
    seed: u64,
}

pub fn simulate(ctx: &Context) -> CliResult<PathBuf> {
    let cfg = &ctx.config;
    let dataset_cfg = cfg.simulation.dataset_config()?;
    let start = Instant::now();
    let records = build_dataset(cfg.system, cfg.samples, &dataset_cfg, cfg.seed)?;
    ctx.log(format!("simulated {} samples in {:.1?}", records.len(), start.elapsed()));
    let meta = DatasetMeta {
        dt: dataset_cfg.dt,
        channels: CHANNELS.iter().map(|s| s.to_string()).collect(),
        sample_count: records.len(),
        seq_len: dataset_cfg.seq_len,
        source_tag: SourceTag::Simulated,
        system: Some(cfg.system),
        config_digest: digest_of(&SimulationDigest {
            system: cfg.system,
            samples: cfg.samples,
            simulation: &cfg.simulation,
            seed: cfg.seed,
        })?,
        filter: None,
        seed: cfg.seed,
    };
    let path = ctx.out(DATASET_FILE);
    write_dataset(&path, &Dataset { meta, records })?;
    Ok(path)
}

fn apply_train_args(cfg: &mut PipelineConfig, args: &TrainArgs) {
    let t = &mut cfg.train;
    if let Some(v) = args.iterations {
        t.iterations = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.critic_steps {
        t.critic_steps = v;
    }
    if let Some(v) = args.clip {
        t.clip = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.noise_dim {
        t.noise_dim = v;
    }
    if let Some(v) = args.critic_output {
        t.critic_output = match v {
            CriticOutputArg::Linear => Activation::Linear,
            CriticOutputArg::Sigmoid => Activation::Sigmoid,
        };
    }
}

struct Progress {
    every: usize,
    start: Instant,
}

impl TrainObserver for Progress {
    fn iteration_done(&mut self, ckpt: &Checkpoint, critic: f64, generator: f64) {
        if ckpt.iteration % self.every == 0 {
            eprintln!(
                "iteration {} critic {critic:.6} generator {generator:.6} ({:.1?})",
                ckpt.iteration,
                self.start.elapsed()
            );
        }
    }
}

/// Trains fresh models, or continues `resume` up to the configured iteration
/// count. The master seed seeds fresh training; a resumed run keeps the
/// checkpoint's hyperparameters and random stream.
pub fn train(ctx: &Context, data: &Path, resume: Option<&Path>) -> CliResult<Checkpoint> {
    let dataset = read_dataset(data)?;
    let set = TrainingSet::from_records(&dataset.records)?;
    let target = ctx.config.train.iterations;
    let mut ckpt = match resume {
        Some(path) => {
            let mut ckpt: Checkpoint = read_json(path)?;
            ckpt.validate()?;
            if ckpt.normalization != set.normalization || ckpt.dt != set.dt {
                return Err(CliError::usage(
                    "dataset differs from the one the checkpoint was trained on",
                ));
            }
            if target < ckpt.iteration {
                return Err(CliError::usage(format!(
                    "checkpoint is already at iteration {}, beyond --iterations {target}",
                    ckpt.iteration
                )));
            }
            ckpt.config.iterations = target;
            ckpt
        }
        None => {
            let mut cfg = ctx.config.train.clone();
            cfg.seed = ctx.config.seed;
            Checkpoint::new(&set, &cfg)?
        }
    };
    let history = if ctx.verbose {
        let mut progress = Progress {
            every: 100,
            start: Instant::now(),
        };
        train_observed(&mut ckpt, &set, &mut progress)?
    } else {
        train_observed(&mut ckpt, &set, &mut ())?
    };
    write_json(&ctx.out(CHECKPOINT_FILE), &ckpt)?;
    write_series_csv(&ctx.out(CRITIC_LOSS_FILE), history.first_iteration, &history.critic)?;
    write_series_csv(&ctx.out(GENERATOR_LOSS_FILE), history.first_iteration, &history.generator)?;
    Ok(ckpt)
}

fn generate_filter(cfg: &mut PipelineConfig, args: &GenerateArgs) -> Option<FilterSpec> {
    if let Some(c) = args.filter_cutoff {
        cfg.filter.cutoff_hz = c;
    }
    if let Some(o) = args.filter_order {
        cfg.filter.order = o;
    }
    (!args.no_filter).then_some(cfg.filter)
}

pub fn generate_synthetic(
    ctx: &Context,
    checkpoint: &Path,
    samples: usize,
    filter: Option<FilterSpec>,
) -> CliResult<PathBuf> {
    let bytes = read_bytes(checkpoint)?;
    let ckpt: Checkpoint = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::usage(format!("{}: {e}", checkpoint.display())))?;
    ckpt.validate()?;
    let filter = filter.map(|f| FilterSpec {
        sample_rate_hz: 1.0 / ckpt.dt,
        ..f
    });
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    let mut records = generate(&ckpt, samples, &mut rng)?;
    if let Some(spec) = &filter {
        records = records
            .iter()
            .map(|r| filter_record(r, spec))
            .collect::<Result<_, _>>()?;
    }
    let meta = DatasetMeta {
        dt: ckpt.dt,
        channels: CHANNELS.iter().map(|s| s.to_string()).collect(),
        sample_count: samples,
        seq_len: ckpt.generator.seq_len(),
        source_tag: SourceTag::Synthetic,
        system: None,
        config_digest: sha256_hex(&bytes),
        filter,
        seed: ctx.config.seed,
    };
    let path = ctx.out(SYNTHETIC_FILE);
    write_dataset(&path, &Dataset { meta, records })?;
    Ok(path)
}

pub fn validate(ctx: &Context, data: &Path) -> CliResult<ValidationReport> {
    let dataset = read_dataset(data)?;
    let start = Instant::now();
    let report = validate_dataset(&dataset.records, &ctx.config.simulation.circuit, ctx.config.threshold)?;
    ctx.log(format!("validated {} samples in {:.1?}", report.total, start.elapsed()));
    write_json(&ctx.out(REPORT_FILE), &report)?;
    let mut csv = String::from("bin_lower,bin_upper,count\n");
    let h = &report.histogram;
    for (i, count) in h.counts.iter().enumerate() {
        csv.push_str(&format!("{},{},{count}\n", h.edges[i], h.edges[i + 1]));
    }
    write_bytes(&ctx.out(HISTOGRAM_FILE), csv.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdistSummary {
    pub mean: f64,
    pub max: f64,
    /// Per-step distances of the magnitude channel.
    pub i_mag_pu: Vec<f64>,
    pub i_phase_rad: Vec<f64>,
}

pub fn wdist(ctx: &Context, args: &WdistArgs) -> CliResult<WdistSummary> {
    let a = read_dataset(&args.a)?;
    let b = read_dataset(&args.b)?;
    let d = marginal_distances(&a.records, &b.records)?;
    let summary = WdistSummary {
        mean: d.mean(),
        max: d.max(),
        i_mag_pu: d.magnitude,
        i_phase_rad: d.phase,
    };
    write_json(&ctx.out(WDIST_FILE), &summary)?;
    Ok(summary)
}

/// Networks checked by `gradcheck`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSpec {
    pub generator_head: NetworkSpec,
    pub critic: NetworkSpec,
    #[serde(default = "default_gradcheck_batch")]
    pub batch_size: usize,
}

fn default_gradcheck_batch() -> usize {
    8
}

impl GradcheckSpec {
    pub fn from_config(cfg: &PipelineConfig) -> CliResult<Self> {
        let len = cfg.simulation.seq_len;
        Ok(GradcheckSpec {
            generator_head: cfg.train.generator_head_spec(len)?,
            critic: cfg.train.critic_spec(2 * len)?,
            batch_size: default_gradcheck_batch(),
        })
    }

    fn channels(&self) -> CliResult<usize> {
        let head_out = self.generator_head.output_size();
        let width = self.critic.input_size();
        if head_out == 0 || width % head_out != 0 || self.critic.output_size() != 1 || self.batch_size == 0 {
            return Err(CliError::usage(
                "critic input must be a whole number of generator outputs, with a scalar critic output",
            ));
        }
        Ok(width / head_out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    pub layer: usize,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkResult {
    pub name: String,
    pub max_rel_error: f64,
    pub layers: Vec<LayerResult>,
}

impl NetworkResult {
    fn from_report(name: &str, r: &GradCheckReport) -> Self {
        NetworkResult {
            name: name.to_string(),
            max_rel_error: r.max_rel_error,
            layers: r
                .layers
                .iter()
                .map(|l| LayerResult {
                    layer: l.layer,
                    checked: l.checked,
                    skipped: l.skipped,
                    max_rel_error: l.max_rel_error,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub epsilon: f64,
    pub limit: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub networks: Vec<NetworkResult>,
}

/// Runs the critic check and the generator-through-critic check on freshly
/// initialized networks.
pub fn run_gradcheck(spec: &GradcheckSpec, seed: u64, corrupt: bool) -> CliResult<GradcheckReport> {
    let channels = spec.channels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads = (0..channels)
        .map(|_| Network::init(spec.generator_head.clone(), &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let generator = GeneratorModel { heads };
    let critic = CriticModel {
        net: Network::init(spec.critic.clone(), &mut rng)?,
    };
    let n = spec.batch_size;
    let noise = pmu_synth_core::wgan::sample_noise(n, spec.generator_head.input_size(), &mut rng);
    let width = spec.critic.input_size();
    let real = Matrix::from_vec(n, width, (0..n * width).map(|_| rng.gen_range(0.05..0.95)).collect())?;
    let options = GradCheckOptions::default();

    // Critic alone, through the public backward pass so a corrupted gradient
    // can be injected.
    let batch = real.vstack(&generator.sample(&noise)?)?;
    let weights: Vec<f64> = (0..2 * n).map(|r| if r < n { -1.0 } else { 1.0 } / n as f64).collect();
    let loss = LossTag::RowWeighted(weights);
    let net = &critic.net;
    let cache = forward(&net.params, &net.spec, &batch)?;
    let (_, grad_out) = loss.evaluate(&cache.output)?;
    let (mut analytic, _) = backward(&net.params, &net.spec, &cache, &grad_out)?;
    if corrupt {
        analytic.values_mut().for_each(|g| *g *= 1.01);
    }
    let critic_report = check_parameters(&net.params, &analytic, &options, |p| {
        let c = forward(p, &net.spec, &batch)?;
        Ok((loss.evaluate(&c.output)?.0, c.relu_mask(&net.spec)))
    })?;

    let (_, stack_report) = stack_gradient_check(&generator, &critic, &noise, &real, &options)?;
    let networks = vec![
        NetworkResult::from_report("critic", &critic_report),
        NetworkResult::from_report("generator", &stack_report),
    ];
    let max_rel_error = networks.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        epsilon: options.epsilon,
        limit: GRADCHECK_LIMIT,
        max_rel_error,
        passed: max_rel_error < GRADCHECK_LIMIT,
        networks,
    })
}

pub fn gradcheck(ctx: &Context, args: &GradcheckArgs) -> CliResult<GradcheckReport> {
    let spec = match &args.spec {
        Some(path) => read_json::<GradcheckSpec>(path)?,
        None => GradcheckSpec::from_config(&ctx.config)?,
    };
    spec.generator_head.validate()?;
    spec.critic.validate()?;
    let start = Instant::now();
    let report = run_gradcheck(&spec, ctx.config.seed, args.corrupt_backward)?;
    ctx.log(format!("gradient check took {:.1?}", start.elapsed()));
    for net in &report.networks {
        for l in &net.layers {
            println!(
                "{} layer {} checked {} skipped {} max_rel_error {:e}",
                net.name, l.layer, l.checked, l.skipped, l.max_rel_error
            );
        }
    }
    println!("max_rel_error {:e}", report.max_rel_error);
    write_bytes(&ctx.out(GRADCHECK_FILE), to_json(&report)?.as_bytes())?;
    if !report.passed {
        return Err(CliError::runtime(format!(
            "gradient check failed: max relative error {:e} >= {GRADCHECK_LIMIT:e}",
            report.max_rel_error
        )));
    }
    Ok(report)
}
