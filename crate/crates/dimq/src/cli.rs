//! The `dimq` command line: dataset generation, tabular verification,
//! training, evaluation, ablations, and gradient checking.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
//! 3 verification-suite failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConservatismMode, RunConfig};
use crate::data::{
    filter_successes, generate_mixed_dataset, read_dataset, write_dataset, NoiseSpec,
};
use crate::env::{grid_pick_action_spec, OBS_DIM};
use crate::error::{Error, Result};
use crate::model::{
    grad_check, read_checkpoint, write_checkpoint, ModelShape, ParamVector, SeqQModel,
};
use crate::tabular::verify::{consistency_suite, contraction_suite, fixed_point_suite};
use crate::train::{
    bc_baseline_train, default_cells, evaluate, full_matrix_cells, render_ablation_table,
    render_metrics, run_ablation_matrix, train_offline, TrainOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dimq",
    about = "Offline Q-learning with per-dimension discrete actions",
    after_help = "RAYON_NUM_THREADS controls the worker thread count; results do not depend on it."
)]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConservatismArg {
    Paper,
    Softmax,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

impl From<OptimizerArg> for crate::config::Optimizer {
    fn from(a: OptimizerArg) -> Self {
        match a {
            OptimizerArg::Sgd => crate::config::Optimizer::Sgd,
            OptimizerArg::Adam => crate::config::Optimizer::Adam,
        }
    }
}

impl From<ConservatismArg> for ConservatismMode {
    fn from(a: ConservatismArg) -> Self {
        match a {
            ConservatismArg::Paper => ConservatismMode::Paper,
            ConservatismArg::Softmax => ConservatismMode::Softmax,
            ConservatismArg::None => ConservatismMode::None,
        }
    }
}

/// Flag-level overrides of the run configuration.
#[derive(Debug, Default, Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grad_steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    ema_rate: Option<f64>,
    #[arg(long, value_enum)]
    conservatism: Option<ConservatismArg>,
    /// Enable/disable the Monte-Carlo return maximization.
    #[arg(long)]
    mc_max: Option<bool>,
    /// Enable/disable n-step bootstrapping.
    #[arg(long)]
    n_step: Option<bool>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    metrics_every: Option<usize>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

impl Overrides {
    fn apply(&self, run: &mut RunConfig) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(run.train.seed, self.seed);
        set!(run.train.grad_steps, self.grad_steps);
        set!(run.train.batch_size, self.batch_size);
        set!(run.train.learning_rate, self.learning_rate);
        set!(run.train.optimizer, self.optimizer.map(Into::into));
        set!(run.train.momentum, self.momentum);
        set!(run.train.gamma, self.gamma);
        set!(run.train.alpha, self.alpha);
        set!(run.train.window_w, self.window);
        set!(run.train.ema_rate, self.ema_rate);
        set!(run.train.conservatism_mode, self.conservatism.map(Into::into));
        set!(run.train.use_mc_max, self.mc_max);
        set!(run.train.use_n_step, self.n_step);
        set!(run.model.width, self.width);
        set!(run.model.blocks, self.blocks);
        set!(run.harness.eval_every, self.eval_every);
        set!(run.harness.eval_episodes, self.eval_episodes);
        set!(run.harness.metrics_every, self.metrics_every);
        set!(run.env.grid_size, self.grid_size);
        set!(run.env.horizon, self.horizon);
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a mixed demonstration/noisy-replay dataset.
    GenData {
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        demo_fraction: Option<f64>,
        /// Per-dimension bin flip probability for replays.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        data_seed: Option<u64>,
        /// Drop successful replay episodes (keeps every demonstration).
        #[arg(long)]
        filter_successes: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the consistency / contraction / fixed-point oracle suites.
    VerifyTabular {
        /// Consistency trials; contraction runs 20x and fixed-point
        /// max(trials/2, 20) instances.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Test hook: within-timestep discount used by the consistency
        /// suite; anything but 1.0 is a deliberate mutation.
        #[arg(long, hide = true, default_value_t = 1.0)]
        intra_discount: f64,
    },
    /// Train the sequence Q-model on a dataset file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Keep successful replay episodes instead of filtering them.
        #[arg(long)]
        keep_replay_successes: bool,
        /// Also write checkpoint_step<N>.txt every this many steps.
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Behavior-cloning baseline on the dataset's successful episodes.
    TrainBc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Greedy-rollout evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        eval_seed: Option<u64>,
        /// Write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every ablation cell over several seeds and tabulate.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of seeds (0, 1, 2, ...).
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        /// Run the raw conservatism x mc x n-step cross product.
        #[arg(long)]
        full_matrix: bool,
        #[arg(long)]
        keep_replay_successes: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Finite-difference check of the loss gradients.
    GradCheck {
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Parameters probed per seed on the full model.
        #[arg(long, default_value_t = 300)]
        subset: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            RunConfig::from_toml(&text)
        }
        None => Ok(RunConfig::default()),
    }
}

fn provenance(run: &RunConfig, extra: &[String]) -> Vec<String> {
    let mut lines: Vec<String> = extra.to_vec();
    lines.push("resolved config:".to_string());
    for line in run.to_toml().lines() {
        lines.push(format!("  {line}"));
    }
    lines
}

fn options_of(run: &RunConfig) -> TrainOptions {
    TrainOptions {
        train: run.train.clone(),
        model: run.model.clone(),
        env: run.env,
        harness: run.harness,
    }
}

fn load_training_dataset(path: &Path, keep_replay_successes: bool) -> Result<crate::OfflineDataset> {
    let dataset = read_dataset(path)?;
    if keep_replay_successes || dataset.origins().is_none() {
        return Ok(dataset);
    }
    let filtered = filter_successes(&dataset)?;
    if filtered.episodes.len() != dataset.episodes.len() {
        eprintln!(
            "filtered {} successful replay episodes ({} remain)",
            dataset.episodes.len() - filtered.episodes.len(),
            filtered.episodes.len()
        );
    }
    Ok(filtered)
}

fn cmd_gen_data(
    run: &mut RunConfig,
    episodes: Option<usize>,
    demo_fraction: Option<f64>,
    noise: Option<f64>,
    data_seed: Option<u64>,
    filter: bool,
    out: &Path,
) -> Result<()> {
    if let Some(v) = episodes {
        run.data.episodes = v;
    }
    if let Some(v) = demo_fraction {
        run.data.demo_fraction = v;
    }
    if let Some(v) = noise {
        run.data.noise = v;
    }
    if let Some(v) = data_seed {
        run.data.seed = v;
    }
    run.validate()?;
    let dataset = generate_mixed_dataset(
        run.env,
        run.data.episodes,
        run.data.demo_fraction,
        NoiseSpec {
            per_dim_flip_prob: run.data.noise,
        },
        run.train.gamma,
        run.data.seed,
    )?;
    let origins = dataset.origins().expect("generator tags origins");
    let demo_total = origins.iter().filter(|&&o| o == 'd').count();
    let replay_total = origins.len() - demo_total;
    let replay_successes = dataset
        .episodes
        .iter()
        .zip(&origins)
        .filter(|(e, &o)| o == 'r' && e.is_success())
        .count();
    let final_dataset = if filter || run.data.filter_successes {
        filter_successes(&dataset)?
    } else {
        dataset
    };
    write_dataset(&final_dataset, out)?;
    println!(
        "wrote {} episodes to {} ({} demos all successful, {} replays of which {} successful{})",
        final_dataset.episodes.len(),
        out.display(),
        demo_total,
        replay_total,
        replay_successes,
        if filter || run.data.filter_successes {
            ", successful replays dropped"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_verify_tabular(trials: usize, seed: u64, intra_discount: f64) -> Result<bool> {
    if trials == 0 {
        println!("warning: --trials 0, all suites vacuously pass");
        return Ok(true);
    }
    let reports = [
        consistency_suite(trials, seed, intra_discount)?,
        contraction_suite(trials * 20, seed)?,
        fixed_point_suite((trials / 2).max(20), seed)?,
    ];
    let mut all_pass = true;
    for report in &reports {
        println!("{}", report.summary());
        all_pass &= report.passed();
    }
    Ok(all_pass)
}

fn cmd_train(
    run: &RunConfig,
    data: &Path,
    out_dir: &Path,
    keep_replay_successes: bool,
    checkpoint_every: Option<usize>,
) -> Result<()> {
    let dataset = load_training_dataset(data, keep_replay_successes)?;
    fs::create_dir_all(out_dir)?;
    let opts = options_of(run);

    // cadenced checkpoints are produced by re-running the deterministic
    // loop up to each cut point, trading compute for a single code path
    if let Some(every) = checkpoint_every {
        let mut step = every;
        while step < run.train.grad_steps {
            let mut partial = opts.clone();
            partial.train.grad_steps = step;
            let out = train_offline(&dataset, &partial)?;
            write_checkpoint(
                &out.checkpoint(&partial.train),
                &out_dir.join(format!("checkpoint_step{step}.txt")),
            )?;
            step += every;
        }
    }

    let outcome = train_offline(&dataset, &opts)?;
    let extra = vec![format!("data: {}", data.display())];
    fs::write(
        out_dir.join("metrics.csv"),
        render_metrics(&outcome.metrics, &provenance(run, &extra)),
    )?;
    write_checkpoint(
        &outcome.checkpoint(&run.train),
        &out_dir.join("checkpoint.txt"),
    )?;
    fs::write(out_dir.join("config.toml"), run.to_toml())?;
    match outcome.final_success() {
        Some(s) => println!(
            "trained {} steps; final eval success rate {s}",
            outcome.state.grad_step
        ),
        None => println!("trained {} steps", outcome.state.grad_step),
    }
    println!("artifacts in {}", out_dir.display());
    Ok(())
}

fn cmd_train_bc(run: &RunConfig, data: &Path, out_dir: &Path) -> Result<()> {
    // same success-filter as RL training, so imitation sees exactly the
    // demonstrations and never the successful replays
    let dataset = load_training_dataset(data, false)?;
    fs::create_dir_all(out_dir)?;
    let opts = options_of(run);
    let model = bc_baseline_train(&dataset, &opts)?;
    let report = evaluate(&model, run.env, run.harness.eval_episodes, run.train.seed)?;
    let ck = crate::model::Checkpoint {
        config: run.train.clone(),
        target: model.params.clone(),
        model,
        grad_step: run.train.grad_steps,
    };
    write_checkpoint(&ck, &out_dir.join("checkpoint.txt"))?;
    fs::write(out_dir.join("config.toml"), run.to_toml())?;
    println!(
        "behavior cloning on {} successful episodes: success rate {}",
        dataset.num_successes(),
        report.success_rate
    );
    Ok(())
}

fn cmd_eval(
    run: &RunConfig,
    checkpoint: &Path,
    episodes: Option<usize>,
    eval_seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let ck = read_checkpoint(checkpoint)?;
    let episodes = episodes.unwrap_or(run.harness.eval_episodes);
    let seed = eval_seed.unwrap_or(run.train.seed);
    let report = evaluate(&ck.model, run.env, episodes, seed)?;
    println!(
        "success rate {} over {} episodes (mean return {})",
        report.success_rate, report.episodes, report.mean_return
    );
    if let Some(path) = out {
        let doc = serde_json::json!({
            "success_rate": report.success_rate,
            "episodes": report.episodes,
            "mean_return": report.mean_return,
            "eval_seed": seed,
            "env": { "grid_size": run.env.grid_size, "horizon": run.env.horizon },
            "checkpoint_config": ck.config,
            "checkpoint_grad_step": ck.grad_step,
        });
        fs::write(path, serde_json::to_string_pretty(&doc).expect("report serializes"))?;
    }
    Ok(())
}

fn cmd_ablate(
    run: &RunConfig,
    data: &Path,
    out: &Path,
    seeds: u64,
    full_matrix: bool,
    keep_replay_successes: bool,
) -> Result<()> {
    if seeds == 0 {
        return Err(Error::InvalidConfig("--seeds must be >= 1".into()));
    }
    let dataset = load_training_dataset(data, keep_replay_successes)?;
    let opts = options_of(run);
    let seed_list: Vec<u64> = (0..seeds).map(|i| run.train.seed + i).collect();
    let cells = if full_matrix {
        full_matrix_cells()
    } else {
        default_cells()
    };
    let results = run_ablation_matrix(&dataset, &opts, &seed_list, &cells)?;
    let extra = vec![
        format!("data: {}", data.display()),
        format!("seeds: {seed_list:?}"),
    ];
    let table = render_ablation_table(&results, &provenance(run, &extra));
    fs::write(out, &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_grad_check(run: &RunConfig, seeds: u64, eps: f64, subset: usize) -> Result<bool> {
    use crate::data::{generate_mixed_dataset as gen, sample_batch};
    use rand::SeedableRng;

    let dataset = gen(
        run.env,
        40,
        0.25,
        NoiseSpec {
            per_dim_flip_prob: 0.4,
        },
        run.train.gamma,
        17,
    )?;
    let spec = grid_pick_action_spec();
    let mut worst_full = 0.0f64;
    let mut worst_linear = 0.0f64;
    for seed in 0..seeds {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let batch = sample_batch(&dataset, 1, run.train.window_w, &mut rng)?;
        let sample = &batch.samples[0];

        let full_shape = ModelShape::new(
            &spec,
            OBS_DIM,
            run.train.window_w,
            &crate::config::ModelConfig {
                width: run.model.width,
                blocks: run.model.blocks,
            },
        )?;
        let full = SeqQModel::init(full_shape.clone(), seed);
        let full_target = ParamVector::init(full_shape.layout(), seed ^ 0xdead);
        worst_full = worst_full.max(grad_check(
            &full,
            &full_target,
            sample,
            &run.train,
            eps,
            Some(subset),
            seed,
        )?);

        let linear_shape = ModelShape::new(
            &spec,
            OBS_DIM,
            run.train.window_w,
            &crate::config::ModelConfig {
                width: run.model.width,
                blocks: 0,
            },
        )?;
        let linear = SeqQModel::init(linear_shape.clone(), seed);
        let linear_target = ParamVector::init(linear_shape.layout(), seed ^ 0xbeef);
        worst_linear = worst_linear.max(grad_check(
            &linear,
            &linear_target,
            sample,
            &run.train,
            eps,
            None,
            seed,
        )?);
    }
    let full_ok = worst_full < 1e-4;
    let linear_ok = worst_linear < 1e-7;
    println!(
        "grad-check full model: {} (max relative error {worst_full:.3e}, threshold 1e-4)",
        if full_ok { "PASS" } else { "FAIL" }
    );
    println!(
        "grad-check linear model: {} (max relative error {worst_linear:.3e}, threshold 1e-7)",
        if linear_ok { "PASS" } else { "FAIL" }
    );
    Ok(full_ok && linear_ok)
}

fn classify(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidActionSpec(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut run = load_config(&cli.config)?;
    match cli.command {
        Command::GenData {
            episodes,
            demo_fraction,
            noise,
            data_seed,
            filter_successes,
            out,
            overrides,
        } => {
            overrides.apply(&mut run);
            cmd_gen_data(
                &mut run,
                episodes,
                demo_fraction,
                noise,
                data_seed,
                filter_successes,
                &out,
            )?;
            Ok(EXIT_OK)
        }
        Command::VerifyTabular {
            trials,
            seed,
            intra_discount,
        } => Ok(if cmd_verify_tabular(trials, seed, intra_discount)? {
            EXIT_OK
        } else {
            EXIT_VERIFY
        }),
        Command::Train {
            data,
            out_dir,
            keep_replay_successes,
            checkpoint_every,
            overrides,
        } => {
            overrides.apply(&mut run);
            run.validate()?;
            cmd_train(&run, &data, &out_dir, keep_replay_successes, checkpoint_every)?;
            Ok(EXIT_OK)
        }
        Command::TrainBc {
            data,
            out_dir,
            overrides,
        } => {
            overrides.apply(&mut run);
            run.validate()?;
            cmd_train_bc(&run, &data, &out_dir)?;
            Ok(EXIT_OK)
        }
        Command::Eval {
            checkpoint,
            episodes,
            eval_seed,
            out,
            overrides,
        } => {
            overrides.apply(&mut run);
            run.validate()?;
            cmd_eval(&run, &checkpoint, episodes, eval_seed, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Ablate {
            data,
            out,
            seeds,
            full_matrix,
            keep_replay_successes,
            overrides,
        } => {
            overrides.apply(&mut run);
            run.validate()?;
            cmd_ablate(&run, &data, &out, seeds, full_matrix, keep_replay_successes)?;
            Ok(EXIT_OK)
        }
        Command::GradCheck {
            seeds,
            eps,
            subset,
            overrides,
        } => {
            overrides.apply(&mut run);
            run.validate()?;
            Ok(if cmd_grad_check(&run, seeds, eps, subset)? {
                EXIT_OK
            } else {
                EXIT_VERIFY
            })
        }
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}
