//! `openloop`: generate synthetic data, train the ego-state planner, and run
//! the open-loop evaluation, GT-collision audit and distribution analysis.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use openloop::analysis::{distribution_report, export_figures, DEFAULT_BINS};
use openloop::dataio::{generate_synthetic, load_dataset, write_dataset, Dataset, SyntheticConfig};
use openloop::metrics::{
    audit_gt_collisions, evaluate, CollisionOptions, EgoSpec, EvalOptions, HeadingSource, L2Variant, ObstacleTiming,
    OccupancyRule,
};
use openloop::model::{InputMask, LossConfig, Mlp};
use openloop::trainer::{train, TrainConfig};
use openloop::types::Trajectory;
use openloop::{Error, Execution};

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "openloop",
    version,
    about = "Ego-state MLP planner and open-loop evaluation toolkit"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving all outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Occupancy grid cell size (m); also the loss re-weighting bin for `train`.
    #[arg(long, global = true, default_value_t = 0.5)]
    grid_size: f64,
    #[arg(long, global = true, default_value_t = 4.08)]
    ego_length: f64,
    #[arg(long, global = true, default_value_t = 1.85)]
    ego_width: f64,
    /// Future frames scored (2, 4 or 6; one horizon per second).
    #[arg(long, global = true, default_value_t = 6)]
    horizon_frames: usize,
    /// Disable the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

impl Common {
    fn ego(&self) -> EgoSpec {
        EgoSpec {
            length: self.ego_length,
            width: self.ego_width,
        }
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train the planner on a dataset.
    Train(TrainArgs),
    /// Score a checkpoint: L2 and collision rate per horizon.
    Eval(EvalArgs),
    /// Collision rate of the ground-truth trajectories across grid sizes.
    Audit(AuditArgs),
    /// Heading and curvature distribution of the ground-truth futures.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    n_samples: usize,
    #[arg(long, default_value_t = 0.8)]
    straight_fraction: f64,
    /// Mean obstacles per sample.
    #[arg(long, default_value_t = 4.0)]
    obstacle_density: f64,
    #[arg(long, default_value_t = 1.0)]
    min_clearance: f64,
    #[arg(long, default_value_t = 12.0)]
    max_clearance: f64,
    #[arg(long, default_value_t = 0.2)]
    moving_fraction: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 6)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    #[arg(long, default_value_t = 4e-6)]
    lr: f64,
    #[arg(long, default_value_t = 1e-2)]
    weight_decay: f64,
    #[arg(long)]
    no_velocity: bool,
    #[arg(long)]
    no_acceleration: bool,
    #[arg(long)]
    no_command: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, value_enum, default_value_t = L2Arg::Mean)]
    l2_variant: L2Arg,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Grid sizes to audit (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5, 0.6])]
    grid_sizes: Vec<f64>,
    #[command(flatten)]
    metric: MetricArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value_t = TimingArg::PerFrame)]
    obstacle_timing: TimingArg,
    #[arg(long, value_enum, default_value_t = HeadingArg::Predicted)]
    heading: HeadingArg,
    /// Which cells an obstacle occupies.
    #[arg(long, value_enum, default_value_t = RuleArg::Cover)]
    rule: RuleArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum L2Arg {
    Mean,
    Endpoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimingArg {
    PerFrame,
    FirstFrame,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadingArg {
    Predicted,
    Segment,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Cover,
    Center,
}

impl MetricArgs {
    fn options(&self, common: &Common) -> CollisionOptions {
        CollisionOptions {
            grid_size: common.grid_size,
            ego: common.ego(),
            horizon_frames: common.horizon_frames,
            execution: common.execution(),
            timing: match self.obstacle_timing {
                TimingArg::PerFrame => ObstacleTiming::PerFrame,
                TimingArg::FirstFrame => ObstacleTiming::FirstFrame,
            },
            heading: match self.heading {
                HeadingArg::Predicted => HeadingSource::Predicted,
                HeadingArg::Segment => HeadingSource::SegmentDirection,
            },
            rule: match self.rule {
                RuleArg::Cover => OccupancyRule::Cover,
                RuleArg::Center => OccupancyRule::Center,
            },
            ..CollisionOptions::default()
        }
    }
}

enum CliError {
    /// Bad flags, configuration or missing inputs: exit 2.
    Usage(String),
    /// Anything that failed while running: exit 1.
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Dimension { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn require_file(what: &str, path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} not found: {}", path.display())))
    }
}

fn load(path: &Path) -> CliResult<Dataset> {
    require_file("dataset", path)?;
    Ok(load_dataset(path)?)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn prepare_out_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))
}

fn cmd_gen(common: &Common, args: &GenArgs) -> CliResult {
    let cfg = SyntheticConfig {
        n_samples: args.n_samples,
        straight_fraction: args.straight_fraction,
        obstacle_density: args.obstacle_density,
        clearance_range: (args.min_clearance, args.max_clearance),
        moving_fraction: args.moving_fraction,
        ego: common.ego(),
        rng_seed: common.seed,
        ..SyntheticConfig::default()
    };
    cfg.validate()?;
    prepare_out_dir(&common.out_dir)?;
    let ds = generate_synthetic(&cfg)?;
    let out = common.out_dir.join("dataset.jsonl");
    write_dataset(&ds, &out)?;
    let manifest = RunManifest::new("gen", common.seed, common.execution(), &cfg).output("dataset", &out);
    write_json(&common.out_dir.join("gen_manifest.json"), &manifest)?;
    eprintln!("wrote {} samples to {}", ds.len(), out.display());
    Ok(())
}

fn cmd_train(common: &Common, args: &TrainArgs) -> CliResult {
    let mask = InputMask {
        use_trajectory: true,
        use_velocity: !args.no_velocity,
        use_acceleration: !args.no_acceleration,
        use_command: !args.no_command,
    };
    let cfg = TrainConfig {
        lr0: args.lr,
        weight_decay: args.weight_decay,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: common.seed,
        loss: LossConfig {
            grid_size: common.grid_size,
            ..LossConfig::default()
        },
        execution: common.execution(),
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let ds = load(&args.dataset)?;
    let mut net = Mlp::planner(mask, common.seed)?;
    eprintln!(
        "training on {} samples: input dim {}, {} parameters, {} steps",
        ds.len(),
        net.input_dim(),
        net.num_params(),
        cfg.epochs * cfg.steps_per_epoch(ds.len())
    );
    let log = train(&ds, &mut net, &cfg)?;
    for e in &log.epochs {
        eprintln!("epoch {}: mean loss {:.6}", e.epoch + 1, e.mean_loss);
    }
    prepare_out_dir(&common.out_dir)?;
    let model = common.out_dir.join("model.bin");
    let csv = common.out_dir.join("train_log.csv");
    net.save(&model)?;
    log.write_csv(&csv)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        train: &'a TrainConfig,
        input_mask: InputMask,
        layer_sizes: Vec<usize>,
    }
    let resolved = Resolved {
        train: &cfg,
        input_mask: mask,
        layer_sizes: net.sizes(),
    };
    let mut manifest = RunManifest::new("train", common.seed, common.execution(), resolved)
        .input("dataset", &args.dataset)
        .output("checkpoint", &model)
        .output("train_log", &csv);
    manifest.input_dim = Some(net.input_dim());
    write_json(&common.out_dir.join("train_manifest.json"), &manifest)
}

fn cmd_eval(common: &Common, args: &EvalArgs) -> CliResult {
    let opts = EvalOptions {
        collision: args.metric.options(common),
        l2_variant: match args.l2_variant {
            L2Arg::Mean => L2Variant::Mean,
            L2Arg::Endpoint => L2Variant::Endpoint,
        },
    };
    opts.collision.validate()?;
    require_file("checkpoint", &args.checkpoint)?;
    let ds = load(&args.dataset)?;
    let net = Mlp::load(&args.checkpoint)?;
    let preds = opts
        .collision
        .execution
        .map(&ds.samples, |s| net.predict(s))
        .into_iter()
        .collect::<Result<Vec<Trajectory>, Error>>()?;
    let report = evaluate(&ds, &preds, &opts)?;
    prepare_out_dir(&common.out_dir)?;
    let json = common.out_dir.join("eval_report.json");
    let table = common.out_dir.join("eval_report.md");
    write_json(&json, &report)?;
    write_text(&table, &report.to_table())?;
    print!("{}", report.to_table());
    let mut manifest = RunManifest::new("eval", common.seed, common.execution(), &opts)
        .input("dataset", &args.dataset)
        .input("checkpoint", &args.checkpoint)
        .output("report", &json)
        .output("table", &table);
    manifest.input_dim = Some(net.input_dim());
    write_json(&common.out_dir.join("eval_manifest.json"), &manifest)
}

fn cmd_audit(common: &Common, args: &AuditArgs) -> CliResult {
    let base = args.metric.options(common);
    base.validate()?;
    for &g in &args.grid_sizes {
        base.with_grid_size(g).validate()?;
    }
    let ds = load(&args.dataset)?;
    let report = audit_gt_collisions(&ds, &args.grid_sizes, &base)?;
    prepare_out_dir(&common.out_dir)?;
    let json = common.out_dir.join("audit.json");
    let table = common.out_dir.join("audit.md");
    write_json(&json, &report)?;
    write_text(&table, &report.to_table())?;
    print!("{}", report.to_table());

    #[derive(Serialize)]
    struct Resolved<'a> {
        grid_sizes: &'a [f64],
        collision: &'a CollisionOptions,
    }
    let manifest = RunManifest::new(
        "audit",
        common.seed,
        common.execution(),
        Resolved {
            grid_sizes: &args.grid_sizes,
            collision: &base,
        },
    )
    .input("dataset", &args.dataset)
    .output("report", &json)
    .output("table", &table);
    write_json(&common.out_dir.join("audit_manifest.json"), &manifest)
}

fn cmd_analyze(common: &Common, args: &AnalyzeArgs) -> CliResult {
    if args.bins == 0 {
        return Err(CliError::Usage("bins: must be >= 1".into()));
    }
    let ds = load(&args.dataset)?;
    let report = distribution_report(&ds, args.bins, common.execution())?;
    prepare_out_dir(&common.out_dir)?;
    let json = common.out_dir.join("distribution.json");
    write_json(&json, &report)?;
    export_figures(&report, &common.out_dir)?;
    println!(
        "{} samples: heading within ±{} rad: {:.4}; curvature within ±{} rad: {:.4}",
        report.samples,
        report.heading_band,
        report.heading_band_fraction,
        report.curvature_band,
        report.curvature_band_fraction
    );

    #[derive(Serialize)]
    struct Resolved {
        bins: usize,
        heading_band: f64,
        curvature_band: f64,
    }
    let resolved = Resolved {
        bins: args.bins,
        heading_band: report.heading_band,
        curvature_band: report.curvature_band,
    };
    let mut manifest = RunManifest::new("analyze", common.seed, common.execution(), resolved)
        .input("dataset", &args.dataset)
        .output("report", &json);
    for name in [
        "trajectory_points.csv",
        "heading_hist.csv",
        "curvature_hist.csv",
        "trajectory_points.svg",
        "heading_hist.svg",
        "curvature_hist.svg",
    ] {
        manifest
            .outputs
            .insert(name, common.out_dir.join(name).display().to_string());
    }
    write_json(&common.out_dir.join("analyze_manifest.json"), &manifest)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Gen(a) => cmd_gen(&cli.common, a),
        Cmd::Train(a) => cmd_train(&cli.common, a),
        Cmd::Eval(a) => cmd_eval(&cli.common, a),
        Cmd::Audit(a) => cmd_audit(&cli.common, a),
        Cmd::Analyze(a) => cmd_analyze(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
