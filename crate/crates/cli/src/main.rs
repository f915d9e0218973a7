use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tinynet::dataset::{builtin_patterns, generate_tinydigits, load_patterns, DeformParams};
use tinynet::experiment::{execute, resolve_out_dir, DataPaths, ExperimentSpec, Mode};
use tinynet::{Activation, CostKind, DecayKind, InitScheme, RngState, TrainConfig};

/// File names written by `generate` and read by `--data-dir`.
const TRAIN_DATA: &str = "train_data.csv";
const TRAIN_LABELS: &str = "train_labels.csv";
const VAL_DATA: &str = "val_data.csv";
const VAL_LABELS: &str = "val_labels.csv";

#[derive(Parser)]
#[command(name = "tinynet", version, about = "Train feedforward networks and compare weight initializations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize TinyDigits train and validation CSV files.
    Generate(GenerateArgs),
    /// Run an experiment and write its tables.
    Run(RunArgs),
    /// Print the effective experiment spec as TOML without running it.
    Config(RunArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory receiving the four CSV files.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    base_seed: u32,
    #[arg(long, default_value_t = 1)]
    seed: u32,
    /// Training samples per digit.
    #[arg(long, default_value_t = 90)]
    train_per_class: usize,
    /// Validation samples per digit.
    #[arg(long, default_value_t = 60)]
    val_per_class: usize,
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 7.0)]
    sigma: f64,
    /// Maximum rotation in radians [default: pi/12].
    #[arg(long)]
    beta: Option<f64>,
    /// Scaling half-range in percent.
    #[arg(long, default_value_t = 15.0)]
    gamma: f64,
    /// Directory of `digit<D>_v<K>.txt` base patterns instead of the shipped set.
    #[arg(long)]
    patterns: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment spec; flags below override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Directory holding the files written by `generate`, used as the
    /// primary dataset.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output directory [default: outDir from the spec, then $TINYNET_OUT_DIR, then ./results].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated initialization schemes, e.g. `sparse,sparse3:0.4:-1.4`.
    #[arg(long, value_delimiter = ',')]
    init: Option<Vec<InitScheme>>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u32>>,
    #[arg(long)]
    base_seed: Option<u32>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated layer sizes, e.g. `100,80,80,200,10`.
    #[arg(long, value_delimiter = ',')]
    arch: Option<Vec<usize>>,
    #[arg(long)]
    wd_type: Option<DecayKind>,
    #[arg(long)]
    wd_value: Option<f64>,
    #[arg(long)]
    batchsize: Option<usize>,
    #[arg(long)]
    n_batches: Option<usize>,
    #[arg(long)]
    testsize: Option<usize>,
    /// Constant momentum coefficient.
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    momentum_schedule: Option<bool>,
    #[arg(long)]
    max_lambda: Option<f64>,
    #[arg(long)]
    cost: Option<CostKind>,
    #[arg(long)]
    act: Option<Activation>,
    /// Print `epoch,batch,cost` for every training batch.
    #[arg(long)]
    verbose: bool,
}

fn data_paths(name: &str, dir: &Path) -> DataPaths {
    DataPaths {
        name: name.to_string(),
        train_data: dir.join(TRAIN_DATA),
        train_labels: dir.join(TRAIN_LABELS),
        val_data: dir.join(VAL_DATA),
        val_labels: dir.join(VAL_LABELS),
    }
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => ExperimentSpec::new(args.mode.unwrap_or(Mode::Compare), TrainConfig::default(), Vec::new()),
    };
    if let Some(m) = args.mode {
        spec.mode = m;
    }
    if let Some(dir) = &args.data_dir {
        let name = dir
            .file_name()
            .map_or_else(|| "data".to_string(), |n| n.to_string_lossy().into_owned());
        let primary = data_paths(&name, dir);
        match spec.datasets.first_mut() {
            Some(first) => *first = primary,
            None => spec.datasets.push(primary),
        }
    }
    if let Some(dir) = &args.out_dir {
        spec.out_dir = Some(dir.clone());
    }
    if let Some(s) = &args.init {
        spec.schemes = s.clone();
    }
    if let Some(s) = &args.seed {
        spec.seeds = s.clone();
    }
    if let Some(b) = args.base_seed {
        spec.base_seed = b;
    }
    let t = &mut spec.train;
    if let Some(v) = args.lr {
        t.lr = v;
    }
    if let Some(v) = args.epochs {
        t.n_itrs = v;
    }
    if let Some(v) = &args.arch {
        t.layer_sizes = v.clone();
    }
    if let Some(v) = args.wd_type {
        t.wd_type = v;
    }
    if let Some(v) = args.wd_value {
        t.wd_value = v;
    }
    if let Some(v) = args.batchsize {
        t.batchsize = v;
    }
    if let Some(v) = args.n_batches {
        t.n_batches = v;
    }
    if let Some(v) = args.testsize {
        t.testsize = v;
    }
    if let Some(v) = args.momentum {
        t.lambda = v;
    }
    if let Some(v) = args.momentum_schedule {
        t.momentum_schedule = v;
    }
    if let Some(v) = args.max_lambda {
        t.max_lambda = v;
    }
    if let Some(v) = args.cost {
        t.cost_type = v;
    }
    if let Some(v) = args.act {
        t.act_type = v;
    }
    if args.verbose {
        t.verbose = true;
    }
    Ok(spec)
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let patterns = match &args.patterns {
        Some(dir) => load_patterns(dir)?,
        None => builtin_patterns(),
    };
    let params = DeformParams {
        alpha: args.alpha,
        sigma: args.sigma,
        beta: args.beta.unwrap_or(std::f64::consts::PI / 12.0),
        gamma: args.gamma,
    };
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut rng = RngState::new(args.base_seed, args.seed);
    let train = generate_tinydigits(&mut rng, &patterns, args.train_per_class, &params)?;
    let val = generate_tinydigits(&mut rng, &patterns, args.val_per_class, &params)?;
    let paths = data_paths("tinydigits", &args.out_dir);
    train.write_csv(&paths.train_data, &paths.train_labels)?;
    val.write_csv(&paths.val_data, &paths.val_labels)?;
    println!(
        "wrote {} training and {} validation samples to {}",
        train.len(),
        val.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = build_spec(args)?;
    if spec.datasets.is_empty() {
        bail!("no dataset: pass --data-dir or list [[datasets]] in the config file");
    }
    let output = execute(&spec)?;
    print!("{}", output.report.text());
    for r in output.report.records() {
        eprintln!(
            "{} seed {} on {}: best {:.4}, {:.1}s",
            r.scheme,
            r.seed,
            r.dataset,
            r.best_val_error,
            r.wall_time.as_secs_f64()
        );
    }
    let failed = output.report.failures();
    if failed > 0 {
        eprintln!("warning: {failed} run(s) failed");
    }
    println!("wrote {} files to {}", output.files.len(), output.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Config(a) => build_spec(a).map(|mut spec| {
            spec.out_dir = Some(resolve_out_dir(&spec));
            print!("{}", spec.to_toml());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
