use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crashcast::label::LabelPolicy;
use crashcast::models::{ModelKind, TrainOptions};
use crashcast::pipeline::{self, FeatureConfig, InputPaths, PrepareConfig, RunConfig};
use crashcast::synthgen::{Coverage, SynthSpec};
use crashcast::{fmt_f64, Error};

#[derive(Parser)]
#[command(name = "crashcast", version, about = "Crash-risk forecasting from traffic sensor windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic study year: sensors, weather and crash logs.
    Synth(SynthArgs),
    /// Aggregate, label and split the logs into window datasets.
    Prepare(PrepareArgs),
    /// Rank features on the training split and drop redundant ones.
    Features(FeatureArgs),
    /// Train one model on a prepared training file.
    Train(TrainArgs),
    /// Score a model on a test file and write ROC reports.
    Evaluate(EvaluateArgs),
    /// Score several models on one test file and tabulate them.
    Compare(CompareArgs),
    /// Run the whole pipeline end to end.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    crash_count: Option<usize>,
    #[arg(long)]
    sensors: Option<usize>,
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    speed_drop: Option<f64>,
    #[arg(long)]
    volume_surge: Option<f64>,
    /// Emit every interval of every sensor instead of crash sessions.
    #[arg(long)]
    full_coverage: bool,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        let d = SynthSpec::default();
        SynthSpec {
            crash_count: self.crash_count.unwrap_or(d.crash_count),
            sensor_count: self.sensors.unwrap_or(d.sensor_count),
            days: self.days.unwrap_or(d.days),
            speed_drop_fraction: self.speed_drop.unwrap_or(d.speed_drop_fraction),
            volume_surge_fraction: self.volume_surge.unwrap_or(d.volume_surge_fraction),
            coverage: if self.full_coverage { Coverage::Full } else { d.coverage },
            ..d
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Directory holding sensors.csv, weather.csv and crashes.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    sensors: Option<PathBuf>,
    #[arg(long)]
    weather: Option<PathBuf>,
    #[arg(long)]
    crashes: Option<PathBuf>,
}

impl InputArgs {
    fn paths(&self) -> Result<InputPaths, Error> {
        let base = self.data.as_deref().map(InputPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, fallback: Option<&PathBuf>, name: &str| {
            explicit
                .clone()
                .or_else(|| fallback.cloned())
                .ok_or_else(|| Error::Config(format!("--{name} or --data is required")))
        };
        Ok(InputPaths {
            sensors: pick(&self.sensors, base.as_ref().map(|b| &b.sensors), "sensors")?,
            weather: pick(&self.weather, base.as_ref().map(|b| &b.weather), "weather")?,
            crashes: pick(&self.crashes, base.as_ref().map(|b| &b.crashes), "crashes")?,
        })
    }
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long, default_value_t = 5)]
    ratio: usize,
    #[arg(long, default_value = "near-far")]
    policy: String,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
}

impl LabelArgs {
    fn config(&self, seed: u64) -> Result<PrepareConfig, Error> {
        let policy: LabelPolicy = self.policy.parse()?;
        Ok(PrepareConfig { policy, ratio: self.ratio, train_fraction: self.train_frac, seed })
    }
}

#[derive(Args)]
struct PrepareArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[command(flatten)]
    label: LabelArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    corr_threshold: f64,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Training epochs for the CNN and MLP.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate for the CNN and MLP.
    #[arg(long)]
    lr: Option<f64>,
    /// CNN convolution filters.
    #[arg(long)]
    filters: Option<usize>,
}

impl ModelArgs {
    fn options(&self, seed: u64) -> TrainOptions {
        let mut o = TrainOptions::default().with_seed(seed);
        if let Some(e) = self.epochs {
            o.cnn.epochs = e;
            o.mlp.epochs = e;
        }
        if let Some(lr) = self.lr {
            o.cnn.learning_rate = lr;
            o.mlp.learning_rate = lr;
        }
        if let Some(f) = self.filters {
            o.cnn.filter_count = f;
        }
        o
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "cnn")]
    model: String,
    #[command(flatten)]
    hyper: ModelArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Model files; repeat the flag for each.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Use existing logs in this directory instead of synthesizing.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    label: LabelArgs,
    #[arg(long, default_value_t = 0.5)]
    corr_threshold: f64,
    #[command(flatten)]
    hyper: ModelArgs,
    /// Comma-separated model list.
    #[arg(long, default_value = "cnn,mlp,svm,tree", value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), fmt_f64)
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Synth(a) => {
            let s = pipeline::synth(&a.spec(), a.seed, &a.out)?;
            println!("{} readings, {} crashes written to {}", s.readings, s.crashes, a.out.display());
        }
        Command::Prepare(a) => {
            let s = pipeline::prepare(&a.inputs.paths()?, &a.label.config(a.seed)?, &a.out)?;
            print!("{}", s.to_text());
        }
        Command::Features(a) => {
            let config = FeatureConfig { corr_threshold: a.corr_threshold, tree_count: a.trees, seed: a.seed };
            let r = pipeline::select(&a.train, &a.test, &config, &a.out)?;
            println!("kept {} of {}: {}", r.kept.len(), r.importance.names.len(), r.kept_names().join(" "));
        }
        Command::Train(a) => {
            let kind: ModelKind = a.model.parse()?;
            pipeline::train(&a.train, kind, &a.hyper.options(a.seed), &a.out)?;
            println!("{kind} model written to {}", a.out.join(pipeline::MODEL_FILE).display());
        }
        Command::Evaluate(a) => {
            let r = pipeline::evaluate(&a.model, &a.test, &a.out)?;
            println!("micro auc {}", cell(r.micro.auc));
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Compare(a) => {
            let rows = pipeline::compare(&a.models, &a.test, &a.out)?;
            for r in rows {
                println!("{}: auc {}", r.model, cell(r.auc));
            }
        }
        Command::Run(a) => {
            let mut config = RunConfig::new(a.seed);
            config.inputs = a.data.as_deref().map(InputPaths::in_dir);
            config.prepare = a.label.config(a.seed)?;
            config.features.corr_threshold = a.corr_threshold;
            config.train = a.hyper.options(a.seed);
            config.models = a.models.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
            let s = pipeline::run(&config, &a.out)?;
            print!("{}", s.prepare.to_text());
            println!("kept features: {}", s.selection.kept_names().join(" "));
            for r in &s.comparison {
                println!("{}: auc {} precision {} mse {}", r.model, cell(r.auc), cell(r.precision), fmt_f64(r.mse));
            }
            println!("outputs in {}", a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
