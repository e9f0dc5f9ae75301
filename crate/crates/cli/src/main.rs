mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use mvsboost::{
    BoostParams64, CsvOptions, LossKind, MissingPolicy, Order, OutputKind, SamplingConfig64, Strategy,
    TargetColumn, TreeParams,
};

#[derive(Parser)]
#[command(name = "mvsboost", version, about = "Gradient boosting with minimal variance sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and save it as JSON.
    Train(TrainArgs),
    /// Write one score per input row.
    Predict(PredictArgs),
    /// Report metrics of a model on a labelled file.
    Evaluate(EvaluateArgs),
    /// Run a variance-lab scenario file.
    Lab(LabArgs),
    /// Compare sampling strategies over a grid of sample rates and seeds.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Target column: zero-based index or header name.
    #[arg(long)]
    target: TargetColumn,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
    /// Replace missing feature values with the column median.
    #[arg(long)]
    impute_median: bool,
}

impl DataArgs {
    fn csv_options(&self) -> CsvOptions {
        csv_options(self.no_header, self.impute_median)
    }
}

fn csv_options(no_header: bool, impute_median: bool) -> CsvOptions {
    CsvOptions {
        has_header: !no_header,
        missing: if impute_median {
            MissingPolicy::ImputeMedian
        } else {
            MissingPolicy::Reject
        },
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value = "logloss")]
    loss: LossKind,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 6)]
    max_depth: usize,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps_reg: f64,
    /// `first` fits trees with unit hessians.
    #[arg(long, default_value = "second")]
    order: Order,
    #[arg(long, default_value_t = 255)]
    max_bins: usize,
}

impl ModelArgs {
    fn params(&self, sampling: SamplingConfig64) -> BoostParams64 {
        BoostParams64 {
            n_iterations: self.iterations,
            learning_rate: self.learning_rate,
            order: self.order,
            loss: self.loss,
            tree: TreeParams {
                max_depth: self.max_depth,
                min_leaf_count: self.min_leaf,
                eps_reg: self.eps_reg,
                ..TreeParams::default()
            },
            sampling,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training CSV file.
    #[arg(long)]
    train: PathBuf,
    /// Output model path.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    boost: ModelArgs,
    #[arg(long, default_value = "none")]
    sampling: Strategy,
    /// Expected sampled fraction per iteration (sgb, mvs, mvs-adaptive). Default 0.1.
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Fixed λ for `--sampling mvs`. Default 0.1.
    #[arg(long)]
    mvs_lambda: Option<f64>,
    /// Default 0.2.
    #[arg(long)]
    goss_top_rate: Option<f64>,
    /// Default 0.1.
    #[arg(long)]
    goss_other_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    /// Flags that only make sense with particular strategies are rejected otherwise.
    fn sampling_config(&self) -> Result<SamplingConfig64, String> {
        let s = self.sampling;
        if s != Strategy::Goss && (self.goss_top_rate.is_some() || self.goss_other_rate.is_some()) {
            return Err(format!("--goss-top-rate and --goss-other-rate require --sampling goss, not {s}"));
        }
        if s != Strategy::Mvs && self.mvs_lambda.is_some() {
            return Err(format!("--mvs-lambda requires --sampling mvs, not {s}"));
        }
        if matches!(s, Strategy::None | Strategy::Goss) && self.sample_rate.is_some() {
            return Err(format!("--sample-rate does not apply to --sampling {s}"));
        }
        let rate = self.sample_rate.unwrap_or(0.1);
        Ok(match s {
            Strategy::None => SamplingConfig64::none(),
            Strategy::Sgb => SamplingConfig64::sgb(rate, self.seed),
            Strategy::Mvs => SamplingConfig64::mvs(rate, self.mvs_lambda.unwrap_or(0.1), self.seed),
            Strategy::MvsAdaptive => SamplingConfig64::mvs_adaptive(rate, self.seed),
            Strategy::Goss => SamplingConfig64::goss(
                self.goss_top_rate.unwrap_or(0.2),
                self.goss_other_rate.unwrap_or(0.1),
                self.seed,
            ),
        })
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV file of feature rows.
    #[arg(long)]
    data: PathBuf,
    /// Column to drop before predicting; without it every column is a feature.
    #[arg(long)]
    target: Option<TargetColumn>,
    #[arg(long)]
    no_header: bool,
    #[arg(long)]
    impute_median: bool,
    /// `raw` scores or `prob` (logloss models only).
    #[arg(long, default_value = "raw")]
    output: OutputKind,
    /// Score file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    data_args: DataArgs,
    /// Comma-separated subset of auc, 1-auc, mse, logloss.
    #[arg(long, value_delimiter = ',', default_value = "auc,1-auc,logloss")]
    metrics: Vec<mvsboost::Metric>,
    /// Append one row to this CSV file, writing a header if it is new.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct LabArgs {
    /// Scenario file of key=value lines.
    #[arg(long)]
    scenario: PathBuf,
    /// CSV report path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    boost: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "sgb,mvs")]
    strategies: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5")]
    sample_rates: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    /// λ used by the `mvs` strategy.
    #[arg(long, default_value_t = 0.1)]
    mvs_lambda: f64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => match args.sampling_config() {
            Ok(sampling) => commands::train(&args, sampling),
            Err(msg) => Cli::command().error(ErrorKind::ArgumentConflict, msg).exit(),
        },
        Command::Predict(args) => commands::predict(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Lab(args) => commands::lab(&args),
        Command::Bench(args) => {
            if args.seeds.is_empty() || args.strategies.is_empty() || args.sample_rates.is_empty() {
                Cli::command()
                    .error(ErrorKind::InvalidValue, "bench needs at least one strategy, rate and seed")
                    .exit()
            }
            bench::run(&args)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
