//! The `surfcast` command line: ingestion, smoothing, decomposition,
//! forecasting, evaluation and synthetic data.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod ingest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::forecast::{IcVariant, Weighting};
use config::{LambdaGrid, LambdaSetting, MethodName, MissingPolicy, PipelineConfig, PoolingSetting, TruncationSetting};

#[derive(Debug, Parser)]
#[command(name = "surfcast", version, about = "Surface reconstruction and functional factor forecasting")]
pub struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output (and artifact) directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for stochastic steps.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read stations.csv and measurements.csv into a complete panel.
    Ingest {
        #[arg(long)]
        stations: Option<PathBuf>,
        #[arg(long)]
        measurements: Option<PathBuf>,
        /// drop-station or interpolate.
        #[arg(long)]
        missing: Option<MissingPolicy>,
    },
    /// Triangulate the stations and smooth every day into a surface.
    Smooth {
        /// A positive value or `auto` (GCV).
        #[arg(long)]
        lambda: Option<LambdaSetting>,
        #[arg(long, value_name = "MIN,MAX,COUNT")]
        lambda_grid: Option<LambdaGrid>,
        /// mean or per-day.
        #[arg(long)]
        gcv_pooling: Option<PoolingSetting>,
        #[arg(long)]
        domain: Option<PathBuf>,
    },
    /// Scan the GCV criterion over the λ grid.
    Gcv {
        #[arg(long, value_name = "MIN,MAX,COUNT")]
        lambda_grid: Option<LambdaGrid>,
    },
    /// Functional principal components of the smoothed surfaces.
    Decompose {
        #[arg(long)]
        components: Option<usize>,
    },
    /// One-step-ahead forecast of the next surface.
    Forecast {
        #[command(flatten)]
        forecast: ForecastArgs,
    },
    /// Rolling-origin evaluation and exceedance events.
    Evaluate {
        #[command(flatten)]
        forecast: ForecastArgs,
        /// T0, the first training window.
        #[arg(long)]
        initial: Option<usize>,
        /// H, the number of forecast origins.
        #[arg(long)]
        origins: Option<usize>,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<MethodName>>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Generate a synthetic station panel.
    Synth {
        #[arg(long)]
        stations: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// dffm-var, dffm-knn, far, mean or naive.
    #[arg(long)]
    method: Option<MethodName>,
    /// anh, os-bic or os-hq.
    #[arg(long)]
    ic_variant: Option<IcVariant>,
    #[arg(long)]
    max_factors: Option<usize>,
    #[arg(long)]
    max_lags: Option<usize>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    knn_p: Option<usize>,
    #[arg(long)]
    knn_l: Option<usize>,
    #[arg(long)]
    knn_q: Option<f64>,
    #[arg(long, value_parser = parse_weighting)]
    knn_weighting: Option<Weighting>,
    #[arg(long)]
    knn_auto: Option<bool>,
    /// Integer L or an explained-variance share.
    #[arg(long)]
    far_truncation: Option<TruncationSetting>,
    #[arg(long)]
    var_p: Option<usize>,
    #[arg(long)]
    var_l: Option<usize>,
    #[arg(long)]
    var_auto: Option<bool>,
}

fn parse_weighting(s: &str) -> std::result::Result<Weighting, String> {
    match s {
        "equal" => Ok(Weighting::Equal),
        "inverse-distance" => Ok(Weighting::InverseDistance),
        other => Err(format!("unknown weighting `{other}`")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl ForecastArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        let f = &mut cfg.forecast;
        set(&mut f.method, self.method);
        set(&mut f.ic_variant, self.ic_variant);
        set(&mut f.max_factors, self.max_factors);
        set(&mut f.max_lags, self.max_lags);
        set_opt(&mut f.knn.k, self.knn_k);
        set_opt(&mut f.knn.p, self.knn_p);
        set_opt(&mut f.knn.l, self.knn_l);
        set(&mut f.knn.q, self.knn_q);
        set(&mut f.knn.weighting, self.knn_weighting);
        set(&mut f.knn.auto, self.knn_auto);
        set(&mut f.far.truncation, self.far_truncation);
        set_opt(&mut f.var.p, self.var_p);
        set_opt(&mut f.var.l, self.var_l);
        set(&mut f.var.auto, self.var_auto);
        if self.var_p.is_some() && self.var_l.is_some() && self.var_auto.is_none() {
            f.var.auto = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Ingest,
    Smooth,
    Gcv,
    Decompose,
    Forecast,
    Evaluate,
    Synth,
}

/// Folds the flags of `command` into `cfg` and names the step to run.
fn apply_flags(command: Command, cfg: &mut PipelineConfig) -> Step {
    match command {
        Command::Ingest {
            stations,
            measurements,
            missing,
        } => {
            set(&mut cfg.data.stations, stations);
            set(&mut cfg.data.measurements, measurements);
            set(&mut cfg.data.missing, missing);
            Step::Ingest
        }
        Command::Smooth {
            lambda,
            lambda_grid,
            gcv_pooling,
            domain,
        } => {
            set(&mut cfg.smoothing.lambda, lambda);
            set(&mut cfg.smoothing.lambda_grid, lambda_grid);
            set(&mut cfg.smoothing.gcv_pooling, gcv_pooling);
            set_opt(&mut cfg.data.domain, domain);
            Step::Smooth
        }
        Command::Gcv { lambda_grid } => {
            set(&mut cfg.smoothing.lambda_grid, lambda_grid);
            Step::Gcv
        }
        Command::Decompose { components } => {
            set(&mut cfg.decompose.components, components);
            Step::Decompose
        }
        Command::Forecast { forecast } => {
            forecast.apply(cfg);
            Step::Forecast
        }
        Command::Evaluate {
            forecast,
            initial,
            origins,
            methods,
            threshold,
        } => {
            forecast.apply(cfg);
            set_opt(&mut cfg.evaluate.initial, initial);
            set_opt(&mut cfg.evaluate.origins, origins);
            set(&mut cfg.evaluate.methods, methods);
            set(&mut cfg.evaluate.threshold, threshold);
            Step::Evaluate
        }
        Command::Synth { stations, days } => {
            set(&mut cfg.synth.stations, stations);
            set(&mut cfg.synth.days, days);
            Step::Synth
        }
    }
}

/// Loads the configuration, applies flag overrides and runs the command.
pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.data.output, cli.out);
    set(&mut cfg.seed, cli.seed);
    let step = apply_flags(cli.command, &mut cfg);
    cfg.validate()?;
    match step {
        Step::Ingest => commands::run_ingest(&cfg).map(drop),
        Step::Smooth => commands::run_smooth(&cfg).map(drop),
        Step::Gcv => commands::run_gcv(&cfg).map(drop),
        Step::Decompose => commands::run_decompose(&cfg).map(drop),
        Step::Forecast => commands::run_forecast(&cfg),
        Step::Evaluate => commands::run_evaluate(&cfg),
        Step::Synth => commands::run_synth(&cfg),
    }
}

/// One JSON object on a single line.
pub fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Parses `args`, runs, and maps failures to an error line on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_line("UsageError", first));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
