//! Experiment driver: single matches, parameter sweeps, power estimates and
//! config validation, from TOML configs with flag overrides.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal
//! error.

mod output;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use parallax::config::{
    parse_config, render_config, resolve_paths, validate, AllToken, ExperimentConfig, NoiseConfig,
    OverlapAxis, RmsSource,
};
use parallax::metrics::Variant;

use run::CliError;

/// Environment variable naming the dataset root; relative input paths are
/// resolved against it.
pub const DATA_DIR_ENV: &str = "PARALLAX_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "parallax",
    version,
    about = "Stereo correspondence experiments: block matching, sweeps and reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts
    Match(ExperimentArgs),
    /// Expand the sweep axes and run every configuration
    Sweep(ExperimentArgs),
    /// Print the analog power estimate for a channel count
    Power {
        #[arg(long)]
        channels: usize,
    },
    /// Parse and validate a config, printing its normalized form
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliVariant {
    FullNcc,
    DiagonalNcc,
    Sad,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Self {
        match v {
            CliVariant::FullNcc => Variant::FullNcc,
            CliVariant::DiagonalNcc => Variant::DiagonalNcc,
            CliVariant::Sad => Variant::Sad,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliRmsSource {
    Template,
    Reference,
}

impl From<CliRmsSource> for RmsSource {
    fn from(v: CliRmsSource) -> Self {
        match v {
            CliRmsSource::Template => RmsSource::Template,
            CliRmsSource::Reference => RmsSource::Reference,
        }
    }
}

/// Flags mirror the config keys and override file values.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    ground_truth_scale: Option<f64>,
    #[arg(long)]
    ground_truth_unknown: Option<u16>,
    #[arg(long, value_enum)]
    variant: Option<CliVariant>,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    margin: Option<usize>,
    #[arg(long)]
    ma_window: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    u_min: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    u_max: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    v_min: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    v_max: Option<i32>,
    #[arg(long)]
    noise_multiplier_pct: Option<f64>,
    #[arg(long)]
    noise_integrator_pct: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long, value_enum)]
    noise_rms_source: Option<CliRmsSource>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads for block evaluation: 0 = all cores, 1 = sequential.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    use_sum_tables: Option<bool>,
    /// Sweep axis: comma-separated block sizes.
    #[arg(long, value_delimiter = ',')]
    sweep_block: Option<Vec<usize>>,
    /// Sweep axis: comma-separated overlaps, or "all" for 0..block-1.
    #[arg(long)]
    sweep_overlap: Option<String>,
    /// Sweep axis: comma-separated multiplier noise fractions.
    #[arg(long, value_delimiter = ',')]
    sweep_multiplier_pct: Option<Vec<f64>>,
    /// Sweep axis: comma-separated integrator noise fractions.
    #[arg(long, value_delimiter = ',')]
    sweep_integrator_pct: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Match(args) => {
            let config = build_config(&args)?;
            run::install_thread_pool(config.threads);
            run::cmd_match(&config)
        }
        Command::Sweep(args) => {
            let config = build_config(&args)?;
            run::install_thread_pool(config.threads);
            run::cmd_sweep(&config)
        }
        Command::Power { channels } => run::cmd_power(channels),
        Command::ValidateConfig { config } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
            let mut parsed = parse_config(&text).map_err(|e| CliError::Config(e.to_string()))?;
            resolve_paths(&mut parsed, data_root().as_deref())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let rendered =
                render_config(&parsed).map_err(|e| CliError::Internal(e.to_string()))?;
            print!("{rendered}");
            Ok(())
        }
    }
}

fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

/// Loads the config file (if any), overlays the flags, validates, and
/// resolves input paths.
fn build_config(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => {
            let (Some(template), Some(reference)) = (&args.template, &args.reference) else {
                return Err(CliError::Usage(
                    "either --config or both --template and --reference are required".into(),
                ));
            };
            ExperimentConfig::new(template.clone(), reference.clone())
        }
    };

    if let Some(v) = &args.template {
        config.template = v.clone();
    }
    if let Some(v) = &args.reference {
        config.reference = v.clone();
    }
    if let Some(v) = &args.ground_truth {
        config.ground_truth = Some(v.clone());
    }
    if let Some(v) = args.ground_truth_scale {
        config.ground_truth_scale = v;
    }
    if let Some(v) = args.ground_truth_unknown {
        config.ground_truth_unknown = v;
    }
    if let Some(v) = args.variant {
        config.variant = v.into();
    }
    if let Some(v) = args.block {
        config.block = v;
    }
    if let Some(v) = args.overlap {
        config.overlap = Some(v);
    }
    if let Some(v) = args.margin {
        config.margin = Some(v);
    }
    if let Some(v) = args.ma_window {
        config.ma_window = Some(v);
    }
    if let Some(v) = args.u_min {
        config.search.u_min = v;
    }
    if let Some(v) = args.u_max {
        config.search.u_max = v;
    }
    if let Some(v) = args.v_min {
        config.search.v_min = v;
    }
    if let Some(v) = args.v_max {
        config.search.v_max = v;
    }
    if args.noise_multiplier_pct.is_some()
        || args.noise_integrator_pct.is_some()
        || args.noise_seed.is_some()
        || args.noise_rms_source.is_some()
    {
        let mut noise = config.noise.take().unwrap_or(NoiseConfig {
            multiplier_pct: 0.0,
            integrator_pct: 0.0,
            seed: 0,
            rms_source: RmsSource::Template,
        });
        if let Some(v) = args.noise_multiplier_pct {
            noise.multiplier_pct = v;
        }
        if let Some(v) = args.noise_integrator_pct {
            noise.integrator_pct = v;
        }
        if let Some(v) = args.noise_seed {
            noise.seed = v;
        }
        if let Some(v) = args.noise_rms_source {
            noise.rms_source = v.into();
        }
        config.noise = Some(noise);
    }
    if let Some(v) = &args.output_dir {
        config.output_dir = v.clone();
    }
    if let Some(v) = args.threads {
        config.threads = v;
    }
    if let Some(v) = args.use_sum_tables {
        config.use_sum_tables = v;
    }

    if args.sweep_block.is_some()
        || args.sweep_overlap.is_some()
        || args.sweep_multiplier_pct.is_some()
        || args.sweep_integrator_pct.is_some()
    {
        let mut sweep = config.sweep.take().unwrap_or_default();
        if let Some(v) = &args.sweep_block {
            sweep.block = Some(v.clone());
        }
        if let Some(v) = &args.sweep_overlap {
            sweep.overlap = Some(parse_overlap_axis(v)?);
        }
        if let Some(v) = &args.sweep_multiplier_pct {
            sweep.multiplier_pct = Some(v.clone());
        }
        if let Some(v) = &args.sweep_integrator_pct {
            sweep.integrator_pct = Some(v.clone());
        }
        config.sweep = Some(sweep);
    }

    validate(&config).map_err(|e| CliError::Config(e.to_string()))?;
    resolve_paths(&mut config, data_root().as_deref())
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

fn parse_overlap_axis(text: &str) -> Result<OverlapAxis, CliError> {
    if text.trim() == "all" {
        return Ok(OverlapAxis::All(AllToken::All));
    }
    let values: Result<Vec<usize>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    values
        .map(OverlapAxis::List)
        .map_err(|e| CliError::Usage(format!("--sweep-overlap: {e}")))
}
