//! Experiment execution: load inputs, run the matcher, compute metrics, and
//! write artifacts. Reports and CSVs contain no timestamps, so two runs with
//! the same config (and seed) produce byte-identical files; wall time goes to
//! `run.log`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use parallax::analog::{power_estimate, NoiseSpec};
use parallax::config::{expand_sweep, ExperimentConfig, RmsSource};
use parallax::grid::{partition, BlockGrid};
use parallax::image::{GrayImage, GroundTruthDisparity};
use parallax::io::load_ground_truth;
use parallax::metrics::{
    apply_disparity, correlation_coefficient, op_count, rms_disparity_error, DisparityMap, Variant,
};
use parallax::ncc::{match_ncc, NccParams, NccVariant};
use parallax::ops::OpCounts;
use parallax::sad::{match_sad, SadParams};
use parallax::score::SearchWindow;

use crate::output;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Data(msg) => write!(f, "data: {msg}"),
            CliError::Internal(msg) => write!(f, "internal: {msg}"),
        }
    }
}

/// Builds the global rayon pool when a fixed thread count is requested.
/// 0 keeps rayon's default; 1 disables parallel block evaluation entirely.
pub fn install_thread_pool(threads: usize) {
    if threads > 1 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Everything a single run measured, for the report and the sweep table.
pub struct RunSummary {
    pub label: String,
    pub output_dir: PathBuf,
    pub blocks_total: usize,
    pub blocks_valid: usize,
    pub correlation_pre: Option<f64>,
    pub correlation_post: Option<f64>,
    pub rms_error: Option<f64>,
    pub counts: OpCounts,
    pub wall_seconds: f64,
}

struct LoadedInputs {
    template: GrayImage,
    reference: GrayImage,
    truth: Option<GroundTruthDisparity>,
}

fn load_inputs(config: &ExperimentConfig) -> Result<LoadedInputs, CliError> {
    let load = |what: &str, path: &Path| -> Result<GrayImage, CliError> {
        parallax::io::load_gray(path)
            .map_err(|e| CliError::Data(format!("{what} {}: {e}", path.display())))
    };
    let template = load("template", &config.template)?;
    let reference = load("reference", &config.reference)?;
    let truth = match &config.ground_truth {
        Some(path) => Some(
            load_ground_truth(path, config.ground_truth_scale, config.ground_truth_unknown)
                .map_err(|e| CliError::Data(format!("ground truth {}: {e}", path.display())))?,
        ),
        None => None,
    };
    Ok(LoadedInputs {
        template,
        reference,
        truth,
    })
}

fn build_noise(config: &ExperimentConfig, inputs: &LoadedInputs) -> Result<Option<NoiseSpec>, CliError> {
    let Some(noise) = &config.noise else {
        return Ok(None);
    };
    let rms_image = match noise.rms_source {
        RmsSource::Template => &inputs.template,
        RmsSource::Reference => &inputs.reference,
    };
    NoiseSpec::for_image(noise.multiplier_pct, noise.integrator_pct, noise.seed, rms_image)
        .map(Some)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run_matcher(
    config: &ExperimentConfig,
    inputs: &LoadedInputs,
    grid: &BlockGrid,
    window: SearchWindow,
    noise: Option<NoiseSpec>,
) -> Result<DisparityMap, CliError> {
    let parallel = config.threads != 1;
    let map = match config.variant {
        Variant::Sad => {
            let mut params = SadParams::new(window);
            params.noise = noise;
            params.parallel = parallel;
            match_sad(&inputs.template, &inputs.reference, grid, &params)
        }
        Variant::FullNcc | Variant::DiagonalNcc => {
            let variant = if config.variant == Variant::FullNcc {
                NccVariant::Full
            } else {
                NccVariant::Diagonal
            };
            let mut params = NccParams::new(window, variant);
            params.ma_window = Some(config.effective_ma_window());
            params.use_sum_tables = config.use_sum_tables;
            params.noise = noise;
            params.parallel = parallel;
            match_ncc(&inputs.template, &inputs.reference, grid, &params)
        }
    };
    map.map_err(|e| CliError::Data(e.to_string()))
}

/// Runs one experiment into `output_dir` and writes all artifacts.
pub fn execute_run(
    config: &ExperimentConfig,
    label: &str,
    output_dir: &Path,
) -> Result<RunSummary, CliError> {
    let inputs = load_inputs(config)?;
    let grid = partition(
        inputs.template.width(),
        inputs.template.height(),
        config.block,
        config.effective_overlap(),
        config.effective_margin(),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let window = config
        .search
        .window()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let noise = build_noise(config, &inputs)?;
    let signal_rms = noise.as_ref().map(|n| n.signal_rms);

    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let timer = Instant::now();
    let map = run_matcher(config, &inputs, &grid, window, noise)?;
    let wall_seconds = timer.elapsed().as_secs_f64();

    let aligned = apply_disparity(&inputs.template, &map, &grid)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let same_dims = inputs.template.width() == inputs.reference.width()
        && inputs.template.height() == inputs.reference.height();
    let correlation_pre = same_dims
        .then(|| correlation_coefficient(&inputs.template, &inputs.reference).ok())
        .flatten();
    let correlation_post = same_dims
        .then(|| correlation_coefficient(&aligned, &inputs.reference).ok())
        .flatten();
    let rms_error = match &inputs.truth {
        Some(truth) => Some(
            rms_disparity_error(&map, truth).map_err(|e| CliError::Data(e.to_string()))?,
        ),
        None => None,
    };
    let counts = op_count(
        config.variant,
        config.block,
        window.shift_count() as u64,
        grid.len() as u64,
    );

    fs::create_dir_all(output_dir)
        .map_err(|e| CliError::Internal(format!("create {}: {e}", output_dir.display())))?;
    let summary = RunSummary {
        label: label.to_string(),
        output_dir: output_dir.to_path_buf(),
        blocks_total: grid.len(),
        blocks_valid: map.valid_count(),
        correlation_pre,
        correlation_post,
        rms_error,
        counts,
        wall_seconds,
    };
    output::write_run_artifacts(output_dir, config, &grid, &map, &aligned, &summary, signal_rms)?;
    output::write_log(output_dir, started_unix, wall_seconds, config.threads)?;
    Ok(summary)
}

pub fn cmd_match(config: &ExperimentConfig) -> Result<(), CliError> {
    let summary = execute_run(config, "run_000", &config.output_dir)?;
    print_summary(&summary);
    Ok(())
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<(), CliError> {
    let plans = expand_sweep(config).map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::Internal(format!("create {}: {e}", config.output_dir.display())))?;
    output::write_manifest(&config.output_dir, &plans)?;

    let mut rows = Vec::new();
    for plan in &plans {
        let run_dir = config.output_dir.join(&plan.label);
        match execute_run(&plan.config, &plan.label, &run_dir) {
            Ok(summary) => {
                print_summary(&summary);
                rows.push(output::sweep_row(&plan.config, &summary, None));
            }
            Err(err) => {
                eprintln!("{}: {err}", plan.label);
                rows.push(output::sweep_failure_row(&plan.config, &plan.label, &err));
            }
        }
    }
    output::write_sweep_csv(&config.output_dir, &rows)?;
    println!(
        "sweep: {} runs, results in {}",
        plans.len(),
        config.output_dir.join("sweep.csv").display()
    );
    Ok(())
}

pub fn cmd_power(channels: usize) -> Result<(), CliError> {
    let report = power_estimate(channels).map_err(|e| CliError::Usage(e.to_string()))?;
    print!("{}", output::power_table(&report));
    Ok(())
}

fn print_summary(summary: &RunSummary) {
    let corr = match (summary.correlation_pre, summary.correlation_post) {
        (Some(pre), Some(post)) => format!(", corr {pre:.4} -> {post:.4}"),
        _ => String::new(),
    };
    let rms = match summary.rms_error {
        Some(value) => format!(", rms {value:.4} px"),
        None => String::new(),
    };
    println!(
        "{}: {}/{} blocks valid{corr}{rms} ({:.3} s) -> {}",
        summary.label,
        summary.blocks_valid,
        summary.blocks_total,
        summary.wall_seconds,
        summary.output_dir.display()
    );
}
