//! Artifact writers and display formatting. Every file written here is a pure
//! function of the run's inputs and results, so identical runs produce
//! byte-identical artifacts.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use parallax::analog::PowerReport;
use parallax::config::{ExperimentConfig, RunPlan};
use parallax::grid::BlockGrid;
use parallax::image::GrayImage;
use parallax::io::{save_pgm, PnmEncoding};
use parallax::metrics::DisparityMap;

use crate::run::{CliError, RunSummary};

const DISPARITY_CSV: &str = "disparity.csv";
const DISPARITY_X_PGM: &str = "disparity_x.pgm";
const DISPARITY_Y_PGM: &str = "disparity_y.pgm";
const SCALE_TXT: &str = "disparity_scale.txt";
const ALIGNED_PGM: &str = "aligned.pgm";
const REPORT_TXT: &str = "report.txt";
const REPORT_KV: &str = "report.kv";
const RUN_LOG: &str = "run.log";

fn internal(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("write {}: {e}", path.display()))
}

/// Fixed-precision float for machine-readable files.
fn num(value: f64) -> String {
    format!("{value:.9}")
}

pub fn write_run_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    grid: &BlockGrid,
    map: &DisparityMap,
    aligned: &GrayImage,
    summary: &RunSummary,
    signal_rms: Option<f64>,
) -> Result<(), CliError> {
    write_disparity_csv(&dir.join(DISPARITY_CSV), map)?;
    let ranges = write_disparity_images(dir, map)?;
    save_pgm(aligned, &dir.join(ALIGNED_PGM), 255, PnmEncoding::Binary)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_reports(dir, config, grid, map, summary, signal_rms, &ranges)?;
    Ok(())
}

fn write_disparity_csv(path: &Path, map: &DisparityMap) -> Result<(), CliError> {
    let mut out = String::from("cell_x,cell_y,px_x,px_y,dx,dy,score,valid\n");
    for cy in 0..map.lattice_height() {
        for cx in 0..map.lattice_width() {
            let cell = map.cell(cx, cy);
            let (px, py) = map.cell_origin(cx, cy);
            out.push_str(&format!(
                "{cx},{cy},{px},{py},{},{},{},{}\n",
                cell.dx,
                cell.dy,
                num(cell.score),
                cell.valid
            ));
        }
    }
    fs::write(path, out).map_err(internal(path))
}

/// Observed disparity ranges used to scale the visualization graymaps.
pub struct DisparityRanges {
    pub x_min: i32,
    pub x_max: i32,
    pub y_min: i32,
    pub y_max: i32,
}

fn write_disparity_images(dir: &Path, map: &DisparityMap) -> Result<DisparityRanges, CliError> {
    let valid_cells: Vec<_> = map.cells().iter().filter(|c| c.valid).collect();
    let ranges = DisparityRanges {
        x_min: valid_cells.iter().map(|c| c.dx).min().unwrap_or(0),
        x_max: valid_cells.iter().map(|c| c.dx).max().unwrap_or(0),
        y_min: valid_cells.iter().map(|c| c.dy).min().unwrap_or(0),
        y_max: valid_cells.iter().map(|c| c.dy).max().unwrap_or(0),
    };
    let dense = map.densify();

    let scale_to_unit = |value: f64, min: i32, max: i32| -> f64 {
        if max > min {
            (value - min as f64) / (max - min) as f64
        } else {
            0.0
        }
    };
    let x_img = GrayImage::new(
        dense.width,
        dense.height,
        dense
            .dx
            .iter()
            .zip(&dense.valid)
            .map(|(&d, &ok)| {
                if ok {
                    scale_to_unit(d, ranges.x_min, ranges.x_max)
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;
    let y_img = GrayImage::new(
        dense.width,
        dense.height,
        dense
            .dy
            .iter()
            .zip(&dense.valid)
            .map(|(&d, &ok)| {
                if ok {
                    scale_to_unit(d, ranges.y_min, ranges.y_max)
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;
    save_pgm(&x_img, &dir.join(DISPARITY_X_PGM), 255, PnmEncoding::Binary)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    save_pgm(&y_img, &dir.join(DISPARITY_Y_PGM), 255, PnmEncoding::Binary)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let path = dir.join(SCALE_TXT);
    let mut text = String::new();
    text.push_str(&format!("disparity_x_min={}\n", ranges.x_min));
    text.push_str(&format!("disparity_x_max={}\n", ranges.x_max));
    text.push_str(&format!("disparity_y_min={}\n", ranges.y_min));
    text.push_str(&format!("disparity_y_max={}\n", ranges.y_max));
    text.push_str("mapping=linear, gray 0 at min and 255 at max; invalid pixels black\n");
    fs::write(&path, text).map_err(internal(&path))?;
    Ok(ranges)
}

fn write_reports(
    dir: &Path,
    config: &ExperimentConfig,
    grid: &BlockGrid,
    map: &DisparityMap,
    summary: &RunSummary,
    signal_rms: Option<f64>,
    ranges: &DisparityRanges,
) -> Result<(), CliError> {
    let window = config.search;
    let shifts = (window.u_max - window.u_min + 1) as u64 * (window.v_max - window.v_min + 1) as u64;

    let mut kv: Vec<(String, String)> = Vec::new();
    let mut push = |key: &str, value: String| kv.push((key.to_string(), value));
    push("label", summary.label.clone());
    push("variant", config.variant.to_string());
    push("block", config.block.to_string());
    push("overlap", config.effective_overlap().to_string());
    push("stride", grid.stride().to_string());
    push("margin", config.effective_margin().to_string());
    push("ma_window", config.effective_ma_window().to_string());
    push("u_min", window.u_min.to_string());
    push("u_max", window.u_max.to_string());
    push("v_min", window.v_min.to_string());
    push("v_max", window.v_max.to_string());
    push("shifts", shifts.to_string());
    match &config.noise {
        Some(noise) => {
            push("noise_multiplier_pct", num(noise.multiplier_pct));
            push("noise_integrator_pct", num(noise.integrator_pct));
            push("noise_seed", noise.seed.to_string());
            push(
                "noise_rms_source",
                match noise.rms_source {
                    parallax::config::RmsSource::Template => "template".into(),
                    parallax::config::RmsSource::Reference => "reference".into(),
                },
            );
            if let Some(rms) = signal_rms {
                push("signal_rms", num(rms));
            }
        }
        None => {
            push("noise_multiplier_pct", num(0.0));
            push("noise_integrator_pct", num(0.0));
        }
    }
    push("threads", config.threads.to_string());
    push("image_width", map.image_width().to_string());
    push("image_height", map.image_height().to_string());
    push("lattice_width", map.lattice_width().to_string());
    push("lattice_height", map.lattice_height().to_string());
    push("blocks_total", summary.blocks_total.to_string());
    push("blocks_valid", summary.blocks_valid.to_string());
    if let Some(v) = summary.correlation_pre {
        push("correlation_pre", num(v));
    }
    if let Some(v) = summary.correlation_post {
        push("correlation_post", num(v));
    }
    if let Some(v) = summary.rms_error {
        push("rms_disparity_error", num(v));
    }
    push("op_multiplies", summary.counts.multiplies.to_string());
    push("op_adds", summary.counts.adds.to_string());
    push("op_abs_diffs", summary.counts.abs_diffs.to_string());
    push("disparity_x_min", ranges.x_min.to_string());
    push("disparity_x_max", ranges.x_max.to_string());
    push("disparity_y_min", ranges.y_min.to_string());
    push("disparity_y_max", ranges.y_max.to_string());
    // Artifact paths are relative to the report's own directory so identical
    // configs give byte-identical reports wherever the output lands.
    for (key, file) in [
        ("artifact_disparity_csv", DISPARITY_CSV),
        ("artifact_disparity_x", DISPARITY_X_PGM),
        ("artifact_disparity_y", DISPARITY_Y_PGM),
        ("artifact_scale", SCALE_TXT),
        ("artifact_aligned", ALIGNED_PGM),
        ("artifact_report_txt", REPORT_TXT),
        ("artifact_report_kv", REPORT_KV),
        ("artifact_log", RUN_LOG),
    ] {
        push(key, file.to_string());
    }

    let kv_path = dir.join(REPORT_KV);
    let mut kv_text = String::new();
    for (key, value) in &kv {
        kv_text.push_str(&format!("{key}={value}\n"));
    }
    fs::write(&kv_path, kv_text).map_err(internal(&kv_path))?;

    let txt_path = dir.join(REPORT_TXT);
    let mut txt = String::new();
    txt.push_str(&format!("match report: {}\n", summary.label));
    txt.push_str(&format!(
        "algorithm: {} | block {} overlap {} (stride {}) | margin {} | ma window {}\n",
        config.variant,
        config.block,
        config.effective_overlap(),
        grid.stride(),
        config.effective_margin(),
        config.effective_ma_window(),
    ));
    txt.push_str(&format!(
        "search: u in [{}, {}], v in [{}, {}] ({shifts} shifts)\n",
        window.u_min, window.u_max, window.v_min, window.v_max
    ));
    match &config.noise {
        Some(noise) => txt.push_str(&format!(
            "noise: multiplier {}%, integrator {}% of signal rms, seed {}\n",
            noise.multiplier_pct * 100.0,
            noise.integrator_pct * 100.0,
            noise.seed
        )),
        None => txt.push_str("noise: none\n"),
    }
    txt.push_str(&format!(
        "blocks: {} total, {} valid\n",
        summary.blocks_total, summary.blocks_valid
    ));
    if let (Some(pre), Some(post)) = (summary.correlation_pre, summary.correlation_post) {
        txt.push_str(&format!(
            "correlation: {} before alignment, {} after\n",
            num(pre),
            num(post)
        ));
    }
    if let Some(rms) = summary.rms_error {
        txt.push_str(&format!("rms disparity error: {} px\n", num(rms)));
    }
    txt.push_str(&format!(
        "numerator ops (closed form): {} multiplies, {} adds, {} abs diffs\n",
        summary.counts.multiplies, summary.counts.adds, summary.counts.abs_diffs
    ));
    txt.push_str(&format!(
        "disparity range: x [{}, {}], y [{}, {}]\n",
        ranges.x_min, ranges.x_max, ranges.y_min, ranges.y_max
    ));
    txt.push_str("artifacts:\n");
    for (key, value) in kv.iter().filter(|(k, _)| k.starts_with("artifact_")) {
        txt.push_str(&format!("  {}: {value}\n", &key["artifact_".len()..]));
    }
    fs::write(&txt_path, txt).map_err(internal(&txt_path))
}

pub fn write_log(
    dir: &Path,
    started_unix: u64,
    wall_seconds: f64,
    threads: usize,
) -> Result<(), CliError> {
    let path = dir.join(RUN_LOG);
    let text = format!(
        "started_unix_s={started_unix}\nwall_time_s={wall_seconds:.6}\nthreads={threads}\n"
    );
    fs::write(&path, text).map_err(internal(&path))
}

pub fn write_manifest(dir: &Path, plans: &[RunPlan]) -> Result<(), CliError> {
    let path = dir.join("manifest.txt");
    let mut text = String::new();
    for plan in plans {
        let noise = plan
            .config
            .noise
            .as_ref()
            .map(|n| format!(" multiplier_pct={} integrator_pct={}", n.multiplier_pct, n.integrator_pct))
            .unwrap_or_default();
        text.push_str(&format!(
            "{} variant={} block={} overlap={}{noise}\n",
            plan.label,
            plan.config.variant,
            plan.config.block,
            plan.config.effective_overlap(),
        ));
    }
    fs::write(&path, text).map_err(internal(&path))
}

pub const SWEEP_HEADER: &str = "run,status,variant,block,overlap,stride,ma_window,multiplier_pct,integrator_pct,seed,correlation_pre,correlation_post,rms_disparity_error,op_multiplies,op_adds,op_abs_diffs";

pub fn sweep_row(
    config: &ExperimentConfig,
    summary: &RunSummary,
    error: Option<&CliError>,
) -> String {
    let status = match error {
        None => "ok".to_string(),
        Some(err) => format!("error: {}", err.to_string().replace(',', ";")),
    };
    let (mult, integ, seed) = match &config.noise {
        Some(n) => (num(n.multiplier_pct), num(n.integrator_pct), n.seed.to_string()),
        None => ("0".into(), "0".into(), String::new()),
    };
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    format!(
        "{},{status},{},{},{},{},{},{mult},{integ},{seed},{},{},{},{},{},{}",
        summary.label,
        config.variant,
        config.block,
        config.effective_overlap(),
        config.block - config.effective_overlap(),
        config.effective_ma_window(),
        opt(summary.correlation_pre),
        opt(summary.correlation_post),
        opt(summary.rms_error),
        summary.counts.multiplies,
        summary.counts.adds,
        summary.counts.abs_diffs,
    )
}

pub fn sweep_failure_row(config: &ExperimentConfig, label: &str, error: &CliError) -> String {
    let summary = RunSummary {
        label: label.to_string(),
        output_dir: config.output_dir.clone(),
        blocks_total: 0,
        blocks_valid: 0,
        correlation_pre: None,
        correlation_post: None,
        rms_error: None,
        counts: Default::default(),
        wall_seconds: 0.0,
    };
    sweep_row(config, &summary, Some(error))
}

pub fn write_sweep_csv(dir: &Path, rows: &[String]) -> Result<(), CliError> {
    let path = dir.join("sweep.csv");
    let mut out = Vec::new();
    writeln!(out, "{SWEEP_HEADER}").expect("vec write");
    for row in rows {
        writeln!(out, "{row}").expect("vec write");
    }
    fs::write(&path, out).map_err(internal(&path))
}

/// Renders a power report in the reference table's precision: entries >= 1 mW
/// truncate to two decimals, entries below 1 mW round to three significant
/// digits, and the total row is the sum of the entries as printed (so the
/// table is internally consistent). The exact total follows underneath.
pub fn power_table(report: &PowerReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("analog power estimate for {} channels\n\n", report.channels));
    out.push_str(&format!(
        "{:<12} {:>10} {:>10} {:>14}\n",
        "component", "unit_mw", "quantity", "subtotal_mw"
    ));
    let mut displayed_total = 0.0;
    for component in &report.components {
        let shown = fmt_mw(component.subtotal_mw);
        displayed_total += shown.parse::<f64>().expect("fmt_mw emits plain decimals");
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>14}\n",
            component.name, component.unit_mw, component.quantity, shown
        ));
    }
    out.push_str(&format!(
        "{:<12} {:>10} {:>10} {:>14}\n",
        "total",
        "",
        "",
        fmt_mw(displayed_total)
    ));
    out.push_str(&format!(
        "\nexact total: {} mW (table entries use reference precision)\n",
        format!("{:.6}", report.total_mw)
            .trim_end_matches('0')
            .trim_end_matches('.')
    ));
    out
}

/// Reference-precision milliwatt formatting; see [`power_table`].
pub fn fmt_mw(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let text = if value >= 1.0 {
        // Truncate at two decimals after first rounding away binary fuzz.
        let rounded = format!("{value:.6}");
        let dot = rounded.find('.').expect("formatted with decimals");
        rounded[..dot + 3].to_string()
    } else {
        let decimals = 2 - value.abs().log10().floor() as i32;
        format!("{value:.*}", decimals.max(0) as usize)
    };
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}
