//! Experiment configuration: a strict TOML document that is the single source
//! of truth for the CLI. Unknown keys are rejected (not ignored) so typos in
//! experiment definitions surface immediately, and sweeps expand eagerly so a
//! run manifest can be logged before any compute starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Variant;
use crate::score::SearchWindow;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config render error: {0}")]
    Render(#[from] toml::ser::Error),
    #[error("key '{key}': {reason}")]
    Constraint { key: &'static str, reason: String },
    #[error("key '{key}': file not found: {path}")]
    MissingFile { key: &'static str, path: PathBuf },
}

fn default_block() -> usize {
    15
}

fn default_scale() -> f64 {
    3.0
}

fn default_variant() -> Variant {
    Variant::FullNcc
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Default overlap for a block size: roughly 65% of the block, the sweet spot
/// between per-pixel accuracy and patch-mode cost.
pub fn default_overlap(block: usize) -> usize {
    (0.65 * block as f64).round() as usize
}

/// Search window bounds, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub u_min: i32,
    pub u_max: i32,
    pub v_min: i32,
    pub v_max: i32,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            u_min: -16,
            u_max: 16,
            v_min: -2,
            v_max: 2,
        }
    }
}

impl SearchConfig {
    pub fn window(&self) -> Result<SearchWindow, ConfigError> {
        SearchWindow::new(self.u_min, self.u_max, self.v_min, self.v_max).map_err(|e| {
            ConfigError::Constraint {
                key: "search",
                reason: e.to_string(),
            }
        })
    }

    /// Smallest margin that keeps every windowed shift of an interior block
    /// inside an equally sized reference image.
    pub fn required_margin(&self) -> usize {
        [self.u_min.abs(), self.u_max.abs(), self.v_min.abs(), self.v_max.abs()]
            .into_iter()
            .max()
            .unwrap_or(0) as usize
    }
}

/// Which image's RMS scales injected noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmsSource {
    Template,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub multiplier_pct: f64,
    #[serde(default)]
    pub integrator_pct: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rms_source")]
    pub rms_source: RmsSource,
}

fn default_rms_source() -> RmsSource {
    RmsSource::Template
}

/// An overlap sweep axis: an explicit list, or `"all"` for `0..block-1` at
/// each swept block size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OverlapAxis {
    All(AllToken),
    List(Vec<usize>),
}

/// The literal string `"all"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AllToken {
    #[serde(rename = "all")]
    All,
}

/// Sweep axes. Each listed axis replaces the corresponding base value; the
/// expansion is the cartesian product in a fixed order (block, overlap,
/// multiplier, integrator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier_pct: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator_pct: Option<Vec<f64>>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.block.is_none()
            && self.overlap.is_none()
            && self.multiplier_pct.is_none()
            && self.integrator_pct.is_none()
    }
}

/// A fully described experiment. Paths are as written in the document; call
/// [`resolve_paths`] to apply a dataset root and check existence before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub template: PathBuf,
    pub reference: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default = "default_scale")]
    pub ground_truth_scale: f64,
    #[serde(default)]
    pub ground_truth_unknown: u16,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_block")]
    pub block: usize,
    /// `None` defaults to [`default_overlap`] of the block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<usize>,
    /// `None` derives the margin from the search bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<usize>,
    /// `None` defaults to the block size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ma_window: Option<usize>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads for block evaluation: 0 = all cores, 1 = sequential.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_true")]
    pub use_sum_tables: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// A config for the given pair with every other key at its default.
    pub fn new(template: PathBuf, reference: PathBuf) -> Self {
        Self {
            template,
            reference,
            ground_truth: None,
            ground_truth_scale: default_scale(),
            ground_truth_unknown: 0,
            variant: default_variant(),
            block: default_block(),
            overlap: None,
            margin: None,
            ma_window: None,
            search: SearchConfig::default(),
            noise: None,
            sweep: None,
            output_dir: default_output_dir(),
            threads: 0,
            use_sum_tables: true,
        }
    }

    pub fn effective_overlap(&self) -> usize {
        self.overlap.unwrap_or_else(|| default_overlap(self.block))
    }

    pub fn effective_margin(&self) -> usize {
        self.margin.unwrap_or_else(|| self.search.required_margin())
    }

    pub fn effective_ma_window(&self) -> usize {
        self.ma_window.unwrap_or(self.block)
    }
}

/// Parses and validates an experiment document. Every constraint violation
/// names the offending key; nothing is partially applied.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text)?;
    validate(&config)?;
    Ok(config)
}

/// Renders a config back to TOML. `parse_config(render_config(c)) == c`.
pub fn render_config(config: &ExperimentConfig) -> Result<String, ConfigError> {
    Ok(toml::to_string_pretty(config)?)
}

/// Re-checks all constraints; called by [`parse_config`] and again on each
/// expanded sweep run.
pub fn validate(config: &ExperimentConfig) -> Result<(), ConfigError> {
    let constraint = |key: &'static str, reason: String| ConfigError::Constraint { key, reason };
    if config.block < 2 {
        return Err(constraint(
            "block",
            format!("must be at least 2, got {}", config.block),
        ));
    }
    let overlap = config.effective_overlap();
    if overlap >= config.block {
        return Err(constraint(
            "overlap",
            format!("must be smaller than block {}, got {overlap}", config.block),
        ));
    }
    let ma = config.effective_ma_window();
    if ma == 0 || ma > config.block {
        return Err(constraint(
            "ma_window",
            format!("must be in [1, block {}], got {ma}", config.block),
        ));
    }
    config.search.window()?;
    if config.ground_truth_scale.is_nan() || config.ground_truth_scale <= 0.0 {
        return Err(constraint(
            "ground_truth_scale",
            format!("must be positive, got {}", config.ground_truth_scale),
        ));
    }
    if let Some(noise) = &config.noise {
        if noise.multiplier_pct.is_nan() || noise.multiplier_pct < 0.0 {
            return Err(constraint(
                "noise.multiplier_pct",
                format!("must be nonnegative, got {}", noise.multiplier_pct),
            ));
        }
        if noise.integrator_pct.is_nan() || noise.integrator_pct < 0.0 {
            return Err(constraint(
                "noise.integrator_pct",
                format!("must be nonnegative, got {}", noise.integrator_pct),
            ));
        }
    }
    if let Some(sweep) = &config.sweep {
        if let Some(blocks) = &sweep.block {
            if blocks.is_empty() {
                return Err(constraint("sweep.block", "axis must not be empty".into()));
            }
        }
        if let Some(OverlapAxis::List(list)) = &sweep.overlap {
            if list.is_empty() {
                return Err(constraint("sweep.overlap", "axis must not be empty".into()));
            }
        }
    }
    Ok(())
}

/// Resolves the input paths against an optional dataset root (the
/// `PARALLAX_DATA_DIR` environment variable, for the CLI) and verifies the
/// files exist. Absolute paths ignore the root.
pub fn resolve_paths(
    config: &mut ExperimentConfig,
    data_root: Option<&Path>,
) -> Result<(), ConfigError> {
    let resolve = |key: &'static str, path: &mut PathBuf| -> Result<(), ConfigError> {
        if let Some(root) = data_root {
            if path.is_relative() {
                *path = root.join(&path);
            }
        }
        if !path.is_file() {
            return Err(ConfigError::MissingFile {
                key,
                path: path.clone(),
            });
        }
        Ok(())
    };
    resolve("template", &mut config.template)?;
    resolve("reference", &mut config.reference)?;
    if let Some(gt) = &mut config.ground_truth {
        resolve("ground_truth", gt)?;
    }
    Ok(())
}

/// One concrete run produced by sweep expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub label: String,
    pub config: ExperimentConfig,
}

/// Expands the sweep axes into concrete runs, eagerly, in a fixed order.
/// A config without sweep axes yields exactly one plan (the base run).
pub fn expand_sweep(config: &ExperimentConfig) -> Result<Vec<RunPlan>, ConfigError> {
    let sweep = match &config.sweep {
        Some(s) if !s.is_empty() => s.clone(),
        _ => {
            return Ok(vec![RunPlan {
                label: "run_000".into(),
                config: ExperimentConfig {
                    sweep: None,
                    ..config.clone()
                },
            }])
        }
    };

    let blocks: Vec<usize> = sweep.block.clone().unwrap_or_else(|| vec![config.block]);
    let mult_axis: Vec<Option<f64>> = match &sweep.multiplier_pct {
        Some(values) => values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let integ_axis: Vec<Option<f64>> = match &sweep.integrator_pct {
        Some(values) => values.iter().copied().map(Some).collect(),
        None => vec![None],
    };

    let mut plans = Vec::new();
    for &block in &blocks {
        let overlaps: Vec<usize> = match &sweep.overlap {
            None => vec![config.overlap.unwrap_or_else(|| default_overlap(block))],
            Some(OverlapAxis::List(list)) => list.clone(),
            Some(OverlapAxis::All(_)) => (0..block).collect(),
        };
        for &overlap in &overlaps {
            for &mult in &mult_axis {
                for &integ in &integ_axis {
                    let mut run = ExperimentConfig {
                        sweep: None,
                        block,
                        overlap: Some(overlap),
                        // Per-block defaults must track the swept block size.
                        ma_window: config.ma_window.or(Some(block)),
                        ..config.clone()
                    };
                    let mut label = format!("run_{:03}_b{block}_o{overlap}", plans.len());
                    if mult.is_some() || integ.is_some() {
                        let mut noise = run.noise.clone().unwrap_or(NoiseConfig {
                            multiplier_pct: 0.0,
                            integrator_pct: 0.0,
                            seed: 0,
                            rms_source: default_rms_source(),
                        });
                        if let Some(m) = mult {
                            noise.multiplier_pct = m;
                            label.push_str(&format!("_m{m}"));
                        }
                        if let Some(i) = integ {
                            noise.integrator_pct = i;
                            label.push_str(&format!("_i{i}"));
                        }
                        run.noise = Some(noise);
                    }
                    validate(&run)?;
                    plans.push(RunPlan { label, config: run });
                }
            }
        }
    }
    Ok(plans)
}
