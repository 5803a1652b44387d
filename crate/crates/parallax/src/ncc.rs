//! Normalized cross-correlation matching.
//!
//! Two variants are provided. The full-block baseline evaluates the classic
//! zero-mean normalized correlation over every pixel of a square block, with
//! the reference-side denominator terms optionally served from precomputed
//! sum tables. The diagonal variant evaluates the same correlation over only
//! the block's diagonal elements, turning the 2-D operation into a 1-D one
//! (block multiplies per shift instead of block^2), and replaces the block
//! mean with a causal moving average so mean removal can run on a streamed
//! signal.

use thiserror::Error;

use crate::analog::{noise_sample, NoiseSpec, NoiseStage, SampleKey};
use crate::grid::{extract_block, extract_diagonal, BlockGrid, Diagonal, GridError};
use crate::image::GrayImage;
use crate::metrics::{DisparityCell, DisparityMap};
use crate::ops;
use crate::score::{best_shift, BestShift, Extremum, ScoreError, ScoreSurface, SearchWindow};

/// Variance below which a block or reference region is treated as constant
/// and its correlation left undefined (the shift is marked invalid).
pub const DEGENERATE_VAR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("moving-average window {ma_window} invalid for signal length {len}")]
    InvalidMaWindow { ma_window: usize, len: usize },
    #[error("signal is empty")]
    EmptySignal,
    #[error("block dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    BlockShapeMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
}

/// Cumulative sum tables over a reference image, sized `(width+1) x (height+1)`
/// with a zero border: entry `(x, y)` holds the sum of all pixels (or squared
/// pixels) in the rectangle `[0, x) x [0, y)`. Any axis-aligned rectangle sum
/// is then four lookups.
#[derive(Debug, Clone)]
pub struct SumTables {
    width: usize,
    height: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl SumTables {
    pub fn build(reference: &GrayImage) -> Self {
        let (w, h) = (reference.width(), reference.height());
        let stride = w + 1;
        let mut sum = vec![0.0; stride * (h + 1)];
        let mut sum_sq = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let row = reference.row(y);
            let mut acc = 0.0;
            let mut acc_sq = 0.0;
            for x in 0..w {
                let v = row[x];
                acc += v;
                acc_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + acc;
                sum_sq[(y + 1) * stride + x + 1] = sum_sq[y * stride + x + 1] + acc_sq;
            }
        }
        Self {
            width: w,
            height: h,
            sum,
            sum_sq,
        }
    }

    #[inline]
    fn rect(&self, table: &[f64], x: usize, y: usize, w: usize, h: usize) -> f64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        let stride = self.width + 1;
        table[(y + h) * stride + x + w] + table[y * stride + x]
            - table[y * stride + x + w]
            - table[(y + h) * stride + x]
    }

    /// Sum of pixels over the rectangle of size `w x h` at `(x, y)`.
    #[inline]
    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        self.rect(&self.sum, x, y, w, h)
    }

    /// Sum of squared pixels over the rectangle of size `w x h` at `(x, y)`.
    #[inline]
    pub fn rect_sum_sq(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        self.rect(&self.sum_sq, x, y, w, h)
    }
}

/// Causal moving average: `out[k]` is the mean of the trailing `window_len`
/// samples ending at `k`, with a shortened window during warm-up. Models a
/// low-pass filter fed a stream.
pub fn moving_average(signal: &[f64], window_len: usize) -> Result<Vec<f64>, MatchError> {
    if signal.is_empty() {
        return Err(MatchError::EmptySignal);
    }
    if window_len == 0 || window_len > signal.len() {
        return Err(MatchError::InvalidMaWindow {
            ma_window: window_len,
            len: signal.len(),
        });
    }
    let mut out = Vec::with_capacity(signal.len());
    moving_average_into(signal, window_len, &mut out);
    Ok(out)
}

fn moving_average_into(signal: &[f64], window_len: usize, out: &mut Vec<f64>) {
    out.clear();
    if window_len == 1 {
        out.extend_from_slice(signal);
        return;
    }
    let mut acc = 0.0;
    for k in 0..signal.len() {
        acc += signal[k];
        if k >= window_len {
            acc -= signal[k - window_len];
        }
        let denom = (k + 1).min(window_len);
        out.push(acc / denom as f64);
    }
}

pub(crate) struct NoiseBinding<'a> {
    pub spec: &'a NoiseSpec,
    pub block: u64,
}

/// Full-block NCC of `template_block` against the reference regions at
/// `origin + (u, v)` for every shift in `window`.
///
/// Shifts whose block-sized region falls outside the reference are marked
/// invalid rather than reported as errors, as are shifts with a degenerate
/// (constant) reference region; a constant template yields an all-invalid
/// surface. When `tables` is given, the reference sums in the denominator
/// come from table lookups instead of direct summation; the tables must have
/// been built over this same `reference`.
pub fn ncc_full(
    template_block: &GrayImage,
    reference: &GrayImage,
    origin: (usize, usize),
    window: SearchWindow,
    tables: Option<&SumTables>,
) -> ScoreSurface {
    ncc_full_inner(template_block, reference, origin, window, tables, None)
}

pub(crate) fn ncc_full_inner(
    template_block: &GrayImage,
    reference: &GrayImage,
    origin: (usize, usize),
    window: SearchWindow,
    tables: Option<&SumTables>,
    noise: Option<&NoiseBinding<'_>>,
) -> ScoreSurface {
    let (bw, bh) = (template_block.width(), template_block.height());
    let n = (bw * bh) as f64;
    let mut surface = ScoreSurface::invalid(window);
    if let Some(tables) = tables {
        debug_assert_eq!(
            (tables.width, tables.height),
            (reference.width(), reference.height()),
            "sum tables built over a different image"
        );
    }

    let t_mean = template_block.mean();
    let t_dev: Vec<f64> = template_block.data().iter().map(|&t| t - t_mean).collect();
    let t_var: f64 = t_dev.iter().map(|&d| d * d).sum();
    if t_var < DEGENERATE_VAR {
        return surface;
    }

    let (ref_w, ref_h) = (reference.width(), reference.height());
    for (shift_id, (u, v)) in window.shifts().enumerate() {
        let rx = origin.0 as i64 + u as i64;
        let ry = origin.1 as i64 + v as i64;
        if rx < 0 || ry < 0 || rx as usize + bw > ref_w || ry as usize + bh > ref_h {
            continue;
        }
        let (rx, ry) = (rx as usize, ry as usize);

        let (sum_r, sum_sq) = match tables {
            Some(t) => (t.rect_sum(rx, ry, bw, bh), t.rect_sum_sq(rx, ry, bw, bh)),
            None => {
                let mut sum_r = 0.0;
                let mut sum_sq = 0.0;
                for ty in 0..bh {
                    let row = &reference.row(ry + ty)[rx..rx + bw];
                    for &val in row {
                        sum_r += val;
                        sum_sq += val * val;
                    }
                }
                (sum_r, sum_sq)
            }
        };
        let r_mean = sum_r / n;
        let r_var = sum_sq - sum_r * sum_r / n;
        if r_var < DEGENERATE_VAR {
            continue;
        }

        ops::record_multiplies((bw * bh) as u64);
        ops::record_adds((bw * bh) as u64);
        let numerator = match noise {
            None => {
                let mut num = 0.0;
                for ty in 0..bh {
                    let r_row = &reference.row(ry + ty)[rx..rx + bw];
                    let t_row = &t_dev[ty * bw..(ty + 1) * bw];
                    for tx in 0..bw {
                        num += t_row[tx] * (r_row[tx] - r_mean);
                    }
                }
                num
            }
            Some(binding) => {
                // The multiplier perturbs every product sample; the integrator
                // output is sampled once per row (the 1-D summation), with the
                // cross-row summation assumed digital.
                let mut num = 0.0;
                for ty in 0..bh {
                    let r_row = &reference.row(ry + ty)[rx..rx + bw];
                    let t_row = &t_dev[ty * bw..(ty + 1) * bw];
                    let mut row_acc = 0.0;
                    for tx in 0..bw {
                        let product = t_row[tx] * (r_row[tx] - r_mean);
                        row_acc += product
                            + noise_sample(
                                binding.spec,
                                NoiseStage::Multiplier,
                                SampleKey {
                                    block: binding.block,
                                    shift: shift_id as u64,
                                    sample: (ty * bw + tx) as u64,
                                },
                            );
                    }
                    row_acc += noise_sample(
                        binding.spec,
                        NoiseStage::Integrator,
                        SampleKey {
                            block: binding.block,
                            shift: shift_id as u64,
                            sample: ty as u64,
                        },
                    );
                    num += row_acc;
                }
                num
            }
        };
        surface.set(u, v, numerator / (t_var * r_var).sqrt());
    }
    surface
}

/// Diagonal-only NCC: correlates `template_diag` against the same-kind
/// diagonal of the reference block at each shifted origin, after subtracting
/// a causal moving average of length `ma_window` from both signals.
///
/// Per shift this costs `block` multiplies instead of the full variant's
/// `block^2`. `which` selects the diagonal read from the reference and must
/// match the one the template diagonal was extracted with.
pub fn ncc_diagonal(
    template_diag: &[f64],
    reference: &GrayImage,
    origin: (usize, usize),
    window: SearchWindow,
    ma_window: usize,
    which: Diagonal,
) -> Result<ScoreSurface, MatchError> {
    ncc_diagonal_inner(template_diag, reference, origin, window, ma_window, which, None)
}

pub(crate) fn ncc_diagonal_inner(
    template_diag: &[f64],
    reference: &GrayImage,
    origin: (usize, usize),
    window: SearchWindow,
    ma_window: usize,
    which: Diagonal,
    noise: Option<&NoiseBinding<'_>>,
) -> Result<ScoreSurface, MatchError> {
    let block = template_diag.len();
    if block == 0 {
        return Err(MatchError::EmptySignal);
    }
    if ma_window == 0 || ma_window > block {
        return Err(MatchError::InvalidMaWindow {
            ma_window,
            len: block,
        });
    }

    let mut surface = ScoreSurface::invalid(window);
    let t_ma = moving_average(template_diag, ma_window)?;
    let t_dev: Vec<f64> = template_diag
        .iter()
        .zip(&t_ma)
        .map(|(&t, &m)| t - m)
        .collect();
    let t_energy: f64 = t_dev.iter().map(|&d| d * d).sum();
    if t_energy < DEGENERATE_VAR {
        return Ok(surface);
    }

    let (ref_w, ref_h) = (reference.width(), reference.height());
    let mut r_diag = Vec::with_capacity(block);
    let mut r_ma = Vec::with_capacity(block);
    for (shift_id, (u, v)) in window.shifts().enumerate() {
        let rx = origin.0 as i64 + u as i64;
        let ry = origin.1 as i64 + v as i64;
        if rx < 0 || ry < 0 || rx as usize + block > ref_w || ry as usize + block > ref_h {
            continue;
        }
        let (rx, ry) = (rx as usize, ry as usize);

        r_diag.clear();
        for k in 0..block {
            let px = match which {
                Diagonal::Main => rx + k,
                Diagonal::Anti => rx + block - 1 - k,
            };
            r_diag.push(reference.get(px, ry + k));
        }
        moving_average_into(&r_diag, ma_window, &mut r_ma);

        let mut r_energy = 0.0;
        for k in 0..block {
            let d = r_diag[k] - r_ma[k];
            r_energy += d * d;
        }
        if r_energy < DEGENERATE_VAR {
            continue;
        }

        ops::record_multiplies(block as u64);
        ops::record_adds(block as u64);
        let mut num = 0.0;
        match noise {
            None => {
                for k in 0..block {
                    num += t_dev[k] * (r_diag[k] - r_ma[k]);
                }
            }
            Some(binding) => {
                for k in 0..block {
                    let product = t_dev[k] * (r_diag[k] - r_ma[k]);
                    num += product
                        + noise_sample(
                            binding.spec,
                            NoiseStage::Multiplier,
                            SampleKey {
                                block: binding.block,
                                shift: shift_id as u64,
                                sample: k as u64,
                            },
                        );
                }
                // One integrator output sample per shift: the whole diagonal
                // is a single 1-D integration.
                num += noise_sample(
                    binding.spec,
                    NoiseStage::Integrator,
                    SampleKey {
                        block: binding.block,
                        shift: shift_id as u64,
                        sample: 0,
                    },
                );
            }
        }
        surface.set(u, v, num / (t_energy * r_energy).sqrt());
    }
    Ok(surface)
}

/// Which correlation variant [`match_ncc`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NccVariant {
    Full,
    Diagonal,
}

/// Parameters for [`match_ncc`].
#[derive(Debug, Clone)]
pub struct NccParams {
    pub window: SearchWindow,
    pub variant: NccVariant,
    /// Diagonal read by the diagonal variant.
    pub diagonal: Diagonal,
    /// Moving-average length for the diagonal variant; `None` uses the block
    /// size, approximating the block mean the full variant subtracts.
    pub ma_window: Option<usize>,
    /// Serve full-variant denominator sums from tables built once per call.
    pub use_sum_tables: bool,
    pub noise: Option<NoiseSpec>,
    /// Evaluate blocks on the rayon pool. The result is identical to the
    /// sequential run: noise is keyed by block and shift, never drawn from
    /// shared state.
    pub parallel: bool,
}

impl NccParams {
    pub fn new(window: SearchWindow, variant: NccVariant) -> Self {
        Self {
            window,
            variant,
            diagonal: Diagonal::Main,
            ma_window: None,
            use_sum_tables: true,
            noise: None,
            parallel: false,
        }
    }
}

/// Matches every block of `grid` against `reference`, maximizing the chosen
/// correlation variant over the search window. Blocks that are degenerate (or
/// whose every shift is out of bounds) yield invalid map cells.
pub fn match_ncc(
    template: &GrayImage,
    reference: &GrayImage,
    grid: &BlockGrid,
    params: &NccParams,
) -> Result<DisparityMap, MatchError> {
    let block = grid.block();
    let ma_window = params.ma_window.unwrap_or(block);
    if params.variant == NccVariant::Diagonal && (ma_window == 0 || ma_window > block) {
        return Err(MatchError::InvalidMaWindow {
            ma_window,
            len: block,
        });
    }
    let noise = params.noise.as_ref().filter(|spec| !spec.is_zero());
    let tables = (params.variant == NccVariant::Full && params.use_sum_tables)
        .then(|| SumTables::build(reference));

    let cells = run_blocks(grid, params.parallel, |index, origin| {
        let binding = noise.map(|spec| NoiseBinding {
            spec,
            block: index as u64,
        });
        let surface = match params.variant {
            NccVariant::Full => {
                let blk = extract_block(template, origin, block)?;
                ncc_full_inner(
                    &blk,
                    reference,
                    origin,
                    params.window,
                    tables.as_ref(),
                    binding.as_ref(),
                )
            }
            NccVariant::Diagonal => {
                let diag = extract_diagonal(template, origin, block, params.diagonal)?;
                ncc_diagonal_inner(
                    &diag,
                    reference,
                    origin,
                    params.window,
                    ma_window,
                    params.diagonal,
                    binding.as_ref(),
                )?
            }
        };
        Ok(cell_from(best_shift(&surface, Extremum::Maximize)))
    })?;
    Ok(DisparityMap::from_parts(
        grid,
        template.width(),
        template.height(),
        cells,
    ))
}

pub(crate) fn cell_from(best: Result<BestShift, ScoreError>) -> DisparityCell {
    match best {
        Ok(b) => DisparityCell {
            dx: b.u,
            dy: b.v,
            score: b.score,
            valid: true,
        },
        Err(_) => DisparityCell {
            dx: 0,
            dy: 0,
            score: 0.0,
            valid: false,
        },
    }
}

pub(crate) fn run_blocks<F>(
    grid: &BlockGrid,
    parallel: bool,
    f: F,
) -> Result<Vec<DisparityCell>, MatchError>
where
    F: Fn(usize, (usize, usize)) -> Result<DisparityCell, MatchError> + Sync,
{
    if parallel {
        use rayon::prelude::*;
        grid.origins()
            .par_iter()
            .enumerate()
            .map(|(i, &o)| f(i, o))
            .collect()
    } else {
        grid.origins()
            .iter()
            .enumerate()
            .map(|(i, &o)| f(i, o))
            .collect()
    }
}
