//! Sum-of-absolute-differences matching with overlapping blocks.
//!
//! SAD is a nonnegative dissimilarity (zero only for identical blocks), so
//! the best shift minimizes the surface. Overlap between neighbouring blocks
//! sets the disparity lattice pitch: at `overlap = block - 1` every pixel
//! position carries its own estimate, the per-pixel limit; lowering the
//! overlap divides the work by `stride^2` at the cost of a coarser map.

use crate::analog::{noise_sample, NoiseSpec, NoiseStage, SampleKey};
use crate::grid::{extract_block, BlockGrid};
use crate::image::GrayImage;
use crate::metrics::DisparityMap;
use crate::ncc::{cell_from, run_blocks, MatchError, NoiseBinding};
use crate::ops;
use crate::score::{best_shift, Extremum, ScoreSurface, SearchWindow};

/// Sum of absolute pixel differences between two equally sized blocks.
pub fn sad_block(reference_block: &GrayImage, template_block: &GrayImage) -> Result<f64, MatchError> {
    if reference_block.width() != template_block.width()
        || reference_block.height() != template_block.height()
    {
        return Err(MatchError::BlockShapeMismatch {
            a_width: reference_block.width(),
            a_height: reference_block.height(),
            b_width: template_block.width(),
            b_height: template_block.height(),
        });
    }
    let sum = reference_block
        .data()
        .iter()
        .zip(template_block.data())
        .map(|(&r, &t)| (r - t).abs())
        .sum();
    let n = (reference_block.width() * reference_block.height()) as u64;
    ops::record_abs_diffs(n);
    ops::record_adds(n);
    Ok(sum)
}

/// SAD of `template_block` against the reference regions at `origin + (u, v)`
/// over `window`; lower is better. Out-of-bounds shifts are marked invalid.
///
/// With `noise` given, every absolute-difference output sample is perturbed
/// (the absolute-value circuit draws from the multiplier noise budget) and
/// each row's integrator output sample is perturbed once, mirroring the
/// row-at-a-time analog readout.
pub fn sad_search(
    template_block: &GrayImage,
    reference: &GrayImage,
    origin: (usize, usize),
    window: SearchWindow,
    noise: Option<&NoiseSpec>,
) -> ScoreSurface {
    let binding = noise
        .filter(|spec| !spec.is_zero())
        .map(|spec| NoiseBinding { spec, block: 0 });
    sad_search_inner(template_block, reference, origin, window, binding.as_ref())
}

pub(crate) fn sad_search_inner(
    template_block: &GrayImage,
    reference: &GrayImage,
    origin: (usize, usize),
    window: SearchWindow,
    noise: Option<&NoiseBinding<'_>>,
) -> ScoreSurface {
    let (bw, bh) = (template_block.width(), template_block.height());
    let (ref_w, ref_h) = (reference.width(), reference.height());
    let mut surface = ScoreSurface::invalid(window);

    for (shift_id, (u, v)) in window.shifts().enumerate() {
        let rx = origin.0 as i64 + u as i64;
        let ry = origin.1 as i64 + v as i64;
        if rx < 0 || ry < 0 || rx as usize + bw > ref_w || ry as usize + bh > ref_h {
            continue;
        }
        let (rx, ry) = (rx as usize, ry as usize);

        ops::record_abs_diffs((bw * bh) as u64);
        ops::record_adds((bw * bh) as u64);
        let mut total = 0.0;
        match noise {
            None => {
                for ty in 0..bh {
                    let r_row = &reference.row(ry + ty)[rx..rx + bw];
                    let t_row = template_block.row(ty);
                    for tx in 0..bw {
                        total += (r_row[tx] - t_row[tx]).abs();
                    }
                }
            }
            Some(binding) => {
                for ty in 0..bh {
                    let r_row = &reference.row(ry + ty)[rx..rx + bw];
                    let t_row = template_block.row(ty);
                    let mut row_acc = 0.0;
                    for tx in 0..bw {
                        let diff = (r_row[tx] - t_row[tx]).abs();
                        row_acc += diff
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
                    total += row_acc;
                }
            }
        }
        surface.set(u, v, total);
    }
    surface
}

/// Parameters for [`match_sad`].
#[derive(Debug, Clone)]
pub struct SadParams {
    pub window: SearchWindow,
    pub noise: Option<NoiseSpec>,
    /// Evaluate blocks on the rayon pool; bit-identical to the sequential run.
    pub parallel: bool,
}

impl SadParams {
    pub fn new(window: SearchWindow) -> Self {
        Self {
            window,
            noise: None,
            parallel: false,
        }
    }
}

/// Matches every block of `grid` against `reference` by minimizing SAD,
/// reporting displacement in both x and y. Each block's result lands in its
/// origin's lattice cell, so the map pitch equals the grid stride.
pub fn match_sad(
    template: &GrayImage,
    reference: &GrayImage,
    grid: &BlockGrid,
    params: &SadParams,
) -> Result<DisparityMap, MatchError> {
    let block = grid.block();
    let noise = params.noise.as_ref().filter(|spec| !spec.is_zero());
    let cells = run_blocks(grid, params.parallel, |index, origin| {
        let blk = extract_block(template, origin, block)?;
        let binding = noise.map(|spec| NoiseBinding {
            spec,
            block: index as u64,
        });
        let surface = sad_search_inner(&blk, reference, origin, params.window, binding.as_ref());
        Ok(cell_from(best_shift(&surface, Extremum::Minimize)))
    })?;
    Ok(DisparityMap::from_parts(
        grid,
        template.width(),
        template.height(),
        cells,
    ))
}
