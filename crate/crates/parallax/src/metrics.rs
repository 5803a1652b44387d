//! Evaluation: disparity maps, alignment compositing, global correlation,
//! RMS disparity error against ground truth, and closed-form operation
//! accounting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::BlockGrid;
use crate::image::{GrayImage, GroundTruthDisparity};
use crate::ops::OpCounts;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("correlation is undefined for constant images")]
    ConstantInput,
    #[error("no pixels are valid in both the computed map and the ground truth")]
    NoJointlyValidPixels,
    #[error("disparity map does not match the grid it is claimed to come from")]
    MapGridMismatch,
    #[error("lattice geometry is inconsistent: {0}")]
    BadLattice(String),
}

/// One lattice cell of a disparity map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisparityCell {
    pub dx: i32,
    pub dy: i32,
    pub score: f64,
    /// Invalid cells carry no displacement meaning and are excluded from all
    /// metrics.
    pub valid: bool,
}

/// Per-block displacements on a lattice whose pitch is the grid stride.
/// `pitch == 1` is the per-pixel limit. Cell `(cx, cy)` belongs to the block
/// whose origin is `(offset + cx * pitch, offset + cy * pitch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    image_width: usize,
    image_height: usize,
    lattice_width: usize,
    lattice_height: usize,
    block: usize,
    pitch: usize,
    offset_x: usize,
    offset_y: usize,
    cells: Vec<DisparityCell>,
}

impl DisparityMap {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        image_width: usize,
        image_height: usize,
        lattice_width: usize,
        lattice_height: usize,
        block: usize,
        pitch: usize,
        offset_x: usize,
        offset_y: usize,
        cells: Vec<DisparityCell>,
    ) -> Result<Self, MetricsError> {
        if pitch == 0 || block == 0 || lattice_width == 0 || lattice_height == 0 {
            return Err(MetricsError::BadLattice(format!(
                "pitch {pitch}, block {block}, lattice {lattice_width}x{lattice_height}"
            )));
        }
        if cells.len() != lattice_width * lattice_height {
            return Err(MetricsError::BadLattice(format!(
                "{} cells for a {lattice_width}x{lattice_height} lattice",
                cells.len()
            )));
        }
        Ok(Self {
            image_width,
            image_height,
            lattice_width,
            lattice_height,
            block,
            pitch,
            offset_x,
            offset_y,
            cells,
        })
    }

    pub(crate) fn from_parts(
        grid: &BlockGrid,
        image_width: usize,
        image_height: usize,
        cells: Vec<DisparityCell>,
    ) -> Self {
        debug_assert_eq!(cells.len(), grid.len());
        Self {
            image_width,
            image_height,
            lattice_width: grid.cols(),
            lattice_height: grid.rows(),
            block: grid.block(),
            pitch: grid.stride(),
            offset_x: grid.margin(),
            offset_y: grid.margin(),
            cells,
        }
    }

    #[inline]
    pub fn image_width(&self) -> usize {
        self.image_width
    }

    #[inline]
    pub fn image_height(&self) -> usize {
        self.image_height
    }

    #[inline]
    pub fn lattice_width(&self) -> usize {
        self.lattice_width
    }

    #[inline]
    pub fn lattice_height(&self) -> usize {
        self.lattice_height
    }

    #[inline]
    pub fn block(&self) -> usize {
        self.block
    }

    /// Pixels per lattice cell (the grid stride).
    #[inline]
    pub fn pitch(&self) -> usize {
        self.pitch
    }

    /// Pixel coordinates of cell `(0, 0)`'s block origin.
    #[inline]
    pub fn offset(&self) -> (usize, usize) {
        (self.offset_x, self.offset_y)
    }

    #[inline]
    pub fn cells(&self) -> &[DisparityCell] {
        &self.cells
    }

    #[inline]
    pub fn cell(&self, cx: usize, cy: usize) -> &DisparityCell {
        &self.cells[cy * self.lattice_width + cx]
    }

    /// Pixel origin of the block behind cell `(cx, cy)`.
    #[inline]
    pub fn cell_origin(&self, cx: usize, cy: usize) -> (usize, usize) {
        (
            self.offset_x + cx * self.pitch,
            self.offset_y + cy * self.pitch,
        )
    }

    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|c| c.valid).count()
    }

    /// Densifies the lattice to pixel resolution by nearest-lattice fill:
    /// each pixel takes the cell whose block center is closest (no
    /// interpolation, so no disparity values are invented).
    pub fn densify(&self) -> DenseDisparity {
        let n = self.image_width * self.image_height;
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; n];
        let mut valid = vec![false; n];
        let half = (self.block - 1) as f64 / 2.0;
        for y in 0..self.image_height {
            let cy = self.nearest_cell(y, self.offset_y, self.lattice_height, half);
            for x in 0..self.image_width {
                let cx = self.nearest_cell(x, self.offset_x, self.lattice_width, half);
                let cell = self.cell(cx, cy);
                let i = y * self.image_width + x;
                if cell.valid {
                    dx[i] = cell.dx as f64;
                    dy[i] = cell.dy as f64;
                    valid[i] = true;
                }
            }
        }
        DenseDisparity {
            width: self.image_width,
            height: self.image_height,
            dx,
            dy,
            valid,
        }
    }

    #[inline]
    fn nearest_cell(&self, coord: usize, offset: usize, count: usize, half: f64) -> usize {
        let c = (coord as f64 - offset as f64 - half) / self.pitch as f64;
        (c.round().max(0.0) as usize).min(count - 1)
    }
}

/// A disparity map densified to pixel resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDisparity {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Shifts each valid block of the template by its cell's displacement onto a
/// copy of the template. Later blocks overwrite earlier ones where they
/// overlap; shifts landing outside the canvas are clipped; pixels no block
/// covers keep the template value.
pub fn apply_disparity(
    template: &GrayImage,
    map: &DisparityMap,
    grid: &BlockGrid,
) -> Result<GrayImage, MetricsError> {
    if grid.len() != map.cells().len()
        || grid.block() != map.block()
        || grid.stride() != map.pitch()
    {
        return Err(MetricsError::MapGridMismatch);
    }
    if map.image_width() != template.width() || map.image_height() != template.height() {
        return Err(MetricsError::DimensionMismatch {
            a_width: map.image_width(),
            a_height: map.image_height(),
            b_width: template.width(),
            b_height: template.height(),
        });
    }
    let (w, h) = (template.width(), template.height());
    let mut canvas = template.data().to_vec();
    let block = grid.block();
    for (index, &(ox, oy)) in grid.origins().iter().enumerate() {
        let cell = map.cells()[index];
        if !cell.valid {
            continue;
        }
        for by in 0..block {
            let ty = oy + by;
            let dst_y = ty as i64 + cell.dy as i64;
            if dst_y < 0 || dst_y as usize >= h {
                continue;
            }
            let src_row = template.row(ty);
            for bx in 0..block {
                let tx = ox + bx;
                let dst_x = tx as i64 + cell.dx as i64;
                if dst_x < 0 || dst_x as usize >= w {
                    continue;
                }
                canvas[dst_y as usize * w + dst_x as usize] = src_row[tx];
            }
        }
    }
    Ok(GrayImage::new(w, h, canvas).expect("canvas values come from a valid image"))
}

/// Global zero-mean normalized correlation between two equally sized images:
/// the correlation surface evaluated at the single zero shift over the whole
/// overlap. In `[-1, 1]`; affine intensity changes of either image leave it
/// unchanged.
pub fn correlation_coefficient(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch {
            a_width: a.width(),
            a_height: a.height(),
            b_width: b.width(),
            b_height: b.height(),
        });
    }
    let mean_a = a.mean();
    let mean_b = b.mean();
    let mut num = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&pa, &pb) in a.data().iter().zip(b.data()) {
        let da = pa - mean_a;
        let db = pb - mean_b;
        num += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a < crate::ncc::DEGENERATE_VAR || var_b < crate::ncc::DEGENERATE_VAR {
        return Err(MetricsError::ConstantInput);
    }
    Ok(num / (var_a * var_b).sqrt())
}

/// RMS error between computed x-disparities (densified to pixel resolution)
/// and the ground truth, over pixels valid in both. Ground truth encodes
/// horizontal disparity only, so y-displacements are not scored.
pub fn rms_disparity_error(
    map: &DisparityMap,
    truth: &GroundTruthDisparity,
) -> Result<f64, MetricsError> {
    if map.image_width() != truth.width() || map.image_height() != truth.height() {
        return Err(MetricsError::DimensionMismatch {
            a_width: map.image_width(),
            a_height: map.image_height(),
            b_width: truth.width(),
            b_height: truth.height(),
        });
    }
    let dense = map.densify();
    let mut count = 0u64;
    let mut sum_sq = 0.0;
    for i in 0..dense.dx.len() {
        if dense.valid[i] && truth.validity()[i] {
            let err = dense.dx[i] - truth.disparities()[i];
            sum_sq += err * err;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::NoJointlyValidPixels);
    }
    Ok((sum_sq / count as f64).sqrt())
}

/// Algorithm variant, for operation accounting and experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    FullNcc,
    DiagonalNcc,
    Sad,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::FullNcc => "full_ncc",
            Variant::DiagonalNcc => "diagonal_ncc",
            Variant::Sad => "sad",
        };
        f.write_str(name)
    }
}

/// Closed-form numerator operation counts for a run over `blocks` blocks of
/// side `block`, each evaluated at `shifts` shifts. Full-block variants cost
/// `block^2` per shift; the diagonal variant costs `block`. These formulas
/// are what the instrumented counters in the matchers must reproduce.
pub fn op_count(variant: Variant, block: usize, shifts: u64, blocks: u64) -> OpCounts {
    let per_shift_full = (block * block) as u64;
    let per_shift_diag = block as u64;
    let evaluations = shifts * blocks;
    match variant {
        Variant::FullNcc => OpCounts {
            multiplies: evaluations * per_shift_full,
            adds: evaluations * per_shift_full,
            abs_diffs: 0,
        },
        Variant::DiagonalNcc => OpCounts {
            multiplies: evaluations * per_shift_diag,
            adds: evaluations * per_shift_diag,
            abs_diffs: 0,
        },
        Variant::Sad => OpCounts {
            multiplies: 0,
            adds: evaluations * per_shift_full,
            abs_diffs: evaluations * per_shift_full,
        },
    }
}
