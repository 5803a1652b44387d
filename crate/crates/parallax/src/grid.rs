//! Block-grid geometry: square template blocks, overlap/stride arithmetic and
//! per-block pixel or diagonal access.

use thiserror::Error;

use crate::image::GrayImage;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("block must be at least 2 pixels, got {0}")]
    BlockTooSmall(usize),
    #[error("overlap {overlap} must be smaller than block {block}")]
    OverlapTooLarge { overlap: usize, block: usize },
    #[error("block {block} with margin {margin} does not fit a {width}x{height} image")]
    BlockTooLarge {
        block: usize,
        margin: usize,
        width: usize,
        height: usize,
    },
    #[error("block of {block} at ({x}, {y}) exceeds the {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        block: usize,
        width: usize,
        height: usize,
    },
}

/// Which block diagonal to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagonal {
    /// Top-left to bottom-right.
    Main,
    /// Top-right to bottom-left.
    Anti,
}

/// Geometry of square template blocks laid out over an image: block side,
/// overlap between neighbours, the resulting stride, and the row-major list of
/// block origins. A `margin` border is left uncovered so search shifts applied
/// to the blocks stay inside the reference image.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    block: usize,
    overlap: usize,
    stride: usize,
    margin: usize,
    cols: usize,
    rows: usize,
    origins: Vec<(usize, usize)>,
}

impl BlockGrid {
    #[inline]
    pub fn block(&self) -> usize {
        self.block
    }

    #[inline]
    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Lattice pitch: `block - overlap`.
    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn margin(&self) -> usize {
        self.margin
    }

    /// Blocks per row.
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Blocks per column.
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Top-left corners of every block, row-major.
    #[inline]
    pub fn origins(&self) -> &[(usize, usize)] {
        &self.origins
    }

    #[inline]
    pub fn origin(&self, index: usize) -> (usize, usize) {
        self.origins[index]
    }
}

/// Lays out square blocks of side `block` with the given `overlap` over an
/// image, leaving `margin` pixels uncovered on every side. Origins step by
/// `stride = block - overlap` in row-major order; trailing area narrower than
/// one block is not covered.
pub fn partition(
    image_width: usize,
    image_height: usize,
    block: usize,
    overlap: usize,
    margin: usize,
) -> Result<BlockGrid, GridError> {
    if block < 2 {
        return Err(GridError::BlockTooSmall(block));
    }
    if overlap >= block {
        return Err(GridError::OverlapTooLarge { overlap, block });
    }
    let usable_width = image_width.saturating_sub(2 * margin);
    let usable_height = image_height.saturating_sub(2 * margin);
    if block > usable_width || block > usable_height {
        return Err(GridError::BlockTooLarge {
            block,
            margin,
            width: image_width,
            height: image_height,
        });
    }
    let stride = block - overlap;
    let cols = (usable_width - block) / stride + 1;
    let rows = (usable_height - block) / stride + 1;
    let mut origins = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            origins.push((margin + c * stride, margin + r * stride));
        }
    }
    Ok(BlockGrid {
        block,
        overlap,
        stride,
        margin,
        cols,
        rows,
        origins,
    })
}

/// Copies the `block`-sided square sub-image at `origin`.
pub fn extract_block(
    img: &GrayImage,
    origin: (usize, usize),
    block: usize,
) -> Result<GrayImage, GridError> {
    let (x, y) = origin;
    check_bounds(img, x, y, block)?;
    let mut data = Vec::with_capacity(block * block);
    for dy in 0..block {
        let row = img.row(y + dy);
        data.extend_from_slice(&row[x..x + block]);
    }
    Ok(GrayImage::new(block, block, data).expect("block values come from a valid image"))
}

/// Reads one diagonal of the `block`-sided square at `origin`.
///
/// For [`Diagonal::Main`], element `k` is `img(x + k, y + k)`; for
/// [`Diagonal::Anti`], element `k` is `img(x + block - 1 - k, y + k)`.
pub fn extract_diagonal(
    img: &GrayImage,
    origin: (usize, usize),
    block: usize,
    which: Diagonal,
) -> Result<Vec<f64>, GridError> {
    let (x, y) = origin;
    check_bounds(img, x, y, block)?;
    let mut out = Vec::with_capacity(block);
    for k in 0..block {
        let px = match which {
            Diagonal::Main => x + k,
            Diagonal::Anti => x + block - 1 - k,
        };
        out.push(img.get(px, y + k));
    }
    Ok(out)
}

fn check_bounds(img: &GrayImage, x: usize, y: usize, block: usize) -> Result<(), GridError> {
    if block == 0 || x + block > img.width() || y + block > img.height() {
        return Err(GridError::OutOfBounds {
            x,
            y,
            block,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}
