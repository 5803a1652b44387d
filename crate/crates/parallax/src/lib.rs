//! Stereo correspondence by block matching.
//!
//! The library estimates per-block (or per-pixel) displacement between a
//! template image and a reference image, with three interchangeable
//! similarity engines:
//!
//! - **Full NCC** ([`ncc::ncc_full`]): zero-mean normalized cross-correlation
//!   over every pixel of a block, the classic baseline, with sum-table
//!   acceleration for the denominators.
//! - **Diagonal NCC** ([`ncc::ncc_diagonal`]): the same correlation restricted
//!   to the block diagonal, reducing per-shift work from `block^2` to `block`
//!   multiplies, with a causal moving average standing in for the block mean
//!   so mean removal works on streamed data.
//! - **SAD** ([`sad::sad_search`]): sum of absolute differences over
//!   overlapping blocks, down to the per-pixel limit at `overlap = block - 1`.
//!
//! A behavioral model of an analog processing pipeline ([`analog`]) injects
//! RMS-scaled Gaussian noise at the multiplier/absolute-value and integrator
//! stages with counter-based keying, so noisy runs are reproducible and
//! schedule-independent, and estimates the pipeline's power draw.
//! [`metrics`] evaluates results: alignment compositing, global correlation,
//! RMS disparity error against ground truth, and operation accounting.
//!
//! # Quick start
//!
//! ```
//! use parallax::grid::partition;
//! use parallax::sad::{match_sad, SadParams};
//! use parallax::score::SearchWindow;
//! use parallax::synth;
//!
//! // A synthetic pair whose true shift is (3, 1).
//! let base = synth::default_texture(64, 48, 7);
//! let (template, reference) = synth::translated_pair(&base, 3, 1);
//!
//! let grid = partition(template.width(), template.height(), 7, 0, 5)?;
//! let params = SadParams::new(SearchWindow::symmetric(4, 4));
//! let map = match_sad(&template, &reference, &grid, &params)?;
//!
//! assert!(map.cells().iter().all(|c| c.valid && (c.dx, c.dy) == (3, 1)));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The `parallax` binary in this workspace drives experiments from TOML
//! configs ([`config`]); the book under `book/` walks through the concepts.

pub mod analog;
pub mod config;
pub mod grid;
pub mod image;
pub mod io;
pub mod metrics;
pub mod ncc;
pub mod ops;
pub mod sad;
pub mod score;
pub mod synth;

pub use analog::{NoiseSpec, PowerReport};
pub use grid::{partition, BlockGrid, Diagonal};
pub use image::{GrayImage, GroundTruthDisparity};
pub use metrics::{DisparityCell, DisparityMap, Variant};
pub use ncc::{match_ncc, NccParams, NccVariant};
pub use sad::{match_sad, SadParams};
pub use score::{best_shift, Extremum, ScoreSurface, SearchWindow};

/// The book's code snippets, compiled and run with the library's doctests so
/// the guide cannot drift from the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Images, "../../../book/src/images.md");
    chapter!(BlockGrids, "../../../book/src/block-grids.md");
    chapter!(FullNcc, "../../../book/src/full-ncc.md");
    chapter!(DiagonalNcc, "../../../book/src/diagonal-ncc.md");
    chapter!(Sad, "../../../book/src/sad.md");
    chapter!(AnalogModel, "../../../book/src/analog-model.md");
    chapter!(Evaluation, "../../../book/src/evaluation.md");
    chapter!(Experiments, "../../../book/src/experiments.md");
    chapter!(FileFormats, "../../../book/src/file-formats.md");
}
