//! Canonical pixel containers: normalized grayscale images and ground-truth
//! disparity maps.
//!
//! Every algorithm in this crate operates on [`GrayImage`], a row-major grid
//! of `f64` intensities normalized to `[0, 1]`. Normalizing at load time makes
//! noise percentages and correlation values independent of the source bit
//! depth.

use thiserror::Error;

/// Errors from constructing pixel containers.
#[derive(Debug, Error)]
pub enum GrayImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("buffer holds {got} values, expected {expected} for {width}x{height}")]
    DataLength {
        expected: usize,
        got: usize,
        width: usize,
        height: usize,
    },
    #[error("intensity {value} at index {index} lies outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
}

/// A grayscale image with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Wraps a row-major buffer, validating dimensions, length and value range.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, GrayImageError> {
        if width == 0 || height == 0 {
            return Err(GrayImageError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if data.len() != expected {
            return Err(GrayImageError::DataLength {
                expected,
                got: data.len(),
                width,
                height,
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(GrayImageError::ValueOutOfRange { index, value });
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel, row-major.
    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Result<Self, GrayImageError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// A constant-valued image.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, GrayImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major pixel buffer.
    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Intensity at `(x, y)`. Panics if out of bounds.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    /// One image row as a slice.
    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Applies `f` to every pixel; the result is re-validated against `[0, 1]`.
    pub fn map<F>(&self, f: F) -> Result<Self, GrayImageError>
    where
        F: Fn(f64) -> f64,
    {
        Self::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }
}

/// Ground-truth horizontal disparity, as shipped with stereo benchmark
/// datasets: raw image samples divided by a scale factor, with a reserved
/// sample value marking unknown pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthDisparity {
    width: usize,
    height: usize,
    disparity: Vec<f64>,
    valid: Vec<bool>,
}

impl GroundTruthDisparity {
    pub fn new(
        width: usize,
        height: usize,
        disparity: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, GrayImageError> {
        if width == 0 || height == 0 {
            return Err(GrayImageError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if disparity.len() != expected {
            return Err(GrayImageError::DataLength {
                expected,
                got: disparity.len(),
                width,
                height,
            });
        }
        if valid.len() != expected {
            return Err(GrayImageError::DataLength {
                expected,
                got: valid.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            disparity,
            valid,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Disparity at `(x, y)`, or `None` where the ground truth is unknown.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.disparity[i])
    }

    #[inline]
    pub fn disparities(&self) -> &[f64] {
        &self.disparity
    }

    #[inline]
    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_buffer_length() {
        let err = GrayImage::new(2, 2, vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, GrayImageError::DataLength { expected: 4, got: 3, .. }));
    }

    #[test]
    fn rejects_out_of_range_values() {
        let err = GrayImage::new(2, 1, vec![0.5, 1.5]).unwrap_err();
        assert!(matches!(err, GrayImageError::ValueOutOfRange { index: 1, .. }));
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::constant(3, 0, 0.5).is_err());
    }

    #[test]
    fn accessors_agree_with_layout() {
        let img = GrayImage::from_fn(3, 2, |x, y| (y * 3 + x) as f64 / 10.0).unwrap();
        assert_eq!(img.get(2, 1), 0.5);
        assert_eq!(img.row(1), &[0.3, 0.4, 0.5]);
        assert!((img.mean() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_masks_invalid_pixels() {
        let gt = GroundTruthDisparity::new(2, 1, vec![10.0, 15.0], vec![false, true]).unwrap();
        assert_eq!(gt.get(0, 0), None);
        assert_eq!(gt.get(1, 0), Some(15.0));
        assert_eq!(gt.valid_count(), 1);
    }
}
