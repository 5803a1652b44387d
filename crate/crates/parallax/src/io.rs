//! Image and ground-truth file loading and saving.
//!
//! Portable graymaps (P2 ASCII and P5 binary, maxval up to 65535) are read and
//! written natively and round-trip bit-exactly at the container bit depth.
//! P3/P6 pixmaps and PNG files are also read; RGB inputs are reduced to
//! luminance with the fixed ITU-R 601 weights (0.299, 0.587, 0.114).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::image::{GrayImage, GrayImageError, GroundTruthDisparity};

/// Errors from reading or writing image files. Unreadable files, unsupported
/// formats, malformed headers and header/payload mismatches are distinct
/// variants so callers can report them precisely.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported image format (leading bytes {magic:02x?})")]
    UnsupportedFormat { magic: Vec<u8> },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("payload holds {got} samples but the header promises {expected}")]
    PayloadSize { expected: usize, got: usize },
    #[error("sample value {value} exceeds the declared maximum {maxval}")]
    SampleRange { value: u32, maxval: u32 },
    #[error("png decode error: {0}")]
    Png(#[from] ::image::ImageError),
    #[error("ground truth must be single-channel grayscale")]
    NotGrayscale,
    #[error("ground-truth scale must be positive, got {0}")]
    BadScale(f64),
    #[error(transparent)]
    Pixel(#[from] GrayImageError),
}

/// Output encoding for [`save_pgm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnmEncoding {
    /// P2, whitespace-separated decimal samples.
    Ascii,
    /// P5, big-endian binary samples (1 or 2 bytes per sample).
    Binary,
}

enum RawPixels {
    Gray(Vec<u16>),
    Rgb(Vec<[u16; 3]>),
}

struct RawImage {
    width: usize,
    height: usize,
    maxval: u16,
    pixels: RawPixels,
}

/// Loads an image and normalizes it to a [`GrayImage`].
///
/// Grayscale samples are divided by the container's maxval; RGB pixels are
/// first converted to luminance. The result always lies in `[0, 1]`.
pub fn load_gray(path: &Path) -> Result<GrayImage, IoError> {
    let raw = decode_raw(path)?;
    let m = raw.maxval as f64;
    let data: Vec<f64> = match raw.pixels {
        RawPixels::Gray(samples) => samples.iter().map(|&s| s as f64 / m).collect(),
        RawPixels::Rgb(pixels) => pixels
            .iter()
            .map(|&[r, g, b]| {
                let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
                (y / m).min(1.0)
            })
            .collect(),
    };
    Ok(GrayImage::new(raw.width, raw.height, data)?)
}

/// Loads a ground-truth disparity map stored as a grayscale image whose raw
/// samples encode `disparity * scale`, with `unknown_code` marking pixels that
/// have no ground truth.
pub fn load_ground_truth(
    path: &Path,
    scale: f64,
    unknown_code: u16,
) -> Result<GroundTruthDisparity, IoError> {
    if scale.is_nan() || scale <= 0.0 {
        return Err(IoError::BadScale(scale));
    }
    let raw = decode_raw(path)?;
    let samples = match raw.pixels {
        RawPixels::Gray(samples) => samples,
        RawPixels::Rgb(_) => return Err(IoError::NotGrayscale),
    };
    let disparity: Vec<f64> = samples.iter().map(|&s| s as f64 / scale).collect();
    let valid: Vec<bool> = samples.iter().map(|&s| s != unknown_code).collect();
    Ok(GroundTruthDisparity::new(raw.width, raw.height, disparity, valid)?)
}

/// Saves a grayscale image as a portable graymap with the given maxval.
///
/// Samples are written as `round(v * maxval)`, so an image loaded from a
/// graymap with the same maxval round-trips bit-exactly.
pub fn save_pgm(
    img: &GrayImage,
    path: &Path,
    maxval: u16,
    encoding: PnmEncoding,
) -> Result<(), IoError> {
    if maxval == 0 {
        return Err(IoError::BadHeader("maxval must be at least 1".into()));
    }
    let samples: Vec<u16> = img
        .data()
        .iter()
        .map(|&v| (v * maxval as f64).round().min(maxval as f64) as u16)
        .collect();
    save_pgm_samples(img.width(), img.height(), maxval, &samples, path, encoding)
}

/// Saves raw 16-bit samples as a portable graymap without normalization.
/// Useful for writing ground-truth disparity files.
pub fn save_pgm_samples(
    width: usize,
    height: usize,
    maxval: u16,
    samples: &[u16],
    path: &Path,
    encoding: PnmEncoding,
) -> Result<(), IoError> {
    if maxval == 0 {
        return Err(IoError::BadHeader("maxval must be at least 1".into()));
    }
    if samples.len() != width * height {
        return Err(IoError::PayloadSize {
            expected: width * height,
            got: samples.len(),
        });
    }
    if let Some(&v) = samples.iter().find(|&&s| s > maxval) {
        return Err(IoError::SampleRange {
            value: v as u32,
            maxval: maxval as u32,
        });
    }
    let mut out = Vec::new();
    match encoding {
        PnmEncoding::Ascii => {
            write!(out, "P2\n{} {}\n{}\n", width, height, maxval)?;
            for row in samples.chunks(width) {
                let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
        PnmEncoding::Binary => {
            write!(out, "P5\n{} {}\n{}\n", width, height, maxval)?;
            if maxval > 255 {
                for &s in samples {
                    out.extend_from_slice(&s.to_be_bytes());
                }
            } else {
                out.extend(samples.iter().map(|&s| s as u8));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn decode_raw(path: &Path) -> Result<RawImage, IoError> {
    let bytes = fs::read(path)?;
    match bytes.get(..2) {
        Some(b"P2") | Some(b"P5") | Some(b"P3") | Some(b"P6") => decode_pnm(&bytes),
        _ if bytes.starts_with(&[0x89, b'P', b'N', b'G']) => decode_png(&bytes),
        _ => Err(IoError::UnsupportedFormat {
            magic: bytes.get(..2).unwrap_or(&bytes).to_vec(),
        }),
    }
}

fn decode_png(bytes: &[u8]) -> Result<RawImage, IoError> {
    use ::image::DynamicImage;

    let dynamic = ::image::load_from_memory(bytes)?;
    let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);
    if width == 0 || height == 0 {
        return Err(IoError::BadHeader("zero-sized png".into()));
    }
    let raw = match dynamic {
        DynamicImage::ImageLuma8(buf) => RawImage {
            width,
            height,
            maxval: 255,
            pixels: RawPixels::Gray(buf.into_raw().into_iter().map(u16::from).collect()),
        },
        DynamicImage::ImageLuma16(buf) => RawImage {
            width,
            height,
            maxval: 65535,
            pixels: RawPixels::Gray(buf.into_raw()),
        },
        DynamicImage::ImageLumaA8(buf) => RawImage {
            width,
            height,
            maxval: 255,
            pixels: RawPixels::Gray(buf.pixels().map(|p| p.0[0] as u16).collect()),
        },
        DynamicImage::ImageRgb16(buf) => RawImage {
            width,
            height,
            maxval: 65535,
            pixels: RawPixels::Rgb(buf.pixels().map(|p| p.0).collect()),
        },
        other => {
            let rgb = other.to_rgb8();
            RawImage {
                width,
                height,
                maxval: 255,
                pixels: RawPixels::Rgb(
                    rgb.pixels()
                        .map(|p| [p.0[0] as u16, p.0[1] as u16, p.0[2] as u16])
                        .collect(),
                ),
            }
        }
    };
    Ok(raw)
}

/// Token cursor over PNM header and ASCII payload bytes; skips whitespace and
/// `#` comments.
struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmCursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_filler(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Option<&'a [u8]> {
        self.skip_filler();
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some(&self.bytes[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> Result<u32, IoError> {
        let token = self
            .next_token()
            .ok_or_else(|| IoError::BadHeader(format!("missing {what}")))?;
        std::str::from_utf8(token)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                IoError::BadHeader(format!(
                    "invalid {what}: {:?}",
                    String::from_utf8_lossy(token)
                ))
            })
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<RawImage, IoError> {
    let magic = &bytes[..2];
    let (ascii, channels) = match magic {
        b"P2" => (true, 1),
        b"P5" => (false, 1),
        b"P3" => (true, 3),
        b"P6" => (false, 3),
        _ => unreachable!("dispatched on magic"),
    };

    let mut cursor = PnmCursor::new(&bytes[2..]);
    let width = cursor.next_number("width")? as usize;
    let height = cursor.next_number("height")? as usize;
    let maxval = cursor.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::BadHeader(format!(
            "zero image dimensions {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::BadHeader(format!(
            "maxval {maxval} outside [1, 65535]"
        )));
    }
    let maxval = maxval as u16;
    let count = width * height * channels;

    let samples: Vec<u16> = if ascii {
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            match cursor.next_token() {
                Some(token) => {
                    let v = std::str::from_utf8(token)
                        .ok()
                        .and_then(|s| s.parse::<u32>().ok())
                        .ok_or_else(|| {
                            IoError::BadHeader(format!(
                                "invalid sample: {:?}",
                                String::from_utf8_lossy(token)
                            ))
                        })?;
                    if v > maxval as u32 {
                        return Err(IoError::SampleRange {
                            value: v,
                            maxval: maxval as u32,
                        });
                    }
                    samples.push(v as u16);
                }
                None => {
                    return Err(IoError::PayloadSize {
                        expected: count,
                        got: samples.len(),
                    })
                }
            }
        }
        samples
    } else {
        // Binary payload begins after exactly one whitespace byte past maxval.
        let payload_start = 2 + cursor.pos + 1;
        let payload = bytes.get(payload_start..).unwrap_or(&[]);
        let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
        let needed = count * bytes_per_sample;
        if payload.len() < needed {
            return Err(IoError::PayloadSize {
                expected: count,
                got: payload.len() / bytes_per_sample,
            });
        }
        let mut samples = Vec::with_capacity(count);
        if bytes_per_sample == 2 {
            for chunk in payload[..needed].chunks_exact(2) {
                let v = u16::from_be_bytes([chunk[0], chunk[1]]);
                if v > maxval {
                    return Err(IoError::SampleRange {
                        value: v as u32,
                        maxval: maxval as u32,
                    });
                }
                samples.push(v);
            }
        } else {
            for &b in &payload[..needed] {
                if b as u16 > maxval {
                    return Err(IoError::SampleRange {
                        value: b as u32,
                        maxval: maxval as u32,
                    });
                }
                samples.push(b as u16);
            }
        }
        samples
    };

    let pixels = if channels == 1 {
        RawPixels::Gray(samples)
    } else {
        RawPixels::Rgb(samples.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    };
    Ok(RawImage {
        width,
        height,
        maxval,
        pixels,
    })
}
