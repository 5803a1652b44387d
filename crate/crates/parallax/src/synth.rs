//! Deterministic synthetic stereo scenes with known ground truth.
//!
//! Benchmarking a matcher needs image pairs whose true displacement is known
//! exactly. This module builds multi-octave value-noise textures (smooth
//! large-scale structure plus fine grain, like natural images) and warps them
//! by integer disparity fields: piecewise-constant "depth planes" with a
//! zero-disparity border so whole-image correlation before and after
//! alignment is meaningful. Everything is a pure function of its seed.

use crate::image::{GrayImage, GroundTruthDisparity};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice_value(seed: u64, octave: u64, gx: u64, gy: u64) -> f64 {
    let mut h = splitmix64(seed ^ octave.wrapping_mul(0x5851_F42D_4C95_7F2D));
    h = splitmix64(h ^ gx);
    h = splitmix64(h ^ gy);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value-noise texture. Each `(cell_px, weight)` octave places
/// random values on a lattice of the given cell size and interpolates them
/// smoothly; weights are normalized, so outputs stay in `[0, 1]`.
pub fn texture(width: usize, height: usize, seed: u64, octaves: &[(usize, f64)]) -> GrayImage {
    assert!(!octaves.is_empty(), "at least one octave");
    let total_weight: f64 = octaves.iter().map(|&(_, w)| w).sum();
    GrayImage::from_fn(width, height, |x, y| {
        let mut value = 0.0;
        for (i, &(cell, weight)) in octaves.iter().enumerate() {
            let cell = cell.max(1) as f64;
            let fx = x as f64 / cell;
            let fy = y as f64 / cell;
            let gx = fx.floor();
            let gy = fy.floor();
            let tx = smoothstep(fx - gx);
            let ty = smoothstep(fy - gy);
            let (gx, gy) = (gx as u64, gy as u64);
            let v00 = lattice_value(seed, i as u64, gx, gy);
            let v10 = lattice_value(seed, i as u64, gx + 1, gy);
            let v01 = lattice_value(seed, i as u64, gx, gy + 1);
            let v11 = lattice_value(seed, i as u64, gx + 1, gy + 1);
            let top = v00 + (v10 - v00) * tx;
            let bottom = v01 + (v11 - v01) * tx;
            value += weight * (top + (bottom - top) * ty);
        }
        value / total_weight
    })
    .expect("weighted average of unit values is in range")
}

/// Stretches contrast about 0.5 by `gain`, clamping to `[0, 1]`.
pub fn stretch_contrast(img: &GrayImage, gain: f64) -> GrayImage {
    img.map(|v| (0.5 + gain * (v - 0.5)).clamp(0.0, 1.0))
        .expect("clamped values are in range")
}

/// A balanced texture: coarse structure down to fine grain.
pub fn default_texture(width: usize, height: usize, seed: u64) -> GrayImage {
    let base = texture(
        width,
        height,
        seed,
        &[(37, 0.30), (17, 0.28), (7, 0.24), (3, 0.18)],
    );
    stretch_contrast(&base, 2.2)
}

/// A texture dominated by fine detail (including per-pixel grain), for
/// matchers that need sharply peaked score surfaces.
pub fn fine_texture(width: usize, height: usize, seed: u64) -> GrayImage {
    let base = texture(
        width,
        height,
        seed,
        &[(19, 0.20), (7, 0.25), (3, 0.30), (1, 0.25)],
    );
    stretch_contrast(&base, 2.6)
}

/// Builds a `(template, reference)` pair related by a pure integer
/// translation: `template(x, y) = base(x + dx, y + dy)` with edge clamping,
/// and `reference = base`. A template block away from the border therefore
/// matches the reference at exactly `(dx, dy)`.
pub fn translated_pair(base: &GrayImage, dx: i32, dy: i32) -> (GrayImage, GrayImage) {
    let (w, h) = (base.width(), base.height());
    let template = GrayImage::from_fn(w, h, |x, y| {
        let sx = (x as i64 + dx as i64).clamp(0, w as i64 - 1) as usize;
        let sy = (y as i64 + dy as i64).clamp(0, h as i64 - 1) as usize;
        base.get(sx, sy)
    })
    .expect("samples come from a valid image");
    (template, base.clone())
}

/// A synthetic stereo pair with exact ground truth.
#[derive(Debug, Clone)]
pub struct StereoScene {
    pub template: GrayImage,
    pub reference: GrayImage,
    pub truth: GroundTruthDisparity,
    pub min_disparity: i32,
    pub max_disparity: i32,
}

/// Builds a textured scene of smooth depth surfaces: disparity 0 on a flat
/// border frame, a 1 px/px ramp up to a mid-disparity background plane, and a
/// few elliptical domes rising above it (layout drawn from `seed`). Steps
/// between neighbouring pixels never exceed one pixel of disparity, like the
/// smooth surfaces of real stereo scenes, so occlusion is limited to
/// one-pixel slivers. The template is the texture warped by the field —
/// `template(x, y) = tex(x + d(x, y), y)` — so a template block at `(x, y)`
/// matches the reference at `+d(x, y)` in x and `0` in y, and `truth` holds
/// exactly those values.
pub fn stereo_scene(width: usize, height: usize, seed: u64) -> StereoScene {
    /// Flat zero-disparity frame; must cover the matcher's margin band.
    const BORDER: i32 = 26;
    /// Columns per unit disparity on the frame-to-background ramp.
    const RAMP_RUN: i32 = 3;
    const BACKGROUND: i32 = 10;
    const MAX_PEAK: i32 = 18;
    let interior = (BORDER + RAMP_RUN * BACKGROUND) as usize;
    assert!(
        width > 2 * (interior + 60) && height > 2 * (interior + 44),
        "scene too small for its border frame and ramps"
    );

    // Smooth structure with enough intra-block detail to lock small windows,
    // but no per-pixel grain: block quantization on the slopes costs a pixel
    // of alignment here and there, and grain would turn that into
    // decorrelation.
    let base = texture(
        width + MAX_PEAK as usize + 4,
        height,
        seed,
        &[(23, 0.16), (9, 0.28), (4, 0.56)],
    );
    let tex = stretch_contrast(&base, 1.9);

    // Flat elliptical domes with seed-derived placement, kept on the
    // background plateau so every disparity transition stays gradual.
    let rand_in = |tag: u64, lo: usize, hi: usize| -> usize {
        lo + (splitmix64(seed ^ tag) % (hi - lo) as u64) as usize
    };
    let mut domes = Vec::new();
    for i in 0..2u64 {
        let rx = rand_in(10 * i + 1, 40, 56);
        let ry = rand_in(10 * i + 2, 28, 40);
        let cx = rand_in(10 * i + 3, interior + rx + 2, width - interior - rx - 2);
        let cy = rand_in(10 * i + 4, interior + ry + 2, height - interior - ry - 2);
        let peak = 15 + (splitmix64(seed ^ (10 * i + 5)) % ((MAX_PEAK - 15) as u64 + 1)) as i32;
        domes.push((cx as f64, cy as f64, rx as f64, ry as f64, peak));
    }
    // One sharp-edged box (a raised slab) so the scene also has genuine depth
    // discontinuities with their thin occlusion bands.
    let box_d = BACKGROUND + 4;
    let box_w = rand_in(31, 36, 56);
    let box_h = rand_in(32, 28, 44);
    let box_x = rand_in(33, interior + 2, width - interior - box_w - 2);
    let box_y = rand_in(34, interior + 2, height - interior - box_h - 2);

    let disparity_at = |x: usize, y: usize| -> i32 {
        let dist = x.min(y).min(width - 1 - x).min(height - 1 - y) as i32;
        let mut d = ((dist - BORDER) / RAMP_RUN).clamp(0, BACKGROUND);
        if x >= box_x && x < box_x + box_w && y >= box_y && y < box_y + box_h {
            d = d.max(box_d);
        }
        for &(cx, cy, rx, ry, peak) in &domes {
            let nx = (x as f64 - cx) / rx;
            let ny = (y as f64 - cy) / ry;
            let r2 = nx * nx + ny * ny;
            if r2 <= 1.0 {
                let dome = BACKGROUND + ((peak - BACKGROUND) as f64 * (1.0 - r2)).round() as i32;
                d = d.max(dome);
            }
        }
        d
    };

    let mut disparity = Vec::with_capacity(width * height);
    let template = GrayImage::from_fn(width, height, |x, y| {
        let d = disparity_at(x, y);
        disparity.push(d as f64);
        tex.get(x + d as usize, y)
    })
    .expect("texture samples are in range");
    let reference = GrayImage::from_fn(width, height, |x, y| tex.get(x, y)).unwrap();
    let truth =
        GroundTruthDisparity::new(width, height, disparity, vec![true; width * height]).unwrap();
    let max_disparity = domes.iter().map(|d| d.4).max().unwrap_or(BACKGROUND);
    StereoScene {
        template,
        reference,
        truth,
        min_disparity: 0,
        max_disparity,
    }
}
