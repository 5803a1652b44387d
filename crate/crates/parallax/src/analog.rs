//! Behavioral model of the analog processing pipeline: RMS-scaled Gaussian
//! noise at the multiplier and integrator stages, the dynamic-range to
//! noise-fraction conversion, and the per-channel power estimate.
//!
//! Noise samples are generated by a counter-based construction: a hash of
//! `(seed, stage, block, shift, sample)` feeds a fixed uniform-to-normal
//! transform. Every draw is a pure function of its key, so a matching run is
//! bit-identical no matter how its blocks are scheduled across threads.

use thiserror::Error;

use crate::image::GrayImage;

#[derive(Debug, Error)]
pub enum AnalogError {
    #[error("channel count must be even (channels pair into template/reference), got {0}")]
    OddChannelCount(usize),
    #[error("{stage} noise percentage must be nonnegative, got {value}")]
    NegativePercentage { stage: &'static str, value: f64 },
    #[error("signal RMS must be nonnegative and finite, got {0}")]
    BadRms(f64),
}

/// Noise stage. `Multiplier` covers the processing element ahead of the
/// integrator: the analog multiplier in the correlation pipeline, and the
/// absolute-value circuit in the SAD pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStage {
    Multiplier,
    Integrator,
}

/// Identifies one noise draw: the block being matched, the shift within its
/// search window, and the sample index within the stage's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleKey {
    pub block: u64,
    pub shift: u64,
    pub sample: u64,
}

/// Behavioral noise parameters: per-stage noise as a fraction of the signal
/// RMS, a seed, and the cached RMS of the operative image.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub multiplier_pct: f64,
    pub integrator_pct: f64,
    pub seed: u64,
    pub signal_rms: f64,
}

impl NoiseSpec {
    pub fn new(
        multiplier_pct: f64,
        integrator_pct: f64,
        seed: u64,
        signal_rms: f64,
    ) -> Result<Self, AnalogError> {
        if multiplier_pct.is_nan() || multiplier_pct < 0.0 {
            return Err(AnalogError::NegativePercentage {
                stage: "multiplier",
                value: multiplier_pct,
            });
        }
        if integrator_pct.is_nan() || integrator_pct < 0.0 {
            return Err(AnalogError::NegativePercentage {
                stage: "integrator",
                value: integrator_pct,
            });
        }
        if !signal_rms.is_finite() || signal_rms < 0.0 {
            return Err(AnalogError::BadRms(signal_rms));
        }
        Ok(Self {
            multiplier_pct,
            integrator_pct,
            seed,
            signal_rms,
        })
    }

    /// Builds a spec with `signal_rms` taken from `img`.
    pub fn for_image(
        multiplier_pct: f64,
        integrator_pct: f64,
        seed: u64,
        img: &GrayImage,
    ) -> Result<Self, AnalogError> {
        Self::new(multiplier_pct, integrator_pct, seed, image_rms(img))
    }

    /// True when both stages inject nothing; such a spec is equivalent to no
    /// noise at all, and the matchers normalize it to the noiseless path.
    pub fn is_zero(&self) -> bool {
        self.multiplier_pct == 0.0 && self.integrator_pct == 0.0
    }

    fn pct(&self, stage: NoiseStage) -> f64 {
        match stage {
            NoiseStage::Multiplier => self.multiplier_pct,
            NoiseStage::Integrator => self.integrator_pct,
        }
    }
}

/// Root-mean-square of the image intensities.
pub fn image_rms(img: &GrayImage) -> f64 {
    let sum_sq: f64 = img.data().iter().map(|&v| v * v).sum();
    (sum_sq / img.data().len() as f64).sqrt()
}

/// One additive noise value: `signal_rms * stage_pct * g`, with `g` a standard
/// normal deviate derived deterministically from `(seed, stage, key)`.
pub fn noise_sample(spec: &NoiseSpec, stage: NoiseStage, key: SampleKey) -> f64 {
    let pct = spec.pct(stage);
    if pct == 0.0 {
        return 0.0;
    }
    let stage_tag: u64 = match stage {
        NoiseStage::Multiplier => 0x4d55_4c54,
        NoiseStage::Integrator => 0x494e_5447,
    };
    let mut h = splitmix64(spec.seed ^ stage_tag);
    h = splitmix64(h ^ key.block);
    h = splitmix64(h ^ key.shift);
    h = splitmix64(h ^ key.sample);
    let u1 = unit_open(h);
    let u2 = unit_open(splitmix64(h ^ 0x9E37_79B9_7F4A_7C15));
    let g = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    spec.signal_rms * pct * g
}

/// Converts a dynamic range in decibels to a noise fraction: `10^(-dB/20)`.
/// A 40 dB circuit corresponds to a 1% noise level.
pub fn dynamic_range_to_noise_pct(dr_db: f64) -> f64 {
    10f64.powf(-dr_db / 20.0)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps 64 random bits to the open-closed interval `(0, 1]`.
#[inline]
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Unit power draw of one low-pass filter, in milliwatts.
pub const LPF_UNIT_MW: f64 = 2.8;
/// Unit power draw of one analog summer, in milliwatts.
pub const SUMMER_UNIT_MW: f64 = 0.549;
/// Unit power draw of one analog multiplier, in milliwatts.
pub const MULTIPLIER_UNIT_MW: f64 = 0.00183;
/// Unit power draw of one integrator, in milliwatts.
pub const INTEGRATOR_UNIT_MW: f64 = 0.024;

/// One line of a [`PowerReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerComponent {
    pub name: &'static str,
    pub unit_mw: f64,
    pub quantity: usize,
    pub subtotal_mw: f64,
}

/// Power rollup for the analog correlation pipeline at a given channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub channels: usize,
    pub components: Vec<PowerComponent>,
    pub total_mw: f64,
}

/// Estimates analog power for `channels` readout channels. Filters and
/// summers are one per channel; multipliers and integrators serve a
/// template/reference channel pair, so one per two channels.
pub fn power_estimate(channels: usize) -> Result<PowerReport, AnalogError> {
    if !channels.is_multiple_of(2) {
        return Err(AnalogError::OddChannelCount(channels));
    }
    let pairs = channels / 2;
    let components: Vec<PowerComponent> = [
        ("lpf", LPF_UNIT_MW, channels),
        ("summer", SUMMER_UNIT_MW, channels),
        ("multiplier", MULTIPLIER_UNIT_MW, pairs),
        ("integrator", INTEGRATOR_UNIT_MW, pairs),
    ]
    .into_iter()
    .map(|(name, unit_mw, quantity)| PowerComponent {
        name,
        unit_mw,
        quantity,
        subtotal_mw: unit_mw * quantity as f64,
    })
    .collect();
    let total_mw = components.iter().map(|c| c.subtotal_mw).sum();
    Ok(PowerReport {
        channels,
        components,
        total_mw,
    })
}
