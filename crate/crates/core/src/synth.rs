//! Synthetic spectrum-analyzer traces from the analytic model.
//!
//! A single-shot quadrature variance measurement scatters with standard
//! deviation `sqrt(2) V`; averaging `N` traces reduces that to
//! `sqrt(2/N) V`. The synthesizer draws each point as `V * chi^2_N / N`
//! (a Gamma variate with unit mean), which reproduces that scaling exactly
//! at every `N`, stays positive, and converges to the Gaussian regime the
//! weighted fit assumes once `N` is large. Finite analyzer resolution is a
//! moving boxcar average; an optional narrow Gaussian spur models an
//! instrument line that contaminates both quadratures.

use alloc::vec::Vec;

// f64 transcendentals come from num-traits in no_std builds
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::cavity::{Detuning, RingCavity};
use crate::two_photon::{
    spectrum, DetectionModel, InputSqueezingModel, QuadratureSpectrum, SpectrumError,
};

/// Traces never report a variance below this floor.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SynthError {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("resolution bandwidth must be positive, got {0}")]
    BadRbw(f64),
    #[error("average count must be at least 1")]
    ZeroAverages,
    #[error("spur {0} must be positive and finite")]
    BadSpur(&'static str),
}

/// Additive instrument line: a Gaussian bump of the given linear height and
/// standard-deviation width, applied to both quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpurModel {
    pub center_hz: f64,
    pub height_linear: f64,
    pub width_hz: f64,
}

impl SpurModel {
    fn validate(&self) -> Result<(), SynthError> {
        if !(self.center_hz.is_finite() && self.center_hz >= 0.0) {
            return Err(SynthError::BadSpur("center_hz"));
        }
        if !(self.height_linear.is_finite() && self.height_linear >= 0.0) {
            return Err(SynthError::BadSpur("height_linear"));
        }
        if !(self.width_hz.is_finite() && self.width_hz > 0.0) {
            return Err(SynthError::BadSpur("width_hz"));
        }
        Ok(())
    }

    fn evaluate(&self, freq_hz: f64) -> f64 {
        let t = (freq_hz - self.center_hz) / self.width_hz;
        self.height_linear * (-0.5 * t * t).exp()
    }
}

/// Spectrum-analyzer settings for trace synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub rbw_hz: f64,
    pub n_averages: u32,
    pub spur: Option<SpurModel>,
    pub seed: u64,
}

impl MeasurementConfig {
    pub fn new(rbw_hz: f64, n_averages: u32, spur: Option<SpurModel>, seed: u64) -> Result<Self, SynthError> {
        let cfg = Self { rbw_hz, n_averages, spur, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.rbw_hz.is_finite() && self.rbw_hz > 0.0) {
            return Err(SynthError::BadRbw(self.rbw_hz));
        }
        if self.n_averages == 0 {
            return Err(SynthError::ZeroAverages);
        }
        if let Some(spur) = &self.spur {
            spur.validate()?;
        }
        Ok(())
    }
}

/// Synthesize a noisy analyzer trace: analytic spectrum, optional spur,
/// boxcar resolution-bandwidth smoothing, then per-point measurement noise
/// with standard deviation `sqrt(2) V / sqrt(n_averages)`. The sigma arrays
/// carry the model noise level. Deterministic for a fixed seed; each grid
/// point uses an independent generator derived from `(seed, index)`, so the
/// draw at a point does not depend on grid length or evaluation order.
pub fn synthesize_trace(
    cavity: &RingCavity,
    detuning: Detuning,
    squeezing: &InputSqueezingModel,
    detection: &DetectionModel,
    config: &MeasurementConfig,
    freqs_hz: &[f64],
) -> Result<QuadratureSpectrum, SynthError> {
    config.validate()?;
    let clean = spectrum(cavity, detuning, squeezing, detection, freqs_hz)?;
    let mut v1 = clean.v1;
    let mut v2 = clean.v2;
    if let Some(spur) = &config.spur {
        for (i, &f) in freqs_hz.iter().enumerate() {
            let bump = spur.evaluate(f);
            v1[i] += bump;
            v2[i] += bump;
        }
    }
    let mean1 = boxcar(freqs_hz, &v1, config.rbw_hz);
    let mean2 = boxcar(freqs_hz, &v2, config.rbw_hz);

    let n_eff = config.n_averages as f64;
    let noise_scale = (2.0 / n_eff).sqrt();
    // chi^2 with n_averages degrees of freedom, normalized to unit mean
    let shape = Gamma::new(0.5 * n_eff, 2.0 / n_eff).expect("valid gamma parameters");

    let n = freqs_hz.len();
    let mut out1 = Vec::with_capacity(n);
    let mut out2 = Vec::with_capacity(n);
    let mut sig1 = Vec::with_capacity(n);
    let mut sig2 = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = point_rng(config.seed, i as u64);
        out1.push((mean1[i] * shape.sample(&mut rng)).max(VARIANCE_FLOOR));
        out2.push((mean2[i] * shape.sample(&mut rng)).max(VARIANCE_FLOOR));
        sig1.push(noise_scale * mean1[i]);
        sig2.push(noise_scale * mean2[i]);
    }
    Ok(QuadratureSpectrum::new(freqs_hz.to_vec(), out1, out2, Some(sig1), Some(sig2))?)
}

/// Moving boxcar average of width `rbw_hz` over both variance arrays;
/// endpoints use truncated windows. Sigma arrays are dropped because the
/// averaged points no longer carry independent uncertainties.
pub fn rbw_smooth(spectrum: &QuadratureSpectrum, rbw_hz: f64) -> Result<QuadratureSpectrum, SynthError> {
    if !(rbw_hz.is_finite() && rbw_hz > 0.0) {
        return Err(SynthError::BadRbw(rbw_hz));
    }
    let v1 = boxcar(&spectrum.freqs_hz, &spectrum.v1, rbw_hz);
    let v2 = boxcar(&spectrum.freqs_hz, &spectrum.v2, rbw_hz);
    Ok(QuadratureSpectrum::new(spectrum.freqs_hz.clone(), v1, v2, None, None)?)
}

fn boxcar(freqs_hz: &[f64], values: &[f64], rbw_hz: f64) -> Vec<f64> {
    let half = 0.5 * rbw_hz;
    let n = freqs_hz.len();
    let mut out = Vec::with_capacity(n);
    let mut lo = 0usize;
    let mut hi = 0usize;
    for i in 0..n {
        while freqs_hz[lo] < freqs_hz[i] - half {
            lo += 1;
        }
        while hi < n && freqs_hz[hi] <= freqs_hz[i] + half {
            hi += 1;
        }
        let window = &values[lo..hi];
        out.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    out
}

/// Independent per-point generator: SplitMix64 finalizer over the master
/// seed and point index feeding a `ChaCha8Rng`. Stable across releases.
fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}
