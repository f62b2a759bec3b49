//! Independent validation paths for the quadrature transfer pipeline.
//!
//! Two routes that never touch the closed-form variance map:
//!
//! 1. [`propagate_sidebands`] works directly on second moments of the
//!    sideband operator pair at `+Omega`/`-Omega`, applying the raw
//!    per-sideband reflection coefficients and explicit vacuum channels.
//! 2. [`monte_carlo_variances`] draws Gaussian quadrature samples and pushes
//!    them through the propagation and loss matrices with the detection
//!    efficiencies realized as explicit beamsplitter vacuum admixtures.
//!
//! Seed-to-stream mapping of the sampler (stable across releases): a
//! `ChaCha8Rng` is seeded with `seed_from_u64(seed)` and consumed
//! sequentially, twenty standard-normal draws per sample in channel order
//! `a_c`, `v_c`, `a_m`, `v_m`, detection vacuum, each as (re, im) pairs of
//! the two quadratures.

use num_complex::Complex64;
// f64 transcendentals come from num-traits in no_std builds
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::cavity::{
    loss_from_reflection, reflection_coefficient, CavityError, Detuning, RingCavity,
};
use crate::two_photon::{transfer_at, DetectionModel, InputSqueezingModel, TransferError};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error("sideband frequency must be nonnegative, got {0}")]
    NegativeFrequency(f64),
    #[error("nonphysical moment table: {0}")]
    NonphysicalMoments(&'static str),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// Second moments of the sideband operator pair at `+Omega` and `-Omega`:
/// occupation of each sideband and the inter-sideband correlation.
/// Vacuum is all zeros; quadrature variances follow as
/// `V1 = n_upper + n_lower + 1 + 2 Re m`, `V2 = ... - 2 Re m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandMoments {
    pub n_upper: f64,
    pub n_lower: f64,
    pub m_corr: Complex64,
}

impl SidebandMoments {
    pub fn vacuum() -> Self {
        Self { n_upper: 0.0, n_lower: 0.0, m_corr: Complex64::new(0.0, 0.0) }
    }

    /// Moments of a stationary field with squeezing aligned to the
    /// quadrature basis: symmetric occupation and a real correlation.
    pub fn from_quadrature_variances(v1: f64, v2: f64) -> Result<Self, OracleError> {
        if !(v1.is_finite() && v1 > 0.0 && v2.is_finite() && v2 > 0.0) {
            return Err(OracleError::NonphysicalMoments("variances must be positive"));
        }
        if v1 * v2 < 1.0 - 1e-12 {
            return Err(OracleError::NonphysicalMoments("V1*V2 below the Heisenberg bound"));
        }
        let n = 0.25 * (v1 + v2) - 0.5;
        let m = 0.25 * (v1 - v2);
        Ok(Self { n_upper: n, n_lower: n, m_corr: Complex64::new(m, 0.0) })
    }

    pub fn quadrature_variances(&self) -> (f64, f64) {
        let base = self.n_upper + self.n_lower + 1.0;
        (base + 2.0 * self.m_corr.re, base - 2.0 * self.m_corr.re)
    }

    /// Gaussian-state consistency: nonnegative occupations and a
    /// correlation within the positivity bound.
    pub fn is_physical(&self) -> bool {
        self.n_upper.is_finite()
            && self.n_lower.is_finite()
            && self.m_corr.re.is_finite()
            && self.m_corr.im.is_finite()
            && self.n_upper >= 0.0
            && self.n_lower >= 0.0
            && self.m_corr.norm_sqr() <= (self.n_upper + 0.5) * (self.n_lower + 0.5) + 1e-12
    }
}

/// Push sideband moments through reflection off the cavity and lossy
/// detection: the cavity-coupled channel sees the two per-sideband
/// reflection coefficients, the mode-mismatched channel the prompt
/// reflection, and every loss channel admixes vacuum (zero moments).
pub fn propagate_sidebands(
    cavity: &RingCavity,
    detuning: Detuning,
    detection: &DetectionModel,
    input: &SidebandMoments,
    omega_hz: f64,
) -> Result<SidebandMoments, OracleError> {
    if !(omega_hz.is_finite() && omega_hz >= 0.0) {
        return Err(OracleError::NegativeFrequency(omega_hz));
    }
    if !input.is_physical() {
        return Err(OracleError::NonphysicalMoments("input moments fail positivity"));
    }
    let r_upper = reflection_coefficient(cavity, detuning, omega_hz)?;
    let r_lower = reflection_coefficient(cavity, detuning, -omega_hz)?;
    // passivity guard on both sidebands
    loss_from_reflection(r_upper)?;
    loss_from_reflection(r_lower)?;

    let rm_sq = cavity.r1_sq();
    let eta_c = detection.eta_c();
    let eta_m = detection.eta_m();

    Ok(SidebandMoments {
        n_upper: (eta_c * r_upper.norm_sqr() + eta_m * rm_sq) * input.n_upper,
        n_lower: (eta_c * r_lower.norm_sqr() + eta_m * rm_sq) * input.n_lower,
        m_corr: (eta_c * r_upper * r_lower + eta_m * rm_sq) * input.m_corr,
    })
}

/// Result of a Monte Carlo variance estimate at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub v1: f64,
    pub v2: f64,
    pub stderr1: f64,
    pub stderr2: f64,
}

/// Sample-based estimate of the reflected quadrature variances.
///
/// Each sample draws independent proper complex Gaussians for the two
/// quadratures of every input channel (cavity-coupled and mismatched signal
/// copies, their vacuum loss channels, and the detection-loss vacuum), then
/// applies the propagation matrix, the loss matrix, the prompt reflection,
/// and the detection beamsplitter. Deterministic for a fixed seed.
pub fn monte_carlo_variances(
    cavity: &RingCavity,
    detuning: Detuning,
    squeezing: &InputSqueezingModel,
    detection: &DetectionModel,
    omega_hz: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, OracleError> {
    const MIN_SAMPLES: usize = 1000;
    if n_samples < MIN_SAMPLES {
        return Err(OracleError::TooFewSamples { min: MIN_SAMPLES, got: n_samples });
    }
    let transfer = transfer_at(cavity, detuning, omega_hz)?;
    let (v1_a, v2_a) = squeezing.variances_at(omega_hz);
    if !(v1_a > 0.0 && v2_a > 0.0) {
        return Err(OracleError::NonphysicalMoments("input variances must be positive"));
    }
    let m = transfer.propagation_matrix();
    let h = transfer.loss_matrix();
    let amp1 = v1_a.sqrt();
    let amp2 = v2_a.sqrt();
    let r_m = transfer.r_m;
    let l_m = (1.0 - r_m * r_m).max(0.0).sqrt();
    let sc = detection.eta_c().sqrt();
    let sm = detection.eta_m().sqrt();
    let sl = detection.eta_l().sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum1 = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..n_samples {
        let ac = [amp1 * proper_normal(&mut rng), amp2 * proper_normal(&mut rng)];
        let vc = [proper_normal(&mut rng), proper_normal(&mut rng)];
        let am = [amp1 * proper_normal(&mut rng), amp2 * proper_normal(&mut rng)];
        let vm = [proper_normal(&mut rng), proper_normal(&mut rng)];
        let u = [proper_normal(&mut rng), proper_normal(&mut rng)];

        let b_c = [
            m[0][0] * ac[0] + m[0][1] * ac[1] + h[0][0] * vc[0] + h[0][1] * vc[1],
            m[1][0] * ac[0] + m[1][1] * ac[1] + h[1][0] * vc[0] + h[1][1] * vc[1],
        ];
        let b_m = [r_m * am[0] + l_m * vm[0], r_m * am[1] + l_m * vm[1]];
        let d = [sc * b_c[0] + sm * b_m[0] + sl * u[0], sc * b_c[1] + sm * b_m[1] + sl * u[1]];

        sum1 += d[0].norm_sqr();
        sum2 += d[1].norm_sqr();
    }
    let n = n_samples as f64;
    let v1 = sum1 / n;
    let v2 = sum2 / n;
    // |d|^2 of a proper complex Gaussian is exponential: se = mean / sqrt(N)
    Ok(MonteCarloEstimate { v1, v2, stderr1: v1 / n.sqrt(), stderr2: v2 / n.sqrt() })
}

/// Proper complex standard normal: E[z] = 0, E[|z|^2] = 1, E[z^2] = 0.
fn proper_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}
