//! Two-photon (quadrature) transfer of Gaussian noise through the detuned
//! cavity and the detection chain.
//!
//! A sideband pair at `omega_d +/- Omega` sees two different reflection
//! coefficients. In the quadrature picture that asymmetry becomes an overall
//! phase `phi_minus`, a quadrature rotation `phi_plus`, a symmetric
//! attenuation `A_plus` and an antisymmetric attenuation `A_minus`, with the
//! lost weight refilled by vacuum. [`reflect_variances`] applies the
//! resulting variance map; [`spectrum`] evaluates it over a frequency grid.

use alloc::vec::Vec;

use num_complex::Complex64;
// f64 transcendentals come from num-traits in no_std builds
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::cavity::{
    loss_from_reflection, reflection_coefficient, CavityError, Detuning, RingCavity,
};

/// Slack on passivity checks (vacuum fill coefficients, attenuation bounds).
const PASSIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TransferError {
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error("sideband frequency must be nonnegative, got {0}")]
    NegativeFrequency(f64),
    #[error("nonphysical transfer: vacuum fill coefficient {0} is negative")]
    NonphysicalTransfer(f64),
    #[error("attenuations violate passivity: A+^2 + A-^2 = {0} > 1")]
    PassivityViolation(f64),
    #[error("|A-| = {a_minus} exceeds A+ = {a_plus}")]
    AttenuationOrdering { a_plus: f64, a_minus: f64 },
    #[error("mode-mismatch reflection r_m = {0} outside [0, 1]")]
    MismatchOutOfRange(f64),
    #[error("quadrature variance must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("detection efficiency {name} = {value} outside [0, 1]")]
    EfficiencyOutOfRange { name: &'static str, value: f64 },
    #[error("detection efficiencies sum to {0}, cannot renormalize")]
    DegenerateEfficiencies(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SqueezingModelError {
    #[error("pump parameter x = {0} outside [0, 1)")]
    PumpOutOfRange(f64),
    #[error("OPO linewidth must be positive, got {0}")]
    NonPositiveLinewidth(f64),
    #[error("escape purity {0} outside (0, 1]")]
    EscapeOutOfRange(f64),
    #[error("variances V1 = {v1}, V2 = {v2} violate the Heisenberg bound V1*V2 >= 1")]
    HeisenbergViolation { v1: f64, v2: f64 },
    #[error("tabulated model needs at least one row")]
    EmptyTable,
    #[error("tabulated frequencies not strictly ascending at row {0}")]
    NonMonotoneTable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpectrumError {
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency grid not strictly ascending at index {0}")]
    NonAscendingGrid(usize),
    #[error("grid frequency at index {0} is negative or non-finite")]
    BadGridFrequency(usize),
    #[error("spectrum arrays have mismatched lengths")]
    LengthMismatch,
    #[error("variance at index {0} must be positive and finite")]
    BadVariance(usize),
    #[error("at grid index {index} ({freq_hz} Hz): {source}")]
    At { index: usize, freq_hz: f64, source: TransferError },
}

/// Per-frequency quadrature transfer of the detuned cavity.
///
/// `phi_minus`/`phi_plus` are the half-sum and half-difference phases of the
/// two sideband reflection coefficients, `a_plus`/`a_minus` the corresponding
/// magnitude combinations, `l_plus`/`l_minus` the loss-coupling combinations,
/// and `r_m` the prompt mode-mismatch reflection amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonTransfer {
    pub phi_minus: f64,
    pub phi_plus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub r_m: f64,
}

impl TwoPhotonTransfer {
    pub fn new(
        phi_minus: f64,
        phi_plus: f64,
        a_plus: f64,
        a_minus: f64,
        l_plus: f64,
        l_minus: f64,
        r_m: f64,
    ) -> Result<Self, TransferError> {
        if !(0.0..=1.0).contains(&r_m) {
            return Err(TransferError::MismatchOutOfRange(r_m));
        }
        if a_minus.abs() > a_plus + PASSIVITY_TOL || a_plus > 1.0 + PASSIVITY_TOL {
            return Err(TransferError::AttenuationOrdering { a_plus, a_minus });
        }
        let sum = a_plus * a_plus + a_minus * a_minus;
        if sum > 1.0 + PASSIVITY_TOL {
            return Err(TransferError::PassivityViolation(sum));
        }
        Ok(Self { phi_minus, phi_plus, a_plus, a_minus, l_plus, l_minus, r_m })
    }

    /// Cavity propagation matrix M: overall phase, rotation by `phi_plus`,
    /// and attenuation by `a_plus`/`a_minus`.
    pub fn propagation_matrix(&self) -> [[Complex64; 2]; 2] {
        let phase = Complex64::new(0.0, self.phi_minus).exp();
        let (sin, cos) = self.phi_plus.sin_cos();
        let ap = Complex64::new(self.a_plus, 0.0);
        let iam = Complex64::new(0.0, self.a_minus);
        // rotation(phi_plus) * [[A+, iA-], [-iA-, A+]]
        [
            [phase * (cos * ap - sin * (-iam)), phase * (cos * iam - sin * ap)],
            [phase * (sin * ap + cos * (-iam)), phase * (sin * iam + cos * ap)],
        ]
    }

    /// Vacuum loss-coupling matrix H.
    pub fn loss_matrix(&self) -> [[Complex64; 2]; 2] {
        let lp = Complex64::new(self.l_plus, 0.0);
        let ilm = Complex64::new(0.0, self.l_minus);
        [[lp, ilm], [-ilm, lp]]
    }
}

/// Composite detection efficiencies for the cavity-coupled mode (`eta_c`),
/// the mode-mismatched mode (`eta_m`), and detection losses (`eta_l`).
/// Renormalized so the three sum to 1 exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel {
    eta_c: f64,
    eta_m: f64,
    eta_l: f64,
}

impl DetectionModel {
    pub fn new(eta_c: f64, eta_m: f64, eta_l: f64) -> Result<Self, TransferError> {
        for (name, value) in [("eta_c", eta_c), ("eta_m", eta_m), ("eta_l", eta_l)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(TransferError::EfficiencyOutOfRange { name, value });
            }
        }
        let sum = eta_c + eta_m + eta_l;
        if !(sum.is_finite() && sum > 0.0) {
            return Err(TransferError::DegenerateEfficiencies(sum));
        }
        let eta_c = eta_c / sum;
        let eta_m = eta_m / sum;
        Ok(Self { eta_c, eta_m, eta_l: (1.0 - eta_c - eta_m).max(0.0) })
    }

    /// Lossless, perfectly mode-matched detection.
    pub fn ideal() -> Self {
        Self { eta_c: 1.0, eta_m: 0.0, eta_l: 0.0 }
    }

    /// Detection budget with the mismatched mode ignored:
    /// `eta_m = 0`, `eta_l = 1 - eta_c`.
    pub fn from_budget(eta_c: f64) -> Result<Self, TransferError> {
        if !(0.0..=1.0).contains(&eta_c) {
            return Err(TransferError::EfficiencyOutOfRange { name: "eta_c", value: eta_c });
        }
        Ok(Self { eta_c, eta_m: 0.0, eta_l: 1.0 - eta_c })
    }

    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }

    pub fn eta_m(&self) -> f64 {
        self.eta_m
    }

    pub fn eta_l(&self) -> f64 {
        self.eta_l
    }
}

/// One row of a tabulated input-squeezing spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TablePoint {
    pub freq_hz: f64,
    pub v1: f64,
    pub v2: f64,
}

/// Frequency-dependent incident quadrature variances `V1(Omega)`, `V2(Omega)`.
///
/// The default parametric form is the below-threshold OPO output,
/// `V1 = 1 - eta 4x / ((1+x)^2 + (Omega/g)^2)` and
/// `V2 = 1 + eta 4x / ((1-x)^2 + (Omega/g)^2)`,
/// which satisfies `V1*V2 >= 1` for every pump `x in [0,1)` and escape
/// purity `eta in (0,1]`. Constant and tabulated escapes are provided for
/// sources that do not match that shape.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSqueezingModel {
    Constant { v1: f64, v2: f64 },
    OpoLorentzian { pump_x: f64, opo_linewidth_hz: f64, escape_purity: f64 },
    Tabulated { rows: Vec<TablePoint> },
}

impl InputSqueezingModel {
    pub fn constant(v1: f64, v2: f64) -> Result<Self, SqueezingModelError> {
        check_variance_pair(v1, v2)?;
        Ok(Self::Constant { v1, v2 })
    }

    pub fn vacuum() -> Self {
        Self::Constant { v1: 1.0, v2: 1.0 }
    }

    pub fn opo_lorentzian(
        pump_x: f64,
        opo_linewidth_hz: f64,
        escape_purity: f64,
    ) -> Result<Self, SqueezingModelError> {
        if !(pump_x.is_finite() && (0.0..1.0).contains(&pump_x)) {
            return Err(SqueezingModelError::PumpOutOfRange(pump_x));
        }
        if !(opo_linewidth_hz.is_finite() && opo_linewidth_hz > 0.0) {
            return Err(SqueezingModelError::NonPositiveLinewidth(opo_linewidth_hz));
        }
        if !(escape_purity.is_finite() && escape_purity > 0.0 && escape_purity <= 1.0) {
            return Err(SqueezingModelError::EscapeOutOfRange(escape_purity));
        }
        Ok(Self::OpoLorentzian { pump_x, opo_linewidth_hz, escape_purity })
    }

    /// Tabulated spectrum; rows must be strictly ascending in frequency and
    /// every row must satisfy the Heisenberg bound (linear interpolation
    /// between such rows preserves it).
    pub fn tabulated(rows: Vec<TablePoint>) -> Result<Self, SqueezingModelError> {
        if rows.is_empty() {
            return Err(SqueezingModelError::EmptyTable);
        }
        for (i, row) in rows.iter().enumerate() {
            check_variance_pair(row.v1, row.v2)?;
            if i > 0 && rows[i - 1].freq_hz >= row.freq_hz {
                return Err(SqueezingModelError::NonMonotoneTable(i));
            }
        }
        Ok(Self::Tabulated { rows })
    }

    /// Incident variances at sideband frequency `omega_hz`.
    pub fn variances_at(&self, omega_hz: f64) -> (f64, f64) {
        match self {
            Self::Constant { v1, v2 } => (*v1, *v2),
            Self::OpoLorentzian { pump_x, opo_linewidth_hz, escape_purity } => {
                let x = *pump_x;
                let on = omega_hz / opo_linewidth_hz;
                let depth = 4.0 * x * escape_purity;
                let v1 = 1.0 - depth / ((1.0 + x) * (1.0 + x) + on * on);
                let v2 = 1.0 + depth / ((1.0 - x) * (1.0 - x) + on * on);
                (v1, v2)
            }
            Self::Tabulated { rows } => {
                let first = rows.first().expect("validated nonempty");
                let last = rows.last().expect("validated nonempty");
                if omega_hz <= first.freq_hz {
                    return (first.v1, first.v2);
                }
                if omega_hz >= last.freq_hz {
                    return (last.v1, last.v2);
                }
                let hi = rows.partition_point(|r| r.freq_hz < omega_hz);
                let (a, b) = (&rows[hi - 1], &rows[hi]);
                let t = (omega_hz - a.freq_hz) / (b.freq_hz - a.freq_hz);
                (a.v1 + t * (b.v1 - a.v1), a.v2 + t * (b.v2 - a.v2))
            }
        }
    }
}

fn check_variance_pair(v1: f64, v2: f64) -> Result<(), SqueezingModelError> {
    if !(v1.is_finite() && v1 > 0.0 && v2.is_finite() && v2 > 0.0)
        || v1 * v2 < 1.0 - PASSIVITY_TOL
    {
        return Err(SqueezingModelError::HeisenbergViolation { v1, v2 });
    }
    Ok(())
}

/// Quadrature noise spectrum on an ascending sideband-frequency grid.
/// Variances are linear relative to shot noise (vacuum = 1); the optional
/// sigma arrays are per-point standard deviations in the same units.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpectrum {
    pub freqs_hz: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub sigma1: Option<Vec<f64>>,
    pub sigma2: Option<Vec<f64>>,
}

impl QuadratureSpectrum {
    pub fn new(
        freqs_hz: Vec<f64>,
        v1: Vec<f64>,
        v2: Vec<f64>,
        sigma1: Option<Vec<f64>>,
        sigma2: Option<Vec<f64>>,
    ) -> Result<Self, SpectrumError> {
        validate_grid(&freqs_hz)?;
        if v1.len() != freqs_hz.len() || v2.len() != freqs_hz.len() {
            return Err(SpectrumError::LengthMismatch);
        }
        for arr in [&v1, &v2] {
            if let Some(i) = arr.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(SpectrumError::BadVariance(i));
            }
        }
        for sig in [&sigma1, &sigma2].into_iter().flatten() {
            if sig.len() != freqs_hz.len() {
                return Err(SpectrumError::LengthMismatch);
            }
            if let Some(i) = sig.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(SpectrumError::BadVariance(i));
            }
        }
        Ok(Self { freqs_hz, v1, v2, sigma1, sigma2 })
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }
}

pub(crate) fn validate_grid(freqs_hz: &[f64]) -> Result<(), SpectrumError> {
    if freqs_hz.is_empty() {
        return Err(SpectrumError::EmptyGrid);
    }
    for (i, &f) in freqs_hz.iter().enumerate() {
        if !(f.is_finite() && f >= 0.0) {
            return Err(SpectrumError::BadGridFrequency(i));
        }
        if i > 0 && freqs_hz[i - 1] >= f {
            return Err(SpectrumError::NonAscendingGrid(i));
        }
    }
    Ok(())
}

/// Quadrature transfer at sideband frequency `omega_hz >= 0`: half-sum and
/// half-difference of the phases, magnitudes, and loss couplings of the two
/// sideband reflection coefficients, plus the prompt reflection `sqrt(R1)`.
pub fn transfer_at(
    cavity: &RingCavity,
    detuning: Detuning,
    omega_hz: f64,
) -> Result<TwoPhotonTransfer, TransferError> {
    if !(omega_hz.is_finite() && omega_hz >= 0.0) {
        return Err(TransferError::NegativeFrequency(omega_hz));
    }
    let r_upper = reflection_coefficient(cavity, detuning, omega_hz)?;
    let r_lower = reflection_coefficient(cavity, detuning, -omega_hz)?;
    let l_upper = loss_from_reflection(r_upper)?;
    let l_lower = loss_from_reflection(r_lower)?;

    TwoPhotonTransfer::new(
        0.5 * (r_upper.arg() - r_lower.arg()),
        0.5 * (r_upper.arg() + r_lower.arg()),
        0.5 * (r_upper.norm() + r_lower.norm()),
        0.5 * (r_upper.norm() - r_lower.norm()),
        0.5 * (l_upper + l_lower),
        0.5 * (l_upper - l_lower),
        cavity.sqrt_r1(),
    )
}

/// Reflected quadrature variances for a common incident field:
/// rotation/attenuation mix on the cavity-coupled channel, prompt
/// mode-mismatch reflection, and a vacuum fill term carrying all losses.
///
/// Unit input maps to unit output for every physical transfer and
/// detection model.
pub fn reflect_variances(
    transfer: &TwoPhotonTransfer,
    detection: &DetectionModel,
    v1_a: f64,
    v2_a: f64,
) -> Result<(f64, f64), TransferError> {
    reflect_variances_split(transfer, detection, (v1_a, v2_a), (v1_a, v2_a))
}

/// Variance map with separate cavity-coupled and mode-mismatched inputs.
///
/// [`reflect_variances`] is this map with both inputs taken from the same
/// incident field; the split form exists for validation against the
/// per-channel bookkeeping.
pub fn reflect_variances_split(
    transfer: &TwoPhotonTransfer,
    detection: &DetectionModel,
    coupled: (f64, f64),
    mismatched: (f64, f64),
) -> Result<(f64, f64), TransferError> {
    for v in [coupled.0, coupled.1, mismatched.0, mismatched.1] {
        if !(v.is_finite() && v > 0.0) {
            return Err(TransferError::NonPositiveVariance(v));
        }
    }
    let cos_sq = {
        let c = transfer.phi_plus.cos();
        c * c
    };
    let sin_sq = 1.0 - cos_sq;
    let ap_sq = transfer.a_plus * transfer.a_plus;
    let am_sq = transfer.a_minus * transfer.a_minus;
    let rm_sq = transfer.r_m * transfer.r_m;

    // rotation^2 * attenuation^2, acting on (V1, V2)
    let direct = cos_sq * ap_sq + sin_sq * am_sq;
    let crossed = cos_sq * am_sq + sin_sq * ap_sq;

    let cavity_fill = 1.0 - (ap_sq + am_sq);
    let mismatch_fill = 1.0 - rm_sq;
    if cavity_fill < -PASSIVITY_TOL {
        return Err(TransferError::NonphysicalTransfer(cavity_fill));
    }
    if mismatch_fill < -PASSIVITY_TOL {
        return Err(TransferError::NonphysicalTransfer(mismatch_fill));
    }
    let fill = detection.eta_c() * cavity_fill.max(0.0)
        + detection.eta_m() * mismatch_fill.max(0.0)
        + detection.eta_l();

    let v1_b = detection.eta_c() * (direct * coupled.0 + crossed * coupled.1)
        + detection.eta_m() * rm_sq * mismatched.0
        + fill;
    let v2_b = detection.eta_c() * (crossed * coupled.0 + direct * coupled.1)
        + detection.eta_m() * rm_sq * mismatched.1
        + fill;
    Ok((v1_b, v2_b))
}

/// Deterministic (noiseless) quadrature spectrum over a frequency grid.
pub fn spectrum(
    cavity: &RingCavity,
    detuning: Detuning,
    squeezing: &InputSqueezingModel,
    detection: &DetectionModel,
    freqs_hz: &[f64],
) -> Result<QuadratureSpectrum, SpectrumError> {
    validate_grid(freqs_hz)?;
    let mut v1 = Vec::with_capacity(freqs_hz.len());
    let mut v2 = Vec::with_capacity(freqs_hz.len());
    for (index, &freq_hz) in freqs_hz.iter().enumerate() {
        let at = |source| SpectrumError::At { index, freq_hz, source };
        let transfer = transfer_at(cavity, detuning, freq_hz).map_err(at)?;
        let (v1_a, v2_a) = squeezing.variances_at(freq_hz);
        let (b1, b2) = reflect_variances(&transfer, detection, v1_a, v2_a).map_err(at)?;
        v1.push(b1);
        v2.push(b2);
    }
    QuadratureSpectrum::new(freqs_hz.to_vec(), v1, v2, None, None)
}

/// Average photon number of a squeezed field with squeeze factor `r`,
/// coherent amplitude `alpha`, and squeeze angle `theta`.
/// Reduces to `sinh^2 r` for squeezed vacuum (`alpha = 0`).
pub fn squeezed_photon_number(squeeze_r: f64, alpha: Complex64, theta: f64) -> f64 {
    let sh = squeeze_r.sinh();
    let ch = squeeze_r.cosh();
    let interference = (alpha * alpha * Complex64::new(0.0, -theta).exp()).re;
    alpha.norm_sqr() * (ch * ch + sh * sh) - 2.0 * interference * sh * ch + sh * sh
}

/// Signal contrasts of the impedance-matched response relative to the
/// cavity-uncoupled (off-resonance) levels:
/// `S1 = [(V1+V2)/4 + 1/2] / V1` and `S2 = V2 / [(V1+V2)/4 + 1/2]`.
pub fn signal_contrast(v1_a: f64, v2_a: f64) -> (f64, f64) {
    let matched = impedance_matched_variance(v1_a, v2_a);
    (matched / v1_a, v2_a / matched)
}

/// Reflected variance of an impedance-matched cavity at the detuning
/// frequency: `(V1 + V2)/4 + 1/2` in both quadratures.
pub fn impedance_matched_variance(v1_a: f64, v2_a: f64) -> f64 {
    0.25 * (v1_a + v2_a) + 0.5
}

/// Variance to power decibels, `10 log10(v)`.
pub fn to_db(v: f64) -> Result<f64, TransferError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(TransferError::NonPositiveVariance(v));
    }
    Ok(10.0 * v.log10())
}

/// Power decibels to linear variance.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn reference_cavity() -> RingCavity {
        RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, 2.8176e14).unwrap()
    }

    fn reference_detuning() -> Detuning {
        Detuning::new(-11.098e6).unwrap()
    }

    #[test]
    fn no_detuning_means_no_rotation_and_no_asymmetry() {
        let cav = reference_cavity();
        for omega in [0.1e6, 5e6, 20e6] {
            let t = transfer_at(&cav, Detuning::zero(), omega).unwrap();
            assert!(t.phi_plus.abs() < 1e-12, "phi_plus = {}", t.phi_plus);
            assert!(t.a_minus.abs() < 1e-12, "a_minus = {}", t.a_minus);
        }
    }

    #[test]
    fn perfect_mirror_transfer() {
        let cav = RingCavity::new(1.0, 0.9, 713e6, 2.8e14).unwrap();
        let t = transfer_at(&cav, Detuning::new(5e6).unwrap(), 3e6).unwrap();
        assert!((t.a_plus - 1.0).abs() < 1e-12);
        assert!(t.a_minus.abs() < 1e-12);
        assert!(t.l_plus.abs() < 1e-6);
        assert!(t.l_minus.abs() < 1e-6);
    }

    #[test]
    fn one_resonant_sideband_gives_large_asymmetry() {
        // upper sideband resonant, lower far off resonance
        let t = transfer_at(&reference_cavity(), reference_detuning(), 11.098e6).unwrap();
        assert!((t.a_minus - (-0.41703120532455334)).abs() < 1e-9, "a_minus = {}", t.a_minus);
        assert!((t.a_plus - 0.5827917390160067).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_sideband_frequency() {
        let err = transfer_at(&reference_cavity(), Detuning::zero(), -1e6).unwrap_err();
        assert!(matches!(err, TransferError::NegativeFrequency(_)));
    }

    #[test]
    fn vacuum_is_a_fixed_point() {
        let cav = reference_cavity();
        let det = DetectionModel::new(0.7, 0.1, 0.2).unwrap();
        for omega in [0.0, 6e6, 11.098e6, 19e6] {
            let t = transfer_at(&cav, reference_detuning(), omega).unwrap();
            let (v1, v2) = reflect_variances(&t, &det, 1.0, 1.0).unwrap();
            assert!((v1 - 1.0).abs() < 1e-12);
            assert!((v2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn impedance_matched_identity() {
        let t = TwoPhotonTransfer::new(0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.0).unwrap();
        let det = DetectionModel::ideal();
        let (v1a, v2a) = (from_db(-6.0), from_db(10.0));
        let (b1, b2) = reflect_variances(&t, &det, v1a, v2a).unwrap();
        let expected = impedance_matched_variance(v1a, v2a);
        assert_eq!(b1, b2);
        assert!((b1 - expected).abs() < 1e-15);
        assert!((b1 - 3.0627971607877393).abs() < 1e-12);
        assert!((to_db(b1).unwrap() - 4.86118235831203).abs() < 1e-9);
    }

    #[test]
    fn quarter_rotation_swaps_quadratures() {
        let t = TwoPhotonTransfer::new(
            0.0,
            core::f64::consts::FRAC_PI_2,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        let (b1, b2) = reflect_variances(&t, &DetectionModel::ideal(), 0.3, 7.0).unwrap();
        assert!((b1 - 7.0).abs() < 1e-12);
        assert!((b2 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn output_stays_within_convex_bounds() {
        let cav = reference_cavity();
        let det = DetectionModel::new(0.765, 0.05, 0.185).unwrap();
        let (v1a, v2a) = (0.3, 4.0);
        for omega in [0.0, 3e6, 11.098e6, 40e6] {
            let t = transfer_at(&cav, reference_detuning(), omega).unwrap();
            let (b1, b2) = reflect_variances(&t, &det, v1a, v2a).unwrap();
            for b in [b1, b2] {
                assert!(b >= v1a.min(1.0) - 1e-12);
                assert!(b <= v2a.max(1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn split_form_matches_common_input_form() {
        let t = transfer_at(&reference_cavity(), reference_detuning(), 9e6).unwrap();
        let det = DetectionModel::new(0.6, 0.2, 0.2).unwrap();
        let a = reflect_variances(&t, &det, 0.4, 3.1).unwrap();
        let b = reflect_variances_split(&t, &det, (0.4, 3.1), (0.4, 3.1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_nonpositive_input_variance() {
        let t = transfer_at(&reference_cavity(), reference_detuning(), 9e6).unwrap();
        let det = DetectionModel::ideal();
        assert!(reflect_variances(&t, &det, 0.0, 1.0).is_err());
        assert!(reflect_variances(&t, &det, 1.0, -2.0).is_err());
    }

    #[test]
    fn detection_model_renormalizes_exactly() {
        let det = DetectionModel::new(0.9, 0.3, 0.6).unwrap();
        assert_eq!(det.eta_c() + det.eta_m() + det.eta_l(), 1.0);
        assert!((det.eta_c() - 0.5).abs() < 1e-15);
        assert!(DetectionModel::new(-0.1, 0.5, 0.6).is_err());
        assert!(DetectionModel::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn photon_number_fixtures() {
        assert_eq!(squeezed_photon_number(0.0, Complex64::new(0.0, 0.0), 0.0), 0.0);
        let n = squeezed_photon_number(1.5, Complex64::new(0.0, 0.0), 0.0);
        assert!((n - 4.53).abs() < 0.005, "n = {n}");
        assert!((n - 4.533830997888882).abs() < 1e-12);
        // coherent state |alpha|^2
        let n = squeezed_photon_number(0.0, Complex64::new(2.0, 0.0), 0.0);
        assert!((n - 4.0).abs() < 1e-12);
    }

    #[test]
    fn signal_contrast_fixtures() {
        let (s1, s2) = signal_contrast(1.0, 1.0);
        assert!((s1 - 1.0).abs() < 1e-15);
        assert!((s2 - 1.0).abs() < 1e-15);

        let (s1, s2) = signal_contrast(from_db(-6.0), 10.0);
        assert!((s1 - 12.193215116604916).abs() < 1e-9);
        assert!((s2 - 3.2649893136991284).abs() < 1e-9);
    }

    #[test]
    fn signal_contrast_limits() {
        let (s1, s2) = signal_contrast(1e-2, 1e3);
        assert!((s2 - 4.0).abs() / 4.0 < 0.01);
        assert!((s1 - 1e3 / (4.0 * 1e-2)).abs() / s1 < 0.01);
    }

    #[test]
    fn db_conversions() {
        assert_eq!(to_db(1.0).unwrap(), 0.0);
        assert!((to_db(10.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((to_db(0.2512).unwrap() - (-6.0)).abs() < 5e-3);
        assert!(to_db(0.0).is_err());
        assert!(to_db(-1.0).is_err());
        for v in [0.01, 0.37, 1.0, 42.0] {
            assert!((from_db(to_db(v).unwrap()) / v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn opo_model_respects_heisenberg_bound() {
        let model = InputSqueezingModel::opo_lorentzian(0.35, 66.2e6, 0.9).unwrap();
        for omega in [0.0, 1e6, 5e6, 66.2e6, 1e9] {
            let (v1, v2) = model.variances_at(omega);
            assert!(v1 > 0.0 && v1 < 1.0);
            assert!(v2 > 1.0);
            assert!(v1 * v2 >= 1.0 - 1e-12, "V1*V2 = {} at {omega}", v1 * v2);
        }
        // pure output is minimum-uncertainty at every frequency
        let pure = InputSqueezingModel::opo_lorentzian(0.5, 66.2e6, 1.0).unwrap();
        for omega in [0.0, 10e6, 200e6] {
            let (v1, v2) = pure.variances_at(omega);
            assert!((v1 * v2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn opo_model_rolls_off_to_vacuum() {
        let model = InputSqueezingModel::opo_lorentzian(0.35, 66.2e6, 0.9).unwrap();
        let (lo1, lo2) = model.variances_at(1e6);
        let (hi1, hi2) = model.variances_at(400e6);
        assert!(hi1 > lo1 && hi1 < 1.0);
        assert!(hi2 < lo2 && hi2 > 1.0);
        let (far1, far2) = model.variances_at(1e12);
        assert!((far1 - 1.0).abs() < 1e-4);
        assert!((far2 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tabulated_model_interpolates_and_clamps() {
        let model = InputSqueezingModel::tabulated(vec![
            TablePoint { freq_hz: 1e6, v1: 0.5, v2: 4.0 },
            TablePoint { freq_hz: 3e6, v1: 0.7, v2: 2.0 },
        ])
        .unwrap();
        assert_eq!(model.variances_at(0.0), (0.5, 4.0));
        assert_eq!(model.variances_at(5e6), (0.7, 2.0));
        let (v1, v2) = model.variances_at(2e6);
        assert!((v1 - 0.6).abs() < 1e-15);
        assert!((v2 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn squeezing_model_validation() {
        assert!(InputSqueezingModel::constant(0.5, 1.0).is_err());
        assert!(InputSqueezingModel::constant(0.5, 2.0).is_ok());
        assert!(InputSqueezingModel::opo_lorentzian(1.0, 66e6, 0.9).is_err());
        assert!(InputSqueezingModel::opo_lorentzian(0.3, 0.0, 0.9).is_err());
        assert!(InputSqueezingModel::opo_lorentzian(0.3, 66e6, 0.0).is_err());
        assert!(InputSqueezingModel::tabulated(vec![]).is_err());
        assert!(InputSqueezingModel::tabulated(vec![
            TablePoint { freq_hz: 2e6, v1: 1.0, v2: 1.0 },
            TablePoint { freq_hz: 1e6, v1: 1.0, v2: 1.0 },
        ])
        .is_err());
    }

    #[test]
    fn vacuum_input_gives_flat_unity_spectrum() {
        let freqs: Vec<f64> = (0..40).map(|i| 5e6 + i as f64 * 0.5e6).collect();
        let spec = spectrum(
            &reference_cavity(),
            reference_detuning(),
            &InputSqueezingModel::vacuum(),
            &DetectionModel::from_budget(0.765).unwrap(),
            &freqs,
        )
        .unwrap();
        for (v1, v2) in spec.v1.iter().zip(&spec.v2) {
            assert!((v1 - 1.0).abs() < 1e-12);
            assert!((v2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_feature_sits_at_detuning_magnitude_with_linewidth_width() {
        let freqs: Vec<f64> = (0..=300).map(|i| 5e6 + i as f64 * 50e3).collect();
        let squeezing = InputSqueezingModel::opo_lorentzian(0.35, 66.2e6, 0.9).unwrap();
        let det = DetectionModel::from_budget(0.765).unwrap();
        let spec =
            spectrum(&reference_cavity(), reference_detuning(), &squeezing, &det, &freqs).unwrap();
        // anti-squeezed quadrature dips toward shot noise where one sideband
        // enters the resonance
        let (imin, _) = spec
            .v2
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((spec.freqs_hz[imin] - 11.098e6).abs() <= 50e3);
        // squeezed quadrature bumps toward shot noise at the same frequency
        let (imax, _) = spec
            .v1
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((spec.freqs_hz[imax] - 11.098e6).abs() <= 50e3);

        // full width at half depth of the dip matches the cavity linewidth
        // within the 100 kHz resolution of the reference grid
        let n = spec.len();
        let edge = |i: usize| {
            spec.v2[0] + (spec.v2[n - 1] - spec.v2[0]) * i as f64 / (n - 1) as f64
        };
        let depth: Vec<f64> = (0..n).map(|i| edge(i) - spec.v2[i]).collect();
        let half = 0.5 * depth[imin];
        let left = (0..imin).find(|&i| depth[i] >= half).unwrap();
        let right = (imin..n).find(|&i| depth[i] < half).unwrap();
        let width = spec.freqs_hz[right] - spec.freqs_hz[left];
        let gamma = crate::cavity::linewidth_hz(&reference_cavity()).unwrap();
        assert!((width - gamma).abs() <= 100e3, "width = {width}, gamma = {gamma}");
    }

    #[test]
    fn spectrum_reaches_cavity_uncoupled_limit_off_resonance() {
        // far from the feature the cavity reflects both sidebands and the
        // output is the detection-scaled input
        let squeezing = InputSqueezingModel::constant(0.3, 4.0).unwrap();
        let det = DetectionModel::from_budget(0.765).unwrap();
        let freqs = [200e6];
        let spec =
            spectrum(&reference_cavity(), reference_detuning(), &squeezing, &det, &freqs).unwrap();
        let expect1 = 0.765 * 0.3 + 0.235;
        let expect2 = 0.765 * 4.0 + 0.235;
        assert!((spec.v1[0] - expect1).abs() < 1e-2);
        assert!((spec.v2[0] - expect2).abs() < 1e-2);
    }

    #[test]
    fn spectrum_error_carries_grid_index() {
        let freqs = [1e6, 2e6, 2e6];
        let err = spectrum(
            &reference_cavity(),
            Detuning::zero(),
            &InputSqueezingModel::vacuum(),
            &DetectionModel::ideal(),
            &freqs,
        )
        .unwrap_err();
        assert_eq!(err, SpectrumError::NonAscendingGrid(2));
    }

    #[test]
    fn quadrature_spectrum_validation() {
        assert!(QuadratureSpectrum::new(vec![], vec![], vec![], None, None).is_err());
        assert!(QuadratureSpectrum::new(vec![1.0], vec![1.0], vec![], None, None).is_err());
        assert!(
            QuadratureSpectrum::new(vec![1.0], vec![-1.0], vec![1.0], None, None).is_err()
        );
        assert!(QuadratureSpectrum::new(
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            Some(vec![0.1, 0.1]),
            Some(vec![0.1, 0.1]),
        )
        .is_ok());
    }

    #[test]
    fn propagation_matrix_reduces_to_attenuation_when_aligned() {
        let t = TwoPhotonTransfer::new(0.0, 0.0, 0.8, 0.1, 0.5, 0.05, 0.9).unwrap();
        let m = t.propagation_matrix();
        assert!((m[0][0] - Complex64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((m[0][1] - Complex64::new(0.0, 0.1)).norm() < 1e-15);
        assert!((m[1][0] - Complex64::new(0.0, -0.1)).norm() < 1e-15);
        let h = t.loss_matrix();
        assert!((h[0][0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((h[1][0] - Complex64::new(0.0, -0.05)).norm() < 1e-15);
    }
}
