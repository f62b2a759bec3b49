//! Three-mirror ring cavity: frequency-domain reflection and loss-coupling
//! coefficients, plus the derived linewidth, quality factor, and finesse.
//!
//! The cavity is described by the input-mirror power reflectivity `R1`, the
//! combined product `R2*R3` (intra-cavity losses absorbed into the product),
//! the input-mirror power transmission `T1`, the free spectral range, and the
//! optical carrier frequency. Only the product `R2*R3` is observable from the
//! reflected field, so the two mirrors are never carried separately.

use num_complex::Complex64;
// f64 transcendentals come from num-traits in no_std builds
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Magnitude below which the round-trip denominator is treated as singular.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Slack on the `|r_c|^2 <= 1` passivity check before erroring.
const REFLECTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CavityError {
    #[error("{name} = {value} outside (0, 1]")]
    ReflectivityOutOfRange { name: &'static str, value: f64 },
    #[error("input mirror power budget violated: T1 + R1 = {sum} > 1")]
    MirrorBudget { sum: f64 },
    #[error("{name} = {value} must be positive and finite")]
    NonPositive { name: &'static str, value: f64 },
    #[error("detuning must be finite, got {0}")]
    NonFiniteDetuning(f64),
    #[error("singular cavity: round-trip denominator magnitude {0:e} below tolerance")]
    SingularResonance(f64),
    #[error("nonphysical reflectivity |r_c| = {0} > 1")]
    NonphysicalReflectivity(f64),
    #[error("zero linewidth: R1*R2*R3 = 1 (no round-trip loss)")]
    ZeroLinewidth,
    #[error("low-finesse regime: linewidth formula argument {0} exceeds 1")]
    LowFinesse(f64),
    #[error("infinite finesse: R1*R2*R3 = 1")]
    InfiniteFinesse,
}

/// Three-mirror ring cavity geometry and mirror budget.
///
/// Invariants are enforced on construction: `0 < R1 <= 1`,
/// `0 < R2*R3 <= 1`, `T1 + R1 <= 1`, and positive finite free spectral
/// range and carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingCavity {
    r1_sq: f64,
    r2r3_sq: f64,
    t1: f64,
    fsr_hz: f64,
    carrier_hz: f64,
}

impl RingCavity {
    /// Cavity with a lossless input mirror, `T1 = 1 - R1`.
    pub fn new(r1_sq: f64, r2r3_sq: f64, fsr_hz: f64, carrier_hz: f64) -> Result<Self, CavityError> {
        Self::with_input_transmission(r1_sq, r2r3_sq, 1.0 - r1_sq, fsr_hz, carrier_hz)
    }

    /// Cavity with an explicit input-mirror power transmission.
    pub fn with_input_transmission(
        r1_sq: f64,
        r2r3_sq: f64,
        t1: f64,
        fsr_hz: f64,
        carrier_hz: f64,
    ) -> Result<Self, CavityError> {
        check_reflectivity("R1", r1_sq)?;
        check_reflectivity("R2*R3", r2r3_sq)?;
        if !(t1.is_finite() && t1 >= 0.0) {
            return Err(CavityError::NonPositive { name: "T1", value: t1 });
        }
        let sum = t1 + r1_sq;
        if sum > 1.0 + 1e-12 {
            return Err(CavityError::MirrorBudget { sum });
        }
        check_positive("fsr_hz", fsr_hz)?;
        check_positive("carrier_hz", carrier_hz)?;
        Ok(Self { r1_sq, r2r3_sq, t1, fsr_hz, carrier_hz })
    }

    /// Cavity from the amplitude parameters used in fitting,
    /// `sqrt(R1)` and `sqrt(R1*R2*R3)`, with a lossless input mirror.
    pub fn from_amplitudes(
        sqrt_r1: f64,
        sqrt_r1r2r3: f64,
        fsr_hz: f64,
        carrier_hz: f64,
    ) -> Result<Self, CavityError> {
        if !(sqrt_r1.is_finite() && sqrt_r1 > 0.0) {
            return Err(CavityError::ReflectivityOutOfRange { name: "sqrt_r1", value: sqrt_r1 });
        }
        let r2r3_sq = (sqrt_r1r2r3 / sqrt_r1) * (sqrt_r1r2r3 / sqrt_r1);
        Self::new(sqrt_r1 * sqrt_r1, r2r3_sq, fsr_hz, carrier_hz)
    }

    pub fn r1_sq(&self) -> f64 {
        self.r1_sq
    }

    pub fn r2r3_sq(&self) -> f64 {
        self.r2r3_sq
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn fsr_hz(&self) -> f64 {
        self.fsr_hz
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// Amplitude reflectivity of the input mirror, `sqrt(R1)`.
    pub fn sqrt_r1(&self) -> f64 {
        self.r1_sq.sqrt()
    }

    /// Round-trip amplitude reflectivity product, `sqrt(R1*R2*R3)`.
    pub fn sqrt_r1r2r3(&self) -> f64 {
        (self.r1_sq * self.r2r3_sq).sqrt()
    }

    /// Round-trip length `p = c / FSR`, metres.
    pub fn round_trip_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.fsr_hz
    }
}

/// Carrier detuning from the cavity resonance, in hertz (signed).
///
/// Negative detuning puts the carrier below the cavity resonance, in which
/// case upper sidebands (+Ω) fall inside the resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detuning {
    omega_d_hz: f64,
}

impl Detuning {
    pub fn new(omega_d_hz: f64) -> Result<Self, CavityError> {
        if !omega_d_hz.is_finite() {
            return Err(CavityError::NonFiniteDetuning(omega_d_hz));
        }
        Ok(Self { omega_d_hz })
    }

    pub fn zero() -> Self {
        Self { omega_d_hz: 0.0 }
    }

    pub fn hz(&self) -> f64 {
        self.omega_d_hz
    }
}

fn check_reflectivity(name: &'static str, value: f64) -> Result<(), CavityError> {
    if value.is_finite() && value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(CavityError::ReflectivityOutOfRange { name, value })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), CavityError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CavityError::NonPositive { name, value })
    }
}

/// Wrap an angle to (-pi, pi].
fn wrap_phase(phi: f64) -> f64 {
    let tau = 2.0 * core::f64::consts::PI;
    let w = phi - tau * (phi / tau).round();
    if w <= -core::f64::consts::PI {
        w + tau
    } else {
        w
    }
}

/// Round-trip phase shifts of the detuned carrier and of a sideband,
/// `phi_c = 2 pi omega_d / FSR` and `phi_s = 2 pi Omega / FSR`,
/// both wrapped to (-pi, pi].
pub fn phase_shifts(cavity: &RingCavity, detuning: Detuning, sideband_hz: f64) -> (f64, f64) {
    let tau = 2.0 * core::f64::consts::PI;
    let phi_c = wrap_phase(tau * detuning.hz() / cavity.fsr_hz());
    let phi_s = wrap_phase(tau * sideband_hz / cavity.fsr_hz());
    (phi_c, phi_s)
}

/// Frequency-dependent cavity reflection coefficient `r_c(omega_d + Omega)`.
///
/// Pass a signed `sideband_hz` to evaluate either sideband:
/// `r_c(omega_d - Omega)` is `reflection_coefficient(cavity, detuning, -omega)`.
///
/// Errors with [`CavityError::SingularResonance`] when the round-trip
/// denominator collapses (unit reflectivity product exactly on resonance).
pub fn reflection_coefficient(
    cavity: &RingCavity,
    detuning: Detuning,
    sideband_hz: f64,
) -> Result<Complex64, CavityError> {
    let (phi_c, phi_s) = phase_shifts(cavity, detuning, sideband_hz);
    let phase = Complex64::new(0.0, -(phi_c + phi_s)).exp();
    let sqrt_r1 = cavity.sqrt_r1();
    let sqrt_r2r3 = cavity.r2r3_sq().sqrt();
    let sqrt_prod = cavity.sqrt_r1r2r3();

    let denom = Complex64::new(1.0, 0.0) - sqrt_prod * phase;
    if denom.norm() < SINGULARITY_TOL {
        return Err(CavityError::SingularResonance(denom.norm()));
    }
    Ok(sqrt_r1 - cavity.t1() * sqrt_r2r3 * phase / denom)
}

/// Vacuum-noise coupling amplitude `l_c = sqrt(1 - |r_c|^2)`.
///
/// The pair satisfies `|r_c|^2 + l_c^2 = 1` exactly; a reflection magnitude
/// above unity (beyond a small tolerance) is rejected as nonphysical.
pub fn loss_coupling(
    cavity: &RingCavity,
    detuning: Detuning,
    sideband_hz: f64,
) -> Result<f64, CavityError> {
    let r = reflection_coefficient(cavity, detuning, sideband_hz)?;
    loss_from_reflection(r)
}

/// `sqrt(1 - |r_c|^2)` for an already-computed reflection coefficient.
pub fn loss_from_reflection(r: Complex64) -> Result<f64, CavityError> {
    let mag_sq = r.norm_sqr();
    if mag_sq > 1.0 + REFLECTIVITY_TOL {
        return Err(CavityError::NonphysicalReflectivity(mag_sq.sqrt()));
    }
    Ok((1.0 - mag_sq).max(0.0).sqrt())
}

/// FWHM cavity linewidth in hertz, exact arcsine form:
/// `gamma = (2/pi) FSR asin[(1 - sqrt(R1 R2 R3)) / (2 (R1 R2 R3)^(1/4))]`.
pub fn linewidth_hz(cavity: &RingCavity) -> Result<f64, CavityError> {
    let arg = linewidth_argument(cavity)?;
    Ok(2.0 / core::f64::consts::PI * cavity.fsr_hz() * arg.asin())
}

/// High-finesse approximation to the linewidth,
/// `gamma ~= FSR (1 - sqrt(R1 R2 R3)) / (pi (R1 R2 R3)^(1/4))`.
pub fn linewidth_approx_hz(cavity: &RingCavity) -> Result<f64, CavityError> {
    let arg = linewidth_argument(cavity)?;
    Ok(2.0 / core::f64::consts::PI * cavity.fsr_hz() * arg)
}

fn linewidth_argument(cavity: &RingCavity) -> Result<f64, CavityError> {
    let product = cavity.r1_sq() * cavity.r2r3_sq();
    if product >= 1.0 {
        return Err(CavityError::ZeroLinewidth);
    }
    let sqrt_prod = product.sqrt();
    let arg = (1.0 - sqrt_prod) / (2.0 * product.powf(0.25));
    if arg > 1.0 {
        return Err(CavityError::LowFinesse(arg));
    }
    Ok(arg)
}

/// Quality factor `Q = carrier / gamma` using the exact linewidth.
pub fn quality_factor(cavity: &RingCavity) -> Result<f64, CavityError> {
    let gamma = linewidth_hz(cavity)?;
    if gamma <= 0.0 {
        return Err(CavityError::ZeroLinewidth);
    }
    Ok(cavity.carrier_hz() / gamma)
}

/// Finesse `F = pi (R1 R2 R3)^(1/4) / (1 - sqrt(R1 R2 R3))`.
///
/// Agrees with `FSR / gamma` in the high-finesse limit.
pub fn finesse(cavity: &RingCavity) -> Result<f64, CavityError> {
    let product = cavity.r1_sq() * cavity.r2r3_sq();
    if product >= 1.0 {
        return Err(CavityError::InfiniteFinesse);
    }
    let sqrt_prod = product.sqrt();
    Ok(core::f64::consts::PI * product.powf(0.25) / (1.0 - sqrt_prod))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = core::f64::consts::PI;

    /// Fitted test-cavity parameters used as fixtures below.
    fn reference_cavity() -> RingCavity {
        RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, 2.8176e14).unwrap()
    }

    #[test]
    fn phase_shifts_zero_detuning() {
        let cav = reference_cavity();
        let (pc, ps) = phase_shifts(&cav, Detuning::zero(), 0.0);
        assert_eq!(pc, 0.0);
        assert_eq!(ps, 0.0);
    }

    #[test]
    fn phase_shifts_quarter_fsr() {
        let cav = reference_cavity();
        let (pc, ps) = phase_shifts(&cav, Detuning::new(713e6 / 4.0).unwrap(), 0.0);
        assert!((pc - PI / 2.0).abs() < 1e-12);
        assert_eq!(ps, 0.0);
    }

    #[test]
    fn phase_shift_at_fitted_detuning() {
        // 2 pi * 11.098 MHz / 713 MHz
        let cav = reference_cavity();
        let (pc, _) = phase_shifts(&cav, Detuning::new(11.098e6).unwrap(), 0.0);
        assert!((pc - 0.09779914521609966).abs() < 1e-12);
    }

    #[test]
    fn phase_wraps_into_half_open_interval() {
        let cav = reference_cavity();
        let (pc, _) = phase_shifts(&cav, Detuning::new(713e6 / 2.0).unwrap(), 0.0);
        assert!((pc - PI).abs() < 1e-9);
        let (pc, _) = phase_shifts(&cav, Detuning::new(-713e6 / 2.0).unwrap(), 0.0);
        assert!((pc - PI).abs() < 1e-9, "-pi maps to +pi, got {pc}");
    }

    #[test]
    fn perfect_input_mirror_reflects_everything() {
        let cav = RingCavity::new(1.0, 0.99, 713e6, 2.8e14).unwrap();
        for omega in [0.0, 1e6, -37e6, 350e6] {
            let r = reflection_coefficient(&cav, Detuning::new(2e6).unwrap(), omega).unwrap();
            assert!((r - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            let l = loss_coupling(&cav, Detuning::new(2e6).unwrap(), omega).unwrap();
            assert!(l.abs() < 1e-6);
        }
    }

    #[test]
    fn resonant_reflection_matches_fixture() {
        let cav = reference_cavity();
        let r = reflection_coefficient(&cav, Detuning::zero(), 0.0).unwrap();
        assert!((r.re - (-0.16576053369145338)).abs() < 1e-10, "re = {}", r.re);
        assert!(r.im.abs() < 1e-12);
    }

    #[test]
    fn anti_resonant_reflection_near_unity() {
        let cav = reference_cavity();
        let r = reflection_coefficient(&cav, Detuning::new(713e6 / 2.0).unwrap(), 0.0).unwrap();
        assert!((r.norm() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn loss_coupling_fixture() {
        let cav = reference_cavity();
        let l = loss_coupling(&cav, Detuning::zero(), 0.0).unwrap();
        assert!((l - 0.9861660334194869).abs() < 1e-10);
    }

    #[test]
    fn reflection_loss_identity_off_resonance() {
        let cav = reference_cavity();
        let det = Detuning::new(-11.098e6).unwrap();
        for omega in [0.0, 5e6, 11.098e6, -11.098e6, 200e6] {
            let r = reflection_coefficient(&cav, det, omega).unwrap();
            let l = loss_coupling(&cav, det, omega).unwrap();
            assert!((r.norm_sqr() + l * l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn undetuned_reflection_conjugate_symmetry() {
        let cav = reference_cavity();
        for omega in [0.3e6, 5e6, 80e6] {
            let rp = reflection_coefficient(&cav, Detuning::zero(), omega).unwrap();
            let rm = reflection_coefficient(&cav, Detuning::zero(), -omega).unwrap();
            assert!((rp - rm.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn reflection_periodic_in_one_fsr() {
        let cav = reference_cavity();
        let det = Detuning::new(3.7e6).unwrap();
        for omega in [0.0, 1.1e6, 52e6] {
            let r0 = reflection_coefficient(&cav, det, omega).unwrap();
            let r1 = reflection_coefficient(&cav, det, omega + 713e6).unwrap();
            assert!((r0 - r1).norm() < 1e-9);
        }
    }

    #[test]
    fn singular_on_resonance_with_unit_product() {
        let cav = RingCavity::with_input_transmission(1.0, 1.0, 0.0, 713e6, 2.8e14).unwrap();
        let err = reflection_coefficient(&cav, Detuning::zero(), 0.0).unwrap_err();
        assert!(matches!(err, CavityError::SingularResonance(_)));
    }

    #[test]
    fn linewidth_matches_fitted_cavity() {
        let cav = reference_cavity();
        let gamma = linewidth_hz(&cav).unwrap();
        assert!((gamma - 845_847.6408313403).abs() < 1e-3, "gamma = {gamma}");
        // consistent with the independently measured 844 +/- 40 kHz
        assert!(gamma > 805e3 && gamma < 885e3);
    }

    #[test]
    fn linewidth_exact_vs_approx() {
        let cav = reference_cavity();
        let exact = linewidth_hz(&cav).unwrap();
        let approx = linewidth_approx_hz(&cav).unwrap();
        assert!((exact - approx).abs() / exact < 1e-5);
    }

    #[test]
    fn linewidth_vanishes_in_lossless_limit() {
        let fsr = 713e6;
        let mut last = f64::INFINITY;
        for r2r3 in [0.99, 0.999, 0.9999, 0.999999, 1.0 - 1e-9] {
            let cav = RingCavity::with_input_transmission(1.0, r2r3, 0.0, fsr, 2.8e14).unwrap();
            let gamma = linewidth_hz(&cav).unwrap();
            assert!(gamma < last, "gamma must shrink as the product approaches 1");
            last = gamma;
        }
        assert!(last < 1.0, "gamma = {last}");
        let lossless = RingCavity::with_input_transmission(1.0, 1.0, 0.0, fsr, 2.8e14).unwrap();
        assert_eq!(linewidth_hz(&lossless).unwrap_err(), CavityError::ZeroLinewidth);
    }

    #[test]
    fn low_finesse_regime_is_flagged() {
        // sqrt(R1 R2 R3) < 3 - 2 sqrt(2) puts the arcsine argument above 1
        let cav = RingCavity::new(0.16, 0.16, 713e6, 2.8e14).unwrap();
        assert!(matches!(linewidth_hz(&cav).unwrap_err(), CavityError::LowFinesse(_)));
        assert!(matches!(linewidth_approx_hz(&cav).unwrap_err(), CavityError::LowFinesse(_)));
    }

    #[test]
    fn quality_factor_fixture() {
        let cav = reference_cavity();
        let q = quality_factor(&cav).unwrap();
        assert!((q / 3.331e8 - 1.0).abs() < 1e-3, "q = {q}");
    }

    #[test]
    fn quality_factor_unity_and_linearity() {
        let gamma = linewidth_hz(&reference_cavity()).unwrap();
        let cav = RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, gamma).unwrap();
        assert!((quality_factor(&cav).unwrap() - 1.0).abs() < 1e-12);

        let doubled = RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, 2.0 * gamma).unwrap();
        assert!((quality_factor(&doubled).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn finesse_fixture_and_fsr_over_gamma() {
        let cav = reference_cavity();
        let f = finesse(&cav).unwrap();
        assert!((f - 842.9418942999407).abs() < 1e-6);
        let gamma = linewidth_hz(&cav).unwrap();
        assert!((f * gamma / cav.fsr_hz() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn finesse_formula_plug_in() {
        // sqrt(R1 R2 R3) = 0.5
        let cav = RingCavity::new(0.5, 0.5, 713e6, 2.8e14).unwrap();
        let expected = PI * 0.25f64.powf(0.25) / (1.0 - 0.5);
        assert!((finesse(&cav).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn finesse_infinite_for_unit_product() {
        let cav = RingCavity::with_input_transmission(1.0, 1.0, 0.0, 713e6, 2.8e14).unwrap();
        assert_eq!(finesse(&cav).unwrap_err(), CavityError::InfiniteFinesse);
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert!(RingCavity::new(0.0, 0.9, 713e6, 2.8e14).is_err());
        assert!(RingCavity::new(1.2, 0.9, 713e6, 2.8e14).is_err());
        assert!(RingCavity::new(0.9, -0.1, 713e6, 2.8e14).is_err());
        assert!(RingCavity::new(0.9, 0.9, 0.0, 2.8e14).is_err());
        assert!(RingCavity::new(0.9, 0.9, 713e6, f64::NAN).is_err());
        assert!(RingCavity::with_input_transmission(0.9, 0.9, 0.2, 713e6, 2.8e14).is_err());
        // sqrt(R1 R2 R3) > sqrt(R1) implies R2*R3 > 1
        assert!(RingCavity::from_amplitudes(0.9, 0.95, 713e6, 2.8e14).is_err());
        assert!(Detuning::new(f64::INFINITY).is_err());
    }

    #[test]
    fn round_trip_length_is_c_over_fsr() {
        let cav = reference_cavity();
        assert!((cav.round_trip_m() - SPEED_OF_LIGHT / 713e6).abs() < 1e-9);
    }
}
