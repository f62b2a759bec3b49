//! Weighted nonlinear least-squares estimation of cavity parameters from
//! dual-quadrature noise spectra.
//!
//! The fit minimizes `sum[(V_model - V_data)/sigma]^2` jointly over both
//! quadratures with a damped least-squares iteration and a numerical
//! Jacobian. Box constraints are enforced through smooth reparameterization
//! (logit for unit-interval parameters, log for positive scales), so the
//! internal iteration is unconstrained. Because the variance map cannot
//! distinguish the detuning sign, the fit tries both signs and keeps the
//! lower-chi-square branch, resolving exact ties to negative detuning.
//!
//! Parameter covariance is `(J^T W J)^-1` scaled by the reduced chi-square;
//! uncertainties on the derived linewidth, quality factor, and finesse
//! follow by first-order propagation through the closed-form expressions.

mod linalg;
mod lm;

use alloc::vec;
use alloc::vec::Vec;

// f64 transcendentals come from num-traits in no_std builds
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::cavity::{finesse, linewidth_hz, quality_factor, CavityError, Detuning, RingCavity};
use crate::two_photon::{
    spectrum, DetectionModel, InputSqueezingModel, QuadratureSpectrum, SpectrumError,
    SqueezingModelError, TransferError,
};

use lm::{LmFailure, LmOptions, LmStatus};

/// Chi-square difference below which the two detuning branches are an
/// exact tie.
const CHI2_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Squeezing(#[from] SqueezingModelError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("no parameters floated")]
    NoFloatedParameters,
    #[error("parameter {0} floated twice")]
    DuplicateParameter(&'static str),
    #[error("initial {param} = {value} outside its bounds")]
    GuessOutsideBounds { param: &'static str, value: f64 },
    #[error("trace carries no uncertainties; enable unit_weights to fit without them")]
    MissingSigmas,
    #[error("{got} residuals cannot constrain {nfree} parameters (need at least {need})")]
    InsufficientData { need: usize, got: usize, nfree: usize },
    #[error("model cannot be evaluated at the starting point")]
    InitialEvaluationFailed,
    #[error("fit did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("singular normal equations: {0} is unidentifiable from this trace")]
    UnidentifiableParameter(&'static str),
    #[error("numerical derivative failed for {0}")]
    DerivativeFailed(&'static str),
    #[error("covariance has wrong shape for the floated parameter set")]
    CovarianceShape,
    #[error("profiled parameter {0} is not floated in the fit spec")]
    NotFloated(&'static str),
}

/// Model parameters the fit can float.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitParameter {
    SqrtR1,
    SqrtR1R2R3,
    OmegaDHz,
    FsrHz,
    PumpX,
    OpoLinewidthHz,
    EscapePurity,
    EtaC,
}

impl FitParameter {
    pub const ALL: [FitParameter; 8] = [
        FitParameter::SqrtR1,
        FitParameter::SqrtR1R2R3,
        FitParameter::OmegaDHz,
        FitParameter::FsrHz,
        FitParameter::PumpX,
        FitParameter::OpoLinewidthHz,
        FitParameter::EscapePurity,
        FitParameter::EtaC,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FitParameter::SqrtR1 => "sqrt_r1",
            FitParameter::SqrtR1R2R3 => "sqrt_r1r2r3",
            FitParameter::OmegaDHz => "omega_d_hz",
            FitParameter::FsrHz => "fsr_hz",
            FitParameter::PumpX => "pump_x",
            FitParameter::OpoLinewidthHz => "opo_linewidth_hz",
            FitParameter::EscapePurity => "escape_purity",
            FitParameter::EtaC => "eta_c",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// Complete parameterization of the spectrum model: cavity amplitudes,
/// detuning, the OPO input-squeezing model, and the detection budget.
/// `eta_m` and `carrier_hz` are never floated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub sqrt_r1: f64,
    pub sqrt_r1r2r3: f64,
    pub omega_d_hz: f64,
    pub fsr_hz: f64,
    pub pump_x: f64,
    pub opo_linewidth_hz: f64,
    pub escape_purity: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    pub carrier_hz: f64,
}

impl ModelParams {
    pub fn get(&self, p: FitParameter) -> f64 {
        match p {
            FitParameter::SqrtR1 => self.sqrt_r1,
            FitParameter::SqrtR1R2R3 => self.sqrt_r1r2r3,
            FitParameter::OmegaDHz => self.omega_d_hz,
            FitParameter::FsrHz => self.fsr_hz,
            FitParameter::PumpX => self.pump_x,
            FitParameter::OpoLinewidthHz => self.opo_linewidth_hz,
            FitParameter::EscapePurity => self.escape_purity,
            FitParameter::EtaC => self.eta_c,
        }
    }

    pub fn set(&mut self, p: FitParameter, value: f64) {
        match p {
            FitParameter::SqrtR1 => self.sqrt_r1 = value,
            FitParameter::SqrtR1R2R3 => self.sqrt_r1r2r3 = value,
            FitParameter::OmegaDHz => self.omega_d_hz = value,
            FitParameter::FsrHz => self.fsr_hz = value,
            FitParameter::PumpX => self.pump_x = value,
            FitParameter::OpoLinewidthHz => self.opo_linewidth_hz = value,
            FitParameter::EscapePurity => self.escape_purity = value,
            FitParameter::EtaC => self.eta_c = value,
        }
    }

    pub fn cavity(&self) -> Result<RingCavity, CavityError> {
        RingCavity::from_amplitudes(self.sqrt_r1, self.sqrt_r1r2r3, self.fsr_hz, self.carrier_hz)
    }

    pub fn detuning(&self) -> Result<Detuning, CavityError> {
        Detuning::new(self.omega_d_hz)
    }

    pub fn squeezing(&self) -> Result<InputSqueezingModel, SqueezingModelError> {
        InputSqueezingModel::opo_lorentzian(self.pump_x, self.opo_linewidth_hz, self.escape_purity)
    }

    pub fn detection(&self) -> Result<DetectionModel, TransferError> {
        DetectionModel::new(self.eta_c, self.eta_m, 1.0 - self.eta_c - self.eta_m)
    }

    /// Noiseless model spectrum on a frequency grid.
    pub fn spectrum(&self, freqs_hz: &[f64]) -> Result<QuadratureSpectrum, FitError> {
        let cavity = self.cavity()?;
        let detuning = self.detuning()?;
        let squeezing = self.squeezing()?;
        let detection = self.detection()?;
        Ok(spectrum(&cavity, detuning, &squeezing, &detection, freqs_hz)?)
    }
}

/// Smooth bijection between a bounded parameter and an unbounded internal
/// fit coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// `p = exp(z)` for positive scale parameters.
    Log,
    /// Logistic map onto the open box `(lo, hi)`.
    Logit { lo: f64, hi: f64 },
    /// Logistic map applied to the squared parameter: fits an amplitude
    /// in power coordinates.
    LogitSquared { lo: f64, hi: f64 },
}

impl Transform {
    pub fn to_internal(&self, p: f64) -> Option<f64> {
        if !p.is_finite() {
            return None;
        }
        match *self {
            Transform::Identity => Some(p),
            Transform::Log => (p > 0.0).then(|| p.ln()),
            Transform::Logit { lo, hi } => {
                (p > lo && p < hi).then(|| ((p - lo) / (hi - p)).ln())
            }
            Transform::LogitSquared { lo, hi } => {
                let q = p * p;
                (p > 0.0 && q > lo && q < hi).then(|| ((q - lo) / (hi - q)).ln())
            }
        }
    }

    pub fn from_internal(&self, z: f64) -> f64 {
        match *self {
            Transform::Identity => z,
            Transform::Log => z.exp(),
            Transform::Logit { lo, hi } => lo + (hi - lo) * sigmoid(z),
            Transform::LogitSquared { lo, hi } => (lo + (hi - lo) * sigmoid(z)).sqrt(),
        }
    }

    pub fn dparam_dinternal(&self, z: f64) -> f64 {
        match *self {
            Transform::Identity => 1.0,
            Transform::Log => z.exp(),
            Transform::Logit { lo, hi } => {
                let s = sigmoid(z);
                (hi - lo) * s * (1.0 - s)
            }
            Transform::LogitSquared { lo, hi } => {
                let s = sigmoid(z);
                let q = lo + (hi - lo) * s;
                0.5 * (hi - lo) * s * (1.0 - s) / q.sqrt()
            }
        }
    }

    fn default_for(param: FitParameter) -> Self {
        match param {
            FitParameter::SqrtR1
            | FitParameter::SqrtR1R2R3
            | FitParameter::PumpX
            | FitParameter::EscapePurity
            | FitParameter::EtaC => Transform::Logit { lo: 0.0, hi: 1.0 },
            FitParameter::OmegaDHz => Transform::Identity,
            FitParameter::FsrHz | FitParameter::OpoLinewidthHz => Transform::Log,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Which quadrature arrays enter the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureSelection {
    First,
    Second,
    Both,
}

/// Everything that defines one fit: starting parameter set, floated subset,
/// bound overrides, masked frequency intervals, and weighting policy.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub initial: ModelParams,
    pub float: Vec<FitParameter>,
    /// Box-constraint overrides, realized as logit reparameterizations.
    pub bounds: Vec<(FitParameter, f64, f64)>,
    /// Explicit coordinate choices; take precedence over `bounds`.
    pub transforms: Vec<(FitParameter, Transform)>,
    /// Frequency intervals `[lo, hi]` excluded from the residual.
    pub masks: Vec<(f64, f64)>,
    pub quadrature: QuadratureSelection,
    /// Fit with unit weights when the trace has no sigma arrays.
    pub unit_weights: bool,
    /// Try both signs of the initial detuning and keep the better branch.
    pub try_both_detuning_signs: bool,
    pub max_iterations: usize,
}

impl FitSpec {
    pub fn new(initial: ModelParams, float: Vec<FitParameter>) -> Self {
        Self {
            initial,
            float,
            bounds: Vec::new(),
            transforms: Vec::new(),
            masks: Vec::new(),
            quadrature: QuadratureSelection::Both,
            unit_weights: false,
            try_both_detuning_signs: true,
            max_iterations: 500,
        }
    }

    fn transform_for(&self, param: FitParameter) -> Transform {
        if let Some((_, t)) = self.transforms.iter().find(|(p, _)| *p == param) {
            return *t;
        }
        if let Some((_, lo, hi)) = self.bounds.iter().find(|(p, _, _)| *p == param) {
            return Transform::Logit { lo: *lo, hi: *hi };
        }
        Transform::default_for(param)
    }
}

/// How the detuning sign was settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetuningBranch {
    /// Negative branch won (or tied; ties resolve to negative).
    Negative,
    /// Positive branch won strictly.
    Positive,
    /// Sign taken from the spec, not searched.
    Fixed,
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitConvergence {
    ChiSquareTolerance,
    StepTolerance,
    Stalled,
}

/// A derived quantity with its propagated one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantity {
    pub value: f64,
    pub sigma: f64,
}

/// Linewidth, quality factor, and finesse with propagated uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParameters {
    pub gamma_hz: DerivedQuantity,
    pub q_factor: DerivedQuantity,
    pub finesse: DerivedQuantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Full best-fit parameter set.
    pub params: ModelParams,
    /// Floated subset, in estimate/covariance order.
    pub floated: Vec<FitParameter>,
    pub estimates: Vec<f64>,
    /// One-sigma uncertainties of the floated parameters.
    pub sigmas: Vec<f64>,
    /// Row-major covariance of the floated parameters, scaled by the
    /// reduced chi-square.
    pub covariance: Vec<f64>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    /// Number of fitted residuals (masked points excluded).
    pub n_points: usize,
    pub n_iterations: usize,
    pub convergence: FitConvergence,
    pub detuning_branch: DetuningBranch,
    pub derived: DerivedParameters,
    /// Frequencies of the fitted (unmasked) points.
    pub residual_freqs_hz: Vec<f64>,
    /// Weighted residuals `(model - data)/sigma`; empty when the quadrature
    /// was not fit.
    pub residuals_v1: Vec<f64>,
    pub residuals_v2: Vec<f64>,
}

struct FitProblem {
    freqs: Vec<f64>,
    data1: Vec<f64>,
    weight1: Vec<f64>,
    data2: Vec<f64>,
    weight2: Vec<f64>,
    use1: bool,
    use2: bool,
    base: ModelParams,
    float: Vec<(FitParameter, Transform)>,
}

impl FitProblem {
    fn params_from(&self, z: &[f64]) -> ModelParams {
        let mut p = self.base;
        for ((param, transform), &zi) in self.float.iter().zip(z) {
            p.set(*param, transform.from_internal(zi));
        }
        p
    }

    fn residuals_for(&self, params: &ModelParams) -> Result<Vec<f64>, FitError> {
        let model = params.spectrum(&self.freqs)?;
        let mut out = Vec::with_capacity(self.n_residuals());
        if self.use1 {
            for i in 0..self.freqs.len() {
                out.push((model.v1[i] - self.data1[i]) * self.weight1[i]);
            }
        }
        if self.use2 {
            for i in 0..self.freqs.len() {
                out.push((model.v2[i] - self.data2[i]) * self.weight2[i]);
            }
        }
        Ok(out)
    }

    fn n_residuals(&self) -> usize {
        self.freqs.len() * (self.use1 as usize + self.use2 as usize)
    }

    /// Magnitude of the largest weighted data value; sets the round-off
    /// scale of the weighted residuals.
    fn data_scale(&self) -> f64 {
        let mut scale = 1.0f64;
        if self.use1 {
            for (d, w) in self.data1.iter().zip(&self.weight1) {
                scale = scale.max((d * w).abs());
            }
        }
        if self.use2 {
            for (d, w) in self.data2.iter().zip(&self.weight2) {
                scale = scale.max((d * w).abs());
            }
        }
        scale
    }
}

/// Weighted nonlinear least-squares fit of a trace to the spectrum model.
pub fn fit(trace: &QuadratureSpectrum, spec: &FitSpec) -> Result<FitResult, FitError> {
    if spec.float.is_empty() {
        return Err(FitError::NoFloatedParameters);
    }
    for (i, p) in spec.float.iter().enumerate() {
        if spec.float[..i].contains(p) {
            return Err(FitError::DuplicateParameter(p.name()));
        }
    }
    let float: Vec<(FitParameter, Transform)> =
        spec.float.iter().map(|p| (*p, spec.transform_for(*p))).collect();

    // masked points drop out of the residual entirely
    let kept: Vec<usize> = (0..trace.len())
        .filter(|&i| {
            let f = trace.freqs_hz[i];
            !spec.masks.iter().any(|(lo, hi)| f >= lo.min(*hi) && f <= lo.max(*hi))
        })
        .collect();

    let use1 = matches!(spec.quadrature, QuadratureSelection::First | QuadratureSelection::Both);
    let use2 = matches!(spec.quadrature, QuadratureSelection::Second | QuadratureSelection::Both);

    let weights_of = |sigma: &Option<Vec<f64>>| -> Result<Vec<f64>, FitError> {
        if spec.unit_weights {
            return Ok(vec![1.0; kept.len()]);
        }
        match sigma {
            Some(s) => Ok(kept.iter().map(|&i| 1.0 / s[i]).collect()),
            None => Err(FitError::MissingSigmas),
        }
    };
    let weight1 = if use1 { weights_of(&trace.sigma1)? } else { Vec::new() };
    let weight2 = if use2 { weights_of(&trace.sigma2)? } else { Vec::new() };

    let problem = FitProblem {
        freqs: kept.iter().map(|&i| trace.freqs_hz[i]).collect(),
        data1: if use1 { kept.iter().map(|&i| trace.v1[i]).collect() } else { Vec::new() },
        weight1,
        data2: if use2 { kept.iter().map(|&i| trace.v2[i]).collect() } else { Vec::new() },
        weight2,
        use1,
        use2,
        base: spec.initial,
        float,
    };

    let nfree = problem.float.len();
    let n_res = problem.n_residuals();
    if n_res < 2 * nfree {
        return Err(FitError::InsufficientData { need: 2 * nfree, got: n_res, nfree });
    }

    // detuning-sign branches
    let floats_detuning = spec.float.contains(&FitParameter::OmegaDHz);
    let branches: Vec<(DetuningBranch, f64)> = if floats_detuning
        && spec.try_both_detuning_signs
        && spec.initial.omega_d_hz != 0.0
    {
        let mag = spec.initial.omega_d_hz.abs();
        vec![(DetuningBranch::Negative, -mag), (DetuningBranch::Positive, mag)]
    } else {
        vec![(DetuningBranch::Fixed, spec.initial.omega_d_hz)]
    };

    let opts = LmOptions { max_iterations: spec.max_iterations, ..LmOptions::default() };
    let mut best: Option<(lm::LmOutcome, DetuningBranch)> = None;
    let mut first_failure: Option<FitError> = None;
    for (branch, omega_d) in branches {
        let mut init = spec.initial;
        init.omega_d_hz = omega_d;

        let mut z0 = Vec::with_capacity(nfree);
        for (param, transform) in &problem.float {
            let value = init.get(*param);
            z0.push(transform.to_internal(value).ok_or(FitError::GuessOutsideBounds {
                param: param.name(),
                value,
            })?);
        }
        // surface the underlying model error for a bad starting point
        problem.residuals_for(&init)?;

        let outcome = lm::minimize(
            |z| problem.residuals_for(&problem.params_from(z)).ok(),
            &z0,
            &opts,
        );
        match outcome {
            Ok(out) => {
                let better = match &best {
                    None => true,
                    Some((cur, _)) => out.chi2 < cur.chi2 - CHI2_TIE_TOL * cur.chi2.max(1.0),
                };
                if better {
                    best = Some((out, branch));
                }
            }
            Err(e) => {
                let mapped = match e {
                    LmFailure::InitialEvaluation => FitError::InitialEvaluationFailed,
                    LmFailure::NonConvergence { iterations } => {
                        FitError::NonConvergence(iterations)
                    }
                    LmFailure::Derivative { index } => {
                        FitError::DerivativeFailed(problem.float[index].0.name())
                    }
                };
                first_failure.get_or_insert(mapped);
            }
        }
    }
    let (outcome, branch) =
        best.ok_or_else(|| first_failure.expect("at least one branch ran"))?;

    let dof = n_res - nfree;
    let chi2_reduced = outcome.chi2 / dof as f64;

    // A Jacobian column whose norm sits at the finite-difference round-off
    // floor carries no information; treat it as unidentifiable rather than
    // reporting a spuriously tight estimate.
    let resid_scale = problem.data_scale();
    for j in 0..nfree {
        let floor = f64::EPSILON * resid_scale / lm::fd_step(outcome.x[j]);
        if outcome.jtj[j * nfree + j] <= 100.0 * floor * floor * n_res as f64 {
            return Err(FitError::UnidentifiableParameter(problem.float[j].0.name()));
        }
    }

    let cov_internal = linalg::invert_spd(&outcome.jtj, nfree)
        .map_err(|pivot| FitError::UnidentifiableParameter(problem.float[pivot].0.name()))?;

    let params = problem.params_from(&outcome.x);
    let scale: Vec<f64> = problem
        .float
        .iter()
        .zip(&outcome.x)
        .map(|((_, t), &z)| t.dparam_dinternal(z))
        .collect();
    let mut covariance = vec![0.0; nfree * nfree];
    for i in 0..nfree {
        for j in i..nfree {
            let v = cov_internal[i * nfree + j] * chi2_reduced * scale[i] * scale[j];
            covariance[i * nfree + j] = v;
            covariance[j * nfree + i] = v;
        }
    }
    let sigmas: Vec<f64> =
        (0..nfree).map(|i| covariance[i * nfree + i].max(0.0).sqrt()).collect();
    let estimates: Vec<f64> = problem.float.iter().map(|(p, _)| params.get(*p)).collect();

    let derived = derive_parameters(&params, &spec.float, &covariance)?;

    let final_res = problem.residuals_for(&params)?;
    let n_kept = problem.freqs.len();
    let (residuals_v1, residuals_v2) = match (use1, use2) {
        (true, true) => (final_res[..n_kept].to_vec(), final_res[n_kept..].to_vec()),
        (true, false) => (final_res, Vec::new()),
        (false, true) => (Vec::new(), final_res),
        (false, false) => unreachable!("selection always keeps a quadrature"),
    };

    Ok(FitResult {
        params,
        floated: spec.float.clone(),
        estimates,
        sigmas,
        covariance,
        chi2: outcome.chi2,
        chi2_reduced,
        n_points: n_res,
        n_iterations: outcome.n_iterations,
        convergence: match outcome.status {
            LmStatus::ChiSquareTolerance => FitConvergence::ChiSquareTolerance,
            LmStatus::StepTolerance => FitConvergence::StepTolerance,
            LmStatus::Stalled => FitConvergence::Stalled,
        },
        detuning_branch: branch,
        derived,
        residual_freqs_hz: problem.freqs.clone(),
        residuals_v1,
        residuals_v2,
    })
}

/// Linewidth, quality factor, and finesse at a parameter point, with
/// one-sigma uncertainties propagated from the covariance of the floated
/// parameters. A zero covariance yields zero derived sigmas.
pub fn derive_parameters(
    params: &ModelParams,
    floated: &[FitParameter],
    covariance: &[f64],
) -> Result<DerivedParameters, FitError> {
    let n = floated.len();
    if covariance.len() != n * n {
        return Err(FitError::CovarianceShape);
    }
    let gamma = |p: &ModelParams| -> Result<f64, FitError> { Ok(linewidth_hz(&p.cavity()?)?) };
    let q = |p: &ModelParams| -> Result<f64, FitError> { Ok(quality_factor(&p.cavity()?)?) };
    let fin = |p: &ModelParams| -> Result<f64, FitError> { Ok(finesse(&p.cavity()?)?) };

    Ok(DerivedParameters {
        gamma_hz: propagate(params, floated, covariance, &gamma)?,
        q_factor: propagate(params, floated, covariance, &q)?,
        finesse: propagate(params, floated, covariance, &fin)?,
    })
}

fn propagate(
    params: &ModelParams,
    floated: &[FitParameter],
    covariance: &[f64],
    quantity: &dyn Fn(&ModelParams) -> Result<f64, FitError>,
) -> Result<DerivedQuantity, FitError> {
    let value = quantity(params)?;
    let n = floated.len();
    let mut grad = vec![0.0; n];
    for (k, param) in floated.iter().enumerate() {
        let p0 = params.get(*param);
        let h = 1e-7 * p0.abs().max(1.0);
        let mut plus = *params;
        plus.set(*param, p0 + h);
        let mut minus = *params;
        minus.set(*param, p0 - h);
        grad[k] = match (quantity(&plus), quantity(&minus)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (Ok(a), Err(_)) => (a - value) / h,
            (Err(_), Ok(b)) => (value - b) / h,
            (Err(_), Err(_)) => return Err(FitError::DerivativeFailed(param.name())),
        };
    }
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += grad[i] * covariance[i * n + j] * grad[j];
        }
    }
    Ok(DerivedQuantity { value, sigma: var.max(0.0).sqrt() })
}

/// One evaluated point of a chi-square profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub value: f64,
    /// Total chi-square after re-optimizing the remaining floated
    /// parameters, or the failure for this grid point.
    pub chi2: Result<f64, FitError>,
}

/// Chi-square profile of one parameter with the others re-optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareProfile {
    pub parameter: FitParameter,
    pub points: Vec<ProfilePoint>,
}

impl ChiSquareProfile {
    /// Spread between the best and worst successfully profiled points; a
    /// small spread over a wide parameter range flags unidentifiability.
    pub fn chi2_spread(&self) -> Option<f64> {
        let values: Vec<f64> = self.points.iter().filter_map(|p| p.chi2.clone().ok()).collect();
        if values.is_empty() {
            return None;
        }
        let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        Some(max - min)
    }
}

/// Profile the chi-square along `param`, re-optimizing every other floated
/// parameter at each grid value. Warm-starts each point from the previous
/// solution.
pub fn profile_identifiability(
    trace: &QuadratureSpectrum,
    spec: &FitSpec,
    param: FitParameter,
    values: &[f64],
) -> Result<ChiSquareProfile, FitError> {
    if !spec.float.contains(&param) {
        return Err(FitError::NotFloated(param.name()));
    }
    let mut inner = spec.clone();
    inner.float.retain(|p| *p != param);
    if inner.float.is_empty() {
        return Err(FitError::NoFloatedParameters);
    }
    let mut points = Vec::with_capacity(values.len());
    let mut warm = spec.initial;
    for &value in values {
        inner.initial = warm;
        inner.initial.set(param, value);
        let chi2 = fit(trace, &inner).map(|r| {
            warm = r.params;
            r.chi2
        });
        points.push(ProfilePoint { value, chi2 });
    }
    Ok(ChiSquareProfile { parameter: param, points })
}
