//! JSON fit report: estimates with uncertainties, the correlation matrix,
//! derived cavity quantities, and enough run metadata to reproduce the fit.

use serde::Serialize;

use sqzspec_core::estimator::{DetuningBranch, FitConvergence, FitResult};

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub trace_path: String,
    pub quadrature: String,
    pub masks_hz: Vec<[f64; 2]>,
    pub detuning_branch: &'static str,
    pub convergence: &'static str,
    pub n_points: usize,
    pub n_iterations: usize,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub estimates: Vec<ParamReport>,
    /// Correlation matrix of the floated parameters, estimate order.
    pub correlation: Vec<Vec<f64>>,
    pub derived: DerivedReport,
}

#[derive(Debug, Serialize)]
pub struct ParamReport {
    pub name: &'static str,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Serialize)]
pub struct ValueSigma {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Serialize)]
pub struct DerivedReport {
    pub gamma_hz: ValueSigma,
    pub q_factor: ValueSigma,
    pub finesse: ValueSigma,
}

impl FitReport {
    pub fn new(
        result: &FitResult,
        trace_path: &str,
        quadrature: &str,
        masks_hz: &[(f64, f64)],
    ) -> Self {
        let n = result.floated.len();
        let correlation = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            return 1.0;
                        }
                        let denom = result.sigmas[i] * result.sigmas[j];
                        if denom > 0.0 {
                            result.covariance[i * n + j] / denom
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            trace_path: trace_path.to_string(),
            quadrature: quadrature.to_string(),
            masks_hz: masks_hz.iter().map(|(lo, hi)| [*lo, *hi]).collect(),
            detuning_branch: match result.detuning_branch {
                DetuningBranch::Negative => "negative",
                DetuningBranch::Positive => "positive",
                DetuningBranch::Fixed => "fixed",
            },
            convergence: match result.convergence {
                FitConvergence::ChiSquareTolerance => "chi_square_tolerance",
                FitConvergence::StepTolerance => "step_tolerance",
                FitConvergence::Stalled => "stalled",
            },
            n_points: result.n_points,
            n_iterations: result.n_iterations,
            chi2: result.chi2,
            chi2_reduced: result.chi2_reduced,
            estimates: result
                .floated
                .iter()
                .zip(result.estimates.iter().zip(&result.sigmas))
                .map(|(p, (value, sigma))| ParamReport {
                    name: p.name(),
                    value: *value,
                    sigma: *sigma,
                })
                .collect(),
            correlation,
            derived: DerivedReport {
                gamma_hz: ValueSigma {
                    value: result.derived.gamma_hz.value,
                    sigma: result.derived.gamma_hz.sigma,
                },
                q_factor: ValueSigma {
                    value: result.derived.q_factor.value,
                    sigma: result.derived.q_factor.sigma,
                },
                finesse: ValueSigma {
                    value: result.derived.finesse.value,
                    sigma: result.derived.finesse.sigma,
                },
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Weighted-residual file: one row per fitted point.
pub fn format_residuals(result: &FitResult) -> String {
    let mut out = String::from("# sqzspec residuals v1\n# columns: freq_hz resid1 resid2\n");
    for (i, freq) in result.residual_freqs_hz.iter().enumerate() {
        let r1 = result.residuals_v1.get(i).copied().unwrap_or(f64::NAN);
        let r2 = result.residuals_v2.get(i).copied().unwrap_or(f64::NAN);
        out.push_str(&format!("{freq} {r1} {r2}\n"));
    }
    out
}
