//! Damped least-squares (Levenberg-Marquardt) minimizer over an unbounded
//! internal coordinate vector. The residual closure returns `None` for
//! coordinates where the model cannot be evaluated; such trial steps are
//! rejected and the damping raised, so hard model-validity boundaries act
//! as barriers without derailing the iteration.

use alloc::vec;
use alloc::vec::Vec;

// f64 transcendentals come from num-traits in no_std builds
#[allow(unused_imports)]
use num_traits::Float;

use super::linalg::solve_spd;

pub(crate) struct LmOptions {
    pub max_iterations: usize,
    /// Relative chi-square decrease below which the fit is converged.
    pub ftol: f64,
    /// Step norm (relative to the coordinate norm) below which the fit is
    /// converged.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, ftol: 1e-10, step_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LmStatus {
    /// Relative chi-square decrease fell below `ftol`.
    ChiSquareTolerance,
    /// Accepted step shrank below `step_tol`.
    StepTolerance,
    /// No damped step could lower chi-square any further.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LmFailure {
    /// Model invalid at the starting point.
    InitialEvaluation,
    /// Still improving when the iteration budget ran out.
    NonConvergence { iterations: usize },
    /// Model invalid on both sides of a finite-difference probe.
    Derivative { index: usize },
}

#[derive(Debug)]
pub(crate) struct LmOutcome {
    pub x: Vec<f64>,
    pub chi2: f64,
    /// `J^T J` at the solution (row-major `n_par x n_par`).
    pub jtj: Vec<f64>,
    pub n_iterations: usize,
    pub status: LmStatus,
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e14;

pub(crate) fn minimize<F>(
    mut residuals: F,
    x0: &[f64],
    opts: &LmOptions,
) -> Result<LmOutcome, LmFailure>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n_par = x0.len();
    let mut x = x0.to_vec();
    let mut r = residuals(&x).ok_or(LmFailure::InitialEvaluation)?;
    let mut chi2 = norm_sq(&r);
    let mut lambda = LAMBDA_INIT;
    let mut status = None;
    let mut iterations = 0;

    while status.is_none() {
        if iterations >= opts.max_iterations {
            return Err(LmFailure::NonConvergence { iterations });
        }
        iterations += 1;

        let jac = jacobian(&mut residuals, &x, &r)?;
        let jtj = normal_matrix(&jac, r.len(), n_par);
        let mut rhs = vec![0.0; n_par];
        for i in 0..r.len() {
            for j in 0..n_par {
                rhs[j] -= jac[i * n_par + j] * r[i];
            }
        }

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = jtj.clone();
            for k in 0..n_par {
                let d = jtj[k * n_par + k];
                damped[k * n_par + k] = d + lambda * if d > 0.0 { d } else { 1.0 };
            }
            let delta = match solve_spd(&damped, n_par, &rhs) {
                Ok(d) => d,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let x_try: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            if let Some(r_try) = residuals(&x_try) {
                let chi2_try = norm_sq(&r_try);
                if chi2_try.is_finite() && chi2_try < chi2 {
                    let rel_drop = (chi2 - chi2_try) / chi2.max(f64::MIN_POSITIVE);
                    let step = norm_sq(&delta).sqrt();
                    let scale = 1.0 + norm_sq(&x).sqrt();
                    x = x_try;
                    r = r_try;
                    chi2 = chi2_try;
                    lambda = (lambda / 9.0).max(LAMBDA_MIN);
                    accepted = true;
                    if rel_drop < opts.ftol {
                        status = Some(LmStatus::ChiSquareTolerance);
                    } else if step < opts.step_tol * scale {
                        status = Some(LmStatus::StepTolerance);
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill direction left at machine precision
            status = Some(LmStatus::Stalled);
        }
    }

    let jac = jacobian(&mut residuals, &x, &r)?;
    let jtj = normal_matrix(&jac, r.len(), n_par);
    Ok(LmOutcome {
        x,
        chi2,
        jtj,
        n_iterations: iterations,
        status: status.expect("loop exits only with a status"),
    })
}

/// Finite-difference step for coordinate value `x`.
pub(crate) fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-7)
}

/// Central-difference Jacobian, falling back to one-sided differences when a
/// probe point leaves the model's validity region.
fn jacobian<F>(f: &mut F, x: &[f64], r0: &[f64]) -> Result<Vec<f64>, LmFailure>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n_res = r0.len();
    let n_par = x.len();
    let mut jac = vec![0.0; n_res * n_par];
    let mut probe = x.to_vec();
    for j in 0..n_par {
        let h = fd_step(x[j]);
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        match (plus, minus) {
            (Some(rp), Some(rm)) => {
                for i in 0..n_res {
                    jac[i * n_par + j] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            (Some(rp), None) => {
                for i in 0..n_res {
                    jac[i * n_par + j] = (rp[i] - r0[i]) / h;
                }
            }
            (None, Some(rm)) => {
                for i in 0..n_res {
                    jac[i * n_par + j] = (r0[i] - rm[i]) / h;
                }
            }
            (None, None) => return Err(LmFailure::Derivative { index: j }),
        }
    }
    Ok(jac)
}

fn normal_matrix(jac: &[f64], n_res: usize, n_par: usize) -> Vec<f64> {
    let mut jtj = vec![0.0; n_par * n_par];
    for i in 0..n_res {
        let row = &jac[i * n_par..(i + 1) * n_par];
        for a in 0..n_par {
            for b in a..n_par {
                jtj[a * n_par + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..n_par {
        for b in 0..a {
            jtj[a * n_par + b] = jtj[b * n_par + a];
        }
    }
    jtj
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_an_exponential_decay() {
        // y = a exp(-k t) sampled exactly; recover (a, k) from a poor guess
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let data: Vec<f64> = ts.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
        let resid = |p: &[f64]| {
            Some(
                ts.iter()
                    .zip(&data)
                    .map(|(t, d)| p[0] * (-p[1] * t).exp() - d)
                    .collect(),
            )
        };
        let out = minimize(resid, &[1.0, 0.5], &LmOptions::default()).unwrap();
        assert!((out.x[0] - 3.0).abs() < 1e-8, "a = {}", out.x[0]);
        assert!((out.x[1] - 1.7).abs() < 1e-8, "k = {}", out.x[1]);
        assert!(out.chi2 < 1e-16);
    }

    #[test]
    fn invalid_start_is_reported() {
        let resid = |_: &[f64]| -> Option<Vec<f64>> { None };
        assert_eq!(
            minimize(resid, &[0.0], &LmOptions::default()).unwrap_err(),
            LmFailure::InitialEvaluation
        );
    }

    #[test]
    fn validity_boundary_acts_as_barrier() {
        // minimum of (x - 2)^2 but the model is only valid for x < 1
        let resid = |p: &[f64]| {
            if p[0] < 1.0 {
                Some(vec![p[0] - 2.0])
            } else {
                None
            }
        };
        let out = minimize(resid, &[0.0], &LmOptions::default()).unwrap();
        assert!(out.x[0] < 1.0);
        assert!(out.x[0] > 0.9, "should push against the boundary, got {}", out.x[0]);
    }

    #[test]
    fn zero_residuals_stall_immediately() {
        let resid = |p: &[f64]| Some(vec![0.0 * p[0]]);
        let out = minimize(resid, &[1.0], &LmOptions::default()).unwrap();
        assert_eq!(out.status, LmStatus::Stalled);
        assert_eq!(out.chi2, 0.0);
    }
}
