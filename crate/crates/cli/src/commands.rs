//! Implementations of the `sqzspec` subcommands.

use std::path::{Path, PathBuf};

use sqzspec_core::cavity::{finesse, linewidth_hz, quality_factor, RingCavity};
use sqzspec_core::estimator::{self, FitParameter};
use sqzspec_core::synth::synthesize_trace;
use sqzspec_core::two_photon::{
    from_db, impedance_matched_variance, signal_contrast, spectrum, to_db,
};

use crate::config::{QuadratureArg, RunConfig};
use crate::report::{format_residuals, FitReport};
use crate::trace::{load_trace, save_trace, TraceMeta};
use crate::{write_atomic, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Reference input states for the contrast table, decibel pairs (V1, V2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ContrastPreset {
    /// Vacuum in both quadratures.
    Vacuum,
    /// Classically noisy state: 0 dB / +10 dB.
    Classical,
    /// Squeezed state: -6 dB / +10 dB.
    Squeezed,
}

fn derived_summary(cavity: &RingCavity) -> Result<(f64, f64, f64), CliError> {
    let gamma = linewidth_hz(cavity).map_err(|e| CliError::Model(e.to_string()))?;
    let q = quality_factor(cavity).map_err(|e| CliError::Model(e.to_string()))?;
    let f = finesse(cavity).map_err(|e| CliError::Model(e.to_string()))?;
    Ok((gamma, q, f))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn simulate(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        config.measurement.seed = seed;
    }
    println!("resolved configuration:\n{}", config.resolved_json());

    let cavity = config.cavity()?;
    let detuning = config.detuning()?;
    let squeezing = config.squeezing()?;
    let detection = config.detection()?;
    let measurement = config.measurement()?;
    let freqs = config.grid()?;

    let trace = synthesize_trace(&cavity, detuning, &squeezing, &detection, &measurement, &freqs)
        .map_err(|e| CliError::Model(e.to_string()))?;
    // model curve: noiseless spectrum without the instrument spur
    let model = spectrum(&cavity, detuning, &squeezing, &detection, &freqs)
        .map_err(|e| CliError::Model(e.to_string()))?;

    ensure_out_dir(out_dir)?;
    let trace_path = out_dir.join(&config.output.trace);
    let model_path = out_dir.join(&config.output.model);
    save_trace(
        &trace_path,
        &trace,
        &TraceMeta {
            rbw_hz: Some(measurement.rbw_hz),
            n_averages: Some(measurement.n_averages),
            seed: Some(measurement.seed),
        },
    )?;
    save_trace(&model_path, &model, &TraceMeta::default())?;

    let (gamma, q, f) = derived_summary(&cavity)?;
    println!("gamma_fwhm_hz: {gamma:.1}");
    println!("q_factor: {q:.4e}");
    println!("finesse: {f:.2}");
    println!("trace: {}", trace_path.display());
    println!("model: {}", model_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn fit(
    config_path: &Path,
    trace_path: &Path,
    out_dir: &Path,
    extra_masks: &[(f64, f64)],
    quadrature: Option<QuadratureArg>,
    format: OutputFormat,
) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    println!("resolved configuration:\n{}", config.resolved_json());

    let (trace, _meta) = load_trace(trace_path)?;
    let spec = config.fit_spec(extra_masks, quadrature)?;
    let result = estimator::fit(&trace, &spec)?;

    let quadrature_label = match spec.quadrature {
        sqzspec_core::estimator::QuadratureSelection::First => "1",
        sqzspec_core::estimator::QuadratureSelection::Second => "2",
        sqzspec_core::estimator::QuadratureSelection::Both => "both",
    };
    let report = FitReport::new(
        &result,
        &trace_path.display().to_string(),
        quadrature_label,
        &spec.masks,
    );

    ensure_out_dir(out_dir)?;
    let report_path = out_dir.join(&config.output.report);
    let residuals_path = out_dir.join(&config.output.residuals);
    write_atomic(&report_path, &report.to_json())?;
    write_atomic(&residuals_path, &format_residuals(&result))?;

    match format {
        OutputFormat::Json => print!("{}", report.to_json()),
        OutputFormat::Csv => {
            println!(
                "fit converged ({}) after {} iterations",
                report.convergence, result.n_iterations
            );
            println!(
                "chi2 = {:.4} over {} points (chi2_reduced = {:.4}), detuning branch: {}",
                result.chi2, result.n_points, result.chi2_reduced, report.detuning_branch
            );
            for est in &report.estimates {
                println!("  {:<16} = {:.9} +/- {:.3e}", est.name, est.value, est.sigma);
            }
            let d = &report.derived;
            println!(
                "derived: gamma = {:.2} +/- {:.2} kHz, Q = {:.4e} +/- {:.2e}, finesse = {:.2} +/- {:.2}",
                d.gamma_hz.value / 1e3,
                d.gamma_hz.sigma / 1e3,
                d.q_factor.value,
                d.q_factor.sigma,
                d.finesse.value,
                d.finesse.sigma
            );
        }
    }
    println!("report: {}", report_path.display());
    println!("residuals: {}", residuals_path.display());
    Ok(())
}

pub fn contrast(
    v1_db: Option<f64>,
    v2_db: Option<f64>,
    preset: Option<ContrastPreset>,
    format: OutputFormat,
) -> Result<(), CliError> {
    let (v1_db, v2_db) = match (preset, v1_db, v2_db) {
        (Some(p), None, None) => match p {
            ContrastPreset::Vacuum => (0.0, 0.0),
            ContrastPreset::Classical => (0.0, 10.0),
            ContrastPreset::Squeezed => (-6.0, 10.0),
        },
        (None, Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CliError::Usage(
                "provide either --preset or both --v1-db and --v2-db".into(),
            ))
        }
    };
    if !(v1_db.is_finite() && v2_db.is_finite()) {
        return Err(CliError::Usage("input levels must be finite decibels".into()));
    }
    let v1 = from_db(v1_db);
    let v2 = from_db(v2_db);
    let (s1, s2) = signal_contrast(v1, v2);
    let matched = impedance_matched_variance(v1, v2);
    let matched_db = to_db(matched).map_err(|e| CliError::Model(e.to_string()))?;

    match format {
        OutputFormat::Json => println!(
            "{}",
            serde_json::json!({
                "v1_db": v1_db, "v2_db": v2_db,
                "v1": v1, "v2": v2,
                "matched_variance": matched, "matched_variance_db": matched_db,
                "s1": s1, "s2": s2,
            })
        ),
        OutputFormat::Csv => {
            println!("input: V1 = {v1_db:.2} dB ({v1:.4}), V2 = {v2_db:.2} dB ({v2:.4})");
            println!("impedance-matched response: V_b = {matched_db:.2} dB ({matched:.4})");
            println!("contrast: S1 = {s1:.4}, S2 = {s2:.4}");
        }
    }
    Ok(())
}

pub fn sweep(
    config_path: &Path,
    param_name: &str,
    from: f64,
    to: f64,
    steps: usize,
    out_dir: Option<PathBuf>,
    format: OutputFormat,
) -> Result<(), CliError> {
    let param = FitParameter::from_name(param_name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown parameter {param_name:?}; valid names: {}",
            FitParameter::ALL.map(|p| p.name()).join(", ")
        ))
    })?;
    if steps == 0 {
        return Err(CliError::Usage("empty sweep range: --steps must be at least 1".into()));
    }
    if !(from.is_finite() && to.is_finite()) {
        return Err(CliError::Usage("sweep endpoints must be finite".into()));
    }
    let config = RunConfig::load(config_path)?;
    println!("resolved configuration:\n{}", config.resolved_json());

    let freqs = config.grid()?;
    let base = config.model_params()?;

    let mut rows = Vec::with_capacity(steps);
    let mut spectrum_undefined = false;
    for k in 0..steps {
        let value = if steps == 1 {
            from
        } else {
            from + (to - from) * k as f64 / (steps - 1) as f64
        };
        let mut params = base;
        params.set(param, value);
        // linewidth, Q, and finesse depend only on the round-trip product,
        // so they stay defined even where the R1 split does not
        let product_cavity = RingCavity::with_input_transmission(
            1.0,
            params.sqrt_r1r2r3 * params.sqrt_r1r2r3,
            0.0,
            params.fsr_hz,
            params.carrier_hz,
        )
        .map_err(|e| CliError::Model(format!("{} = {value}: {e}", param.name())))?;
        let (gamma, q, f) = derived_summary(&product_cavity)?;
        let feature = match params.spectrum(&freqs) {
            Ok(spec) => {
                // feature: anti-squeezed quadrature pulled toward shot noise
                let (imin, _) = spec
                    .v2
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite variances"))
                    .expect("nonempty grid");
                let v1_db = to_db(spec.v1[imin]).map_err(|e| CliError::Model(e.to_string()))?;
                let v2_db = to_db(spec.v2[imin]).map_err(|e| CliError::Model(e.to_string()))?;
                (spec.freqs_hz[imin], v1_db, v2_db)
            }
            Err(_) => {
                spectrum_undefined = true;
                (f64::NAN, f64::NAN, f64::NAN)
            }
        };
        rows.push((value, gamma, q, f, feature.0, feature.1, feature.2));
    }

    let rendered = match format {
        OutputFormat::Csv => {
            let mut text = String::from(
                "value,gamma_hz,q_factor,finesse,feature_hz,v1_db_at_feature,v2_db_at_feature\n",
            );
            for (value, gamma, q, f, feat, v1, v2) in &rows {
                text.push_str(&format!("{value},{gamma},{q},{f},{feat},{v1},{v2}\n"));
            }
            text
        }
        OutputFormat::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|(value, gamma, q, f, feat, v1, v2)| {
                    serde_json::json!({
                        "value": value, "gamma_hz": gamma, "q_factor": q, "finesse": f,
                        "feature_hz": feat, "v1_db_at_feature": v1, "v2_db_at_feature": v2,
                    })
                })
                .collect();
            let mut text =
                serde_json::to_string_pretty(&items).expect("sweep rows serialize");
            text.push('\n');
            text
        }
    };
    println!("sweep of {} over [{from}, {to}] in {steps} steps:", param.name());
    if spectrum_undefined {
        println!("note: spectrum model undefined at some values; feature columns are nan there");
    }
    print!("{rendered}");
    if let Some(dir) = out_dir {
        ensure_out_dir(&dir)?;
        let path = dir.join(&config.output.sweep);
        write_atomic(&path, &rendered)?;
        println!("sweep table: {}", path.display());
    }
    Ok(())
}

pub fn validate(config_path: &Path) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    println!("resolved configuration:\n{}", config.resolved_json());
    println!("configuration valid");
    Ok(())
}
