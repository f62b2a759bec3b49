//! Analyzer-trace files: comment-headed, whitespace-delimited text with
//! shot-noise referenced decibel columns.
//!
//! ```text
//! # sqzspec trace v1
//! # reference: shot noise = 0 dB
//! # rbw_hz: 100000
//! # n_averages: 100
//! # seed: 42
//! # columns: freq_hz v1_db v2_db sigma1_db sigma2_db
//! 5000000 -3.2497 5.1175 0.6140 0.6140
//! ```
//!
//! Decibel uncertainties convert to and from linear by local linearization
//! (`sigma_lin = V ln(10)/10 sigma_dB`), a good approximation below about
//! one decibel of scatter.

use std::path::Path;

use thiserror::Error;

use sqzspec_core::two_photon::{from_db, to_db, QuadratureSpectrum};

use crate::{write_atomic, CliError};

const LN10_OVER_10: f64 = core::f64::consts::LN_10 / 10.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("line {line}: frequencies must be strictly ascending")]
    NonAscending { line: usize },
    #[error("missing '# columns:' header before the first data row")]
    MissingColumns,
    #[error("unsupported column layout {0:?}")]
    UnsupportedColumns(String),
    #[error("trace has no data rows")]
    Empty,
    #[error("trace is not a valid spectrum: {0}")]
    Invalid(String),
}

/// Optional acquisition metadata carried in the header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub rbw_hz: Option<f64>,
    pub n_averages: Option<u32>,
    pub seed: Option<u64>,
}

const COLUMNS_WITH_SIGMA: &str = "freq_hz v1_db v2_db sigma1_db sigma2_db";
const COLUMNS_BARE: &str = "freq_hz v1_db v2_db";

/// Render a spectrum as trace-file text (decibels relative to shot noise).
/// Sigma columns are included when the spectrum carries both sigma arrays.
pub fn format_trace(spectrum: &QuadratureSpectrum, meta: &TraceMeta) -> Result<String, TraceError> {
    let with_sigma = spectrum.sigma1.is_some() && spectrum.sigma2.is_some();
    let mut out = String::new();
    out.push_str("# sqzspec trace v1\n");
    out.push_str("# reference: shot noise = 0 dB\n");
    if let Some(rbw) = meta.rbw_hz {
        out.push_str(&format!("# rbw_hz: {rbw}\n"));
    }
    if let Some(n) = meta.n_averages {
        out.push_str(&format!("# n_averages: {n}\n"));
    }
    if let Some(seed) = meta.seed {
        out.push_str(&format!("# seed: {seed}\n"));
    }
    out.push_str(&format!(
        "# columns: {}\n",
        if with_sigma { COLUMNS_WITH_SIGMA } else { COLUMNS_BARE }
    ));
    let db = |v: f64| to_db(v).map_err(|e| TraceError::Invalid(e.to_string()));
    for i in 0..spectrum.len() {
        let v1 = spectrum.v1[i];
        let v2 = spectrum.v2[i];
        out.push_str(&format!("{} {} {}", spectrum.freqs_hz[i], db(v1)?, db(v2)?));
        if with_sigma {
            let s1 = spectrum.sigma1.as_ref().expect("checked")[i];
            let s2 = spectrum.sigma2.as_ref().expect("checked")[i];
            out.push_str(&format!(" {} {}", s1 / (v1 * LN10_OVER_10), s2 / (v2 * LN10_OVER_10)));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parse trace-file text into a linear-unit spectrum.
pub fn parse_trace(text: &str) -> Result<(QuadratureSpectrum, TraceMeta), TraceError> {
    let mut meta = TraceMeta::default();
    let mut with_sigma: Option<bool> = None;
    let mut freqs = Vec::new();
    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    let mut sig1 = Vec::new();
    let mut sig2 = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((key, value)) = comment.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "columns" => {
                        with_sigma = Some(match value {
                            COLUMNS_WITH_SIGMA => true,
                            COLUMNS_BARE => false,
                            other => return Err(TraceError::UnsupportedColumns(other.into())),
                        });
                    }
                    "rbw_hz" => meta.rbw_hz = value.parse().ok(),
                    "n_averages" => meta.n_averages = value.parse().ok(),
                    "seed" => meta.seed = value.parse().ok(),
                    _ => {}
                }
            }
            continue;
        }

        let with_sigma = with_sigma.ok_or(TraceError::MissingColumns)?;
        let expected = if with_sigma { 5 } else { 3 };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != expected {
            return Err(TraceError::MalformedRow {
                line,
                message: format!("expected {expected} columns, found {}", fields.len()),
            });
        }
        let mut parsed = [0.0f64; 5];
        for (k, field) in fields.iter().enumerate() {
            parsed[k] = field.parse().map_err(|_| TraceError::MalformedRow {
                line,
                message: format!("cannot parse {field:?} as a number"),
            })?;
        }
        if let Some(&last) = freqs.last() {
            if parsed[0] <= last {
                return Err(TraceError::NonAscending { line });
            }
        }
        freqs.push(parsed[0]);
        let lin1 = from_db(parsed[1]);
        let lin2 = from_db(parsed[2]);
        v1.push(lin1);
        v2.push(lin2);
        if with_sigma {
            for (k, lin) in [(3, lin1), (4, lin2)] {
                if !(parsed[k].is_finite() && parsed[k] > 0.0) {
                    return Err(TraceError::MalformedRow {
                        line,
                        message: format!("sigma column must be positive, found {}", parsed[k]),
                    });
                }
                let sigma = lin * LN10_OVER_10 * parsed[k];
                if k == 3 {
                    sig1.push(sigma);
                } else {
                    sig2.push(sigma);
                }
            }
        }
    }
    if freqs.is_empty() {
        return Err(TraceError::Empty);
    }
    let with_sigma = with_sigma.ok_or(TraceError::MissingColumns)?;
    let spectrum = QuadratureSpectrum::new(
        freqs,
        v1,
        v2,
        with_sigma.then_some(sig1),
        with_sigma.then_some(sig2),
    )
    .map_err(|e| TraceError::Invalid(e.to_string()))?;
    Ok((spectrum, meta))
}

pub fn save_trace(
    path: &Path,
    spectrum: &QuadratureSpectrum,
    meta: &TraceMeta,
) -> Result<(), CliError> {
    write_atomic(path, &format_trace(spectrum, meta)?)
}

pub fn load_trace(path: &Path) -> Result<(QuadratureSpectrum, TraceMeta), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_trace(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_spectrum() -> QuadratureSpectrum {
        QuadratureSpectrum::new(
            vec![5e6, 6e6, 7e6],
            vec![0.47, 0.52, 1.0],
            vec![3.1, 2.9, 2.5],
            Some(vec![0.066, 0.073, 0.14]),
            Some(vec![0.44, 0.41, 0.35]),
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_preserves_values() {
        let spectrum = sample_spectrum();
        let meta = TraceMeta { rbw_hz: Some(100e3), n_averages: Some(100), seed: Some(42) };
        let text = format_trace(&spectrum, &meta).unwrap();
        let (back, meta_back) = parse_trace(&text).unwrap();
        assert_eq!(meta_back, meta);
        assert_eq!(back.freqs_hz, spectrum.freqs_hz);
        for i in 0..spectrum.len() {
            assert!((back.v1[i] / spectrum.v1[i] - 1.0).abs() < 1e-9);
            assert!((back.v2[i] / spectrum.v2[i] - 1.0).abs() < 1e-9);
            let s = back.sigma1.as_ref().unwrap()[i];
            assert!((s / spectrum.sigma1.as_ref().unwrap()[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_db_is_unity() {
        let text = "# columns: freq_hz v1_db v2_db\n1000000 0 0\n";
        let (spec, _) = parse_trace(text).unwrap();
        assert_eq!(spec.v1[0], 1.0);
        assert_eq!(spec.v2[0], 1.0);
    }

    #[test]
    fn descending_frequency_names_the_line() {
        let text = "# columns: freq_hz v1_db v2_db\n1e6 0 0\n2e6 0 0\n1.5e6 0 0\n";
        match parse_trace(text).unwrap_err() {
            TraceError::NonAscending { line } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let text = "# columns: freq_hz v1_db v2_db\n1e6 0 0\n2e6 zero 0\n";
        match parse_trace(text).unwrap_err() {
            TraceError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
        let text = "# columns: freq_hz v1_db v2_db\n1e6 0\n";
        assert!(matches!(parse_trace(text).unwrap_err(), TraceError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn data_before_columns_header_is_rejected() {
        let text = "1e6 0 0\n";
        assert!(matches!(parse_trace(text).unwrap_err(), TraceError::MissingColumns));
    }

    #[test]
    fn sigma_columns_are_optional() {
        let spectrum = QuadratureSpectrum::new(
            vec![1e6, 2e6],
            vec![1.0, 2.0],
            vec![1.0, 0.5],
            None,
            None,
        )
        .unwrap();
        let text = format_trace(&spectrum, &TraceMeta::default()).unwrap();
        assert!(text.contains(COLUMNS_BARE));
        let (back, _) = parse_trace(&text).unwrap();
        assert!(back.sigma1.is_none());
    }

    #[test]
    fn empty_trace_is_rejected() {
        assert!(matches!(
            parse_trace("# columns: freq_hz v1_db v2_db\n").unwrap_err(),
            TraceError::Empty
        ));
    }
}
