//! Signal-side processing: noise filtering, R-peak detection, heart rate,
//! RR variability and P/Q/S/T wave delineation.

mod delineation;
mod filters;
mod pan_tompkins;

pub use delineation::{delineate_waves, DelineationConfig, WaveFiducials};
pub use filters::{fir_filter, savgol_filter, savgol_kernel};
pub use pan_tompkins::{pan_tompkins, pan_tompkins_with, PanTompkinsConfig, RPeakSet};

use crate::extraction::CalibratedSignal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum AnalysisError {
    #[error("filter has no taps")]
    EmptyFilter,
    #[error("signal too short: {0}")]
    SignalTooShort(String),
    #[error("sampling rate {0:.1} Hz outside the supported 50-1000 Hz range")]
    SamplingRateUnsupported(f64),
    #[error("need at least {need} R-peaks, found {have}")]
    TooFewPeaks { have: usize, need: usize },
    #[error("no R-peaks to delineate around")]
    NoPeaks,
}

/// One stage of the noise-removal chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    FirDirect { coefficients: Vec<f64> },
    SavitzkyGolay { window_length: usize, poly_order: usize },
}

/// Applies each filter in order.
pub fn apply_filter_chain(
    sig: &CalibratedSignal,
    chain: &[FilterSpec],
) -> Result<CalibratedSignal, AnalysisError> {
    let mut out = sig.clone();
    for spec in chain {
        out = match spec {
            FilterSpec::FirDirect { coefficients } => fir_filter(&out, coefficients)?,
            FilterSpec::SavitzkyGolay {
                window_length,
                poly_order,
            } => savgol_filter(&out, *window_length, *poly_order)?,
        };
    }
    Ok(out)
}

/// Smoothing chain used when the caller does not supply one:
/// Savitzky-Golay window 15 / order 3 at 250 Hz, window scaled with the
/// sampling rate (kept odd, minimum 5).
pub fn default_filter_chain(sample_rate_hz: f64) -> Vec<FilterSpec> {
    let mut window = (15.0 * sample_rate_hz / 250.0).round() as usize;
    if window % 2 == 0 {
        window += 1;
    }
    vec![FilterSpec::SavitzkyGolay {
        window_length: window.max(5),
        poly_order: 3,
    }]
}

/// Mean heart rate: 60 over the mean RR interval in seconds.
pub fn heart_rate(peaks: &RPeakSet) -> Result<f64, AnalysisError> {
    let rr = peaks.rr_intervals_s();
    if rr.is_empty() {
        return Err(AnalysisError::TooFewPeaks {
            have: peaks.indices().len(),
            need: 2,
        });
    }
    let mean_rr = rr.iter().sum::<f64>() / rr.len() as f64;
    Ok(60.0 / mean_rr)
}

/// Population standard deviation of RR intervals, in milliseconds.
pub fn rr_std(peaks: &RPeakSet) -> Result<f64, AnalysisError> {
    let rr = peaks.rr_intervals_s();
    if rr.len() < 2 {
        return Err(AnalysisError::TooFewPeaks {
            have: peaks.indices().len(),
            need: 3,
        });
    }
    let ms: Vec<f64> = rr.iter().map(|s| s * 1000.0).collect();
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    let var = ms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / ms.len() as f64;
    Ok(var.sqrt())
}

/// Everything [`analyze`] needs beyond the signal itself.
#[derive(Debug, Clone, Default)]
pub struct AnalysisConfig {
    /// Noise-removal chain; `None` selects [`default_filter_chain`].
    pub filter_chain: Option<Vec<FilterSpec>>,
    pub pan_tompkins: PanTompkinsConfig,
    pub delineation: DelineationConfig,
}

/// Beat-level report for one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub heart_rate_bpm: Option<f64>,
    pub rr_std_ms: Option<f64>,
    pub r_peaks: Vec<usize>,
    pub beats: Vec<WaveFiducials>,
    pub filter_chain: Vec<FilterSpec>,
}

/// Result of [`analyze`]: the report is always produced; `failure` records
/// why beat metrics are missing when the signal could not support them.
#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub report: AnalysisReport,
    pub failure: Option<AnalysisError>,
}

/// Full back-end pass: filter chain, R-peak detection, rate/variability,
/// wave delineation. Detection and peak snapping run on the unfiltered
/// signal; delineation runs on the filtered one.
pub fn analyze(sig: &CalibratedSignal, cfg: &AnalysisConfig) -> AnalysisOutcome {
    let chain = cfg
        .filter_chain
        .clone()
        .unwrap_or_else(|| default_filter_chain(sig.sample_rate_hz()));
    let partial = |failure: AnalysisError| AnalysisOutcome {
        report: AnalysisReport {
            heart_rate_bpm: None,
            rr_std_ms: None,
            r_peaks: Vec::new(),
            beats: Vec::new(),
            filter_chain: chain.clone(),
        },
        failure: Some(failure),
    };

    let filtered = match apply_filter_chain(sig, &chain) {
        Ok(f) => f,
        Err(e) => return partial(e),
    };
    let peaks = match pan_tompkins_with(sig, &cfg.pan_tompkins) {
        Ok(p) => p,
        Err(e) => return partial(e),
    };
    let beats = if peaks.indices().is_empty() {
        Vec::new()
    } else {
        delineate_waves(&filtered, &peaks, &cfg.delineation).unwrap_or_default()
    };
    let failure = if peaks.indices().len() < 2 {
        Some(AnalysisError::TooFewPeaks {
            have: peaks.indices().len(),
            need: 2,
        })
    } else {
        None
    };
    AnalysisOutcome {
        report: AnalysisReport {
            heart_rate_bpm: heart_rate(&peaks).ok(),
            rr_std_ms: rr_std(&peaks).ok(),
            r_peaks: peaks.indices().to_vec(),
            beats,
            filter_chain: chain,
        },
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peaks_from_rr_ms(rr_ms: &[f64]) -> RPeakSet {
        // 1 kHz grid so RR in ms maps directly to sample indices.
        let mut idx = vec![0usize];
        for &rr in rr_ms {
            idx.push(idx.last().unwrap() + rr as usize);
        }
        RPeakSet::from_indices(idx, 0.001, "test")
    }

    #[test]
    fn heart_rate_uniform_rr() {
        assert!((heart_rate(&peaks_from_rr_ms(&[800.0, 800.0])).unwrap() - 75.0).abs() < 1e-9);
        assert!((heart_rate(&peaks_from_rr_ms(&[1000.0, 1000.0])).unwrap() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn heart_rate_mixed_rr_uses_mean() {
        let hr = heart_rate(&peaks_from_rr_ms(&[750.0, 850.0])).unwrap();
        assert!((hr - 75.0).abs() < 1e-9, "got {hr}");
    }

    #[test]
    fn heart_rate_needs_two_peaks() {
        let one = RPeakSet::from_indices(vec![5], 0.004, "t");
        assert!(matches!(
            heart_rate(&one),
            Err(AnalysisError::TooFewPeaks { need: 2, .. })
        ));
    }

    #[test]
    fn rr_std_uniform_is_zero() {
        assert_eq!(rr_std(&peaks_from_rr_ms(&[800.0, 800.0, 800.0])).unwrap(), 0.0);
    }

    #[test]
    fn rr_std_two_intervals_is_half_gap() {
        let sd = rr_std(&peaks_from_rr_ms(&[780.0, 820.0])).unwrap();
        assert!((sd - 20.0).abs() < 1e-9, "got {sd}");
    }

    #[test]
    fn rr_std_three_intervals_against_direct_computation() {
        // Direct oracle: mean 800, deviations {-100, 0, 100},
        // population SD = sqrt(20000/3).
        let expected = (20000.0f64 / 3.0).sqrt();
        let sd = rr_std(&peaks_from_rr_ms(&[700.0, 800.0, 900.0])).unwrap();
        assert!((sd - expected).abs() < 1e-9, "got {sd}");
        assert!((sd - 81.65).abs() < 0.01);
    }

    #[test]
    fn rr_std_needs_three_peaks() {
        assert!(matches!(
            rr_std(&peaks_from_rr_ms(&[800.0])),
            Err(AnalysisError::TooFewPeaks { need: 3, .. })
        ));
    }

    #[test]
    fn rr_metrics_invariant_under_index_shift() {
        let a = RPeakSet::from_indices(vec![100, 300, 520, 700], 0.004, "t");
        let b = RPeakSet::from_indices(vec![1100, 1300, 1520, 1700], 0.004, "t");
        assert_eq!(heart_rate(&a).unwrap(), heart_rate(&b).unwrap());
        assert_eq!(rr_std(&a).unwrap(), rr_std(&b).unwrap());
    }

    #[test]
    fn default_chain_scales_window_with_rate() {
        match &default_filter_chain(250.0)[0] {
            FilterSpec::SavitzkyGolay {
                window_length,
                poly_order,
            } => {
                assert_eq!(*window_length, 15);
                assert_eq!(*poly_order, 3);
            }
            other => panic!("unexpected default {other:?}"),
        }
        match &default_filter_chain(500.0)[0] {
            FilterSpec::SavitzkyGolay { window_length, .. } => assert_eq!(*window_length, 31),
            other => panic!("unexpected default {other:?}"),
        }
        match &default_filter_chain(50.0)[0] {
            FilterSpec::SavitzkyGolay { window_length, .. } => assert_eq!(*window_length, 5),
            other => panic!("unexpected default {other:?}"),
        }
    }
}
