//! Pan-Tompkins QRS detection.
//!
//! Classic stage chain: band-pass, derivative, squaring, moving-window
//! integration, then dual adaptive thresholds with a refractory period and
//! RR-driven search-back. The band-pass is a linear-phase windowed-sinc FIR
//! designed at the signal's own sampling rate and applied zero-phase, so
//! detections need no delay compensation; each detection is finally snapped
//! to the local maximum of the original signal.

use super::AnalysisError;
use crate::extraction::CalibratedSignal;
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Stage constants, exposed so the CLI can override them.
#[derive(Debug, Clone, PartialEq)]
pub struct PanTompkinsConfig {
    pub bandpass_low_hz: f64,
    pub bandpass_high_hz: f64,
    pub integration_window_s: f64,
    pub refractory_s: f64,
    /// Search back for a missed beat once the gap exceeds this multiple of
    /// the mean recent RR interval.
    pub searchback_factor: f64,
    /// Running-estimate update weight: `est = w * peak + (1 - w) * est`.
    pub threshold_update_weight: f64,
    /// Radius of the window used to snap a detection onto the local maximum
    /// of the unfiltered signal.
    pub snap_radius_s: f64,
}

impl Default for PanTompkinsConfig {
    fn default() -> Self {
        PanTompkinsConfig {
            bandpass_low_hz: 5.0,
            bandpass_high_hz: 15.0,
            integration_window_s: 0.150,
            refractory_s: 0.200,
            searchback_factor: 1.66,
            threshold_update_weight: 0.125,
            snap_radius_s: 0.050,
        }
    }
}

/// Detected R-peak sample indices, strictly increasing and separated by
/// more than the refractory period.
#[derive(Debug, Clone, PartialEq)]
pub struct RPeakSet {
    indices: Vec<usize>,
    sample_period_s: f64,
    signal_ref: String,
}

impl RPeakSet {
    pub fn from_indices(indices: Vec<usize>, sample_period_s: f64, signal_ref: &str) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        RPeakSet {
            indices,
            sample_period_s,
            signal_ref: signal_ref.to_string(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn signal_ref(&self) -> &str {
        &self.signal_ref
    }

    pub fn times_s(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&i| i as f64 * self.sample_period_s)
            .collect()
    }

    pub fn rr_intervals_s(&self) -> Vec<f64> {
        self.indices
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 * self.sample_period_s)
            .collect()
    }
}

/// [`pan_tompkins_with`] under default stage constants.
pub fn pan_tompkins(sig: &CalibratedSignal) -> Result<RPeakSet, AnalysisError> {
    pan_tompkins_with(sig, &PanTompkinsConfig::default())
}

pub fn pan_tompkins_with(
    sig: &CalibratedSignal,
    cfg: &PanTompkinsConfig,
) -> Result<RPeakSet, AnalysisError> {
    let fs = sig.sample_rate_hz();
    if !(50.0..=1000.0 + 1e-9).contains(&fs) {
        return Err(AnalysisError::SamplingRateUnsupported(fs));
    }
    if sig.duration_s() < 3.0 {
        return Err(AnalysisError::SignalTooShort(format!(
            "{:.2} s but Pan-Tompkins needs at least 3 s",
            sig.duration_s()
        )));
    }

    let x = &sig.samples_mv;
    let filtered = bandpass_zero_phase(x, fs, cfg.bandpass_low_hz, cfg.bandpass_high_hz);
    let derivative = centered_derivative(&filtered, fs);
    let squared: Vec<f64> = derivative.iter().map(|d| d * d).collect();
    let window = ((cfg.integration_window_s * fs).round() as usize).max(1);
    let mwi = moving_window_mean(&squared, window);

    let refractory = (cfg.refractory_s * fs).round() as usize;
    let detections = threshold_detect(&mwi, fs, cfg, refractory);

    // Snap onto the original waveform.
    let snap = (cfg.snap_radius_s * fs).round() as usize;
    let mut snapped: Vec<usize> = detections
        .iter()
        .map(|&d| {
            let lo = d.saturating_sub(snap);
            let hi = (d + snap).min(x.len() - 1);
            (lo..=hi)
                .max_by(|&a, &b| x[a].total_cmp(&x[b]))
                .expect("snap window is never empty")
        })
        .collect();
    snapped.sort_unstable();
    snapped.dedup();

    // Snapping can pull two detections together; keep the taller peak.
    let mut indices: Vec<usize> = Vec::with_capacity(snapped.len());
    for idx in snapped {
        match indices.last() {
            Some(&prev) if idx - prev <= refractory => {
                if x[idx] > x[prev] {
                    *indices.last_mut().unwrap() = idx;
                }
            }
            _ => indices.push(idx),
        }
    }

    Ok(RPeakSet {
        indices,
        sample_period_s: sig.sample_period_s,
        signal_ref: sig.source_id.clone(),
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Linear-phase windowed-sinc band-pass, applied centered (zero phase) with
/// edge replication.
fn bandpass_zero_phase(x: &[f64], fs: f64, low_hz: f64, high_hz: f64) -> Vec<f64> {
    let mut taps_len = (1.1 * fs).round() as usize;
    if taps_len % 2 == 0 {
        taps_len += 1;
    }
    let m = (taps_len - 1) as f64;
    let f1 = low_hz / fs;
    let f2 = high_hz / fs;
    let taps: Vec<f64> = (0..taps_len)
        .map(|i| {
            let t = i as f64 - m / 2.0;
            let ideal = 2.0 * f2 * sinc(2.0 * f2 * t) - 2.0 * f1 * sinc(2.0 * f1 * t);
            let hamming = 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos();
            ideal * hamming
        })
        .collect();

    let n = x.len() as i64;
    let half = (taps_len / 2) as i64;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, h)| {
                    let idx = (i + half - k as i64).clamp(0, n - 1);
                    h * x[idx as usize]
                })
                .sum()
        })
        .collect()
}

/// Centered five-point derivative, the zero-delay form of the classic
/// (1/8T)(2x[n] + x[n-1] - x[n-3] - 2x[n-4]) difference equation.
fn centered_derivative(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len() as i64;
    let at = |i: i64| x[i.clamp(0, n - 1) as usize];
    (0..n)
        .map(|i| (2.0 * at(i + 2) + at(i + 1) - at(i - 1) - 2.0 * at(i - 2)) * fs / 8.0)
        .collect()
}

/// Centered moving mean with truncated windows at the record edges.
fn moving_window_mean(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0f64; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (lo + window).min(n);
            let lo = hi.saturating_sub(window).max(0);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Dual adaptive thresholds over the integrated waveform.
fn threshold_detect(
    mwi: &[f64],
    fs: f64,
    cfg: &PanTompkinsConfig,
    refractory: usize,
) -> Vec<usize> {
    let candidates = local_maxima(mwi);
    if candidates.is_empty() {
        return Vec::new();
    }

    // Learning phase: seed the running estimates from the first two seconds.
    let learn = ((2.0 * fs) as usize).clamp(1, mwi.len());
    let seg_max = mwi[..learn].iter().cloned().fold(0.0f64, f64::max);
    let seg_mean = mwi[..learn].iter().sum::<f64>() / learn as f64;
    let mut spk = seg_max / 3.0;
    let mut npk = seg_mean / 2.0;
    let w = cfg.threshold_update_weight;

    let mut qrs: Vec<usize> = Vec::new();
    let mut rr_recent: VecDeque<usize> = VecDeque::new();
    let mut noise_since_qrs: Vec<usize> = Vec::new();

    let mean_rr = |rr: &VecDeque<usize>| -> Option<f64> {
        if rr.is_empty() {
            None
        } else {
            Some(rr.iter().sum::<usize>() as f64 / rr.len() as f64)
        }
    };

    let mut i = 0;
    while i <= candidates.len() {
        // Search-back: if the gap up to the next candidate (or record end)
        // exceeds the expected RR by the search-back factor, revisit the
        // candidates classified as noise with the lower threshold.
        if let (Some(&last), Some(rr)) = (qrs.last(), mean_rr(&rr_recent)) {
            let horizon = if i < candidates.len() {
                candidates[i]
            } else {
                mwi.len() - 1
            };
            if (horizon - last) as f64 > cfg.searchback_factor * rr {
                let thr2 = 0.5 * (npk + 0.25 * (spk - npk));
                let pick = noise_since_qrs
                    .iter()
                    .copied()
                    .filter(|&c| c > last + refractory && mwi[c] > thr2)
                    .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                if let Some(found) = pick {
                    spk = 0.25 * mwi[found] + 0.75 * spk;
                    rr_recent.push_back(found - last);
                    if rr_recent.len() > 8 {
                        rr_recent.pop_front();
                    }
                    qrs.push(found);
                    noise_since_qrs.retain(|&c| c > found);
                    continue;
                }
            }
        }
        if i == candidates.len() {
            break;
        }
        let c = candidates[i];
        i += 1;
        if let Some(&last) = qrs.last() {
            if c - last <= refractory {
                continue;
            }
        }
        let thr1 = npk + 0.25 * (spk - npk);
        if mwi[c] > thr1 {
            if let Some(&last) = qrs.last() {
                rr_recent.push_back(c - last);
                if rr_recent.len() > 8 {
                    rr_recent.pop_front();
                }
            }
            spk = w * mwi[c] + (1.0 - w) * spk;
            qrs.push(c);
            noise_since_qrs.clear();
        } else {
            npk = w * mwi[c] + (1.0 - w) * npk;
            noise_since_qrs.push(c);
        }
    }
    qrs
}

fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > 0.0 {
            out.push(i);
        }
    }
    out
}
