//! Windowed-extremum P/Q/S/T delineation around detected R-peaks.

use super::{AnalysisError, RPeakSet};
use crate::extraction::CalibratedSignal;
use serde::{Deserialize, Serialize};

/// Search windows (seconds relative to R) and the prominence floor below
/// which a P or T pick is flagged as dubious instead of suppressed.
#[derive(Debug, Clone, PartialEq)]
pub struct DelineationConfig {
    pub q_window_s: f64,
    pub s_window_s: f64,
    pub p_window_start_s: f64,
    pub p_window_end_s: f64,
    pub t_window_start_s: f64,
    pub t_window_cap_s: f64,
    pub t_rr_fraction: f64,
    pub prominence_floor_mv: f64,
}

impl Default for DelineationConfig {
    fn default() -> Self {
        DelineationConfig {
            q_window_s: 0.080,
            s_window_s: 0.080,
            p_window_start_s: 0.300,
            p_window_end_s: 0.080,
            t_window_start_s: 0.080,
            t_window_cap_s: 0.400,
            t_rr_fraction: 0.7,
            prominence_floor_mv: 0.05,
        }
    }
}

pub const FLAG_P_LOW_PROMINENCE: &str = "p_low_prominence";
pub const FLAG_T_LOW_PROMINENCE: &str = "t_low_prominence";

/// Per-beat fiducial sample indices. Any window clipped by the record edges
/// or a neighboring beat leaves that fiducial absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFiducials {
    #[serde(rename = "p")]
    pub p_idx: Option<usize>,
    #[serde(rename = "q")]
    pub q_idx: Option<usize>,
    #[serde(rename = "r")]
    pub r_idx: usize,
    #[serde(rename = "s")]
    pub s_idx: Option<usize>,
    #[serde(rename = "t")]
    pub t_idx: Option<usize>,
    #[serde(default)]
    pub flags: Vec<String>,
}

/// Per beat, on the supplied (typically smoothed) signal:
/// Q/S are the minima in the 80 ms flanks of R, P the maximum in
/// (R-300 ms, R-80 ms), T the maximum in (R+80 ms, R+min(400 ms, 0.7 RR)).
/// All windows are open intervals, which keeps P < Q < R < S < T.
pub fn delineate_waves(
    sig: &CalibratedSignal,
    peaks: &RPeakSet,
    cfg: &DelineationConfig,
) -> Result<Vec<WaveFiducials>, AnalysisError> {
    let indices = peaks.indices();
    if indices.is_empty() {
        return Err(AnalysisError::NoPeaks);
    }
    let fs = sig.sample_rate_hz();
    let x = &sig.samples_mv;
    let n = x.len();
    let off = |s: f64| (s * fs).round() as i64;

    let mut beats = Vec::with_capacity(indices.len());
    for (k, &r) in indices.iter().enumerate() {
        let r = r as i64;
        let prev_r = if k > 0 { Some(indices[k - 1] as i64) } else { None };
        let next_rr = indices.get(k + 1).map(|&nxt| nxt as i64 - r);

        // Open interval (r+a, r+b) as an inclusive index range, None when it
        // is clipped by the record or the previous beat.
        let window = |a: i64, b: i64, guard_prev: bool| -> Option<(usize, usize)> {
            let lo = r + a + 1;
            let hi = r + b - 1;
            if lo < 0 || hi >= n as i64 || lo > hi {
                return None;
            }
            if guard_prev {
                if let Some(p) = prev_r {
                    if r + a <= p {
                        return None;
                    }
                }
            }
            Some((lo as usize, hi as usize))
        };

        let q_idx = window(-off(cfg.q_window_s), 0, true).map(|(lo, hi)| argmin(x, lo, hi));
        let s_idx = window(0, off(cfg.s_window_s), false).map(|(lo, hi)| argmin(x, lo, hi));
        let p_pick = window(-off(cfg.p_window_start_s), -off(cfg.p_window_end_s), true)
            .map(|(lo, hi)| (argmax(x, lo, hi), lo, hi));
        let t_end = match next_rr {
            Some(rr) => off(cfg.t_window_cap_s).min((cfg.t_rr_fraction * rr as f64) as i64),
            None => off(cfg.t_window_cap_s),
        };
        let t_pick = window(off(cfg.t_window_start_s), t_end, false)
            .map(|(lo, hi)| (argmax(x, lo, hi), lo, hi));

        let mut flags = Vec::new();
        if let Some((p, lo, hi)) = p_pick {
            if prominence(x, p, lo, hi) < cfg.prominence_floor_mv {
                flags.push(FLAG_P_LOW_PROMINENCE.to_string());
            }
        }
        if let Some((t, lo, hi)) = t_pick {
            if prominence(x, t, lo, hi) < cfg.prominence_floor_mv {
                flags.push(FLAG_T_LOW_PROMINENCE.to_string());
            }
        }

        let beat = WaveFiducials {
            p_idx: p_pick.map(|(p, _, _)| p),
            q_idx,
            r_idx: r as usize,
            s_idx,
            t_idx: t_pick.map(|(t, _, _)| t),
            flags,
        };
        debug_assert!(beat.p_idx.is_none_or(|p| p < beat.q_idx.unwrap_or(r as usize)));
        debug_assert!(beat.q_idx.is_none_or(|q| q < r as usize));
        debug_assert!(beat.s_idx.is_none_or(|s| s > r as usize));
        debug_assert!(beat
            .t_idx
            .is_none_or(|t| t > beat.s_idx.unwrap_or(r as usize)));
        beats.push(beat);
    }
    Ok(beats)
}

fn argmin(x: &[f64], lo: usize, hi: usize) -> usize {
    (lo..=hi).min_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap()
}

fn argmax(x: &[f64], lo: usize, hi: usize) -> usize {
    (lo..=hi).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap()
}

/// Height of the pick above the higher of the two flank minima inside the
/// window; zero for flat or monotone windows.
fn prominence(x: &[f64], peak: usize, lo: usize, hi: usize) -> f64 {
    let left = x[lo..=peak].iter().cloned().fold(f64::INFINITY, f64::min);
    let right = x[peak..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
    x[peak] - left.max(right)
}
