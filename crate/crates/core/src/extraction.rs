//! Envelope-based curve extraction and pixel-to-millivolt calibration.
//!
//! Each mask column is scanned from the top and from the bottom; the first
//! ink pixel in each direction forms the top/bottom envelope, and the curve
//! is the average of the two after gaps are filled.

use crate::binarization::BinaryImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("binary mask contains no ink; nothing to extract")]
    EmptyMask,
    #[error("envelope has no present values to fill gaps from")]
    AllGaps,
    #[error("envelope widths differ: {top} vs {bottom}")]
    WidthMismatch { top: usize, bottom: usize },
    #[error("invalid calibration parameters: {0}")]
    InvalidParams(String),
    #[error("signal JSON schema violation: {0}")]
    Schema(String),
}

/// Per-column envelope rows; `None` marks a column without ink.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    values: Vec<Option<u32>>,
}

impl Envelope {
    pub fn new(values: Vec<Option<u32>>) -> Self {
        Envelope { values }
    }

    pub fn values(&self) -> &[Option<u32>] {
        &self.values
    }

    pub fn gap_mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| v.is_none()).collect()
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }
}

/// Envelope with every gap filled; rows may be fractional after
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct FilledEnvelope {
    values: Vec<f64>,
}

impl FilledEnvelope {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }
}

/// Extracted curve in pixel rows, one fractional sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTrace {
    pub samples: Vec<f64>,
}

impl PixelTrace {
    pub fn width(&self) -> usize {
        self.samples.len()
    }
}

/// How to fill envelope columns that have no ink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapFillStrategy {
    RepeatPrevious,
    LinearInterpolate,
}

/// Geometry and scale parameters mapping pixel rows to millivolts.
///
/// `trace_height_px` is the user-declared pixel height of the signal trace
/// area, which corresponds to `physical_height_cm` of paper (standard
/// 3.5 cm). `baseline_row_px` is the 0 mV row; when absent the median of
/// the extracted trace is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub trace_height_px: f64,
    pub physical_height_cm: f64,
    pub gain_mm_per_mv: f64,
    pub paper_speed_mm_per_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_row_px: Option<f64>,
}

impl CalibrationParams {
    pub fn new(trace_height_px: f64) -> Self {
        CalibrationParams {
            trace_height_px,
            physical_height_cm: 3.5,
            gain_mm_per_mv: 10.0,
            paper_speed_mm_per_s: 25.0,
            baseline_row_px: None,
        }
    }

    pub fn mm_per_px(&self) -> f64 {
        self.physical_height_cm * 10.0 / self.trace_height_px
    }

    fn validate(&self) -> Result<(), ExtractionError> {
        let fields = [
            ("trace_height_px", self.trace_height_px),
            ("physical_height_cm", self.physical_height_cm),
            ("gain_mm_per_mv", self.gain_mm_per_mv),
            ("paper_speed_mm_per_s", self.paper_speed_mm_per_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ExtractionError::InvalidParams(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if let Some(b) = self.baseline_row_px {
            if !b.is_finite() || b < 0.0 {
                return Err(ExtractionError::InvalidParams(format!(
                    "baseline_row_px must be a non-negative row, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// Calibrated millivolt signal with its acquisition metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSignal {
    pub schema_version: u32,
    pub lead_label: String,
    pub sample_period_s: f64,
    #[serde(rename = "samples_mV")]
    pub samples_mv: Vec<f64>,
    pub source_id: String,
    pub calibration: CalibrationParams,
}

impl CalibratedSignal {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.sample_period_s
    }

    pub fn duration_s(&self) -> f64 {
        self.samples_mv.len() as f64 * self.sample_period_s
    }

    /// Canonical single-line JSON: sorted keys, shortest float repr.
    pub fn to_canonical_json(&self) -> String {
        crate::canonical::to_canonical_json(self).expect("signal serializes to JSON")
    }

    pub fn from_json(data: &str) -> Result<Self, ExtractionError> {
        let sig: CalibratedSignal =
            serde_json::from_str(data).map_err(|e| ExtractionError::Schema(e.to_string()))?;
        sig.validate()?;
        Ok(sig)
    }

    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.schema_version != Self::SCHEMA_VERSION {
            return Err(ExtractionError::Schema(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.samples_mv.is_empty() {
            return Err(ExtractionError::Schema("samples_mV is empty".into()));
        }
        if !(self.sample_period_s > 0.0) || !self.sample_period_s.is_finite() {
            return Err(ExtractionError::Schema(format!(
                "sample_period_s must be > 0, got {}",
                self.sample_period_s
            )));
        }
        if self.samples_mv.iter().any(|v| !v.is_finite()) {
            return Err(ExtractionError::Schema(
                "samples_mV contains a non-finite value".into(),
            ));
        }
        Ok(())
    }

    /// Two-column CSV export: `time_s,amplitude_mV`, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,amplitude_mV\n");
        for (n, v) in self.samples_mv.iter().enumerate() {
            out.push_str(&format!("{},{}\n", n as f64 * self.sample_period_s, v));
        }
        out
    }
}

/// Scans every column for its first ink pixel from the top and from the
/// bottom. Columns without ink become gaps in both envelopes.
pub fn extract_envelopes(bin: &BinaryImage) -> Result<(Envelope, Envelope), ExtractionError> {
    let w = bin.width() as usize;
    let h = bin.height() as usize;
    let mask = bin.mask();
    let mut top = vec![None; w];
    let mut bottom = vec![None; w];
    let mut any_ink = false;
    for x in 0..w {
        for y in 0..h {
            if mask[y * w + x] {
                top[x] = Some(y as u32);
                any_ink = true;
                break;
            }
        }
        if top[x].is_some() {
            for y in (0..h).rev() {
                if mask[y * w + x] {
                    bottom[x] = Some(y as u32);
                    break;
                }
            }
        }
    }
    if !any_ink {
        return Err(ExtractionError::EmptyMask);
    }
    Ok((Envelope::new(top), Envelope::new(bottom)))
}

/// Fills gaps. `RepeatPrevious` takes the nearest preceding value (leading
/// gaps take the first present value); `LinearInterpolate` interpolates
/// interior gaps and clamps boundary gaps to the nearest present value.
pub fn fill_gaps(
    env: &Envelope,
    strategy: GapFillStrategy,
) -> Result<FilledEnvelope, ExtractionError> {
    let values = env.values();
    let first_present = values
        .iter()
        .position(|v| v.is_some())
        .ok_or(ExtractionError::AllGaps)?;
    let mut out = vec![0.0f64; values.len()];
    match strategy {
        GapFillStrategy::RepeatPrevious => {
            let mut last = values[first_present].unwrap() as f64;
            for (i, v) in values.iter().enumerate() {
                if let Some(row) = v {
                    last = *row as f64;
                }
                out[i] = last;
            }
        }
        GapFillStrategy::LinearInterpolate => {
            let present: Vec<(usize, f64)> = values
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|row| (i, row as f64)))
                .collect();
            let mut seg = 0;
            for (i, slot) in out.iter_mut().enumerate() {
                while seg + 1 < present.len() && present[seg + 1].0 <= i {
                    seg += 1;
                }
                let (i0, v0) = present[seg];
                *slot = if i <= i0 {
                    v0
                } else if seg + 1 < present.len() {
                    let (i1, v1) = present[seg + 1];
                    v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64
                } else {
                    v0
                };
            }
        }
    }
    Ok(FilledEnvelope { values: out })
}

/// Per-column mean of the two envelopes.
pub fn average_envelopes(
    top: &FilledEnvelope,
    bottom: &FilledEnvelope,
) -> Result<PixelTrace, ExtractionError> {
    if top.width() != bottom.width() {
        return Err(ExtractionError::WidthMismatch {
            top: top.width(),
            bottom: bottom.width(),
        });
    }
    let samples = top
        .values()
        .iter()
        .zip(bottom.values())
        .map(|(t, b)| (t + b) / 2.0)
        .collect();
    Ok(PixelTrace { samples })
}

/// Maps pixel rows to millivolts and columns to seconds.
///
/// Rows grow downward, so a sample above the baseline is positive. The
/// horizontal axis assumes square pixels: one column is `mm_per_px` of
/// paper travelling at `paper_speed_mm_per_s`.
pub fn calibrate(
    trace: &PixelTrace,
    params: &CalibrationParams,
    lead_label: &str,
    source_id: &str,
) -> Result<CalibratedSignal, ExtractionError> {
    params.validate()?;
    assert!(trace.width() >= 2, "trace must have at least two columns");
    let baseline = params.baseline_row_px.unwrap_or_else(|| median(&trace.samples));
    // Single-division forms keep the printed decimals short.
    let height_mm = params.physical_height_cm * 10.0;
    let samples_mv: Vec<f64> = trace
        .samples
        .iter()
        .map(|&row| {
            (baseline - row) * height_mm / (params.trace_height_px * params.gain_mm_per_mv)
        })
        .collect();
    let sample_period_s = height_mm / (params.trace_height_px * params.paper_speed_mm_per_s);
    Ok(CalibratedSignal {
        schema_version: CalibratedSignal::SCHEMA_VERSION,
        lead_label: lead_label.to_string(),
        sample_period_s,
        samples_mv,
        source_id: source_id.to_string(),
        calibration: CalibrationParams {
            baseline_row_px: Some(baseline),
            ..params.clone()
        },
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarization::BinaryImage;

    fn env(vals: &[Option<u32>]) -> Envelope {
        Envelope::new(vals.to_vec())
    }

    #[test]
    fn envelopes_take_min_and_max_rows() {
        let mut bin = BinaryImage::blank(1, 10);
        for y in [3u32, 4, 7] {
            bin.set_ink(0, y, true);
        }
        let (top, bottom) = extract_envelopes(&bin).unwrap();
        assert_eq!(top.values()[0], Some(3));
        assert_eq!(bottom.values()[0], Some(7));
    }

    #[test]
    fn single_pixel_column_has_coincident_envelopes() {
        let mut bin = BinaryImage::blank(1, 10);
        bin.set_ink(0, 5, true);
        let (top, bottom) = extract_envelopes(&bin).unwrap();
        assert_eq!(top.values()[0], Some(5));
        assert_eq!(bottom.values()[0], Some(5));
    }

    #[test]
    fn gap_mask_marks_empty_columns() {
        let mut bin = BinaryImage::blank(5, 4);
        for x in [0u32, 1, 3, 4] {
            bin.set_ink(x, 2, true);
        }
        let (top, bottom) = extract_envelopes(&bin).unwrap();
        assert_eq!(top.gap_mask(), vec![false, false, true, false, false]);
        assert_eq!(bottom.gap_mask(), vec![false, false, true, false, false]);
    }

    #[test]
    fn empty_mask_is_an_error() {
        assert!(matches!(
            extract_envelopes(&BinaryImage::blank(4, 4)),
            Err(ExtractionError::EmptyMask)
        ));
    }

    #[test]
    fn fill_linear_interpolates_midpoint() {
        let filled = fill_gaps(&env(&[Some(10), None, Some(20)]), GapFillStrategy::LinearInterpolate)
            .unwrap();
        assert_eq!(filled.values(), &[10.0, 15.0, 20.0]);
    }

    #[test]
    fn fill_repeat_takes_previous() {
        let filled =
            fill_gaps(&env(&[Some(10), None, Some(20)]), GapFillStrategy::RepeatPrevious).unwrap();
        assert_eq!(filled.values(), &[10.0, 10.0, 20.0]);
    }

    #[test]
    fn fill_leading_gaps_take_first_present() {
        let filled =
            fill_gaps(&env(&[None, None, Some(8)]), GapFillStrategy::RepeatPrevious).unwrap();
        assert_eq!(filled.values(), &[8.0, 8.0, 8.0]);
        let lerp =
            fill_gaps(&env(&[None, None, Some(8)]), GapFillStrategy::LinearInterpolate).unwrap();
        assert_eq!(lerp.values(), &[8.0, 8.0, 8.0]);
    }

    #[test]
    fn fill_is_identity_on_gap_free_envelopes() {
        let e = env(&[Some(4), Some(9), Some(2)]);
        for strategy in [GapFillStrategy::RepeatPrevious, GapFillStrategy::LinearInterpolate] {
            let filled = fill_gaps(&e, strategy).unwrap();
            assert_eq!(filled.values(), &[4.0, 9.0, 2.0]);
        }
    }

    #[test]
    fn fill_all_gaps_is_error() {
        assert!(matches!(
            fill_gaps(&env(&[None, None]), GapFillStrategy::RepeatPrevious),
            Err(ExtractionError::AllGaps)
        ));
    }

    #[test]
    fn averaging_basics() {
        let t = fill_gaps(&env(&[Some(4), Some(4)]), GapFillStrategy::RepeatPrevious).unwrap();
        let b = t.clone();
        assert_eq!(average_envelopes(&t, &b).unwrap().samples, vec![4.0, 4.0]);

        let t = fill_gaps(&env(&[Some(3)]), GapFillStrategy::RepeatPrevious).unwrap();
        let b = fill_gaps(&env(&[Some(7)]), GapFillStrategy::RepeatPrevious).unwrap();
        assert_eq!(average_envelopes(&t, &b).unwrap().samples, vec![5.0]);

        let t = fill_gaps(&env(&[Some(2), Some(6)]), GapFillStrategy::RepeatPrevious).unwrap();
        let b = fill_gaps(&env(&[Some(4), Some(6)]), GapFillStrategy::RepeatPrevious).unwrap();
        assert_eq!(average_envelopes(&t, &b).unwrap().samples, vec![3.0, 6.0]);
    }

    #[test]
    fn averaging_width_mismatch() {
        let t = fill_gaps(&env(&[Some(1), Some(2)]), GapFillStrategy::RepeatPrevious).unwrap();
        let b = fill_gaps(&env(&[Some(1)]), GapFillStrategy::RepeatPrevious).unwrap();
        assert!(matches!(
            average_envelopes(&t, &b),
            Err(ExtractionError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn calibrate_standard_paper() {
        // 3.5 cm over 350 px -> 0.1 mm/px; 100 px above baseline -> 1 mV;
        // 0.1 mm per column at 25 mm/s -> 4 ms per sample.
        let trace = PixelTrace {
            samples: vec![175.0, 75.0, 175.0],
        };
        let mut params = CalibrationParams::new(350.0);
        params.baseline_row_px = Some(175.0);
        let sig = calibrate(&trace, &params, "II", "t").unwrap();
        assert_eq!(sig.samples_mv, vec![0.0, 1.0, 0.0]);
        assert!((sig.sample_period_s - 0.004).abs() < 1e-15);
        assert!((sig.sample_rate_hz() - 250.0).abs() < 1e-9);
    }

    #[test]
    fn calibrate_doubling_height_halves_scale() {
        let trace = PixelTrace {
            samples: vec![100.0, 50.0],
        };
        let mut p1 = CalibrationParams::new(350.0);
        p1.baseline_row_px = Some(100.0);
        let mut p2 = CalibrationParams::new(700.0);
        p2.baseline_row_px = Some(100.0);
        let s1 = calibrate(&trace, &p1, "II", "t").unwrap();
        let s2 = calibrate(&trace, &p2, "II", "t").unwrap();
        assert!((s2.samples_mv[1] - s1.samples_mv[1] / 2.0).abs() < 1e-12);
        assert!((s2.sample_period_s - s1.sample_period_s / 2.0).abs() < 1e-15);
    }

    #[test]
    fn calibrate_defaults_baseline_to_median() {
        let trace = PixelTrace {
            samples: vec![175.0, 175.0, 175.0, 100.0, 175.0],
        };
        let sig = calibrate(&trace, &CalibrationParams::new(350.0), "II", "t").unwrap();
        assert_eq!(sig.calibration.baseline_row_px, Some(175.0));
        assert_eq!(sig.samples_mv[0], 0.0);
        assert!((sig.samples_mv[3] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn calibrate_rejects_non_positive_params() {
        let trace = PixelTrace {
            samples: vec![1.0, 2.0],
        };
        let mut params = CalibrationParams::new(0.0);
        assert!(matches!(
            calibrate(&trace, &params, "II", "t"),
            Err(ExtractionError::InvalidParams(_))
        ));
        params.trace_height_px = 350.0;
        params.gain_mm_per_mv = -1.0;
        assert!(matches!(
            calibrate(&trace, &params, "II", "t"),
            Err(ExtractionError::InvalidParams(_))
        ));
    }

    #[test]
    fn signal_json_round_trip_and_schema_errors() {
        let trace = PixelTrace {
            samples: vec![175.0, 75.0, 130.5],
        };
        let sig = calibrate(&trace, &CalibrationParams::new(350.0), "II", "img1").unwrap();
        let json = sig.to_canonical_json();
        let back = CalibratedSignal::from_json(&json).unwrap();
        assert_eq!(back, sig);
        assert_eq!(back.to_canonical_json(), json);

        let missing = json.replace("samples_mV", "samples");
        assert!(matches!(
            CalibratedSignal::from_json(&missing),
            Err(ExtractionError::Schema(_))
        ));
    }

    #[test]
    fn csv_export_shape() {
        let sig = CalibratedSignal {
            schema_version: 1,
            lead_label: "II".into(),
            sample_period_s: 0.004,
            samples_mv: vec![0.0, 0.135],
            source_id: "x".into(),
            calibration: CalibrationParams::new(350.0),
        };
        let csv = sig.to_csv();
        assert_eq!(csv, "time_s,amplitude_mV\n0,0\n0.004,0.135\n");
    }
}
