//! End-to-end digitization: photograph in, calibrated signal out.

use crate::binarization::{self, BinarizationError, BinaryImage};
use crate::extraction::{
    self, CalibratedSignal, CalibrationParams, ExtractionError, GapFillStrategy, PixelTrace,
};
use crate::imaging::{self, CropRect, ImagingError, RasterImage, SkewEstimate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Binarization(#[from] BinarizationError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
}

/// Deskew stage settings. The estimate runs coarse-to-fine; a degenerate
/// projection profile (no directional structure) falls back to no rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskewConfig {
    pub enabled: bool,
    pub half_range_deg: f64,
    pub coarse_step_deg: f64,
    pub fine_step_deg: f64,
}

impl Default for DeskewConfig {
    fn default() -> Self {
        DeskewConfig {
            enabled: true,
            half_range_deg: 10.0,
            coarse_step_deg: 1.0,
            fine_step_deg: 0.25,
        }
    }
}

/// Every stage parameter of the digitization pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub deskew: DeskewConfig,
    /// Region holding exactly one trace, in deskewed-image coordinates.
    /// `None` processes the full image.
    pub crop: Option<CropRect>,
    /// Fixed binarization threshold; `None` selects Otsu's.
    pub threshold_override: Option<u8>,
    pub se_length: u32,
    pub se_angle_step_deg: f64,
    pub gap_strategy: GapFillStrategy,
    pub calibration: CalibrationParams,
}

impl PipelineConfig {
    pub fn new(calibration: CalibrationParams) -> Self {
        PipelineConfig {
            deskew: DeskewConfig::default(),
            crop: None,
            threshold_override: None,
            se_length: 4,
            se_angle_step_deg: 15.0,
            gap_strategy: GapFillStrategy::RepeatPrevious,
            calibration,
        }
    }
}

/// Digitization result plus the intermediates worth inspecting.
#[derive(Debug, Clone)]
pub struct DigitizeOutput {
    pub signal: CalibratedSignal,
    pub skew: Option<SkewEstimate>,
    pub threshold: u8,
    pub deskewed: RasterImage,
    pub crop_used: CropRect,
    pub binary: BinaryImage,
    pub trace: PixelTrace,
}

/// Runs load -> grayscale -> deskew -> crop -> Otsu -> binarize ->
/// artifact removal -> envelopes -> gap fill -> average -> calibrate.
pub fn digitize(
    img: &RasterImage,
    cfg: &PipelineConfig,
    lead_label: &str,
    source_id: &str,
) -> Result<DigitizeOutput, PipelineError> {
    let gray = img.to_grayscale();

    let (deskewed, gray, skew) = if cfg.deskew.enabled {
        // Estimate on a reduced image when the photograph is large; the
        // angle is scale-invariant and the correction uses the full
        // resolution.
        let longest = gray.width().max(gray.height());
        let factor = longest.div_ceil(1400).max(1);
        let estimation_src = if factor > 1 {
            imaging::downsample_box(&gray, factor)
        } else {
            gray.clone()
        };
        match imaging::estimate_skew_two_stage(
            &estimation_src,
            cfg.deskew.half_range_deg,
            cfg.deskew.coarse_step_deg,
            cfg.deskew.fine_step_deg,
        ) {
            Ok(est) if est.angle_deg != 0.0 => {
                let corrected = img.rotate(-est.angle_deg);
                let corrected_gray = corrected.to_grayscale();
                (corrected, corrected_gray, Some(est))
            }
            Ok(est) => (img.clone(), gray, Some(est)),
            // No directional structure; proceed unrotated.
            Err(ImagingError::DegenerateImage) => (img.clone(), gray, None),
            Err(e) => return Err(e.into()),
        }
    } else {
        (img.clone(), gray, None)
    };

    let crop_used = cfg
        .crop
        .unwrap_or_else(|| CropRect::new(0, 0, gray.width(), gray.height()));
    let region = gray.crop(&crop_used)?;

    let threshold = match cfg.threshold_override {
        Some(t) => t,
        None => {
            match binarization::otsu_threshold(&binarization::histogram(&region)) {
                Ok(t) => t,
                // A single-gray-level region has no separable trace.
                Err(BinarizationError::DegenerateHistogram) => {
                    return Err(ExtractionError::EmptyMask.into())
                }
            }
        }
    };
    let bin = binarization::binarize(&region, threshold);
    let cleaned = binarization::remove_artifacts(&bin, cfg.se_length, cfg.se_angle_step_deg);

    let (top, bottom) = extraction::extract_envelopes(&cleaned)?;
    let top = extraction::fill_gaps(&top, cfg.gap_strategy)?;
    let bottom = extraction::fill_gaps(&bottom, cfg.gap_strategy)?;
    let trace = extraction::average_envelopes(&top, &bottom)?;
    let signal = extraction::calibrate(&trace, &cfg.calibration, lead_label, source_id)?;

    Ok(DigitizeOutput {
        signal,
        skew,
        threshold,
        deskewed,
        crop_used,
        binary: cleaned,
        trace,
    })
}

/// Renders the extracted trace over the deskewed photograph so the user can
/// verify the extraction before uploading.
pub fn render_overlay(out: &DigitizeOutput) -> RasterImage {
    let mut overlay = out.deskewed.clone();
    let rect = out.crop_used;
    for (c, &row) in out.trace.samples.iter().enumerate() {
        let x = rect.x + c as u32;
        let y_center = row.round() as i64 + rect.y as i64;
        for dy in -1..=1i64 {
            let y = y_center + dy;
            if x < overlay.width() && y >= 0 && (y as u32) < overlay.height() {
                overlay.set_pixel(x, y as u32, [230, 20, 20]);
            }
        }
    }
    overlay
}
