//! Runs the full digitize-and-analyze pipeline over a synthetic corpus and
//! aggregates extraction success and detection scores.

use super::matching::{
    score, EvalResult, FeatureLabel, FeaturePoint, FeaturePointSet, LabelTolerances, MatchCounts,
};
use super::synth::{render_synthetic_trace, SyntheticTraceSpec};
use crate::analysis::{analyze, AnalysisConfig, AnalysisReport};
use crate::extraction::{CalibrationParams, GapFillStrategy};
use crate::imaging::{self, CropRect, RasterImage};
use crate::pipeline::{self, DeskewConfig, PipelineConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One corpus entry: a generator spec plus its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub seed: u64,
    #[serde(default)]
    pub spec: SyntheticTraceSpec,
}

/// Evaluation-run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// A trace counts as successfully extracted when the amplitude RMSE
    /// against ground truth stays below this bound (mV).
    pub success_rmse_mv: f64,
    pub tolerances: LabelTolerances,
    pub deskew_enabled: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            success_rmse_mv: 0.1,
            tolerances: LabelTolerances::default(),
            deskew_enabled: true,
        }
    }
}

/// Per-item diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub id: String,
    pub success: bool,
    pub rmse_mv: Option<f64>,
    pub skew_injected_deg: f64,
    pub skew_estimated_deg: Option<f64>,
    pub heart_rate_bpm: Option<f64>,
    pub rr_std_ms: Option<f64>,
    pub scores: Option<EvalResult>,
    pub error: Option<String>,
}

/// Corpus-level aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub total: usize,
    pub succeeded: usize,
    pub success_rate: f64,
    pub rmse_mean_mv: Option<f64>,
    pub rmse_median_mv: Option<f64>,
    pub rmse_max_mv: Option<f64>,
    pub aggregate_precision: f64,
    pub aggregate_recall: f64,
    pub per_label: BTreeMap<FeatureLabel, MatchCounts>,
    pub items: Vec<ItemReport>,
}

/// Converts a beat report into labeled event times for scoring.
pub fn report_to_feature_points(report: &AnalysisReport, sample_period_s: f64) -> FeaturePointSet {
    let mut points = Vec::new();
    let t = |idx: usize| idx as f64 * sample_period_s;
    for &r in &report.r_peaks {
        points.push(FeaturePoint {
            time_s: t(r),
            label: FeatureLabel::R,
        });
    }
    for beat in &report.beats {
        for (idx, label) in [
            (beat.p_idx, FeatureLabel::P),
            (beat.q_idx, FeatureLabel::Q),
            (beat.s_idx, FeatureLabel::S),
            (beat.t_idx, FeatureLabel::T),
        ] {
            if let Some(i) = idx {
                points.push(FeaturePoint {
                    time_s: t(i),
                    label,
                });
            }
        }
    }
    FeaturePointSet::new(points)
}

/// Renders, digitizes and analyzes every corpus item; failures become
/// per-item diagnostics rather than aborting the run.
pub fn evaluate_pipeline(corpus: &[CorpusItem], cfg: &EvalConfig) -> EvaluationReport {
    let items: Vec<ItemReport> = corpus
        .par_iter()
        .map(|item| evaluate_item(item, cfg))
        .collect();

    let succeeded = items.iter().filter(|i| i.success).count();
    let mut rmses: Vec<f64> = items.iter().filter_map(|i| i.rmse_mv).collect();
    rmses.sort_by(f64::total_cmp);
    let (rmse_mean, rmse_median, rmse_max) = if rmses.is_empty() {
        (None, None, None)
    } else {
        (
            Some(rmses.iter().sum::<f64>() / rmses.len() as f64),
            Some(rmses[rmses.len() / 2]),
            Some(*rmses.last().unwrap()),
        )
    };

    let mut per_label: BTreeMap<FeatureLabel, MatchCounts> = BTreeMap::new();
    let mut total = MatchCounts::default();
    for item in &items {
        if let Some(scores) = &item.scores {
            for (label, counts) in &scores.per_label_counts {
                let slot = per_label.entry(*label).or_default();
                slot.matched += counts.matched;
                slot.detected += counts.detected;
                slot.truth += counts.truth;
            }
            total.matched += scores.counts.matched;
            total.detected += scores.counts.detected;
            total.truth += scores.counts.truth;
        }
    }

    EvaluationReport {
        total: items.len(),
        succeeded,
        success_rate: if items.is_empty() {
            0.0
        } else {
            succeeded as f64 / items.len() as f64
        },
        rmse_mean_mv: rmse_mean,
        rmse_median_mv: rmse_median,
        rmse_max_mv: rmse_max,
        aggregate_precision: total.precision(),
        aggregate_recall: total.recall(),
        per_label,
        items,
    }
}

fn evaluate_item(item: &CorpusItem, cfg: &EvalConfig) -> ItemReport {
    let fail = |err: String| ItemReport {
        id: item.id.clone(),
        success: false,
        rmse_mv: None,
        skew_injected_deg: item.spec.distortions.rotation_deg,
        skew_estimated_deg: None,
        heart_rate_bpm: None,
        rr_std_ms: None,
        scores: None,
        error: Some(err),
    };

    let (image, truth) = match render_synthetic_trace(&item.spec, item.seed) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };

    // The generator only knows paper geometry in the unrotated frame, so
    // deskew first, then map the trace region by the canvas growth. This is
    // the automated stand-in for the user cropping on the deskewed preview.
    let (deskewed, estimated) = if cfg.deskew_enabled {
        match imaging::estimate_skew_two_stage(&image.to_grayscale(), 10.0, 1.0, 0.25) {
            Ok(est) if est.angle_deg != 0.0 => (image.rotate(-est.angle_deg), Some(est.angle_deg)),
            Ok(est) => (image, Some(est.angle_deg)),
            Err(imaging::ImagingError::DegenerateImage) => (image, None),
            Err(e) => return fail(e.to_string()),
        }
    } else {
        (image, None)
    };

    let region = match translate_region(&truth.trace_region, &truth, &deskewed) {
        Some(r) => r,
        None => return fail("trace region fell outside the deskewed canvas".into()),
    };

    let mut calibration = CalibrationParams::new(region.h as f64);
    calibration.baseline_row_px = None; // median default, the honest path
    let pipe_cfg = PipelineConfig {
        deskew: DeskewConfig {
            enabled: false,
            ..DeskewConfig::default()
        },
        crop: Some(region),
        threshold_override: None,
        se_length: 4,
        se_angle_step_deg: 15.0,
        gap_strategy: GapFillStrategy::RepeatPrevious,
        calibration,
    };
    let out = match pipeline::digitize(&deskewed, &pipe_cfg, "II", &item.id) {
        Ok(o) => o,
        Err(e) => {
            let mut report = fail(e.to_string());
            report.skew_estimated_deg = estimated;
            return report;
        }
    };

    let n = out.signal.samples_mv.len().min(truth.signal.samples_mv.len());
    let rmse = (out.signal.samples_mv[..n]
        .iter()
        .zip(&truth.signal.samples_mv[..n])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64)
        .sqrt();

    let outcome = analyze(&out.signal, &AnalysisConfig::default());
    let detected = report_to_feature_points(&outcome.report, out.signal.sample_period_s);
    let scores = score(&detected, &truth.fiducials, &cfg.tolerances);

    ItemReport {
        id: item.id.clone(),
        success: rmse < cfg.success_rmse_mv,
        rmse_mv: Some(rmse),
        skew_injected_deg: truth.skew_deg,
        skew_estimated_deg: estimated,
        heart_rate_bpm: outcome.report.heart_rate_bpm,
        rr_std_ms: outcome.report.rr_std_ms,
        scores: Some(scores),
        error: None,
    }
}

/// Maps the unrotated-frame region into the deskewed canvas; rotation about
/// the center means the content only translates by half the canvas growth.
fn translate_region(
    region: &CropRect,
    truth: &super::synth::GroundTruth,
    deskewed: &RasterImage,
) -> Option<CropRect> {
    let dx = (deskewed.width() as i64 - truth.unrotated_width as i64) / 2;
    let dy = (deskewed.height() as i64 - truth.unrotated_height as i64) / 2;
    let x = region.x as i64 + dx;
    let y = region.y as i64 + dy;
    if x < 0
        || y < 0
        || x + region.w as i64 > deskewed.width() as i64
        || y + region.h as i64 > deskewed.height() as i64
    {
        return None;
    }
    Some(CropRect::new(x as u32, y as u32, region.w, region.h))
}
