//! Deterministic synthetic ECG trace-photograph generator.
//!
//! Stands in for a photographed corpus: it renders a known waveform onto
//! grid paper, applies controlled distortions, and hands back the exact
//! signal, fiducial times and injected skew as ground truth.

use super::matching::{FeatureLabel, FeaturePoint, FeaturePointSet};
use super::EvaluationError;
use crate::extraction::{CalibratedSignal, CalibrationParams};
use crate::imaging::{load_image, CropRect, RasterImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Standard ECG trace strip height. 3.5 cm of paper.
pub const TRACE_HEIGHT_MM: f64 = 35.0;
/// Standard paper speed and gain assumed by the renderer.
pub const PAPER_SPEED_MM_PER_S: f64 = 25.0;
pub const GAIN_MM_PER_MV: f64 = 10.0;

/// One Gaussian deflection of the beat template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveComponent {
    pub amplitude_mv: f64,
    pub sd_ms: f64,
    pub offset_ms: f64,
}

/// Beat template plus rhythm parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformSpec {
    pub heart_rate_bpm: f64,
    pub duration_s: f64,
    pub p: WaveComponent,
    pub q: WaveComponent,
    pub r: WaveComponent,
    pub s: WaveComponent,
    pub t: WaveComponent,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        WaveformSpec {
            heart_rate_bpm: 75.0,
            duration_s: 30.0,
            p: WaveComponent {
                amplitude_mv: 0.15,
                sd_ms: 25.0,
                offset_ms: -160.0,
            },
            q: WaveComponent {
                amplitude_mv: -0.12,
                sd_ms: 9.0,
                offset_ms: -32.0,
            },
            r: WaveComponent {
                amplitude_mv: 1.2,
                sd_ms: 7.0,
                offset_ms: 0.0,
            },
            s: WaveComponent {
                amplitude_mv: -0.22,
                sd_ms: 9.0,
                offset_ms: 32.0,
            },
            t: WaveComponent {
                amplitude_mv: 0.30,
                sd_ms: 45.0,
                offset_ms: 200.0,
            },
        }
    }
}

impl WaveformSpec {
    pub fn components(&self) -> [WaveComponent; 5] {
        [self.p, self.q, self.r, self.s, self.t]
    }

    pub fn rr_s(&self) -> f64 {
        60.0 / self.heart_rate_bpm
    }

    /// Uniform beat train: the first R sits far enough in for a full P
    /// window, the last leaves room for a full T window.
    pub fn beat_times(&self) -> Vec<f64> {
        let rr = self.rr_s();
        let mut t = f64::max(0.45, 0.6 * rr);
        let mut out = Vec::new();
        while t + 0.45 <= self.duration_s {
            out.push(t);
            t += rr;
        }
        out
    }

    /// Continuous waveform value at time `t` for the given beat train.
    pub fn value_at(&self, beat_times: &[f64], t: f64) -> f64 {
        let mut v = 0.0;
        for &tb in beat_times {
            if (t - tb).abs() > 1.5 {
                continue;
            }
            for c in self.components() {
                let sd = c.sd_ms / 1000.0;
                let dt = t - tb - c.offset_ms / 1000.0;
                v += c.amplitude_mv * (-dt * dt / (2.0 * sd * sd)).exp();
            }
        }
        v
    }
}

/// Grid paper geometry and colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaperSpec {
    pub px_per_mm: f64,
    pub grid_minor_mm: f64,
    pub grid_major_mm: f64,
    pub minor_rgb: [u8; 3],
    pub major_rgb: [u8; 3],
    pub trace_rgb: [u8; 3],
    pub stroke_width_px: f64,
    pub margin_mm: f64,
}

impl Default for PaperSpec {
    fn default() -> Self {
        PaperSpec {
            px_per_mm: 10.0,
            grid_minor_mm: 1.0,
            grid_major_mm: 5.0,
            minor_rgb: [252, 218, 218],
            major_rgb: [247, 176, 176],
            trace_rgb: [28, 26, 30],
            stroke_width_px: 2.0,
            margin_mm: 6.0,
        }
    }
}

/// Photographic imperfections applied after rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistortionSpec {
    /// Counter-clockwise content rotation in degrees, within [-10, 10].
    pub rotation_deg: f64,
    /// Standard deviation of additive luminance noise, in gray levels.
    pub noise_sd: f64,
    /// Horizontal lighting falloff: 0 is none, 0.3 darkens the right edge
    /// by 30%.
    pub lighting_gradient: f64,
    /// When set, the render is passed through a JPEG encode/decode cycle.
    pub jpeg_quality: Option<u8>,
}

impl Default for DistortionSpec {
    fn default() -> Self {
        DistortionSpec {
            rotation_deg: 0.0,
            noise_sd: 0.0,
            lighting_gradient: 0.0,
            jpeg_quality: None,
        }
    }
}

/// Full description of one synthetic trace photograph.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTraceSpec {
    pub waveform: WaveformSpec,
    pub paper: PaperSpec,
    pub distortions: DistortionSpec,
}

impl SyntheticTraceSpec {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        let w = &self.waveform;
        let positive = [
            ("heart_rate_bpm", w.heart_rate_bpm),
            ("duration_s", w.duration_s),
            ("px_per_mm", self.paper.px_per_mm),
            ("grid_minor_mm", self.paper.grid_minor_mm),
            ("grid_major_mm", self.paper.grid_major_mm),
            ("stroke_width_px", self.paper.stroke_width_px),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EvaluationError::InvalidSpec(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(20.0..=300.0).contains(&w.heart_rate_bpm) {
            return Err(EvaluationError::InvalidSpec(format!(
                "heart_rate_bpm {} outside [20, 300]",
                w.heart_rate_bpm
            )));
        }
        for c in w.components() {
            if !(c.sd_ms > 0.0) {
                return Err(EvaluationError::InvalidSpec(
                    "wave component widths must be positive".into(),
                ));
            }
        }
        let d = &self.distortions;
        if !(-10.0..=10.0).contains(&d.rotation_deg) {
            return Err(EvaluationError::InvalidSpec(format!(
                "rotation_deg {} outside [-10, 10]",
                d.rotation_deg
            )));
        }
        if d.noise_sd < 0.0 || d.lighting_gradient < 0.0 || d.lighting_gradient > 0.9 {
            return Err(EvaluationError::InvalidSpec(
                "noise_sd must be >= 0 and lighting_gradient in [0, 0.9]".into(),
            ));
        }
        if let Some(q) = d.jpeg_quality {
            if !(1..=100).contains(&q) {
                return Err(EvaluationError::InvalidSpec(format!(
                    "jpeg_quality {q} outside [1, 100]"
                )));
            }
        }
        if self.paper.margin_mm < 0.0 {
            return Err(EvaluationError::InvalidSpec("margin_mm must be >= 0".into()));
        }
        Ok(())
    }
}

/// What the generator knows about its own render.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Exact signal, sampled once per trace-region column.
    pub signal: CalibratedSignal,
    /// R/P/Q/S/T event times in seconds.
    pub fiducials: FeaturePointSet,
    /// Injected rotation; what a deskew stage should estimate.
    pub skew_deg: f64,
    /// Trace region in the unrotated canvas.
    pub trace_region: CropRect,
    /// 0 mV row in the unrotated canvas.
    pub baseline_row_px: f64,
    /// Unrotated canvas size, for mapping the region after deskew.
    pub unrotated_width: u32,
    pub unrotated_height: u32,
}

/// Renders the trace photograph. Deterministic: the same `(spec, seed)`
/// produce bit-identical pixels and ground truth.
pub fn render_synthetic_trace(
    spec: &SyntheticTraceSpec,
    seed: u64,
) -> Result<(RasterImage, GroundTruth), EvaluationError> {
    spec.validate()?;
    let paper = &spec.paper;
    let ppm = paper.px_per_mm;
    let fs = PAPER_SPEED_MM_PER_S * ppm;

    let (signal, fiducials) = synthesize_signal(
        &spec.waveform,
        fs,
        "II",
        &format!("synthetic-{seed:08x}"),
    );
    let n = signal.samples_mv.len() as u32;

    let margin = (paper.margin_mm * ppm).round() as u32;
    let trace_h = (TRACE_HEIGHT_MM * ppm).round() as u32;
    let w0 = n + 2 * margin;
    let h0 = trace_h + 2 * margin;
    let baseline_row = margin as f64 + trace_h as f64 / 2.0;

    let mut img = RasterImage::filled(w0, h0, [255, 255, 255]);
    draw_grid(&mut img, paper);
    draw_curve(&mut img, &signal.samples_mv, margin, baseline_row, paper);

    if spec.distortions.lighting_gradient > 0.0 {
        apply_lighting(&mut img, spec.distortions.lighting_gradient);
    }
    if spec.distortions.noise_sd > 0.0 {
        apply_noise(&mut img, spec.distortions.noise_sd, seed);
    }
    let mut img = if spec.distortions.rotation_deg != 0.0 {
        img.rotate(spec.distortions.rotation_deg)
    } else {
        img
    };
    if let Some(q) = spec.distortions.jpeg_quality {
        img = load_image(&img.encode_jpeg(q))
            .expect("JPEG round trip of a rendered image decodes");
    }

    Ok((
        img,
        GroundTruth {
            signal,
            fiducials,
            skew_deg: spec.distortions.rotation_deg,
            trace_region: CropRect::new(margin, margin, n, trace_h),
            baseline_row_px: baseline_row,
            unrotated_width: w0,
            unrotated_height: h0,
        },
    ))
}

/// Samples the exact waveform at `fs` and derives fiducial ground truth.
/// The signal's calibration mirrors what a perfect extraction of the
/// rendered trace region would use.
pub fn synthesize_signal(
    waveform: &WaveformSpec,
    fs: f64,
    lead_label: &str,
    source_id: &str,
) -> (CalibratedSignal, FeaturePointSet) {
    let beats = waveform.beat_times();
    let n = (waveform.duration_s * fs).round() as usize;
    let samples_mv: Vec<f64> = (0..n)
        .map(|k| waveform.value_at(&beats, k as f64 / fs))
        .collect();

    let trace_height_px = TRACE_HEIGHT_MM * fs / PAPER_SPEED_MM_PER_S;
    let signal = CalibratedSignal {
        schema_version: CalibratedSignal::SCHEMA_VERSION,
        lead_label: lead_label.to_string(),
        sample_period_s: 1.0 / fs,
        samples_mv,
        source_id: source_id.to_string(),
        calibration: CalibrationParams {
            trace_height_px,
            physical_height_cm: TRACE_HEIGHT_MM / 10.0,
            gain_mm_per_mv: GAIN_MM_PER_MV,
            paper_speed_mm_per_s: PAPER_SPEED_MM_PER_S,
            baseline_row_px: Some(trace_height_px / 2.0),
        },
    };
    (signal, true_fiducials(waveform, &beats))
}

/// Locates the analytic extremum of the composite waveform inside each
/// beat's search window on a 0.1 ms grid. With a uniform rhythm only the
/// first, interior and last beats differ, so offsets are computed per
/// neighbor pattern and reused.
fn true_fiducials(waveform: &WaveformSpec, beats: &[f64]) -> FeaturePointSet {
    use std::collections::HashMap;

    let mut points = Vec::new();
    let mut memo: HashMap<(bool, bool), Vec<(FeatureLabel, f64)>> = HashMap::new();
    let last = beats.len().saturating_sub(1);
    let rr = waveform.rr_s();

    for (k, &tb) in beats.iter().enumerate() {
        let key = (k == 0, k == last);
        let offsets = memo.entry(key).or_insert_with(|| {
            let refine = |lo: f64, hi: f64, maximize: bool| -> f64 {
                let steps = ((hi - lo) / 1e-4).round() as usize;
                let mut best_t = lo;
                let mut best_v = f64::NEG_INFINITY;
                for i in 0..=steps {
                    let t = lo + i as f64 * 1e-4;
                    let v = waveform.value_at(beats, tb + t);
                    let v = if maximize { v } else { -v };
                    if v > best_v {
                        best_v = v;
                        best_t = t;
                    }
                }
                best_t
            };
            let t_end = if k == last { 0.4 } else { 0.4f64.min(0.7 * rr) };
            vec![
                (FeatureLabel::R, refine(-0.04, 0.04, true)),
                (FeatureLabel::P, refine(-0.30, -0.08, true)),
                (FeatureLabel::Q, refine(-0.08, 0.0, false)),
                (FeatureLabel::S, refine(0.0, 0.08, false)),
                (FeatureLabel::T, refine(0.08, t_end, true)),
            ]
        });
        for &(label, off) in offsets.iter() {
            let t = tb + off;
            if t >= 0.0 && t <= waveform.duration_s {
                points.push(FeaturePoint { time_s: t, label });
            }
        }
    }
    FeaturePointSet::new(points)
}

fn draw_grid(img: &mut RasterImage, paper: &PaperSpec) {
    let minor = (paper.grid_minor_mm * paper.px_per_mm).round().max(1.0) as u32;
    let major = (paper.grid_major_mm * paper.px_per_mm).round().max(1.0) as u32;
    for y in 0..img.height() {
        for x in 0..img.width() {
            let color = if x % major == 0 || y % major == 0 {
                Some(paper.major_rgb)
            } else if x % minor == 0 || y % minor == 0 {
                Some(paper.minor_rgb)
            } else {
                None
            };
            if let Some(rgb) = color {
                img.set_pixel(x, y, rgb);
            }
        }
    }
}

/// Plots the curve one column per sample, connecting neighbor midpoints so
/// the per-column ink span stays centered on the sample value.
fn draw_curve(
    img: &mut RasterImage,
    samples_mv: &[f64],
    margin: u32,
    baseline_row: f64,
    paper: &PaperSpec,
) {
    let px_per_mv = GAIN_MM_PER_MV * paper.px_per_mm;
    let rows: Vec<f64> = samples_mv
        .iter()
        .map(|mv| baseline_row - mv * px_per_mv)
        .collect();
    let half_stroke = paper.stroke_width_px / 2.0;
    for (c, &row) in rows.iter().enumerate() {
        let prev = if c > 0 { rows[c - 1] } else { row };
        let next = if c + 1 < rows.len() { rows[c + 1] } else { row };
        let m0 = (prev + row) / 2.0;
        let m1 = (row + next) / 2.0;
        let lo = m0.min(m1).min(row) - half_stroke;
        let hi = m0.max(m1).max(row) + half_stroke;
        let x = margin + c as u32;
        let y0 = (lo.round() as i64).max(0);
        let y1 = (hi.round() as i64).min(img.height() as i64 - 1);
        for y in y0..=y1 {
            img.set_pixel(x, y as u32, paper.trace_rgb);
        }
    }
}

fn apply_lighting(img: &mut RasterImage, strength: f64) {
    let w = img.width();
    for y in 0..img.height() {
        for x in 0..w {
            let factor = 1.0 - strength * x as f64 / (w - 1).max(1) as f64;
            let px = img.pixel(x, y);
            img.set_pixel(
                x,
                y,
                [
                    (px[0] as f64 * factor).round() as u8,
                    (px[1] as f64 * factor).round() as u8,
                    (px[2] as f64 * factor).round() as u8,
                ],
            );
        }
    }
}

fn apply_noise(img: &mut RasterImage, sd: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("positive noise sd");
    for y in 0..img.height() {
        for x in 0..img.width() {
            let n: f64 = normal.sample(&mut rng);
            let px = img.pixel(x, y);
            let shift = |c: u8| (c as f64 + n).round().clamp(0.0, 255.0) as u8;
            img.set_pixel(x, y, [shift(px[0]), shift(px[1]), shift(px[2])]);
        }
    }
}
