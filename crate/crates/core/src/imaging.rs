//! Photograph handling: decoding, grayscale conversion, deskew and cropping.
//!
//! Angle convention used throughout the crate: a positive angle is a
//! counter-clockwise tilt of the image content as seen by a viewer.
//! Pixel coordinates grow right (x) and down (y).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("failed to decode image: {0}")]
    Decode(String),
    #[error("image has zero width or height")]
    Dimension,
    #[error("no directional structure: projection variance is flat across angles")]
    DegenerateImage,
    #[error("crop rectangle {rect:?} escapes image bounds {width}x{height}")]
    Bounds {
        rect: CropRect,
        width: u32,
        height: u32,
    },
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

/// 8-bit luminance image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

/// Estimated content tilt in degrees plus a peak-sharpness score.
///
/// `confidence` is the ratio of the best projection variance to the mean
/// variance over all candidate angles; values near 1 mean the estimate is
/// barely better than any other angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewEstimate {
    pub angle_deg: f64,
    pub confidence: f64,
}

/// Axis-aligned crop rectangle, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl CropRect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        CropRect { x, y, w, h }
    }

    fn check_inside(&self, width: u32, height: u32) -> Result<(), ImagingError> {
        let ok = self.w >= 1
            && self.h >= 1
            && (self.x as u64 + self.w as u64) <= width as u64
            && (self.y as u64 + self.h as u64) <= height as u64;
        if ok {
            Ok(())
        } else {
            Err(ImagingError::Bounds {
                rect: *self,
                width,
                height,
            })
        }
    }
}

impl RasterImage {
    /// Builds an image from row-major RGB triples.
    ///
    /// Panics if `pixels.len() != width * height` or either dimension is zero.
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(
            pixels.len(),
            width as usize * height as usize,
            "pixel count must equal width * height"
        );
        RasterImage {
            width,
            height,
            pixels,
        }
    }

    /// Solid-color image, mostly useful in tests and the synthetic renderer.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::new(width, height, vec![rgb; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        self.pixels[y as usize * self.width as usize + x as usize] = rgb;
    }

    /// ITU luminance conversion: Y = 0.299 R + 0.587 G + 0.114 B, rounded
    /// half-up. Computed in integer arithmetic, which is exact for these
    /// three-decimal weights.
    pub fn to_grayscale(&self) -> GrayImage {
        let pixels = self
            .pixels
            .iter()
            .map(|&[r, g, b]| {
                let scaled = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
                ((scaled + 500) / 1000) as u8
            })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Rotates content counter-clockwise by `angle_deg` about the image
    /// center, expanding the canvas to hold the rotated content. Bilinear
    /// interpolation; out-of-bounds samples are white.
    pub fn rotate(&self, angle_deg: f64) -> RasterImage {
        let (width, height, pixels) = rotate_grid(
            self.width,
            self.height,
            angle_deg,
            [255u8, 255, 255],
            |x, y| self.pixels[y * self.width as usize + x],
            |quad, wx, wy| {
                let mut out = [0u8; 3];
                for c in 0..3 {
                    out[c] = bilerp(
                        quad[0][c] as f64,
                        quad[1][c] as f64,
                        quad[2][c] as f64,
                        quad[3][c] as f64,
                        wx,
                        wy,
                    );
                }
                out
            },
        );
        RasterImage {
            width,
            height,
            pixels,
        }
    }

    /// Exact sub-grid copy.
    pub fn crop(&self, rect: &CropRect) -> Result<RasterImage, ImagingError> {
        rect.check_inside(self.width, self.height)?;
        let mut pixels = Vec::with_capacity(rect.w as usize * rect.h as usize);
        for row in rect.y..rect.y + rect.h {
            let start = row as usize * self.width as usize + rect.x as usize;
            pixels.extend_from_slice(&self.pixels[start..start + rect.w as usize]);
        }
        Ok(RasterImage {
            width: rect.w,
            height: rect.h,
            pixels,
        })
    }

    /// PNG-encodes the image.
    pub fn encode_png(&self) -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        let img = image::RgbImage::from_raw(self.width, self.height, self.raw_bytes())
            .expect("buffer size matches dimensions");
        img.write_to(&mut buf, image::ImageFormat::Png)
            .expect("in-memory PNG encoding cannot fail");
        buf.into_inner()
    }

    /// JPEG-encodes the image at the given quality (1-100).
    pub fn encode_jpeg(&self, quality: u8) -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        let img = image::RgbImage::from_raw(self.width, self.height, self.raw_bytes())
            .expect("buffer size matches dimensions");
        let encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, quality);
        img.write_with_encoder(encoder)
            .expect("in-memory JPEG encoding cannot fail");
        buf.into_inner()
    }

    fn raw_bytes(&self) -> Vec<u8> {
        let mut raw = Vec::with_capacity(self.pixels.len() * 3);
        for px in &self.pixels {
            raw.extend_from_slice(px);
        }
        raw
    }
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(
            pixels.len(),
            width as usize * height as usize,
            "pixel count must equal width * height"
        );
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    /// See [`RasterImage::rotate`].
    pub fn rotate(&self, angle_deg: f64) -> GrayImage {
        let (width, height, pixels) = rotate_grid(
            self.width,
            self.height,
            angle_deg,
            255u8,
            |x, y| self.pixels[y * self.width as usize + x],
            |quad, wx, wy| {
                bilerp(
                    quad[0] as f64,
                    quad[1] as f64,
                    quad[2] as f64,
                    quad[3] as f64,
                    wx,
                    wy,
                )
            },
        );
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    /// Exact sub-grid copy.
    pub fn crop(&self, rect: &CropRect) -> Result<GrayImage, ImagingError> {
        rect.check_inside(self.width, self.height)?;
        let mut pixels = Vec::with_capacity(rect.w as usize * rect.h as usize);
        for row in rect.y..rect.y + rect.h {
            let start = row as usize * self.width as usize + rect.x as usize;
            pixels.extend_from_slice(&self.pixels[start..start + rect.w as usize]);
        }
        Ok(GrayImage {
            width: rect.w,
            height: rect.h,
            pixels,
        })
    }
}

/// Box-mean downsampling by an integer factor. Skew angles are
/// scale-invariant, so estimation can run on a reduced image.
pub fn downsample_box(img: &GrayImage, factor: u32) -> GrayImage {
    assert!(factor >= 1);
    if factor == 1 {
        return img.clone();
    }
    let out_w = img.width.div_ceil(factor);
    let out_h = img.height.div_ceil(factor);
    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize);
    for by in 0..out_h {
        for bx in 0..out_w {
            let mut sum = 0u32;
            let mut n = 0u32;
            for y in by * factor..((by + 1) * factor).min(img.height) {
                for x in bx * factor..((bx + 1) * factor).min(img.width) {
                    sum += img.pixel(x, y) as u32;
                    n += 1;
                }
            }
            pixels.push(((sum + n / 2) / n) as u8);
        }
    }
    GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    }
}

/// Decodes a PNG or JPEG byte stream. 16-bit sources are scaled down to
/// 8-bit and alpha is composited over white.
pub fn load_image(data: &[u8]) -> Result<RasterImage, ImagingError> {
    let decoded =
        image::load_from_memory(data).map_err(|e| ImagingError::Decode(e.to_string()))?;
    if decoded.width() == 0 || decoded.height() == 0 {
        return Err(ImagingError::Dimension);
    }
    let rgba = decoded.to_rgba8();
    let pixels = rgba
        .pixels()
        .map(|p| {
            let [r, g, b, a] = p.0;
            let alpha = a as f64 / 255.0;
            let over = |c: u8| (c as f64 * alpha + 255.0 * (1.0 - alpha)).round() as u8;
            [over(r), over(g), over(b)]
        })
        .collect();
    Ok(RasterImage {
        width: rgba.width(),
        height: rgba.height(),
        pixels,
    })
}

/// Scans a symmetric angle grid and returns the candidate whose ink
/// projection profile has maximal variance.
///
/// The profile at angle a bins each pixel's ink weight (255 - gray) by its
/// row coordinate after counter-rotating by a; the profile value is mean
/// ink per bin, so a structureless image scores identically (zero) at every
/// angle and is reported as [`ImagingError::DegenerateImage`].
pub fn estimate_skew(
    img: &GrayImage,
    search_half_range_deg: f64,
    step_deg: f64,
) -> Result<SkewEstimate, ImagingError> {
    assert!(
        search_half_range_deg > 0.0 && search_half_range_deg <= 45.0,
        "search_half_range_deg must be in (0, 45]"
    );
    assert!(
        step_deg > 0.0 && step_deg <= search_half_range_deg,
        "step_deg must be in (0, search_half_range_deg]"
    );
    let n = (2.0 * search_half_range_deg / step_deg).round() as usize;
    let angles: Vec<f64> = (0..=n)
        .map(|i| -search_half_range_deg + i as f64 * step_deg)
        .collect();
    scan_angles(img, &angles)
}

/// Two-stage (coarse then fine) variant of [`estimate_skew`]; the fine pass
/// re-scans a band of one coarse step around the coarse winner.
pub fn estimate_skew_two_stage(
    img: &GrayImage,
    search_half_range_deg: f64,
    coarse_step_deg: f64,
    fine_step_deg: f64,
) -> Result<SkewEstimate, ImagingError> {
    let coarse = estimate_skew(img, search_half_range_deg, coarse_step_deg)?;
    let lo = (coarse.angle_deg - coarse_step_deg).max(-search_half_range_deg);
    let hi = (coarse.angle_deg + coarse_step_deg).min(search_half_range_deg);
    let n = ((hi - lo) / fine_step_deg).round() as usize;
    let angles: Vec<f64> = (0..=n).map(|i| lo + i as f64 * fine_step_deg).collect();
    scan_angles(img, &angles)
}

fn scan_angles(img: &GrayImage, angles: &[f64]) -> Result<SkewEstimate, ImagingError> {
    let w = img.width as usize;
    let h = img.height as usize;
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let diag = ((w as f64).hypot(h as f64)).ceil() as usize + 3;
    let offset = diag as f64 / 2.0;
    let pixels = img.pixels();

    let mut mass = vec![0.0f64; diag];
    let mut count = vec![0u32; diag];
    let mut variances = Vec::with_capacity(angles.len());
    for &angle in angles {
        let rad = angle.to_radians();
        let (sin, cos) = rad.sin_cos();
        mass.fill(0.0);
        count.fill(0);
        for y in 0..h {
            // bin(x) = (x - cx) sin + (y - cy) cos + offset, advanced
            // incrementally along the row.
            let mut pos = (y as f64 - cy) * cos - cx * sin + offset;
            for &v in &pixels[y * w..(y + 1) * w] {
                let bin = pos.round() as usize;
                mass[bin] += (255 - v) as f64;
                count[bin] += 1;
                pos += sin;
            }
        }
        // Mean ink per projected row; variance over occupied bins. Empty
        // rows dilute nothing, so a structureless image scores zero at
        // every angle.
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut occupied = 0u32;
        for (m, &c) in mass.iter().zip(&count) {
            if c > 0 {
                let mean_ink = m / c as f64;
                sum += mean_ink;
                sum_sq += mean_ink * mean_ink;
                occupied += 1;
            }
        }
        let nbins = occupied as f64;
        let mean = sum / nbins;
        variances.push((sum_sq / nbins - mean * mean).max(0.0));
    }

    let (best_idx, &best_var) = variances
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one candidate angle");
    let min_var = variances.iter().cloned().fold(f64::INFINITY, f64::min);
    if best_var <= 1e-9 || (best_var - min_var) <= 1e-9 * best_var {
        return Err(ImagingError::DegenerateImage);
    }
    let mean_var = variances.iter().sum::<f64>() / variances.len() as f64;
    Ok(SkewEstimate {
        angle_deg: angles[best_idx],
        confidence: best_var / mean_var,
    })
}

fn bilerp(v00: f64, v10: f64, v01: f64, v11: f64, wx: f64, wy: f64) -> u8 {
    let top = v00 * (1.0 - wx) + v10 * wx;
    let bottom = v01 * (1.0 - wx) + v11 * wx;
    let v = top * (1.0 - wy) + bottom * wy;
    v.round().clamp(0.0, 255.0) as u8
}

/// Shared rotation kernel. `sample` reads a source pixel, `blend` mixes the
/// four neighbors given fractional weights.
fn rotate_grid<P: Copy>(
    width: u32,
    height: u32,
    angle_deg: f64,
    white: P,
    sample: impl Fn(usize, usize) -> P,
    blend: impl Fn([P; 4], f64, f64) -> P,
) -> (u32, u32, Vec<P>) {
    if angle_deg == 0.0 {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height as usize {
            for x in 0..width as usize {
                pixels.push(sample(x, y));
            }
        }
        return (width, height, pixels);
    }

    let rad = angle_deg.to_radians();
    let (sin, cos) = rad.sin_cos();
    // Expand the canvas to the rotated pixel extent; the epsilon absorbs
    // floating-point noise at exact multiples of 90 degrees.
    let extent_w = (width as f64 - 1.0) * cos.abs() + (height as f64 - 1.0) * sin.abs();
    let extent_h = (width as f64 - 1.0) * sin.abs() + (height as f64 - 1.0) * cos.abs();
    let out_w = ((extent_w - 1e-9).ceil() as u32 + 1).max(1);
    let out_h = ((extent_h - 1e-9).ceil() as u32 + 1).max(1);

    let src_cx = (width as f64 - 1.0) / 2.0;
    let src_cy = (height as f64 - 1.0) / 2.0;
    let dst_cx = (out_w as f64 - 1.0) / 2.0;
    let dst_cy = (out_h as f64 - 1.0) / 2.0;

    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize);
    for y in 0..out_h {
        let dy = y as f64 - dst_cy;
        for x in 0..out_w {
            let dx = x as f64 - dst_cx;
            // Inverse map of the counter-clockwise content rotation.
            let sx = cos * dx - sin * dy + src_cx;
            let sy = sin * dx + cos * dy + src_cy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let wx = sx - x0;
            let wy = sy - y0;
            let fetch = |ix: f64, iy: f64| -> P {
                if ix < 0.0 || iy < 0.0 || ix >= width as f64 || iy >= height as f64 {
                    white
                } else {
                    sample(ix as usize, iy as usize)
                }
            };
            let quad = [
                fetch(x0, y0),
                fetch(x0 + 1.0, y0),
                fetch(x0, y0 + 1.0),
                fetch(x0 + 1.0, y0 + 1.0),
            ];
            pixels.push(blend(quad, wx, wy));
        }
    }
    (out_w, out_h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent integer-arithmetic route for Eq-style luminance.
    fn gray_oracle(r: u8, g: u8, b: u8) -> u8 {
        let total = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
        (total / 1000 + u32::from(total % 1000 >= 500)) as u8
    }

    #[test]
    fn load_1x1_png_identity() {
        let img = RasterImage::new(1, 1, vec![[10, 20, 30]]);
        let decoded = load_image(&img.encode_png()).unwrap();
        assert_eq!(decoded, img);
    }

    #[test]
    fn load_truncated_stream_is_decode_error() {
        let png = RasterImage::filled(4, 4, [1, 2, 3]).encode_png();
        let err = load_image(&png[..png.len() / 2]).unwrap_err();
        assert!(matches!(err, ImagingError::Decode(_)));
    }

    #[test]
    fn load_jpeg_round_trip_near_exact_on_solid_gray() {
        // Encode-then-decode oracle with the reference codec; JPEG is lossy.
        let img = RasterImage::filled(2, 2, [128, 128, 128]);
        let decoded = load_image(&img.encode_jpeg(90)).unwrap();
        assert_eq!(decoded.width(), 2);
        for px in decoded.pixels() {
            for c in 0..3 {
                assert!((px[c] as i32 - 128).abs() <= 2, "channel {c} drifted: {px:?}");
            }
        }
    }

    #[test]
    fn load_composites_alpha_over_white() {
        let mut buf = std::io::Cursor::new(Vec::new());
        image::RgbaImage::from_raw(1, 1, vec![0, 0, 0, 0])
            .unwrap()
            .write_to(&mut buf, image::ImageFormat::Png)
            .unwrap();
        let decoded = load_image(&buf.into_inner()).unwrap();
        assert_eq!(decoded.pixel(0, 0), [255, 255, 255]);
    }

    #[test]
    fn grayscale_neutral_and_primary_values() {
        for v in [0u8, 1, 17, 128, 254, 255] {
            let g = RasterImage::filled(1, 1, [v, v, v]).to_grayscale();
            assert_eq!(g.pixel(0, 0), v, "neutral {v} must map to itself");
        }
        let red = RasterImage::filled(1, 1, [255, 0, 0]).to_grayscale();
        assert_eq!(red.pixel(0, 0), 76); // 0.299 * 255 = 76.245
        let green = RasterImage::filled(1, 1, [0, 255, 0]).to_grayscale();
        assert_eq!(green.pixel(0, 0), 150); // 0.587 * 255 = 149.685
        let blue = RasterImage::filled(1, 1, [0, 0, 255]).to_grayscale();
        assert_eq!(blue.pixel(0, 0), 29); // 0.114 * 255 = 29.07
    }

    #[test]
    fn grayscale_matches_oracle_on_sampled_lattice() {
        for r in (0..=255).step_by(15) {
            for g in (0..=255).step_by(15) {
                for b in (0..=255).step_by(15) {
                    let got = RasterImage::filled(1, 1, [r, g, b])
                        .to_grayscale()
                        .pixel(0, 0);
                    assert_eq!(got, gray_oracle(r, g, b), "rgb ({r},{g},{b})");
                }
            }
        }
    }

    #[test]
    fn crop_center_pixel() {
        let mut img = RasterImage::filled(3, 3, [0, 0, 0]);
        img.set_pixel(1, 1, [9, 9, 9]);
        let out = img.crop(&CropRect::new(1, 1, 1, 1)).unwrap();
        assert_eq!(out.width(), 1);
        assert_eq!(out.pixel(0, 0), [9, 9, 9]);
    }

    #[test]
    fn crop_full_image_is_identity() {
        let img = RasterImage::filled(5, 4, [3, 2, 1]);
        let out = img.crop(&CropRect::new(0, 0, 5, 4)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn crop_out_of_bounds_is_error() {
        let img = GrayImage::filled(4, 4, 0);
        let err = img.crop(&CropRect::new(0, 0, 5, 4)).unwrap_err();
        assert!(matches!(err, ImagingError::Bounds { .. }));
    }

    #[test]
    fn crop_composition_matches_translated_rect() {
        let mut img = GrayImage::filled(8, 8, 0);
        for y in 0..8 {
            for x in 0..8 {
                img.set_pixel(x, y, (y * 8 + x) as u8);
            }
        }
        let a = CropRect::new(2, 1, 5, 6);
        let b = CropRect::new(1, 2, 3, 3);
        let nested = img.crop(&a).unwrap().crop(&b).unwrap();
        let direct = img
            .crop(&CropRect::new(a.x + b.x, a.y + b.y, b.w, b.h))
            .unwrap();
        assert_eq!(nested, direct);
    }

    #[test]
    fn rotate_zero_is_pixel_identical() {
        let mut img = RasterImage::filled(7, 5, [200, 10, 60]);
        img.set_pixel(2, 3, [1, 2, 3]);
        assert_eq!(img.rotate(0.0), img);
    }

    #[test]
    fn rotate_quarter_turn_keeps_center_pixel() {
        let mut img = GrayImage::filled(5, 5, 255);
        img.set_pixel(2, 2, 0);
        let out = img.rotate(90.0);
        assert_eq!(out.width(), 5);
        assert_eq!(out.height(), 5);
        assert_eq!(out.pixel(2, 2), 0);
    }

    fn round_trip_mae(img: &GrayImage) -> f64 {
        let back = img.rotate(3.0).rotate(-3.0);
        let ox = (back.width() - img.width()) / 2;
        let oy = (back.height() - img.height()) / 2;
        let (w, h) = (img.width(), img.height());
        let mut err_sum = 0.0;
        let mut n = 0u64;
        for y in h / 4..3 * h / 4 {
            for x in w / 4..3 * w / 4 {
                err_sum += (back.pixel(x + ox, y + oy) as f64 - img.pixel(x, y) as f64).abs();
                n += 1;
            }
        }
        err_sum / n as f64
    }

    #[test]
    fn rotate_round_trip_small_angle() {
        // Round-trip oracle on rendered traces. Single-pixel grid rules lose
        // roughly half their contrast to double bilinear resampling, which
        // measures just over 7 gray levels of mean error on the default
        // paper; the curve itself (grid drawn white) stays under 3.
        let mut spec = crate::evaluation::SyntheticTraceSpec {
            waveform: crate::evaluation::WaveformSpec {
                duration_s: 4.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let (raster, _) = crate::evaluation::render_synthetic_trace(&spec, 5).unwrap();
        let gridded = round_trip_mae(&raster.to_grayscale());
        assert!(gridded < 8.0, "gridded round-trip error {gridded} too large");

        spec.paper.minor_rgb = [255, 255, 255];
        spec.paper.major_rgb = [255, 255, 255];
        let (raster, _) = crate::evaluation::render_synthetic_trace(&spec, 5).unwrap();
        let trace_only = round_trip_mae(&raster.to_grayscale());
        assert!(
            trace_only < 3.0,
            "trace-only round-trip error {trace_only} too large"
        );
    }

    #[test]
    fn rotation_is_counter_clockwise_for_content() {
        // A pixel right of center must move up (smaller y) under a small
        // positive rotation.
        let mut img = GrayImage::filled(21, 21, 255);
        img.set_pixel(18, 10, 0);
        let out = img.rotate(10.0);
        let (mut bx, mut by, mut best) = (0, 0, 255u8);
        for y in 0..out.height() {
            for x in 0..out.width() {
                if out.pixel(x, y) < best {
                    best = out.pixel(x, y);
                    bx = x;
                    by = y;
                }
            }
        }
        let cx = (out.width() - 1) / 2;
        let cy = (out.height() - 1) / 2;
        assert!(bx > cx, "ink should stay right of center: ({bx},{by})");
        assert!(by < cy, "ink should move up for CCW rotation: ({bx},{by})");
    }

    fn horizontal_line_image() -> GrayImage {
        let mut img = GrayImage::filled(120, 60, 255);
        for x in 5..115 {
            img.set_pixel(x, 30, 0);
            img.set_pixel(x, 31, 0);
        }
        img
    }

    #[test]
    fn skew_zero_on_aligned_lines() {
        let est = estimate_skew(&horizontal_line_image(), 10.0, 0.5).unwrap();
        assert!(
            est.angle_deg.abs() <= 0.5,
            "expected ~0, got {}",
            est.angle_deg
        );
    }

    #[test]
    fn skew_recovers_injected_rotation() {
        // Render-rotate oracle: the generator knows the injected angle.
        let rotated = horizontal_line_image().rotate(3.0);
        let est = estimate_skew(&rotated, 10.0, 0.5).unwrap();
        assert!(
            (est.angle_deg - 3.0).abs() <= 0.5,
            "expected ~3, got {}",
            est.angle_deg
        );
    }

    #[test]
    fn skew_on_uniform_image_is_degenerate() {
        let img = GrayImage::filled(50, 50, 128);
        assert!(matches!(
            estimate_skew(&img, 10.0, 0.5),
            Err(ImagingError::DegenerateImage)
        ));
        let blank = GrayImage::filled(50, 50, 255);
        assert!(matches!(
            estimate_skew(&blank, 10.0, 0.5),
            Err(ImagingError::DegenerateImage)
        ));
    }

    #[test]
    fn skew_recovery_across_range_on_grid_image() {
        // Synthetic grid: horizontal and vertical rules every 12 px.
        let mut img = GrayImage::filled(180, 120, 255);
        for y in (6..120).step_by(12) {
            for x in 0..180 {
                img.set_pixel(x, y, 40);
            }
        }
        for x in (6..180).step_by(12) {
            for y in 0..120 {
                img.set_pixel(x, y, 40);
            }
        }
        let step = 0.5;
        for theta in [-9.0, -4.5, -1.0, 0.0, 2.5, 7.0, 10.0] {
            let rotated = img.rotate(theta);
            let est = estimate_skew(&rotated, 12.0, step).unwrap();
            assert!(
                (est.angle_deg - theta).abs() <= step + 0.25,
                "theta {theta}: estimated {}",
                est.angle_deg
            );
        }
    }
}
