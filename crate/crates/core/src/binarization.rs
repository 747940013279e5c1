//! Otsu thresholding and linear-structuring-element artifact removal.

use crate::imaging::GrayImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BinarizationError {
    #[error("histogram mass sits in a single bin; no threshold separates it")]
    DegenerateHistogram,
}

/// 256-bin gray-level histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    counts: [u64; 256],
    total: u64,
}

impl Histogram256 {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        let total = counts.iter().sum();
        Histogram256 { counts, total }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Binary ink mask; `true` is ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, mask: Vec<bool>) -> Self {
        assert_eq!(
            mask.len(),
            width as usize * height as usize,
            "mask length must equal width * height"
        );
        BinaryImage {
            width,
            height,
            mask,
        }
    }

    pub fn blank(width: u32, height: u32) -> Self {
        BinaryImage {
            width,
            height,
            mask: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_ink(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width as usize + x as usize]
    }

    pub fn set_ink(&mut self, x: u32, y: u32, ink: bool) {
        self.mask[y as usize * self.width as usize + x as usize] = ink;
    }

    pub fn ink_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Short rasterized line segment used as a morphology probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuringElement {
    pub length: u32,
    pub angle_deg: f64,
}

impl StructuringElement {
    pub fn line(length: u32, angle_deg: f64) -> Self {
        assert!(length >= 2, "structuring element length must be >= 2");
        StructuringElement { length, angle_deg }
    }

    /// Bresenham rasterization of the segment, anchored at index
    /// `length / 2` so the anchor pixel is part of the element.
    pub fn offsets(&self) -> Vec<(i32, i32)> {
        let rad = self.angle_deg.to_radians();
        let (ux, uy) = (rad.cos(), -rad.sin());
        let anchor = (self.length / 2) as i64;
        let mut out = Vec::with_capacity(self.length as usize);
        for i in 0..self.length as i64 {
            let t = (i - anchor) as f64;
            let (dx, dy) = if ux.abs() >= uy.abs() {
                let step = if ux < 0.0 { -1.0 } else { 1.0 };
                (t * step, (t * uy / ux.abs()).round())
            } else {
                let step = if uy < 0.0 { -1.0 } else { 1.0 };
                ((t * ux / uy.abs()).round(), t * step)
            };
            out.push((dx as i32, dy as i32));
        }
        out
    }
}

/// Counts pixels per gray level.
pub fn histogram(img: &GrayImage) -> Histogram256 {
    let mut counts = [0u64; 256];
    for &v in img.pixels() {
        counts[v as usize] += 1;
    }
    Histogram256 {
        counts,
        total: img.pixels().len() as u64,
    }
}

/// Otsu's threshold: the gray level `t` maximizing the between-class
/// variance of the split `{<= t} / {> t}`, smallest `t` on ties.
///
/// The class sums are exact integers, so the score comparison is
/// reproducible bit-for-bit by any route that uses the same split.
pub fn otsu_threshold(hist: &Histogram256) -> Result<u8, BinarizationError> {
    let mut best: Option<(u8, f64)> = None;
    let mut n0: u64 = 0;
    let mut s0: u64 = 0;
    let total = hist.total;
    let total_sum: u64 = hist
        .counts
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u64 * c)
        .sum();
    for t in 0..=255u16 {
        n0 += hist.counts[t as usize];
        s0 += t as u64 * hist.counts[t as usize];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        // sigma_b^2 = w0 w1 (mu0 - mu1)^2, up to the constant factor 1/total^2.
        let cross = s0 as i128 * n1 as i128 - s1 as i128 * n0 as i128;
        let score = (cross as f64) * (cross as f64) / (n0 as f64 * n1 as f64);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((t as u8, score));
        }
    }
    best.map(|(t, _)| t)
        .ok_or(BinarizationError::DegenerateHistogram)
}

/// Dark-on-light binarization: ink iff gray value <= threshold.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    let mask = img.pixels().iter().map(|&v| v <= threshold).collect();
    BinaryImage {
        width: img.width(),
        height: img.height(),
        mask,
    }
}

/// Morphological opening (erosion then dilation) with one structuring
/// element. Out-of-bounds pixels count as background.
pub fn open_with(bin: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let offsets = se.offsets();
    let w = bin.width as i64;
    let h = bin.height as i64;
    let stride = bin.width as usize;

    // Erosion: survives iff every SE pixel lands on ink.
    let mut eroded: Vec<(i64, i64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !bin.mask[y as usize * stride + x as usize] {
                continue;
            }
            let fits = offsets.iter().all(|&(dx, dy)| {
                let px = x + dx as i64;
                let py = y + dy as i64;
                px >= 0 && px < w && py >= 0 && py < h && bin.mask[py as usize * stride + px as usize]
            });
            if fits {
                eroded.push((x, y));
            }
        }
    }

    // Dilation scattered from the sparse eroded set.
    let mut out = vec![false; bin.mask.len()];
    for (x, y) in eroded {
        for &(dx, dy) in &offsets {
            let px = x + dx as i64;
            let py = y + dy as i64;
            if px >= 0 && px < w && py >= 0 && py < h {
                out[py as usize * stride + px as usize] = true;
            }
        }
    }
    BinaryImage {
        width: bin.width,
        height: bin.height,
        mask: out,
    }
}

/// Removes ink that no rotated copy of a `se_length`-pixel line fits into:
/// the union over angles 0, `angle_step_deg`, ... < 180 of the opening of
/// the mask with a linear structuring element at that angle.
pub fn remove_artifacts(bin: &BinaryImage, se_length: u32, angle_step_deg: f64) -> BinaryImage {
    assert!(
        angle_step_deg > 0.0 && angle_step_deg <= 90.0,
        "angle_step_deg must be in (0, 90]"
    );
    let mut union = vec![false; bin.mask.len()];
    let mut angle = 0.0;
    while angle < 180.0 {
        let opened = open_with(bin, &StructuringElement::line(se_length, angle));
        for (u, o) in union.iter_mut().zip(opened.mask) {
            *u |= o;
        }
        angle += angle_step_deg;
    }
    BinaryImage {
        width: bin.width,
        height: bin.height,
        mask: union,
    }
}
