//! Toolkit for digitizing photographed paper ECG trace reports.
//!
//! The pipeline turns a photograph of an ECG strip into a calibrated
//! millivolt signal and derives beat-level measurements from it:
//!
//! 1. [`imaging`] — decode, grayscale conversion, deskew, crop
//! 2. [`binarization`] — Otsu thresholding and morphological cleanup
//! 3. [`extraction`] — envelope-based curve extraction and calibration
//! 4. [`analysis`] — filtering, R-peak detection, rate/variability, P/Q/S/T
//! 5. [`evaluation`] — synthetic trace generation and detection scoring
//!
//! [`pipeline`] wires stages 1-3 into a single configurable call.

pub mod analysis;
pub mod binarization;
pub mod canonical;
pub mod evaluation;
pub mod extraction;
pub mod imaging;
pub mod pipeline;
