//! Direct FIR filtering and Savitzky-Golay least-squares smoothing.

use super::AnalysisError;
use crate::extraction::CalibratedSignal;
use nalgebra::{DMatrix, DVector};

/// Direct-form FIR filter: `y[n] = sum_k h[k] x[n-k]`, with the input
/// extended by edge-value replication so the output length matches.
pub fn fir_filter(
    sig: &CalibratedSignal,
    coefficients: &[f64],
) -> Result<CalibratedSignal, AnalysisError> {
    if coefficients.is_empty() {
        return Err(AnalysisError::EmptyFilter);
    }
    let x = &sig.samples_mv;
    let n = x.len();
    let samples_mv = (0..n)
        .map(|i| {
            coefficients
                .iter()
                .enumerate()
                .map(|(k, h)| {
                    let idx = i as i64 - k as i64;
                    h * x[idx.clamp(0, n as i64 - 1) as usize]
                })
                .sum()
        })
        .collect();
    Ok(CalibratedSignal {
        samples_mv,
        ..sig.clone()
    })
}

/// Convolution kernel that evaluates the least-squares polynomial of the
/// given order at the center of an odd window. Positions are
/// `-h..=h` with `h = window_length / 2`.
pub fn savgol_kernel(window_length: usize, poly_order: usize) -> Vec<f64> {
    assert!(
        window_length % 2 == 1 && window_length >= 3,
        "window_length must be odd and >= 3"
    );
    assert!(
        poly_order < window_length,
        "poly_order must be below window_length"
    );
    let h = (window_length / 2) as f64;
    let design = DMatrix::from_fn(window_length, poly_order + 1, |i, j| {
        (i as f64 - h).powi(j as i32)
    });
    let pinv = design
        .pseudo_inverse(1e-12)
        .expect("Vandermonde design matrix has full column rank");
    pinv.row(0).iter().copied().collect()
}

/// Savitzky-Golay smoothing. The interior is the [`savgol_kernel`]
/// convolution; near the edges the polynomial is refit on the truncated
/// window and evaluated at the edge position.
pub fn savgol_filter(
    sig: &CalibratedSignal,
    window_length: usize,
    poly_order: usize,
) -> Result<CalibratedSignal, AnalysisError> {
    assert!(
        window_length % 2 == 1 && window_length >= 3,
        "window_length must be odd and >= 3"
    );
    assert!(
        poly_order < window_length,
        "poly_order must be below window_length"
    );
    let x = &sig.samples_mv;
    let n = x.len();
    if n < window_length {
        return Err(AnalysisError::SignalTooShort(format!(
            "{n} samples but the filter window needs {window_length}"
        )));
    }
    let h = window_length / 2;
    let kernel = savgol_kernel(window_length, poly_order);
    let mut out = vec![0.0f64; n];
    for i in h..n - h {
        out[i] = kernel
            .iter()
            .enumerate()
            .map(|(k, c)| c * x[i - h + k])
            .sum();
    }
    for i in (0..h).chain(n - h..n) {
        out[i] = fit_truncated(x, i, h, poly_order);
    }
    Ok(CalibratedSignal {
        samples_mv: out,
        ..sig.clone()
    })
}

/// Least-squares polynomial fit on the window clipped to the signal,
/// evaluated at position `i`. The order is capped so the system stays
/// determined on very short clips.
fn fit_truncated(x: &[f64], i: usize, h: usize, poly_order: usize) -> f64 {
    let lo = i.saturating_sub(h);
    let hi = (i + h).min(x.len() - 1);
    let count = hi - lo + 1;
    let order = poly_order.min(count - 1);
    let design = DMatrix::from_fn(count, order + 1, |r, j| {
        ((lo + r) as f64 - i as f64).powi(j as i32)
    });
    let rhs = DVector::from_iterator(count, x[lo..=hi].iter().copied());
    let beta = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .expect("SVD least-squares solve of a small Vandermonde system");
    beta[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{CalibrationParams, CalibratedSignal};

    fn signal(samples: Vec<f64>) -> CalibratedSignal {
        CalibratedSignal {
            schema_version: 1,
            lead_label: "II".into(),
            sample_period_s: 0.004,
            samples_mv: samples,
            source_id: "test".into(),
            calibration: CalibrationParams::new(350.0),
        }
    }

    /// Independent normal-equations oracle for the interior kernel:
    /// solves (A^T A) beta = A^T e_i per window column with Gauss-Jordan.
    fn savgol_kernel_normal_equations(window: usize, order: usize) -> Vec<f64> {
        let h = (window / 2) as f64;
        let m = order + 1;
        let a: Vec<Vec<f64>> = (0..window)
            .map(|i| (0..m).map(|j| (i as f64 - h).powi(j as i32)).collect())
            .collect();
        // kernel[i] = (pinv row 0)[i] = e0^T (A^T A)^{-1} A^T e_i
        let mut ata = vec![vec![0.0; m]; m];
        for r in 0..m {
            for c in 0..m {
                ata[r][c] = (0..window).map(|i| a[i][r] * a[i][c]).sum();
            }
        }
        let inv = invert(&ata);
        (0..window)
            .map(|i| (0..m).map(|j| inv[0][j] * a[i][j]).sum())
            .collect()
    }

    fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut aug: Vec<Vec<f64>> = m
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            for row in 0..n {
                if row != col {
                    let f = aug[row][col];
                    for k in 0..2 * n {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
        aug.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn fir_identity_tap() {
        let sig = signal(vec![1.0, -2.0, 3.5, 0.0]);
        let out = fir_filter(&sig, &[1.0]).unwrap();
        assert_eq!(out.samples_mv, sig.samples_mv);
    }

    #[test]
    fn fir_dc_gain_one_on_constant() {
        let sig = signal(vec![2.5; 10]);
        let out = fir_filter(&sig, &[0.5, 0.5]).unwrap();
        for v in out.samples_mv {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn fir_difference_of_ramp_is_constant() {
        // Direct convolution by hand: x[n]-x[n-1] on x[n]=n is 1 except at
        // the replicated left edge.
        let sig = signal((0..8).map(|n| n as f64).collect());
        let out = fir_filter(&sig, &[1.0, -1.0]).unwrap();
        assert_eq!(out.samples_mv[0], 0.0);
        for &v in &out.samples_mv[1..] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fir_empty_taps_is_error() {
        assert!(matches!(
            fir_filter(&signal(vec![1.0]), &[]),
            Err(AnalysisError::EmptyFilter)
        ));
    }

    #[test]
    fn fir_linearity() {
        let x = signal(vec![0.3, -1.0, 2.0, 0.7, -0.2, 1.1]);
        let y = signal(vec![1.0, 0.5, -0.5, 2.2, 0.0, -1.3]);
        let taps = [0.25, 0.5, 0.25];
        let (a, b) = (2.0, -3.0);
        let combo = signal(
            x.samples_mv
                .iter()
                .zip(&y.samples_mv)
                .map(|(xv, yv)| a * xv + b * yv)
                .collect(),
        );
        let lhs = fir_filter(&combo, &taps).unwrap();
        let fx = fir_filter(&x, &taps).unwrap();
        let fy = fir_filter(&y, &taps).unwrap();
        for i in 0..lhs.samples_mv.len() {
            let rhs = a * fx.samples_mv[i] + b * fy.samples_mv[i];
            assert!((lhs.samples_mv[i] - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn savgol_kernel_5_2_matches_published_coefficients() {
        let kernel = savgol_kernel(5, 2);
        let expected = [-3.0 / 35.0, 12.0 / 35.0, 17.0 / 35.0, 12.0 / 35.0, -3.0 / 35.0];
        for (k, e) in kernel.iter().zip(expected) {
            assert!((k - e).abs() < 1e-12, "kernel {kernel:?}");
        }
    }

    #[test]
    fn savgol_kernel_matches_normal_equations_oracle() {
        for (w, o) in [(5, 2), (7, 3), (9, 2), (15, 3)] {
            let fast = savgol_kernel(w, o);
            let oracle = savgol_kernel_normal_equations(w, o);
            for (a, b) in fast.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10, "window {w} order {o}");
            }
        }
    }

    #[test]
    fn savgol_kernel_is_symmetric_and_sums_to_one() {
        for (w, o) in [(5, 2), (7, 3), (11, 4), (15, 3)] {
            let k = savgol_kernel(w, o);
            let sum: f64 = k.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "window {w} order {o} sum {sum}");
            for i in 0..w / 2 {
                assert!((k[i] - k[w - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn savgol_constant_unchanged() {
        let sig = signal(vec![1.5; 20]);
        let out = savgol_filter(&sig, 5, 2).unwrap();
        for v in out.samples_mv {
            assert!((v - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn savgol_reproduces_quadratic_including_edges() {
        let sig = signal((0..25).map(|n| 2.0 * (n * n) as f64 - 3.0 * n as f64 + 1.0).collect());
        let out = savgol_filter(&sig, 7, 2).unwrap();
        for (i, (got, want)) in out.samples_mv.iter().zip(&sig.samples_mv).enumerate() {
            let rel = (got - want).abs() / want.abs().max(1.0);
            assert!(rel < 1e-9, "sample {i}: {got} vs {want}");
        }
    }

    #[test]
    fn savgol_impulse_response_equals_kernel() {
        let mut samples = vec![0.0; 11];
        samples[5] = 1.0;
        let out = savgol_filter(&signal(samples), 5, 2).unwrap();
        let kernel = savgol_kernel(5, 2);
        for (k, c) in kernel.iter().enumerate() {
            assert!((out.samples_mv[3 + k] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn savgol_short_signal_is_error() {
        assert!(matches!(
            savgol_filter(&signal(vec![1.0, 2.0, 3.0]), 5, 2),
            Err(AnalysisError::SignalTooShort(_))
        ));
    }
}
