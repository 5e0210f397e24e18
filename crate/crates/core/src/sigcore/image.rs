//! Grayscale conversion and image resizing.
//!
//! Resizing is separable and centre-aligned. When shrinking, the kernel is
//! stretched by the shrink factor so every source pixel contributes (the usual
//! antialiased `imresize` behaviour); when enlarging it is plain interpolation.

use super::spectrogram::{resample_axis, Axes, Scale, Spectrogram};
use crate::error::{Error, Result};

pub const MIN_IMAGE_SIDE: usize = 8;

/// Default display floor below the peak, in dB.
pub const DEFAULT_DYN_RANGE_DB: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Bicubic,
}

impl Interpolation {
    fn support(self) -> f64 {
        match self {
            Interpolation::Bilinear => 1.0,
            Interpolation::Bicubic => 2.0,
        }
    }

    fn kernel(self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            Interpolation::Bilinear => (1.0 - x).max(0.0),
            Interpolation::Bicubic => {
                // Keys, a = -0.5
                const A: f64 = -0.5;
                if x < 1.0 {
                    ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
                } else if x < 2.0 {
                    (((x - 5.0) * x + 8.0) * x - 4.0) * A
                } else {
                    0.0
                }
            }
        }
    }
}

/// Per-output-sample (first source index, weights).
fn resample_weights(src: usize, dst: usize, interp: Interpolation) -> Vec<(usize, Vec<f64>)> {
    let scale = dst as f64 / src as f64;
    let stretch = if scale < 1.0 { 1.0 / scale } else { 1.0 };
    let support = interp.support() * stretch;
    (0..dst)
        .map(|i| {
            let centre = (i as f64 + 0.5) / scale - 0.5;
            let lo = ((centre - support).floor() as isize + 1).max(0) as usize;
            let hi = ((centre + support).ceil() as isize - 1).min(src as isize - 1) as usize;
            let mut w: Vec<f64> = (lo..=hi)
                .map(|j| interp.kernel((j as f64 - centre) / stretch))
                .collect();
            let sum: f64 = w.iter().sum();
            if sum != 0.0 {
                w.iter_mut().for_each(|x| *x /= sum);
            }
            (lo, w)
        })
        .collect()
}

/// Resize a row-major grid. Values are not clamped.
pub fn resize_grid(
    values: &[f64],
    rows: usize,
    cols: usize,
    out_rows: usize,
    out_cols: usize,
    interp: Interpolation,
) -> Vec<f64> {
    if rows == out_rows && cols == out_cols {
        return values.to_vec();
    }
    let col_w = resample_weights(cols, out_cols, interp);
    let mut horiz = vec![0.0; rows * out_cols];
    for r in 0..rows {
        let src = &values[r * cols..(r + 1) * cols];
        for (c, (lo, w)) in col_w.iter().enumerate() {
            horiz[r * out_cols + c] = w.iter().zip(&src[*lo..]).map(|(a, b)| a * b).sum();
        }
    }
    let row_w = resample_weights(rows, out_rows, interp);
    let mut out = vec![0.0; out_rows * out_cols];
    for (r, (lo, w)) in row_w.iter().enumerate() {
        for (k, wk) in w.iter().enumerate() {
            let src = &horiz[(lo + k) * out_cols..(lo + k + 1) * out_cols];
            let dst = &mut out[r * out_cols..(r + 1) * out_cols];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += wk * s);
        }
    }
    out
}

/// Resize a spectrogram, rescaling axes. Negative interpolation overshoot is
/// clipped at zero so the result stays a valid spectrogram.
pub fn resize(s: &Spectrogram, out_rows: usize, out_cols: usize, interp: Interpolation) -> Spectrogram {
    let mut values = resize_grid(s.values(), s.rows(), s.cols(), out_rows, out_cols, interp);
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    let axes = s.axes().map(|a| Axes {
        freq_hz: resample_axis(&a.freq_hz, out_rows),
        time_s: resample_axis(&a.time_s, out_cols),
    });
    Spectrogram::from_parts(out_rows, out_cols, values, axes, s.scale())
}

/// dB-compress, clip to `dyn_range_db` below the peak, map to `[0, 1]` and
/// resize to `out_rows × out_cols`; the result is renormalized so its maximum
/// is exactly 1.
///
/// An all-zero input yields an all-zero image. Inputs already on the
/// grayscale scale are only resized and renormalized, which makes the
/// operation idempotent for a fixed target size.
pub fn to_grayscale_image(
    s: &Spectrogram,
    out_rows: usize,
    out_cols: usize,
    dyn_range_db: f64,
) -> Result<Spectrogram> {
    if out_rows < MIN_IMAGE_SIDE || out_cols < MIN_IMAGE_SIDE {
        return Err(Error::param(format!(
            "output image {out_rows}x{out_cols} is smaller than {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}"
        )));
    }
    if !(dyn_range_db.is_finite() && dyn_range_db > 0.0) {
        return Err(Error::param(format!(
            "dynamic range must be positive, got {dyn_range_db}"
        )));
    }
    let mut gray = s.clone().with_scale(Scale::Grayscale);
    let peak = s.max();
    if s.scale() == Scale::Power && peak > 0.0 {
        gray.map_values(|v| {
            if v <= 0.0 {
                0.0
            } else {
                let db = 10.0 * (v / peak).log10();
                ((db + dyn_range_db) / dyn_range_db).clamp(0.0, 1.0)
            }
        });
    }
    let mut out = resize(&gray, out_rows, out_cols, Interpolation::Bilinear);
    let m = out.max();
    if m > 0.0 {
        out.map_values(|v| v / m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize) -> Spectrogram {
        let v = (0..rows * cols).map(|i| 1.0 + i as f64).collect();
        Spectrogram::new(rows, cols, v).unwrap()
    }

    #[test]
    fn constant_input_maps_to_one() {
        let s = Spectrogram::new(20, 30, vec![3.7; 600]).unwrap();
        let g = to_grayscale_image(&s, 10, 10, 45.0).unwrap();
        assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_input_maps_to_zero() {
        let g = to_grayscale_image(&Spectrogram::zeros(20, 30), 16, 16, 45.0).unwrap();
        assert!(g.is_all_zero());
        assert_eq!(g.shape(), (16, 16));
        assert_eq!(g.scale(), Scale::Grayscale);
    }

    #[test]
    fn too_small_target_rejected() {
        assert!(to_grayscale_image(&ramp(10, 10), 7, 10, 45.0).is_err());
        assert!(to_grayscale_image(&ramp(10, 10), 10, 10, 0.0).is_err());
    }

    #[test]
    fn db_floor_clips_to_zero() {
        // 1e-6 of peak is 60 dB down: below a 45 dB floor.
        let s = Spectrogram::new(1, 8, vec![1.0, 1e-6, 1.0, 1e-6, 1.0, 1e-6, 1.0, 1e-6]).unwrap();
        let s8 = Spectrogram::new(8, 8, [s.values(); 8].concat()).unwrap();
        let g = to_grayscale_image(&s8, 8, 8, 45.0).unwrap();
        assert_eq!(g.get(0, 1), 0.0);
        assert_eq!(g.get(0, 0), 1.0);
        // 10 dB down maps to 35/45.
        let s8 = Spectrogram::new(8, 8, (0..64).map(|i| if i % 2 == 0 { 1.0 } else { 0.1 }).collect()).unwrap();
        let g = to_grayscale_image(&s8, 8, 8, 45.0).unwrap();
        assert!((g.get(0, 1) - 35.0 / 45.0).abs() < 1e-12);
    }

    #[test]
    fn identity_resize_is_exact() {
        let s = ramp(9, 11);
        let r = resize(&s, 9, 11, Interpolation::Bilinear);
        assert_eq!(r.values(), s.values());
    }

    #[test]
    fn shrinking_keeps_thin_lines() {
        // A one-row line in a 1024-row image must survive a 10x shrink.
        let mut v = vec![0.0; 1024 * 4];
        for c in 0..4 {
            v[601 * 4 + c] = 1.0;
        }
        let s = Spectrogram::new(1024, 4, v).unwrap();
        let r = resize(&s, 100, 4, Interpolation::Bilinear);
        assert!(r.max() > 0.03);
        let total: f64 = r.values().iter().sum();
        // Mass is conserved up to the discretization of the stretched kernel.
        assert!((total / (4.0 * 100.0 / 1024.0) - 1.0).abs() < 0.02, "{total}");
    }

    #[test]
    fn axes_follow_resize() {
        let s = ramp(4, 4)
            .with_axes(Axes {
                freq_hz: vec![-2.0, -1.0, 0.0, 1.0],
                time_s: vec![0.5, 1.5, 2.5, 3.5],
            })
            .unwrap();
        let r = resize(&s, 8, 2, Interpolation::Bilinear);
        let a = r.axes().unwrap();
        assert_eq!(a.time_s, vec![1.0, 3.0]);
        assert_eq!(a.freq_hz[0], -2.25);
        assert_eq!(a.freq_hz[7], 1.25);
    }

    #[test]
    fn bicubic_reproduces_linear_ramps() {
        let v: Vec<f64> = (0..16 * 16).map(|i| (i % 16) as f64).collect();
        let out = resize_grid(&v, 16, 16, 32, 32, Interpolation::Bicubic);
        // Interior samples of a linear ramp are reproduced exactly by Keys' kernel.
        let x = 10.0;
        let expected = (x + 0.5) / 2.0 - 0.5;
        assert!((out[5 * 32 + 10] - expected).abs() < 1e-12);
    }
}
