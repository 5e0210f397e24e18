//! Histogram-driven CLEAN clutter suppression.
//!
//! A global intensity cutoff α is read off the image histogram where the
//! normalized counts drop off the noise mound. Each column then keeps only
//! as many iteratively extracted peaks as it has pixels at or above α;
//! everything else is zeroed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::Spectrogram;

/// Point-spread kernel along frequency, centred on the extracted peak.
const PSF: [f64; 3] = [0.5, 1.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcleanParams {
    /// Normalized histogram count marking the plateau.
    pub plateau_count_threshold: f64,
    pub hist_bins: usize,
    /// Fraction of the point-spread kernel removed per extracted peak.
    pub psf_fraction: f64,
    /// Decimation applied to the image before histogramming.
    pub downsample_factor: usize,
}

impl Default for EcleanParams {
    fn default() -> Self {
        EcleanParams {
            plateau_count_threshold: 0.1,
            hist_bins: 64,
            psf_fraction: 1.0,
            downsample_factor: 2,
        }
    }
}

impl EcleanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.plateau_count_threshold > 0.0) {
            return Err(Error::param("plateau_count_threshold must be positive"));
        }
        if self.hist_bins < 8 {
            return Err(Error::param(format!(
                "hist_bins must be at least 8, got {}",
                self.hist_bins
            )));
        }
        if !(self.psf_fraction > 0.0 && self.psf_fraction <= 1.0) {
            return Err(Error::param(format!(
                "psf_fraction must lie in (0, 1], got {}",
                self.psf_fraction
            )));
        }
        if self.downsample_factor == 0 {
            return Err(Error::param("downsample_factor must be at least 1"));
        }
        Ok(())
    }
}

/// Intensity cutoff α for an image in `[0, 1]`.
///
/// Counts of the decimated image are binned and divided by the largest
/// count; starting at the most populated bin and moving toward higher
/// intensity, α is the lower edge of the first bin whose normalized count is
/// below the threshold.
pub fn intensity_cutoff(s: &Spectrogram, p: &EcleanParams) -> f64 {
    let bins = p.hist_bins;
    let mut hist = vec![0usize; bins];
    let step = p.downsample_factor;
    for r in (0..s.rows()).step_by(step) {
        for c in (0..s.cols()).step_by(step) {
            let v = s.get(r, c).clamp(0.0, 1.0);
            hist[((v * bins as f64) as usize).min(bins - 1)] += 1;
        }
    }
    let peak = *hist.iter().max().unwrap() as f64;
    // Ties go to the brighter bin, and a count exactly at the threshold does
    // not end the mound: both keep the cutoff on the aggressive side.
    let mode = hist.iter().rposition(|h| *h as f64 == peak).unwrap();
    let idx = (mode + 1..bins)
        .find(|i| (hist[*i] as f64 / peak) < p.plateau_count_threshold)
        .unwrap_or(mode);
    idx as f64 / bins as f64
}

/// Clean one column: extract up to `n_peaks` peaks, stopping early once the
/// residual maximum falls below `alpha`.
fn clean_column(col: &[f64], n_peaks: usize, alpha: f64, psf_fraction: f64) -> Vec<f64> {
    let n = col.len();
    let mut residual = col.to_vec();
    let mut out = vec![0.0; n];
    for _ in 0..n_peaks {
        let (pos, amp) = residual
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, v)| if *v > best.1 { (i, *v) } else { best });
        if amp <= 0.0 || amp < alpha {
            break;
        }
        let removed = psf_fraction * amp;
        out[pos] += removed;
        for (k, w) in PSF.iter().enumerate() {
            let Some(j) = (pos + k).checked_sub(1).filter(|j| *j < n) else {
                continue;
            };
            residual[j] = (residual[j] - removed * w).max(0.0);
        }
    }
    out
}

/// Number of pixels at or above `alpha` in each column.
pub fn peaks_per_column(s: &Spectrogram, alpha: f64) -> Vec<usize> {
    (0..s.cols())
        .map(|c| (0..s.rows()).filter(|r| s.get(*r, c) >= alpha).count())
        .collect()
}

pub fn eclean(s: &Spectrogram, p: &EcleanParams) -> Result<Spectrogram> {
    p.validate()?;
    if let Some(v) = s.values().iter().find(|v| **v > 1.0 + 1e-9) {
        return Err(Error::param(format!(
            "eCLEAN expects values in [0, 1], found {v}"
        )));
    }
    let first = s.values()[0];
    if s.values().iter().all(|v| *v == first) {
        // Single intensity: α is that intensity and every column passes.
        return Ok(s.clone());
    }
    let alpha = intensity_cutoff(s, p);
    let counts = peaks_per_column(s, alpha);
    let mut out = s.clone();
    for (c, n_peaks) in counts.into_iter().enumerate() {
        let cleaned = clean_column(&s.column(c), n_peaks, alpha, p.psf_fraction);
        out.set_column(c, &cleaned);
    }
    Ok(out)
}
