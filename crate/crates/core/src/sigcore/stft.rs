use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::series::TimeSeries;
use super::spectrogram::{Axes, Spectrogram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hanning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftParams {
    pub window_len: usize,
    pub overlap_len: usize,
    pub nfft: usize,
    pub window_kind: WindowKind,
}

impl Default for StftParams {
    /// 1024-point FFT, 512-sample Hanning window, 256-sample overlap.
    fn default() -> Self {
        StftParams {
            window_len: 512,
            overlap_len: 256,
            nfft: 1024,
            window_kind: WindowKind::Hanning,
        }
    }
}

impl StftParams {
    /// Setting used by the preprocessing chain and dataset writer: a
    /// 128-sample window (107 ms at 1.2 kHz) with 96 samples of overlap keeps
    /// limb swings resolved in time, which the kinematic rules depend on.
    /// The 512-sample default spans over 0.4 s and smears a gait cycle into a
    /// handful of frames.
    pub fn reference() -> Self {
        StftParams {
            window_len: 128,
            overlap_len: 96,
            ..StftParams::default()
        }
    }

    pub fn new(window_len: usize, overlap_len: usize, nfft: usize) -> Result<Self> {
        let p = StftParams {
            window_len,
            overlap_len,
            nfft,
            window_kind: WindowKind::Hanning,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::param("window length must be positive"));
        }
        if self.window_len <= self.overlap_len {
            return Err(Error::param(format!(
                "window length {} must exceed overlap {}",
                self.window_len, self.overlap_len
            )));
        }
        if self.nfft < self.window_len {
            return Err(Error::param(format!(
                "nfft {} must be at least the window length {}",
                self.nfft, self.window_len
            )));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        self.window_len - self.overlap_len
    }

    /// Number of complete frames that fit in `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop() + 1
        }
    }

    pub fn window(&self) -> Vec<f64> {
        match self.window_kind {
            WindowKind::Hanning => hann_periodic(self.window_len),
        }
    }
}

/// Periodic Hann window `0.5 - 0.5 cos(2πm/N)`.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    let n = len as f64;
    (0..len)
        .map(|m| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * m as f64 / n).cos())
        .collect()
}

/// Row index holding DFT bin `k` after centring DC.
pub fn row_of_bin(k: usize, nfft: usize) -> usize {
    (k + nfft / 2) % nfft
}

/// Centre frequency of each row of a DC-centred two-sided spectrum.
pub fn centered_freq_axis(nfft: usize, sample_rate_hz: f64) -> Vec<f64> {
    let half = (nfft / 2) as f64;
    let df = sample_rate_hz / nfft as f64;
    (0..nfft).map(|r| (r as f64 - half) * df).collect()
}

/// Squared-magnitude STFT with a DC-centred, two-sided frequency axis.
///
/// Frame `n` covers samples `[n*hop, n*hop + window_len)`; trailing samples that
/// do not fill a whole frame are dropped. Row 0 is `-fs/2` for even `nfft`.
pub fn stft_spectrogram(ts: &TimeSeries, p: &StftParams) -> Result<Spectrogram> {
    p.validate()?;
    if ts.len() < p.window_len {
        return Err(Error::param(format!(
            "series of {} samples is shorter than one {}-sample window",
            ts.len(),
            p.window_len
        )));
    }
    let frames = p.frame_count(ts.len());
    let hop = p.hop();
    let nfft = p.nfft;
    let window = p.window();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let x = ts.samples();

    let mut values = vec![0.0; nfft * frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for f in 0..frames {
        let start = f * hop;
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (m, w) in window.iter().enumerate() {
            buf[m] = x[start + m] * *w;
        }
        fft.process(&mut buf);
        for (k, c) in buf.iter().enumerate() {
            values[row_of_bin(k, nfft) * frames + f] = c.norm_sqr();
        }
    }

    let fs = ts.sample_rate_hz();
    let time_s = (0..frames)
        .map(|f| (f * hop) as f64 / fs + p.window_len as f64 / (2.0 * fs))
        .collect();
    Spectrogram::new(nfft, frames, values)?.with_axes(Axes {
        freq_hz: centered_freq_axis(nfft, fs),
        time_s,
    })
}
