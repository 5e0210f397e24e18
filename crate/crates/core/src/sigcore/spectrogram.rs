use crate::error::{Error, Result};

/// Physical meaning of the stored values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    /// Linear power, straight out of the STFT (or max-normalized power).
    #[default]
    Power,
    /// dB-compressed grayscale image in `[0, 1]`.
    Grayscale,
}

/// Per-row frequency centres and per-column time centres.
#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub freq_hz: Vec<f64>,
    pub time_s: Vec<f64>,
}

impl Axes {
    /// Uniform axes for an image spanning `[-fs/2, fs/2)` over `duration_s`.
    pub fn uniform(rows: usize, cols: usize, sample_rate_hz: f64, duration_s: f64) -> Self {
        let df = sample_rate_hz / rows as f64;
        let half = (rows / 2) as f64;
        let dt = duration_s / cols as f64;
        Axes {
            freq_hz: (0..rows).map(|r| (r as f64 - half) * df).collect(),
            time_s: (0..cols).map(|c| (c as f64 + 0.5) * dt).collect(),
        }
    }

    /// Axes whose row centres are symmetric about DC, `-fs/2 + (r + ½)·fs/rows`.
    /// Used for images that arrive without metadata.
    pub fn centered(rows: usize, cols: usize, sample_rate_hz: f64, duration_s: f64) -> Self {
        let df = sample_rate_hz / rows as f64;
        let dt = duration_s / cols as f64;
        Axes {
            freq_hz: (0..rows)
                .map(|r| -0.5 * sample_rate_hz + (r as f64 + 0.5) * df)
                .collect(),
            time_s: (0..cols).map(|c| (c as f64 + 0.5) * dt).collect(),
        }
    }

    pub fn freq_step(&self) -> f64 {
        step(&self.freq_hz)
    }

    pub fn time_step(&self) -> f64 {
        step(&self.time_s)
    }
}

fn step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        return 1.0;
    }
    (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
}

fn strictly_increasing(axis: &[f64]) -> bool {
    axis.windows(2).all(|w| w[1] > w[0])
}

/// Time × Doppler magnitude image.
///
/// Values are stored row-major; rows are Doppler bins running from the most
/// negative to the most positive frequency, columns are time frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    axes: Option<Axes>,
    scale: Scale,
}

impl Spectrogram {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("spectrogram must have at least one row and column"));
        }
        if values.len() != rows * cols {
            return Err(Error::param(format!(
                "expected {} values for a {rows}x{cols} grid, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(format!(
                "spectrogram values must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Spectrogram {
            rows,
            cols,
            values,
            axes: None,
            scale: Scale::Power,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Spectrogram {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            axes: None,
            scale: Scale::Power,
        }
    }

    pub fn with_axes(mut self, axes: Axes) -> Result<Self> {
        if axes.freq_hz.len() != self.rows || axes.time_s.len() != self.cols {
            return Err(Error::param(format!(
                "axes of length {}x{} do not match a {}x{} grid",
                axes.freq_hz.len(),
                axes.time_s.len(),
                self.rows,
                self.cols
            )));
        }
        if !strictly_increasing(&axes.freq_hz) || !strictly_increasing(&axes.time_s) {
            return Err(Error::param("axes must be strictly increasing"));
        }
        self.axes = Some(axes);
        Ok(self)
    }

    pub fn without_axes(mut self) -> Self {
        self.axes = None;
        self
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn axes(&self) -> Option<&Axes> {
        self.axes.as_ref()
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.cols + col] = v;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub(crate) fn set_column(&mut self, col: usize, column: &[f64]) {
        for (r, v) in column.iter().enumerate() {
            self.set(r, col, *v);
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Frequency axis, falling back to `fallback` when the image carries none.
    pub fn freq_axis_or(&self, fallback: &Axes) -> Vec<f64> {
        match &self.axes {
            Some(a) => a.freq_hz.clone(),
            None => resample_axis(&fallback.freq_hz, self.rows),
        }
    }

    pub fn time_axis_or(&self, fallback: &Axes) -> Vec<f64> {
        match &self.axes {
            Some(a) => a.time_s.clone(),
            None => resample_axis(&fallback.time_s, self.cols),
        }
    }

    /// Flip the Doppler axis: content at `f` moves to `-f`. Rows are reversed
    /// and, when present, the frequency axis becomes its negated reverse.
    pub fn mirrored(&self) -> Spectrogram {
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, self.get(self.rows - 1 - r, c));
            }
        }
        if let Some(a) = out.axes.as_mut() {
            a.freq_hz = self.axes.as_ref().unwrap().freq_hz.iter().rev().map(|f| -f).collect();
        }
        out
    }

    /// Multiply every value by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Spectrogram {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub(crate) fn map_values(&mut self, mut f: impl FnMut(f64) -> f64) {
        self.values.iter_mut().for_each(|v| *v = f(*v));
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        axes: Option<Axes>,
        scale: Scale,
    ) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Spectrogram {
            rows,
            cols,
            values,
            axes,
            scale,
        }
    }
}

/// Linearly re-grid an axis to `n` points spanning the same sample-centre geometry.
pub(crate) fn resample_axis(axis: &[f64], n: usize) -> Vec<f64> {
    let m = axis.len();
    let ratio = m as f64 / n as f64;
    (0..n)
        .map(|i| interp_extrapolate(axis, (i as f64 + 0.5) * ratio - 0.5))
        .collect()
}

fn interp_extrapolate(axis: &[f64], x: f64) -> f64 {
    let m = axis.len();
    if m == 1 {
        return axis[0];
    }
    let i0 = (x.floor() as isize).clamp(0, m as isize - 2) as usize;
    let t = x - i0 as f64;
    axis[i0] + t * (axis[i0 + 1] - axis[i0])
}
