use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest numerator/denominator accepted for a resampling ratio.
pub const MAX_RATIO_TERM: u32 = 512;

/// Kaiser β of the anti-alias prototype.
pub const KAISER_BETA: f64 = 8.0;

/// Prototype half-length per unit of `max(p, q)`.
const HALF_LEN_PER_TERM: usize = 10;

/// Uniformly sampled complex baseband series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::param(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(TimeSeries {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean power `E|x|^2`.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Reduced `p/q` with `p, q <= max_term` equal to `ratio` (to 1e-9 relative),
/// preferring the smallest denominator.
pub fn rational_ratio(ratio: f64, max_term: u32) -> Option<(u32, u32)> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return None;
    }
    for q in 1..=max_term {
        let p = (ratio * q as f64).round();
        if p < 1.0 || p > max_term as f64 {
            continue;
        }
        if ((p / q as f64) - ratio).abs() <= 1e-9 * ratio {
            return Some((p as u32, q));
        }
    }
    None
}

/// Polyphase rational resampling with a Kaiser-windowed sinc anti-alias filter.
///
/// The cutoff sits at the smaller of the input and output Nyquist rates. Output
/// length is `floor(len * p / q)` and the filter's group delay is compensated.
pub fn resample(ts: &TimeSeries, target_rate_hz: f64) -> Result<TimeSeries> {
    if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
        return Err(Error::param(format!(
            "target rate must be positive, got {target_rate_hz}"
        )));
    }
    let ratio = target_rate_hz / ts.sample_rate_hz;
    let (p, q) = rational_ratio(ratio, MAX_RATIO_TERM).ok_or_else(|| {
        Error::param(format!(
            "rate ratio {target_rate_hz}/{} is not a rational with terms <= {MAX_RATIO_TERM}",
            ts.sample_rate_hz
        ))
    })?;
    if p == q {
        return Ok(ts.clone());
    }
    let (p, q) = (p as usize, q as usize);
    let taps = anti_alias_taps(p, q);
    let delay = (taps.len() - 1) / 2;
    let x = ts.samples();
    let n_out = x.len() * p / q;

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        // Centre of the filter in the zero-stuffed (rate p*fs) domain.
        let m = n * q + delay;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut k = m % p;
        while k < taps.len() && k <= m {
            let j = (m - k) / p;
            if j < x.len() {
                acc += x[j] * taps[k];
            }
            k += p;
        }
        out.push(acc);
    }
    TimeSeries::new(out, target_rate_hz)
}

/// Prototype low-pass at the zero-stuffed rate, DC gain `p`.
fn anti_alias_taps(p: usize, q: usize) -> Vec<f64> {
    let max_pq = p.max(q);
    let half = HALF_LEN_PER_TERM * max_pq;
    let len = 2 * half + 1;
    let cutoff = 0.5 / max_pq as f64;
    let denom = bessel_i0(KAISER_BETA);
    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 - half as f64;
            let r = t / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / denom;
            2.0 * cutoff * sinc(2.0 * cutoff * t) * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    let gain = p as f64 / sum;
    taps.iter_mut().for_each(|h| *h *= gain);
    taps
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= y / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}
