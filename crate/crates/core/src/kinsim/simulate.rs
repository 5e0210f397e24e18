use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scripts::MotionScript;
use crate::error::{Error, Result};
use crate::sigcore::TimeSeries;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Noise is drawn from this ChaCha stream so that the noiseless and noisy
/// renderings of one script share their scatterer phases.
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    pub carrier_hz: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub aspect_deg: f64,
    /// Full-band SNR at `sample_rate_hz`; `None` renders a noiseless return.
    pub snr_db: Option<f64>,
    /// Amplitude of the static (zero-Doppler) clutter return.
    pub clutter_amplitude: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            carrier_hz: 25e9,
            sample_rate_hz: 12.8e3,
            duration_s: 4.0,
            aspect_deg: 0.0,
            snr_db: Some(15.0),
            clutter_amplitude: 0.05,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {v}")))
            }
        };
        positive("carrier_hz", self.carrier_hz)?;
        positive("sample_rate_hz", self.sample_rate_hz)?;
        positive("duration_s", self.duration_s)?;
        if !(0.0..=90.0).contains(&self.aspect_deg) {
            return Err(Error::param(format!(
                "aspect_deg must lie in [0, 90], got {}",
                self.aspect_deg
            )));
        }
        if !(self.clutter_amplitude.is_finite() && self.clutter_amplitude >= 0.0) {
            return Err(Error::param("clutter_amplitude must be non-negative"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::param("snr_db must be finite"));
            }
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Observed Doppler shift of radial speed `v` (toward the radar positive).
    pub fn doppler_hz(&self, v_mps: f64) -> f64 {
        2.0 * v_mps * self.aspect_deg.to_radians().cos() / self.wavelength_m()
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// Render `Σ a·exp(-j4πR(t)/λ)` plus static clutter and complex AWGN.
///
/// The range of each scatterer shrinks as it approaches, so a positive
/// radial velocity yields a positive Doppler shift. Initial phases come from
/// `script.seed`, noise from an independent stream of the same seed.
pub fn simulate(cfg: &RadarConfig, script: &MotionScript) -> Result<TimeSeries> {
    cfg.validate()?;
    let n = cfg.sample_count();
    if n == 0 {
        return Err(Error::param("duration shorter than one sample"));
    }
    let fs = cfg.sample_rate_hz;
    let dt = 1.0 / fs;
    let k = 4.0 * PI * cfg.aspect_deg.to_radians().cos() / cfg.wavelength_m();

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for s in &script.scatterers {
        let mut phase = rng.random_range(0.0..2.0 * PI);
        let mut v_prev = (s.velocity)(0.0);
        for (i, xi) in x.iter_mut().enumerate() {
            if i > 0 {
                let v = (s.velocity)(i as f64 * dt);
                phase += k * 0.5 * (v + v_prev) * dt;
                v_prev = v;
            }
            *xi += Complex64::from_polar(s.amplitude, phase);
        }
    }
    if cfg.clutter_amplitude > 0.0 {
        let c = Complex64::from_polar(cfg.clutter_amplitude, rng.random_range(0.0..2.0 * PI));
        x.iter_mut().for_each(|xi| *xi += c);
    }

    if let Some(snr_db) = cfg.snr_db {
        let p = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        let sigma = (0.5 * p / 10f64.powf(snr_db / 10.0)).sqrt();
        if sigma > 0.0 {
            let mut nrng = ChaCha8Rng::seed_from_u64(script.seed);
            nrng.set_stream(NOISE_STREAM);
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            for xi in x.iter_mut() {
                *xi += Complex64::new(normal.sample(&mut nrng), normal.sample(&mut nrng));
            }
        }
    }
    TimeSeries::new(x, fs)
}
