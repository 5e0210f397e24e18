use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::defects::{inject_defect, DefectKind};
use super::scripts::{sample_script, ActivityClass, MotionScript};
use super::simulate::{simulate, RadarConfig};
use crate::error::{Error, Result};
use crate::sigcore::{
    io, resample, stft_spectrogram, Manifest, Origin, Record, Spectrogram, StftParams, TimeSeries,
};

/// Aspect angles drawn for every sample, degrees.
pub const ASPECT_ANGLES_DEG: [f64; 4] = [0.0, 30.0, 45.0, 60.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub radar: RadarConfig,
    pub classes: Vec<ActivityClass>,
    pub n_per_class: usize,
    pub defect_fraction: f64,
    pub seed: u64,
    /// Rate the raw return is downsampled to before the STFT, Hz.
    pub operating_rate_hz: f64,
    pub stft: StftParams,
    /// Store the raw baseband return next to each clean record.
    pub write_raw: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            radar: RadarConfig::default(),
            classes: ActivityClass::ALL.to_vec(),
            n_per_class: 60,
            defect_fraction: 0.0,
            seed: 0,
            operating_rate_hz: 1200.0,
            stft: StftParams::reference(),
            write_raw: true,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.stft.validate()?;
        if self.n_per_class == 0 {
            return Err(Error::param("n_per_class must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.defect_fraction) {
            return Err(Error::param(format!(
                "defect_fraction must lie in [0, 1), got {}",
                self.defect_fraction
            )));
        }
        if self.classes.is_empty() {
            return Err(Error::param("no classes requested"));
        }
        Ok(())
    }

    /// Defect records per class.
    pub fn defects_per_class(&self) -> usize {
        (self.defect_fraction * self.n_per_class as f64).round() as usize
    }
}

/// SplitMix64 finalizer; spreads `seed ^ index` over the whole seed space.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = (seed ^ index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One simulated sample before anything is written.
#[derive(Debug, Clone)]
pub struct Sample {
    pub class: ActivityClass,
    pub aspect_deg: f64,
    pub seed: u64,
    pub raw: TimeSeries,
}

/// Aspect angle and motion script drawn for a sample seed.
pub fn draw_sample(class: ActivityClass, seed: u64) -> (f64, MotionScript) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aspect_deg = ASPECT_ANGLES_DEG[rng.random_range(0..ASPECT_ANGLES_DEG.len())];
    (aspect_deg, sample_script(class, &mut rng, seed))
}

/// Draw the script and aspect for a sample seed and render its raw return.
pub fn simulate_sample(radar: &RadarConfig, class: ActivityClass, seed: u64) -> Result<Sample> {
    let (aspect_deg, script) = draw_sample(class, seed);
    let cfg = RadarConfig {
        aspect_deg,
        ..*radar
    };
    Ok(Sample {
        class,
        aspect_deg,
        seed,
        raw: simulate(&cfg, &script)?,
    })
}

/// Downsample to the operating rate and take the power spectrogram.
pub fn front_end(raw: &TimeSeries, operating_rate_hz: f64, stft: &StftParams) -> Result<Spectrogram> {
    let ts = resample(raw, operating_rate_hz)?;
    stft_spectrogram(&ts, stft)
}

fn max_normalized(s: Spectrogram) -> Spectrogram {
    let m = s.max();
    if m > 0.0 {
        s.scaled(1.0 / m)
    } else {
        s
    }
}

/// Simulate a labelled dataset under `out_dir`.
///
/// Each class gets `n_per_class` records; the last `round(defect_fraction·n)`
/// of them are fabricated defects cycling through the kinematic defect kinds.
/// Records are written as power spectrograms (`<class>/<class>_NNNN.sgrm`);
/// clean ones also keep their raw return (`.sgiq`) when `write_raw` is set.
/// The manifest goes to `out_dir/manifest.jsonl`.
pub fn make_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let n = cfg.n_per_class;
    let n_def = cfg.defects_per_class();
    let jobs: Vec<(ActivityClass, usize)> = cfg
        .classes
        .iter()
        .flat_map(|c| (0..n).map(move |i| (*c, i)))
        .collect();

    let records: Vec<Result<Record>> = jobs
        .par_iter()
        .enumerate()
        .map(|(g, (class, i))| {
            let seed = derive_seed(cfg.seed, g as u64);
            let sample = simulate_sample(&cfg.radar, *class, seed)?;
            let spec = front_end(&sample.raw, cfg.operating_rate_hz, &cfg.stft)?;
            let stem = format!("{class}/{class}_{i:04}");
            let defect = (*i >= n - n_def).then(|| DefectKind::KINEMATIC[(i - (n - n_def)) % 4]);
            let mut rec = Record::new(
                format!("{stem}.sgrm"),
                class.as_str(),
                sample.aspect_deg,
                if defect.is_some() { Origin::Defect } else { Origin::Synthetic },
            );
            match defect {
                Some(kind) => {
                    let bad = inject_defect(&max_normalized(spec), kind, derive_seed(seed, 0xDEFEC7));
                    io::write_signature(&bad, &out_dir.join(&rec.path))?;
                    rec.defect = Some(kind.as_str().to_string());
                }
                None => {
                    io::write_signature(&spec, &out_dir.join(&rec.path))?;
                    if cfg.write_raw {
                        let raw = format!("{stem}.sgiq");
                        io::write_series(&sample.raw, &out_dir.join(&raw))?;
                        rec.raw = Some(raw);
                    }
                }
            }
            Ok(rec)
        })
        .collect();
    let manifest = Manifest::new(out_dir, records.into_iter().collect::<Result<Vec<_>>>()?);
    manifest.write(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
