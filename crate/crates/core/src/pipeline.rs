//! Preprocessing chain shared by the CLI, the tuner and the test suites.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::eclean::{eclean, EcleanParams};
use crate::error::{Error, Result};
use crate::kinrules::{self, RuleConfig};
use crate::kinsim::{front_end, ActivityClass};
use crate::sigcore::{
    io, to_grayscale_image, Manifest, Record, Scale, Spectrogram, StftParams, TimeSeries,
    DEFAULT_DYN_RANGE_DB,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Preprocess {
    pub operating_rate_hz: f64,
    pub stft: StftParams,
    pub image_rows: usize,
    pub image_cols: usize,
    pub dyn_range_db: f64,
    /// `None` skips clutter suppression.
    pub eclean: Option<EcleanParams>,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            operating_rate_hz: 1200.0,
            stft: StftParams::reference(),
            image_rows: 100,
            image_cols: 100,
            dyn_range_db: DEFAULT_DYN_RANGE_DB,
            eclean: Some(EcleanParams::default()),
        }
    }
}

impl Preprocess {
    /// Grayscale conversion followed by eCLEAN.
    ///
    /// eCLEAN runs on the normalized image because its histogram cutoff is
    /// defined on `[0, 1]` intensities.
    pub fn image_from_power(&self, s: &Spectrogram) -> Result<Spectrogram> {
        if s.scale() == Scale::Grayscale {
            return Err(Error::param(
                "input is already a processed grayscale image; preprocessing it again is refused",
            ));
        }
        let g = to_grayscale_image(s, self.image_rows, self.image_cols, self.dyn_range_db)?;
        match &self.eclean {
            Some(p) => eclean(&g, p),
            None => Ok(g),
        }
    }

    /// Full chain from a raw return: resample, STFT, grayscale, eCLEAN.
    pub fn image_from_raw(&self, raw: &TimeSeries) -> Result<Spectrogram> {
        self.image_from_power(&front_end(raw, self.operating_rate_hz, &self.stft)?)
    }

    /// Process one manifest record, preferring its raw return when present.
    pub fn process_record(&self, m: &Manifest, r: &Record) -> Result<Spectrogram> {
        match &r.raw {
            Some(raw) => self.image_from_raw(&io::read_series(&m.resolve(raw))?),
            None => self.image_from_power(&io::read_any(&m.path_of(r))?),
        }
    }
}

/// Output path of a processed record: same relative layout, `.sgrm`.
pub fn processed_path(rec: &Record) -> PathBuf {
    let p = Path::new(&rec.path);
    let rel = if p.is_absolute() {
        PathBuf::from(p.file_name().unwrap_or_default())
    } else {
        p.to_path_buf()
    };
    rel.with_extension("sgrm")
}

/// Process every record of `m` into `out_dir` and write its manifest.
///
/// Output records drop their raw sidecar and carry the rule verdicts of
/// the processed image for known classes.
pub fn preprocess_manifest(pre: &Preprocess, rules: &RuleConfig, m: &Manifest, out_dir: &Path) -> Result<Manifest> {
    let records = m
        .records
        .par_iter()
        .map(|r| {
            let img = pre.process_record(m, r).map_err(|e| match e {
                Error::Param(msg) => Error::Param(format!("{}: {msg}", r.path)),
                other => other,
            })?;
            let rel = processed_path(r);
            io::write_signature(&img, &out_dir.join(&rel))?;
            let mut rec = r.clone();
            rec.path = rel.to_string_lossy().into_owned();
            rec.raw = None;
            if let Ok(class) = r.class.parse::<ActivityClass>() {
                rec.set_verdict(&kinrules::evaluate(&img, class, rules));
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = Manifest::new(out_dir, records);
    out.write(&out_dir.join("manifest.jsonl"))?;
    Ok(out)
}

/// Load every record of a manifest as an image.
pub fn load_images(m: &Manifest) -> Result<Vec<Spectrogram>> {
    m.records
        .par_iter()
        .map(|r| io::read_any(&m.path_of(r)))
        .collect()
}

/// Read a manifest, attaching the path to any error.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Manifest::read(path)
}
