//! Fabricated failure modes standing in for bad generator outputs.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::{Axes, Spectrogram};

/// Half-width of the zero-Doppler clutter band used by the injectors, Hz.
pub const CLUTTER_BAND_HZ: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    /// Strong simultaneous positive and negative components.
    MirrorBleed,
    /// Clutter only.
    NoTarget,
    /// Randomized envelope.
    Aperiodic,
    /// Torso band pushed outside the limb bands.
    TorsoAboveLegs,
    /// Near-duplicate of the input.
    Clone,
}

impl DefectKind {
    pub const ALL: [DefectKind; 5] = [
        DefectKind::MirrorBleed,
        DefectKind::NoTarget,
        DefectKind::Aperiodic,
        DefectKind::TorsoAboveLegs,
        DefectKind::Clone,
    ];

    /// Kinds that break kinematics (everything but `Clone`).
    pub const KINEMATIC: [DefectKind; 4] = [
        DefectKind::MirrorBleed,
        DefectKind::NoTarget,
        DefectKind::Aperiodic,
        DefectKind::TorsoAboveLegs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectKind::MirrorBleed => "mirror_bleed",
            DefectKind::NoTarget => "no_target",
            DefectKind::Aperiodic => "aperiodic",
            DefectKind::TorsoAboveLegs => "torso_above_legs",
            DefectKind::Clone => "clone",
        }
    }
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown defect kind `{s}`")))
    }
}

fn freq_axis(s: &Spectrogram) -> Vec<f64> {
    s.freq_axis_or(&Axes::centered(s.rows(), s.cols(), 1200.0, 4.0))
}

/// Row closest to zero Doppler.
fn dc_row(freq: &[f64]) -> usize {
    (0..freq.len())
        .min_by(|a, b| freq[*a].abs().total_cmp(&freq[*b].abs()))
        .unwrap()
}

fn normalize(mut s: Spectrogram) -> Spectrogram {
    let m = s.max();
    if m > 0.0 {
        s.map_values(|v| v / m);
    }
    s
}

/// Return a copy of `s` (values in `[0, 1]`) exhibiting the named defect.
pub fn inject_defect(s: &Spectrogram, kind: DefectKind, seed: u64) -> Spectrogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        DefectKind::MirrorBleed => mirror_bleed(s, &mut rng),
        DefectKind::NoTarget => no_target(s, &mut rng),
        DefectKind::Aperiodic => aperiodic(s, &mut rng),
        DefectKind::TorsoAboveLegs => torso_above_legs(s),
        DefectKind::Clone => clone_with_noise(s, &mut rng),
    }
}

fn mirror_bleed(s: &Spectrogram, rng: &mut ChaCha8Rng) -> Spectrogram {
    let rel = rng.random_range(0.75..0.9);
    let m = s.mirrored();
    let values = s
        .values()
        .iter()
        .zip(m.values())
        .map(|(v, w)| v + rel * w)
        .collect();
    normalize(Spectrogram::from_parts(
        s.rows(),
        s.cols(),
        values,
        s.axes().cloned(),
        s.scale(),
    ))
}

fn no_target(s: &Spectrogram, rng: &mut ChaCha8Rng) -> Spectrogram {
    let freq = freq_axis(s);
    let in_band: Vec<bool> = freq.iter().map(|f| f.abs() <= CLUTTER_BAND_HZ).collect();
    let clutter_peak = (0..s.rows())
        .filter(|r| in_band[*r])
        .flat_map(|r| (0..s.cols()).map(move |c| (r, c)))
        .map(|(r, c)| s.get(r, c))
        .fold(0.0, f64::max);
    let reference = if clutter_peak > 0.0 { clutter_peak } else { s.max() };
    // Speckle 60 dB under the faint clutter: invisible after dB clipping.
    let speckle = 1e-6 * 0.1 * reference;
    let mut out = s.clone();
    for r in 0..s.rows() {
        for c in 0..s.cols() {
            let v = if in_band[r] {
                0.1 * s.get(r, c)
            } else {
                let e: f64 = Exp1.sample(rng);
                speckle * e
            };
            out.set(r, c, v);
        }
    }
    out
}

/// Column blocks used by the aperiodic scrambler.
pub const APERIODIC_BLOCKS: usize = 8;
/// Doppler gain of the aperiodic drift: one cycle over the record, random
/// phase, between `MID - AMP` and `MID + AMP`.
const DRIFT_MID: f64 = 0.6;
const DRIFT_AMP: f64 = 0.35;

fn aperiodic(s: &Spectrogram, rng: &mut ChaCha8Rng) -> Spectrogram {
    let cols = s.cols();
    let block = cols.div_ceil(APERIODIC_BLOCKS).max(1);
    let mut order: Vec<usize> = (0..cols).step_by(block).collect();
    order.shuffle(rng);
    let sources: Vec<usize> = order
        .into_iter()
        .flat_map(|b| b..(b + block).min(cols))
        .collect();
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let freq = freq_axis(s);
    let dc = dc_row(&freq);
    let mut out = Spectrogram::zeros(s.rows(), s.cols());
    for (c_out, c) in sources.into_iter().enumerate() {
        // Slow Doppler drift spanning the whole record.
        let x = (c_out as f64 + 0.5) / cols as f64;
        let g = DRIFT_MID + DRIFT_AMP * (std::f64::consts::TAU * x + phase).cos();
        let col = s.column(c);
        let mut new = vec![0.0; col.len()];
        for (r, v) in new.iter_mut().enumerate() {
            let src = dc as f64 + (r as f64 - dc as f64) / g;
            if src >= 0.0 && src <= (col.len() - 1) as f64 {
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(col.len() - 1);
                let t = src - i0 as f64;
                *v = (1.0 - t) * col[i0] + t * col[i1];
            }
        }
        out.set_column(c_out, &new);
    }
    let out = Spectrogram::from_parts(
        s.rows(),
        s.cols(),
        out.values().to_vec(),
        s.axes().cloned(),
        s.scale(),
    );
    normalize(out)
}

/// Share of the torso's distance from DC that the compressed limb content
/// may reach.
pub const TORSO_INNER_SHARE: f64 = 0.7;

/// Relative level that delimits the torso lobe and the column's extent.
const LOBE_LEVEL: f64 = 0.1;
const EXTENT_LEVEL: f64 = 0.01;

/// Radially compress everything but the torso lobe toward DC until it lies
/// well inside the torso band, so the torso becomes the outermost component
/// of every column. Vacated rows take the column's median (noise floor).
fn torso_above_legs(s: &Spectrogram) -> Spectrogram {
    let freq = freq_axis(s);
    let dc = dc_row(&freq) as isize;
    let mut out = s.clone();
    for c in 0..s.cols() {
        let col = s.column(c);
        let peak = col.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        let t = col.iter().position(|v| *v == peak).unwrap();
        let reach = (t as isize - dc).abs();
        // Contiguous torso lobe around the peak.
        let mut lo = t;
        while lo > 0 && col[lo - 1] >= LOBE_LEVEL * peak && col[lo - 1] < col[lo] {
            lo -= 1;
        }
        let mut hi = t;
        while hi + 1 < col.len() && col[hi + 1] >= LOBE_LEVEL * peak && col[hi + 1] < col[hi] {
            hi += 1;
        }
        let extent = col
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= EXTENT_LEVEL * peak)
            .map(|(r, _)| (r as isize - dc).abs())
            .max()
            .unwrap_or(0);
        if reach == 0 || extent <= reach {
            continue;
        }
        let k = TORSO_INNER_SHARE * reach as f64 / extent as f64;
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let floor = sorted[sorted.len() / 2];
        let mut new = vec![floor; col.len()];
        for (r, v) in col.iter().enumerate() {
            if (lo..=hi).contains(&r) || *v <= floor {
                continue;
            }
            let d = r as isize - dc;
            let target = (dc + (d as f64 * k).round() as isize) as usize;
            new[target] = new[target].max(*v);
        }
        new[lo..=hi].copy_from_slice(&col[lo..=hi]);
        out.set_column(c, &new);
    }
    normalize(out)
}

fn clone_with_noise(s: &Spectrogram, rng: &mut ChaCha8Rng) -> Spectrogram {
    let mut out = s.clone();
    out.map_values(|v| (v + rng.random_range(-0.01..=0.01)).clamp(0.0, 1.0));
    out
}
